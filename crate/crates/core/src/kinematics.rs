//! Unicycle robot state, exact arc integration, control windows and the
//! two-state steering cost used to pick nodes and controls.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geom::Point;

/// Below this angular rate a control is integrated as a straight segment.
pub const STRAIGHT_OMEGA_EPS: f64 = 1e-9;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let wrapped = (a + PI).rem_euclid(TAU) - PI;
    if wrapped <= -PI {
        wrapped + TAU
    } else {
        wrapped
    }
}

/// Pose, twist and simulation timestamp of a differential-drive robot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub t: f64,
}

impl RobotState {
    /// A robot at rest.
    pub fn at_rest(x: f64, y: f64, theta: f64, t: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
            v: 0.0,
            omega: 0.0,
            t,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn heading(&self) -> (f64, f64) {
        (self.theta.cos(), self.theta.sin())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub v: f64,
    pub omega: f64,
}

impl ControlInput {
    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

/// Applies `u` for `dt` seconds.
///
/// The unicycle model is integrated in closed form: a straight segment when
/// the angular rate is (numerically) zero, a circular arc of radius `v/omega`
/// otherwise. The returned twist is the applied control.
pub fn step_kinematics(state: &RobotState, u: ControlInput, dt: f64) -> RobotState {
    debug_assert!(dt > 0.0, "dt must be positive");
    let theta = state.theta;
    let (x, y, theta_new) = if u.omega.abs() < STRAIGHT_OMEGA_EPS {
        (
            state.x + u.v * dt * theta.cos(),
            state.y + u.v * dt * theta.sin(),
            theta,
        )
    } else {
        let radius = u.v / u.omega;
        let end = theta + u.omega * dt;
        (
            state.x + radius * (end.sin() - theta.sin()),
            state.y - radius * (end.cos() - theta.cos()),
            end,
        )
    };
    RobotState {
        x,
        y,
        theta: normalize_angle(theta_new),
        v: u.v,
        omega: u.omega,
        t: state.t + dt,
    }
}

/// Velocities reachable within one tree edge under the acceleration limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlWindow {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl ControlWindow {
    /// Control at lattice point `(i, j)` of a `(nv + 1) x (nw + 1)` grid that
    /// includes both window endpoints.
    pub fn lattice_point(&self, i: usize, j: usize, nv: usize, nw: usize) -> ControlInput {
        let v = if nv == 0 {
            self.v_min
        } else {
            self.v_min + (self.v_max - self.v_min) * i as f64 / nv as f64
        };
        let omega = if nw == 0 {
            self.omega_min
        } else {
            self.omega_min + (self.omega_max - self.omega_min) * j as f64 / nw as f64
        };
        ControlInput::new(v, omega)
    }

    /// Iterates the control lattice in row-major `(i, j)` order.
    pub fn lattice(&self, nv: usize, nw: usize) -> impl Iterator<Item = ControlInput> + '_ {
        (0..=nv).flat_map(move |i| (0..=nw).map(move |j| self.lattice_point(i, j, nv, nw)))
    }
}

/// Forward-only velocity window and angular-rate window for one edge of
/// duration `params.dt`.
pub fn reachable_control_window(state: &RobotState, params: &PlannerParams) -> ControlWindow {
    let dv = params.a_max * params.dt;
    let dw = params.alpha_max * params.dt;
    ControlWindow {
        v_min: (state.v - dv).clamp(0.0, params.v_max),
        v_max: (state.v + dv).clamp(0.0, params.v_max),
        omega_min: (state.omega - dw).clamp(-params.omega_max, params.omega_max),
        omega_max: (state.omega + dw).clamp(-params.omega_max, params.omega_max),
    }
}

/// Steering cost from `from` toward `target`.
///
/// `w1 * |from - target| / |from - goal| + w2 * angle(heading, target - from)`.
/// The position term is 0 when `from` sits exactly on the goal, the angle term
/// is 0 when `target` coincides with `from`.
pub fn state_cost(from: &RobotState, target: Point, goal: Point, params: &PlannerParams) -> f64 {
    let here = from.position();
    let to_goal = here.distance(&goal);
    let to_target = here.distance(&target);
    let position_term = if to_goal == 0.0 { 0.0 } else { to_target / to_goal };
    let angle_term = if to_target == 0.0 {
        0.0
    } else {
        let (hx, hy) = from.heading();
        let cos = (hx * (target.x - here.x) + hy * (target.y - here.y)) / to_target;
        cos.clamp(-1.0, 1.0).acos()
    };
    params.w1 * position_term + params.w2 * angle_term
}

/// Tunables shared by all three planners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub v_max: f64,
    pub a_max: f64,
    pub omega_max: f64,
    pub alpha_max: f64,
    /// Seconds per tree edge (and per receding-horizon cycle).
    pub dt: f64,
    /// Maximum rooted-tree depth.
    pub horizon: usize,
    pub delta_nv: usize,
    pub delta_nw: usize,
    pub w1: f64,
    pub w2: f64,
    /// Risk weight in node selection.
    pub beta: f64,
    /// Proximity threshold deciding which structure a sample grows.
    pub lambda: f64,
    pub meet_radius: f64,
    /// Mixture ratio of the heuristic Gaussian components.
    pub h_r: f64,
    /// Heuristic Gaussian std; `None` means 2% of the map width.
    pub sigma_kappa: Option<f64>,
    pub goal_radius: f64,
    pub iterations_per_cycle: usize,
    pub risk_cap: f64,
    /// Keep the goal sub-tree after the rooted tree has used it.
    pub retain_goal_tree: bool,
    /// Heuristic samples drawn per met sub-tree; `None` means one per path node.
    pub heuristic_burst: Option<usize>,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            a_max: 0.5,
            omega_max: 0.5,
            alpha_max: 0.5,
            dt: 0.5,
            horizon: 10,
            delta_nv: 4,
            delta_nw: 4,
            w1: 1.0,
            w2: 0.35,
            beta: 2.0,
            lambda: 3.0,
            meet_radius: 1.5,
            h_r: 0.7,
            sigma_kappa: None,
            goal_radius: 1.0,
            iterations_per_cycle: 200,
            risk_cap: 0.8,
            retain_goal_tree: false,
            heuristic_burst: None,
        }
    }
}

impl PlannerParams {
    pub fn sigma_kappa_for(&self, map_width: f64) -> f64 {
        self.sigma_kappa.unwrap_or(0.02 * map_width)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("omega_max", self.omega_max),
            ("alpha_max", self.alpha_max),
            ("dt", self.dt),
            ("w1", self.w1),
            ("lambda", self.lambda),
            ("meet_radius", self.meet_radius),
            ("goal_radius", self.goal_radius),
            ("risk_cap", self.risk_cap),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::invalid(name, format!("must be positive, got {value}")));
            }
        }
        for (name, value) in [("w2", self.w2), ("beta", self.beta)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ConfigError::invalid(name, format!("must be non-negative, got {value}")));
            }
        }
        if !(0.0..=1.0).contains(&self.h_r) {
            return Err(ConfigError::invalid(
                "h_r",
                format!("must lie in [0, 1], got {}", self.h_r),
            ));
        }
        if self.risk_cap > 1.0 {
            return Err(ConfigError::invalid("risk_cap", "must be at most 1"));
        }
        if let Some(s) = self.sigma_kappa {
            if !(s.is_finite() && s > 0.0) {
                return Err(ConfigError::invalid("sigma_kappa", "must be positive"));
            }
        }
        if self.horizon == 0 {
            return Err(ConfigError::invalid("horizon", "must be at least 1"));
        }
        if self.delta_nv == 0 || self.delta_nw == 0 {
            return Err(ConfigError::invalid("delta_nv/delta_nw", "must be at least 1"));
        }
        if self.iterations_per_cycle == 0 {
            return Err(ConfigError::invalid("iterations_per_cycle", "must be at least 1"));
        }
        if self.heuristic_burst == Some(0) {
            return Err(ConfigError::invalid("heuristic_burst", "must be at least 1"));
        }
        Ok(())
    }

    /// Sets one parameter from its textual form, as used by `key=value`
    /// overrides on the command line and in scenario files.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value
                .trim()
                .parse()
                .map_err(|_| ConfigError::invalid(key, format!("cannot parse `{value}`")))
        }
        match key {
            "v_max" => self.v_max = num(key, value)?,
            "a_max" => self.a_max = num(key, value)?,
            "omega_max" => self.omega_max = num(key, value)?,
            "alpha_max" => self.alpha_max = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "horizon" | "N" => self.horizon = num(key, value)?,
            "delta_nv" => self.delta_nv = num(key, value)?,
            "delta_nw" => self.delta_nw = num(key, value)?,
            "w1" => self.w1 = num(key, value)?,
            "w2" => self.w2 = num(key, value)?,
            "beta" => self.beta = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "meet_radius" => self.meet_radius = num(key, value)?,
            "h_r" => self.h_r = num(key, value)?,
            "sigma_kappa" => self.sigma_kappa = Some(num(key, value)?),
            "goal_radius" => self.goal_radius = num(key, value)?,
            "iterations_per_cycle" => self.iterations_per_cycle = num(key, value)?,
            "risk_cap" => self.risk_cap = num(key, value)?,
            "retain_goal_tree" => self.retain_goal_tree = num(key, value)?,
            "heuristic_burst" => self.heuristic_burst = Some(num(key, value)?),
            _ => return Err(ConfigError::UnknownParam(key.to_string())),
        }
        Ok(())
    }
}

//! Closed-loop episodes: the planner runs once per cycle, the robot executes
//! the first control of the chosen trajectory, and the crowd replays its
//! recorded trajectories as ground truth.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geom::Point;
use crate::kinematics::{step_kinematics, ControlInput, PlannerParams, RobotState};
use crate::planners::{PlanCycleReport, PlanCycleStats, Planner, PlannerKind, EDGE_CHECK_SUBSTEPS};
use crate::world::{parse_crowd_csv, MovingObstacle, OccupancyGrid, TrajectorySample};

/// Observed samples per pedestrian handed to the planner.
pub const OBSERVATION_HISTORY: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub grid: OccupancyGrid,
    pub start: RobotState,
    pub goal: Point,
    pub crowd: Vec<MovingObstacle>,
    pub robot_radius: f64,
    pub params: PlannerParams,
    pub max_sim_time: f64,
    pub seed: u64,
}

/// On-disk scenario description. Paths are relative to the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub grid: PathBuf,
    #[serde(default)]
    pub crowd: Option<PathBuf>,
    /// `[x, y, theta]`
    pub start: [f64; 3],
    pub goal: [f64; 2],
    #[serde(default = "default_radius")]
    pub robot_radius: f64,
    #[serde(default = "default_radius")]
    pub obstacle_radius: f64,
    pub max_sim_time: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: toml::Table,
}

fn default_radius() -> f64 {
    0.3
}

fn toml_scalar(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Scenario {
    /// Reads a scenario file together with the grid and crowd files it names.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            ConfigError::Scenario { message, .. } => ConfigError::Scenario {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ConfigError::Scenario {
            path: "<scenario>".into(),
            message: e.to_string(),
        })?;
        Self::from_file(&file, base_dir)
    }

    pub fn from_file(file: &ScenarioFile, base_dir: &Path) -> Result<Self, ConfigError> {
        let grid = OccupancyGrid::parse(&read(&base_dir.join(&file.grid))?)?;
        let crowd = match &file.crowd {
            Some(p) => parse_crowd_csv(&read(&base_dir.join(p))?, file.obstacle_radius)?,
            None => Vec::new(),
        };
        let mut params = PlannerParams::default();
        for (k, v) in &file.params {
            params.set(k, &toml_scalar(v))?;
        }
        let [x, y, theta] = file.start;
        let scenario = Scenario {
            grid,
            start: RobotState::at_rest(x, y, theta, 0.0),
            goal: Point::new(file.goal[0], file.goal[1]),
            crowd,
            robot_radius: file.robot_radius,
            params,
            max_sim_time: file.max_sim_time,
            seed: file.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        if !(self.robot_radius.is_finite() && self.robot_radius > 0.0) {
            return Err(ConfigError::invalid("robot_radius", "must be positive"));
        }
        if !(self.max_sim_time.is_finite() && self.max_sim_time > 0.0) {
            return Err(ConfigError::invalid("max_sim_time", "must be positive"));
        }
        if !self.grid.footprint_free(self.start.position(), self.robot_radius) {
            return Err(ConfigError::invalid("start", "not in free space"));
        }
        if !self.grid.footprint_free(self.goal, self.robot_radius) {
            return Err(ConfigError::invalid("goal", "not in free space"));
        }
        Ok(())
    }

    /// Number of cycles that fit in `max_sim_time`.
    pub fn max_cycles(&self) -> usize {
        (self.max_sim_time / self.params.dt - 1e-9).ceil().max(0.0) as usize
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Ground-truth position of a pedestrian at time `t`.
pub fn crowd_position(obstacle: &MovingObstacle, t: f64) -> Point {
    obstacle.position_at(t)
}

/// True when the robot disc touches an occupied cell or any pedestrian disc
/// at time `t` (tangency counts).
pub fn check_collision(
    position: Point,
    robot_radius: f64,
    grid: &OccupancyGrid,
    crowd: &[MovingObstacle],
    t: f64,
) -> bool {
    if !grid.footprint_free(position, robot_radius) {
        return true;
    }
    crowd.iter().any(|o| {
        let reach = robot_radius + o.radius();
        crowd_position(o, t).distance_sq(&position) <= reach * reach
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Robot state at the start of the cycle.
    pub state: RobotState,
    /// Control executed during the cycle; `None` when the robot held still.
    pub executed: Option<ControlInput>,
    /// Whether any audit sub-step of this cycle touched an obstacle.
    pub collided: bool,
    pub stats: PlanCycleStats,
}

/// Outcome of one episode. Contains simulated quantities only, so equal
/// inputs give byte-identical serializations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub planner: PlannerKind,
    pub seed: u64,
    pub success: bool,
    /// Simulated seconds until the goal was reached (or until the episode
    /// ended, for failures).
    pub execution_time: f64,
    pub trajectory_length: f64,
    pub collided: bool,
    pub collision_samples: usize,
    pub cycles: usize,
    pub final_state: RobotState,
    pub per_cycle: Vec<CycleRecord>,
}

/// What an observer sees at the end of each cycle.
pub struct CycleView<'a> {
    pub cycle: usize,
    pub planner: &'a Planner,
    pub scenario: &'a Scenario,
    /// State the cycle started from.
    pub state: &'a RobotState,
    pub report: &'a PlanCycleReport,
    /// Wall-clock time spent in planning, a diagnostic only.
    pub planning_time: Duration,
}

pub fn run_episode(scenario: &Scenario, kind: PlannerKind) -> Result<EpisodeResult, ConfigError> {
    run_episode_observed(scenario, kind, |_| {})
}

/// [`run_episode`] calling `observer` after each planning step, before the
/// tree is pruned.
pub fn run_episode_observed<F>(
    scenario: &Scenario,
    kind: PlannerKind,
    mut observer: F,
) -> Result<EpisodeResult, ConfigError>
where
    F: FnMut(&CycleView<'_>),
{
    scenario.validate()?;
    let params = &scenario.params;
    let dt = params.dt;
    let mut planner = Planner::new(
        kind,
        params.clone(),
        scenario.start,
        scenario.goal,
        &scenario.grid,
        scenario.robot_radius,
        scenario.seed,
    )?;
    let mut observed: Vec<MovingObstacle> = scenario
        .crowd
        .iter()
        .map(|o| {
            let first = TrajectorySample {
                t: scenario.start.t,
                pos: crowd_position(o, scenario.start.t),
            };
            MovingObstacle::new(o.id(), o.radius(), vec![first]).expect("radius already validated")
        })
        .collect();

    let in_goal = |s: &RobotState| s.position().distance(&scenario.goal) < params.goal_radius;
    let mut state = scenario.start;
    let mut success = in_goal(&state);
    let mut length = 0.0;
    let mut collision_samples = 0;
    let mut per_cycle = Vec::new();
    let max_cycles = scenario.max_cycles();

    while !success && per_cycle.len() < max_cycles {
        let cycle = per_cycle.len();
        let started = Instant::now();
        let report = planner.plan_cycle(&scenario.grid, &observed, &state);
        let planning_time = started.elapsed();
        observer(&CycleView {
            cycle,
            planner: &planner,
            scenario,
            state: &state,
            report: &report,
            planning_time,
        });

        let executed = report.trajectory.as_ref().map(|t| (t.controls[0], t.nodes[0]));
        let control = executed.map_or(ControlInput::new(0.0, 0.0), |(u, _)| u);
        let mut next = match executed {
            Some((u, _)) => step_kinematics(&state, u, dt),
            None => RobotState {
                v: 0.0,
                omega: 0.0,
                t: state.t + dt,
                ..state
            },
        };
        let mut collided = false;
        for i in 1..=EDGE_CHECK_SUBSTEPS {
            let h = dt * i as f64 / EDGE_CHECK_SUBSTEPS as f64;
            let pos = match executed {
                Some((u, _)) => step_kinematics(&state, u, h).position(),
                None => state.position(),
            };
            if check_collision(pos, scenario.robot_radius, &scenario.grid, &scenario.crowd, state.t + h) {
                collision_samples += 1;
                collided = true;
            }
        }
        if let Some((u, child)) = executed {
            length += u.v.abs() * dt;
            planner.commit(child).expect("executed node is a child of the root");
            // The tree was built with the same propagation, so its new root
            // matches the executed state exactly.
            next = planner.rooted().root().state;
        }
        per_cycle.push(CycleRecord {
            cycle,
            state,
            executed: executed.map(|_| control),
            collided,
            stats: report.stats,
        });
        state = next;
        for (obs, truth) in observed.iter_mut().zip(&scenario.crowd) {
            obs.observe(TrajectorySample {
                t: state.t,
                pos: crowd_position(truth, state.t),
            });
            obs.truncate_history(OBSERVATION_HISTORY);
        }
        success = in_goal(&state);
    }

    Ok(EpisodeResult {
        planner: kind,
        seed: scenario.seed,
        success,
        execution_time: state.t - scenario.start.t,
        trajectory_length: length,
        collided: collision_samples > 0,
        collision_samples,
        cycles: per_cycle.len(),
        final_state: state,
        per_cycle,
    })
}

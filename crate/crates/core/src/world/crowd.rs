use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, CrowdError};
use crate::geom::Point;
use crate::kinematics::PlannerParams;

/// Position std of a freshly observed obstacle, meters.
pub const PREDICTION_SIGMA0: f64 = 0.3;
/// Std added per prediction step, meters.
pub const PREDICTION_SIGMA_GROWTH: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pos: Point,
}

/// A moving obstacle described by time-stamped positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MovingObstacle {
    id: u32,
    radius: f64,
    trajectory: Vec<TrajectorySample>,
}

impl MovingObstacle {
    /// Requires a positive radius and at least one sample with strictly
    /// increasing timestamps.
    pub fn new(id: u32, radius: f64, trajectory: Vec<TrajectorySample>) -> Result<Self, ConfigError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(ConfigError::invalid(
                "obstacle radius",
                format!("{radius} for obstacle {id}"),
            ));
        }
        if trajectory.is_empty() {
            return Err(ConfigError::invalid(
                "trajectory",
                format!("obstacle {id} has no samples"),
            ));
        }
        if trajectory.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(ConfigError::invalid(
                "trajectory",
                format!("obstacle {id} timestamps are not strictly increasing"),
            ));
        }
        Ok(Self { id, radius, trajectory })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn trajectory(&self) -> &[TrajectorySample] {
        &self.trajectory
    }

    /// Appends an observation; ignored unless it is newer than the last one.
    pub fn observe(&mut self, sample: TrajectorySample) {
        if self.trajectory.last().is_none_or(|last| sample.t > last.t) {
            self.trajectory.push(sample);
        }
    }

    /// Drops all but the newest `keep` samples.
    pub fn truncate_history(&mut self, keep: usize) {
        let keep = keep.max(1);
        if self.trajectory.len() > keep {
            self.trajectory.drain(..self.trajectory.len() - keep);
        }
    }

    /// Linear interpolation between bracketing samples, clamped to the
    /// first/last sample outside the recorded span.
    pub fn position_at(&self, t: f64) -> Point {
        let traj = &self.trajectory;
        let first = traj[0];
        let last = traj[traj.len() - 1];
        if t <= first.t {
            return first.pos;
        }
        if t >= last.t {
            return last.pos;
        }
        // First sample strictly after t; exists because t < last.t.
        let hi = traj.partition_point(|s| s.t <= t);
        let (a, b) = (traj[hi - 1], traj[hi]);
        a.pos.lerp(&b.pos, (t - a.t) / (b.t - a.t))
    }
}

/// Reads a crowd file with header `id,t,x,y`. All obstacles get `radius`.
pub fn parse_crowd_csv(text: &str, radius: f64) -> Result<Vec<MovingObstacle>, ConfigError> {
    #[derive(Deserialize)]
    struct Row {
        id: u32,
        t: f64,
        x: f64,
        y: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(CrowdError::from)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "t", "x", "y"] {
        return Err(CrowdError::Record {
            line: 1,
            message: format!(
                "expected header `id,t,x,y`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        }
        .into());
    }
    let mut by_id: BTreeMap<u32, Vec<TrajectorySample>> = BTreeMap::new();
    for record in reader.deserialize::<Row>() {
        let row = record.map_err(CrowdError::from)?;
        if ![row.t, row.x, row.y].iter().all(|v| v.is_finite()) {
            return Err(CrowdError::Record {
                line: 0,
                message: format!("non-finite value for obstacle {}", row.id),
            }
            .into());
        }
        by_id.entry(row.id).or_default().push(TrajectorySample {
            t: row.t,
            pos: Point::new(row.x, row.y),
        });
    }
    by_id
        .into_iter()
        .map(|(id, mut samples)| {
            samples.sort_by(|a, b| a.t.total_cmp(&b.t));
            MovingObstacle::new(id, radius, samples)
        })
        .collect()
}

/// Writes obstacles in the `id,t,x,y` crowd format.
pub fn write_crowd_csv(obstacles: &[MovingObstacle]) -> String {
    let mut out = String::from("id,t,x,y\n");
    for o in obstacles {
        for s in &o.trajectory {
            out.push_str(&format!("{},{},{},{}\n", o.id, s.t, s.pos.x, s.pos.y));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionStep {
    pub t: f64,
    pub mean: Point,
    pub sigma: f64,
}

/// Gaussian position forecast of one obstacle over the planning horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstaclePrediction {
    pub obstacle_id: u32,
    pub radius: f64,
    /// One entry per horizon step `k = 0..=N`.
    pub steps: Vec<PredictionStep>,
}

/// Constant-velocity forecast from the two newest observations at or before
/// `t0`, with isotropic std growing linearly per step. Obstacles without any
/// observation at or before `t0` are left out.
pub fn predict_obstacles(obstacles: &[MovingObstacle], t0: f64, params: &PlannerParams) -> Vec<ObstaclePrediction> {
    obstacles
        .iter()
        .filter_map(|o| {
            let seen = o.trajectory.partition_point(|s| s.t <= t0);
            if seen == 0 {
                return None;
            }
            let last = o.trajectory[seen - 1];
            let velocity = if seen >= 2 {
                let prev = o.trajectory[seen - 2];
                let span = last.t - prev.t;
                ((last.pos.x - prev.pos.x) / span, (last.pos.y - prev.pos.y) / span)
            } else {
                (0.0, 0.0)
            };
            let steps = (0..=params.horizon)
                .map(|k| {
                    let t = t0 + k as f64 * params.dt;
                    let ahead = t - last.t;
                    PredictionStep {
                        t,
                        mean: Point::new(last.pos.x + velocity.0 * ahead, last.pos.y + velocity.1 * ahead),
                        sigma: PREDICTION_SIGMA0 + k as f64 * PREDICTION_SIGMA_GROWTH,
                    }
                })
                .collect();
            Some(ObstaclePrediction {
                obstacle_id: o.id,
                radius: o.radius,
                steps,
            })
        })
        .collect()
}

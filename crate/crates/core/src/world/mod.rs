//! Static occupancy, moving obstacles and their forecasts, and the
//! collision-risk model combining the two.

mod crowd;
mod grid;
mod risk;

pub use crowd::{
    parse_crowd_csv, predict_obstacles, write_crowd_csv, MovingObstacle, ObstaclePrediction, PredictionStep,
    TrajectorySample, PREDICTION_SIGMA0, PREDICTION_SIGMA_GROWTH,
};
pub use grid::{OccupancyGrid, OCCUPIED_THRESHOLD};
pub use risk::{combined_risk, dynamic_risk_single};

use crate::geom::Point;

/// Free function form of [`OccupancyGrid::static_risk`].
pub fn static_risk(grid: &OccupancyGrid, position: Point, robot_radius: f64) -> f64 {
    grid.static_risk(position, robot_radius)
}

/// Free function form of [`OccupancyGrid::segment_free`].
pub fn segment_free(grid: &OccupancyGrid, a: Point, b: Point, robot_radius: f64) -> bool {
    grid.segment_free(a, b, robot_radius)
}

/// Loads a grid from its text form.
pub fn load_grid(text: &str) -> Result<OccupancyGrid, crate::error::GridError> {
    OccupancyGrid::parse(text)
}

/// Everything needed to score a robot position at a horizon step.
#[derive(Clone, Copy, Debug)]
pub struct WorldView<'a> {
    pub grid: &'a OccupancyGrid,
    pub predictions: &'a [ObstaclePrediction],
    pub robot_radius: f64,
}

impl<'a> WorldView<'a> {
    pub fn new(grid: &'a OccupancyGrid, predictions: &'a [ObstaclePrediction], robot_radius: f64) -> Self {
        Self {
            grid,
            predictions,
            robot_radius,
        }
    }

    pub fn static_risk(&self, position: Point) -> f64 {
        self.grid.static_risk(position, self.robot_radius)
    }

    /// Combined static and dynamic risk at `position`, `step` horizon steps
    /// after the prediction origin. Steps past the forecast reuse its last entry.
    pub fn step_risk(&self, position: Point, step: usize) -> f64 {
        let p_rs = self.static_risk(position);
        if p_rs >= 1.0 {
            return 1.0;
        }
        let mut survive = 1.0;
        for pred in self.predictions {
            let Some(s) = pred.steps.get(step).or_else(|| pred.steps.last()) else {
                continue;
            };
            survive *= 1.0 - dynamic_risk_single(s, position, self.robot_radius, pred.radius);
        }
        risk::combine_unchecked(p_rs, 1.0 - survive)
    }
}

//! Risk-aware sampling-based motion planning among moving crowds.
//!
//! Three planners share one kinodynamic, time-indexed search tree: a
//! single-tree Risk-RRT, a bidirectional variant with a goal tree, and a
//! multi-tree variant whose exploration sub-trees feed a Gaussian-mixture
//! sampling heuristic. [`sim`] runs closed-loop episodes and [`harness`]
//! batches them into reports.

pub mod error;
pub mod forest;
pub mod geom;
pub mod harness;
pub mod kinematics;
pub mod planners;
pub mod replica;
pub mod sim;
pub mod timed_tree;
pub mod world;

pub use error::{AuditError, ConfigError, CrowdError, ForestError, GridError, RiskError, TreeError};
pub use forest::{HeuristicDistribution, MeetEvent, SubTreeForest, SubTreeId};
pub use geom::{Bounds, Point};
pub use kinematics::{step_kinematics, ControlInput, PlannerParams, RobotState};
pub use planners::{GrowOutcome, PlanCycleReport, Planner, PlannerKind};
pub use timed_tree::{NodeId, TimedTree, Trajectory};
pub use world::{MovingObstacle, OccupancyGrid, WorldView};

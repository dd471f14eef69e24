//! Risk-RRT, Bi-Risk-RRT and Multi-Risk-RRT behind one planner type.

mod extend;
mod meet_tracker;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, TreeError};
use crate::forest::{
    uniform_sample, ForestNodeId, HeuristicDistribution, MeetEvent, NearestNode, Owner, SubTreeForest, SubTreeId,
};
use crate::geom::{Bounds, Point};
use crate::kinematics::{PlannerParams, RobotState};
use crate::timed_tree::{NodeId, TimedTree, Trajectory};
use crate::world::{predict_obstacles, MovingObstacle, OccupancyGrid, WorldView};

pub use extend::{
    edge_static_free, extend, node_score, select_extension, ExtendChoice, ExtendRejection, EDGE_CHECK_SUBSTEPS,
};
use meet_tracker::MeetTracker;

/// Attempts at drawing a statically free uniform sample before giving up and
/// using the last draw.
pub const FREE_SAMPLE_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    RiskRrt,
    BiRiskRrt,
    MultiRiskRrt,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::RiskRrt, PlannerKind::BiRiskRrt, PlannerKind::MultiRiskRrt];

    /// Short name used on the command line and in reports.
    pub fn short_name(self) -> &'static str {
        match self {
            PlannerKind::RiskRrt => "risk",
            PlannerKind::BiRiskRrt => "bi",
            PlannerKind::MultiRiskRrt => "multi",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for PlannerKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "risk" | "risk_rrt" => Ok(PlannerKind::RiskRrt),
            "bi" | "bi_risk_rrt" => Ok(PlannerKind::BiRiskRrt),
            "multi" | "multi_risk_rrt" => Ok(PlannerKind::MultiRiskRrt),
            _ => Err(ConfigError::invalid("planner", format!("unknown planner `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowOutcome {
    Reached,
    Extended,
    Rejected,
}

/// Which branch of a grow strategy ran.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowBranch {
    /// Uniform sample, rooted tree extended.
    Rooted,
    /// Heuristic sample, rooted tree extended.
    Heuristic,
    /// Uniform sample linked into an existing sub-tree.
    SubTree,
    /// Uniform sample started a new sub-tree.
    NewSubTree,
    /// Two sub-trees were merged.
    Merge,
}

/// One grow call, as recorded in the trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowStep {
    pub sample: Option<Point>,
    pub branch: GrowBranch,
    pub outcome: GrowOutcome,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanCycleStats {
    pub iterations: usize,
    pub nodes_added: usize,
    pub rejected: usize,
    pub removed_by_risk: usize,
    pub tree_size: usize,
    pub subtree_count: usize,
    pub forest_nodes: usize,
    pub meets: usize,
    pub merges: usize,
    pub reached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanCycleReport {
    pub trajectory: Option<Trajectory>,
    pub stats: PlanCycleStats,
}

/// Heuristic currently steering the rooted tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveHeuristic {
    pub distribution: HeuristicDistribution,
    pub source: SubTreeId,
    /// Samples left before the source is consumed; `None` never expires.
    pub remaining: Option<usize>,
}

pub struct Planner {
    kind: PlannerKind,
    params: PlannerParams,
    goal: Point,
    bounds: Bounds,
    sigma_kappa: f64,
    robot_radius: f64,
    rooted: TimedTree,
    forest: SubTreeForest,
    heuristic: Option<ActiveHeuristic>,
    bi_met: bool,
    rng: ChaCha8Rng,
    tracker: MeetTracker,
    trace: Option<Vec<GrowStep>>,
    meets: usize,
    merges: usize,
}

impl Planner {
    pub fn new(
        kind: PlannerKind,
        params: PlannerParams,
        start: RobotState,
        goal: Point,
        grid: &OccupancyGrid,
        robot_radius: f64,
        seed: u64,
    ) -> Result<Self, ConfigError> {
        params.validate()?;
        if !(robot_radius.is_finite() && robot_radius > 0.0) {
            return Err(ConfigError::invalid("robot_radius", "must be positive"));
        }
        let rooted = TimedTree::new(start, params.dt, params.horizon);
        let mut planner = Self {
            kind,
            goal,
            bounds: grid.bounds(),
            sigma_kappa: params.sigma_kappa_for(grid.width_m()),
            robot_radius,
            rooted,
            forest: SubTreeForest::new(),
            heuristic: None,
            bi_met: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
            tracker: MeetTracker::new(params.meet_radius, robot_radius),
            trace: None,
            meets: 0,
            merges: 0,
            params,
        };
        if kind != PlannerKind::RiskRrt {
            let root_id = planner.rooted.root_id();
            planner
                .tracker
                .insert_rooted(root_id, &planner.rooted, &planner.forest, grid);
            planner.ensure_goal_tree(grid);
        }
        Ok(planner)
    }

    pub fn kind(&self) -> PlannerKind {
        self.kind
    }

    pub fn params(&self) -> &PlannerParams {
        &self.params
    }

    pub fn goal(&self) -> Point {
        self.goal
    }

    pub fn rooted(&self) -> &TimedTree {
        &self.rooted
    }

    pub fn forest(&self) -> &SubTreeForest {
        &self.forest
    }

    pub fn active_heuristic(&self) -> Option<&ActiveHeuristic> {
        self.heuristic.as_ref()
    }

    /// Starts recording every grow call.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[GrowStep] {
        self.trace.as_deref().unwrap_or(&[])
    }

    fn in_goal_region(&self, p: Point) -> bool {
        p.distance(&self.goal) < self.params.goal_radius
    }

    fn free_sample(&mut self, grid: &OccupancyGrid) -> Point {
        let mut p = uniform_sample(&self.bounds, &mut self.rng);
        for _ in 1..FREE_SAMPLE_ATTEMPTS {
            if grid.footprint_free(p, self.robot_radius) {
                break;
            }
            p = uniform_sample(&self.bounds, &mut self.rng);
        }
        p
    }

    fn extend_rooted(&mut self, x: Point, world: &WorldView<'_>) -> GrowOutcome {
        match extend(&mut self.rooted, x, world, self.goal, &self.params) {
            Ok(id) => {
                if self.kind != PlannerKind::RiskRrt {
                    self.tracker.insert_rooted(id, &self.rooted, &self.forest, world.grid);
                }
                let p = self.rooted.get(id).expect("just added").position();
                if self.in_goal_region(p) {
                    GrowOutcome::Reached
                } else {
                    GrowOutcome::Extended
                }
            }
            Err(_) => GrowOutcome::Rejected,
        }
    }

    fn record(&mut self, sample: Option<Point>, branch: GrowBranch, outcome: GrowOutcome) -> GrowOutcome {
        if let Some(trace) = &mut self.trace {
            trace.push(GrowStep {
                sample,
                branch,
                outcome,
            });
        }
        outcome
    }

    /// One grow call of this planner's kind.
    pub fn grow(&mut self, world: &WorldView<'_>) -> GrowOutcome {
        match self.kind {
            PlannerKind::RiskRrt => self.grow_uniform(world),
            PlannerKind::BiRiskRrt => self.grow_bi(world),
            PlannerKind::MultiRiskRrt => self.grow_multi(world),
        }
    }

    /// Single-tree growth: one free uniform sample, one Extend.
    pub fn grow_uniform(&mut self, world: &WorldView<'_>) -> GrowOutcome {
        let x = self.free_sample(world.grid);
        let outcome = self.extend_rooted(x, world);
        self.record(Some(x), GrowBranch::Rooted, outcome)
    }

    fn build_heuristic(&mut self, subtree: SubTreeId, contact: ForestNodeId, expires: bool) {
        let path = self
            .forest
            .extract_heuristic_path(subtree, contact)
            .expect("meet events refer to live sub-tree nodes");
        let burst = self.params.heuristic_burst.unwrap_or(path.len()).max(1);
        let distribution = HeuristicDistribution::new(path, self.sigma_kappa, self.params.h_r, self.bounds)
            .expect("planner parameters were validated");
        self.heuristic = Some(ActiveHeuristic {
            distribution,
            source: subtree,
            remaining: expires.then_some(burst),
        });
    }

    /// Draws from the active heuristic and extends the rooted tree; consumes
    /// the source sub-tree once the burst is used up.
    fn heuristic_step(&mut self, world: &WorldView<'_>) -> GrowOutcome {
        let active = self.heuristic.as_mut().expect("caller checked");
        let x = active.distribution.sample(&mut self.rng);
        let outcome = self.extend_rooted(x, world);
        let active = self.heuristic.as_mut().expect("still active");
        if let Some(left) = active.remaining.as_mut() {
            *left -= 1;
            if *left == 0 {
                let source = active.source;
                self.heuristic = None;
                self.forest.consume(source, self.params.retain_goal_tree);
            }
        }
        self.record(Some(x), GrowBranch::Heuristic, outcome)
    }

    /// Bidirectional growth: rooted tree and goal tree both chase uniform
    /// samples until they meet, then the rooted tree follows the goal path.
    pub fn grow_bi(&mut self, world: &WorldView<'_>) -> GrowOutcome {
        if !self.bi_met {
            if let Some(MeetEvent::Rooted {
                subtree, subtree_node, ..
            }) = self.tracker.next_event(&self.rooted, &self.forest)
            {
                self.bi_met = true;
                self.meets += 1;
                self.build_heuristic(subtree, subtree_node, false);
            }
        }
        if self.heuristic.is_some() {
            return self.heuristic_step(world);
        }
        let x = self.free_sample(world.grid);
        let outcome = self.extend_rooted(x, world);
        if let Some(goal_tree) = self.forest.goal_tree() {
            self.steer_goal_tree(goal_tree, x, world.grid);
        }
        self.record(Some(x), GrowBranch::Rooted, outcome)
    }

    /// Moves from the goal tree's nearest node toward `x` by at most the
    /// neighbourhood radius and links the result if the segment is free.
    fn steer_goal_tree(&mut self, goal_tree: SubTreeId, x: Point, grid: &OccupancyGrid) {
        let tree = self.forest.get(goal_tree).expect("goal tree present");
        let Some((near, d)) = tree.nearest(x) else {
            return;
        };
        let from = tree.node(near).expect("nearest is a member").pos;
        let target = if d > self.params.lambda {
            from.lerp(&x, self.params.lambda / d)
        } else {
            x
        };
        if d == 0.0 || !grid.segment_free(from, target, self.robot_radius) {
            return;
        }
        let id = self
            .forest
            .add_linked_node(goal_tree, near, target)
            .expect("parent checked");
        self.tracker.insert_forest(id, &self.rooted, &self.forest, grid);
    }

    fn ensure_goal_tree(&mut self, grid: &OccupancyGrid) {
        if self.forest.goal_tree().is_none() {
            let id = self.forest.add_goal_tree(self.goal);
            let root = self.forest.get(id).expect("just added").nodes()[0].id;
            self.tracker.insert_forest(root, &self.rooted, &self.forest, grid);
        }
    }

    /// Multi-directional growth with heuristic sampling. Every call starts
    /// by making sure a goal sub-tree exists, so a consumed goal tree is
    /// replaced by a fresh one.
    pub fn grow_multi(&mut self, world: &WorldView<'_>) -> GrowOutcome {
        self.ensure_goal_tree(world.grid);
        if self.heuristic.is_some() {
            return self.heuristic_step(world);
        }
        match self.tracker.next_event(&self.rooted, &self.forest) {
            Some(MeetEvent::Rooted {
                subtree, subtree_node, ..
            }) => {
                self.meets += 1;
                self.build_heuristic(subtree, subtree_node, true);
                self.heuristic_step(world)
            }
            Some(MeetEvent::SubTrees {
                keep,
                absorb,
                keep_node,
                absorb_node,
                ..
            }) => {
                self.forest
                    .merge_subtrees(keep, absorb, keep_node, absorb_node)
                    .expect("meet events refer to live sub-trees");
                self.merges += 1;
                self.record(None, GrowBranch::Merge, GrowOutcome::Extended)
            }
            None => {
                let x = self.free_sample(world.grid);
                let to_rooted = self.rooted.nearest(x).expect("rooted tree is never empty").distance;
                if to_rooted < self.params.lambda {
                    let outcome = self.extend_rooted(x, world);
                    return self.record(Some(x), GrowBranch::Rooted, outcome);
                }
                if let Ok(near) = self.forest.nearest(x) {
                    if near.distance < self.params.lambda {
                        let Owner::SubTree(owner) = near.owner else {
                            unreachable!("forest nodes belong to sub-trees")
                        };
                        let outcome = match self.forest.grow_subtree(owner, x, world.grid, self.robot_radius) {
                            Some(id) => {
                                self.tracker.insert_forest(id, &self.rooted, &self.forest, world.grid);
                                GrowOutcome::Extended
                            }
                            None => GrowOutcome::Rejected,
                        };
                        return self.record(Some(x), GrowBranch::SubTree, outcome);
                    }
                }
                let id = self.forest.random_generate(x);
                let node = self.forest.get(id).expect("just added").nodes()[0].id;
                self.tracker.insert_forest(node, &self.rooted, &self.forest, world.grid);
                self.record(Some(x), GrowBranch::NewSubTree, GrowOutcome::Extended)
            }
        }
    }

    /// One receding-horizon cycle at the robot's current state: predict the
    /// crowd from what has been observed so far, refresh risks, spend the
    /// iteration budget and pick the best trajectory.
    pub fn plan_cycle(
        &mut self,
        grid: &OccupancyGrid,
        observed: &[MovingObstacle],
        robot: &RobotState,
    ) -> PlanCycleReport {
        if self.rooted.root().state != *robot {
            self.rooted.reset(*robot);
            if self.kind != PlannerKind::RiskRrt {
                let root = self.rooted.root_id();
                self.tracker.insert_rooted(root, &self.rooted, &self.forest, grid);
            }
        }
        let predictions = predict_obstacles(observed, robot.t, &self.params);
        let world = WorldView::new(grid, &predictions, self.robot_radius);
        let removed_by_risk = self.rooted.refresh_risks(&world, &self.params);
        self.tracker.compact(&self.rooted, &self.forest);

        let (meets0, merges0) = (self.meets, self.merges);
        let size0 = self.rooted.len();
        let mut stats = PlanCycleStats {
            removed_by_risk,
            ..Default::default()
        };
        for _ in 0..self.params.iterations_per_cycle {
            let outcome = self.grow(&world);
            stats.iterations += 1;
            match outcome {
                GrowOutcome::Reached => stats.reached = true,
                GrowOutcome::Rejected => stats.rejected += 1,
                GrowOutcome::Extended => {}
            }
        }
        stats.tree_size = self.rooted.len();
        stats.nodes_added = stats.tree_size.saturating_sub(size0);
        stats.subtree_count = self.forest.len();
        stats.forest_nodes = self.forest.node_count();
        stats.meets = self.meets - meets0;
        stats.merges = self.merges - merges0;
        PlanCycleReport {
            trajectory: self.rooted.choose_best_trajectory(self.goal),
            stats,
        }
    }

    /// Advances the root to the executed child and drops unreachable nodes.
    pub fn commit(&mut self, executed_child: NodeId) -> Result<(), TreeError> {
        self.rooted.prune_unreachable(executed_child)
    }
}

#[cfg(test)]
mod tests;

use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::kinematics::{
    reachable_control_window, state_cost, step_kinematics, ControlInput, PlannerParams, RobotState,
};
use crate::timed_tree::{NodeId, TimedTree};
use crate::world::WorldView;

/// Sub-steps per edge at which the swept footprint is checked.
pub const EDGE_CHECK_SUBSTEPS: usize = 5;

/// Node and control an Extend call settles on, before admission.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendChoice {
    pub node: NodeId,
    pub control: ControlInput,
    pub state: RobotState,
    pub cost: f64,
}

/// Node-selection score `1 / (C_k + beta * risk_k)`; a zero denominator
/// scores infinity.
pub fn node_score(cost: f64, path_risk: f64, beta: f64) -> f64 {
    let denom = cost + beta * path_risk;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / denom
    }
}

/// Picks the tree node with the highest score toward `x_rand` (lowest id on
/// ties), then the lattice control whose one-step successor has the lowest
/// cost toward `x_rand` (first in row-major `(v, omega)` order on ties).
pub fn select_extension(tree: &TimedTree, x_rand: Point, goal: Point, params: &PlannerParams) -> ExtendChoice {
    let mut best: Option<(f64, NodeId)> = None;
    for node in tree.iter() {
        let score = node_score(
            state_cost(&node.state, x_rand, goal, params),
            node.path_risk,
            params.beta,
        );
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, node.id));
        }
    }
    let (_, node_id) = best.expect("a timed tree always has a root");
    let from = tree.get(node_id).expect("selected from the tree").state;

    let window = reachable_control_window(&from, params);
    let mut choice: Option<ExtendChoice> = None;
    for control in window.lattice(params.delta_nv, params.delta_nw) {
        let state = step_kinematics(&from, control, params.dt);
        let cost = state_cost(&state, x_rand, goal, params);
        if choice.is_none_or(|c| cost < c.cost) {
            choice = Some(ExtendChoice {
                node: node_id,
                control,
                state,
                cost,
            });
        }
    }
    choice.expect("the control lattice is never empty")
}

/// Why an Extend attempt added nothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtendRejection {
    DepthLimit,
    StaticCollision,
    RiskCap,
}

/// Footprint is free at every sub-step of the edge `from -> u`.
pub fn edge_static_free(world: &WorldView<'_>, from: &RobotState, control: ControlInput, dt: f64) -> bool {
    (1..=EDGE_CHECK_SUBSTEPS).all(|i| {
        let s = step_kinematics(from, control, dt * i as f64 / EDGE_CHECK_SUBSTEPS as f64);
        world.grid.footprint_free(s.position(), world.robot_radius)
    })
}

/// One Extend call: select, simulate, and admit the new node if it stays
/// within the depth limit, its edge is statically free and its step risk is
/// below `risk_cap`.
pub fn extend(
    tree: &mut TimedTree,
    x_rand: Point,
    world: &WorldView<'_>,
    goal: Point,
    params: &PlannerParams,
) -> Result<NodeId, ExtendRejection> {
    let choice = select_extension(tree, x_rand, goal, params);
    let parent = tree.get(choice.node).expect("selected from the tree");
    let depth = parent.depth + 1;
    if depth > params.horizon.min(tree.max_depth()) {
        return Err(ExtendRejection::DepthLimit);
    }
    if !edge_static_free(world, &parent.state, choice.control, params.dt) {
        return Err(ExtendRejection::StaticCollision);
    }
    let risk = world.step_risk(choice.state.position(), depth);
    if risk >= params.risk_cap {
        return Err(ExtendRejection::RiskCap);
    }
    tree.add_node(choice.node, choice.state, choice.control, risk)
        .map_err(|_| ExtendRejection::DepthLimit)
}

//! Kinodynamic rooted tree whose depth doubles as a time index: a node at
//! depth `k` is `k * dt` seconds ahead of the root.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, TreeError};
use crate::geom::Point;
use crate::kinematics::{ControlInput, PlannerParams, RobotState};
use crate::world::WorldView;

/// Trajectories at or above this cumulative risk are never executed.
pub const EXECUTION_RISK_LIMIT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedNode {
    pub id: NodeId,
    pub state: RobotState,
    pub depth: usize,
    pub parent: Option<NodeId>,
    pub control: Option<ControlInput>,
    /// Collision risk at this node's timestamp.
    pub step_risk: f64,
    /// `1 - prod(1 - step_risk)` along the path from the root.
    pub path_risk: f64,
    children: Vec<NodeId>,
}

impl TimedNode {
    pub fn children(&self) -> &[NodeId] {
        &self.children
    }

    pub fn position(&self) -> Point {
        self.state.position()
    }
}

/// Complement-product accumulation of independent per-step risks.
pub fn accumulate_risk(parent_path_risk: f64, step_risk: f64) -> f64 {
    1.0 - (1.0 - parent_path_risk) * (1.0 - step_risk)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedTree {
    nodes: BTreeMap<NodeId, TimedNode>,
    root: NodeId,
    next_id: u32,
    dt: f64,
    max_depth: usize,
}

/// Controls from the root to a selected node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub leaf: NodeId,
    /// Nodes after the root, in execution order.
    pub nodes: Vec<NodeId>,
    pub controls: Vec<ControlInput>,
}

/// One row of the tree snapshot export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeRow {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub depth: usize,
    pub parent: Option<u32>,
}

impl TimedTree {
    pub fn new(root_state: RobotState, dt: f64, max_depth: usize) -> Self {
        let mut tree = Self {
            nodes: BTreeMap::new(),
            root: NodeId(0),
            next_id: 0,
            dt,
            max_depth,
        };
        tree.reset(root_state);
        tree
    }

    /// Discards everything and starts over from a single root.
    pub fn reset(&mut self, root_state: RobotState) {
        self.nodes.clear();
        let id = self.fresh_id();
        self.root = id;
        self.nodes.insert(
            id,
            TimedNode {
                id,
                state: root_state,
                depth: 0,
                parent: None,
                control: None,
                step_risk: 0.0,
                path_risk: 0.0,
                children: Vec::new(),
            },
        );
    }

    fn fresh_id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn root(&self) -> &TimedNode {
        &self.nodes[&self.root]
    }

    pub fn root_id(&self) -> NodeId {
        self.root
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, id: NodeId) -> Option<&TimedNode> {
        self.nodes.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    /// Nodes in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &TimedNode> {
        self.nodes.values()
    }

    /// Inserts a child of `parent`. The caller supplies the propagated state.
    pub fn add_node(
        &mut self,
        parent: NodeId,
        state: RobotState,
        control: ControlInput,
        step_risk: f64,
    ) -> Result<NodeId, TreeError> {
        let parent_node = self.nodes.get(&parent).ok_or(TreeError::UnknownNode(parent.0))?;
        let depth = parent_node.depth + 1;
        if depth > self.max_depth {
            return Err(TreeError::DepthExceeded(self.max_depth));
        }
        let path_risk = accumulate_risk(parent_node.path_risk, step_risk);
        let id = self.fresh_id();
        self.nodes.insert(
            id,
            TimedNode {
                id,
                state,
                depth,
                parent: Some(parent),
                control: Some(control),
                step_risk,
                path_risk,
                children: Vec::new(),
            },
        );
        self.nodes
            .get_mut(&parent)
            .expect("parent checked above")
            .children
            .push(id);
        Ok(id)
    }

    /// Ids of `id` and all its descendants, parents before children.
    pub fn subtree_ids(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut queue = VecDeque::from([id]);
        while let Some(n) = queue.pop_front() {
            if let Some(node) = self.nodes.get(&n) {
                out.push(n);
                queue.extend(node.children.iter().copied());
            }
        }
        out
    }

    fn remove_subtree(&mut self, id: NodeId) -> usize {
        let doomed = self.subtree_ids(id);
        if let Some(parent) = self.nodes.get(&id).and_then(|n| n.parent) {
            if let Some(p) = self.nodes.get_mut(&parent) {
                p.children.retain(|c| *c != id);
            }
        }
        for n in &doomed {
            self.nodes.remove(n);
        }
        doomed.len()
    }

    /// Makes `executed_child` the new root after the robot committed to it,
    /// dropping every other branch and shifting depths up by one.
    pub fn prune_unreachable(&mut self, executed_child: NodeId) -> Result<(), TreeError> {
        let is_root_child = self
            .nodes
            .get(&executed_child)
            .is_some_and(|n| n.parent == Some(self.root));
        if !is_root_child {
            return Err(TreeError::NotRootChild(executed_child.0));
        }
        let keep = self.subtree_ids(executed_child);
        let mut kept = BTreeMap::new();
        for id in keep {
            let mut node = self.nodes.remove(&id).expect("listed by subtree_ids");
            node.depth -= 1;
            kept.insert(id, node);
        }
        self.nodes = kept;
        self.root = executed_child;
        let root = self.nodes.get_mut(&executed_child).expect("new root kept");
        root.parent = None;
        root.control = None;
        Ok(())
    }

    /// Re-scores every node against the current world and removes branches
    /// whose step risk reaches `params.risk_cap` (the root is exempt).
    /// Returns the number of removed nodes.
    pub fn refresh_risks(&mut self, world: &WorldView<'_>, params: &PlannerParams) -> usize {
        let root_id = self.root;
        {
            let root = self.nodes.get_mut(&root_id).expect("root present");
            root.step_risk = world.step_risk(root.state.position(), 0);
            root.path_risk = root.step_risk;
        }
        let mut removed = 0;
        let mut queue = VecDeque::from([root_id]);
        while let Some(id) = queue.pop_front() {
            let (parent_risk, children) = {
                let n = &self.nodes[&id];
                (n.path_risk, n.children.clone())
            };
            for child in children {
                let node = self.nodes.get_mut(&child).expect("child present");
                let step = world.step_risk(node.state.position(), node.depth);
                if step >= params.risk_cap {
                    removed += self.remove_subtree(child);
                    continue;
                }
                node.step_risk = step;
                node.path_risk = accumulate_risk(parent_risk, step);
                queue.push_back(child);
            }
        }
        removed
    }

    /// Node ids from the root's child down to `leaf`.
    pub fn path_to(&self, leaf: NodeId) -> Vec<NodeId> {
        let mut path = Vec::new();
        let mut cur = Some(leaf);
        while let Some(id) = cur {
            if id == self.root {
                break;
            }
            let Some(node) = self.nodes.get(&id) else {
                return Vec::new();
            };
            path.push(id);
            cur = node.parent;
        }
        path.reverse();
        path
    }

    /// Trajectory weight: safer and closer to the goal is better.
    pub fn trajectory_weight(node: &TimedNode, goal: Point) -> f64 {
        (1.0 - node.path_risk) / (1.0 + node.position().distance(&goal))
    }

    /// Picks the executable node with the highest trajectory weight, lowest
    /// id on ties. `None` when no node below the root is safe enough, in
    /// which case the robot should wait.
    pub fn choose_best_trajectory(&self, goal: Point) -> Option<Trajectory> {
        let mut best: Option<(f64, NodeId)> = None;
        for node in self.nodes.values() {
            if node.depth == 0 || node.path_risk >= EXECUTION_RISK_LIMIT {
                continue;
            }
            let w = Self::trajectory_weight(node, goal);
            if best.is_none_or(|(bw, _)| w > bw) {
                best = Some((w, node.id));
            }
        }
        let (_, leaf) = best?;
        let nodes = self.path_to(leaf);
        let controls = nodes
            .iter()
            .map(|id| self.nodes[id].control.expect("non-root nodes carry controls"))
            .collect();
        Some(Trajectory { leaf, nodes, controls })
    }

    /// Checks depth, timestamp, linkage and path-risk invariants.
    pub fn audit(&self) -> Result<(), AuditError> {
        let fail = |m: String| Err(AuditError(m));
        let Some(root) = self.nodes.get(&self.root) else {
            return fail(format!("root {} missing", self.root));
        };
        if root.depth != 0 || root.parent.is_some() || root.control.is_some() {
            return fail("root must have depth 0, no parent and no control".into());
        }
        let mut roots = 0;
        for node in self.nodes.values() {
            if !(0.0..=1.0).contains(&node.step_risk) || !(0.0..=1.0).contains(&node.path_risk) {
                return fail(format!("node {} has risk outside [0, 1]", node.id));
            }
            if node.depth > self.max_depth {
                return fail(format!("node {} deeper than {}", node.id, self.max_depth));
            }
            let Some(pid) = node.parent else {
                roots += 1;
                continue;
            };
            let Some(parent) = self.nodes.get(&pid) else {
                return fail(format!("node {} has dangling parent {pid}", node.id));
            };
            if !parent.children.contains(&node.id) {
                return fail(format!("parent {pid} does not list child {}", node.id));
            }
            if node.depth != parent.depth + 1 {
                return fail(format!(
                    "node {} depth {} under depth {}",
                    node.id, node.depth, parent.depth
                ));
            }
            if (node.state.t - parent.state.t - self.dt).abs() > 1e-9 {
                return fail(format!("node {} timestamp is not parent + dt", node.id));
            }
            if node.control.is_none() {
                return fail(format!("node {} has no control", node.id));
            }
            let expected = accumulate_risk(parent.path_risk, node.step_risk);
            if (node.path_risk - expected).abs() > 1e-12 {
                return fail(format!("node {} path risk {} != {}", node.id, node.path_risk, expected));
            }
            for c in &node.children {
                if self.nodes.get(c).and_then(|n| n.parent) != Some(node.id) {
                    return fail(format!("child link {} -> {c} is not mirrored", node.id));
                }
            }
        }
        if roots != 1 {
            return fail(format!("{roots} parentless nodes"));
        }
        for c in &root.children {
            if self.nodes.get(c).and_then(|n| n.parent) != Some(self.root) {
                return fail(format!("root child {c} is not mirrored"));
            }
        }
        // Reachability also rules out cycles: a cycle would never reach the root.
        if self.subtree_ids(self.root).len() != self.nodes.len() {
            return fail("some nodes are unreachable from the root".into());
        }
        Ok(())
    }

    pub fn export(&self) -> Vec<TreeRow> {
        self.nodes
            .values()
            .map(|n| TreeRow {
                id: n.id.0,
                x: n.state.x,
                y: n.state.y,
                t: n.state.t,
                depth: n.depth,
                parent: n.parent.map(|p| p.0),
            })
            .collect()
    }
}

/// CSV form of a tree export: `id,x,y,t,depth,parent`.
pub fn tree_rows_to_csv(rows: &[TreeRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        let _ = w.write_record(["id", "x", "y", "t", "depth", "parent"]);
    }
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

pub fn tree_rows_from_csv(text: &str) -> Result<Vec<TreeRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

//! Position-only exploration sub-trees and the heuristic sampler they feed.
//!
//! Sub-trees carry no timestamps or dynamics; only the rooted
//! [`TimedTree`](crate::timed_tree::TimedTree) is executable. A sub-tree that
//! comes close to the rooted tree hands over its nodes as a Gaussian-mixture
//! sampling heuristic and is then deleted, and sub-trees that come close to
//! each other are merged.

mod sampler;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use sampler::{uniform_sample, HeuristicDistribution, SampleBranch, MAX_REDRAWS};

use crate::error::{AuditError, ForestError};
use crate::geom::Point;
use crate::timed_tree::{NodeId, TimedTree};
use crate::world::OccupancyGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubTreeId(pub u32);

/// Node id, unique across the whole forest and stable under merges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ForestNodeId(pub u32);

impl fmt::Display for SubTreeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for ForestNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubTreeNode {
    pub id: ForestNodeId,
    pub pos: Point,
    pub parent: Option<ForestNodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubTree {
    id: SubTreeId,
    /// Insertion order.
    nodes: Vec<SubTreeNode>,
    goal_node: Option<ForestNodeId>,
}

impl SubTree {
    pub fn id(&self) -> SubTreeId {
        self.id
    }

    pub fn nodes(&self) -> &[SubTreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains_goal(&self) -> bool {
        self.goal_node.is_some()
    }

    pub fn goal_node(&self) -> Option<ForestNodeId> {
        self.goal_node
    }

    pub fn node(&self, id: ForestNodeId) -> Option<&SubTreeNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    fn parent_map(&self) -> HashMap<ForestNodeId, Option<ForestNodeId>> {
        self.nodes.iter().map(|n| (n.id, n.parent)).collect()
    }

    /// Nearest node, lowest id on ties.
    pub fn nearest(&self, p: Point) -> Option<(ForestNodeId, f64)> {
        let mut best: Option<(f64, ForestNodeId)> = None;
        for n in &self.nodes {
            let d = n.pos.distance_sq(&p);
            if best.is_none_or(|(bd, bid)| d < bd || (d == bd && n.id < bid)) {
                best = Some((d, n.id));
            }
        }
        best.map(|(d, id)| (id, d.sqrt()))
    }

    /// Ordered points of the heuristic handed to the rooted tree when it
    /// meets this sub-tree at `contact`: the goal-to-contact path for the goal
    /// sub-tree, every node (insertion order) otherwise.
    pub fn extract_heuristic_path(&self, contact: ForestNodeId) -> Result<Vec<Point>, ForestError> {
        if self.node(contact).is_none() {
            return Err(ForestError::NodeNotFound {
                subtree: self.id.0,
                node: contact.0,
            });
        }
        let Some(goal) = self.goal_node else {
            return Ok(self.nodes.iter().map(|n| n.pos).collect());
        };
        let parents = self.parent_map();
        let ancestors = |start: ForestNodeId| {
            let mut chain = vec![start];
            let mut cur = start;
            while let Some(Some(p)) = parents.get(&cur) {
                chain.push(*p);
                cur = *p;
            }
            chain
        };
        let from_goal = ancestors(goal);
        let from_contact = ancestors(contact);
        let lca_pos_contact: HashMap<ForestNodeId, usize> =
            from_contact.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let (goal_idx, contact_idx) = from_goal
            .iter()
            .enumerate()
            .find_map(|(i, id)| lca_pos_contact.get(id).map(|&j| (i, j)))
            .expect("nodes of one sub-tree share its root");
        let mut ids: Vec<ForestNodeId> = from_goal[..=goal_idx].to_vec();
        ids.extend(from_contact[..contact_idx].iter().rev());
        Ok(ids
            .into_iter()
            .map(|id| self.node(id).expect("path nodes belong to the sub-tree").pos)
            .collect())
    }
}

/// Which structure a node belongs to. The rooted tree sorts first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Owner {
    Rooted,
    SubTree(SubTreeId),
}

/// Result of a nearest-node query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nearest {
    pub distance: f64,
    pub owner: Owner,
    /// Raw node id within the owner's id space.
    pub node: u32,
}

/// Euclidean nearest-node search over a tree-like structure.
pub trait NearestNode {
    /// Nearest node to `p`, ties broken by lowest `(owner, node)`.
    fn nearest(&self, p: Point) -> Result<Nearest, ForestError>;
}

impl NearestNode for TimedTree {
    fn nearest(&self, p: Point) -> Result<Nearest, ForestError> {
        let mut best: Option<(f64, u32)> = None;
        // Ascending id order, so strict `<` keeps the lowest id on ties.
        for n in self.iter() {
            let d = n.position().distance_sq(&p);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, n.id.0));
            }
        }
        best.map(|(d, node)| Nearest {
            distance: d.sqrt(),
            owner: Owner::Rooted,
            node,
        })
        .ok_or(ForestError::Empty)
    }
}

impl NearestNode for SubTreeForest {
    fn nearest(&self, p: Point) -> Result<Nearest, ForestError> {
        let mut best: Option<(f64, SubTreeId, ForestNodeId)> = None;
        for tree in self.subtrees.values() {
            for n in &tree.nodes {
                let d = n.pos.distance_sq(&p);
                let better = match best {
                    None => true,
                    Some((bd, bt, bn)) => d < bd || (d == bd && (tree.id, n.id) < (bt, bn)),
                };
                if better {
                    best = Some((d, tree.id, n.id));
                }
            }
        }
        best.map(|(d, t, n)| Nearest {
            distance: d.sqrt(),
            owner: Owner::SubTree(t),
            node: n.0,
        })
        .ok_or(ForestError::Empty)
    }
}

/// A qualifying proximity event between two structures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeetEvent {
    /// The rooted tree reached a sub-tree.
    Rooted {
        subtree: SubTreeId,
        rooted_node: NodeId,
        subtree_node: ForestNodeId,
        distance: f64,
    },
    /// Two sub-trees touched; `keep` is the lower id.
    SubTrees {
        keep: SubTreeId,
        absorb: SubTreeId,
        keep_node: ForestNodeId,
        absorb_node: ForestNodeId,
        distance: f64,
    },
}

impl MeetEvent {
    /// Ordering used to pick among simultaneous events: rooted events first,
    /// then by distance, then by ids.
    pub fn priority_cmp(&self, other: &MeetEvent) -> Ordering {
        let key = |e: &MeetEvent| match *e {
            MeetEvent::Rooted {
                subtree,
                rooted_node,
                subtree_node,
                distance,
            } => (0u8, distance, [subtree.0, rooted_node.0, subtree_node.0, 0]),
            MeetEvent::SubTrees {
                keep,
                absorb,
                keep_node,
                absorb_node,
                distance,
            } => (1u8, distance, [keep.0, absorb.0, keep_node.0, absorb_node.0]),
        };
        let (ka, da, ia) = key(self);
        let (kb, db, ib) = key(other);
        ka.cmp(&kb).then(da.total_cmp(&db)).then(ia.cmp(&ib))
    }
}

/// Every sub-tree exploring the map, keyed by id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SubTreeForest {
    subtrees: BTreeMap<SubTreeId, SubTree>,
    owner: HashMap<ForestNodeId, SubTreeId>,
    next_tree: u32,
    next_node: u32,
}

/// One row of the sub-tree snapshot export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubTreeRow {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub parent: Option<u32>,
    pub subtree: u32,
}

impl SubTreeForest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.subtrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtrees.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.owner.len()
    }

    pub fn get(&self, id: SubTreeId) -> Option<&SubTree> {
        self.subtrees.get(&id)
    }

    pub fn contains(&self, id: SubTreeId) -> bool {
        self.subtrees.contains_key(&id)
    }

    /// Sub-trees in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &SubTree> {
        self.subtrees.values()
    }

    pub fn owner_of(&self, node: ForestNodeId) -> Option<SubTreeId> {
        self.owner.get(&node).copied()
    }

    pub fn node(&self, node: ForestNodeId) -> Option<&SubTreeNode> {
        self.owner_of(node).and_then(|t| self.subtrees[&t].node(node))
    }

    pub fn goal_tree(&self) -> Option<SubTreeId> {
        self.subtrees.values().find(|t| t.contains_goal()).map(|t| t.id)
    }

    fn insert_tree(&mut self, root: Point, is_goal: bool) -> SubTreeId {
        let id = SubTreeId(self.next_tree);
        self.next_tree += 1;
        let node = ForestNodeId(self.next_node);
        self.next_node += 1;
        self.owner.insert(node, id);
        self.subtrees.insert(
            id,
            SubTree {
                id,
                nodes: vec![SubTreeNode {
                    id: node,
                    pos: root,
                    parent: None,
                }],
                goal_node: is_goal.then_some(node),
            },
        );
        id
    }

    /// Starts a new single-node sub-tree at a (caller-checked free) sample.
    pub fn random_generate(&mut self, x_rand: Point) -> SubTreeId {
        self.insert_tree(x_rand, false)
    }

    /// Starts the sub-tree rooted at the goal.
    pub fn add_goal_tree(&mut self, goal: Point) -> SubTreeId {
        self.insert_tree(goal, true)
    }

    /// Appends `pos` under `parent` without any collision check.
    pub fn add_linked_node(
        &mut self,
        subtree: SubTreeId,
        parent: ForestNodeId,
        pos: Point,
    ) -> Result<ForestNodeId, ForestError> {
        let tree = self
            .subtrees
            .get_mut(&subtree)
            .ok_or(ForestError::UnknownSubTree(subtree.0))?;
        if tree.node(parent).is_none() {
            return Err(ForestError::NodeNotFound {
                subtree: subtree.0,
                node: parent.0,
            });
        }
        let id = ForestNodeId(self.next_node);
        self.next_node += 1;
        tree.nodes.push(SubTreeNode {
            id,
            pos,
            parent: Some(parent),
        });
        self.owner.insert(id, subtree);
        Ok(id)
    }

    /// Links `x_rand` to its nearest node in `subtree` if the connecting
    /// segment is collision free.
    pub fn grow_subtree(
        &mut self,
        subtree: SubTreeId,
        x_rand: Point,
        grid: &OccupancyGrid,
        robot_radius: f64,
    ) -> Option<ForestNodeId> {
        let tree = self.subtrees.get(&subtree)?;
        let (near, _) = tree.nearest(x_rand)?;
        let from = tree.node(near)?.pos;
        if !grid.segment_free(from, x_rand, robot_radius) {
            return None;
        }
        self.add_linked_node(subtree, near, x_rand).ok()
    }

    /// Re-roots `absorb` at its contact node, hangs it under `keep`'s contact
    /// node and drops `absorb` from the forest.
    pub fn merge_subtrees(
        &mut self,
        keep: SubTreeId,
        absorb: SubTreeId,
        keep_node: ForestNodeId,
        absorb_node: ForestNodeId,
    ) -> Result<(), ForestError> {
        if keep == absorb {
            return Err(ForestError::SelfMerge(keep.0));
        }
        let keep_tree = self.subtrees.get(&keep).ok_or(ForestError::UnknownSubTree(keep.0))?;
        if keep_tree.node(keep_node).is_none() {
            return Err(ForestError::NodeNotFound {
                subtree: keep.0,
                node: keep_node.0,
            });
        }
        let absorbed_tree = self
            .subtrees
            .get(&absorb)
            .ok_or(ForestError::UnknownSubTree(absorb.0))?;
        if absorbed_tree.node(absorb_node).is_none() {
            return Err(ForestError::NodeNotFound {
                subtree: absorb.0,
                node: absorb_node.0,
            });
        }
        let mut absorbed = self.subtrees.remove(&absorb).expect("checked above");
        let mut parents = absorbed.parent_map();
        // Reverse the parent chain from the contact node up to the old root.
        let mut prev = Some(keep_node);
        let mut cur = Some(absorb_node);
        while let Some(c) = cur {
            let next = parents[&c];
            parents.insert(c, prev);
            prev = Some(c);
            cur = next;
        }
        for n in &mut absorbed.nodes {
            n.parent = parents[&n.id];
            self.owner.insert(n.id, keep);
        }
        let target = self.subtrees.get_mut(&keep).expect("checked above");
        target.nodes.append(&mut absorbed.nodes);
        target.goal_node = target.goal_node.or(absorbed.goal_node);
        Ok(())
    }

    /// Deletes a sub-tree whose information the rooted tree has used. The
    /// goal sub-tree survives when `retain_goal_tree` is set. Returns whether
    /// anything was removed.
    pub fn consume(&mut self, subtree: SubTreeId, retain_goal_tree: bool) -> bool {
        match self.subtrees.get(&subtree) {
            Some(t) if t.contains_goal() && retain_goal_tree => false,
            Some(_) => {
                let t = self.subtrees.remove(&subtree).expect("present");
                for n in &t.nodes {
                    self.owner.remove(&n.id);
                }
                true
            }
            None => false,
        }
    }

    pub fn extract_heuristic_path(&self, subtree: SubTreeId, contact: ForestNodeId) -> Result<Vec<Point>, ForestError> {
        self.subtrees
            .get(&subtree)
            .ok_or(ForestError::UnknownSubTree(subtree.0))?
            .extract_heuristic_path(contact)
    }

    /// Connectivity and bookkeeping invariants of every sub-tree.
    pub fn audit(&self) -> Result<(), AuditError> {
        let mut total = 0;
        for (id, tree) in &self.subtrees {
            if tree.id != *id {
                return Err(AuditError(format!("sub-tree keyed {id} carries id {}", tree.id)));
            }
            if tree.nodes.is_empty() {
                return Err(AuditError(format!("sub-tree {id} is empty")));
            }
            total += tree.nodes.len();
            let parents = tree.parent_map();
            if parents.len() != tree.nodes.len() {
                return Err(AuditError(format!("sub-tree {id} has duplicate node ids")));
            }
            let roots = tree.nodes.iter().filter(|n| n.parent.is_none()).count();
            if roots != 1 {
                return Err(AuditError(format!("sub-tree {id} has {roots} roots")));
            }
            for n in &tree.nodes {
                if self.owner.get(&n.id) != Some(id) {
                    return Err(AuditError(format!("node {} not registered to sub-tree {id}", n.id)));
                }
                // Walk to the root; more steps than nodes means a cycle.
                let mut cur = n.id;
                let mut steps = 0;
                while let Some(p) = parents[&cur] {
                    if !parents.contains_key(&p) {
                        return Err(AuditError(format!("node {} links outside sub-tree {id}", n.id)));
                    }
                    cur = p;
                    steps += 1;
                    if steps > tree.nodes.len() {
                        return Err(AuditError(format!("cycle through node {} in sub-tree {id}", n.id)));
                    }
                }
            }
            if let Some(g) = tree.goal_node {
                if !parents.contains_key(&g) {
                    return Err(AuditError(format!("goal node {g} missing from sub-tree {id}")));
                }
            }
        }
        if total != self.owner.len() {
            return Err(AuditError(format!(
                "owner index has {} nodes, trees hold {total}",
                self.owner.len()
            )));
        }
        Ok(())
    }

    /// True when every sub-tree edge is collision free on `grid`.
    pub fn edges_free(&self, grid: &OccupancyGrid, robot_radius: f64) -> bool {
        self.subtrees.values().all(|t| {
            t.nodes.iter().all(|n| match n.parent {
                None => true,
                Some(p) => grid.segment_free(t.node(p).expect("audited").pos, n.pos, robot_radius),
            })
        })
    }

    pub fn export(&self) -> Vec<SubTreeRow> {
        self.subtrees
            .values()
            .flat_map(|t| {
                t.nodes.iter().map(move |n| SubTreeRow {
                    id: n.id.0,
                    x: n.pos.x,
                    y: n.pos.y,
                    parent: n.parent.map(|p| p.0),
                    subtree: t.id.0,
                })
            })
            .collect()
    }
}

/// Closest qualifying proximity event between the rooted tree and the
/// forest: pairs at most `meet_radius` apart with a collision-free
/// connecting segment. Events involving the rooted tree take priority over
/// sub-tree/sub-tree events.
pub fn meet(
    rooted: &TimedTree,
    forest: &SubTreeForest,
    grid: &OccupancyGrid,
    meet_radius: f64,
    robot_radius: f64,
) -> Option<MeetEvent> {
    let r_sq = meet_radius * meet_radius;
    let mut candidates: Vec<MeetEvent> = Vec::new();
    for tree in forest.iter() {
        for sn in tree.nodes() {
            for rn in rooted.iter() {
                let d_sq = rn.position().distance_sq(&sn.pos);
                if d_sq <= r_sq {
                    candidates.push(MeetEvent::Rooted {
                        subtree: tree.id(),
                        rooted_node: rn.id,
                        subtree_node: sn.id,
                        distance: d_sq.sqrt(),
                    });
                }
            }
        }
    }
    let first_free = |mut cands: Vec<MeetEvent>, forest: &SubTreeForest| {
        cands.sort_by(|a, b| a.priority_cmp(b));
        cands.into_iter().find(|ev| {
            let (a, b) = endpoints(ev, rooted, forest);
            grid.segment_free(a, b, robot_radius)
        })
    };
    if let Some(ev) = first_free(candidates, forest) {
        return Some(ev);
    }
    let trees: Vec<&SubTree> = forest.iter().collect();
    let mut candidates = Vec::new();
    for (i, ta) in trees.iter().enumerate() {
        for tb in &trees[i + 1..] {
            for a in ta.nodes() {
                for b in tb.nodes() {
                    let d_sq = a.pos.distance_sq(&b.pos);
                    if d_sq <= r_sq {
                        candidates.push(MeetEvent::SubTrees {
                            keep: ta.id(),
                            absorb: tb.id(),
                            keep_node: a.id,
                            absorb_node: b.id,
                            distance: d_sq.sqrt(),
                        });
                    }
                }
            }
        }
    }
    first_free(candidates, forest)
}

/// Positions of the two contact nodes of an event.
pub fn endpoints(ev: &MeetEvent, rooted: &TimedTree, forest: &SubTreeForest) -> (Point, Point) {
    match *ev {
        MeetEvent::Rooted {
            rooted_node,
            subtree_node,
            ..
        } => (
            rooted.get(rooted_node).expect("event node in rooted tree").position(),
            forest.node(subtree_node).expect("event node in forest").pos,
        ),
        MeetEvent::SubTrees {
            keep_node, absorb_node, ..
        } => (
            forest.node(keep_node).expect("event node in forest").pos,
            forest.node(absorb_node).expect("event node in forest").pos,
        ),
    }
}

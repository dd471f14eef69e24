//! Incremental bookkeeping for proximity events.
//!
//! Whether two nodes qualify as a meet depends only on their positions and
//! the static grid, so each pair is tested once, when the younger node is
//! inserted. Pairs are dropped lazily once a node disappears or both ends end
//! up in the same sub-tree. The result always equals [`crate::forest::meet`].

use std::collections::HashMap;

use crate::forest::{ForestNodeId, MeetEvent, SubTreeForest};
use crate::geom::Point;
use crate::timed_tree::{NodeId, TimedTree};
use crate::world::OccupancyGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum NodeRef {
    Rooted(NodeId),
    Forest(ForestNodeId),
}

#[derive(Clone, Copy, Debug)]
struct Pair {
    a: NodeRef,
    b: ForestNodeId,
    distance: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct MeetTracker {
    radius: f64,
    robot_radius: f64,
    buckets: HashMap<(i64, i64), Vec<(NodeRef, Point)>>,
    pending: Vec<Pair>,
}

impl MeetTracker {
    pub fn new(radius: f64, robot_radius: f64) -> Self {
        Self {
            radius,
            robot_radius,
            buckets: HashMap::new(),
            pending: Vec::new(),
        }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.x / self.radius).floor() as i64, (p.y / self.radius).floor() as i64)
    }

    fn alive(node: NodeRef, rooted: &TimedTree, forest: &SubTreeForest) -> bool {
        match node {
            NodeRef::Rooted(id) => rooted.contains(id),
            NodeRef::Forest(id) => forest.owner_of(id).is_some(),
        }
    }

    fn insert(&mut self, node: NodeRef, pos: Point, rooted: &TimedTree, forest: &SubTreeForest, grid: &OccupancyGrid) {
        let (kx, ky) = self.key(pos);
        let own = match node {
            NodeRef::Rooted(_) => None,
            NodeRef::Forest(id) => forest.owner_of(id),
        };
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = self.buckets.get(&(kx + dx, ky + dy)) else {
                    continue;
                };
                for &(other, opos) in bucket {
                    if !Self::alive(other, rooted, forest) {
                        continue;
                    }
                    let pair = match (node, other) {
                        (NodeRef::Rooted(_), NodeRef::Rooted(_)) => continue,
                        (NodeRef::Rooted(_), NodeRef::Forest(f)) => Pair {
                            a: node,
                            b: f,
                            distance: 0.0,
                        },
                        (NodeRef::Forest(f), NodeRef::Rooted(_)) => Pair {
                            a: other,
                            b: f,
                            distance: 0.0,
                        },
                        (NodeRef::Forest(f), NodeRef::Forest(g)) => {
                            if forest.owner_of(g) == own {
                                continue;
                            }
                            Pair {
                                a: NodeRef::Forest(g),
                                b: f,
                                distance: 0.0,
                            }
                        }
                    };
                    let d_sq = pos.distance_sq(&opos);
                    if d_sq <= self.radius * self.radius && grid.segment_free(pos, opos, self.robot_radius) {
                        self.pending.push(Pair {
                            distance: d_sq.sqrt(),
                            ..pair
                        });
                    }
                }
            }
        }
        self.buckets.entry((kx, ky)).or_default().push((node, pos));
    }

    pub fn insert_rooted(&mut self, id: NodeId, rooted: &TimedTree, forest: &SubTreeForest, grid: &OccupancyGrid) {
        let pos = rooted.get(id).expect("inserted node exists").position();
        self.insert(NodeRef::Rooted(id), pos, rooted, forest, grid);
    }

    pub fn insert_forest(
        &mut self,
        id: ForestNodeId,
        rooted: &TimedTree,
        forest: &SubTreeForest,
        grid: &OccupancyGrid,
    ) {
        let pos = forest.node(id).expect("inserted node exists").pos;
        self.insert(NodeRef::Forest(id), pos, rooted, forest, grid);
    }

    /// Drops dead entries from the spatial index.
    pub fn compact(&mut self, rooted: &TimedTree, forest: &SubTreeForest) {
        self.buckets.retain(|_, bucket| {
            bucket.retain(|(n, _)| Self::alive(*n, rooted, forest));
            !bucket.is_empty()
        });
    }

    fn event(pair: &Pair, rooted: &TimedTree, forest: &SubTreeForest) -> Option<MeetEvent> {
        let b_owner = forest.owner_of(pair.b)?;
        match pair.a {
            NodeRef::Rooted(r) => rooted.contains(r).then_some(MeetEvent::Rooted {
                subtree: b_owner,
                rooted_node: r,
                subtree_node: pair.b,
                distance: pair.distance,
            }),
            NodeRef::Forest(a) => {
                let a_owner = forest.owner_of(a)?;
                if a_owner == b_owner {
                    return None;
                }
                let ((keep, keep_node), (absorb, absorb_node)) = if a_owner < b_owner {
                    ((a_owner, a), (b_owner, pair.b))
                } else {
                    ((b_owner, pair.b), (a_owner, a))
                };
                Some(MeetEvent::SubTrees {
                    keep,
                    absorb,
                    keep_node,
                    absorb_node,
                    distance: pair.distance,
                })
            }
        }
    }

    /// Highest-priority qualifying event, if any.
    pub fn next_event(&mut self, rooted: &TimedTree, forest: &SubTreeForest) -> Option<MeetEvent> {
        self.pending.retain(|p| Self::event(p, rooted, forest).is_some());
        self.pending
            .iter()
            .filter_map(|p| Self::event(p, rooted, forest))
            .min_by(|a, b| a.priority_cmp(b))
    }
}

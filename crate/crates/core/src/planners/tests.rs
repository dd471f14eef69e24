use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::forest::meet;
use crate::kinematics::{reachable_control_window, state_cost, step_kinematics, ControlInput};
use crate::world::TrajectorySample;

const R: f64 = 0.3;

fn open_grid() -> OccupancyGrid {
    OccupancyGrid::free(100, 100, 0.2).unwrap()
}

/// 20 m square with an inner wall at x in [9, 11] and a 2 m door near the top.
fn walled_grid() -> OccupancyGrid {
    let mut g = open_grid();
    for row in 0..100 {
        for col in 0..100 {
            let c = g.cell_center(col, row);
            if (9.0..=11.0).contains(&c.x) && !(15.0..=17.0).contains(&c.y) {
                g.set(col, row, 1.0);
            }
        }
    }
    g
}

fn params() -> PlannerParams {
    PlannerParams {
        meet_radius: 2.0,
        iterations_per_cycle: 100,
        ..PlannerParams::default()
    }
}

fn no_crowd(grid: &OccupancyGrid) -> WorldView<'_> {
    WorldView::new(grid, &[], R)
}

fn planner(kind: PlannerKind, grid: &OccupancyGrid, seed: u64) -> Planner {
    let start = RobotState::at_rest(2.0, 2.0, 0.0, 0.0);
    Planner::new(kind, params(), start, Point::new(18.0, 18.0), grid, R, seed).unwrap()
}

#[test]
fn node_score_handles_zero_denominator() {
    assert_eq!(node_score(0.0, 0.0, 2.0), f64::INFINITY);
    assert!((node_score(0.5, 0.25, 2.0) - 1.0).abs() < 1e-12);
}

#[test]
fn extend_straight_ahead_takes_fastest_straight_control() {
    let grid = open_grid();
    let p = params();
    let mut tree = TimedTree::new(RobotState::at_rest(2.0, 10.0, 0.0, 0.0), p.dt, p.horizon);
    let id = extend(
        &mut tree,
        Point::new(12.0, 10.0),
        &no_crowd(&grid),
        Point::new(18.0, 10.0),
        &p,
    )
    .unwrap();
    let node = tree.get(id).unwrap();
    let u = node.control.unwrap();
    assert_eq!(u.v, 0.25);
    assert_eq!(u.omega, 0.0);
    assert_eq!(node.depth, 1);
}

#[test]
fn extend_toward_sample_inside_wall_still_admits_free_candidate() {
    let grid = walled_grid();
    let p = params();
    let mut tree = TimedTree::new(RobotState::at_rest(5.0, 5.0, 0.0, 0.0), p.dt, p.horizon);
    assert!(extend(
        &mut tree,
        Point::new(10.0, 5.0),
        &no_crowd(&grid),
        Point::new(18.0, 18.0),
        &p
    )
    .is_ok());
}

#[test]
fn extend_rejects_at_depth_limit() {
    let grid = open_grid();
    let p = params();
    let mut tree = TimedTree::new(RobotState::at_rest(5.0, 5.0, 0.0, 0.0), p.dt, 1);
    let child = RobotState {
        x: 9.0,
        ..RobotState::at_rest(5.0, 5.0, 0.0, 0.5)
    };
    tree.add_node(NodeId(0), child, ControlInput::new(0.0, 0.0), 0.0)
        .unwrap();
    let r = extend(
        &mut tree,
        Point::new(12.0, 5.0),
        &no_crowd(&grid),
        Point::new(20.0, 5.0),
        &p,
    );
    assert_eq!(r, Err(ExtendRejection::DepthLimit));
    assert_eq!(tree.len(), 2);
}

#[test]
fn extend_rejects_edges_into_walls() {
    // Wall from x = 2.0 onwards; the robot moves at full speed toward it.
    let mut grid = OccupancyGrid::free(60, 60, 0.1).unwrap();
    for row in 0..60 {
        for col in 20..60 {
            grid.set(col, row, 1.0);
        }
    }
    let p = params();
    let root = RobotState {
        v: 1.0,
        ..RobotState::at_rest(1.55, 3.0, 0.0, 0.0)
    };
    assert!(grid.footprint_free(root.position(), R));
    let mut tree = TimedTree::new(root, p.dt, p.horizon);
    let r = extend(
        &mut tree,
        Point::new(5.0, 3.0),
        &no_crowd(&grid),
        Point::new(5.0, 3.0),
        &p,
    );
    assert_eq!(r, Err(ExtendRejection::StaticCollision));
}

#[test]
fn extend_rejects_steps_over_the_risk_cap() {
    let grid = open_grid();
    let p = params();
    let ped = MovingObstacle::new(
        1,
        0.3,
        vec![TrajectorySample {
            t: 0.0,
            pos: Point::new(5.3, 5.0),
        }],
    )
    .unwrap();
    let preds = predict_obstacles(&[ped], 0.0, &p);
    let world = WorldView::new(&grid, &preds, R);
    let mut tree = TimedTree::new(RobotState::at_rest(5.0, 5.0, 0.0, 0.0), p.dt, p.horizon);
    let r = extend(&mut tree, Point::new(9.0, 5.0), &world, Point::new(18.0, 5.0), &p);
    assert_eq!(r, Err(ExtendRejection::RiskCap));
}

/// Independent oracle: score every node, keep the strictly better one in
/// ascending id order, then scan the (nv+1)x(nw+1) lattice by index.
fn brute_force(tree: &TimedTree, x_rand: Point, goal: Point, p: &PlannerParams) -> (NodeId, ControlInput) {
    let nodes: Vec<_> = tree.iter().collect();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, n) in nodes.iter().enumerate() {
        let c = state_cost(&n.state, x_rand, goal, p);
        let denom = c + p.beta * n.path_risk;
        let score = if denom <= 0.0 { f64::INFINITY } else { 1.0 / denom };
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    let from = nodes[best].state;
    let w = reachable_control_window(&from, p);
    let mut best_u = None;
    let mut best_cost = f64::INFINITY;
    for i in 0..=p.delta_nv {
        for j in 0..=p.delta_nw {
            let u = w.lattice_point(i, j, p.delta_nv, p.delta_nw);
            let c = state_cost(&step_kinematics(&from, u, p.dt), x_rand, goal, p);
            if best_u.is_none() || c < best_cost {
                best_cost = c;
                best_u = Some(u);
            }
        }
    }
    (nodes[best].id, best_u.unwrap())
}

#[test]
fn select_extension_agrees_with_brute_force() {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let root = RobotState {
            v: rng.random_range(0.0..1.0),
            omega: rng.random_range(-0.5..0.5),
            ..RobotState::at_rest(
                rng.random_range(0.0..20.0),
                rng.random_range(0.0..20.0),
                rng.random_range(-3.0..3.0),
                0.0,
            )
        };
        let mut tree = TimedTree::new(root, p.dt, p.horizon);
        for _ in 0..rng.random_range(0..30) {
            let ids: Vec<NodeId> = tree.iter().filter(|n| n.depth < p.horizon).map(|n| n.id).collect();
            let parent = ids[rng.random_range(0..ids.len())];
            let from = tree.get(parent).unwrap().state;
            let w = reachable_control_window(&from, &p);
            let u = w.lattice_point(rng.random_range(0..=4), rng.random_range(0..=4), 4, 4);
            tree.add_node(parent, step_kinematics(&from, u, p.dt), u, rng.random_range(0.0..0.3))
                .unwrap();
        }
        let x_rand = Point::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
        let goal = Point::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
        let choice = select_extension(&tree, x_rand, goal, &p);
        assert_eq!((choice.node, choice.control), brute_force(&tree, x_rand, goal, &p));
    }
}

#[test]
fn tracker_matches_exhaustive_meet_scan() {
    let grid = walled_grid();
    for kind in [PlannerKind::BiRiskRrt, PlannerKind::MultiRiskRrt] {
        let mut pl = planner(kind, &grid, 3);
        let p = pl.params.clone();
        for _ in 0..600 {
            let expected = meet(&pl.rooted, &pl.forest, &grid, p.meet_radius, R);
            let got = pl.tracker.clone().next_event(&pl.rooted, &pl.forest);
            assert_eq!(got, expected, "{kind}");
            pl.grow(&no_crowd(&grid));
        }
    }
}

#[test]
fn grow_trace_is_reproducible() {
    let grid = walled_grid();
    for kind in PlannerKind::ALL {
        let run = || {
            let mut pl = planner(kind, &grid, 11);
            pl.enable_trace();
            for _ in 0..400 {
                pl.grow(&no_crowd(&grid));
            }
            pl.trace().to_vec()
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn risk_planner_never_holds_subtrees() {
    let grid = walled_grid();
    let mut pl = planner(PlannerKind::RiskRrt, &grid, 1);
    for _ in 0..300 {
        pl.grow(&no_crowd(&grid));
        assert!(pl.forest.is_empty());
        pl.rooted.audit().unwrap();
    }
}

#[test]
fn bi_goal_tree_grows_then_freezes() {
    let grid = open_grid();
    let mut pl = planner(PlannerKind::BiRiskRrt, &grid, 5);
    let mut frozen_size = None;
    for _ in 0..2000 {
        let before = (pl.rooted.len(), pl.forest.node_count());
        pl.grow(&no_crowd(&grid));
        assert!(pl.forest.len() <= 1);
        pl.rooted.audit().unwrap();
        let after = (pl.rooted.len(), pl.forest.node_count());
        match (&pl.heuristic, frozen_size) {
            (Some(h), None) => {
                assert_eq!(h.remaining, None);
                let goal_tree = pl.forest.goal_tree().unwrap();
                assert_eq!(h.source, goal_tree);
                frozen_size = Some(pl.forest.node_count());
            }
            (Some(_), Some(n)) => assert_eq!(pl.forest.node_count(), n),
            (None, _) => assert!(after.0 >= before.0 && after.1 >= before.1),
        }
    }
    assert!(frozen_size.is_some(), "trees never met");
}

#[test]
fn bi_heuristic_components_follow_goal_path() {
    let grid = open_grid();
    let mut pl = planner(PlannerKind::BiRiskRrt, &grid, 9);
    while pl.heuristic.is_none() {
        pl.grow(&no_crowd(&grid));
    }
    let h = pl.heuristic.as_ref().unwrap();
    let comps = h.distribution.components();
    assert_eq!(comps[0], pl.goal);
    let goal_tree = pl.forest.get(h.source).unwrap();
    assert!(comps.iter().all(|c| goal_tree.nodes().iter().any(|n| n.pos == *c)));
}

#[test]
fn multi_far_sample_starts_a_subtree() {
    let grid = open_grid();
    let mut pl = planner(PlannerKind::MultiRiskRrt, &grid, 2);
    pl.enable_trace();
    // Grow until the first new sub-tree appears; the forest then holds the
    // goal tree plus exactly one single-node sub-tree.
    loop {
        let trees = pl.forest.len();
        pl.grow(&no_crowd(&grid));
        let step = *pl.trace().last().unwrap();
        if step.branch == GrowBranch::NewSubTree {
            assert_eq!(pl.forest.len(), trees + 1);
            let newest = pl.forest.iter().last().unwrap();
            assert_eq!(newest.len(), 1);
            assert_eq!(newest.nodes()[0].pos, step.sample.unwrap());
            break;
        }
    }
}

#[test]
fn multi_branch_order_prefers_rooted_tree() {
    let grid = open_grid();
    let mut pl = planner(PlannerKind::MultiRiskRrt, &grid, 4);
    pl.enable_trace();
    let mut both_near = 0;
    for _ in 0..1500 {
        let rooted_before = pl.rooted.clone();
        let forest_before = pl.forest.clone();
        pl.grow(&no_crowd(&grid));
        let step = *pl.trace().last().unwrap();
        let Some(x) = step.sample else { continue };
        let to_rooted = rooted_before.nearest(x).unwrap().distance;
        let to_forest = forest_before.nearest(x).map(|n| n.distance).unwrap_or(f64::INFINITY);
        match step.branch {
            GrowBranch::Rooted => {
                assert!(to_rooted < pl.params.lambda);
                if to_forest < pl.params.lambda {
                    both_near += 1;
                }
            }
            GrowBranch::SubTree => assert!(to_rooted >= pl.params.lambda && to_forest < pl.params.lambda),
            GrowBranch::NewSubTree => assert!(to_rooted >= pl.params.lambda && to_forest >= pl.params.lambda),
            GrowBranch::Heuristic | GrowBranch::Merge => {}
        }
    }
    assert!(both_near > 0);
    let branches: Vec<_> = pl.trace().iter().map(|s| s.branch).collect();
    for b in [
        GrowBranch::Rooted,
        GrowBranch::SubTree,
        GrowBranch::NewSubTree,
        GrowBranch::Merge,
        GrowBranch::Heuristic,
    ] {
        assert!(branches.contains(&b), "{b:?} never ran");
    }
}

#[test]
fn multi_consumed_subtrees_leave_the_forest() {
    let grid = walled_grid();
    for retain in [false, true] {
        let mut pl = planner(PlannerKind::MultiRiskRrt, &grid, 8);
        pl.params.retain_goal_tree = retain;
        let mut consumed = 0;
        for _ in 0..3000 {
            let active = pl.heuristic.as_ref().map(|h| (h.source, h.remaining));
            let source_is_goal = active.is_some_and(|(s, _)| pl.forest.get(s).is_some_and(|t| t.contains_goal()));
            pl.grow(&no_crowd(&grid));
            pl.forest.audit().unwrap();
            pl.rooted.audit().unwrap();
            if let Some((source, Some(1))) = active {
                consumed += 1;
                assert!(pl.heuristic.as_ref().is_none_or(|h| h.source != source) || retain);
                if retain && source_is_goal {
                    assert!(pl.forest.contains(source));
                } else {
                    assert!(!pl.forest.contains(source));
                }
            }
        }
        assert!(consumed > 0);
        assert!(pl.forest.goal_tree().is_some());
    }
}

#[test]
fn multi_rebuilds_goal_tree_after_consumption() {
    let grid = open_grid();
    let mut pl = planner(PlannerKind::MultiRiskRrt, &grid, 12);
    let first = pl.forest.goal_tree().unwrap();
    let mut rebuilt = None;
    for _ in 0..4000 {
        let absent = pl.forest.goal_tree().is_none();
        pl.grow(&no_crowd(&grid));
        if absent {
            // Re-seeded at the start of the call, possibly grown since.
            let g = pl.forest.goal_tree().expect("re-seeded");
            assert_ne!(g, first);
            assert_eq!(pl.forest.get(g).unwrap().nodes()[0].pos, pl.goal);
            rebuilt = Some(g);
            break;
        }
    }
    assert!(rebuilt.is_some());
}

#[test]
fn goal_next_to_root_is_reached_within_a_bounded_budget() {
    let grid = open_grid();
    let mut slow = 0;
    for seed in 0..100 {
        let start = RobotState::at_rest(10.0, 10.0, 0.0, 0.0);
        let mut pl = Planner::new(
            PlannerKind::RiskRrt,
            params(),
            start,
            Point::new(11.5, 10.0),
            &grid,
            R,
            seed,
        )
        .unwrap();
        let reached = (0..6000).any(|_| pl.grow(&no_crowd(&grid)) == GrowOutcome::Reached);
        if !reached {
            slow += 1;
        }
    }
    assert!(slow <= 1, "{slow} seeds needed more than 6000 iterations");
}

#[test]
fn standing_still_beats_approaching_a_close_goal() {
    // Sample beyond a goal 1.5 m ahead: creeping forward raises the
    // position term faster than it shortens the distance to the sample.
    let p = params();
    let goal = Point::new(11.5, 10.0);
    let x_rand = Point::new(15.0, 10.0);
    let still = RobotState::at_rest(10.0, 10.0, 0.0, 0.5);
    let ahead = RobotState::at_rest(10.0625, 10.0, 0.0, 0.5);
    assert!(state_cost(&still, x_rand, goal, &p) < state_cost(&ahead, x_rand, goal, &p));
}

#[test]
fn walled_off_goal_is_never_reached() {
    let mut grid = open_grid();
    for row in 0..100 {
        for col in 0..100 {
            let c = grid.cell_center(col, row);
            if c.x >= 14.0 && c.y >= 14.0 && (c.x <= 15.0 || c.y <= 15.0) {
                grid.set(col, row, 1.0);
            }
        }
    }
    let mut pl = planner(PlannerKind::RiskRrt, &grid, 6);
    for _ in 0..2000 {
        assert_ne!(pl.grow(&no_crowd(&grid)), GrowOutcome::Reached);
    }
}

#[test]
fn first_cycle_yields_a_trajectory_in_a_free_corridor() {
    let mut grid = OccupancyGrid::free(100, 20, 0.2).unwrap();
    for col in 0..100 {
        grid.set(col, 0, 1.0);
        grid.set(col, 19, 1.0);
    }
    for kind in PlannerKind::ALL {
        for seed in 0..20 {
            let start = RobotState::at_rest(2.0, 2.0, 0.0, 0.0);
            let mut pl = Planner::new(kind, params(), start, Point::new(7.0, 2.0), &grid, R, seed).unwrap();
            let report = pl.plan_cycle(&grid, &[], &start);
            assert!(report.trajectory.is_some(), "{kind} seed {seed}");
        }
    }
}

#[test]
fn robot_sealed_in_gets_no_trajectory() {
    // The free pocket is smaller than the footprint: no pose is admissible.
    let mut grid = open_grid();
    for row in 0..100 {
        for col in 0..100 {
            let c = grid.cell_center(col, row);
            if (c.x - 10.1).abs() > 0.15 || (c.y - 10.1).abs() > 0.15 {
                grid.set(col, row, 1.0);
            }
        }
    }
    for kind in PlannerKind::ALL {
        let start = RobotState::at_rest(10.1, 10.1, 0.0, 0.0);
        let mut pl = Planner::new(kind, params(), start, Point::new(18.0, 18.0), &grid, R, 0).unwrap();
        for _ in 0..3 {
            let report = pl.plan_cycle(&grid, &[], &start);
            assert!(report.trajectory.is_none(), "{kind}");
            assert_eq!(report.stats.tree_size, 1);
        }
    }
}

#[test]
fn identical_planners_report_identically() {
    let grid = walled_grid();
    let ped = MovingObstacle::new(
        1,
        0.3,
        vec![
            TrajectorySample {
                t: -0.5,
                pos: Point::new(6.0, 6.0),
            },
            TrajectorySample {
                t: 0.0,
                pos: Point::new(6.0, 5.7),
            },
        ],
    )
    .unwrap();
    for kind in PlannerKind::ALL {
        let start = RobotState::at_rest(2.0, 2.0, 0.0, 0.0);
        let mut a = planner(kind, &grid, 21);
        let mut b = planner(kind, &grid, 21);
        for _ in 0..3 {
            let ra = a.plan_cycle(&grid, std::slice::from_ref(&ped), &start);
            let rb = b.plan_cycle(&grid, std::slice::from_ref(&ped), &start);
            assert_eq!(ra, rb);
        }
    }
}

#[test]
fn committing_keeps_the_tree_consistent() {
    let grid = walled_grid();
    let mut pl = planner(PlannerKind::MultiRiskRrt, &grid, 14);
    let mut state = RobotState::at_rest(2.0, 2.0, 0.0, 0.0);
    for _ in 0..10 {
        let report = pl.plan_cycle(&grid, &[], &state);
        let traj = report.trajectory.expect("open start area");
        let child = traj.nodes[0];
        state = pl.rooted.get(child).unwrap().state;
        pl.commit(child).unwrap();
        pl.rooted.audit().unwrap();
        assert_eq!(pl.rooted.root().state, state);
    }
}

//! Fixtures shared by the benchmarks.

use multirisk_core::planners::extend;
use multirisk_core::replica;
use multirisk_core::sim::Scenario;
use multirisk_core::world::predict_obstacles;
use multirisk_core::{Planner, PlannerKind, Point, TimedTree, WorldView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn crowd_scenario() -> Scenario {
    replica::corridor_crowd(0)
}

/// Rooted tree grown for `iterations` uniform Extend calls in the crowd
/// scenario.
pub fn grown_tree(sc: &Scenario, iterations: usize) -> TimedTree {
    let preds = predict_obstacles(&sc.crowd, 0.0, &sc.params);
    let world = WorldView::new(&sc.grid, &preds, sc.robot_radius);
    let mut tree = TimedTree::new(sc.start, sc.params.dt, sc.params.horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = sc.grid.bounds();
    for _ in 0..iterations {
        let x = Point::new(rng.random_range(b.min.x..b.max.x), rng.random_range(b.min.y..b.max.y));
        let _ = extend(&mut tree, x, &world, sc.goal, &sc.params);
    }
    tree
}

/// Deterministic probe points spread over the map.
pub fn probe_points(sc: &Scenario, n: usize) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let b = sc.grid.bounds();
    (0..n)
        .map(|_| Point::new(rng.random_range(b.min.x..b.max.x), rng.random_range(b.min.y..b.max.y)))
        .collect()
}

pub fn fresh_planner(sc: &Scenario, kind: PlannerKind) -> Planner {
    Planner::new(
        kind,
        sc.params.clone(),
        sc.start,
        sc.goal,
        &sc.grid,
        sc.robot_radius,
        sc.seed,
    )
    .expect("valid replica")
}

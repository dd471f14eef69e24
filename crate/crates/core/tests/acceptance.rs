//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.
//!
//! Tolerances are pinned as constants below.

use std::process::ExitCode;
use std::time::Instant;

use multirisk_core::forest::{uniform_sample, ForestNodeId, SampleBranch};
use multirisk_core::harness::{render_snapshot, run_batch, BatchReport, KindSummary, Snapshot};
use multirisk_core::kinematics::reachable_control_window;
use multirisk_core::planners::{extend, select_extension};
use multirisk_core::replica;
use multirisk_core::sim::{run_episode_observed, Scenario};
use multirisk_core::world::{combined_risk, predict_obstacles, MovingObstacle, TrajectorySample};
use multirisk_core::{
    step_kinematics, Bounds, ControlInput, HeuristicDistribution, NodeId, OccupancyGrid, PlannerKind, PlannerParams,
    Point, RobotState, SubTreeForest, SubTreeId, TimedTree, WorldView,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: usize = 20;
const SEED_BASE: u64 = 0;
/// Criterion 3: Multi's mean length may differ from Risk-RRT's by this fraction.
const LENGTH_PARITY: f64 = 0.25;
const ORACLE_INSTANCES: usize = 1000;
const RISK_INPUTS: usize = 10_000;
/// Slack for float reassociation in the permutation check.
const PERMUTATION_TOL: f64 = 1e-12;
const SAMPLER_DRAWS: usize = 10_000;
const SAMPLER_TOL: f64 = 0.05;
const KIN_CONTROLS: usize = 1000;
const COMPOSITION_TOL: f64 = 1e-9;
const EULER_STEP: f64 = 1e-5;
const EULER_TOL: f64 = 1e-3;
const SNAPSHOT_EVERY: usize = 10;
const FUZZ_OPS: usize = 10_000;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn summary_line(s: &KindSummary) -> String {
    format!(
        "{} {:.0}% exec {} len {}",
        s.planner,
        s.success_rate,
        s.exec_mean.map_or("-".into(), |v| format!("{v:.1}s")),
        s.len_mean.map_or("-".into(), |v| format!("{v:.1}m")),
    )
}

fn exec(report: &BatchReport, kind: PlannerKind) -> f64 {
    report.summary(kind).and_then(|s| s.exec_mean).unwrap_or(f64::INFINITY)
}

fn ordering(report: &BatchReport) -> Outcome {
    let (m, b, r) = (
        exec(report, PlannerKind::MultiRiskRrt),
        exec(report, PlannerKind::BiRiskRrt),
        exec(report, PlannerKind::RiskRrt),
    );
    let multi = report.summary(PlannerKind::MultiRiskRrt).unwrap();
    let detail = report.summaries.iter().map(summary_line).collect::<Vec<_>>().join("; ");
    check(m < b && b < r && multi.successes == multi.episodes, detail)
}

fn crowd_robustness(report: &BatchReport) -> Outcome {
    let multi = report.summary(PlannerKind::MultiRiskRrt).unwrap();
    let collisions = report
        .episodes
        .iter()
        .filter(|e| e.planner == PlannerKind::MultiRiskRrt && e.success && e.collided)
        .count();
    let (m, b) = (
        exec(report, PlannerKind::MultiRiskRrt),
        exec(report, PlannerKind::BiRiskRrt),
    );
    let detail = format!(
        "{}; multi collisions {collisions}",
        report.summaries.iter().map(summary_line).collect::<Vec<_>>().join("; ")
    );
    check(multi.successes == multi.episodes && m < b && collisions == 0, detail)
}

fn length_parity(report: &BatchReport) -> Outcome {
    let len = |k| report.summary(k).and_then(|s| s.len_mean);
    match (len(PlannerKind::MultiRiskRrt), len(PlannerKind::RiskRrt)) {
        (Some(m), Some(r)) => {
            let rel = (m - r).abs() / r;
            check(
                rel <= LENGTH_PARITY,
                format!("multi {m:.2} m vs risk {r:.2} m, {:.1}% apart", rel * 100.0),
            )
        }
        _ => Err("a planner had no successful episode".into()),
    }
}

fn goal_tree_ablation() -> Outcome {
    let run = |retain: bool| {
        let mut sc = replica::zigzag_static(0);
        sc.params.retain_goal_tree = retain;
        run_batch(&sc, &[PlannerKind::MultiRiskRrt], SEEDS, SEED_BASE).map(|r| r.summaries[0].clone())
    };
    let fresh = run(false).map_err(|e| e.to_string())?;
    let kept = run(true).map_err(|e| e.to_string())?;
    let (f, k) = (
        fresh.exec_mean.unwrap_or(f64::INFINITY),
        kept.exec_mean.unwrap_or(f64::INFINITY),
    );
    check(
        f <= k,
        format!(
            "update {f:.1}s ({}/{}) vs retain {k:.1}s ({}/{})",
            fresh.successes, fresh.episodes, kept.successes, kept.episodes
        ),
    )
}

/// Cost written out from its definition, independent of the library.
fn oracle_cost(from: &RobotState, target: Point, goal: Point, p: &PlannerParams) -> f64 {
    let (dx, dy) = (target.x - from.x, target.y - from.y);
    let to_target = dx.hypot(dy);
    let to_goal = (goal.x - from.x).hypot(goal.y - from.y);
    let pos = if to_goal == 0.0 { 0.0 } else { to_target / to_goal };
    let ang = if to_target == 0.0 {
        0.0
    } else {
        ((from.theta.cos() * dx + from.theta.sin() * dy) / to_target)
            .clamp(-1.0, 1.0)
            .acos()
    };
    p.w1 * pos + p.w2 * ang
}

/// Exhaustive argmax over nodes (lowest id wins ties) and argmin over every
/// lattice control (first in row-major order wins ties).
fn oracle_extension(tree: &TimedTree, x_rand: Point, goal: Point, p: &PlannerParams) -> (NodeId, ControlInput) {
    let mut nodes: Vec<_> = tree.iter().collect();
    nodes.sort_by_key(|n| n.id);
    let score = |n: &&multirisk_core::timed_tree::TimedNode| {
        let d = oracle_cost(&n.state, x_rand, goal, p) + p.beta * n.path_risk;
        if d <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / d
        }
    };
    let best_score = nodes.iter().map(score).fold(f64::NEG_INFINITY, f64::max);
    let best = nodes.iter().find(|n| score(n) == best_score).unwrap();
    let from = best.state;
    let dv = p.a_max * p.dt;
    let dw = p.alpha_max * p.dt;
    let (v0, v1) = ((from.v - dv).clamp(0.0, p.v_max), (from.v + dv).clamp(0.0, p.v_max));
    let (w0, w1) = (
        (from.omega - dw).clamp(-p.omega_max, p.omega_max),
        (from.omega + dw).clamp(-p.omega_max, p.omega_max),
    );
    let mut controls = Vec::new();
    for i in 0..=p.delta_nv {
        for j in 0..=p.delta_nw {
            let v = v0 + (v1 - v0) * i as f64 / p.delta_nv as f64;
            let w = w0 + (w1 - w0) * j as f64 / p.delta_nw as f64;
            controls.push(ControlInput::new(v, w));
        }
    }
    let costs: Vec<f64> = controls
        .iter()
        .map(|&u| oracle_cost(&step_kinematics(&from, u, p.dt), x_rand, goal, p))
        .collect();
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let k = costs.iter().position(|&c| c == min).unwrap();
    (best.id, controls[k])
}

fn extend_oracle() -> Outcome {
    let p = PlannerParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut agree = 0;
    for _ in 0..ORACLE_INSTANCES {
        let root = RobotState {
            v: rng.random_range(0.0..p.v_max),
            omega: rng.random_range(-p.omega_max..p.omega_max),
            ..RobotState::at_rest(
                rng.random_range(0.0..20.0),
                rng.random_range(0.0..20.0),
                rng.random_range(-3.1..3.1),
                0.0,
            )
        };
        let mut tree = TimedTree::new(root, p.dt, p.horizon);
        for _ in 0..rng.random_range(0..40) {
            let open: Vec<NodeId> = tree.iter().filter(|n| n.depth < p.horizon).map(|n| n.id).collect();
            let parent = open[rng.random_range(0..open.len())];
            let from = tree.get(parent).unwrap().state;
            let w = reachable_control_window(&from, &p);
            let u = w.lattice_point(
                rng.random_range(0..=p.delta_nv),
                rng.random_range(0..=p.delta_nw),
                p.delta_nv,
                p.delta_nw,
            );
            // Coarse risks so equal scores actually occur.
            let risk = rng.random_range(0..4) as f64 * 0.1;
            tree.add_node(parent, step_kinematics(&from, u, p.dt), u, risk).unwrap();
        }
        let x_rand = Point::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
        let goal = if rng.random_bool(0.1) {
            // Goal on the root exercises the zero-distance branch.
            root.position()
        } else {
            Point::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0))
        };
        let got = select_extension(&tree, x_rand, goal, &p);
        if (got.node, got.control) == oracle_extension(&tree, x_rand, goal, &p) {
            agree += 1;
        }
    }
    check(
        agree == ORACLE_INSTANCES,
        format!("{agree}/{ORACLE_INSTANCES} instances agree"),
    )
}

fn risk_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    for i in 0..RISK_INPUTS {
        let p_rs: f64 = rng.random();
        let n = rng.random_range(0..8);
        let p_rd: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let r = combined_risk(p_rs, &p_rd).unwrap();
        let floor = p_rd.iter().copied().fold(p_rs, f64::max);
        if !(0.0..=1.0).contains(&r) || r < floor - 1e-12 {
            failures.push(format!("bounds at input {i}"));
        }
        let bump = rng.random_range(0.0..=1.0 - p_rs);
        if combined_risk(p_rs + bump, &p_rd).unwrap() < r {
            failures.push(format!("static monotonicity at input {i}"));
        }
        if n > 0 {
            let mut more = p_rd.clone();
            let k = rng.random_range(0..n);
            more[k] += rng.random_range(0.0..=1.0 - more[k]);
            if combined_risk(p_rs, &more).unwrap() < r {
                failures.push(format!("dynamic monotonicity at input {i}"));
            }
            let mut extra = p_rd.clone();
            extra.push(rng.random());
            if combined_risk(p_rs, &extra).unwrap() < r {
                failures.push(format!("extra obstacle lowered risk at input {i}"));
            }
        }
        let mut shuffled = p_rd.clone();
        shuffled.shuffle(&mut rng);
        if (combined_risk(p_rs, &shuffled).unwrap() - r).abs() > PERMUTATION_TOL {
            failures.push(format!("permutation at input {i}"));
        }
        let q: f64 = rng.random();
        if combined_risk(0.0, &[q]).unwrap() != q || combined_risk(q, &[]).unwrap() != q {
            failures.push(format!("identity at input {i}"));
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{RISK_INPUTS} inputs, {} violations {:?}",
            failures.len(),
            failures.first()
        ),
    )
}

fn sampler_contract() -> Outcome {
    let bounds = Bounds::new(Point::new(0.0, 0.0), Point::new(43.2, 43.2));
    let comps = vec![Point::new(5.0, 5.0), Point::new(20.0, 30.0), Point::new(40.0, 10.0)];
    let mut parts = Vec::new();
    let mut ok = true;
    for h_r in [0.3, 0.7] {
        let d = HeuristicDistribution::new(comps.clone(), 0.86, h_r, bounds).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let hits = (0..SAMPLER_DRAWS)
            .filter(|_| matches!(d.sample_traced(&mut rng).1, SampleBranch::Gaussian(_)))
            .count();
        let freq = hits as f64 / SAMPLER_DRAWS as f64;
        ok &= (freq - h_r).abs() <= SAMPLER_TOL;
        parts.push(format!("h_r {h_r}: {freq:.4}"));
    }
    let d = HeuristicDistribution::new(comps, 0.86, 0.0, bounds).unwrap();
    let mut a = ChaCha8Rng::seed_from_u64(8);
    let mut b = ChaCha8Rng::seed_from_u64(8);
    let identical = (0..SAMPLER_DRAWS).all(|_| d.sample(&mut a) == uniform_sample(&bounds, &mut b));
    ok &= identical;
    parts.push(format!("h_r 0 stream-identical: {identical}"));
    check(ok, parts.join(", "))
}

fn kinematic_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_comp: f64 = 0.0;
    let mut worst_euler: f64 = 0.0;
    for i in 0..KIN_CONTROLS {
        let s = RobotState::at_rest(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-3.1..3.1),
            0.0,
        );
        let omega = if i % 10 == 0 { 0.0 } else { rng.random_range(-0.5..0.5) };
        let u = ControlInput::new(rng.random_range(0.0..1.0), omega);
        let dt = 0.5;
        let full = step_kinematics(&s, u, dt);
        let half = step_kinematics(&step_kinematics(&s, u, dt / 2.0), u, dt / 2.0);
        let dtheta = (full.theta - half.theta).sin().abs();
        worst_comp = worst_comp
            .max((full.x - half.x).abs())
            .max((full.y - half.y).abs())
            .max(dtheta);

        let (mut x, mut y, mut th) = (s.x, s.y, s.theta);
        let n = (dt / EULER_STEP).round() as usize;
        for _ in 0..n {
            x += u.v * th.cos() * EULER_STEP;
            y += u.v * th.sin() * EULER_STEP;
            th += u.omega * EULER_STEP;
        }
        worst_euler = worst_euler.max((x - full.x).hypot(y - full.y));
    }
    check(
        worst_comp < COMPOSITION_TOL && worst_euler < EULER_TOL,
        format!("composition max {worst_comp:.2e}, Euler max {worst_euler:.2e} m"),
    )
}

fn episode_artifacts(sc: &Scenario, kind: PlannerKind) -> (String, Vec<String>) {
    let mut svgs = Vec::new();
    let result = run_episode_observed(sc, kind, |view| {
        if view.cycle % SNAPSHOT_EVERY == 0 {
            svgs.push(render_snapshot(&Snapshot::capture(view), &sc.grid));
        }
    })
    .unwrap();
    (serde_json::to_string(&result).unwrap(), svgs)
}

fn determinism() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in PlannerKind::ALL {
        let sc = replica::corridor_crowd(11);
        let (json_a, svg_a) = episode_artifacts(&sc, kind);
        let (json_b, svg_b) = episode_artifacts(&sc, kind);
        let same = json_a == json_b && svg_a == svg_b;
        ok &= same;
        parts.push(format!(
            "{kind}: {} bytes, {} svgs identical {same}",
            json_a.len(),
            svg_a.len()
        ));
    }
    check(ok, parts.join("; "))
}

fn fuzz_grid() -> OccupancyGrid {
    let mut g = OccupancyGrid::free(100, 100, 0.2).unwrap();
    for row in 20..80 {
        for col in 48..52 {
            g.set(col, row, 1.0);
        }
    }
    g
}

fn tree_audits() -> Outcome {
    let grid = fuzz_grid();
    let p = PlannerParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let bounds = grid.bounds();
    let walker = |x0: f64| {
        let traj = (0..400)
            .map(|k| TrajectorySample {
                t: k as f64 * 0.5,
                pos: Point::new(x0 + (k as f64 * 0.05).sin() * 5.0, 2.0 + k as f64 * 0.04),
            })
            .collect();
        MovingObstacle::new(x0 as u32, 0.3, traj).unwrap()
    };
    let crowd = vec![walker(5.0), walker(14.0)];

    let mut tree = TimedTree::new(RobotState::at_rest(3.0, 3.0, 0.5, 0.0), p.dt, p.horizon);
    let mut forest = SubTreeForest::new();
    let mut peak = (0, 0, 0);
    for op in 0..FUZZ_OPS {
        let t = tree.root().state.t;
        let preds = predict_obstacles(&crowd, t, &p);
        let world = WorldView::new(&grid, &preds, 0.3);
        let kind = rng.random_range(0..16);
        match kind {
            0..=4 => {
                let x = uniform_sample(&bounds, &mut rng);
                let _ = extend(&mut tree, x, &world, Point::new(17.0, 17.0), &p);
            }
            5 => {
                let children = tree.root().children().to_vec();
                if let Some(&c) = children.get(rng.random_range(0..children.len().max(1))) {
                    tree.prune_unreachable(c).map_err(|e| format!("op {op}: {e}"))?;
                }
            }
            6 => {
                tree.refresh_risks(&world, &p);
            }
            7 => {
                if rng.random_bool(0.05) {
                    let s = RobotState::at_rest(rng.random_range(1.0..9.0), rng.random_range(1.0..19.0), 0.0, t);
                    tree.reset(s);
                }
            }
            8 | 9 => {
                forest.random_generate(uniform_sample(&bounds, &mut rng));
            }
            10 => {
                if forest.goal_tree().is_none() {
                    forest.add_goal_tree(Point::new(17.0, 17.0));
                }
            }
            11..=13 => {
                let ids: Vec<SubTreeId> = forest.iter().map(|s| s.id()).collect();
                if let Some(&id) = ids.get(rng.random_range(0..ids.len().max(1))) {
                    let x = uniform_sample(&bounds, &mut rng);
                    let near = forest.get(id).unwrap().nearest(x).unwrap().0;
                    let from = forest.node(near).unwrap().pos;
                    let d = from.distance(&x);
                    let x = if d > p.lambda { from.lerp(&x, p.lambda / d) } else { x };
                    forest.grow_subtree(id, x, &grid, 0.3);
                }
            }
            14 => {
                let ids: Vec<SubTreeId> = forest.iter().map(|s| s.id()).collect();
                if ids.len() >= 2 {
                    let a = ids[rng.random_range(0..ids.len())];
                    let b = ids[rng.random_range(0..ids.len())];
                    if a != b {
                        let (keep, absorb) = (a.min(b), a.max(b));
                        let pick = |id: SubTreeId, rng: &mut ChaCha8Rng| -> ForestNodeId {
                            let nodes = forest.get(id).unwrap().nodes();
                            nodes[rng.random_range(0..nodes.len())].id
                        };
                        let kn = pick(keep, &mut rng);
                        let an = pick(absorb, &mut rng);
                        forest
                            .merge_subtrees(keep, absorb, kn, an)
                            .map_err(|e| format!("op {op}: {e}"))?;
                    }
                }
            }
            _ => {
                let ids: Vec<SubTreeId> = forest.iter().map(|s| s.id()).collect();
                if let Some(&id) = ids.get(rng.random_range(0..ids.len().max(1))) {
                    forest.consume(id, rng.random_bool(0.5));
                }
            }
        }
        peak = (
            peak.0.max(tree.len()),
            peak.1.max(forest.len()),
            peak.2.max(forest.node_count()),
        );
        tree.audit().map_err(|e| format!("timed tree after op {op}: {e}"))?;
        forest.audit().map_err(|e| format!("forest after op {op}: {e}"))?;
        for node in tree.iter() {
            if let Some(parent) = node.parent {
                let pn = tree.get(parent).unwrap();
                let expect = 1.0 - (1.0 - pn.path_risk) * (1.0 - node.step_risk);
                if (node.path_risk - expect).abs() > 1e-12 || (node.state.t - pn.state.t - p.dt).abs() > 1e-9 {
                    return Err(format!("recurrence broken at node {} after op {op}", node.id.0));
                }
            }
        }
    }
    Ok(format!(
        "{FUZZ_OPS} ops, peak tree {} nodes, peak forest {} trees / {} nodes",
        peak.0, peak.1, peak.2
    ))
}

/// `ACCEPTANCE_ONLY=5,10` restricts the run to the listed criteria.
fn selected() -> Option<Vec<usize>> {
    let only = std::env::var("ACCEPTANCE_ONLY").ok()?;
    Some(only.split(',').filter_map(|t| t.trim().parse().ok()).collect())
}

fn main() -> ExitCode {
    let started = Instant::now();
    let only = selected();
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let corridor = (wanted(1) || wanted(3))
        .then(|| run_batch(&replica::corridor_static(0), &PlannerKind::ALL, SEEDS, SEED_BASE).expect("corridor batch"));
    let crowd = wanted(2).then(|| {
        run_batch(
            &replica::corridor_crowd(0),
            &[PlannerKind::BiRiskRrt, PlannerKind::MultiRiskRrt],
            SEEDS,
            SEED_BASE,
        )
        .expect("crowd batch")
    });

    let criteria: Vec<Criterion<'_>> = vec![
        (
            "ordering multi < bi < risk, static corridor",
            Box::new(|| ordering(corridor.as_ref().unwrap())),
        ),
        (
            "crowd robustness",
            Box::new(|| crowd_robustness(crowd.as_ref().unwrap())),
        ),
        (
            "trajectory-length parity",
            Box::new(|| length_parity(corridor.as_ref().unwrap())),
        ),
        ("goal-tree ablation direction", Box::new(goal_tree_ablation)),
        ("extend oracle equivalence", Box::new(extend_oracle)),
        ("risk-model properties", Box::new(risk_properties)),
        ("sampler contract", Box::new(sampler_contract)),
        ("kinematic exactness", Box::new(kinematic_exactness)),
        ("determinism", Box::new(determinism)),
        ("tree-audit invariants", Box::new(tree_audits)),
    ];
    let mut ran = 0;
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !wanted(n) {
            continue;
        }
        ran += 1;
        match run() {
            Ok(d) => println!("PASS criterion {n} {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {n} {name}: {d}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.0}s",
        ran - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

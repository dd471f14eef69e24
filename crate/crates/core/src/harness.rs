//! Batches of episodes, summary statistics, CSV reports and SVG snapshots.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::forest::SubTreeRow;
use crate::geom::Point;
use crate::planners::PlannerKind;
use crate::sim::{crowd_position, run_episode, CycleView, EpisodeResult, Scenario};
use crate::timed_tree::TreeRow;
use crate::world::OccupancyGrid;

/// Per-episode row of a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub planner: PlannerKind,
    pub seed: u64,
    pub success: bool,
    pub execution_time: f64,
    pub trajectory_length: f64,
    pub collided: bool,
    pub cycles: usize,
}

impl From<&EpisodeResult> for EpisodeRow {
    fn from(r: &EpisodeResult) -> Self {
        Self {
            planner: r.planner,
            seed: r.seed,
            success: r.success,
            execution_time: r.execution_time,
            trajectory_length: r.trajectory_length,
            collided: r.collided,
            cycles: r.cycles,
        }
    }
}

/// Aggregates for one planner. Means and deviations cover successful
/// episodes only and are `None` when there were none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub planner: PlannerKind,
    pub episodes: usize,
    pub successes: usize,
    /// Percentage in `[0, 100]`.
    pub success_rate: f64,
    pub exec_mean: Option<f64>,
    pub exec_std: Option<f64>,
    pub len_mean: Option<f64>,
    pub len_std: Option<f64>,
    /// Episodes (successful or not) whose executed motion touched an obstacle.
    pub collision_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub episodes: Vec<EpisodeRow>,
    pub summaries: Vec<KindSummary>,
}

impl BatchReport {
    pub fn summary(&self, kind: PlannerKind) -> Option<&KindSummary> {
        self.summaries.iter().find(|s| s.planner == kind)
    }
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

pub fn summarize(kind: PlannerKind, rows: &[EpisodeRow]) -> KindSummary {
    let mine: Vec<&EpisodeRow> = rows.iter().filter(|r| r.planner == kind).collect();
    let ok: Vec<&&EpisodeRow> = mine.iter().filter(|r| r.success).collect();
    let exec = mean_std(&ok.iter().map(|r| r.execution_time).collect::<Vec<_>>());
    let len = mean_std(&ok.iter().map(|r| r.trajectory_length).collect::<Vec<_>>());
    KindSummary {
        planner: kind,
        episodes: mine.len(),
        successes: ok.len(),
        success_rate: if mine.is_empty() {
            0.0
        } else {
            100.0 * ok.len() as f64 / mine.len() as f64
        },
        exec_mean: exec.map(|e| e.0),
        exec_std: exec.map(|e| e.1),
        len_mean: len.map(|l| l.0),
        len_std: len.map(|l| l.1),
        collision_count: mine.iter().filter(|r| r.collided).count(),
    }
}

/// Runs `repeats` episodes per planner with seeds `seed_base + i`, in
/// parallel. Rows come back sorted by planner, then seed.
pub fn run_batch(
    scenario: &Scenario,
    kinds: &[PlannerKind],
    repeats: usize,
    seed_base: u64,
) -> Result<BatchReport, ConfigError> {
    run_batch_with(scenario, kinds, repeats, seed_base, true)
}

pub fn run_batch_with(
    scenario: &Scenario,
    kinds: &[PlannerKind],
    repeats: usize,
    seed_base: u64,
    parallel: bool,
) -> Result<BatchReport, ConfigError> {
    if repeats == 0 {
        return Err(ConfigError::invalid("repeats", "must be at least 1"));
    }
    scenario.validate()?;
    let jobs: Vec<(PlannerKind, u64)> = kinds
        .iter()
        .flat_map(|&k| (0..repeats as u64).map(move |i| (k, seed_base + i)))
        .collect();
    let run = |&(kind, seed): &(PlannerKind, u64)| {
        let sc = Scenario {
            seed,
            ..scenario.clone()
        };
        run_episode(&sc, kind).map(|r| EpisodeRow::from(&r))
    };
    let mut episodes: Vec<EpisodeRow> = if parallel {
        jobs.par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_, _>>()?
    };
    episodes.sort_by_key(|r| (r.planner, r.seed));
    let mut distinct: Vec<PlannerKind> = Vec::new();
    for &k in kinds {
        if !distinct.contains(&k) {
            distinct.push(k);
        }
    }
    let summaries = distinct.iter().map(|&k| summarize(k, &episodes)).collect();
    Ok(BatchReport { episodes, summaries })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

pub const REPORT_HEADER: &str = "planner,episodes,success_rate,exec_mean,exec_std,len_mean,len_std,collision_count";
pub const EPISODE_HEADER: &str = "planner,seed,success,execution_time,trajectory_length,collided,cycles";

/// Summary CSV, one row per planner. Missing statistics are empty fields.
pub fn write_report(report: &BatchReport) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "{},{},{:.1},{},{},{},{},{}",
            s.planner,
            s.episodes,
            s.success_rate,
            opt(s.exec_mean),
            opt(s.exec_std),
            opt(s.len_mean),
            opt(s.len_std),
            s.collision_count
        );
    }
    out
}

/// Raw per-episode CSV.
pub fn write_episodes(report: &BatchReport) -> String {
    let mut out = String::from(EPISODE_HEADER);
    out.push('\n');
    for r in &report.episodes {
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{:.6},{},{}",
            r.planner, r.seed, r.success, r.execution_time, r.trajectory_length, r.collided, r.cycles
        );
    }
    out
}

/// Everything the renderer draws for one moment of an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub rooted: Vec<TreeRow>,
    pub forest: Vec<SubTreeRow>,
    /// Pedestrian centers and radii.
    pub crowd: Vec<(Point, f64)>,
    /// Positions along the chosen trajectory, starting at the robot.
    pub plan: Vec<Point>,
    /// Components of the active sampling heuristic, if any.
    pub heuristic: Vec<Point>,
    pub start: Point,
    pub goal: Point,
    pub robot: Point,
    pub robot_radius: f64,
}

impl Snapshot {
    pub fn capture(view: &CycleView<'_>) -> Self {
        let rooted = view.planner.rooted();
        let t = view.state.t;
        let mut plan = vec![view.state.position()];
        if let Some(traj) = &view.report.trajectory {
            plan.extend(traj.nodes.iter().filter_map(|id| rooted.get(*id)).map(|n| n.position()));
        }
        Snapshot {
            t,
            rooted: rooted.export(),
            forest: view.planner.forest().export(),
            crowd: view
                .scenario
                .crowd
                .iter()
                .map(|o| (crowd_position(o, t), o.radius()))
                .collect(),
            plan,
            heuristic: view
                .planner
                .active_heuristic()
                .map(|h| h.distribution.components().to_vec())
                .unwrap_or_default(),
            start: view.scenario.start.position(),
            goal: view.scenario.goal,
            robot: view.state.position(),
            robot_radius: view.scenario.robot_radius,
        }
    }
}

const PX_PER_M: f64 = 16.0;

/// Deterministic SVG rendering of a snapshot over its grid.
pub fn render_snapshot(snap: &Snapshot, grid: &OccupancyGrid) -> String {
    let w = grid.width_m();
    let h = grid.height_m();
    let res = grid.resolution();
    let fy = |y: f64| h - y;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {w:.3} {h:.3}">"#,
        w * PX_PER_M,
        h * PX_PER_M
    );
    s.push_str(
        "<style>.cell{fill:#222}.rooted{stroke:#c0392b;stroke-width:0.06}.subtree line{stroke-width:0.05}\
         .heuristic{fill:none;stroke:#f39c12;stroke-width:0.15}.plan{fill:none;stroke:#27ae60;stroke-width:0.12}\
         .pedestrian{fill:#e67e22}.start{fill:#e74c3c}.goal{fill:#2ecc71}.robot{fill:#2980b9}</style>\n",
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w:.3}" height="{h:.3}" fill="white"/>"#);

    s.push_str("<g class=\"grid\">\n");
    for row in 0..grid.height() {
        let mut col = 0;
        while col < grid.width() {
            if grid.get(col, row) < crate::world::OCCUPIED_THRESHOLD {
                col += 1;
                continue;
            }
            let begin = col;
            while col < grid.width() && grid.get(col, row) >= crate::world::OCCUPIED_THRESHOLD {
                col += 1;
            }
            let _ = writeln!(
                s,
                r#"<rect class="cell" x="{:.3}" y="{:.3}" width="{:.3}" height="{res:.3}"/>"#,
                begin as f64 * res,
                row as f64 * res,
                (col - begin) as f64 * res
            );
        }
    }
    s.push_str("</g>\n");

    let line = |s: &mut String, a: (f64, f64), b: (f64, f64)| {
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            a.0,
            fy(a.1),
            b.0,
            fy(b.1)
        );
    };

    s.push_str("<g class=\"rooted\">\n");
    let rooted: BTreeMap<u32, &TreeRow> = snap.rooted.iter().map(|r| (r.id, r)).collect();
    for r in &snap.rooted {
        if let Some(p) = r.parent.and_then(|p| rooted.get(&p)) {
            line(&mut s, (p.x, p.y), (r.x, r.y));
        }
    }
    s.push_str("</g>\n");

    let mut trees: BTreeMap<u32, Vec<&SubTreeRow>> = BTreeMap::new();
    for r in &snap.forest {
        trees.entry(r.subtree).or_default().push(r);
    }
    let by_id: BTreeMap<u32, &SubTreeRow> = snap.forest.iter().map(|r| (r.id, r)).collect();
    for (id, rows) in &trees {
        let hue = (id.wrapping_mul(47) % 360) as f64;
        let _ = writeln!(s, r#"<g class="subtree subtree-{id}" stroke="hsl({hue:.0},60%,45%)">"#);
        for r in rows {
            if let Some(p) = r.parent.and_then(|p| by_id.get(&p)) {
                line(&mut s, (p.x, p.y), (r.x, r.y));
            }
        }
        s.push_str("</g>\n");
    }

    let polyline = |s: &mut String, class: &str, pts: &[Point]| {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|p| format!("{:.3},{:.3}", p.x, fy(p.y))).collect();
        let _ = writeln!(s, r#"<polyline class="{class}" points="{}"/>"#, coords.join(" "));
    };
    polyline(&mut s, "heuristic", &snap.heuristic);
    polyline(&mut s, "plan", &snap.plan);

    let circle = |s: &mut String, class: &str, p: Point, r: f64| {
        let _ = writeln!(
            s,
            r#"<circle class="{class}" cx="{:.3}" cy="{:.3}" r="{r:.3}"/>"#,
            p.x,
            fy(p.y)
        );
    };
    for &(p, r) in &snap.crowd {
        circle(&mut s, "pedestrian", p, r);
    }
    circle(&mut s, "start", snap.start, 0.4);
    circle(&mut s, "goal", snap.goal, 0.4);
    circle(&mut s, "robot", snap.robot, snap.robot_radius);
    let _ = writeln!(s, r#"<text x="0.5" y="1.2" font-size="1">t = {:.1} s</text>"#, snap.t);
    s.push_str("</svg>\n");
    s
}

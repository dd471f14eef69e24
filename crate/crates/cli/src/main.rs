use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multirisk_core::harness::{render_snapshot, run_batch, write_episodes, write_report, Snapshot};
use multirisk_core::sim::{run_episode_observed, Scenario};
use multirisk_core::{replica, ConfigError, PlannerKind};

#[derive(Parser)]
#[command(name = "plan", version, about = "Risk-based RRT planners in simulated crowds")]
struct Cli {
    /// Planner parameter override, repeatable (e.g. --params h_r=0.5).
    #[arg(long = "params", value_name = "KEY=VALUE", global = true)]
    params: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and print its result as JSON.
    Run(RunArgs),
    /// Run a batch per planner and write the summary CSV.
    Bench(BenchArgs),
    /// Compare Multi-Risk-RRT with the goal tree updated versus retained.
    AblateGoalTree(AblateArgs),
    /// Write the built-in scenarios (toml, grid, crowd csv) into a directory.
    ExportReplicas {
        #[arg(long, default_value = "scenarios")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "multi")]
    planner: PlannerKind,
    /// Defaults to the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Render an SVG snapshot every k cycles (needs --out).
    #[arg(long, value_name = "K", requires = "out")]
    snapshot_every: Option<usize>,
    /// Directory for snapshots and the full per-cycle result.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include the per-cycle records in the printed JSON.
    #[arg(long)]
    per_cycle: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "risk,bi,multi")]
    planners: Vec<PlannerKind>,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Summary CSV; per-episode rows go next to it as `<stem>.episodes.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
}

enum Failure {
    Config(ConfigError),
    Io(PathBuf, std::io::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn load(path: &Path, overrides: &[String]) -> Result<Scenario, ConfigError> {
    let mut sc = Scenario::load(path)?;
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| ConfigError::MalformedOverride(o.clone()))?;
        sc.params.set(k.trim(), v.trim())?;
    }
    sc.validate()?;
    Ok(sc)
}

fn run(args: RunArgs, overrides: &[String]) -> Result<(), Failure> {
    let mut sc = load(&args.scenario, overrides)?;
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(dir.clone(), e))?;
    }
    let mut snapshots = Vec::new();
    let mut result = run_episode_observed(&sc, args.planner, |view| {
        if let Some(k) = args.snapshot_every {
            if k > 0 && view.cycle % k == 0 {
                snapshots.push((view.cycle, render_snapshot(&Snapshot::capture(view), &sc.grid)));
            }
        }
    })?;
    if let Some(dir) = &args.out {
        for (cycle, svg) in &snapshots {
            write(&dir.join(format!("cycle_{cycle:05}.svg")), svg)?;
        }
        write(
            &dir.join("episode.json"),
            &serde_json::to_string_pretty(&result).expect("serializable"),
        )?;
    }
    if !args.per_cycle {
        result.per_cycle.clear();
    }
    println!("{}", serde_json::to_string_pretty(&result).expect("serializable"));
    Ok(())
}

fn bench(args: BenchArgs, overrides: &[String]) -> Result<(), Failure> {
    let sc = load(&args.scenario, overrides)?;
    let report = run_batch(&sc, &args.planners, args.repeats, args.seed_base)?;
    let csv = write_report(&report);
    if let Some(out) = &args.out {
        write(out, &csv)?;
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        write(
            &out.with_file_name(format!("{stem}.episodes.csv")),
            &write_episodes(&report),
        )?;
    }
    print!("{csv}");
    Ok(())
}

fn ablate(args: AblateArgs, overrides: &[String]) -> Result<(), Failure> {
    let sc = load(&args.scenario, overrides)?;
    println!("retain_goal_tree,success_rate,exec_mean,exec_std,len_mean,len_std");
    for retain in [false, true] {
        let mut arm = sc.clone();
        arm.params.retain_goal_tree = retain;
        let report = run_batch(&arm, &[PlannerKind::MultiRiskRrt], args.repeats, args.seed_base)?;
        let s = &report.summaries[0];
        let f = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
        println!(
            "{retain},{:.1},{},{},{},{}",
            s.success_rate,
            f(s.exec_mean),
            f(s.exec_std),
            f(s.len_mean),
            f(s.len_std)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a, &cli.params),
        Command::Bench(a) => bench(a, &cli.params),
        Command::AblateGoalTree(a) => ablate(a, &cli.params),
        Command::ExportReplicas { out } => replica::write_files(&out).map_err(Failure::from).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Io(path, e)) => {
            eprintln!("error: cannot write {}: {e}", path.display());
            ExitCode::FAILURE
        }
    }
}

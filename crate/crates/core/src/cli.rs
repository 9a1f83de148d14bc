//! Command-line front end: fleet simulations, stand-alone solves of
//! exchange-format models, benchmark sweeps, and plant generation.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use agvroute::bench::{
    bench_residual, bench_tts, calibrate_reversal, default_size_targets,
    generated_calibration_problems, ladder_problems, load_problem_dir,
    nontrivial_calibration_problems, write_calibration_csv, write_residual_csv, write_tts_csv,
    BenchError, CalibrationConfig, ResidualBenchConfig, TtsBenchConfig,
};
use agvroute::model::{load_qubo, QuboModel};
use agvroute::network::{
    bundled_plant, bundled_plant_json, generate_plant, plant_from_json, PlantGraph,
};
use agvroute::sim::{run_simulation_with, SimConfig, SimError, SimSinks, TaskSource};
use agvroute::solvers::{
    default_temperatures, qubo_greedy, solve_exact, solve_fsa, solve_rsa, AnnealParams,
    AnnealSchedule, ExactOptions, Sample, SolverError, SolverKind, SolverResult, SolverStats,
};

/// Errors split by exit code: usage and input problems exit with 1,
/// failures during a run exit with 2.
pub enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn usage(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Runtime(e.into())
}

#[derive(Parser)]
#[command(
    name = "agvroute",
    version,
    about = "Dynamic route planning for AGV fleets on plant networks"
)]
pub struct Cli {
    /// Worker threads for annealing reads (default: one per CPU).
    /// Results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run a closed-loop fleet simulation on a plant.
    Simulate(SimulateArgs),
    /// Solve a model file written in the exchange format.
    Solve(SolveArgs),
    /// Benchmark solvers over ladders of generated instances.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Generate a rectangular grid plant and print or save its JSON.
    GenPlant(GenPlantArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Plant description JSON. Defaults to the bundled 8x14 grid with
    /// 20 stations.
    #[arg(long)]
    pub plant: Option<PathBuf>,

    /// JSON file with simulation settings; omitted fields keep their
    /// defaults and command-line flags override the file.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Directory for steps.ndjson, iterations.csv, metrics.json, and
    /// manifest.json. Without it only the metrics are printed.
    #[arg(long, short = 'o')]
    pub out_dir: Option<PathBuf>,

    /// Also write every planning period's model to <out-dir>/capture/.
    #[arg(long, requires = "out_dir")]
    pub capture: bool,

    #[arg(long, visible_alias = "agvs")]
    pub n_agvs: Option<usize>,

    /// Planning periods to execute.
    #[arg(long, visible_alias = "iters")]
    pub iterations: Option<usize>,

    /// Length of one planning period in seconds.
    #[arg(long)]
    pub period_s: Option<f64>,

    #[arg(long)]
    pub agv_speed_mps: Option<f64>,

    /// Base routes requested per AGV.
    #[arg(long)]
    pub k: Option<usize>,

    /// Maximum overlap ratio between kept base routes.
    #[arg(long)]
    pub theta: Option<f64>,

    /// Route selector: greedy, exact, fsa, or rsa.
    #[arg(long)]
    pub solver: Option<SolverKind>,

    /// Annealing restarts per planning period.
    #[arg(long)]
    pub reads: Option<usize>,

    /// Annealing sweeps per read.
    #[arg(long)]
    pub sweeps: Option<usize>,

    /// Reverse-annealing reheat fraction, strictly between 0 and 1.
    #[arg(long)]
    pub reversal_distance: Option<f64>,

    /// Sweeps spent holding the reheat temperature.
    #[arg(long)]
    pub pause_sweeps: Option<usize>,

    /// Node budget for the exact solver; unlimited when omitted.
    #[arg(long)]
    pub exact_node_budget: Option<u64>,

    /// Task list file ("source destination" node ids, one pair per
    /// line). Without it idle AGVs draw random tasks forever.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
}

#[derive(Args)]
pub struct SolveArgs {
    /// Model file in the exchange format.
    pub model: PathBuf,

    /// greedy, exact, fsa, or rsa. Annealers start from a random state
    /// (fsa) or the greedy descent state (rsa).
    #[arg(long, default_value = "exact")]
    pub solver: SolverKind,

    /// Start state for reverse annealing; only the greedy descent state
    /// is available.
    #[arg(long, default_value = "greedy", value_parser = ["greedy"])]
    pub init: String,

    /// Run every solver on the model and print a comparison table.
    #[arg(long, conflicts_with_all = ["solver", "out"])]
    pub all_solvers: bool,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, default_value_t = 32)]
    pub reads: usize,

    #[arg(long, default_value_t = 128)]
    pub sweeps: usize,

    /// Peak annealing temperature; derived from the model when omitted.
    #[arg(long)]
    pub t_max: Option<f64>,

    /// Final annealing temperature; derived from the model when omitted.
    #[arg(long)]
    pub t_min: Option<f64>,

    #[arg(long, default_value_t = 0.45)]
    pub reversal_distance: f64,

    #[arg(long, default_value_t = 16)]
    pub pause_sweeps: usize,

    /// Node budget for the exact solver; unlimited when omitted.
    #[arg(long)]
    pub node_budget: Option<u64>,

    /// Report file; stdout when omitted.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum BenchCommand {
    /// Time-to-solution of an annealer across problems.
    Tts(TtsArgs),
    /// Residual energy of greedy and the annealers across problems.
    Residual(ResidualArgs),
    /// Sweep the reversal distance and classify every read's outcome.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
pub struct TtsArgs {
    /// Directory of captured .qubo problems; a generated size ladder is
    /// used when omitted.
    #[arg(long)]
    pub problems: Option<PathBuf>,

    /// Comma-separated variable-count targets for generated problems.
    #[arg(long, value_delimiter = ',', conflicts_with = "problems")]
    pub sizes: Option<Vec<usize>>,

    /// Annealer to measure: fsa or rsa.
    #[arg(long, default_value = "rsa")]
    pub solver: SolverKind,

    /// Success probability the estimate is scaled to.
    #[arg(long, visible_alias = "p", default_value_t = 0.99)]
    pub target_p: f64,

    #[arg(long, default_value_t = 10_000)]
    pub reads: usize,

    #[arg(long, default_value_t = 64)]
    pub sweeps: usize,

    #[arg(long, default_value_t = 0.45)]
    pub reversal_distance: f64,

    #[arg(long, default_value_t = 8)]
    pub pause_sweeps: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Node budget for the exact reference solve.
    #[arg(long, default_value_t = 2_000_000)]
    pub exact_node_budget: u64,

    /// Directory for tts.csv and manifest.json; stdout when omitted.
    #[arg(long, short = 'o')]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct ResidualArgs {
    /// Directory of captured .qubo problems; a generated size ladder is
    /// used when omitted.
    #[arg(long)]
    pub problems: Option<PathBuf>,

    /// Comma-separated variable-count targets for generated problems.
    #[arg(long, value_delimiter = ',', conflicts_with = "problems")]
    pub sizes: Option<Vec<usize>>,

    /// Comma-separated solvers to report: greedy, fsa, rsa.
    #[arg(
        long,
        value_delimiter = ',',
        default_values_t = [
            SolverKind::Greedy,
            SolverKind::ForwardAnnealing,
            SolverKind::ReverseAnnealing,
        ]
    )]
    pub solvers: Vec<SolverKind>,

    #[arg(long, default_value_t = 1000)]
    pub reads: usize,

    #[arg(long, default_value_t = 64)]
    pub sweeps: usize,

    #[arg(long, default_value_t = 0.45)]
    pub reversal_distance: f64,

    #[arg(long, default_value_t = 8)]
    pub pause_sweeps: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Node budget for the exact reference solve.
    #[arg(long, default_value_t = 2_000_000)]
    pub exact_node_budget: u64,

    /// Directory for residual.csv and manifest.json; stdout when omitted.
    #[arg(long, short = 'o')]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Directory of captured .qubo problems to sweep; problems where
    /// greedy already hits the optimum are dropped. Congestion problems
    /// are generated when omitted.
    #[arg(long)]
    pub problems: Option<PathBuf>,

    /// Reversal distances: comma-separated values and/or
    /// start:end:step ranges, e.g. 0.1:0.9:0.05.
    #[arg(long)]
    pub r_grid: Option<String>,

    /// Problems to average the sweep over.
    #[arg(long, default_value_t = 10)]
    pub count: usize,

    /// AGVs in each generated congestion problem.
    #[arg(long, default_value_t = 9, conflicts_with = "problems")]
    pub fleet: usize,

    /// Seeds to scan when generating congestion problems.
    #[arg(long, default_value_t = 400, conflicts_with = "problems")]
    pub attempts: u64,

    #[arg(long, default_value_t = 1000)]
    pub reads: usize,

    #[arg(long, default_value_t = 64)]
    pub sweeps: usize,

    #[arg(long, default_value_t = 8)]
    pub pause_sweeps: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Node budget for the exact reference solves on captured problems.
    #[arg(long, default_value_t = 2_000_000)]
    pub exact_node_budget: u64,

    /// Directory for calibration.csv and manifest.json; stdout when
    /// omitted.
    #[arg(long, short = 'o')]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct GenPlantArgs {
    #[arg(long)]
    pub rows: usize,

    #[arg(long)]
    pub cols: usize,

    /// Picks which perimeter phase carries the stations.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Output file; stdout when omitted.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| runtime(anyhow!("failed to size the thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate(args) => run_simulate(args, cli.threads),
        Command::Solve(args) => run_solve(args),
        Command::Bench(BenchCommand::Tts(args)) => run_bench_tts(args, cli.threads),
        Command::Bench(BenchCommand::Residual(args)) => run_bench_residual(args, cli.threads),
        Command::Bench(BenchCommand::Calibrate(args)) => run_bench_calibrate(args, cli.threads),
        Command::GenPlant(args) => run_gen_plant(args),
    }
}

#[derive(Serialize)]
struct PlantInfo {
    path: String,
    sha256: String,
}

/// Written next to every output set so a run can be reproduced from its
/// directory alone.
#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    version: &'static str,
    command: &'a str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    plant: Option<PlantInfo>,
    config: &'a C,
}

fn sha256_hex(bytes: &[u8]) -> String {
    use std::fmt::Write as _;
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)? + "\n";
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::Runtime)
}

/// Writes to stdout. A closed pipe (`agvroute ... | head`) means the
/// reader has everything it wants, so the process exits 0 instead of
/// failing.
fn stdout_text(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    let done = out.write_all(text.as_bytes()).and_then(|()| out.flush());
    match done {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => Err(runtime(anyhow!("writing to stdout: {e}"))),
    }
}

fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    seed: u64,
    threads: Option<usize>,
    plant: Option<PlantInfo>,
    config: &C,
) -> Result<(), CliError> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        threads,
        plant,
        config,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn sim_err(e: SimError) -> CliError {
    match &e {
        SimError::BadConfig(_)
        | SimError::NotEnoughStations { .. }
        | SimError::BadTaskFile { .. }
        | SimError::Read { .. }
        | SimError::Candidates(_) => usage(e),
        _ => runtime(e),
    }
}

fn bench_err(e: BenchError) -> CliError {
    match &e {
        BenchError::BadProbability(_) | BenchError::BadTarget(_) | BenchError::BadTime(_) => {
            usage(e)
        }
        BenchError::Solver(SolverError::BadParameters(_)) => usage(e),
        _ => runtime(e),
    }
}

fn solver_err(e: SolverError) -> CliError {
    match &e {
        SolverError::BadParameters(_)
        | SolverError::NoGroups
        | SolverError::EmptyGroup { .. }
        | SolverError::GroupsNotPartition { .. } => usage(e),
        _ => runtime(e),
    }
}

fn load_graph(path: Option<&Path>) -> Result<(PlantGraph, PlantInfo), CliError> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading plant {}", p.display()))
                .map_err(CliError::Usage)?;
            let g = plant_from_json(&text).map_err(usage)?;
            let info = PlantInfo {
                path: p.display().to_string(),
                sha256: sha256_hex(text.as_bytes()),
            };
            Ok((g, info))
        }
        None => {
            let info = PlantInfo {
                path: "<bundled 8x14 grid>".to_string(),
                sha256: sha256_hex(bundled_plant_json().as_bytes()),
            };
            Ok((bundled_plant(), info))
        }
    }
}

fn run_simulate(args: SimulateArgs, threads: Option<usize>) -> Result<(), CliError> {
    let (graph, plant_info) = load_graph(args.plant.as_deref())?;

    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))
                .map_err(CliError::Usage)?;
            serde_json::from_str::<SimConfig>(&text)
                .with_context(|| format!("parsing config {}", p.display()))
                .map_err(CliError::Usage)?
        }
        None => SimConfig::default(),
    };
    if let Some(v) = args.n_agvs {
        cfg.n_agvs = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.period_s {
        cfg.period_s = v;
    }
    if let Some(v) = args.agv_speed_mps {
        cfg.agv_speed_mps = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.theta {
        cfg.theta = v;
    }
    if let Some(v) = args.solver {
        cfg.solver = v;
    }
    if let Some(v) = args.reads {
        cfg.reads = v;
    }
    if let Some(v) = args.sweeps {
        cfg.sweeps = v;
    }
    if let Some(v) = args.reversal_distance {
        cfg.reversal_distance = v;
    }
    if let Some(v) = args.pause_sweeps {
        cfg.pause_sweeps = v;
    }
    if let Some(v) = args.exact_node_budget {
        cfg.exact_node_budget = Some(v);
    }
    if let Some(p) = &args.tasks {
        cfg.tasks = TaskSource::File(p.clone());
    }

    match &args.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)
                .with_context(|| format!("creating {}", dir.display()))
                .map_err(CliError::Runtime)?;
            let capture_dir = args.capture.then(|| dir.join("capture"));
            if let Some(d) = &capture_dir {
                fs::create_dir_all(d)
                    .with_context(|| format!("creating {}", d.display()))
                    .map_err(CliError::Runtime)?;
            }
            let mut step_w =
                BufWriter::new(File::create(dir.join("steps.ndjson")).map_err(runtime)?);
            let mut iter_w =
                BufWriter::new(File::create(dir.join("iterations.csv")).map_err(runtime)?);
            let metrics = {
                let mut sinks = SimSinks {
                    step_log: Some(&mut step_w),
                    iteration_csv: Some(&mut iter_w),
                    capture_dir: capture_dir.as_deref(),
                };
                run_simulation_with(&graph, &cfg, args.seed, &mut sinks).map_err(sim_err)?
            };
            step_w.flush().map_err(runtime)?;
            iter_w.flush().map_err(runtime)?;
            write_json(&dir.join("metrics.json"), &metrics)?;
            write_manifest(dir, "simulate", args.seed, threads, Some(plant_info), &cfg)?;
            stdout_text(&format!(
                "completed {} tasks in {} iterations; working rate {:.2}%; outputs in {}\n",
                metrics.completed_tasks,
                metrics.iterations,
                metrics.working_rate,
                dir.display()
            ))?;
        }
        None => {
            let metrics = run_simulation_with(&graph, &cfg, args.seed, &mut SimSinks::default())
                .map_err(sim_err)?;
            let text = serde_json::to_string_pretty(&metrics).map_err(runtime)?;
            stdout_text(&format!("{text}\n"))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveReport {
    solver: String,
    n_vars: usize,
    energy: f64,
    energy_quarter_units: i64,
    proven_optimal: bool,
    /// Whether every variable group has exactly one set bit; absent for
    /// models without group lines.
    #[serde(skip_serializing_if = "Option::is_none")]
    one_hot_groups: Option<bool>,
    reads: usize,
    sweeps: usize,
    branch_nodes: u64,
    bits: String,
}

fn run_solve(args: SolveArgs) -> Result<(), CliError> {
    let m = load_qubo(&args.model).map_err(usage)?;
    let (t_max_default, t_min_default) = default_temperatures(&m);
    let t_max = args.t_max.unwrap_or(t_max_default);
    let t_min = args.t_min.unwrap_or(t_min_default);
    let params = AnnealParams {
        reads: args.reads,
        seed: args.seed,
    };

    if args.all_solvers {
        let greedy_x = qubo_greedy(&m).map_err(solver_err)?;
        let greedy_e = m.energy(&greedy_x).map_err(runtime)?;
        let opts = ExactOptions {
            node_budget: args.node_budget,
        };
        let exact = solve_exact(&m, Some(&greedy_x), &opts).map_err(solver_err)?;
        let fwd = AnnealSchedule::forward(t_max, t_min, args.sweeps).map_err(solver_err)?;
        let fsa = solve_fsa(&m, &fwd, &params).map_err(solver_err)?;
        let rev = AnnealSchedule::reverse(
            t_max,
            t_min,
            args.sweeps,
            args.reversal_distance,
            args.pause_sweeps,
        )
        .map_err(solver_err)?;
        let rsa = solve_rsa(&m, &greedy_x, &rev, &params).map_err(solver_err)?;
        let mut text = format!(
            "{:<8}{:>18}{:>8}{:>8}\n",
            "solver", "energy", "proven", "reads"
        );
        let table = [
            ("greedy", greedy_e, false, 1usize),
            ("exact", exact.best_energy, exact.proven_optimal, 1),
            ("fsa", fsa.best_energy, false, args.reads),
            ("rsa", rsa.best_energy, false, args.reads),
        ];
        for (name, energy, proven, reads) in table {
            text.push_str(&format!(
                "{:<8}{:>18}{:>8}{:>8}\n",
                name,
                energy.to_string(),
                if proven { "yes" } else { "no" },
                reads
            ));
        }
        stdout_text(&text)?;
        return Ok(());
    }

    let result = match args.solver {
        SolverKind::Greedy => {
            let x = qubo_greedy(&m).map_err(solver_err)?;
            let e = m.energy(&x).map_err(runtime)?;
            SolverResult {
                solver: SolverKind::Greedy,
                best: x.clone(),
                best_energy: e,
                proven_optimal: false,
                samples: vec![Sample {
                    assignment: x,
                    energy: e,
                }],
                stats: SolverStats::default(),
            }
        }
        SolverKind::Exact => {
            let opts = ExactOptions {
                node_budget: args.node_budget,
            };
            solve_exact(&m, None, &opts).map_err(solver_err)?
        }
        SolverKind::ForwardAnnealing => {
            let schedule =
                AnnealSchedule::forward(t_max, t_min, args.sweeps).map_err(solver_err)?;
            solve_fsa(&m, &schedule, &params).map_err(solver_err)?
        }
        SolverKind::ReverseAnnealing => {
            let init = qubo_greedy(&m).map_err(solver_err)?;
            let schedule = AnnealSchedule::reverse(
                t_max,
                t_min,
                args.sweeps,
                args.reversal_distance,
                args.pause_sweeps,
            )
            .map_err(solver_err)?;
            solve_rsa(&m, &init, &schedule, &params).map_err(solver_err)?
        }
    };

    let one_hot_groups = if m.groups().is_empty() {
        None
    } else {
        Some(m.groups().iter().all(|group| {
            group
                .iter()
                .filter(|&&v| result.best.get(v as usize))
                .count()
                == 1
        }))
    };
    let report = SolveReport {
        solver: result.solver.to_string(),
        n_vars: m.n_vars(),
        energy: result.best_energy.to_f64(),
        energy_quarter_units: result.best_energy.quarter_units(),
        proven_optimal: result.proven_optimal,
        one_hot_groups,
        reads: result.stats.reads,
        sweeps: result.stats.sweeps,
        branch_nodes: result.stats.branch_nodes,
        bits: result
            .best
            .bits()
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect(),
    };
    match &args.out {
        Some(p) => {
            write_json(p, &report)?;
            stdout_text(&format!("wrote {}\n", p.display()))?;
        }
        None => {
            let text = serde_json::to_string_pretty(&report).map_err(runtime)?;
            stdout_text(&format!("{text}\n"))?;
        }
    }
    Ok(())
}

/// Writes a benchmark CSV to `<out_dir>/<file_name>` plus a manifest, or
/// to stdout when no directory was given.
fn emit_csv<C: Serialize>(
    out_dir: Option<&Path>,
    file_name: &str,
    command: &str,
    seed: u64,
    threads: Option<usize>,
    config: &C,
    write_rows: impl FnOnce(&mut dyn Write) -> Result<(), BenchError>,
) -> Result<(), CliError> {
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)
                .with_context(|| format!("creating {}", dir.display()))
                .map_err(CliError::Runtime)?;
            let path = dir.join(file_name);
            let mut w = BufWriter::new(File::create(&path).map_err(runtime)?);
            write_rows(&mut w).map_err(bench_err)?;
            w.flush().map_err(runtime)?;
            write_manifest(dir, command, seed, threads, None, config)?;
            stdout_text(&format!("wrote {}\n", path.display()))?;
        }
        None => {
            let mut rows = Vec::new();
            write_rows(&mut rows).map_err(bench_err)?;
            let text = String::from_utf8(rows).map_err(runtime)?;
            stdout_text(&text)?;
        }
    }
    Ok(())
}

/// Where a benchmark's problems came from, for the manifest.
#[derive(Serialize)]
struct SourceInfo {
    #[serde(skip_serializing_if = "Option::is_none")]
    problems_dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fleet: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    problem_count: Option<usize>,
}

impl SourceInfo {
    fn none() -> SourceInfo {
        SourceInfo {
            problems_dir: None,
            sizes: None,
            fleet: None,
            problem_count: None,
        }
    }
}

#[derive(Serialize)]
struct BenchRunConfig<'a, C: Serialize> {
    #[serde(flatten)]
    source: &'a SourceInfo,
    #[serde(flatten)]
    cfg: &'a C,
}

/// Problems for a benchmark: a captured directory when given, a
/// generated size ladder otherwise.
fn load_or_generate(
    problems: Option<&Path>,
    sizes: Option<Vec<usize>>,
    seed: u64,
) -> Result<(Vec<QuboModel>, SourceInfo), CliError> {
    match problems {
        Some(dir) => {
            let models = load_problem_dir(dir).map_err(|e| usage(anyhow!(e)))?;
            if models.is_empty() {
                return Err(usage(anyhow!("no .qubo files in {}", dir.display())));
            }
            let n = models.len();
            Ok((
                models,
                SourceInfo {
                    problems_dir: Some(dir.display().to_string()),
                    problem_count: Some(n),
                    ..SourceInfo::none()
                },
            ))
        }
        None => {
            let sizes = sizes.unwrap_or_else(default_size_targets);
            let models = ladder_problems(&sizes, seed).map_err(bench_err)?;
            Ok((
                models,
                SourceInfo {
                    sizes: Some(sizes),
                    ..SourceInfo::none()
                },
            ))
        }
    }
}

fn run_bench_tts(args: TtsArgs, threads: Option<usize>) -> Result<(), CliError> {
    let cfg = TtsBenchConfig {
        solver: args.solver,
        target_p: args.target_p,
        reads: args.reads,
        sweeps: args.sweeps,
        reversal_distance: args.reversal_distance,
        pause_sweeps: args.pause_sweeps,
        seed: args.seed,
        exact_node_budget: Some(args.exact_node_budget),
    };
    let (problems, source) = load_or_generate(args.problems.as_deref(), args.sizes, args.seed)?;
    let rows = bench_tts(&problems, &cfg).map_err(bench_err)?;
    emit_csv(
        args.out_dir.as_deref(),
        "tts.csv",
        "bench tts",
        cfg.seed,
        threads,
        &BenchRunConfig {
            source: &source,
            cfg: &cfg,
        },
        |w| write_tts_csv(&rows, w),
    )
}

fn run_bench_residual(args: ResidualArgs, threads: Option<usize>) -> Result<(), CliError> {
    let cfg = ResidualBenchConfig {
        solvers: args.solvers,
        reads: args.reads,
        sweeps: args.sweeps,
        reversal_distance: args.reversal_distance,
        pause_sweeps: args.pause_sweeps,
        seed: args.seed,
        exact_node_budget: Some(args.exact_node_budget),
    };
    let (problems, source) = load_or_generate(args.problems.as_deref(), args.sizes, args.seed)?;
    let rows = bench_residual(&problems, &cfg).map_err(bench_err)?;
    emit_csv(
        args.out_dir.as_deref(),
        "residual.csv",
        "bench residual",
        cfg.seed,
        threads,
        &BenchRunConfig {
            source: &source,
            cfg: &cfg,
        },
        |w| write_residual_csv(&rows, w),
    )
}

/// Accepts comma-separated pieces where each piece is a single number or
/// an inclusive start:end:step range.
fn parse_r_grid(text: &str) -> Result<Vec<f64>, anyhow::Error> {
    let mut out = Vec::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        let parts: Vec<&str> = piece.split(':').collect();
        match parts.as_slice() {
            [v] => {
                out.push(
                    v.parse::<f64>()
                        .map_err(|_| anyhow!("bad reversal distance `{v}`"))?,
                );
            }
            [a, b, c] => {
                let start: f64 = a.parse().map_err(|_| anyhow!("bad range start `{a}`"))?;
                let end: f64 = b.parse().map_err(|_| anyhow!("bad range end `{b}`"))?;
                let step: f64 = c.parse().map_err(|_| anyhow!("bad range step `{c}`"))?;
                if !step.is_finite() || step <= 0.0 {
                    return Err(anyhow!("range step must be positive in `{piece}`"));
                }
                if end < start {
                    return Err(anyhow!("range end below start in `{piece}`"));
                }
                let n = ((end - start) / step + 1e-9).floor() as usize;
                for k in 0..=n {
                    let v = start + step * k as f64;
                    // Snap accumulated float error so grid points print
                    // cleanly (0.15, not 0.15000000000000002).
                    out.push((v * 1e9).round() / 1e9);
                }
            }
            _ => return Err(anyhow!("`{piece}` must be a number or start:end:step")),
        }
    }
    if out.is_empty() {
        return Err(anyhow!("the reversal-distance grid is empty"));
    }
    Ok(out)
}

fn run_bench_calibrate(args: CalibrateArgs, threads: Option<usize>) -> Result<(), CliError> {
    let mut cfg = CalibrationConfig::default();
    if let Some(text) = &args.r_grid {
        cfg.r_grid = parse_r_grid(text).map_err(usage)?;
    }
    cfg.reads = args.reads;
    cfg.sweeps = args.sweeps;
    cfg.pause_sweeps = args.pause_sweeps;
    cfg.seed = args.seed;
    let (problems, source) = match &args.problems {
        Some(dir) => {
            let models = load_problem_dir(dir).map_err(|e| usage(anyhow!(e)))?;
            let total = models.len();
            let mut ps = nontrivial_calibration_problems(models, Some(args.exact_node_budget))
                .map_err(bench_err)?;
            if ps.is_empty() {
                return Err(usage(anyhow!(
                    "none of the {total} problems in {} leave room between the greedy \
                     start and the optimum",
                    dir.display()
                )));
            }
            ps.truncate(args.count);
            let n = ps.len();
            (
                ps,
                SourceInfo {
                    problems_dir: Some(dir.display().to_string()),
                    problem_count: Some(n),
                    ..SourceInfo::none()
                },
            )
        }
        None => {
            let ps =
                generated_calibration_problems(args.seed, args.attempts, args.fleet, args.count)
                    .map_err(bench_err)?;
            let n = ps.len();
            (
                ps,
                SourceInfo {
                    fleet: Some(args.fleet),
                    problem_count: Some(n),
                    ..SourceInfo::none()
                },
            )
        }
    };
    let rows = calibrate_reversal(&problems, &cfg).map_err(bench_err)?;
    emit_csv(
        args.out_dir.as_deref(),
        "calibration.csv",
        "bench calibrate",
        cfg.seed,
        threads,
        &BenchRunConfig {
            source: &source,
            cfg: &cfg,
        },
        |w| write_calibration_csv(&rows, w),
    )
}

fn run_gen_plant(args: GenPlantArgs) -> Result<(), CliError> {
    let g = generate_plant(args.rows, args.cols, args.seed).map_err(usage)?;
    let counts = format!(
        "{} nodes, {} edges, {} stations",
        g.n_nodes(),
        g.n_edges(),
        g.stations().len()
    );
    let mut text = agvroute::network::plant_to_json(&g);
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &args.out {
        Some(p) => {
            fs::write(p, text)
                .with_context(|| format!("writing {}", p.display()))
                .map_err(CliError::Runtime)?;
            stdout_text(&format!("wrote {} ({counts})\n", p.display()))?;
        }
        None => {
            // Counts go to stderr so stdout stays parseable JSON.
            stdout_text(&text)?;
            eprintln!("{counts}");
        }
    }
    Ok(())
}

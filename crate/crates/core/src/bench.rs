//! Evaluation pipelines: time-to-solution, residual energy, and
//! reversal-distance calibration, plus deterministic problem generators
//! sized by variable count.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::candidates::{AgvState, CandidateError, CandidateParams, PlanningHorizon, Task};
use crate::model::{
    build_instance, build_qubo, default_penalties, load_qubo, Assignment, Energy, ModelError,
    QuboModel, RoutingInstance,
};
use crate::network::{generate_plant, PlantError, PlantGraph};
use crate::rng::stream_seed;
use crate::solvers::{
    classify_samples, default_temperatures, qubo_greedy, solve_exact, solve_fsa, solve_greedy,
    solve_rsa, AnnealParams, AnnealSchedule, ExactOptions, Sample, SampleClasses, SolverError,
    SolverKind, SolverResult,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("success probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("target probability must lie strictly between 0 and 1, got {0}")]
    BadTarget(f64),
    #[error("per-read time must be positive and finite, got {0}")]
    BadTime(f64),
    #[error("no instance where greedy misses the optimum found in {attempts} attempts")]
    NoNontrivialInstance { attempts: u64 },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Candidates(#[from] CandidateError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("failed to write output: {0}")]
    Io(#[from] std::io::Error),
}

/// Expected time to reach the target success probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TtsValue {
    Seconds(f64),
    /// The per-read success probability was zero.
    Unattainable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtsEstimate {
    pub value: TtsValue,
    /// One read already meets the target, so the estimate was clamped to
    /// a single read's time.
    pub clamped: bool,
}

/// Expected wall time until the target probability of having seen the
/// ground state is reached, given the per-read success probability and the
/// wall time of one read: `t_read * ln(1 - target) / ln(1 - p_success)`.
pub fn time_to_solution(
    target_p: f64,
    p_success: f64,
    t_read_s: f64,
) -> Result<TtsEstimate, BenchError> {
    if !(target_p > 0.0 && target_p < 1.0) {
        return Err(BenchError::BadTarget(target_p));
    }
    if !(0.0..=1.0).contains(&p_success) || p_success.is_nan() {
        return Err(BenchError::BadProbability(p_success));
    }
    if !(t_read_s > 0.0 && t_read_s.is_finite()) {
        return Err(BenchError::BadTime(t_read_s));
    }
    if p_success == 0.0 {
        return Ok(TtsEstimate {
            value: TtsValue::Unattainable,
            clamped: false,
        });
    }
    if p_success >= target_p {
        return Ok(TtsEstimate {
            value: TtsValue::Seconds(t_read_s),
            clamped: true,
        });
    }
    let repeats = (1.0 - target_p).ln() / (1.0 - p_success).ln();
    Ok(TtsEstimate {
        value: TtsValue::Seconds(t_read_s * repeats),
        clamped: false,
    })
}

/// Mean of the per-read best energies.
pub fn mean_energy(samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    samples.iter().map(|s| s.energy.to_f64()).sum::<f64>() / samples.len() as f64
}

/// Relative residual `(mean - e_min) / e_min`. When the reference energy
/// is not positive the relative form is meaningless, so the absolute
/// difference is returned instead, flagged by the second value.
pub fn residual_energy(mean_e: f64, e_min: f64) -> (f64, bool) {
    if e_min > 0.0 {
        ((mean_e - e_min) / e_min, false)
    } else {
        (mean_e - e_min, true)
    }
}

/// AGVs parked on consecutive stations with scattered goals. The stride
/// mixes directions so routes cross asymmetrically, which is what makes
/// rule-based selection miss the optimum once the plant gets crowded.
fn scattered_states(g: &PlantGraph, n_agvs: usize) -> Vec<AgvState> {
    let stations = g.stations();
    let len = stations.len();
    (0..n_agvs)
        .map(|i| {
            let mut d = (i * 5 + 3) % len;
            if d == i {
                d = (d + 1) % len;
            }
            AgvState {
                id: i,
                current_node: stations[i],
                task: Task {
                    source: stations[i],
                    destination: stations[d],
                },
            }
        })
        .collect()
}

/// Builds a routing instance with at least `target_vars` variables (or as
/// many as the plant supports) by growing the fleet on a generated plant.
pub fn sized_instance(seed: u64, target_vars: usize) -> Result<Arc<RoutingInstance>, BenchError> {
    let g = generate_plant(6, 9, seed)?;
    let h = PlanningHorizon::for_plant(&g, 8.0, 0.5)?;
    let params = CandidateParams::default();
    let max_agvs = g.stations().len();
    let mut best = None;
    for n_agvs in 2..=max_agvs {
        let inst = build_instance(&g, &scattered_states(&g, n_agvs), &h, &params)?;
        let enough = inst.n_vars() >= target_vars;
        best = Some(inst);
        if enough {
            break;
        }
    }
    Ok(Arc::new(best.expect("at least one fleet size tried")))
}

/// An instance with its model, the greedy result, and the exact result.
pub type NontrivialProblem = (Arc<RoutingInstance>, QuboModel, SolverResult, SolverResult);

/// One seed's congestion problem, or None when the rule-based selection
/// already matches the proven optimum there.
fn nontrivial_at(seed: u64, n_agvs: usize) -> Result<Option<NontrivialProblem>, BenchError> {
    let g = generate_plant(4, 7, seed)?;
    let fleet = n_agvs.min(g.stations().len());
    let h = PlanningHorizon::for_plant(&g, 8.0, 0.5)?;
    let inst = Arc::new(build_instance(
        &g,
        &scattered_states(&g, fleet),
        &h,
        &CandidateParams::default(),
    )?);
    let greedy = solve_greedy(&inst);
    let m = build_qubo(&inst, default_penalties(&inst))?;
    let exact = solve_exact(&m, Some(&greedy.best), &ExactOptions::default())?;
    if exact.best_energy < greedy.best_energy {
        Ok(Some((inst, m, greedy, exact)))
    } else {
        Ok(None)
    }
}

/// A problem where the greedy selection is strictly worse than the proven
/// optimum, found by scanning seeds on a crowded plant. Returns the
/// instance, its model, the greedy result, and the exact result.
pub fn nontrivial_instance(
    seed_start: u64,
    attempts: u64,
    n_agvs: usize,
) -> Result<NontrivialProblem, BenchError> {
    for offset in 0..attempts {
        if let Some(found) = nontrivial_at(seed_start + offset, n_agvs)? {
            return Ok(found);
        }
    }
    Err(BenchError::NoNontrivialInstance { attempts })
}

pub fn default_size_targets() -> Vec<usize> {
    vec![20, 28, 37, 46, 55, 64, 73, 82, 91, 100]
}

/// Generated stand-ins for benchmarks run without captured problems: one
/// model per target variable count.
pub fn ladder_problems(targets: &[usize], seed: u64) -> Result<Vec<QuboModel>, BenchError> {
    targets
        .iter()
        .enumerate()
        .map(|(i, &target)| {
            let inst = sized_instance(stream_seed(seed, "ladder", i as u64), target)?;
            Ok(build_qubo(&inst, default_penalties(&inst))?)
        })
        .collect()
}

/// Loads every `.qubo` file in a directory, sorted by file name.
pub fn load_problem_dir(dir: impl AsRef<Path>) -> Result<Vec<QuboModel>, BenchError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.extension().is_some_and(|e| e == "qubo"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Ok(load_qubo(p)?)).collect()
}

/// Greedy start state and exact reference for one benchmark problem.
struct Reference {
    greedy: Assignment,
    greedy_energy: Energy,
    ground: Energy,
    proven: bool,
}

/// The greedy state here is the per-group descent pick, which works on
/// any model with group lines — captured problems carry no plant data.
fn solve_reference(m: &QuboModel, node_budget: Option<u64>) -> Result<Reference, BenchError> {
    let greedy = qubo_greedy(m)?;
    let greedy_energy = m.energy(&greedy)?;
    let exact = solve_exact(m, Some(&greedy), &ExactOptions { node_budget })?;
    Ok(Reference {
        greedy,
        greedy_energy,
        ground: exact.best_energy,
        proven: exact.proven_optimal,
    })
}

/// Settings for the time-to-solution benchmark.
#[derive(Debug, Clone, Serialize)]
pub struct TtsBenchConfig {
    /// Annealer whose success probability is measured; reverse annealing
    /// starts from the greedy descent state.
    pub solver: SolverKind,
    pub target_p: f64,
    pub reads: usize,
    pub sweeps: usize,
    pub reversal_distance: f64,
    pub pause_sweeps: usize,
    pub seed: u64,
    /// Node budget for the exact reference solve.
    pub exact_node_budget: Option<u64>,
}

impl Default for TtsBenchConfig {
    fn default() -> Self {
        TtsBenchConfig {
            solver: SolverKind::ReverseAnnealing,
            target_p: 0.99,
            reads: 10_000,
            sweeps: 64,
            reversal_distance: 0.45,
            pause_sweeps: 8,
            seed: 1,
            exact_node_budget: Some(2_000_000),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtsRow {
    pub size: usize,
    pub p_s: f64,
    pub t_c_s: f64,
    pub tts_s: f64,
    pub flag: String,
}

/// Time-to-solution of an annealer on each problem: the expected wall
/// time until the proven optimum has been seen with probability
/// `target_p`. Rows keep the input order. Problems whose optimum could
/// not be proven within the node budget are flagged `no_ground`; rows
/// where no read found the optimum report infinity.
///
/// `t_c_s` is measured wall time per read and therefore machine- and
/// load-dependent; `p_s` is deterministic per seed.
pub fn bench_tts(problems: &[QuboModel], cfg: &TtsBenchConfig) -> Result<Vec<TtsRow>, BenchError> {
    if cfg.reads == 0 {
        return Err(SolverError::BadParameters("reads must be positive".into()).into());
    }
    let mut rows = Vec::with_capacity(problems.len());
    for (i, m) in problems.iter().enumerate() {
        let reference = solve_reference(m, cfg.exact_node_budget)?;
        let (t_max, t_min) = default_temperatures(m);
        let params = AnnealParams {
            reads: cfg.reads,
            seed: stream_seed(cfg.seed, "tts", i as u64),
        };
        let start = Instant::now();
        let result = match cfg.solver {
            SolverKind::ForwardAnnealing => {
                let schedule = AnnealSchedule::forward(t_max, t_min, cfg.sweeps)?;
                solve_fsa(m, &schedule, &params)?
            }
            SolverKind::ReverseAnnealing => {
                let schedule = AnnealSchedule::reverse(
                    t_max,
                    t_min,
                    cfg.sweeps,
                    cfg.reversal_distance,
                    cfg.pause_sweeps,
                )?;
                solve_rsa(m, &reference.greedy, &schedule, &params)?
            }
            other => {
                return Err(SolverError::BadParameters(format!(
                    "time-to-solution needs an annealing solver, got {other}"
                ))
                .into())
            }
        };
        let t_c_s = start.elapsed().as_secs_f64() / cfg.reads as f64;
        let hits = result
            .samples
            .iter()
            .filter(|s| s.energy == reference.ground)
            .count();
        let p_s = hits as f64 / cfg.reads as f64;
        let estimate = time_to_solution(cfg.target_p, p_s, t_c_s)?;
        let tts_s = match estimate.value {
            TtsValue::Seconds(s) => s,
            TtsValue::Unattainable => f64::INFINITY,
        };
        let flag = if !reference.proven {
            "no_ground"
        } else if estimate.clamped {
            "clamped"
        } else {
            ""
        };
        rows.push(TtsRow {
            size: m.n_vars(),
            p_s,
            t_c_s,
            tts_s,
            flag: flag.to_string(),
        });
    }
    Ok(rows)
}

pub fn write_tts_csv(rows: &[TtsRow], w: &mut dyn Write) -> Result<(), BenchError> {
    writeln!(w, "size,p_s,t_c_s,tts_s,flag")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.size, r.p_s, r.t_c_s, r.tts_s, r.flag)?;
    }
    Ok(())
}

/// Settings for the residual-energy benchmark.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualBenchConfig {
    /// Solvers to report, in row order. Greedy reports its single
    /// descent solution; the annealers report means over reads.
    pub solvers: Vec<SolverKind>,
    pub reads: usize,
    pub sweeps: usize,
    pub reversal_distance: f64,
    pub pause_sweeps: usize,
    pub seed: u64,
    pub exact_node_budget: Option<u64>,
}

impl Default for ResidualBenchConfig {
    fn default() -> Self {
        ResidualBenchConfig {
            solvers: vec![
                SolverKind::Greedy,
                SolverKind::ForwardAnnealing,
                SolverKind::ReverseAnnealing,
            ],
            reads: 1000,
            sweeps: 64,
            reversal_distance: 0.45,
            pause_sweeps: 8,
            seed: 1,
            exact_node_budget: Some(2_000_000),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub size: usize,
    pub solver: SolverKind,
    pub mean_e: f64,
    pub e_min: f64,
    pub residual: f64,
    pub flag: String,
}

/// Residual energy of each requested solver against the exact reference,
/// with problems visited in ascending size order and one row per
/// (problem, solver). Both annealers get the same sweep budget; reverse
/// annealing starts from the greedy descent state, so its mean can never
/// exceed greedy's energy.
pub fn bench_residual(
    problems: &[QuboModel],
    cfg: &ResidualBenchConfig,
) -> Result<Vec<ResidualRow>, BenchError> {
    if cfg.solvers.is_empty() {
        return Err(SolverError::BadParameters("no solvers requested".into()).into());
    }
    if cfg.solvers.contains(&SolverKind::Exact) {
        return Err(SolverError::BadParameters(
            "the exact solver's residual is zero by definition; request greedy, fsa, or rsa".into(),
        )
        .into());
    }
    if cfg.reads == 0 {
        return Err(SolverError::BadParameters("reads must be positive".into()).into());
    }
    let mut order: Vec<usize> = (0..problems.len()).collect();
    order.sort_by_key(|&i| (problems[i].n_vars(), i));
    let mut rows = Vec::with_capacity(order.len() * cfg.solvers.len());
    for &i in &order {
        let m = &problems[i];
        let reference = solve_reference(m, cfg.exact_node_budget)?;
        let e_min = reference.ground.to_f64();
        let (t_max, t_min) = default_temperatures(m);
        for &solver in &cfg.solvers {
            let mean_e = match solver {
                SolverKind::Greedy => reference.greedy_energy.to_f64(),
                SolverKind::ForwardAnnealing => {
                    let schedule = AnnealSchedule::forward(t_max, t_min, cfg.sweeps)?;
                    let result = solve_fsa(
                        m,
                        &schedule,
                        &AnnealParams {
                            reads: cfg.reads,
                            seed: stream_seed(cfg.seed, "residual-fsa", i as u64),
                        },
                    )?;
                    mean_energy(&result.samples)
                }
                SolverKind::ReverseAnnealing => {
                    let schedule = AnnealSchedule::reverse(
                        t_max,
                        t_min,
                        cfg.sweeps,
                        cfg.reversal_distance,
                        cfg.pause_sweeps,
                    )?;
                    let result = solve_rsa(
                        m,
                        &reference.greedy,
                        &schedule,
                        &AnnealParams {
                            reads: cfg.reads,
                            seed: stream_seed(cfg.seed, "residual-rsa", i as u64),
                        },
                    )?;
                    mean_energy(&result.samples)
                }
                SolverKind::Exact => unreachable!("rejected above"),
            };
            let (residual, absolute) = residual_energy(mean_e, e_min);
            let flag = if !reference.proven {
                "no_ground"
            } else if absolute {
                "absolute"
            } else {
                ""
            };
            rows.push(ResidualRow {
                size: m.n_vars(),
                solver,
                mean_e,
                e_min,
                residual,
                flag: flag.to_string(),
            });
        }
    }
    Ok(rows)
}

pub fn write_residual_csv(rows: &[ResidualRow], w: &mut dyn Write) -> Result<(), BenchError> {
    writeln!(w, "size,solver,mean_e,e_min,residual,flag")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.size, r.solver, r.mean_e, r.e_min, r.residual, r.flag
        )?;
    }
    Ok(())
}

/// A problem prepared for the reversal-distance sweep: the model, the
/// state reverse annealing starts from, and the energy that counts as
/// finding the optimum.
#[derive(Debug, Clone)]
pub struct CalibrationProblem {
    pub model: QuboModel,
    pub init: Assignment,
    pub ground: Energy,
}

/// Packages models for calibration: greedy descent as the start state,
/// proven optimum as the ground energy. Models where greedy already
/// finds the optimum — or where optimality could not be proven — are
/// dropped, keeping only problems with room between start and ground.
pub fn nontrivial_calibration_problems(
    models: Vec<QuboModel>,
    node_budget: Option<u64>,
) -> Result<Vec<CalibrationProblem>, BenchError> {
    let mut out = Vec::new();
    for model in models {
        let reference = solve_reference(&model, node_budget)?;
        if reference.proven && reference.ground < reference.greedy_energy {
            out.push(CalibrationProblem {
                model,
                init: reference.greedy,
                ground: reference.ground,
            });
        }
    }
    Ok(out)
}

/// Scans generated congestion problems and packages `count` of them for
/// calibration.
pub fn generated_calibration_problems(
    seed_start: u64,
    attempts: u64,
    n_agvs: usize,
    count: usize,
) -> Result<Vec<CalibrationProblem>, BenchError> {
    let mut out = Vec::with_capacity(count);
    for offset in 0..attempts {
        if out.len() == count {
            break;
        }
        if let Some((_, m, greedy, exact)) = nontrivial_at(seed_start + offset, n_agvs)? {
            out.push(CalibrationProblem {
                model: m,
                init: greedy.best,
                ground: exact.best_energy,
            });
        }
    }
    if out.len() == count {
        Ok(out)
    } else {
        Err(BenchError::NoNontrivialInstance { attempts })
    }
}

/// The default calibration grid: 0.10 through 0.90 in steps of 0.05.
pub fn default_r_grid() -> Vec<f64> {
    (2..=18).map(|k| k as f64 / 20.0).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationConfig {
    pub r_grid: Vec<f64>,
    pub reads: usize,
    pub sweeps: usize,
    pub pause_sweeps: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            r_grid: default_r_grid(),
            reads: 1000,
            sweeps: 64,
            pause_sweeps: 8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub r: f64,
    pub classes: SampleClasses,
}

/// Sweeps the reversal distance, classifying every read of every problem
/// against its start state and ground energy. Each row holds the mean of
/// the class fractions over the problems, so it is itself a distribution.
pub fn calibrate_reversal(
    problems: &[CalibrationProblem],
    cfg: &CalibrationConfig,
) -> Result<Vec<CalibrationRow>, BenchError> {
    if problems.is_empty() {
        return Err(
            SolverError::BadParameters("calibration needs at least one problem".into()).into(),
        );
    }
    if cfg.reads == 0 {
        return Err(SolverError::BadParameters("reads must be positive".into()).into());
    }
    let mut rows = Vec::with_capacity(cfg.r_grid.len());
    for (i, &r) in cfg.r_grid.iter().enumerate() {
        let (mut s_same, mut s_ground, mut s_other) = (0.0f64, 0.0f64, 0.0f64);
        for (j, p) in problems.iter().enumerate() {
            let (t_max, t_min) = default_temperatures(&p.model);
            let schedule = AnnealSchedule::reverse(t_max, t_min, cfg.sweeps, r, cfg.pause_sweeps)?;
            let result = solve_rsa(
                &p.model,
                &p.init,
                &schedule,
                &AnnealParams {
                    reads: cfg.reads,
                    seed: stream_seed(cfg.seed, "calibrate", (i * problems.len() + j) as u64),
                },
            )?;
            let classes = classify_samples(&result.samples, &p.init, p.ground);
            s_same += classes.p_same;
            s_ground += classes.p_ground;
            s_other += classes.p_other;
        }
        let n = problems.len() as f64;
        rows.push(CalibrationRow {
            r,
            classes: SampleClasses {
                p_same: s_same / n,
                p_ground: s_ground / n,
                p_other: s_other / n,
            },
        });
    }
    Ok(rows)
}

pub fn write_calibration_csv(rows: &[CalibrationRow], w: &mut dyn Write) -> Result<(), BenchError> {
    writeln!(w, "r,p_same,p_ground,p_other")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{}",
            row.r, row.classes.p_same, row.classes.p_ground, row.classes.p_other
        )?;
    }
    Ok(())
}

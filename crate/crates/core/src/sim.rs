//! Discrete plant simulation.
//!
//! Time advances in planning periods. At each period boundary idle AGVs
//! receive tasks, one routing instance is built from every AGV's active
//! leg, the configured solver selects routes, and the fleet executes them
//! step by step. A task is a station-to-station transport; an AGV that is
//! not already at the pickup station first runs a pickup leg, then the
//! delivery leg. Deliveries count as completed at the arrival step.
//!
//! Everything is driven by seeded RNG streams, so a run is a pure function
//! of the plant, the configuration, and the seed.

use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{AgvState, CandidateError, CandidateParams, PlanningHorizon, Task};
use crate::model::{
    build_instance, build_qubo, check_feasible, default_penalties, export_qubo, Assignment, Energy,
    ModelError, QuboModel, RoutingInstance,
};
use crate::network::{NodeId, PlantGraph};
use crate::rng::{stream_rng, stream_seed};
use crate::solvers::{
    greedy_choices, solve_exact, solve_fsa, solve_rsa, AnnealParams, AnnealSchedule, ExactOptions,
    SolverError, SolverKind,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("plant has {available} stations but the run needs {needed}")]
    NotEnoughStations { needed: usize, available: usize },
    #[error("task file {path}, line {line}: {message}")]
    BadTaskFile {
        path: String,
        line: usize,
        message: String,
    },
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to write output: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Candidates(#[from] CandidateError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Where transport tasks come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskSource {
    /// Endless stream: an idle AGV is sent to a random other station.
    Random,
    /// Finite list read from a file; the run ends when it is exhausted.
    File(PathBuf),
}

/// Full description of one simulation run, minus the plant and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_agvs: usize,
    /// Planning periods to execute.
    pub iterations: usize,
    pub period_s: f64,
    pub agv_speed_mps: f64,
    /// Base routes requested per AGV.
    pub k: usize,
    /// Maximum overlap ratio between kept base routes.
    pub theta: f64,
    pub solver: SolverKind,
    pub reads: usize,
    pub sweeps: usize,
    pub reversal_distance: f64,
    pub pause_sweeps: usize,
    pub exact_node_budget: Option<u64>,
    pub tasks: TaskSource,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_agvs: 20,
            iterations: 100,
            period_s: 8.0,
            agv_speed_mps: 0.5,
            k: 3,
            theta: 0.6,
            solver: SolverKind::Greedy,
            reads: 32,
            sweeps: 128,
            reversal_distance: 0.45,
            pause_sweeps: 16,
            exact_node_budget: None,
            tasks: TaskSource::Random,
        }
    }
}

/// Aggregate results of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub completed_tasks: u64,
    /// Percentage of AGV-steps spent traversing an edge.
    pub working_rate: f64,
    /// Planning periods actually executed.
    pub iterations: usize,
    pub solver: String,
    pub seed: u64,
    /// Periods where the solver's best state was unusable and the greedy
    /// selection was executed instead.
    pub fallbacks: u64,
    pub task_file_exhausted: bool,
}

/// Optional output streams for a run.
#[derive(Default)]
pub struct SimSinks<'a> {
    /// One JSON object per line describing every assignment, move, wait,
    /// pickup, and delivery.
    pub step_log: Option<&'a mut dyn Write>,
    /// One row per planning period.
    pub iteration_csv: Option<&'a mut dyn Write>,
    /// Directory receiving every period's model in exchange format.
    pub capture_dir: Option<&'a Path>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum StepEvent {
    Assign,
    Move,
    Wait,
    Pickup,
    Deliver,
}

#[derive(Debug, Serialize)]
struct StepRecord {
    step: u64,
    agv: usize,
    from: u32,
    to: Option<u32>,
    task_id: Option<u64>,
    event: StepEvent,
}

/// Fleet-wide share of moving steps, as a percentage.
pub fn working_rate(moving_steps: u64, total_steps: u64) -> f64 {
    if total_steps == 0 {
        0.0
    } else {
        100.0 * moving_steps as f64 / total_steps as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct Leg {
    task: Task,
    task_id: u64,
    is_delivery: bool,
}

struct AgvSim {
    at: NodeId,
    legs: VecDeque<Leg>,
}

enum TaskFeed {
    Random(Box<ChaCha8Rng>),
    File(VecDeque<Task>),
}

impl TaskFeed {
    fn next(&mut self, g: &PlantGraph, at: NodeId) -> Option<Task> {
        match self {
            TaskFeed::Random(rng) => {
                let stations = g.stations();
                loop {
                    let destination = stations[rng.gen_range(0..stations.len())];
                    if destination != at {
                        return Some(Task {
                            source: at,
                            destination,
                        });
                    }
                }
            }
            TaskFeed::File(queue) => queue.pop_front(),
        }
    }
}

fn legs_for(task: Task, at: NodeId, task_id: u64) -> VecDeque<Leg> {
    let mut legs = VecDeque::with_capacity(2);
    if at != task.source {
        legs.push_back(Leg {
            task: Task {
                source: at,
                destination: task.source,
            },
            task_id,
            is_delivery: false,
        });
    }
    legs.push_back(Leg {
        task,
        task_id,
        is_delivery: true,
    });
    legs
}

/// Reads a task list: one `source destination` node-id pair per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn load_tasks(path: impl AsRef<Path>, g: &PlantGraph) -> Result<Vec<Task>, SimError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let fail = |line: usize, message: String| SimError::BadTaskFile {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut tasks = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(fail(line, "expected `source destination`".into()));
        }
        let mut ids = [0u32; 2];
        for (slot, field) in ids.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| fail(line, format!("`{field}` is not a node id")))?;
        }
        let (source, destination) = (NodeId::new(ids[0]), NodeId::new(ids[1]));
        for node in [source, destination] {
            if !g.is_station(node) {
                return Err(fail(line, format!("node {node} is not a station")));
            }
        }
        if source == destination {
            return Err(fail(line, "source equals destination".into()));
        }
        tasks.push(Task {
            source,
            destination,
        });
    }
    Ok(tasks)
}

fn emit(sink: &mut Option<&mut dyn Write>, record: &StepRecord) -> Result<(), SimError> {
    if let Some(w) = sink.as_deref_mut() {
        let line = serde_json::to_string(record).expect("step records serialize");
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn route_position(nodes: &[NodeId], t: u64) -> NodeId {
    nodes[(t as usize).min(nodes.len() - 1)]
}

struct PeriodPick {
    choices: Vec<usize>,
    /// Whether the solver's own best state was usable; when it is not the
    /// greedy selection is substituted and `fallback` is set.
    feasible: bool,
    fallback: u64,
    model: Option<QuboModel>,
}

/// Picks routes for one period with the configured solver.
fn pick_routes(
    inst: &Arc<RoutingInstance>,
    cfg: &SimConfig,
    schedule: Option<&AnnealSchedule>,
    solver_seed: u64,
    capture: bool,
) -> Result<PeriodPick, SimError> {
    let greedy = greedy_choices(inst);
    let need_model = cfg.solver != SolverKind::Greedy || capture;
    let model = if need_model {
        Some(build_qubo(inst, default_penalties(inst))?)
    } else {
        None
    };
    let mut fallback = 0u64;
    let (choices, feasible) = match cfg.solver {
        SolverKind::Greedy => (greedy.choices, true),
        _ => {
            let m = model.as_ref().expect("model built for non-greedy solvers");
            let warm = Assignment::from_choices(inst, &greedy.choices);
            let best = match cfg.solver {
                SolverKind::Exact => {
                    solve_exact(
                        m,
                        Some(&warm),
                        &ExactOptions {
                            node_budget: cfg.exact_node_budget,
                        },
                    )?
                    .best
                }
                SolverKind::ForwardAnnealing => {
                    solve_fsa(
                        m,
                        schedule.expect("schedule prepared"),
                        &AnnealParams {
                            reads: cfg.reads,
                            seed: solver_seed,
                        },
                    )?
                    .best
                }
                SolverKind::ReverseAnnealing => {
                    solve_rsa(
                        m,
                        &warm,
                        schedule.expect("schedule prepared"),
                        &AnnealParams {
                            reads: cfg.reads,
                            seed: solver_seed,
                        },
                    )?
                    .best
                }
                SolverKind::Greedy => unreachable!(),
            };
            if check_feasible(inst, &best)?.feasible {
                (best.choices(inst)?, true)
            } else {
                fallback = 1;
                (greedy.choices, false)
            }
        }
    };
    Ok(PeriodPick {
        choices,
        feasible,
        fallback,
        model,
    })
}

pub fn run_simulation(g: &PlantGraph, cfg: &SimConfig, seed: u64) -> Result<RunMetrics, SimError> {
    run_simulation_with(g, cfg, seed, &mut SimSinks::default())
}

pub fn run_simulation_with(
    g: &PlantGraph,
    cfg: &SimConfig,
    seed: u64,
    sinks: &mut SimSinks<'_>,
) -> Result<RunMetrics, SimError> {
    if cfg.n_agvs == 0 {
        return Err(SimError::BadConfig("n_agvs must be positive".into()));
    }
    let stations = g.stations();
    if stations.len() < 2 {
        return Err(SimError::BadConfig(
            "plant needs at least two stations".into(),
        ));
    }
    if stations.len() < cfg.n_agvs {
        return Err(SimError::NotEnoughStations {
            needed: cfg.n_agvs,
            available: stations.len(),
        });
    }
    let params = CandidateParams {
        k: cfg.k,
        theta: cfg.theta,
    };
    params.validate()?;
    let horizon = PlanningHorizon::for_plant(g, cfg.period_s, cfg.agv_speed_mps)?;
    let t_steps = horizon.t_steps() as u64;
    let anneals = matches!(
        cfg.solver,
        SolverKind::ForwardAnnealing | SolverKind::ReverseAnnealing
    );
    if anneals && cfg.reads == 0 {
        return Err(SimError::BadConfig("reads must be positive".into()));
    }

    let mut agvs: Vec<AgvSim> = (0..cfg.n_agvs)
        .map(|i| AgvSim {
            at: stations[i],
            legs: VecDeque::new(),
        })
        .collect();
    let mut feed = match &cfg.tasks {
        TaskSource::Random => TaskFeed::Random(Box::new(stream_rng(seed, "tasks", 0))),
        TaskSource::File(path) => TaskFeed::File(load_tasks(path, g)?.into()),
    };

    if let Some(csv) = sinks.iteration_csv.as_deref_mut() {
        writeln!(csv, "iter,energy,feasible,wall_ms,moved,stopped")?;
    }

    let mut next_task_id = 0u64;
    let mut completed = 0u64;
    let mut fallbacks = 0u64;
    let mut moving_steps = 0u64;
    let mut step = 0u64;
    let mut iterations = 0usize;
    let mut exhausted = false;

    'run: for iter in 0..cfg.iterations {
        // Hand tasks to idle AGVs.
        for (i, agv) in agvs.iter_mut().enumerate() {
            if !agv.legs.is_empty() {
                continue;
            }
            let Some(task) = feed.next(g, agv.at) else {
                exhausted = true;
                break 'run;
            };
            let task_id = next_task_id;
            next_task_id += 1;
            agv.legs = legs_for(task, agv.at, task_id);
            emit(
                &mut sinks.step_log,
                &StepRecord {
                    step,
                    agv: i,
                    from: task.source.value(),
                    to: Some(task.destination.value()),
                    task_id: Some(task_id),
                    event: StepEvent::Assign,
                },
            )?;
        }

        // Plan the period.
        let states: Vec<AgvState> = agvs
            .iter()
            .enumerate()
            .map(|(i, a)| AgvState {
                id: i,
                current_node: a.at,
                task: a.legs[0].task,
            })
            .collect();
        let inst = Arc::new(build_instance(g, &states, &horizon, &params)?);
        let wall = Instant::now();
        let schedule = match cfg.solver {
            SolverKind::ForwardAnnealing => {
                let (t_max, t_min) = anneal_range(&inst)?;
                Some(AnnealSchedule::forward(t_max, t_min, cfg.sweeps)?)
            }
            SolverKind::ReverseAnnealing => {
                let (t_max, t_min) = anneal_range(&inst)?;
                Some(AnnealSchedule::reverse(
                    t_max,
                    t_min,
                    cfg.sweeps,
                    cfg.reversal_distance,
                    cfg.pause_sweeps,
                )?)
            }
            _ => None,
        };
        let capture = sinks.capture_dir.is_some();
        let pick = pick_routes(
            &inst,
            cfg,
            schedule.as_ref(),
            stream_seed(seed, "solver", iter as u64),
            capture,
        )?;
        let wall_ms = wall.elapsed().as_secs_f64() * 1e3;
        let PeriodPick {
            choices,
            feasible,
            fallback,
            model,
        } = pick;
        fallbacks += fallback;

        if let Some(dir) = sinks.capture_dir {
            let m = model.as_ref().expect("model built when capturing");
            export_qubo(m, dir.join(format!("iter_{iter:04}.qubo")))?;
        }

        if let Some(csv) = sinks.iteration_csv.as_deref_mut() {
            let objective: i64 = choices
                .iter()
                .enumerate()
                .map(|(agv, &j)| inst.candidate(agv, j).remaining_mm)
                .sum();
            let b = default_penalties(&inst).b;
            let energy =
                Energy::from_quarter_units(4 * objective + b * inst.coverable_cells() as i64);
            let moved = choices
                .iter()
                .enumerate()
                .filter(|&(agv, &j)| inst.candidate(agv, j).edge_count() > 0)
                .count();
            writeln!(
                csv,
                "{iter},{energy},{feasible},{wall_ms:.3},{moved},{}",
                cfg.n_agvs - moved
            )?;
        }

        // Execute the period.
        let routes: Vec<&[NodeId]> = choices
            .iter()
            .enumerate()
            .map(|(agv, &j)| inst.candidate(agv, j).nodes.as_slice())
            .collect();
        for t in 1..=t_steps {
            step += 1;
            for i in 0..cfg.n_agvs {
                let prev = route_position(routes[i], t - 1);
                let now = route_position(routes[i], t);
                let task_id = agvs[i].legs.front().map(|l| l.task_id);
                if now != prev {
                    moving_steps += 1;
                    agvs[i].at = now;
                    emit(
                        &mut sinks.step_log,
                        &StepRecord {
                            step,
                            agv: i,
                            from: prev.value(),
                            to: Some(now.value()),
                            task_id,
                            event: StepEvent::Move,
                        },
                    )?;
                } else {
                    emit(
                        &mut sinks.step_log,
                        &StepRecord {
                            step,
                            agv: i,
                            from: prev.value(),
                            to: None,
                            task_id,
                            event: StepEvent::Wait,
                        },
                    )?;
                }
                // Close out a leg on arrival.
                let arrived = agvs[i]
                    .legs
                    .front()
                    .is_some_and(|leg| leg.task.destination == agvs[i].at);
                if arrived {
                    let leg = agvs[i].legs.pop_front().expect("front checked");
                    let event = if leg.is_delivery {
                        completed += 1;
                        StepEvent::Deliver
                    } else {
                        StepEvent::Pickup
                    };
                    emit(
                        &mut sinks.step_log,
                        &StepRecord {
                            step,
                            agv: i,
                            from: agvs[i].at.value(),
                            to: None,
                            task_id: Some(leg.task_id),
                            event,
                        },
                    )?;
                }
            }
        }
        iterations += 1;
    }

    Ok(RunMetrics {
        completed_tasks: completed,
        working_rate: working_rate(moving_steps, cfg.n_agvs as u64 * step),
        iterations,
        solver: cfg.solver.to_string(),
        seed,
        fallbacks,
        task_file_exhausted: exhausted,
    })
}

/// Temperature range for annealing a period's model, derived from its
/// penalty weight without building the full model.
fn anneal_range(inst: &RoutingInstance) -> Result<(f64, f64), SimError> {
    let p = default_penalties(inst);
    Ok(((4 * p.a) as f64, 4.0))
}

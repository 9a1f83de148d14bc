//! Simulated annealing over QUBO models: forward (random start, monotone
//! cooling) and reverse (known start, warm-up to a fraction of the peak
//! temperature, hold, then cool).
//!
//! Reads are independent: read `i` owns RNG stream `i + 1` of the run
//! seed, so results are identical no matter how reads are scheduled
//! across threads. Each sweep proposes one flip per variable in index
//! order under the Metropolis rule; the best state ever visited is
//! tracked with strict improvement, so a read that never improves on its
//! initial state returns that state unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::{Assignment, Energy, QuboModel};

use super::{Sample, SolverError, SolverKind, SolverResult, SolverStats};

/// Per-sweep temperatures, in the same quarter-unit scale as energies.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule {
    temps: Vec<f64>,
}

impl AnnealSchedule {
    /// Geometric cooling from `t_max` down to exactly `t_min`.
    pub fn forward(t_max: f64, t_min: f64, sweeps: usize) -> Result<Self, SolverError> {
        check_temps(t_max, t_min)?;
        if sweeps == 0 {
            return Err(SolverError::BadParameters("sweeps must be positive".into()));
        }
        let temps = if sweeps == 1 {
            vec![t_min]
        } else {
            let ratio = t_min / t_max;
            (0..sweeps)
                .map(|s| {
                    if s == sweeps - 1 {
                        t_min
                    } else {
                        t_max * ratio.powf(s as f64 / (sweeps - 1) as f64)
                    }
                })
                .collect()
        };
        Ok(AnnealSchedule { temps })
    }

    /// Reverse schedule: linear warm-up from near zero to `r * t_max`,
    /// a hold of `pause` sweeps there, then geometric cooling to `t_min`.
    /// `r` is the reversal distance, strictly between 0 and 1; small `r`
    /// keeps the search near its initial state.
    pub fn reverse(
        t_max: f64,
        t_min: f64,
        sweeps: usize,
        r: f64,
        pause: usize,
    ) -> Result<Self, SolverError> {
        check_temps(t_max, t_min)?;
        if sweeps == 0 {
            return Err(SolverError::BadParameters("sweeps must be positive".into()));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(SolverError::BadParameters(format!(
                "reversal distance must lie strictly between 0 and 1, got {r}"
            )));
        }
        if pause > sweeps {
            return Err(SolverError::BadParameters(format!(
                "pause of {pause} sweeps exceeds the total of {sweeps}"
            )));
        }
        let peak = r * t_max;
        let up = (sweeps - pause) / 2;
        let down = sweeps - pause - up;
        let mut temps = Vec::with_capacity(sweeps);
        for s in 0..up {
            temps.push(peak * (s + 1) as f64 / up as f64);
        }
        temps.resize(temps.len() + pause, peak);
        let hi = peak.max(t_min);
        let ratio = t_min / hi;
        for s in 0..down {
            temps.push(if s == down - 1 {
                t_min
            } else {
                hi * ratio.powf((s + 1) as f64 / down as f64)
            });
        }
        Ok(AnnealSchedule { temps })
    }

    pub fn temperatures(&self) -> &[f64] {
        &self.temps
    }

    pub fn sweeps(&self) -> usize {
        self.temps.len()
    }
}

fn check_temps(t_max: f64, t_min: f64) -> Result<(), SolverError> {
    if !(t_max.is_finite() && t_min.is_finite() && t_min > 0.0 && t_min <= t_max) {
        return Err(SolverError::BadParameters(format!(
            "need 0 < t_min <= t_max, got t_min={t_min} t_max={t_max}"
        )));
    }
    Ok(())
}

/// Default temperature range for a model, in quarter units: the peak is
/// the one-hot penalty weight (or the largest diagonal magnitude for bare
/// models) and the floor is one quarter of a distance unit.
pub fn default_temperatures(m: &QuboModel) -> (f64, f64) {
    let t_max = match m.penalties() {
        Some(p) => (4 * p.a) as f64,
        None => m
            .diagonal4()
            .iter()
            .map(|d| d.abs())
            .max()
            .unwrap_or(4)
            .max(4) as f64,
    };
    (t_max, 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnealParams {
    /// Independent restarts; each contributes one sample.
    pub reads: usize,
    pub seed: u64,
}

enum Init<'a> {
    Random,
    Fixed(&'a Assignment),
}

fn run_read(m: &QuboModel, init: &Init, temps: &[f64], seed: u64, read: u64) -> Sample {
    let n = m.n_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(read + 1);
    let mut bits: Vec<bool> = match init {
        Init::Random => (0..n).map(|_| rng.gen()).collect(),
        Init::Fixed(x) => x.bits().to_vec(),
    };

    // Local fields: flipping v on costs field[v], flipping it off refunds it.
    let mut field: Vec<i64> = m.diagonal4().to_vec();
    for (v, &set) in bits.iter().enumerate() {
        if set {
            for &(w, q) in m.neighbors(v) {
                field[w as usize] += q;
            }
        }
    }
    let mut energy4 = m
        .energy(&Assignment::from_bits(bits.clone()))
        .expect("width matches")
        .quarter_units();

    let mut best4 = energy4;
    let mut best_bits = bits.clone();
    for &t in temps {
        for v in 0..n {
            let delta4 = if bits[v] { -field[v] } else { field[v] };
            let accept = delta4 < 0 || (t > 0.0 && rng.gen::<f64>() < (-(delta4 as f64) / t).exp());
            if !accept {
                continue;
            }
            bits[v] = !bits[v];
            energy4 += delta4;
            let sign = if bits[v] { 1 } else { -1 };
            for &(w, q) in m.neighbors(v) {
                field[w as usize] += sign * q;
            }
            if energy4 < best4 {
                best4 = energy4;
                best_bits.copy_from_slice(&bits);
            }
        }
    }
    Sample {
        assignment: Assignment::from_bits(best_bits),
        energy: Energy::from_quarter_units(best4),
    }
}

fn run_reads(
    m: &QuboModel,
    kind: SolverKind,
    init: Init,
    schedule: &AnnealSchedule,
    params: &AnnealParams,
) -> Result<SolverResult, SolverError> {
    if params.reads == 0 {
        return Err(SolverError::BadParameters("reads must be positive".into()));
    }
    if let Init::Fixed(x) = &init {
        if x.len() != m.n_vars() {
            return Err(SolverError::Model(crate::model::ModelError::WrongWidth {
                expected: m.n_vars(),
                got: x.len(),
            }));
        }
    }
    let samples: Vec<Sample> = (0..params.reads as u64)
        .into_par_iter()
        .map(|read| run_read(m, &init, schedule.temperatures(), params.seed, read))
        .collect();
    Ok(SolverResult::from_samples(
        kind,
        samples,
        SolverStats {
            reads: params.reads,
            sweeps: schedule.sweeps(),
            ..SolverStats::default()
        },
    ))
}

/// Forward annealing: every read starts from a uniformly random state.
pub fn solve_fsa(
    m: &QuboModel,
    schedule: &AnnealSchedule,
    params: &AnnealParams,
) -> Result<SolverResult, SolverError> {
    run_reads(
        m,
        SolverKind::ForwardAnnealing,
        Init::Random,
        schedule,
        params,
    )
}

/// Reverse annealing: every read starts from `init` and is perturbed by
/// the schedule's warm-up before cooling again. Best states are tracked
/// with strict improvement, so no read ever reports worse than `init`.
pub fn solve_rsa(
    m: &QuboModel,
    init: &Assignment,
    schedule: &AnnealSchedule,
    params: &AnnealParams,
) -> Result<SolverResult, SolverError> {
    run_reads(
        m,
        SolverKind::ReverseAnnealing,
        Init::Fixed(init),
        schedule,
        params,
    )
}

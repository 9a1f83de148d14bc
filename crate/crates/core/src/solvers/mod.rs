//! Solvers for the per-period route-selection problem.
//!
//! Four strategies over the same variable space: rule-based conflict
//! resolution ([`solve_greedy`]), exact branch-and-bound ([`solve_exact`]),
//! and two annealers ([`solve_fsa`], [`solve_rsa`]). All of them report a
//! [`SolverResult`] so downstream code can treat them interchangeably.

mod anneal;
mod exact;
mod greedy;

pub use anneal::{default_temperatures, solve_fsa, solve_rsa, AnnealParams, AnnealSchedule};
pub use exact::{solve_exact, ExactOptions};
pub use greedy::{greedy_choices, qubo_greedy, solve_greedy, GreedyOutcome};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Assignment, Energy, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Greedy,
    Exact,
    #[serde(rename = "fsa")]
    ForwardAnnealing,
    #[serde(rename = "rsa")]
    ReverseAnnealing,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Greedy,
        SolverKind::Exact,
        SolverKind::ForwardAnnealing,
        SolverKind::ReverseAnnealing,
    ];
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Greedy => "greedy",
            SolverKind::Exact => "exact",
            SolverKind::ForwardAnnealing => "fsa",
            SolverKind::ReverseAnnealing => "rsa",
        })
    }
}

impl FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "greedy" => Ok(SolverKind::Greedy),
            "exact" => Ok(SolverKind::Exact),
            "fsa" => Ok(SolverKind::ForwardAnnealing),
            "rsa" => Ok(SolverKind::ReverseAnnealing),
            other => Err(format!(
                "unknown solver `{other}` (expected greedy, exact, fsa, or rsa)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("model declares no one-hot groups")]
    NoGroups,
    #[error("group {group} is empty")]
    EmptyGroup { group: usize },
    #[error("variable {var} is covered by {count} groups; expected exactly one")]
    GroupsNotPartition { var: u32, count: usize },
    #[error("invalid annealing parameters: {0}")]
    BadParameters(String),
    #[error("node budget exhausted before any complete selection was found")]
    BudgetTooSmall,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The best state one independent read of a solver produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub assignment: Assignment,
    pub energy: Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverStats {
    pub reads: usize,
    pub sweeps: usize,
    pub branch_nodes: u64,
    pub greedy_advances: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverResult {
    pub solver: SolverKind,
    pub best: Assignment,
    pub best_energy: Energy,
    /// Whether the best state is a proven global minimum of the model.
    pub proven_optimal: bool,
    /// Per-read best states, in read order. Single-shot solvers report one.
    pub samples: Vec<Sample>,
    pub stats: SolverStats,
}

impl SolverResult {
    pub(crate) fn single(
        solver: SolverKind,
        assignment: Assignment,
        energy: Energy,
        proven_optimal: bool,
        stats: SolverStats,
    ) -> Self {
        SolverResult {
            solver,
            best: assignment.clone(),
            best_energy: energy,
            proven_optimal,
            samples: vec![Sample { assignment, energy }],
            stats,
        }
    }

    pub(crate) fn from_samples(
        solver: SolverKind,
        samples: Vec<Sample>,
        stats: SolverStats,
    ) -> Self {
        let best_idx = samples
            .iter()
            .enumerate()
            .min_by_key(|(i, s)| (s.energy, *i))
            .map(|(i, _)| i)
            .expect("at least one read");
        SolverResult {
            solver,
            best: samples[best_idx].assignment.clone(),
            best_energy: samples[best_idx].energy,
            proven_optimal: false,
            samples,
            stats,
        }
    }
}

/// Sample population split used by the reversal-distance calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleClasses {
    /// Fraction of reads that ended exactly on the initial state.
    pub p_same: f64,
    /// Fraction of reads that reached the ground energy.
    pub p_ground: f64,
    /// Everything else.
    pub p_other: f64,
}

/// Splits reads into ground / unchanged / other. A read that starts on the
/// ground state and stays there counts as ground.
pub fn classify_samples(samples: &[Sample], init: &Assignment, ground: Energy) -> SampleClasses {
    if samples.is_empty() {
        return SampleClasses {
            p_same: 0.0,
            p_ground: 0.0,
            p_other: 0.0,
        };
    }
    let mut ground_n = 0usize;
    let mut same_n = 0usize;
    let mut other_n = 0usize;
    for s in samples {
        if s.energy == ground {
            ground_n += 1;
        } else if s.assignment == *init {
            same_n += 1;
        } else {
            other_n += 1;
        }
    }
    let n = samples.len() as f64;
    SampleClasses {
        p_same: same_n as f64 / n,
        p_ground: ground_n as f64 / n,
        p_other: other_n as f64 / n,
    }
}

//! Rule-based route selection.
//!
//! Every AGV starts on its best candidate; while two selected footprints
//! overlap, the cheaper-to-move AGV of the first conflicting pair advances
//! to its next candidate. Candidate order ends at the stop route, and stop
//! routes of distinct AGVs never overlap, so the loop always terminates on
//! a feasible selection.

use std::collections::BTreeMap;

use crate::model::{default_penalties, Assignment, Energy, QuboModel, RoutingInstance};

use super::{SolverError, SolverKind, SolverResult, SolverStats};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyOutcome {
    /// Selected candidate index per AGV.
    pub choices: Vec<usize>,
    /// How many times some AGV was pushed to a worse candidate.
    pub advances: u64,
}

/// Runs the conflict-resolution loop and returns the selected candidates.
pub fn greedy_choices(inst: &RoutingInstance) -> GreedyOutcome {
    let n = inst.n_agvs();
    // Position of each AGV inside its exploration order.
    let mut pos = vec![0usize; n];
    let current = |pos: &[usize], agv: usize| inst.explore_order(agv)[pos[agv]] as usize;
    let mut advances = 0u64;
    let limit: u64 = (0..n).map(|agv| inst.candidates(agv).len() as u64).sum();

    loop {
        // First doubly-covered cell in (step, edge) order, if any.
        let mut covered: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for agv in 0..n {
            let j = current(&pos, agv);
            for &cell in inst.candidate(agv, j).footprint.cells() {
                covered.entry(cell).or_default().push(agv);
            }
        }
        let conflict = covered.into_iter().find(|(_, agvs)| agvs.len() > 1);
        let Some((_, agvs)) = conflict else {
            let choices = (0..n).map(|agv| current(&pos, agv)).collect();
            return GreedyOutcome { choices, advances };
        };

        // The two lowest-numbered AGVs on the cell negotiate; the one whose
        // next candidate disturbs fewer other AGVs moves, ties push the
        // higher-numbered one.
        let (first, second) = (agvs[0], agvs[1]);
        let loser = if impact(inst, &pos, first) < impact(inst, &pos, second) {
            first
        } else {
            second
        };
        pos[loser] += 1;
        advances += 1;
        assert!(advances <= limit, "conflict resolution failed to terminate");
    }
}

/// How many other AGVs' current selections the next candidate of `agv`
/// would overlap. AGVs already on their stop route cannot move and report
/// the maximum.
fn impact(inst: &RoutingInstance, pos: &[usize], agv: usize) -> usize {
    let order = inst.explore_order(agv);
    if pos[agv] + 1 >= order.len() {
        return usize::MAX;
    }
    let next = &inst.candidate(agv, order[pos[agv] + 1] as usize).footprint;
    (0..inst.n_agvs())
        .filter(|&g| {
            g != agv && {
                let j = inst.explore_order(g)[pos[g]] as usize;
                inst.candidate(g, j).footprint.intersects(next)
            }
        })
        .count()
}

/// Greedy selection wrapped as a [`SolverResult`]. The reported energy uses
/// the default penalty weights, so it is directly comparable to model-based
/// solvers run on the same instance: for a feasible selection the model
/// energy is the summed remaining distance plus the constant coverage term.
pub fn solve_greedy(inst: &RoutingInstance) -> SolverResult {
    let outcome = greedy_choices(inst);
    let assignment = Assignment::from_choices(inst, &outcome.choices);
    let objective: i64 = outcome
        .choices
        .iter()
        .enumerate()
        .map(|(agv, &j)| inst.candidate(agv, j).remaining_mm)
        .sum();
    let b = default_penalties(inst).b;
    let energy = Energy::from_quarter_units(4 * objective + b * inst.coverable_cells() as i64);
    SolverResult::single(
        SolverKind::Greedy,
        assignment,
        energy,
        false,
        SolverStats {
            greedy_advances: outcome.advances,
            ..SolverStats::default()
        },
    )
}

/// Cheapest-first one-hot seed for a bare model: walks the groups in order
/// and picks the variable with the lowest local field given earlier picks.
/// Used to warm-start solvers on models loaded from a file.
pub fn qubo_greedy(m: &QuboModel) -> Result<Assignment, SolverError> {
    if m.groups().is_empty() {
        return Err(SolverError::NoGroups);
    }
    let mut field: Vec<i64> = m.diagonal4().to_vec();
    let mut bits = vec![false; m.n_vars()];
    for (g, group) in m.groups().iter().enumerate() {
        let &v = group
            .iter()
            .min_by_key(|&&v| (field[v as usize], v))
            .ok_or(SolverError::EmptyGroup { group: g })?;
        bits[v as usize] = true;
        for &(w, q) in m.neighbors(v as usize) {
            field[w as usize] += q;
        }
    }
    Ok(Assignment::from_bits(bits))
}

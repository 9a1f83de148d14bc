//! Exact minimization over one-hot selections.
//!
//! Depth-first branch-and-bound over the model's groups: each level picks
//! one variable of one group, maintaining the local field of every
//! variable so a pick costs its current field. The bound adds, for each
//! remaining group, the smallest field a member could contribute (plus
//! every negative coupling it might still collect, so models with negative
//! couplings are bounded correctly too). Selections violating occupancy
//! prune themselves: penalty-scale couplings push their bound far above
//! any feasible incumbent.

use crate::model::{Assignment, Energy, QuboModel};

use super::{Sample, SolverError, SolverKind, SolverResult, SolverStats};

#[derive(Debug, Clone, Copy, Default)]
pub struct ExactOptions {
    /// Node expansion budget. When exceeded the search stops and reports
    /// the incumbent without an optimality claim.
    pub node_budget: Option<u64>,
}

struct Search<'a> {
    m: &'a QuboModel,
    groups: &'a [Vec<u32>],
    /// Sum of each variable's negative couplings; a lower bound on what it
    /// could still collect from unchosen neighbors.
    neg4: Vec<i64>,
    /// Current field of each variable given the picks made so far.
    field: Vec<i64>,
    chosen: Vec<u32>,
    best4: i64,
    best_choice: Option<Vec<u32>>,
    nodes: u64,
    budget: u64,
    truncated: bool,
}

impl Search<'_> {
    fn flip(&mut self, v: u32, sign: i64) {
        for &(w, q) in self.m.neighbors(v as usize) {
            self.field[w as usize] += sign * q;
        }
    }

    /// Lower bound on what the groups from `g` on must add.
    fn tail_bound(&self, g: usize) -> i64 {
        self.groups[g..]
            .iter()
            .map(|group| {
                group
                    .iter()
                    .map(|&v| self.field[v as usize] + self.neg4[v as usize])
                    .min()
                    .expect("groups are non-empty")
            })
            .sum()
    }

    fn dfs(&mut self, g: usize, acc4: i64) {
        if g == self.groups.len() {
            if acc4 < self.best4 {
                self.best4 = acc4;
                self.best_choice = Some(self.chosen.clone());
            }
            return;
        }
        let mut order = self.groups[g].clone();
        order.sort_unstable_by_key(|&v| (self.field[v as usize], v));
        for v in order {
            if self.truncated {
                return;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                self.truncated = true;
                return;
            }
            let child4 = acc4 + self.field[v as usize];
            self.flip(v, 1);
            let bound = child4 + self.tail_bound(g + 1);
            if bound < self.best4 {
                self.chosen.push(v);
                self.dfs(g + 1, child4);
                self.chosen.pop();
            }
            self.flip(v, -1);
        }
    }
}

/// Minimizes the model over all one-hot selections of its groups.
///
/// `warm` seeds the incumbent (any assignment; its exact energy is used).
/// The first optimum found in field-then-index order is returned, so the
/// result is deterministic.
pub fn solve_exact(
    m: &QuboModel,
    warm: Option<&Assignment>,
    opts: &ExactOptions,
) -> Result<SolverResult, SolverError> {
    let groups = m.groups();
    if groups.is_empty() {
        return Err(SolverError::NoGroups);
    }
    for (g, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(SolverError::EmptyGroup { group: g });
        }
    }
    let mut coverage = vec![0usize; m.n_vars()];
    for group in groups {
        for &v in group {
            coverage[v as usize] += 1;
        }
    }
    if let Some(var) = coverage.iter().position(|&c| c != 1) {
        return Err(SolverError::GroupsNotPartition {
            var: var as u32,
            count: coverage[var],
        });
    }

    let neg4 = (0..m.n_vars())
        .map(|v| m.neighbors(v).iter().map(|&(_, q)| q.min(0)).sum())
        .collect();
    let mut search = Search {
        m,
        groups,
        neg4,
        field: m.diagonal4().to_vec(),
        chosen: Vec::with_capacity(groups.len()),
        best4: i64::MAX,
        best_choice: None,
        nodes: 0,
        budget: opts.node_budget.unwrap_or(u64::MAX),
        truncated: false,
    };
    let warm = match warm {
        Some(w) => {
            search.best4 = m.energy(w)?.quarter_units();
            Some(w.clone())
        }
        None => None,
    };

    search.dfs(0, m.offset4());

    let energy = Energy::from_quarter_units(search.best4);
    let best = match (search.best_choice, warm) {
        (Some(choice), _) => {
            let mut bits = vec![false; m.n_vars()];
            for &v in &choice {
                bits[v as usize] = true;
            }
            Assignment::from_bits(bits)
        }
        (None, Some(w)) => w,
        (None, None) => return Err(SolverError::BudgetTooSmall),
    };
    debug_assert_eq!(m.energy(&best).unwrap(), energy);
    Ok(SolverResult {
        solver: SolverKind::Exact,
        best: best.clone(),
        best_energy: energy,
        proven_optimal: !search.truncated,
        samples: vec![Sample {
            assignment: best,
            energy,
        }],
        stats: SolverStats {
            branch_nodes: search.nodes,
            ..SolverStats::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{AgvState, CandidateParams, PlanningHorizon, Task};
    use crate::model::{
        build_instance, build_qubo, check_feasible, default_penalties, parse_exchange,
        RoutingInstance,
    };
    use crate::network::generate_plant;
    use crate::solvers::{qubo_greedy, solve_greedy};
    use std::sync::Arc;

    fn small_instance(seed: u64, n_agvs: usize) -> Arc<RoutingInstance> {
        let g = generate_plant(4, 5, seed).unwrap();
        let h = PlanningHorizon::for_plant(&g, 6.0, 0.5).unwrap();
        let stations = g.stations();
        let states: Vec<AgvState> = (0..n_agvs)
            .map(|i| AgvState {
                id: i,
                current_node: stations[i],
                task: Task {
                    source: stations[i],
                    destination: stations[(i + 3) % stations.len()],
                },
            })
            .collect();
        Arc::new(build_instance(&g, &states, &h, &CandidateParams::default()).unwrap())
    }

    /// Every one-hot selection, evaluated directly.
    fn enumerate_min4(m: &QuboModel) -> i64 {
        let groups = m.groups();
        let mut best = i64::MAX;
        let mut picks = vec![0usize; groups.len()];
        loop {
            let mut bits = vec![false; m.n_vars()];
            for (g, &p) in picks.iter().enumerate() {
                bits[groups[g][p] as usize] = true;
            }
            let e = m
                .energy(&Assignment::from_bits(bits))
                .unwrap()
                .quarter_units();
            best = best.min(e);
            let mut g = 0;
            loop {
                if g == groups.len() {
                    return best;
                }
                picks[g] += 1;
                if picks[g] < groups[g].len() {
                    break;
                }
                picks[g] = 0;
                g += 1;
            }
        }
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        for seed in 0..8 {
            let inst = small_instance(seed, 3);
            let m = build_qubo(&inst, default_penalties(&inst)).unwrap();
            let result = solve_exact(&m, None, &ExactOptions::default()).unwrap();
            assert!(result.proven_optimal);
            assert_eq!(
                result.best_energy.quarter_units(),
                enumerate_min4(&m),
                "seed {seed}"
            );
            assert!(check_feasible(&inst, &result.best).unwrap().feasible);
            assert_eq!(m.energy(&result.best).unwrap(), result.best_energy);
        }
    }

    #[test]
    fn warm_start_does_not_change_the_optimum() {
        let inst = small_instance(11, 4);
        let m = build_qubo(&inst, default_penalties(&inst)).unwrap();
        let cold = solve_exact(&m, None, &ExactOptions::default()).unwrap();
        let warm_x = solve_greedy(&inst).best;
        let warm = solve_exact(&m, Some(&warm_x), &ExactOptions::default()).unwrap();
        assert_eq!(cold.best_energy, warm.best_energy);
        assert!(warm.stats.branch_nodes <= cold.stats.branch_nodes);
        assert!(warm.best_energy <= solve_greedy(&inst).best_energy);
    }

    #[test]
    fn budget_truncation_keeps_the_incumbent() {
        let inst = small_instance(5, 4);
        let m = build_qubo(&inst, default_penalties(&inst)).unwrap();
        let warm_x = solve_greedy(&inst).best;
        let warm_e = m.energy(&warm_x).unwrap();
        let result = solve_exact(
            &m,
            Some(&warm_x),
            &ExactOptions {
                node_budget: Some(1),
            },
        )
        .unwrap();
        assert!(!result.proven_optimal);
        assert!(result.best_energy <= warm_e);
        // Without an incumbent the truncated search has nothing to report.
        assert!(matches!(
            solve_exact(
                &m,
                None,
                &ExactOptions {
                    node_budget: Some(1)
                }
            ),
            Err(SolverError::BudgetTooSmall)
        ));
    }

    #[test]
    fn handles_negative_couplings_on_bare_models() {
        // Optimum is picks (1, 3): 2 - 2 - 7 + 8 = 1.
        let text = "vars 4 offset 8\n0 0 -4\n1 1 2\n2 2 6\n3 3 -2\n0 2 5\n0 3 3\n1 3 -7\ngroup 0 1\ngroup 2 3\n";
        let m = parse_exchange(text).unwrap();
        let result = solve_exact(&m, None, &ExactOptions::default()).unwrap();
        assert_eq!(result.best_energy.quarter_units(), 1);
        assert_eq!(result.best.bits(), &[false, true, false, true]);
        assert_eq!(result.best_energy.quarter_units(), enumerate_min4(&m));
        // The greedy seed picks variable 0 first and lands higher; exact
        // must beat it from that start too.
        let seed = qubo_greedy(&m).unwrap();
        assert_eq!(m.energy(&seed).unwrap().quarter_units(), 5);
        let warm = solve_exact(&m, Some(&seed), &ExactOptions::default()).unwrap();
        assert_eq!(warm.best_energy.quarter_units(), 1);
    }

    #[test]
    fn rejects_models_without_a_group_partition() {
        let m = parse_exchange("vars 2 offset 0\n0 0 1\n1 1 2\n").unwrap();
        assert!(matches!(
            solve_exact(&m, None, &ExactOptions::default()),
            Err(SolverError::NoGroups)
        ));
        let m = parse_exchange("vars 2 offset 0\n0 0 1\n1 1 2\ngroup 0\n").unwrap();
        assert!(matches!(
            solve_exact(&m, None, &ExactOptions::default()),
            Err(SolverError::GroupsNotPartition { var: 1, count: 0 })
        ));
    }
}

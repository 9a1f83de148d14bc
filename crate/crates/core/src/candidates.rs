//! Candidate route generation.
//!
//! Each AGV gets up to `k` mutually dissimilar base routes toward its goal,
//! which are then cut into planning-horizon prefixes. Every candidate carries
//! the occupancy footprint used for conflict checks: while an AGV occupies a
//! node, every segment entering that node counts as blocked.

use std::collections::HashSet;

use thiserror::Error;

use crate::network::{EdgeId, NodeId, PlantGraph};

/// A transport order between two stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub source: NodeId,
    pub destination: NodeId,
}

/// Planner-facing view of one vehicle: where it is and where its current
/// task sends it.
#[derive(Debug, Clone)]
pub struct AgvState {
    pub id: usize,
    pub current_node: NodeId,
    pub task: Task,
}

#[derive(Debug, Error)]
pub enum CandidateError {
    #[error(
        "plant edges are not uniform in length; the step discretization needs one edge length"
    )]
    NonUniformEdgeLengths,
    #[error("period {period_s} s at {speed_mps} m/s covers no whole segment")]
    HorizonTooShort { period_s: f64, speed_mps: f64 },
    #[error("period and speed must be positive and finite")]
    BadHorizonParameters,
    #[error("agv {agv}: destination {to} is unreachable from {from}")]
    UnreachableDestination {
        agv: usize,
        from: NodeId,
        to: NodeId,
    },
    #[error("route count k must be at least 1")]
    BadRouteCount,
    #[error("dissimilarity threshold must lie in (0, 1], got {0}")]
    BadTheta(f64),
}

/// Discretization of one planning period into unit-edge steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanningHorizon {
    period_s: f64,
    agv_speed_mps: f64,
    t_steps: u32,
}

impl PlanningHorizon {
    /// Derives the step count from the plant's uniform edge length:
    /// `t_steps = floor(period * speed / edge_length)`.
    pub fn for_plant(
        g: &PlantGraph,
        period_s: f64,
        agv_speed_mps: f64,
    ) -> Result<Self, CandidateError> {
        if !period_s.is_finite()
            || !agv_speed_mps.is_finite()
            || period_s <= 0.0
            || agv_speed_mps <= 0.0
        {
            return Err(CandidateError::BadHorizonParameters);
        }
        let edge_mm = g
            .uniform_edge_length_mm()
            .ok_or(CandidateError::NonUniformEdgeLengths)?;
        let t_steps = (period_s * agv_speed_mps * 1000.0 / edge_mm as f64).floor() as i64;
        if t_steps < 1 {
            return Err(CandidateError::HorizonTooShort {
                period_s,
                speed_mps: agv_speed_mps,
            });
        }
        Ok(Self {
            period_s,
            agv_speed_mps,
            t_steps: t_steps as u32,
        })
    }

    pub fn period_s(&self) -> f64 {
        self.period_s
    }

    pub fn agv_speed_mps(&self) -> f64 {
        self.agv_speed_mps
    }

    pub fn t_steps(&self) -> u32 {
        self.t_steps
    }
}

/// Base route selection knobs: how many routes per AGV and how much edge
/// overlap two kept routes may share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateParams {
    pub k: usize,
    pub theta: f64,
}

impl Default for CandidateParams {
    fn default() -> Self {
        Self { k: 3, theta: 0.6 }
    }
}

impl CandidateParams {
    pub fn validate(&self) -> Result<(), CandidateError> {
        if self.k < 1 {
            return Err(CandidateError::BadRouteCount);
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(CandidateError::BadTheta(self.theta));
        }
        Ok(())
    }
}

/// Occupied `(step, edge)` cells of one candidate, encoded as
/// `(step - 1) * n_edges + edge` and kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    cells: Vec<u32>,
}

impl Footprint {
    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, step: u32, edge: EdgeId, n_edges: usize) -> bool {
        debug_assert!(step >= 1);
        let cell = (step - 1) * n_edges as u32 + edge.value();
        self.cells.binary_search(&cell).is_ok()
    }

    pub fn intersects(&self, other: &Footprint) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.cells.len() && j < other.cells.len() {
            match self.cells[i].cmp(&other.cells[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn shared_cells(&self, other: &Footprint) -> usize {
        let (mut i, mut j, mut shared) = (0, 0, 0);
        while i < self.cells.len() && j < other.cells.len() {
            match self.cells[i].cmp(&other.cells[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        shared
    }
}

/// One selectable route prefix for one AGV.
#[derive(Debug, Clone)]
pub struct CandidateRoute {
    pub agv: usize,
    /// Position `j` in the AGV's candidate list.
    pub route_index: usize,
    pub nodes: Vec<NodeId>,
    /// Shortest distance from the route's last node to the task goal, mm.
    pub remaining_mm: i64,
    pub footprint: Footprint,
}

impl CandidateRoute {
    pub fn edge_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_stop(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn end(&self) -> NodeId {
        *self.nodes.last().expect("routes hold at least one node")
    }
}

/// Occupancy cells of a route over a whole period of `t_steps` steps.
///
/// At step `t` the AGV sits on `nodes[min(t, len - 1)]`; every edge whose
/// head is that node is blocked for that step. This covers the traversal
/// steps, the tail of a route that ends early, and the parked stop route
/// with one rule.
pub fn footprint(g: &PlantGraph, nodes: &[NodeId], t_steps: u32) -> Footprint {
    debug_assert!(!nodes.is_empty());
    debug_assert!(nodes.len() as u32 <= t_steps + 1);
    let n_edges = g.n_edges() as u32;
    let last = nodes.len() - 1;
    let mut cells = Vec::new();
    for t in 1..=t_steps {
        let here = nodes[(t as usize).min(last)];
        for &e in g.in_edges(here) {
            cells.push((t - 1) * n_edges + e.value());
        }
    }
    debug_assert!(cells.windows(2).all(|w| w[0] < w[1]));
    Footprint { cells }
}

/// Up to `k` loop-free routes from the AGV's node to its goal, mutually
/// dissimilar under the edge-overlap threshold and ordered by true length
/// (the shortest route always comes first).
///
/// Alternatives are found by repeated shortest-path queries on working
/// lengths: after every produced route its edges are doubled, so later
/// queries are pushed toward unused corridors. A produced route is kept
/// only if its edge overlap with every kept route, measured against the
/// shorter of the two, stays within `theta`. The search stops after `3k`
/// penalized queries.
pub fn base_routes(
    g: &PlantGraph,
    state: &AgvState,
    params: &CandidateParams,
) -> Result<Vec<Vec<NodeId>>, CandidateError> {
    params.validate()?;
    let (from, to) = (state.current_node, state.task.destination);
    let shortest = g
        .shortest_route(from, to)
        .ok_or(CandidateError::UnreachableDestination {
            agv: state.id,
            from,
            to,
        })?;

    let mut working = g.lengths_mm();
    let penalize = |route: &[NodeId], working: &mut [i64]| {
        for pair in route.windows(2) {
            let e = g
                .edge_between(pair[0], pair[1])
                .expect("route steps follow edges");
            working[e.index()] = working[e.index()].saturating_mul(2);
        }
    };

    penalize(&shortest, &mut working);
    let mut kept = vec![shortest];
    let mut attempts = 0;
    while kept.len() < params.k && attempts < 3 * params.k {
        attempts += 1;
        let route = g
            .shortest_route_weighted(from, to, &working)
            .expect("reachability cannot degrade under penalization");
        penalize(&route, &mut working);
        if kept
            .iter()
            .all(|prev| overlap_ratio(g, prev, &route) <= params.theta)
        {
            kept.push(route);
        }
    }

    kept.sort_by_key(|r| route_length_mm(g, r));
    Ok(kept)
}

fn route_length_mm(g: &PlantGraph, route: &[NodeId]) -> i64 {
    route
        .windows(2)
        .map(|pair| {
            let e = g
                .edge_between(pair[0], pair[1])
                .expect("route steps follow edges");
            g.edge(e).length_mm
        })
        .sum()
}

/// Shared edges divided by the edge count of the shorter route. Two
/// edge-less routes count as fully overlapping, so a trivial route is never
/// duplicated.
fn overlap_ratio(g: &PlantGraph, a: &[NodeId], b: &[NodeId]) -> f64 {
    let edge_set = |route: &[NodeId]| -> Vec<EdgeId> {
        let mut edges: Vec<EdgeId> = route
            .windows(2)
            .map(|pair| {
                g.edge_between(pair[0], pair[1])
                    .expect("route steps follow edges")
            })
            .collect();
        edges.sort();
        edges
    };
    let (ea, eb) = (edge_set(a), edge_set(b));
    let shorter = ea.len().min(eb.len());
    if shorter == 0 {
        return 1.0;
    }
    let mut shared = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < ea.len() && j < eb.len() {
        match ea[i].cmp(&eb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared as f64 / shorter as f64
}

/// Horizon prefixes of a base route, longest first, down to the in-place
/// prefix `(v0)`. A route longer than the horizon is cut at `t_steps` edges.
pub fn split_prefixes(route: &[NodeId], h: &PlanningHorizon) -> Vec<Vec<NodeId>> {
    debug_assert!(!route.is_empty());
    let max_edges = (route.len() - 1).min(h.t_steps() as usize);
    (0..=max_edges)
        .rev()
        .map(|edges| route[..=edges].to_vec())
        .collect()
}

/// The full candidate list for one AGV: prefixes of every base route,
/// deduplicated, annotated with remaining distance and footprint, and
/// sorted ascending by (remaining distance, edge count, discovery order).
pub fn build_candidates(
    g: &PlantGraph,
    state: &AgvState,
    h: &PlanningHorizon,
    params: &CandidateParams,
) -> Result<Vec<CandidateRoute>, CandidateError> {
    let bases = base_routes(g, state, params)?;
    let to_goal = g.distances_to(state.task.destination, &g.lengths_mm());

    let mut seen: HashSet<Vec<NodeId>> = HashSet::new();
    let mut routes: Vec<Vec<NodeId>> = Vec::new();
    for base in &bases {
        for prefix in split_prefixes(base, h) {
            if seen.insert(prefix.clone()) {
                routes.push(prefix);
            }
        }
    }

    let mut candidates: Vec<(usize, CandidateRoute)> = routes
        .into_iter()
        .enumerate()
        .map(|(discovery, nodes)| {
            let end = *nodes.last().expect("routes hold at least one node");
            let remaining_mm =
                to_goal[end.index()].expect("prefix ends stay connected to the goal");
            let fp = footprint(g, &nodes, h.t_steps());
            (
                discovery,
                CandidateRoute {
                    agv: state.id,
                    route_index: 0,
                    nodes,
                    remaining_mm,
                    footprint: fp,
                },
            )
        })
        .collect();

    candidates.sort_by_key(|(discovery, c)| (c.remaining_mm, c.nodes.len(), *discovery));
    Ok(candidates
        .into_iter()
        .enumerate()
        .map(|(j, (_, mut c))| {
            c.route_index = j;
            c
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_plant, Edge, NodePoint, PlantGraph, MM_PER_M};

    fn unit(from: u32, to: u32) -> Edge {
        Edge {
            from: NodeId::new(from),
            to: NodeId::new(to),
            length_mm: MM_PER_M,
        }
    }

    fn points(n: usize) -> Vec<NodePoint> {
        vec![NodePoint { x: 0.0, y: 0.0 }; n]
    }

    /// a -> b -> c line; ids 0, 1, 2.
    fn line3() -> PlantGraph {
        PlantGraph::new(
            points(3),
            vec![unit(0, 1), unit(1, 2)],
            vec![NodeId::new(0)],
        )
        .unwrap()
    }

    fn horizon(g: &PlantGraph, t_steps: u32) -> PlanningHorizon {
        // 1 m edges at 0.5 m/s: one step takes 2 s.
        PlanningHorizon::for_plant(g, 2.0 * t_steps as f64, 0.5).unwrap()
    }

    fn state(id: usize, at: u32, to: u32) -> AgvState {
        AgvState {
            id,
            current_node: NodeId::new(at),
            task: Task {
                source: NodeId::new(at),
                destination: NodeId::new(to),
            },
        }
    }

    #[test]
    fn horizon_counts_whole_edges() {
        let g = line3();
        let h = PlanningHorizon::for_plant(&g, 8.0, 0.5).unwrap();
        assert_eq!(h.t_steps(), 4);
        let h = PlanningHorizon::for_plant(&g, 7.9, 0.5).unwrap();
        assert_eq!(h.t_steps(), 3);
        assert!(matches!(
            PlanningHorizon::for_plant(&g, 1.0, 0.5),
            Err(CandidateError::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn non_uniform_edges_are_rejected() {
        let g = PlantGraph::new(
            points(3),
            vec![
                unit(0, 1),
                Edge {
                    from: NodeId::new(1),
                    to: NodeId::new(2),
                    length_mm: 2 * MM_PER_M,
                },
            ],
            vec![NodeId::new(0)],
        )
        .unwrap();
        assert!(matches!(
            PlanningHorizon::for_plant(&g, 8.0, 0.5),
            Err(CandidateError::NonUniformEdgeLengths)
        ));
    }

    #[test]
    fn line_candidates_cover_all_prefixes() {
        let g = line3();
        let h = horizon(&g, 2);
        let cands = build_candidates(&g, &state(0, 0, 2), &h, &CandidateParams::default()).unwrap();
        assert_eq!(cands.len(), 3);
        let as_tuples: Vec<(Vec<u32>, i64)> = cands
            .iter()
            .map(|c| (c.nodes.iter().map(|n| n.value()).collect(), c.remaining_mm))
            .collect();
        assert_eq!(
            as_tuples,
            vec![(vec![0, 1, 2], 0), (vec![0, 1], 1000), (vec![0], 2000),]
        );
        for (j, c) in cands.iter().enumerate() {
            assert_eq!(c.route_index, j);
        }
    }

    #[test]
    fn prefix_split_is_longest_first() {
        let route: Vec<NodeId> = (0..6).map(NodeId::new).collect();
        let g = {
            let edges = (0..5).map(|i| unit(i, i + 1)).collect();
            PlantGraph::new(points(6), edges, vec![NodeId::new(0)]).unwrap()
        };
        let h = horizon(&g, 3);
        let prefixes = split_prefixes(&route, &h);
        assert_eq!(prefixes.len(), 4);
        assert_eq!(prefixes[0].len(), 4);
        assert_eq!(prefixes[3], vec![NodeId::new(0)]);
    }

    #[test]
    fn footprint_blocks_every_edge_into_the_head() {
        let g = line3();
        let route = [NodeId::new(0), NodeId::new(1)];
        let fp = footprint(&g, &route, 1);
        let ab = g.edge_between(NodeId::new(0), NodeId::new(1)).unwrap();
        assert_eq!(fp.len(), 1);
        assert!(fp.contains(1, ab, g.n_edges()));

        // With another segment x -> b, traversing a -> b blocks that one too.
        let g = PlantGraph::new(
            points(4),
            vec![unit(0, 1), unit(1, 2), unit(3, 1)],
            vec![NodeId::new(0)],
        )
        .unwrap();
        let fp = footprint(&g, &route, 1);
        let ab = g.edge_between(NodeId::new(0), NodeId::new(1)).unwrap();
        let xb = g.edge_between(NodeId::new(3), NodeId::new(1)).unwrap();
        assert_eq!(fp.len(), 2);
        assert!(fp.contains(1, ab, g.n_edges()));
        assert!(fp.contains(1, xb, g.n_edges()));
    }

    #[test]
    fn stop_route_blocks_all_steps() {
        let g = line3();
        let fp = footprint(&g, &[NodeId::new(1)], 3);
        let ab = g.edge_between(NodeId::new(0), NodeId::new(1)).unwrap();
        for t in 1..=3 {
            assert!(fp.contains(t, ab, g.n_edges()));
        }
        assert_eq!(fp.len(), 3);
    }

    #[test]
    fn short_route_blocks_its_tail() {
        // Ending after one step of a two-step horizon keeps the end node
        // blocked for the remaining step.
        let g = line3();
        let fp = footprint(&g, &[NodeId::new(0), NodeId::new(1)], 2);
        let ab = g.edge_between(NodeId::new(0), NodeId::new(1)).unwrap();
        assert!(fp.contains(1, ab, g.n_edges()));
        assert!(fp.contains(2, ab, g.n_edges()));
    }

    #[test]
    fn prefix_traversal_cells_nest() {
        let g = generate_plant(4, 5, 7).unwrap();
        let from = NodeId::new(0);
        let to = *g.stations().last().unwrap();
        let route = g.shortest_route(from, to).unwrap();
        let h = horizon(&g, 3);
        let prefixes = split_prefixes(&route, &h);
        for pair in prefixes.windows(2) {
            let longer = &pair[0];
            let shorter = &pair[1];
            let long_fp = footprint(&g, longer, h.t_steps());
            // Traversal cells of the shorter prefix (steps it actually
            // moves) must appear in the longer prefix's footprint too.
            let short_moves = shorter.len() - 1;
            let partial = footprint(&g, shorter, short_moves as u32);
            for &cell in partial.cells() {
                assert!(long_fp.cells().binary_search(&cell).is_ok());
            }
        }
    }

    #[test]
    fn at_goal_yields_single_stop_candidate() {
        let g = line3();
        let h = horizon(&g, 2);
        let cands = build_candidates(&g, &state(0, 2, 2), &h, &CandidateParams::default()).unwrap();
        assert_eq!(cands.len(), 1);
        assert!(cands[0].is_stop());
        assert_eq!(cands[0].remaining_mm, 0);
    }

    #[test]
    fn unreachable_goal_is_an_error() {
        let g = line3();
        let h = horizon(&g, 2);
        let res = build_candidates(&g, &state(0, 2, 0), &h, &CandidateParams::default());
        assert!(matches!(
            res,
            Err(CandidateError::UnreachableDestination { .. })
        ));
    }

    #[test]
    fn diamond_yields_two_disjoint_base_routes() {
        // 0 -> {1, 3} -> 2, equal lengths, theta 0.5.
        let g = PlantGraph::new(
            points(4),
            vec![unit(0, 1), unit(1, 2), unit(0, 3), unit(3, 2)],
            vec![NodeId::new(0)],
        )
        .unwrap();
        let params = CandidateParams { k: 2, theta: 0.5 };
        let routes = base_routes(&g, &state(0, 0, 2), &params).unwrap();
        assert_eq!(routes.len(), 2);
        assert_eq!(routes[0][1], NodeId::new(1));
        assert_eq!(routes[1][1], NodeId::new(3));
    }

    #[test]
    fn base_routes_respect_overlap_threshold() {
        let g = generate_plant(5, 6, 11).unwrap();
        let params = CandidateParams::default();
        let stations = g.stations();
        let st = state(0, stations[0].value(), stations[4].value());
        let routes = base_routes(&g, &st, &params).unwrap();
        assert!(!routes.is_empty() && routes.len() <= params.k);
        for i in 0..routes.len() {
            for j in i + 1..routes.len() {
                assert!(overlap_ratio(&g, &routes[i], &routes[j]) <= params.theta + 1e-12);
            }
        }
        // Routes are simple (loop-free).
        for r in &routes {
            let mut nodes = r.clone();
            nodes.sort();
            nodes.dedup();
            assert_eq!(nodes.len(), r.len());
        }
        // Ordered by length, shortest first.
        let lengths: Vec<i64> = routes.iter().map(|r| route_length_mm(&g, r)).collect();
        assert!(lengths.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(
            lengths[0],
            g.shortest_distance(st.current_node, st.task.destination)
                .unwrap()
        );
    }

    #[test]
    fn candidate_count_stays_within_bound() {
        let g = generate_plant(6, 7, 2).unwrap();
        let h = horizon(&g, 4);
        let params = CandidateParams::default();
        let stations = g.stations();
        for (i, &s) in stations.iter().take(6).enumerate() {
            let goal = stations[(i + 5) % stations.len()];
            if goal == s {
                continue;
            }
            let cands =
                build_candidates(&g, &state(i, s.value(), goal.value()), &h, &params).unwrap();
            assert!(!cands.is_empty());
            assert!(cands.len() <= params.k * (h.t_steps() as usize + 1));
            // Exactly one stop candidate survives deduplication.
            assert_eq!(cands.iter().filter(|c| c.is_stop()).count(), 1);
            // Sorted ascending by remaining distance.
            assert!(cands
                .windows(2)
                .all(|w| w[0].remaining_mm <= w[1].remaining_mm));
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        #[test]
        fn remaining_distance_is_consistent(
            rows in 3usize..6,
            cols in 3usize..6,
            seed in 0u64..500,
            pick in 0usize..64,
        ) {
            let g = generate_plant(rows, cols, seed).unwrap();
            let h = horizon(&g, 3);
            let stations = g.stations();
            let from = stations[pick % stations.len()];
            let to = stations[(pick / stations.len() + 1 + pick) % stations.len()];
            if from == to {
                return Ok(());
            }
            let st = state(0, from.value(), to.value());
            let cands = build_candidates(&g, &st, &h, &CandidateParams::default()).unwrap();
            let direct = g.shortest_distance(from, to).unwrap();
            for c in &cands {
                // d* equals the true shortest distance from the prefix end.
                proptest::prop_assert_eq!(
                    Some(c.remaining_mm),
                    g.shortest_distance(c.end(), to)
                );
                // Moving along any prefix saves at most its own step count.
                let steps_mm = c.edge_count() as i64 * MM_PER_M;
                proptest::prop_assert!(c.remaining_mm >= direct - steps_mm);
            }
        }
    }
}

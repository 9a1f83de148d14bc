//! Routing instances and their QUBO / Ising models.
//!
//! One binary variable per (AGV, candidate route). The cost of a selection
//! is the summed remaining distance; one-hot and occupancy constraints are
//! added as quadratic penalties. The half-shift in the occupancy penalty
//! makes raw energies quarter-integers, so all energies are stored as `4x`
//! the model value and stay exact in `i64`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::ops::{Add, AddAssign, Neg, Sub};
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::candidates::{
    build_candidates, AgvState, CandidateError, CandidateParams, CandidateRoute, PlanningHorizon,
};
use crate::network::{EdgeId, NodeId, PlantGraph};

/// Exact model energy. The stored integer is four times the nominal value;
/// [`Energy::from_units`] and [`Energy::to_f64`] convert at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Energy(i64);

impl Energy {
    pub const ZERO: Energy = Energy(0);

    /// An energy of `units` whole distance units (millimeters).
    pub const fn from_units(units: i64) -> Self {
        Energy(units * 4)
    }

    pub const fn from_quarter_units(quarters: i64) -> Self {
        Energy(quarters)
    }

    pub const fn quarter_units(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 4.0
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        self.0 += rhs.0;
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl Neg for Energy {
    type Output = Energy;
    fn neg(self) -> Energy {
        Energy(-self.0)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0.div_euclid(4);
        let frac = self.0.rem_euclid(4);
        match frac {
            0 => write!(f, "{whole}.0"),
            1 => write!(f, "{whole}.25"),
            2 => write!(f, "{whole}.5"),
            _ => write!(f, "{whole}.75"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Candidates(#[from] CandidateError),
    #[error("no AGVs in instance")]
    NoAgvs,
    #[error("agvs {a} and {b} share node {node}")]
    SharedNode { a: usize, b: usize, node: NodeId },
    #[error("agv {agv}: task endpoint {node} is not a station")]
    NotAStation { agv: usize, node: NodeId },
    #[error("agv {agv}: task source equals destination")]
    DegenerateTask { agv: usize },
    #[error("penalties must be positive, got a={a} b={b}")]
    BadPenalties { a: i64, b: i64 },
    #[error("assignment selects {selected} routes for agv {agv}; expected exactly one")]
    NotOneHot { agv: usize, selected: usize },
    #[error("assignment has {got} bits, model has {expected} variables")]
    WrongWidth { expected: usize, got: usize },
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// The per-period routing problem: every AGV's candidate list plus the
/// variable numbering shared by all models and solvers.
#[derive(Debug, Clone)]
pub struct RoutingInstance {
    agvs: Vec<AgvState>,
    horizon: PlanningHorizon,
    n_edges: usize,
    candidates: Vec<Vec<CandidateRoute>>,
    var_offsets: Vec<usize>,
    var_index: Vec<(u32, u32)>,
    explore_order: Vec<Vec<u32>>,
    coverable_cells: u64,
}

impl RoutingInstance {
    pub fn n_agvs(&self) -> usize {
        self.agvs.len()
    }

    pub fn n_vars(&self) -> usize {
        self.var_index.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn horizon(&self) -> &PlanningHorizon {
        &self.horizon
    }

    pub fn agvs(&self) -> &[AgvState] {
        &self.agvs
    }

    pub fn candidates(&self, agv: usize) -> &[CandidateRoute] {
        &self.candidates[agv]
    }

    pub fn candidate(&self, agv: usize, j: usize) -> &CandidateRoute {
        &self.candidates[agv][j]
    }

    /// Flat variable index of candidate `j` of `agv`.
    pub fn var(&self, agv: usize, j: usize) -> usize {
        self.var_offsets[agv] + j
    }

    /// `(agv, j)` behind a flat variable index.
    pub fn var_info(&self, var: usize) -> (usize, usize) {
        let (agv, j) = self.var_index[var];
        (agv as usize, j as usize)
    }

    /// Candidate positions of one AGV in greedy exploration order:
    /// ascending remaining distance, with the stop route moved last so the
    /// conflict-free all-stop selection is always the final fallback.
    pub fn explore_order(&self, agv: usize) -> &[u32] {
        &self.explore_order[agv]
    }

    /// Number of `(edge, step)` pairs covered by at least one candidate.
    pub fn coverable_cells(&self) -> u64 {
        self.coverable_cells
    }

    /// Map of coverable cells to the flat variables covering them.
    pub fn cell_cover(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut cover: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (agv, cands) in self.candidates.iter().enumerate() {
            for (j, c) in cands.iter().enumerate() {
                let var = self.var(agv, j) as u32;
                for &cell in c.footprint.cells() {
                    cover.entry(cell).or_default().push(var);
                }
            }
        }
        cover
    }

    pub fn decode_cell(&self, cell: u32) -> (u32, EdgeId) {
        let step = cell / self.n_edges as u32 + 1;
        let edge = EdgeId::new(cell % self.n_edges as u32);
        (step, edge)
    }
}

/// Builds the instance for one planning period.
///
/// AGVs must stand on distinct nodes and carry station-to-station tasks
/// with reachable goals.
pub fn build_instance(
    g: &PlantGraph,
    states: &[AgvState],
    h: &PlanningHorizon,
    params: &CandidateParams,
) -> Result<RoutingInstance, ModelError> {
    if states.is_empty() {
        return Err(ModelError::NoAgvs);
    }
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            if a.current_node == b.current_node {
                return Err(ModelError::SharedNode {
                    a: a.id,
                    b: b.id,
                    node: a.current_node,
                });
            }
        }
        for node in [a.task.source, a.task.destination] {
            if !g.is_station(node) {
                return Err(ModelError::NotAStation { agv: a.id, node });
            }
        }
        if a.task.source == a.task.destination {
            return Err(ModelError::DegenerateTask { agv: a.id });
        }
    }

    let mut candidates = Vec::with_capacity(states.len());
    for state in states {
        candidates.push(build_candidates(g, state, h, params)?);
    }

    let mut var_offsets = Vec::with_capacity(states.len());
    let mut var_index = Vec::new();
    for (agv, cands) in candidates.iter().enumerate() {
        var_offsets.push(var_index.len());
        for j in 0..cands.len() {
            var_index.push((agv as u32, j as u32));
        }
    }

    let explore_order = candidates
        .iter()
        .map(|cands| {
            let mut order: Vec<u32> = (0..cands.len() as u32).collect();
            // Lists are sorted ascending already; only the stop moves back.
            order.sort_by_key(|&j| {
                let c = &cands[j as usize];
                (c.is_stop(), j)
            });
            order
        })
        .collect();

    let mut cells: Vec<u32> = candidates
        .iter()
        .flat_map(|cands| {
            cands
                .iter()
                .flat_map(|c| c.footprint.cells().iter().copied())
        })
        .collect();
    cells.sort_unstable();
    cells.dedup();

    Ok(RoutingInstance {
        agvs: states.to_vec(),
        horizon: *h,
        n_edges: g.n_edges(),
        candidates,
        var_offsets,
        var_index,
        explore_order,
        coverable_cells: cells.len() as u64,
    })
}

/// One binary vector over the instance's variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    /// One-hot assignment selecting candidate `choices[i]` for AGV `i`.
    pub fn from_choices(inst: &RoutingInstance, choices: &[usize]) -> Self {
        let mut bits = vec![false; inst.n_vars()];
        for (agv, &j) in choices.iter().enumerate() {
            bits[inst.var(agv, j)] = true;
        }
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, var: usize) -> bool {
        self.bits[var]
    }

    pub fn set(&mut self, var: usize, value: bool) {
        self.bits[var] = value;
    }

    /// Selected candidate per AGV, or an error for the first AGV whose
    /// selection is not exactly one route.
    pub fn choices(&self, inst: &RoutingInstance) -> Result<Vec<usize>, ModelError> {
        let mut choices = Vec::with_capacity(inst.n_agvs());
        for agv in 0..inst.n_agvs() {
            let m = inst.candidates(agv).len();
            let selected: Vec<usize> = (0..m).filter(|&j| self.bits[inst.var(agv, j)]).collect();
            if selected.len() != 1 {
                return Err(ModelError::NotOneHot {
                    agv,
                    selected: selected.len(),
                });
            }
            choices.push(selected[0]);
        }
        Ok(choices)
    }
}

/// One constraint violation found by [`check_feasible`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    RouteCount {
        agv: usize,
        selected: usize,
    },
    Occupancy {
        step: u32,
        edge: EdgeId,
        vars: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn feasible() -> Self {
        Self {
            feasible: true,
            violations: Vec::new(),
        }
    }
}

/// Checks the hard constraints: exactly one route per AGV and every
/// occupancy cell covered at most once.
pub fn check_feasible(inst: &RoutingInstance, x: &Assignment) -> Result<Feasibility, ModelError> {
    if x.len() != inst.n_vars() {
        return Err(ModelError::WrongWidth {
            expected: inst.n_vars(),
            got: x.len(),
        });
    }
    let mut violations = Vec::new();
    for agv in 0..inst.n_agvs() {
        let selected = (0..inst.candidates(agv).len())
            .filter(|&j| x.get(inst.var(agv, j)))
            .count();
        if selected != 1 {
            violations.push(Violation::RouteCount { agv, selected });
        }
    }
    let mut covered: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (var, &bit) in x.bits().iter().enumerate() {
        if !bit {
            continue;
        }
        let (agv, j) = inst.var_info(var);
        for &cell in inst.candidate(agv, j).footprint.cells() {
            covered.entry(cell).or_default().push(var as u32);
        }
    }
    for (cell, vars) in covered {
        if vars.len() > 1 {
            let (step, edge) = inst.decode_cell(cell);
            violations.push(Violation::Occupancy { step, edge, vars });
        }
    }
    Ok(Feasibility {
        feasible: violations.is_empty(),
        violations,
    })
}

/// Remaining-distance objective of a one-hot assignment, in millimeters.
pub fn milp_objective(inst: &RoutingInstance, x: &Assignment) -> Result<i64, ModelError> {
    if x.len() != inst.n_vars() {
        return Err(ModelError::WrongWidth {
            expected: inst.n_vars(),
            got: x.len(),
        });
    }
    let choices = x.choices(inst)?;
    Ok(choices
        .iter()
        .enumerate()
        .map(|(agv, &j)| inst.candidate(agv, j).remaining_mm)
        .sum())
}

/// Penalty weights for the one-hot (`a`) and occupancy (`b`) terms, in
/// whole distance units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Penalties {
    pub a: i64,
    pub b: i64,
}

/// Default penalties: one more than the largest possible objective value,
/// which is enough for every constraint violation to cost more than any
/// feasible detour can save.
pub fn default_penalties(inst: &RoutingInstance) -> Penalties {
    let bound: i64 = (0..inst.n_agvs())
        .map(|agv| {
            inst.candidates(agv)
                .iter()
                .map(|c| c.remaining_mm)
                .max()
                .unwrap_or(0)
        })
        .sum();
    Penalties {
        a: bound + 1,
        b: bound + 1,
    }
}

/// Upper-triangular QUBO over the instance's variables.
///
/// Coefficients and offset are stored in quarter units (see [`Energy`]);
/// with integer distances and penalties everything here is exact.
#[derive(Debug, Clone)]
pub struct QuboModel {
    n: usize,
    diag4: Vec<i64>,
    pairs4: Vec<(u32, u32, i64)>,
    neighbors: Vec<Vec<(u32, i64)>>,
    offset4: i64,
    penalties: Option<Penalties>,
    coverable_cells: u64,
    groups: Vec<Vec<u32>>,
    instance: Option<Arc<RoutingInstance>>,
}

impl QuboModel {
    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn diagonal4(&self) -> &[i64] {
        &self.diag4
    }

    pub fn pairs4(&self) -> &[(u32, u32, i64)] {
        &self.pairs4
    }

    /// Symmetric adjacency: for each variable, its coupled partners and the
    /// quarter-unit coupling strength.
    pub fn neighbors(&self, var: usize) -> &[(u32, i64)] {
        &self.neighbors[var]
    }

    pub fn offset4(&self) -> i64 {
        self.offset4
    }

    pub fn penalties(&self) -> Option<Penalties> {
        self.penalties
    }

    /// Number of coverable `(edge, step)` cells, `P`.
    pub fn coverable_cells(&self) -> u64 {
        self.coverable_cells
    }

    /// The constant `b * P / 4` carried by every assignment with single
    /// coverage; feasible energies exceed the remaining-distance objective
    /// by exactly this amount.
    pub fn occupancy_offset(&self) -> Option<Energy> {
        self.penalties
            .map(|p| Energy::from_quarter_units(p.b * self.coverable_cells as i64))
    }

    /// One-hot variable groups, one per AGV.
    pub fn groups(&self) -> &[Vec<u32>] {
        &self.groups
    }

    pub fn instance(&self) -> Option<&Arc<RoutingInstance>> {
        self.instance.as_ref()
    }

    /// Exact energy of a binary vector.
    pub fn energy(&self, x: &Assignment) -> Result<Energy, ModelError> {
        if x.len() != self.n {
            return Err(ModelError::WrongWidth {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut e = self.offset4;
        for (v, &bit) in x.bits().iter().enumerate() {
            if bit {
                e += self.diag4[v];
            }
        }
        for &(v, w, q) in &self.pairs4 {
            if x.get(v as usize) && x.get(w as usize) {
                e += q;
            }
        }
        Ok(Energy::from_quarter_units(e))
    }
}

/// Exact energy of `x` under `m`; see [`QuboModel::energy`].
pub fn qubo_energy(m: &QuboModel, x: &Assignment) -> Result<Energy, ModelError> {
    m.energy(x)
}

/// Builds the QUBO for an instance.
///
/// Expanding the squared penalties gives, in quarter units:
/// diagonal `4(d* - a)`; `8a` between two routes of the same AGV; `8b` per
/// occupancy cell shared by two routes; offset `4aN + bP`. Cells no
/// candidate covers are dropped; `P` counts coverable cells only.
pub fn build_qubo(inst: &Arc<RoutingInstance>, p: Penalties) -> Result<QuboModel, ModelError> {
    if p.a <= 0 || p.b <= 0 {
        return Err(ModelError::BadPenalties { a: p.a, b: p.b });
    }
    let n = inst.n_vars();
    let mut diag4 = vec![0i64; n];
    for (v, d) in diag4.iter_mut().enumerate() {
        let (agv, j) = inst.var_info(v);
        *d = 4 * (inst.candidate(agv, j).remaining_mm - p.a);
    }

    let mut pairs: BTreeMap<(u32, u32), i64> = BTreeMap::new();
    for agv in 0..inst.n_agvs() {
        let m = inst.candidates(agv).len();
        for j in 0..m {
            for j2 in j + 1..m {
                let key = (inst.var(agv, j) as u32, inst.var(agv, j2) as u32);
                *pairs.entry(key).or_insert(0) += 8 * p.a;
            }
        }
    }
    let cover = inst.cell_cover();
    for vars in cover.values() {
        for (i, &v) in vars.iter().enumerate() {
            for &w in &vars[i + 1..] {
                let key = if v < w { (v, w) } else { (w, v) };
                *pairs.entry(key).or_insert(0) += 8 * p.b;
            }
        }
    }

    let offset4 = 4 * p.a * inst.n_agvs() as i64 + p.b * inst.coverable_cells() as i64;
    let pairs4: Vec<(u32, u32, i64)> = pairs.into_iter().map(|((v, w), q)| (v, w, q)).collect();
    let groups = (0..inst.n_agvs())
        .map(|agv| {
            (0..inst.candidates(agv).len())
                .map(|j| inst.var(agv, j) as u32)
                .collect()
        })
        .collect();

    Ok(QuboModel {
        n,
        neighbors: build_neighbors(n, &pairs4),
        diag4,
        pairs4,
        offset4,
        penalties: Some(p),
        coverable_cells: inst.coverable_cells(),
        groups,
        instance: Some(Arc::clone(inst)),
    })
}

fn build_neighbors(n: usize, pairs4: &[(u32, u32, i64)]) -> Vec<Vec<(u32, i64)>> {
    let mut neighbors = vec![Vec::new(); n];
    for &(v, w, q) in pairs4 {
        neighbors[v as usize].push((w, q));
        neighbors[w as usize].push((v, q));
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }
    neighbors
}

/// Ising form of a QUBO under `q = (1 + s) / 2`.
///
/// Fields are quarter-unit values divided by powers of two, which `f64`
/// represents exactly, so energies still compare exactly.
#[derive(Debug, Clone)]
pub struct IsingModel {
    pub h: Vec<f64>,
    pub couplings: Vec<(u32, u32, f64)>,
    pub offset: f64,
}

impl IsingModel {
    pub fn n_vars(&self) -> usize {
        self.h.len()
    }

    /// Energy `-sum h_i s_i - sum J_ij s_i s_j + offset` in quarter units.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        debug_assert_eq!(spins.len(), self.h.len());
        let mut e = self.offset;
        for (v, &h) in self.h.iter().enumerate() {
            e -= h * spins[v] as f64;
        }
        for &(v, w, j) in &self.couplings {
            e -= j * spins[v as usize] as f64 * spins[w as usize] as f64;
        }
        e
    }
}

pub fn to_ising(m: &QuboModel) -> IsingModel {
    let mut h = vec![0.0f64; m.n_vars()];
    let mut offset = m.offset4() as f64;
    for (v, &d) in m.diagonal4().iter().enumerate() {
        h[v] -= d as f64 / 2.0;
        offset += d as f64 / 2.0;
    }
    let mut couplings = Vec::with_capacity(m.pairs4().len());
    for &(v, w, q) in m.pairs4() {
        let quarter = q as f64 / 4.0;
        couplings.push((v, w, -quarter));
        h[v as usize] -= quarter;
        h[w as usize] -= quarter;
        offset += quarter;
    }
    IsingModel {
        h,
        couplings,
        offset,
    }
}

pub fn spins_of(x: &Assignment) -> Vec<i8> {
    x.bits().iter().map(|&b| if b { 1 } else { -1 }).collect()
}

/// Serializes a model to the exchange text format.
///
/// Header `vars <n> offset <quarter-units>`, one `i j value` line per
/// nonzero coefficient in row-major order, then one `group` line per AGV
/// listing its variables. All values are quarter units.
pub fn to_exchange_string(m: &QuboModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("vars {} offset {}\n", m.n_vars(), m.offset4()));
    let mut rows: BTreeMap<(u32, u32), i64> = BTreeMap::new();
    for (v, &d) in m.diagonal4().iter().enumerate() {
        if d != 0 {
            rows.insert((v as u32, v as u32), d);
        }
    }
    for &(v, w, q) in m.pairs4() {
        if q != 0 {
            rows.insert((v, w), q);
        }
    }
    for ((v, w), q) in rows {
        out.push_str(&format!("{v} {w} {q}\n"));
    }
    for group in m.groups() {
        out.push_str("group");
        for &v in group {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_exchange(text: &str) -> Result<QuboModel, ModelError> {
    let err = |line: usize, message: &str| ModelError::Parse {
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "vars" || parts[2] != "offset" {
        return Err(err(1, "expected header `vars <n> offset <value>`"));
    }
    let n: usize = parts[1]
        .parse()
        .map_err(|_| err(1, "variable count is not an integer"))?;
    let offset4: i64 = parts[3]
        .parse()
        .map_err(|_| err(1, "offset is not an integer"))?;

    let mut diag4 = vec![0i64; n];
    let mut pairs: BTreeMap<(u32, u32), i64> = BTreeMap::new();
    let mut groups: Vec<Vec<u32>> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "group" {
            let mut group = Vec::with_capacity(fields.len() - 1);
            for f in &fields[1..] {
                let v: u32 = f
                    .parse()
                    .map_err(|_| err(line_no, "group member is not an integer"))?;
                if v as usize >= n {
                    return Err(err(line_no, "group member is out of range"));
                }
                group.push(v);
            }
            groups.push(group);
            continue;
        }
        if fields.len() != 3 {
            return Err(err(line_no, "expected `i j value`"));
        }
        let i: u32 = fields[0]
            .parse()
            .map_err(|_| err(line_no, "row index is not an integer"))?;
        let j: u32 = fields[1]
            .parse()
            .map_err(|_| err(line_no, "column index is not an integer"))?;
        let q: i64 = fields[2]
            .parse()
            .map_err(|_| err(line_no, "value is not an integer"))?;
        if i > j {
            return Err(err(line_no, "entries must satisfy i <= j"));
        }
        if j as usize >= n {
            return Err(err(line_no, "index is out of range"));
        }
        if i == j {
            if diag4[i as usize] != 0 {
                return Err(err(line_no, "duplicate diagonal entry"));
            }
            diag4[i as usize] = q;
        } else if pairs.insert((i, j), q).is_some() {
            return Err(err(line_no, "duplicate off-diagonal entry"));
        }
    }

    let pairs4: Vec<(u32, u32, i64)> = pairs.into_iter().map(|((v, w), q)| (v, w, q)).collect();
    Ok(QuboModel {
        n,
        neighbors: build_neighbors(n, &pairs4),
        diag4,
        pairs4,
        offset4,
        penalties: None,
        coverable_cells: 0,
        groups,
        instance: None,
    })
}

pub fn export_qubo(m: &QuboModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    fs::write(path, to_exchange_string(m)).map_err(|source| ModelError::Write {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_qubo(path: impl AsRef<Path>) -> Result<QuboModel, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_exchange(&text)
}

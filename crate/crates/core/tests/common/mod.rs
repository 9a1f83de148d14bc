//! Independent oracles shared by the integration tests: a from-scratch
//! penalty-energy evaluator, an exhaustive one-hot minimizer, a step-log
//! safety auditor, and tie-aware rank correlation. Everything here is
//! written against the public API only and deliberately avoids the
//! library's own matrix construction and search code, so agreement is
//! meaningful.
#![allow(dead_code)]

use std::collections::HashMap;

use agvroute::model::{Assignment, Penalties, RoutingInstance};
use agvroute::network::{NodeId, PlantGraph};

/// Objective plus quadratic penalties, evaluated directly from the
/// instance data in quarter units: 4·Σ d*·q plus 4a·Σ(Σq − 1)² per
/// vehicle plus b·(4c² − 4c + 1) per coverable cell with cover count c.
pub fn penalty_energy4(inst: &RoutingInstance, p: Penalties, x: &Assignment) -> i64 {
    let mut e4: i64 = 0;
    for agv in 0..inst.n_agvs() {
        let mut picked: i64 = 0;
        for (j, cand) in inst.candidates(agv).iter().enumerate() {
            if x.get(inst.var(agv, j)) {
                picked += 1;
                e4 += 4 * cand.remaining_mm;
            }
        }
        e4 += 4 * p.a * (picked - 1) * (picked - 1);
    }
    for vars in inst.cell_cover().values() {
        let c = vars.iter().filter(|&&v| x.get(v as usize)).count() as i64;
        e4 += p.b * (4 * c * c - 4 * c + 1);
    }
    e4
}

/// Minimum penalty energy over every one-hot assignment (exactly one
/// candidate per vehicle), by plain nested enumeration with incremental
/// cell counts. Raising a cell's cover count from c to c+1 adds 8·b·c in
/// quarter units, so the walk stays in exact integer arithmetic.
pub fn one_hot_minimum4(inst: &RoutingInstance, p: Penalties) -> i64 {
    let cover = inst.cell_cover();
    let cell_index: HashMap<u32, usize> = cover.keys().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut cells_of_var: Vec<Vec<usize>> = vec![Vec::new(); inst.n_vars()];
    for (cell, vars) in &cover {
        for &v in vars {
            cells_of_var[v as usize].push(cell_index[cell]);
        }
    }
    let mut counts = vec![0i64; cover.len()];
    // Every coverable cell starts uncovered, contributing b each.
    let base = p.b * inst.coverable_cells() as i64;
    let mut best = i64::MAX;
    fn walk(
        inst: &RoutingInstance,
        p: Penalties,
        cells_of_var: &[Vec<usize>],
        counts: &mut [i64],
        agv: usize,
        running: i64,
        best: &mut i64,
    ) {
        if agv == inst.n_agvs() {
            *best = (*best).min(running);
            return;
        }
        for (j, cand) in inst.candidates(agv).iter().enumerate() {
            let v = inst.var(agv, j);
            let mut e = running + 4 * cand.remaining_mm;
            for &c in &cells_of_var[v] {
                e += 8 * p.b * counts[c];
                counts[c] += 1;
            }
            walk(inst, p, cells_of_var, counts, agv + 1, e, best);
            for &c in &cells_of_var[v] {
                counts[c] -= 1;
            }
        }
    }
    walk(inst, p, &cells_of_var, &mut counts, 0, base, &mut best);
    best
}

/// What the safety audit of one step log found.
#[derive(Debug, Default, Clone, Copy)]
pub struct AuditReport {
    pub steps: u64,
    pub moves: u64,
    /// Two vehicles on the same node after a step.
    pub node_conflicts: u64,
    /// Two vehicles entering the same node within one step.
    pub head_entry_conflicts: u64,
    /// Moves along node pairs with no directed edge.
    pub bad_edges: u64,
    /// Records whose `from` disagrees with the tracked position.
    pub teleports: u64,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.node_conflicts == 0
            && self.head_entry_conflicts == 0
            && self.bad_edges == 0
            && self.teleports == 0
    }
}

/// Replays an NDJSON step log against the plant, tracking every
/// vehicle's position and counting safety violations. Steps need not be
/// contiguous in the file; records are grouped by their step field.
pub fn audit_step_log(log: &str, g: &PlantGraph) -> AuditReport {
    #[derive(serde::Deserialize)]
    struct Rec {
        step: u64,
        agv: usize,
        from: u32,
        to: Option<u32>,
        event: String,
    }
    let mut by_step: std::collections::BTreeMap<u64, Vec<Rec>> = Default::default();
    for line in log.lines().filter(|l| !l.trim().is_empty()) {
        let rec: Rec = serde_json::from_str(line).expect("step log line parses");
        by_step.entry(rec.step).or_default().push(rec);
    }
    let mut report = AuditReport::default();
    let mut pos: HashMap<usize, u32> = HashMap::new();
    for (_, recs) in by_step {
        report.steps += 1;
        let mut entered: HashMap<u32, u64> = HashMap::new();
        for rec in &recs {
            match pos.get(&rec.agv) {
                Some(&at) if at != rec.from => report.teleports += 1,
                Some(_) => {}
                None => {
                    pos.insert(rec.agv, rec.from);
                }
            }
            if rec.event == "move" {
                report.moves += 1;
                let to = rec.to.expect("move has a target");
                if g.edge_between(NodeId::new(rec.from), NodeId::new(to))
                    .is_none()
                {
                    report.bad_edges += 1;
                }
                *entered.entry(to).or_insert(0) += 1;
                pos.insert(rec.agv, to);
            }
        }
        report.head_entry_conflicts += entered.values().filter(|&&n| n > 1).count() as u64;
        let mut seen: HashMap<u32, u64> = HashMap::new();
        for &node in pos.values() {
            *seen.entry(node).or_insert(0) += 1;
        }
        report.node_conflicts += seen
            .values()
            .filter(|&&n| n > 1)
            .map(|&n| n - 1)
            .sum::<u64>();
    }
    report
}

/// Spearman rank correlation with tie-aware average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    num / (da.sqrt() * db.sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

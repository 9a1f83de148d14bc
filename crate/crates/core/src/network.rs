//! Plant networks: directed graphs of transport segments with station nodes.
//!
//! All lengths are stored as integer millimeters so path distances, and the
//! energies later derived from them, stay exact.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;

pub const MM_PER_M: i64 = 1000;

/// Index of a node in a [`PlantGraph`]. Ids are dense, starting at 0.
#[repr(transparent)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(u32);

impl NodeId {
    pub const fn new(id: u32) -> Self {
        Self(id)
    }

    pub const fn value(self) -> u32 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Index of a directed edge in a [`PlantGraph`]. Edges are numbered in
/// `(from, to)` order; that numbering is the canonical one used by occupancy
/// cells and serialized files.
#[repr(transparent)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(u32);

impl EdgeId {
    pub const fn new(id: u32) -> Self {
        Self(id)
    }

    pub const fn value(self) -> u32 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub length_mm: i64,
}

#[derive(Debug, Error)]
pub enum PlantError {
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
    #[error("invalid plant JSON: {0}")]
    Json(String),
    #[error("node ids must cover 0..{expected} exactly; id {found} breaks that")]
    NonContiguousIds { expected: u32, found: u32 },
    #[error("duplicate node id {0}")]
    DuplicateNodeId(u32),
    #[error("edge {from}->{to} references an unknown node")]
    UnknownEndpoint { from: u32, to: u32 },
    #[error("self loop at node {0}")]
    SelfLoop(u32),
    #[error("duplicate edge {from}->{to}")]
    DuplicateEdge { from: u32, to: u32 },
    #[error("edge {from}->{to} must have a positive finite length")]
    BadLength { from: u32, to: u32 },
    #[error("station {0} is not a known node")]
    UnknownStation(u32),
    #[error("duplicate station {0}")]
    DuplicateStation(u32),
    #[error("plant has no stations")]
    NoStations,
    #[error("station {to} is unreachable from station {from}")]
    StationCut { from: u32, to: u32 },
    #[error("grid dimensions must be at least 2x2, got {rows}x{cols}")]
    GridTooSmall { rows: usize, cols: usize },
}

/// A validated directed plant network.
///
/// Invariants, checked on construction: node ids are dense, edges carry
/// positive lengths, no self loops or duplicate directed edges, and every
/// station can reach every other station through the graph.
#[derive(Debug, Clone)]
pub struct PlantGraph {
    nodes: Vec<NodePoint>,
    edges: Vec<Edge>,
    stations: Vec<NodeId>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
}

impl PlantGraph {
    pub fn new(
        nodes: Vec<NodePoint>,
        mut edges: Vec<Edge>,
        mut stations: Vec<NodeId>,
    ) -> Result<Self, PlantError> {
        let n = nodes.len() as u32;
        for e in &edges {
            if e.from.value() >= n || e.to.value() >= n {
                return Err(PlantError::UnknownEndpoint {
                    from: e.from.value(),
                    to: e.to.value(),
                });
            }
            if e.from == e.to {
                return Err(PlantError::SelfLoop(e.from.value()));
            }
            if e.length_mm <= 0 {
                return Err(PlantError::BadLength {
                    from: e.from.value(),
                    to: e.to.value(),
                });
            }
        }
        edges.sort_by_key(|e| (e.from, e.to));
        for pair in edges.windows(2) {
            if pair[0].from == pair[1].from && pair[0].to == pair[1].to {
                return Err(PlantError::DuplicateEdge {
                    from: pair[0].from.value(),
                    to: pair[0].to.value(),
                });
            }
        }
        stations.sort();
        for pair in stations.windows(2) {
            if pair[0] == pair[1] {
                return Err(PlantError::DuplicateStation(pair[0].value()));
            }
        }
        if stations.is_empty() {
            return Err(PlantError::NoStations);
        }
        for s in &stations {
            if s.value() >= n {
                return Err(PlantError::UnknownStation(s.value()));
            }
        }

        let mut out_edges = vec![Vec::new(); nodes.len()];
        let mut in_edges = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            out_edges[e.from.index()].push(EdgeId::new(i as u32));
            in_edges[e.to.index()].push(EdgeId::new(i as u32));
        }

        let g = Self {
            nodes,
            edges,
            stations,
            out_edges,
            in_edges,
        };
        g.check_station_connectivity()?;
        Ok(g)
    }

    fn check_station_connectivity(&self) -> Result<(), PlantError> {
        for &s in &self.stations {
            let mut seen = vec![false; self.nodes.len()];
            let mut queue = std::collections::VecDeque::new();
            seen[s.index()] = true;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &e in &self.out_edges[u.index()] {
                    let v = self.edges[e.index()].to;
                    if !seen[v.index()] {
                        seen[v.index()] = true;
                        queue.push_back(v);
                    }
                }
            }
            for &t in &self.stations {
                if !seen[t.index()] {
                    return Err(PlantError::StationCut {
                        from: s.value(),
                        to: t.value(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_point(&self, id: NodeId) -> NodePoint {
        self.nodes[id.index()]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.index()]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn stations(&self) -> &[NodeId] {
        &self.stations
    }

    pub fn is_station(&self, id: NodeId) -> bool {
        self.stations.binary_search(&id).is_ok()
    }

    pub fn out_edges(&self, id: NodeId) -> &[EdgeId] {
        &self.out_edges[id.index()]
    }

    pub fn in_edges(&self, id: NodeId) -> &[EdgeId] {
        &self.in_edges[id.index()]
    }

    pub fn edge_between(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        self.edges
            .binary_search_by_key(&(from, to), |e| (e.from, e.to))
            .ok()
            .map(|i| EdgeId::new(i as u32))
    }

    /// The common edge length, or `None` if edges differ in length.
    pub fn uniform_edge_length_mm(&self) -> Option<i64> {
        let first = self.edges.first()?.length_mm;
        self.edges
            .iter()
            .all(|e| e.length_mm == first)
            .then_some(first)
    }

    pub fn lengths_mm(&self) -> Vec<i64> {
        self.edges.iter().map(|e| e.length_mm).collect()
    }

    /// Length of the shortest directed path in millimeters, or `None` when
    /// `to` cannot be reached from `from`.
    pub fn shortest_distance(&self, from: NodeId, to: NodeId) -> Option<i64> {
        self.distances_from(from, &self.lengths_mm())[to.index()]
    }

    /// Node sequence of the shortest directed path. Among equally short
    /// paths, the walk prefers the smallest next node id at every junction,
    /// which makes the result unique.
    pub fn shortest_route(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        self.shortest_route_weighted(from, to, &self.lengths_mm())
    }

    pub(crate) fn distances_from(&self, source: NodeId, weights: &[i64]) -> Vec<Option<i64>> {
        debug_assert_eq!(weights.len(), self.edges.len());
        let mut dist: Vec<Option<i64>> = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[source.index()] = Some(0);
        heap.push(Reverse((0i64, source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist[u.index()] != Some(d) {
                continue;
            }
            for &e in &self.out_edges[u.index()] {
                let v = self.edges[e.index()].to;
                let nd = d + weights[e.index()];
                if dist[v.index()].is_none_or(|cur| nd < cur) {
                    dist[v.index()] = Some(nd);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist
    }

    pub(crate) fn distances_to(&self, target: NodeId, weights: &[i64]) -> Vec<Option<i64>> {
        debug_assert_eq!(weights.len(), self.edges.len());
        let mut dist: Vec<Option<i64>> = vec![None; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[target.index()] = Some(0);
        heap.push(Reverse((0i64, target)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist[u.index()] != Some(d) {
                continue;
            }
            for &e in &self.in_edges[u.index()] {
                let v = self.edges[e.index()].from;
                let nd = d + weights[e.index()];
                if dist[v.index()].is_none_or(|cur| nd < cur) {
                    dist[v.index()] = Some(nd);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        dist
    }

    pub(crate) fn shortest_route_weighted(
        &self,
        from: NodeId,
        to: NodeId,
        weights: &[i64],
    ) -> Option<Vec<NodeId>> {
        let fwd = self.distances_from(from, weights);
        let total = fwd[to.index()]?;
        let bwd = self.distances_to(to, weights);
        let mut route = vec![from];
        let mut u = from;
        let mut walked = 0i64;
        while u != to {
            // Step to the smallest node that still lies on a shortest path.
            let next = self.out_edges[u.index()]
                .iter()
                .filter_map(|&e| {
                    let edge = &self.edges[e.index()];
                    let through = walked + weights[e.index()];
                    match bwd[edge.to.index()] {
                        Some(rest) if through + rest == total => Some((edge.to, through)),
                        _ => None,
                    }
                })
                .min_by_key(|&(v, _)| v);
            let (v, through) = next.expect("a shortest path step must exist");
            route.push(v);
            walked = through;
            u = v;
        }
        Some(route)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantFile {
    nodes: Vec<PlantFileNode>,
    edges: Vec<PlantFileEdge>,
    stations: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantFileNode {
    id: u32,
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantFileEdge {
    from: u32,
    to: u32,
    length_m: f64,
}

pub fn plant_from_json(text: &str) -> Result<PlantGraph, PlantError> {
    let file: PlantFile =
        serde_json::from_str(text).map_err(|e| PlantError::Json(e.to_string()))?;

    let mut raw_nodes = file.nodes;
    raw_nodes.sort_by_key(|n| n.id);
    for pair in raw_nodes.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(PlantError::DuplicateNodeId(pair[0].id));
        }
    }
    let expected = raw_nodes.len() as u32;
    for (i, node) in raw_nodes.iter().enumerate() {
        if node.id != i as u32 {
            return Err(PlantError::NonContiguousIds {
                expected,
                found: node.id,
            });
        }
    }
    let nodes = raw_nodes
        .iter()
        .map(|n| NodePoint { x: n.x, y: n.y })
        .collect();

    let mut edges = Vec::with_capacity(file.edges.len());
    for e in &file.edges {
        if !e.length_m.is_finite() || e.length_m <= 0.0 {
            return Err(PlantError::BadLength {
                from: e.from,
                to: e.to,
            });
        }
        edges.push(Edge {
            from: NodeId::new(e.from),
            to: NodeId::new(e.to),
            length_mm: (e.length_m * MM_PER_M as f64).round() as i64,
        });
    }

    let stations = file.stations.into_iter().map(NodeId::new).collect();
    PlantGraph::new(nodes, edges, stations)
}

/// Canonical JSON for a plant: nodes in id order, edges in edge-id order.
/// Loading the output and serializing again reproduces it byte for byte.
pub fn plant_to_json(g: &PlantGraph) -> String {
    let file = PlantFile {
        nodes: (0..g.n_nodes())
            .map(|i| {
                let p = g.node_point(NodeId::new(i as u32));
                PlantFileNode {
                    id: i as u32,
                    x: p.x,
                    y: p.y,
                }
            })
            .collect(),
        edges: g
            .edges()
            .iter()
            .map(|e| PlantFileEdge {
                from: e.from.value(),
                to: e.to.value(),
                length_m: e.length_mm as f64 / MM_PER_M as f64,
            })
            .collect(),
        stations: g.stations().iter().map(|s| s.value()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("plant serialization cannot fail");
    text.push('\n');
    text
}

pub fn load_plant(path: impl AsRef<Path>) -> Result<PlantGraph, PlantError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| PlantError::Read {
        path: path.display().to_string(),
        source,
    })?;
    plant_from_json(&text)
}

pub fn save_plant(g: &PlantGraph, path: impl AsRef<Path>) -> Result<(), PlantError> {
    let path = path.as_ref();
    fs::write(path, plant_to_json(g)).map_err(|source| PlantError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// JSON text of the plant that ships with the crate: an 8x14 grid with
/// 112 nodes, 202 lanes, and 20 stations spread over the perimeter.
pub fn bundled_plant_json() -> &'static str {
    include_str!("../data/plant_8x14.json")
}

/// The plant that ships with the crate, parsed. Sized for fleets of up
/// to 20 AGVs.
pub fn bundled_plant() -> PlantGraph {
    plant_from_json(bundled_plant_json()).expect("bundled plant is valid")
}

/// Builds a rows x cols grid plant with one-way lanes.
///
/// The perimeter is a clockwise ring; interior rows and columns alternate
/// direction, so every node keeps both in- and out-degree and the whole
/// grid is strongly connected. All segments are 1 m. Stations sit on every
/// other perimeter node; the seed picks which of the two phases is used.
pub fn generate_plant(rows: usize, cols: usize, seed: u64) -> Result<PlantGraph, PlantError> {
    if rows < 2 || cols < 2 {
        return Err(PlantError::GridTooSmall { rows, cols });
    }
    let id = |r: usize, c: usize| NodeId::new((r * cols + c) as u32);
    let nodes = (0..rows * cols)
        .map(|i| NodePoint {
            x: (i % cols) as f64,
            y: (i / cols) as f64,
        })
        .collect();

    let mut edges = Vec::new();
    let mut push = |from: NodeId, to: NodeId| {
        edges.push(Edge {
            from,
            to,
            length_mm: MM_PER_M,
        });
    };
    for c in 0..cols - 1 {
        push(id(0, c), id(0, c + 1));
    }
    for r in 0..rows - 1 {
        push(id(r, cols - 1), id(r + 1, cols - 1));
    }
    for c in 1..cols {
        push(id(rows - 1, c), id(rows - 1, c - 1));
    }
    for r in 1..rows {
        push(id(r, 0), id(r - 1, 0));
    }
    for r in 1..rows - 1 {
        if r % 2 == 0 {
            for c in 0..cols - 1 {
                push(id(r, c), id(r, c + 1));
            }
        } else {
            for c in 1..cols {
                push(id(r, c), id(r, c - 1));
            }
        }
    }
    for c in 1..cols - 1 {
        if c % 2 == 1 {
            for r in 0..rows - 1 {
                push(id(r, c), id(r + 1, c));
            }
        } else {
            for r in 1..rows {
                push(id(r, c), id(r - 1, c));
            }
        }
    }

    let mut walk = Vec::new();
    for c in 0..cols {
        walk.push(id(0, c));
    }
    for r in 1..rows {
        walk.push(id(r, cols - 1));
    }
    for c in (0..cols - 1).rev() {
        walk.push(id(rows - 1, c));
    }
    for r in (1..rows - 1).rev() {
        walk.push(id(r, 0));
    }

    let offset = stream_rng(seed, "plant", 0).gen_range(0..2usize);
    let stations = walk
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == offset)
        .map(|(_, &node)| node)
        .collect();

    PlantGraph::new(nodes, edges, stations)
}

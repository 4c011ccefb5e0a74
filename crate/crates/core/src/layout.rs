//! Heavy-hex coupling graphs with synthetic calibration data, exhaustive
//! 1D-chain enumeration, and fidelity-based layout scoring.
//!
//! The generator tiles heavy-hex unit cells (qubits on both the vertices
//! and the edge midpoints of a hexagon brick wall), so every node has degree
//! at most 3. A separate preset approximates the 156-qubit Heron-class
//! row structure: 8 rows of 16 qubits joined by 4 connector qubits per gap.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-qubit calibration data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NodeCalibration {
    /// Readout flip probability p(1|0).
    pub p10: f64,
    /// Readout flip probability p(0|1).
    pub p01: f64,
    pub t1_us: f64,
    pub t2_us: f64,
}

impl Default for NodeCalibration {
    fn default() -> Self {
        NodeCalibration {
            p10: 0.0,
            p01: 0.0,
            t1_us: 100.0,
            t2_us: 100.0,
        }
    }
}

impl NodeCalibration {
    pub fn mean_readout_error(&self) -> f64 {
        0.5 * (self.p10 + self.p01)
    }
}

/// Undirected device coupling graph with calibration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingGraph {
    pub nodes: Vec<NodeCalibration>,
    /// Undirected edges `(a, b)` with `a < b` and a two-qubit error rate.
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
}

impl CouplingGraph {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut g = CouplingGraph {
            nodes: vec![NodeCalibration::default(); n_nodes],
            edges,
            adjacency: Vec::new(),
        };
        g.normalize_and_validate()?;
        Ok(g)
    }

    fn normalize_and_validate(&mut self) -> Result<()> {
        for e in &mut self.edges {
            if e.0 == e.1 || e.0 >= self.nodes.len() || e.1 >= self.nodes.len() {
                return Err(Error::invalid("bad edge in coupling graph"));
            }
            if !(0.0..=1.0).contains(&e.2) {
                return Err(Error::invalid("edge error rate outside [0, 1]"));
            }
            if e.0 > e.1 {
                std::mem::swap(&mut e.0, &mut e.1);
            }
        }
        self.edges.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        self.edges.dedup_by_key(|&mut (a, b, _)| (a, b));
        self.rebuild_adjacency();
        Ok(())
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b, _) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        self.adjacency = adj;
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).max().unwrap_or(0)
    }

    pub fn edge_error(&self, a: usize, b: usize) -> Option<f64> {
        let key = (a.min(b), a.max(b));
        self.edges
            .binary_search_by(|&(x, y, _)| (x, y).cmp(&key))
            .ok()
            .map(|i| self.edges[i].2)
    }

    pub fn set_edge_error(&mut self, a: usize, b: usize, err: f64) -> Result<()> {
        let key = (a.min(b), a.max(b));
        match self.edges.binary_search_by(|&(x, y, _)| (x, y).cmp(&key)) {
            Ok(i) => {
                self.edges[i].2 = err;
                Ok(())
            }
            Err(_) => Err(Error::invalid("edge not present")),
        }
    }

    pub fn set_uniform_calibration(&mut self, node: NodeCalibration, edge_error: f64) {
        for n in &mut self.nodes {
            *n = node;
        }
        for e in &mut self.edges {
            e.2 = edge_error;
        }
    }

    /// Parse a calibration JSON file and apply it.
    pub fn apply_calibration_json(&mut self, json: &str) -> Result<()> {
        #[derive(Deserialize)]
        struct NodeRow {
            id: usize,
            p10: f64,
            p01: f64,
            #[serde(default)]
            t1_us: Option<f64>,
            #[serde(default)]
            t2_us: Option<f64>,
        }
        #[derive(Deserialize)]
        struct EdgeRow {
            a: usize,
            b: usize,
            error: f64,
        }
        #[derive(Deserialize)]
        struct File {
            #[serde(default)]
            nodes: Vec<NodeRow>,
            #[serde(default)]
            edges: Vec<EdgeRow>,
        }
        let f: File = serde_json::from_str(json)
            .map_err(|e| Error::invalid(format!("calibration JSON: {e}")))?;
        for row in f.nodes {
            if row.id >= self.nodes.len() {
                return Err(Error::invalid(format!(
                    "calibration node {} out of range",
                    row.id
                )));
            }
            let n = &mut self.nodes[row.id];
            n.p10 = row.p10;
            n.p01 = row.p01;
            if let Some(t1) = row.t1_us {
                n.t1_us = t1;
            }
            if let Some(t2) = row.t2_us {
                n.t2_us = t2;
            }
        }
        for row in f.edges {
            self.set_edge_error(row.a, row.b, row.error)?;
        }
        Ok(())
    }
}

/// Heavy-hex brick wall of `rows x cols` hexagonal cells.
///
/// Qubit rows have width `4*cols + 1`; connector qubits sit between
/// consecutive rows at columns `0 mod 4` (even gaps) or `2 mod 4`
/// (odd gaps). A single cell is the familiar 12-qubit hexagon.
pub fn build_heavy_hex(rows: usize, cols: usize) -> Result<CouplingGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("heavy-hex generator needs rows, cols >= 1"));
    }
    let width = 4 * cols + 1;
    let connector_cols: Vec<Vec<usize>> = (0..rows)
        .map(|gap| {
            let offset = if gap % 2 == 0 { 0 } else { 2 };
            (offset..width).step_by(4).collect()
        })
        .collect();
    build_rows_and_connectors(rows + 1, width, &connector_cols)
}

/// 156-node Heron-class preset: 8 rows of 16 qubits, 7 connector gaps of 4.
pub fn build_heron_like() -> CouplingGraph {
    let connector_cols: Vec<Vec<usize>> = (0..7)
        .map(|gap| {
            let offset = if gap % 2 == 0 { 3 } else { 1 };
            (offset..16).step_by(4).collect()
        })
        .collect();
    let g = build_rows_and_connectors(8, 16, &connector_cols).expect("preset graph is well formed");
    debug_assert_eq!(g.n_nodes(), 156);
    g
}

fn build_rows_and_connectors(
    n_rows: usize,
    width: usize,
    connector_cols: &[Vec<usize>],
) -> Result<CouplingGraph> {
    debug_assert_eq!(connector_cols.len(), n_rows - 1);
    let mut ids = vec![vec![0usize; width]; n_rows];
    let mut next = 0usize;
    let mut edges = Vec::new();
    for (r, row_ids) in ids.iter_mut().enumerate() {
        for c in 0..width {
            row_ids[c] = next;
            next += 1;
            if c > 0 {
                edges.push((row_ids[c - 1], row_ids[c], 0.0));
            }
        }
        if r < n_rows - 1 {
            next += connector_cols[r].len();
        }
    }
    let mut base = width;
    for (gap, cols) in connector_cols.iter().enumerate() {
        for (k, &c) in cols.iter().enumerate() {
            let id = base + k;
            edges.push((ids[gap][c], id, 0.0));
            edges.push((id, ids[gap + 1][c], 0.0));
        }
        base += cols.len() + width;
    }
    CouplingGraph::new(next, edges)
}

/// An ordered chain of physical qubits hosting the 1D register.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLayout {
    pub qubits: Vec<usize>,
}

impl ChainLayout {
    pub fn is_valid_path(&self, graph: &CouplingGraph) -> bool {
        if self.qubits.is_empty() {
            return false;
        }
        let unique: BTreeSet<usize> = self.qubits.iter().copied().collect();
        if unique.len() != self.qubits.len() {
            return false;
        }
        self.qubits
            .windows(2)
            .all(|w| graph.edge_error(w[0], w[1]).is_some())
    }
}

/// Exhaustively enumerate simple paths of `length` nodes, one per
/// reversal class, in deterministic (lexicographic) order.
pub fn enumerate_chains(graph: &CouplingGraph, length: usize) -> Result<Vec<ChainLayout>> {
    if length == 0 || length > graph.n_nodes() {
        return Err(Error::invalid(format!(
            "chain length {length} out of range for {} nodes",
            graph.n_nodes()
        )));
    }
    if length == 1 {
        return Ok((0..graph.n_nodes())
            .map(|q| ChainLayout { qubits: vec![q] })
            .collect());
    }
    let mut out = Vec::new();
    let mut visited = vec![false; graph.n_nodes()];
    let mut path = Vec::with_capacity(length);
    for start in 0..graph.n_nodes() {
        visited[start] = true;
        path.push(start);
        dfs_paths(graph, length, &mut path, &mut visited, &mut out);
        path.pop();
        visited[start] = false;
    }
    out.sort_unstable_by(|a, b| a.qubits.cmp(&b.qubits));
    Ok(out)
}

fn dfs_paths(
    graph: &CouplingGraph,
    length: usize,
    path: &mut Vec<usize>,
    visited: &mut [bool],
    out: &mut Vec<ChainLayout>,
) {
    if path.len() == length {
        // Keep one representative per reversal class.
        if path[0] < path[length - 1] {
            out.push(ChainLayout {
                qubits: path.clone(),
            });
        }
        return;
    }
    let last = *path.last().unwrap();
    for &next in graph.neighbors(last) {
        if !visited[next] {
            visited[next] = true;
            path.push(next);
            dfs_paths(graph, length, path, visited, out);
            path.pop();
            visited[next] = false;
        }
    }
}

/// Rule deciding which qubits are too noisy to use.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BadQubitRule {
    /// No exclusions.
    None,
    /// Exclude qubits whose mean readout error or worst adjacent two-qubit
    /// error exceeds `factor` times the device median of that quantity.
    MedianFactor { factor: f64 },
    /// Explicit exclusion list.
    Explicit { qubits: Vec<usize> },
}

impl Default for BadQubitRule {
    fn default() -> Self {
        BadQubitRule::MedianFactor { factor: 5.0 }
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Qubits excluded under a rule.
pub fn excluded_qubits(graph: &CouplingGraph, rule: &BadQubitRule) -> BTreeSet<usize> {
    match rule {
        BadQubitRule::None => BTreeSet::new(),
        BadQubitRule::Explicit { qubits } => qubits.iter().copied().collect(),
        BadQubitRule::MedianFactor { factor } => {
            let mut readout: Vec<f64> = graph
                .nodes
                .iter()
                .map(|n| n.mean_readout_error())
                .collect();
            let med_readout = median(&mut readout);
            let mut edge_errs: Vec<f64> = graph.edges.iter().map(|e| e.2).collect();
            let med_edge = median(&mut edge_errs);
            let mut set = BTreeSet::new();
            for (q, n) in graph.nodes.iter().enumerate() {
                if med_readout > 0.0 && n.mean_readout_error() > factor * med_readout {
                    set.insert(q);
                    continue;
                }
                if med_edge > 0.0 {
                    let worst_adjacent = graph
                        .neighbors(q)
                        .iter()
                        .filter_map(|&o| graph.edge_error(q, o))
                        .fold(0.0f64, f64::max);
                    if worst_adjacent > factor * med_edge {
                        set.insert(q);
                    }
                }
            }
            set
        }
    }
}

/// Aggregate fidelity proxy: product of `(1 - edge error)` over chain edges
/// times product of `(1 - mean readout error)` over nodes.
pub fn layout_score(layout: &ChainLayout, graph: &CouplingGraph) -> f64 {
    let mut score = 1.0;
    for w in layout.qubits.windows(2) {
        score *= 1.0 - graph.edge_error(w[0], w[1]).unwrap_or(1.0);
    }
    for &q in &layout.qubits {
        score *= 1.0 - graph.nodes[q].mean_readout_error();
    }
    score
}

/// Filter by the bad-qubit rule, score, and rank (ties broken by
/// lexicographic qubit ids).
pub fn score_and_select(
    layouts: &[ChainLayout],
    graph: &CouplingGraph,
    rule: &BadQubitRule,
) -> Result<Vec<(ChainLayout, f64)>> {
    if layouts.is_empty() {
        return Err(Error::invalid("no layouts to score"));
    }
    let excluded = excluded_qubits(graph, rule);
    let mut scored: Vec<(ChainLayout, f64)> = layouts
        .iter()
        .filter(|l| l.qubits.iter().all(|q| !excluded.contains(q)))
        .map(|l| (l.clone(), layout_score(l, graph)))
        .collect();
    if scored.is_empty() {
        return Err(Error::NoFeasibleLayout);
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| a.0.qubits.cmp(&b.0.qubits))
    });
    Ok(scored)
}

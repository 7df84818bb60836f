//! Homogeneous and bipartite graphs backed by compressed sparse rows.
//!
//! Graphs are immutable after construction. Node ids are dense integers;
//! the original labels from the edge-list file are kept in an [`IdMap`] so
//! every output file can report them back.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use log::warn;
use ndarray::Array2;

use crate::error::{validation, Error, Result};
use crate::textio;

/// Dense materialization is refused above this many entries.
pub const DENSE_LIMIT: usize = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Homogeneous,
    Bipartite,
}

/// Maps external node labels to dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    /// Identity mapping `0..n` labelled by the decimal id.
    pub fn numeric(n: usize) -> Self {
        let labels: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        Self::from_labels(labels)
    }

    pub fn from_labels(labels: Vec<String>) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        IdMap { labels, index }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Returns the id of `label`, appending it when unseen.
    pub fn get_or_insert(&mut self, label: &str) -> usize {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        self.index.insert(label.to_string(), self.labels.len());
        self.labels.push(label.to_string());
        self.labels.len() - 1
    }

    /// Builds a mapping from raw id tokens. When every token is a
    /// nonnegative integer the ids are used as-is (size = max + 1);
    /// otherwise tokens are numbered in order of first appearance.
    fn from_tokens<'a>(tokens: impl Iterator<Item = &'a str> + Clone) -> Self {
        let numeric: Option<Vec<usize>> = tokens.clone().map(|t| t.parse::<usize>().ok()).collect();
        match numeric {
            Some(ids) => IdMap::numeric(ids.iter().max().map_or(0, |m| m + 1)),
            None => {
                let mut map = IdMap::default();
                for t in tokens {
                    map.get_or_insert(t);
                }
                map
            }
        }
    }
}

/// One stored edge. For homogeneous graphs `src < dst`; for bipartite
/// graphs `src` is a type-A id and `dst` a type-B id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
    pub timestamp: Option<i64>,
}

/// Compressed row index: neighbors of row `i` live in
/// `targets[offsets[i]..offsets[i + 1]]`, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl Csr {
    fn from_arcs(rows: usize, mut arcs: Vec<(usize, usize, f64)>) -> Self {
        arcs.sort_by_key(|a| (a.0, a.1));
        let mut offsets = vec![0usize; rows + 1];
        for &(r, _, _) in &arcs {
            offsets[r + 1] += 1;
        }
        for i in 0..rows {
            offsets[i + 1] += offsets[i];
        }
        let targets = arcs.iter().map(|a| a.1).collect();
        let weights = arcs.iter().map(|a| a.2).collect();
        Csr { offsets, targets, weights }
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.targets.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.offsets[i], self.offsets[i + 1]);
        (&self.targets[s..e], &self.weights[s..e])
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

/// Undirected graph stored with both arc directions in the CSR index.
#[derive(Debug, Clone)]
pub struct Graph {
    ids: IdMap,
    edges: Vec<Edge>,
    adj: Csr,
}

impl Graph {
    /// Builds a graph over `num_nodes` numeric ids.
    pub fn from_edges(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        Self::with_ids(IdMap::numeric(num_nodes), edges.into_iter().map(|(s, d, w)| (s, d, w, None)))
    }

    /// Builds a graph with explicit labels. Self-loops are dropped,
    /// duplicate (unordered) pairs are merged by summing weights.
    pub fn with_ids(
        ids: IdMap,
        edges: impl IntoIterator<Item = (usize, usize, f64, Option<i64>)>,
    ) -> Result<Self> {
        let n = ids.len();
        let mut merged: BTreeMap<(usize, usize), (f64, Option<i64>)> = BTreeMap::new();
        let mut loops = 0usize;
        for (s, d, w, ts) in edges {
            check_weight(w)?;
            for v in [s, d] {
                if v >= n {
                    return Err(Error::Index { index: v, len: n });
                }
            }
            if s == d {
                loops += 1;
                continue;
            }
            let key = (s.min(d), s.max(d));
            let slot = merged.entry(key).or_insert((0.0, None));
            slot.0 += w;
            slot.1 = max_ts(slot.1, ts);
        }
        if loops > 0 {
            warn!("dropped {loops} self-loop(s)");
        }
        let edges: Vec<Edge> = merged
            .into_iter()
            .map(|((src, dst), (weight, timestamp))| Edge { src, dst, weight, timestamp })
            .collect();
        let arcs = edges
            .iter()
            .flat_map(|e| [(e.src, e.dst, e.weight), (e.dst, e.src, e.weight)])
            .collect();
        let adj = Csr::from_arcs(n, arcs);
        Ok(Graph { ids, edges, adj })
    }

    pub fn num_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of stored arcs (twice the undirected edge count).
    pub fn num_arcs(&self) -> usize {
        self.adj.nnz()
    }

    pub fn ids(&self) -> &IdMap {
        &self.ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn adjacency(&self) -> &Csr {
        &self.adj
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj.degree(v)
    }

    /// Neighbors of `v` sorted by id.
    pub fn neighbors(&self, v: usize) -> Result<Vec<(usize, f64)>> {
        if v >= self.num_nodes() {
            return Err(Error::Index { index: v, len: self.num_nodes() });
        }
        let (t, w) = self.adj.row(v);
        Ok(t.iter().copied().zip(w.iter().copied()).collect())
    }

    pub fn neighbor_slice(&self, v: usize) -> (&[usize], &[f64]) {
        self.adj.row(v)
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn adjacency_dense(&self) -> Result<Array2<f64>> {
        let n = self.num_nodes();
        guard_dense(n, n)?;
        let mut a = Array2::zeros((n, n));
        for e in &self.edges {
            a[[e.src, e.dst]] = e.weight;
            a[[e.dst, e.src]] = e.weight;
        }
        Ok(a)
    }

    pub fn adjacency_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_csr(self.adj.clone(), self.num_nodes())
    }

    /// Same node set, restricted edge set.
    pub fn with_edges(&self, edges: &[Edge]) -> Result<Self> {
        Graph::with_ids(self.ids.clone(), edges.iter().map(|e| (e.src, e.dst, e.weight, e.timestamp)))
    }

    pub fn write_edge_list<W: Write>(&self, out: &mut W) -> Result<()> {
        write_edges(out, &self.edges, &self.ids, &self.ids)
    }
}

/// Two-mode graph; edges always go from a type-A node to a type-B node.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    a_ids: IdMap,
    b_ids: IdMap,
    edges: Vec<Edge>,
    a_adj: Csr,
    b_adj: Csr,
}

impl BipartiteGraph {
    pub fn from_edges(num_a: usize, num_b: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        Self::with_ids(
            IdMap::numeric(num_a),
            IdMap::numeric(num_b),
            edges.into_iter().map(|(a, b, w)| (a, b, w, None)),
        )
    }

    pub fn with_ids(
        a_ids: IdMap,
        b_ids: IdMap,
        edges: impl IntoIterator<Item = (usize, usize, f64, Option<i64>)>,
    ) -> Result<Self> {
        let (na, nb) = (a_ids.len(), b_ids.len());
        let mut merged: BTreeMap<(usize, usize), (f64, Option<i64>)> = BTreeMap::new();
        for (a, b, w, ts) in edges {
            check_weight(w)?;
            if a >= na {
                return Err(Error::Index { index: a, len: na });
            }
            if b >= nb {
                return Err(Error::Index { index: b, len: nb });
            }
            let slot = merged.entry((a, b)).or_insert((0.0, None));
            slot.0 += w;
            slot.1 = max_ts(slot.1, ts);
        }
        let edges: Vec<Edge> = merged
            .into_iter()
            .map(|((src, dst), (weight, timestamp))| Edge { src, dst, weight, timestamp })
            .collect();
        let a_adj = Csr::from_arcs(na, edges.iter().map(|e| (e.src, e.dst, e.weight)).collect());
        let b_adj = Csr::from_arcs(nb, edges.iter().map(|e| (e.dst, e.src, e.weight)).collect());
        Ok(BipartiteGraph { a_ids, b_ids, edges, a_adj, b_adj })
    }

    pub fn num_a(&self) -> usize {
        self.a_ids.len()
    }

    pub fn num_b(&self) -> usize {
        self.b_ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn a_ids(&self) -> &IdMap {
        &self.a_ids
    }

    pub fn b_ids(&self) -> &IdMap {
        &self.b_ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn a_adjacency(&self) -> &Csr {
        &self.a_adj
    }

    pub fn b_adjacency(&self) -> &Csr {
        &self.b_adj
    }

    /// Type-B neighbors of type-A node `a`.
    pub fn neighbors_of_a(&self, a: usize) -> Result<Vec<(usize, f64)>> {
        if a >= self.num_a() {
            return Err(Error::Index { index: a, len: self.num_a() });
        }
        let (t, w) = self.a_adj.row(a);
        Ok(t.iter().copied().zip(w.iter().copied()).collect())
    }

    /// Type-A neighbors of type-B node `b`.
    pub fn neighbors_of_b(&self, b: usize) -> Result<Vec<(usize, f64)>> {
        if b >= self.num_b() {
            return Err(Error::Index { index: b, len: self.num_b() });
        }
        let (t, w) = self.b_adj.row(b);
        Ok(t.iter().copied().zip(w.iter().copied()).collect())
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.a_adj.row(a).0.binary_search(&b).is_ok()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn adjacency_dense(&self) -> Result<Array2<f64>> {
        guard_dense(self.num_a(), self.num_b())?;
        let mut a = Array2::zeros((self.num_a(), self.num_b()));
        for e in &self.edges {
            a[[e.src, e.dst]] = e.weight;
        }
        Ok(a)
    }

    pub fn adjacency_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_csr(self.a_adj.clone(), self.num_b())
    }

    pub fn with_edges(&self, edges: &[Edge]) -> Result<Self> {
        BipartiteGraph::with_ids(
            self.a_ids.clone(),
            self.b_ids.clone(),
            edges.iter().map(|e| (e.src, e.dst, e.weight, e.timestamp)),
        )
    }

    pub fn write_edge_list<W: Write>(&self, out: &mut W) -> Result<()> {
        write_edges(out, &self.edges, &self.a_ids, &self.b_ids)
    }
}

#[derive(Debug, Clone)]
pub enum AnyGraph {
    Homogeneous(Graph),
    Bipartite(BipartiteGraph),
}

impl AnyGraph {
    pub fn kind(&self) -> GraphKind {
        match self {
            AnyGraph::Homogeneous(_) => GraphKind::Homogeneous,
            AnyGraph::Bipartite(_) => GraphKind::Bipartite,
        }
    }

    pub fn adjacency_dense(&self) -> Result<Array2<f64>> {
        match self {
            AnyGraph::Homogeneous(g) => g.adjacency_dense(),
            AnyGraph::Bipartite(g) => g.adjacency_dense(),
        }
    }

    pub fn write_edge_list<W: Write>(&self, out: &mut W) -> Result<()> {
        match self {
            AnyGraph::Homogeneous(g) => g.write_edge_list(out),
            AnyGraph::Bipartite(g) => g.write_edge_list(out),
        }
    }

    pub fn into_homogeneous(self) -> Result<Graph> {
        match self {
            AnyGraph::Homogeneous(g) => Ok(g),
            AnyGraph::Bipartite(_) => Err(Error::Usage("expected a homogeneous graph".into())),
        }
    }

    pub fn into_bipartite(self) -> Result<BipartiteGraph> {
        match self {
            AnyGraph::Bipartite(g) => Ok(g),
            AnyGraph::Homogeneous(_) => Err(Error::Usage("expected a bipartite graph".into())),
        }
    }
}

/// Row-compressed nonnegative matrix used by the sparse factorization path.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    csr: Csr,
    cols: usize,
}

impl SparseMatrix {
    pub fn from_csr(csr: Csr, cols: usize) -> Self {
        SparseMatrix { csr, cols }
    }

    /// Builds from a dense matrix, keeping the strictly positive entries.
    pub fn from_dense(a: &Array2<f64>) -> Self {
        let mut arcs = Vec::new();
        for ((i, j), &v) in a.indexed_iter() {
            if v != 0.0 {
                arcs.push((i, j, v));
            }
        }
        SparseMatrix { csr: Csr::from_arcs(a.nrows(), arcs), cols: a.ncols() }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.csr.rows(), self.cols)
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        self.csr.row(i)
    }

    pub fn nnz(&self) -> usize {
        self.csr.nnz()
    }
}

pub fn parse_edge_list(text: &str, kind: GraphKind) -> Result<AnyGraph> {
    struct Record<'a> {
        src: &'a str,
        dst: &'a str,
        weight: f64,
        ts: Option<i64>,
    }
    let mut records = Vec::new();
    for (line, fields) in textio::data_lines(text) {
        if fields.len() < 2 || fields.len() > 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected `src dst [weight] [timestamp]`, found {} field(s)", fields.len()),
            });
        }
        let weight = match fields.get(2) {
            Some(f) => textio::parse_field::<f64>(line, f, "weight")?,
            None => 1.0,
        };
        if !weight.is_finite() || weight < 0.0 {
            return Err(validation(format!("line {line}: weight {weight} must be finite and nonnegative")));
        }
        let ts = match fields.get(3) {
            Some(f) => Some(textio::parse_field::<i64>(line, f, "timestamp")?),
            None => None,
        };
        records.push(Record { src: fields[0], dst: fields[1], weight, ts });
    }
    if records.is_empty() {
        return Err(validation("edge list contains no edges"));
    }
    match kind {
        GraphKind::Homogeneous => {
            let ids = IdMap::from_tokens(records.iter().flat_map(|r| [r.src, r.dst]));
            let edges = records.iter().map(|r| (ids.get(r.src).unwrap(), ids.get(r.dst).unwrap(), r.weight, r.ts));
            Ok(AnyGraph::Homogeneous(Graph::with_ids(ids.clone(), edges)?))
        }
        GraphKind::Bipartite => {
            let a_ids = IdMap::from_tokens(records.iter().map(|r| r.src));
            let b_ids = IdMap::from_tokens(records.iter().map(|r| r.dst));
            let edges = records
                .iter()
                .map(|r| (a_ids.get(r.src).unwrap(), b_ids.get(r.dst).unwrap(), r.weight, r.ts));
            Ok(AnyGraph::Bipartite(BipartiteGraph::with_ids(a_ids.clone(), b_ids.clone(), edges)?))
        }
    }
}

pub fn load_edge_list(path: &Path, kind: GraphKind) -> Result<AnyGraph> {
    parse_edge_list(&textio::read_to_string(path)?, kind)
}

pub fn save_edge_list(path: &Path, graph: &AnyGraph) -> Result<()> {
    let mut out = textio::create(path)?;
    graph.write_edge_list(&mut out)?;
    out.flush()?;
    Ok(())
}

fn write_edges<W: Write>(out: &mut W, edges: &[Edge], src_ids: &IdMap, dst_ids: &IdMap) -> Result<()> {
    for e in edges {
        write!(out, "{} {} {}", src_ids.label(e.src), dst_ids.label(e.dst), e.weight)?;
        if let Some(ts) = e.timestamp {
            write!(out, " {ts}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn check_weight(w: f64) -> Result<()> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(validation(format!("edge weight {w} must be finite and nonnegative")))
    }
}

fn max_ts(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn guard_dense(rows: usize, cols: usize) -> Result<()> {
    match rows.checked_mul(cols) {
        Some(n) if n <= DENSE_LIMIT => Ok(()),
        _ => Err(Error::Capacity(format!(
            "{rows}x{cols} adjacency exceeds {DENSE_LIMIT} dense entries; use the sparse factorization path"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn homo(text: &str) -> Graph {
        parse_edge_list(text, GraphKind::Homogeneous).unwrap().into_homogeneous().unwrap()
    }

    #[test]
    fn symmetrizes_path() {
        let g = homo("0 1\n1 2\n");
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_arcs(), 4);
    }

    #[test]
    fn merges_duplicate_edges() {
        let g = homo("0 1 2.0\n0 1 3.0\n");
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.edges()[0].weight, 5.0);
        assert_eq!(g.neighbors(1).unwrap(), vec![(0, 5.0)]);
    }

    #[test]
    fn reverse_duplicates_merge_too() {
        let g = homo("0 1 2.0\n1 0 3.0\n");
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.edges()[0].weight, 5.0);
    }

    #[test]
    fn bipartite_string_ids() {
        let g = parse_edge_list("u0 i0\nu0 i1\nu1 i0\n", GraphKind::Bipartite)
            .unwrap()
            .into_bipartite()
            .unwrap();
        assert_eq!((g.num_a(), g.num_b(), g.num_edges()), (2, 2, 3));
        assert_eq!(g.a_ids().label(1), "u1");
        assert_eq!(g.b_ids().get("i1"), Some(1));
    }

    #[test]
    fn comments_tabs_and_timestamps() {
        let g = parse_edge_list("# header\nu\ti\t1.5\t42\n\n", GraphKind::Bipartite)
            .unwrap()
            .into_bipartite()
            .unwrap();
        assert_eq!(g.edges()[0].timestamp, Some(42));
        assert_eq!(g.edges()[0].weight, 1.5);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_edge_list("0 1\n0 x y\n", GraphKind::Homogeneous).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_edge_list("0 1\n0\n", GraphKind::Homogeneous).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn rejects_negative_weight_and_empty_input() {
        assert!(matches!(
            parse_edge_list("0 1 -1\n", GraphKind::Homogeneous),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_edge_list("# nothing\n", GraphKind::Homogeneous),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn self_loops_are_dropped() {
        let g = homo("0 0\n0 1\n");
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.num_nodes(), 2);
    }

    #[test]
    fn dense_adjacency_cases() {
        let tri = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let a = tri.adjacency_dense().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[[i, j]], if i == j { 0.0 } else { 1.0 });
            }
        }
        let b = BipartiteGraph::from_edges(2, 2, [(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(b.adjacency_dense().unwrap(), ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0]]));
        let empty = Graph::from_edges(2, []).unwrap();
        assert_eq!(empty.adjacency_dense().unwrap(), Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn dense_guard() {
        let g = Graph::from_edges(20_000, [(0, 1, 1.0)]).unwrap();
        assert!(matches!(g.adjacency_dense(), Err(Error::Capacity(_))));
    }

    #[test]
    fn neighbor_queries() {
        let tri = Graph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(tri.neighbors(0).unwrap(), vec![(1, 1.0), (2, 1.0)]);
        assert!(tri.neighbors(3).unwrap().is_empty());
        assert!(matches!(tri.neighbors(4), Err(Error::Index { index: 4, len: 4 })));
        let star = Graph::from_edges(5, (1..5).map(|l| (0, l, 1.0))).unwrap();
        assert_eq!(star.neighbors(0).unwrap().len(), 4);
    }
}

//! Per-facet graph convolution over a facet-decomposed bipartite adjacency.
//!
//! The adjacency is split as `A = Σ_k A^k` with `A^k(i,j)` proportional to
//! `P(i,k)·Q(j,k)`. Facet `k` owns one mean-aggregator encoder per node
//! type, fed by free layer-0 vectors, and is trained on its own weighted
//! edges only. Facets never share parameters.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::embedding::{EmbeddingTables, FacetTable, TableKind};
use crate::error::{validation, Error, Result};
use crate::graph::{BipartiteGraph, IdMap, SparseMatrix};
use crate::rng;
use crate::sgns::{sigmoid, NegativeSampler};
use crate::textio;

/// `K` nonnegative matrices sharing the sparsity pattern of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetAdjacency {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    /// `values[k][e]` is `A^k` at the `e`-th stored entry.
    values: Vec<Vec<f64>>,
}

impl FacetAdjacency {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// `(i, j, A^k(i,j))` for every stored entry of row-major order,
    /// including zero facet mass.
    pub fn entries(&self, k: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (self.indptr[i]..self.indptr[i + 1]).map(move |e| (i, self.indices[e], self.values[k][e]))
        })
    }

    /// Entries of facet `k` above `threshold`.
    pub fn facet_edges(&self, k: usize, threshold: f64) -> Vec<(usize, usize, f64)> {
        self.entries(k).filter(|e| e.2 > threshold).collect()
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(p) => self.values[k][span.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self, k: usize) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (i, j, v) in self.entries(k) {
            out[[i, j]] = v;
        }
        out
    }

    /// `Σ_k A^k` as a dense matrix.
    pub fn sum_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for k in 0..self.k() {
            out += &self.to_dense(k);
        }
        out
    }
}

/// Splits every entry of `a` across facets by `P(i,k)Q(j,k) / Σ_c P(i,c)Q(j,c)`,
/// uniformly where that denominator vanishes.
pub fn decompose_adjacency(a: &SparseMatrix, p: &Array2<f64>, q: &Array2<f64>) -> Result<FacetAdjacency> {
    let (rows, cols) = a.shape();
    if p.nrows() != rows || q.nrows() != cols {
        return Err(validation(format!(
            "factor shapes {}x{} and {}x{} do not match a {rows}x{cols} adjacency",
            p.nrows(),
            p.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    if p.ncols() != q.ncols() || p.ncols() == 0 {
        return Err(validation("P and Q must have the same positive number of columns"));
    }
    if p.iter().chain(q.iter()).any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(validation("P and Q must be finite and nonnegative"));
    }
    let k = p.ncols();
    let mut indptr = vec![0];
    let mut indices = Vec::with_capacity(a.nnz());
    let mut values = vec![Vec::with_capacity(a.nnz()); k];
    let mut share = vec![0.0; k];
    for i in 0..rows {
        let (js, ws) = a.row(i);
        for (&j, &w) in js.iter().zip(ws) {
            for (c, s) in share.iter_mut().enumerate() {
                *s = p[[i, c]] * q[[j, c]];
            }
            let total: f64 = share.iter().sum();
            indices.push(j);
            for (c, vals) in values.iter_mut().enumerate() {
                vals.push(if total > 0.0 { w * share[c] / total } else { w / k as f64 });
            }
        }
        indptr.push(indices.len());
    }
    Ok(FacetAdjacency { rows, cols, indptr, indices, values })
}

/// Writes `k i j value` lines for every positive facet entry.
pub fn write_facet_adjacency<W: Write>(out: &mut W, adj: &FacetAdjacency, a_ids: &IdMap, b_ids: &IdMap) -> Result<()> {
    writeln!(out, "# k i j value")?;
    for k in 0..adj.k() {
        for (i, j, v) in adj.entries(k).filter(|e| e.2 > 0.0) {
            writeln!(out, "{k} {} {} {v}", a_ids.label(i), b_ids.label(j))?;
        }
    }
    Ok(())
}

pub fn save_facet_adjacency(path: &Path, adj: &FacetAdjacency, a_ids: &IdMap, b_ids: &IdMap) -> Result<()> {
    let mut out = textio::create(path)?;
    write_facet_adjacency(&mut out, adj, a_ids, b_ids)?;
    out.flush()?;
    Ok(())
}

/// Reads a triple list back; the stored pattern is the union of listed
/// entries, with unlisted facet entries zero.
pub fn parse_facet_adjacency(text: &str, k: usize, a_ids: &IdMap, b_ids: &IdMap) -> Result<FacetAdjacency> {
    let mut triples = Vec::new();
    for (line, fields) in textio::data_lines(text) {
        if fields.len() != 4 {
            return Err(Error::Parse { line, message: "expected `k i j value`".into() });
        }
        let f: usize = textio::parse_field(line, fields[0], "facet")?;
        if f >= k {
            return Err(Error::Index { index: f, len: k });
        }
        let i = a_ids.get(fields[1]).ok_or_else(|| validation(format!("line {line}: unknown node {:?}", fields[1])))?;
        let j = b_ids.get(fields[2]).ok_or_else(|| validation(format!("line {line}: unknown node {:?}", fields[2])))?;
        let v: f64 = textio::parse_field(line, fields[3], "value")?;
        triples.push((i, j, f, v));
    }
    triples.sort_by_key(|t| (t.0, t.1, t.2));
    let mut indptr = vec![0; a_ids.len() + 1];
    let mut indices = Vec::new();
    let mut values = vec![Vec::new(); k];
    let mut last = None;
    for (i, j, f, v) in triples {
        if last != Some((i, j)) {
            indices.push(j);
            values.iter_mut().for_each(|vals| vals.push(0.0));
            indptr[i + 1] += 1;
            last = Some((i, j));
        }
        *values[f].last_mut().expect("entry pushed") = v;
    }
    for i in 0..a_ids.len() {
        indptr[i + 1] += indptr[i];
    }
    Ok(FacetAdjacency { rows: a_ids.len(), cols: b_ids.len(), indptr, indices, values })
}

pub fn load_facet_adjacency(path: &Path, k: usize, a_ids: &IdMap, b_ids: &IdMap) -> Result<FacetAdjacency> {
    parse_facet_adjacency(&textio::read_to_string(path)?, k, a_ids, b_ids)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// `max(x, slope·x)`.
    LeakyRelu(f64),
    Linear,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) if x < 0.0 => s * x,
            _ => x,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) if x < 0.0 => s,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodMode {
    /// Other-type nodes joined to `v` under facet `k`.
    Direct,
    /// Same-type nodes sharing a facet-`k` neighbor with `v`.
    CoNeighborhood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSide {
    A,
    B,
}

/// Facet-`k` neighborhood of node `v` on `side`, in ascending id order.
pub fn facet_neighborhood(
    v: usize,
    side: NodeSide,
    k: usize,
    adj: &FacetAdjacency,
    threshold: f64,
    mode: NeighborhoodMode,
) -> Result<Vec<usize>> {
    if !(threshold >= 0.0) {
        return Err(validation("neighborhood threshold must be nonnegative"));
    }
    if k >= adj.k() {
        return Err(Error::Index { index: k, len: adj.k() });
    }
    let (a_nb, b_nb) = direct_lists(adj, k, threshold);
    let (own, other) = match side {
        NodeSide::A => (&a_nb, &b_nb),
        NodeSide::B => (&b_nb, &a_nb),
    };
    if v >= own.len() {
        return Err(Error::Index { index: v, len: own.len() });
    }
    Ok(match mode {
        NeighborhoodMode::Direct => own[v].clone(),
        NeighborhoodMode::CoNeighborhood => co_neighbors(v, own, other),
    })
}

fn direct_lists(adj: &FacetAdjacency, k: usize, threshold: f64) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut a_nb = vec![Vec::new(); adj.rows];
    let mut b_nb = vec![Vec::new(); adj.cols];
    for (i, j, v) in adj.entries(k) {
        if v > threshold {
            a_nb[i].push(j);
            b_nb[j].push(i);
        }
    }
    (a_nb, b_nb)
}

fn co_neighbors(v: usize, own: &[Vec<usize>], other: &[Vec<usize>]) -> Vec<usize> {
    let mut out: Vec<usize> = own[v].iter().flat_map(|&x| other[x].iter().copied()).filter(|&u| u != v).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Aggregation sets over the combined index space `[A nodes; B nodes]`;
/// every set starts with the node itself.
struct Aggregation {
    sets: Vec<Vec<usize>>,
}

impl Aggregation {
    fn build(adj: &FacetAdjacency, k: usize, threshold: f64, mode: NeighborhoodMode) -> Self {
        let (a_nb, b_nb) = direct_lists(adj, k, threshold);
        let na = adj.rows;
        let mut sets = Vec::with_capacity(na + adj.cols);
        for i in 0..na {
            let nb = match mode {
                NeighborhoodMode::Direct => a_nb[i].iter().map(|&j| na + j).collect(),
                NeighborhoodMode::CoNeighborhood => co_neighbors(i, &a_nb, &b_nb),
            };
            sets.push(std::iter::once(i).chain(nb).collect());
        }
        for j in 0..adj.cols {
            let nb: Vec<usize> = match mode {
                NeighborhoodMode::Direct => b_nb[j].clone(),
                NeighborhoodMode::CoNeighborhood => co_neighbors(j, &b_nb, &a_nb).into_iter().map(|x| na + x).collect(),
            };
            sets.push(std::iter::once(na + j).chain(nb).collect());
        }
        Aggregation { sets }
    }

    fn mean(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(h.raw_dim());
        for (i, set) in self.sets.iter().enumerate() {
            let mut row = out.row_mut(i);
            for &j in set {
                row += &h.row(j);
            }
            row /= set.len() as f64;
        }
        out
    }
}

/// Parameters of one facet: free layer-0 vectors and per-layer weights for
/// each node type. Gradients use the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetParams {
    pub x_a: Array2<f64>,
    pub x_b: Array2<f64>,
    pub w_a: Vec<Array2<f64>>,
    pub w_b: Vec<Array2<f64>>,
}

impl FacetParams {
    fn zeros_like(other: &FacetParams) -> Self {
        FacetParams {
            x_a: Array2::zeros(other.x_a.raw_dim()),
            x_b: Array2::zeros(other.x_b.raw_dim()),
            w_a: other.w_a.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            w_b: other.w_b.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
        }
    }

    pub fn arrays(&self) -> Vec<&Array2<f64>> {
        let mut v = vec![&self.x_a, &self.x_b];
        v.extend(self.w_a.iter());
        v.extend(self.w_b.iter());
        v
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut v = vec![&mut self.x_a, &mut self.x_b];
        v.extend(self.w_a.iter_mut());
        v.extend(self.w_b.iter_mut());
        v
    }

    pub fn is_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.iter().all(|x| x.is_finite()))
    }

    pub fn checksum(&self) -> u64 {
        self.arrays().iter().flat_map(|a| a.iter()).fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
            (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub activation: Activation,
    pub mode: NeighborhoodMode,
    /// Facet mass an entry needs to count as a neighbor.
    pub threshold: f64,
    pub facets: Vec<FacetParams>,
}

impl GcnModel {
    /// Glorot-uniform weights and layer-0 vectors uniform in `±1/√D`.
    pub fn new(num_a: usize, num_b: usize, k: usize, dim: usize, depth: usize, seed: u64) -> Result<Self> {
        if num_a == 0 || num_b == 0 || k == 0 || dim == 0 || depth == 0 {
            return Err(validation(format!(
                "model sizes must be positive (A={num_a}, B={num_b}, K={k}, D={dim}, depth={depth})"
            )));
        }
        let facets = (0..k)
            .map(|f| {
                let mut r = rng::seeded(rng::derive(seed, 500 + f as u64));
                let mut uniform = |rows: usize, cols: usize, limit: f64| {
                    Array2::from_shape_simple_fn((rows, cols), || (r.random::<f64>() * 2.0 - 1.0) * limit)
                };
                let x_limit = 1.0 / (dim as f64).sqrt();
                let w_limit = (6.0 / (2 * dim) as f64).sqrt();
                let x_a = uniform(num_a, dim, x_limit);
                let x_b = uniform(num_b, dim, x_limit);
                let w_a = (0..depth).map(|_| uniform(dim, dim, w_limit)).collect();
                let w_b = (0..depth).map(|_| uniform(dim, dim, w_limit)).collect();
                FacetParams { x_a, x_b, w_a, w_b }
            })
            .collect();
        Ok(GcnModel { activation: Activation::LeakyRelu(0.2), mode: NeighborhoodMode::Direct, threshold: 0.0, facets })
    }

    pub fn k(&self) -> usize {
        self.facets.len()
    }

    pub fn dim(&self) -> usize {
        self.facets[0].x_a.ncols()
    }

    pub fn depth(&self) -> usize {
        self.facets[0].w_a.len()
    }

    pub fn num_a(&self) -> usize {
        self.facets[0].x_a.nrows()
    }

    pub fn num_b(&self) -> usize {
        self.facets[0].x_b.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.facets.iter().all(FacetParams::is_finite)
    }

    fn check(&self, adj: &FacetAdjacency, k: usize) -> Result<()> {
        if adj.k() != self.k() || adj.shape() != (self.num_a(), self.num_b()) {
            return Err(validation("model and facet adjacency disagree on shape"));
        }
        if k >= self.k() {
            return Err(Error::Index { index: k, len: self.k() });
        }
        Ok(())
    }
}

/// Intermediate values of one full-batch forward pass.
struct Trace {
    /// `h[d]` for `d = 0..=depth` over the combined index space.
    h: Vec<Array2<f64>>,
    /// Aggregated inputs and pre-activations of layers `1..=depth`.
    m: Vec<Array2<f64>>,
    z: Vec<Array2<f64>>,
}

fn forward_trace(params: &FacetParams, agg: &Aggregation, act: Activation) -> Trace {
    let na = params.x_a.nrows();
    let h0 = ndarray::concatenate(Axis(0), &[params.x_a.view(), params.x_b.view()]).expect("equal widths");
    let mut trace = Trace { h: vec![h0], m: Vec::new(), z: Vec::new() };
    for (wa, wb) in params.w_a.iter().zip(&params.w_b) {
        let m = agg.mean(trace.h.last().expect("layer 0"));
        let za = m.slice(ndarray::s![..na, ..]).dot(&wa.t());
        let zb = m.slice(ndarray::s![na.., ..]).dot(&wb.t());
        let z = ndarray::concatenate(Axis(0), &[za.view(), zb.view()]).expect("equal widths");
        trace.h.push(z.mapv(|x| act.apply(x)));
        trace.m.push(m);
        trace.z.push(z);
    }
    trace
}

/// Final-layer representations `(U^k, H^k)` of every node of both types.
pub fn forward_all(model: &GcnModel, adj: &FacetAdjacency, k: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    model.check(adj, k)?;
    let agg = Aggregation::build(adj, k, model.threshold, model.mode);
    let out = forward_trace(&model.facets[k], &agg, model.activation).h.pop().expect("final layer");
    let na = model.num_a();
    Ok((out.slice(ndarray::s![..na, ..]).to_owned(), out.slice(ndarray::s![na.., ..]).to_owned()))
}

/// Facet-`k` embeddings of the listed nodes of one type.
pub fn gcn_forward(model: &GcnModel, adj: &FacetAdjacency, k: usize, side: NodeSide, nodes: &[usize]) -> Result<Array2<f64>> {
    let (u, h) = forward_all(model, adj, k)?;
    let src = match side {
        NodeSide::A => u,
        NodeSide::B => h,
    };
    if let Some(&v) = nodes.iter().find(|&&v| v >= src.nrows()) {
        return Err(Error::Index { index: v, len: src.nrows() });
    }
    Ok(src.select(Axis(0), nodes))
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Weighted edge loss of facet `k` and its gradient. `negatives[e]` lists
/// the type-B negatives of the `e`-th edge of `adj.facet_edges(k, 0.0)`.
/// The loss is normalized by the facet's total edge mass; a facet without
/// edges has zero loss and zero gradient.
pub fn facet_loss_and_grad(
    model: &GcnModel,
    adj: &FacetAdjacency,
    k: usize,
    negatives: &[Vec<usize>],
) -> Result<(f64, FacetParams)> {
    model.check(adj, k)?;
    let edges = adj.facet_edges(k, 0.0);
    if negatives.len() != edges.len() {
        return Err(validation(format!("{} negative lists for {} edges", negatives.len(), edges.len())));
    }
    let params = &model.facets[k];
    let mut grad = FacetParams::zeros_like(params);
    if edges.is_empty() {
        return Ok((0.0, grad));
    }
    let na = model.num_a();
    let agg = Aggregation::build(adj, k, model.threshold, model.mode);
    let trace = forward_trace(params, &agg, model.activation);
    let out = trace.h.last().expect("final layer");
    let mass: f64 = edges.iter().map(|e| e.2).sum();

    let mut g_h = Array2::<f64>::zeros(out.raw_dim());
    let mut loss = 0.0;
    for ((i, j, w), negs) in edges.iter().zip(negatives) {
        let c = w / mass;
        let u = out.row(*i);
        let hj = out.row(na + j);
        let s = u.dot(&hj);
        loss += c * softplus(-s);
        let gp = -c * sigmoid(-s);
        g_h.row_mut(*i).scaled_add(gp, &hj);
        g_h.row_mut(na + j).scaled_add(gp, &u);
        for &n in negs {
            if n >= adj.cols {
                return Err(Error::Index { index: n, len: adj.cols });
            }
            let hn = out.row(na + n);
            let s = u.dot(&hn);
            loss += c * softplus(s);
            let gn = c * sigmoid(s);
            g_h.row_mut(*i).scaled_add(gn, &hn);
            g_h.row_mut(na + n).scaled_add(gn, &u);
        }
    }

    for d in (0..model.depth()).rev() {
        let z = &trace.z[d];
        let g_z = &g_h * &z.mapv(|x| model.activation.derivative(x));
        let (gza, gzb) = (g_z.slice(ndarray::s![..na, ..]), g_z.slice(ndarray::s![na.., ..]));
        let m = &trace.m[d];
        grad.w_a[d] = gza.t().dot(&m.slice(ndarray::s![..na, ..]));
        grad.w_b[d] = gzb.t().dot(&m.slice(ndarray::s![na.., ..]));
        let g_m = ndarray::concatenate(Axis(0), &[gza.dot(&params.w_a[d]).view(), gzb.dot(&params.w_b[d]).view()])
            .expect("equal widths");
        let mut g_prev = Array2::<f64>::zeros(g_m.raw_dim());
        for (i, set) in agg.sets.iter().enumerate() {
            let scale = 1.0 / set.len() as f64;
            for &j in set {
                g_prev.row_mut(j).scaled_add(scale, &g_m.row(i));
            }
        }
        g_h = g_prev;
    }
    grad.x_a = g_h.slice(ndarray::s![..na, ..]).to_owned();
    grad.x_b = g_h.slice(ndarray::s![na.., ..]).to_owned();
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnConfig {
    /// Dimension of each facet's representations.
    pub dim: usize,
    pub depth: usize,
    pub epochs: usize,
    /// Adam step size.
    pub learning_rate: f64,
    /// Type-B negatives per edge, redrawn every epoch.
    pub negatives: usize,
    pub seed: u64,
    pub mode: NeighborhoodMode,
    pub threshold: f64,
    /// Facets are trained in parallel when greater than one.
    pub workers: usize,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            dim: 6,
            depth: 2,
            epochs: 200,
            learning_rate: 0.01,
            negatives: 5,
            seed: 0,
            mode: NeighborhoodMode::Direct,
            threshold: 0.0,
            workers: 1,
        }
    }
}

impl GcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.depth == 0 || self.epochs == 0 || self.negatives == 0 || self.workers == 0 {
            return Err(validation("dim, depth, epochs, negatives and workers must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(validation("learning_rate must be positive"));
        }
        if !(self.threshold >= 0.0) {
            return Err(validation("threshold must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GcnOutput {
    pub model: GcnModel,
    /// `U` over type-A nodes and `H` over type-B nodes, one facet each.
    pub tables: EmbeddingTables,
    /// Summed facet loss per epoch.
    pub loss_trace: Vec<f64>,
}

struct Adam {
    m: FacetParams,
    v: FacetParams,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn step(&mut self, params: &mut FacetParams, grad: &FacetParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params.arrays_mut().into_iter().zip(grad.arrays()).zip(self.m.arrays_mut()).zip(self.v.arrays_mut()) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            });
        }
    }
}

fn train_facet(
    model: &GcnModel,
    adj: &FacetAdjacency,
    k: usize,
    sampler: &NegativeSampler,
    config: &GcnConfig,
) -> Result<(FacetParams, Vec<f64>)> {
    let edges = adj.facet_edges(k, 0.0);
    let mut local = model.clone();
    let mut trace = Vec::with_capacity(config.epochs);
    if edges.is_empty() {
        return Ok((local.facets.swap_remove(k), vec![0.0; config.epochs]));
    }
    let mut adam = Adam {
        m: FacetParams::zeros_like(&model.facets[k]),
        v: FacetParams::zeros_like(&model.facets[k]),
        t: 0,
    };
    let mut r = rng::seeded(rng::derive(config.seed, 1000 + k as u64));
    let mut negatives: Vec<Vec<usize>> = vec![Vec::with_capacity(config.negatives); edges.len()];
    for epoch in 0..config.epochs {
        for (list, &(_, j, _)) in negatives.iter_mut().zip(&edges) {
            list.clear();
            for _ in 0..config.negatives {
                let n = sampler.sample_node(&mut r);
                if n != j {
                    list.push(n);
                }
            }
        }
        let (loss, grad) = facet_loss_and_grad(&local, adj, k, &negatives)?;
        adam.step(&mut local.facets[k], &grad, config.learning_rate);
        if !loss.is_finite() || !local.facets[k].is_finite() {
            return Err(Error::NonFinite { epoch, observation: 0 });
        }
        trace.push(loss);
    }
    Ok((local.facets.swap_remove(k), trace))
}

/// Trains every facet on its own weighted edges with full-batch Adam.
pub fn train_gcn(graph: &BipartiteGraph, adj: &FacetAdjacency, config: &GcnConfig) -> Result<GcnOutput> {
    config.validate()?;
    if adj.shape() != (graph.num_a(), graph.num_b()) {
        return Err(validation("facet adjacency does not match the graph"));
    }
    let k = adj.k();
    let mut model = GcnModel::new(graph.num_a(), graph.num_b(), k, config.dim, config.depth, rng::derive(config.seed, 3))?;
    model.mode = config.mode;
    model.threshold = config.threshold;
    let degrees: Vec<f64> = (0..graph.num_b()).map(|b| graph.b_adjacency().degree(b) as f64).collect();
    let sampler = NegativeSampler::from_counts(&degrees, 0.75)?;
    let run = |f: usize| train_facet(&model, adj, f, &sampler, config);
    let results: Vec<Result<(FacetParams, Vec<f64>)>> = if config.workers > 1 {
        (0..k).into_par_iter().map(run).collect()
    } else {
        (0..k).map(run).collect()
    };
    let mut loss_trace = vec![0.0; config.epochs];
    let mut facets = Vec::with_capacity(k);
    for r in results {
        let (params, trace) = r?;
        for (t, l) in loss_trace.iter_mut().zip(trace) {
            *t += l;
        }
        facets.push(params);
    }
    model.facets = facets;
    let tables = export_tables(&model, adj)?;
    Ok(GcnOutput { model, tables, loss_trace })
}

/// Final-layer outputs of every facet gathered into embedding tables.
pub fn export_tables(model: &GcnModel, adj: &FacetAdjacency) -> Result<EmbeddingTables> {
    let (k, dim) = (model.k(), model.dim());
    let mut target = FacetTable::zeros(model.num_a(), k, dim);
    let mut context = FacetTable::zeros(model.num_b(), k, dim);
    for f in 0..k {
        let (u, h) = forward_all(model, adj, f)?;
        for (i, row) in u.rows().into_iter().enumerate() {
            target.vector_mut(i, f).iter_mut().zip(row).for_each(|(d, s)| *d = *s);
        }
        for (j, row) in h.rows().into_iter().enumerate() {
            context.vector_mut(j, f).iter_mut().zip(row).for_each(|(d, s)| *d = *s);
        }
    }
    Ok(EmbeddingTables { kind: TableKind::Bipartite, target, context })
}

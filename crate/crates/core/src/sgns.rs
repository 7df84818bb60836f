//! Skip-gram negative-sampling kernel shared by the table-based trainers.
//!
//! The loss of one positive pair with its negatives is
//! `−log σ(⟨h_ctx, u⟩) − Σ log σ(−⟨h_neg, u⟩)`, where `u` is the center's
//! target vector and the `h` are context vectors.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::embedding::{EmbeddingTables, FacetTable};
use crate::error::{validation, Result};
use crate::facets::{sample_facet, Distributions};
use crate::rng;

/// Logits are clamped to this magnitude before the logistic.
pub const LOGIT_CLAMP: f64 = 30.0;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `−log σ(x)` on a clamped logit.
#[inline]
fn neg_log_sigmoid(x: f64) -> f64 {
    (-x).exp().ln_1p()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A `(node, facet)` pair.
pub type FacetIndex = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct PairGrads {
    pub loss: f64,
    /// Gradient of the loss with respect to the center's target vector.
    pub center: Vec<f64>,
    /// Gradient with respect to the positive context vector.
    pub context: Vec<f64>,
    /// One gradient per listed negative, in order.
    pub negatives: Vec<Vec<f64>>,
}

/// Loss and gradients of one positive pair, evaluated at the current
/// parameters (no update is applied).
pub fn pair_loss_and_grads(
    center: FacetIndex,
    context: FacetIndex,
    negatives: &[FacetIndex],
    tables: &EmbeddingTables,
) -> PairGrads {
    let u = tables.target.vector(center.0, center.1);
    let dim = u.len();
    let mut g_center = vec![0.0; dim];

    let h = tables.context.vector(context.0, context.1);
    let s = dot(h, u).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    let mut loss = neg_log_sigmoid(s);
    let c = sigmoid(s) - 1.0;
    for (g, x) in g_center.iter_mut().zip(h) {
        *g += c * x;
    }
    let g_context = u.iter().map(|x| c * x).collect();

    let mut g_neg = Vec::with_capacity(negatives.len());
    for &(v, k) in negatives {
        let h = tables.context.vector(v, k);
        let s = dot(h, u).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        loss += neg_log_sigmoid(-s);
        let c = sigmoid(s);
        for (g, x) in g_center.iter_mut().zip(h) {
            *g += c * x;
        }
        g_neg.push(u.iter().map(|x| c * x).collect());
    }
    PairGrads { loss, center: g_center, context: g_context, negatives: g_neg }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Target,
    Context,
}

/// Parameter storage the SGD step reads from and writes to.
pub(crate) trait RowStore {
    fn read(&self, side: Side, offset: usize, out: &mut [f64]);
    fn add(&mut self, side: Side, offset: usize, delta: &[f64], scale: f64);
    fn row_is_finite(&self, side: Side, offset: usize, dim: usize) -> bool;
}

impl EmbeddingTables {
    fn side(&self, side: Side) -> &FacetTable {
        match side {
            Side::Target => &self.target,
            Side::Context => &self.context,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut FacetTable {
        match side {
            Side::Target => &mut self.target,
            Side::Context => &mut self.context,
        }
    }
}

impl RowStore for EmbeddingTables {
    fn read(&self, side: Side, offset: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.side(side).as_slice()[offset..offset + out.len()]);
    }

    fn add(&mut self, side: Side, offset: usize, delta: &[f64], scale: f64) {
        let row = &mut self.side_mut(side).as_mut_slice()[offset..offset + delta.len()];
        for (r, d) in row.iter_mut().zip(delta) {
            *r += scale * d;
        }
    }

    fn row_is_finite(&self, side: Side, offset: usize, dim: usize) -> bool {
        self.side(side).as_slice()[offset..offset + dim].iter().all(|v| v.is_finite())
    }
}

/// Tables shared by lock-free workers. Every entry is an `f64` stored as
/// bits; concurrent updates to the same row may overwrite each other.
pub(crate) struct SharedTables {
    target: Vec<AtomicU64>,
    context: Vec<AtomicU64>,
}

impl SharedTables {
    pub fn new(tables: &EmbeddingTables) -> Self {
        let wrap = |t: &FacetTable| t.as_slice().iter().map(|v| AtomicU64::new(v.to_bits())).collect();
        SharedTables { target: wrap(&tables.target), context: wrap(&tables.context) }
    }

    pub fn write_back(&self, tables: &mut EmbeddingTables) {
        for (dst, src) in tables.target.as_mut_slice().iter_mut().zip(&self.target) {
            *dst = f64::from_bits(src.load(Ordering::Relaxed));
        }
        for (dst, src) in tables.context.as_mut_slice().iter_mut().zip(&self.context) {
            *dst = f64::from_bits(src.load(Ordering::Relaxed));
        }
    }

    fn side(&self, side: Side) -> &[AtomicU64] {
        match side {
            Side::Target => &self.target,
            Side::Context => &self.context,
        }
    }
}

/// Per-worker handle onto [`SharedTables`].
pub(crate) struct SharedView<'a>(pub &'a SharedTables);

impl RowStore for SharedView<'_> {
    fn read(&self, side: Side, offset: usize, out: &mut [f64]) {
        let cells = &self.0.side(side)[offset..offset + out.len()];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn add(&mut self, side: Side, offset: usize, delta: &[f64], scale: f64) {
        let cells = &self.0.side(side)[offset..offset + delta.len()];
        for (c, d) in cells.iter().zip(delta) {
            let v = f64::from_bits(c.load(Ordering::Relaxed)) + scale * d;
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn row_is_finite(&self, side: Side, offset: usize, dim: usize) -> bool {
        self.0.side(side)[offset..offset + dim]
            .iter()
            .all(|c| f64::from_bits(c.load(Ordering::Relaxed)).is_finite())
    }
}

/// Scratch buffers for [`sgd_step`].
pub(crate) struct Scratch {
    u: Vec<f64>,
    h: Vec<f64>,
    grad: Vec<f64>,
    coeff: Vec<f64>,
}

impl Scratch {
    pub fn new(dim: usize) -> Self {
        Scratch { u: vec![0.0; dim], h: vec![0.0; dim], grad: vec![0.0; dim], coeff: Vec::new() }
    }
}

/// One SGD step on a positive pair and its negatives; all gradients are
/// taken at the parameters as they were before the step. Offsets are
/// row offsets into the target (`center`) and context tables. Returns the
/// pair loss, or `None` if a touched row became non-finite.
pub(crate) fn sgd_step<S: RowStore>(
    store: &mut S,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    scratch: &mut Scratch,
) -> Option<f64> {
    let dim = scratch.u.len();
    store.read(Side::Target, center, &mut scratch.u);
    scratch.grad.iter_mut().for_each(|g| *g = 0.0);

    // Context-side coefficients are computed from the pre-step rows; the
    // rows themselves are updated once every logit has been evaluated.
    let mut coeff = std::mem::take(&mut scratch.coeff);
    coeff.clear();
    coeff.resize(negatives.len() + 1, 0.0);

    store.read(Side::Context, context, &mut scratch.h);
    let s = dot(&scratch.h, &scratch.u).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    let mut loss = neg_log_sigmoid(s);
    coeff[0] = sigmoid(s) - 1.0;
    for (g, x) in scratch.grad.iter_mut().zip(&scratch.h) {
        *g += coeff[0] * x;
    }
    for (i, &off) in negatives.iter().enumerate() {
        store.read(Side::Context, off, &mut scratch.h);
        let s = dot(&scratch.h, &scratch.u).clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
        loss += neg_log_sigmoid(-s);
        coeff[i + 1] = sigmoid(s);
        for (g, x) in scratch.grad.iter_mut().zip(&scratch.h) {
            *g += coeff[i + 1] * x;
        }
    }

    store.add(Side::Context, context, &scratch.u, -lr * coeff[0]);
    for (i, &off) in negatives.iter().enumerate() {
        store.add(Side::Context, off, &scratch.u, -lr * coeff[i + 1]);
    }
    store.add(Side::Target, center, &scratch.grad, -lr);
    scratch.coeff = coeff;

    let finite = store.row_is_finite(Side::Target, center, dim)
        && store.row_is_finite(Side::Context, context, dim)
        && negatives.iter().all(|&o| store.row_is_finite(Side::Context, o, dim));
    finite.then_some(loss)
}

/// Draws negative nodes from `weight^power` and their facet from the
/// node's prior distribution.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    nodes: Vec<usize>,
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    /// Sampling weight of node `i` is `counts[i]^power`; zero-count nodes
    /// are never drawn.
    pub fn from_counts(counts: &[f64], power: f64) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for (i, &c) in counts.iter().enumerate() {
            if c > 0.0 {
                total += c.powf(power);
                nodes.push(i);
                cumulative.push(total);
            }
        }
        if nodes.is_empty() {
            return Err(validation("negative sampler needs at least one node with positive count"));
        }
        Ok(NegativeSampler { nodes, cumulative })
    }

    /// Unigram counts of every node occurrence in the corpus, raised to 3/4.
    pub fn from_corpus(walks: &[Vec<usize>], num_nodes: usize) -> Result<Self> {
        let mut counts = vec![0.0; num_nodes];
        for w in walks {
            for &v in w {
                counts[v] += 1.0;
            }
        }
        Self::from_counts(&counts, 0.75)
    }

    pub fn sample_node<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("nonempty");
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.nodes.len() - 1);
        self.nodes[i]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, prior: &Distributions) -> FacetIndex {
        let v = self.sample_node(rng);
        (v, sample_facet(prior.row(v), rng))
    }

    /// Endless seeded stream of `(node, facet)` negatives.
    pub fn stream<'a>(&'a self, prior: &'a Distributions, seed: u64) -> impl Iterator<Item = FacetIndex> + 'a {
        let mut r = rng::seeded(seed);
        std::iter::repeat_with(move || self.sample(&mut r, prior))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{init_tables, TableKind};

    #[test]
    fn zero_vectors_give_two_ln_two() {
        let t = EmbeddingTables {
            kind: TableKind::Homogeneous,
            target: FacetTable::zeros(2, 1, 3),
            context: FacetTable::zeros(2, 1, 3),
        };
        let g = pair_loss_and_grads((0, 0), (1, 0), &[(0, 0)], &t);
        assert!((g.loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn saturated_logits_give_vanishing_loss() {
        let mut t = init_tables(3, 1, 2, 0).unwrap();
        t.target.vector_mut(0, 0).copy_from_slice(&[40.0, 0.0]);
        t.context.vector_mut(1, 0).copy_from_slice(&[40.0, 0.0]);
        t.context.vector_mut(2, 0).copy_from_slice(&[-40.0, 0.0]);
        let g = pair_loss_and_grads((0, 0), (1, 0), &[(2, 0)], &t);
        assert!(g.loss >= 0.0 && g.loss < 1e-12, "{}", g.loss);
    }

    #[test]
    fn step_matches_reported_gradients() {
        let mut t = init_tables(4, 2, 3, 1).unwrap();
        for (i, v) in t.context.as_mut_slice().iter_mut().enumerate() {
            *v = ((i * 7 % 11) as f64 - 5.0) / 20.0;
        }
        let negs = [(2, 1), (3, 0), (2, 1)];
        let g = pair_loss_and_grads((0, 1), (1, 0), &negs, &t);
        let mut stepped = t.clone();
        let offs: Vec<usize> = negs.iter().map(|&(v, k)| t.context.offset(v, k)).collect();
        let lr = 0.1;
        let loss = sgd_step(
            &mut stepped,
            t.target.offset(0, 1),
            t.context.offset(1, 0),
            &offs,
            lr,
            &mut Scratch::new(3),
        )
        .unwrap();
        assert!((loss - g.loss).abs() < 1e-15);
        let mut expect = t.clone();
        for (x, d) in expect.target.vector_mut(0, 1).iter_mut().zip(&g.center) {
            *x -= lr * d;
        }
        for (x, d) in expect.context.vector_mut(1, 0).iter_mut().zip(&g.context) {
            *x -= lr * d;
        }
        for (&(v, k), gn) in negs.iter().zip(&g.negatives) {
            for (x, d) in expect.context.vector_mut(v, k).iter_mut().zip(gn) {
                *x -= lr * d;
            }
        }
        for (a, b) in stepped.context.as_slice().iter().zip(expect.context.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in stepped.target.as_slice().iter().zip(expect.target.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_prior_fixes_negative_facet() {
        let sampler = NegativeSampler::from_counts(&[3.0, 1.0], 0.75).unwrap();
        let prior = Distributions::from_rows(2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(sampler.stream(&prior, 3).take(1000).all(|(_, k)| k == 0));
    }

    #[test]
    fn unigram_power_ratio() {
        let sampler = NegativeSampler::from_counts(&[16.0, 1.0], 0.75).unwrap();
        let mut r = rng::seeded(8);
        let n = 100_000;
        let first = (0..n).filter(|_| sampler.sample_node(&mut r) == 0).count() as f64;
        let ratio = first / (n as f64 - first);
        assert!((ratio / 8.0 - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn uniform_pairs() {
        let sampler = NegativeSampler::from_counts(&[5.0; 4], 0.75).unwrap();
        let prior = Distributions::uniform(4, 2);
        let mut hist = [0usize; 8];
        let n = 100_000;
        for (v, k) in sampler.stream(&prior, 9).take(n) {
            hist[v * 2 + k] += 1;
        }
        for h in hist {
            let f = h as f64 / n as f64;
            assert!((f / 0.125 - 1.0).abs() < 0.05, "{f}");
        }
    }
}

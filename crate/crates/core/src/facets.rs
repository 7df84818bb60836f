//! Facet priors and facet-distribution arithmetic.
//!
//! A prior is estimated by nonnegative matrix factorization of the
//! adjacency matrix (`A ≈ PPᵀ` for homogeneous graphs, `A ≈ PQᵀ` for
//! bipartite ones) and row-normalized into per-node distributions over
//! the `K` facets. Both solvers use multiplicative updates and never let
//! the regularized objective increase.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;

use crate::error::{validation, Error, Result};
use crate::graph::{IdMap, SparseMatrix};
use crate::rng;
use crate::textio;

/// Added to multiplicative-update denominators.
pub const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NmfConfig {
    pub k: usize,
    pub alpha: f64,
    pub max_iters: usize,
    /// Relative objective decrease below which the solver stops.
    pub tol: f64,
    pub seed: u64,
    /// Blend factor of the symmetric update, `P ← P·(1 − β + β·ratio)`.
    pub damping: f64,
}

impl NmfConfig {
    pub fn new(k: usize) -> Self {
        NmfConfig { k, alpha: 0.05, max_iters: 500, tol: 1e-5, seed: 0, damping: 0.5 }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(validation("facet count K must be at least 1"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(validation(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(validation(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NmfResult {
    pub p: Array2<f64>,
    /// Type-B factor; `None` for the symmetric solver.
    pub q: Option<Array2<f64>>,
    pub objective: f64,
    pub iterations: usize,
    /// Objective value after initialization and after every iteration.
    pub trace: Vec<f64>,
}

/// Nonnegative input matrix, dense or sparse.
pub trait NmfInput {
    fn shape(&self) -> (usize, usize);
    /// `A · X`
    fn mul(&self, x: &Array2<f64>) -> Array2<f64>;
    /// `Aᵀ · X`
    fn tmul(&self, x: &Array2<f64>) -> Array2<f64>;
    fn min_value(&self) -> f64;
    fn sum(&self) -> f64;
    fn max_asymmetry(&self) -> f64;
    /// `‖A − P·Qᵀ‖²_F`
    fn residual_sq(&self, p: &Array2<f64>, q: &Array2<f64>) -> f64;
    fn zero_rows(&self) -> Vec<bool>;
    fn zero_cols(&self) -> Vec<bool>;
}

impl NmfInput for Array2<f64> {
    fn shape(&self) -> (usize, usize) {
        self.dim()
    }

    fn mul(&self, x: &Array2<f64>) -> Array2<f64> {
        self.dot(x)
    }

    fn tmul(&self, x: &Array2<f64>) -> Array2<f64> {
        self.t().dot(x)
    }

    fn min_value(&self) -> f64 {
        self.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn sum(&self) -> f64 {
        self.iter().sum()
    }

    fn max_asymmetry(&self) -> f64 {
        if self.nrows() != self.ncols() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for ((i, j), &v) in self.indexed_iter() {
            worst = worst.max((v - self[[j, i]]).abs());
        }
        worst
    }

    fn residual_sq(&self, p: &Array2<f64>, q: &Array2<f64>) -> f64 {
        let approx = p.dot(&q.t());
        self.iter().zip(approx.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn zero_rows(&self) -> Vec<bool> {
        self.axis_iter(Axis(0)).map(|r| r.iter().all(|&v| v == 0.0)).collect()
    }

    fn zero_cols(&self) -> Vec<bool> {
        self.axis_iter(Axis(1)).map(|c| c.iter().all(|&v| v == 0.0)).collect()
    }
}

impl NmfInput for SparseMatrix {
    fn shape(&self) -> (usize, usize) {
        SparseMatrix::shape(self)
    }

    fn mul(&self, x: &Array2<f64>) -> Array2<f64> {
        let (rows, _) = self.shape();
        let mut out = Array2::zeros((rows, x.ncols()));
        for i in 0..rows {
            let (cols, vals) = self.row(i);
            let mut acc = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                acc.scaled_add(v, &x.row(j));
            }
        }
        out
    }

    fn tmul(&self, x: &Array2<f64>) -> Array2<f64> {
        let (rows, cols) = self.shape();
        let mut out = Array2::zeros((cols, x.ncols()));
        for i in 0..rows {
            let (targets, vals) = self.row(i);
            for (&j, &v) in targets.iter().zip(vals) {
                out.row_mut(j).scaled_add(v, &x.row(i));
            }
        }
        out
    }

    fn min_value(&self) -> f64 {
        let (rows, cols) = self.shape();
        let stored = (0..rows).flat_map(|i| self.row(i).1.iter().copied()).fold(f64::INFINITY, f64::min);
        if self.nnz() < rows * cols {
            stored.min(0.0)
        } else {
            stored
        }
    }

    fn sum(&self) -> f64 {
        (0..self.shape().0).flat_map(|i| self.row(i).1.iter().copied()).sum()
    }

    fn max_asymmetry(&self) -> f64 {
        let (rows, cols) = self.shape();
        if rows != cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..rows {
            let (targets, vals) = self.row(i);
            for (&j, &v) in targets.iter().zip(vals) {
                let (back, back_vals) = self.row(j);
                let mirrored = back.binary_search(&i).map_or(0.0, |pos| back_vals[pos]);
                worst = worst.max((v - mirrored).abs());
            }
        }
        worst
    }

    fn residual_sq(&self, p: &Array2<f64>, q: &Array2<f64>) -> f64 {
        // ‖A‖² − 2⟨A, PQᵀ⟩ + ⟨PᵀP, QᵀQ⟩
        let mut a_sq = 0.0;
        let mut cross = 0.0;
        for i in 0..self.shape().0 {
            let (targets, vals) = self.row(i);
            for (&j, &v) in targets.iter().zip(vals) {
                a_sq += v * v;
                cross += v * p.row(i).dot(&q.row(j));
            }
        }
        let gram = (&p.t().dot(p) * &q.t().dot(q)).sum();
        (a_sq - 2.0 * cross + gram).max(0.0)
    }

    fn zero_rows(&self) -> Vec<bool> {
        (0..self.shape().0).map(|i| self.row(i).1.iter().all(|&v| v == 0.0)).collect()
    }

    fn zero_cols(&self) -> Vec<bool> {
        let (rows, cols) = self.shape();
        let mut zero = vec![true; cols];
        for i in 0..rows {
            let (targets, vals) = self.row(i);
            for (&j, &v) in targets.iter().zip(vals) {
                if v != 0.0 {
                    zero[j] = false;
                }
            }
        }
        zero
    }
}

fn init_factor(rows: usize, k: usize, scale: f64, zero: &[bool], rng: &mut rng::Rng) -> Array2<f64> {
    let mut m = Array2::zeros((rows, k));
    for i in 0..rows {
        for c in 0..k {
            // (0, 1]
            let u = 1.0 - rng.random::<f64>();
            m[[i, c]] = if zero[i] { 0.0 } else { u * scale };
        }
    }
    m
}

fn check_input<A: NmfInput>(a: &A) -> Result<()> {
    let min = a.min_value();
    if min < 0.0 || min.is_nan() {
        return Err(validation("factorization input must be nonnegative"));
    }
    Ok(())
}

fn sq_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

fn relative_drop(prev: f64, next: f64) -> f64 {
    if prev <= f64::MIN_POSITIVE {
        0.0
    } else {
        (prev - next) / prev
    }
}

/// Solves `min_{P ≥ 0} ‖A − PPᵀ‖² + α‖P‖²` for symmetric nonnegative `A`.
pub fn symmetric_nmf<A: NmfInput>(a: &A, config: &NmfConfig) -> Result<NmfResult> {
    symmetric_nmf_with(a, config, |_, _, _| {})
}

/// As [`symmetric_nmf`], calling `observe(iteration, P, objective)` after
/// every accepted update.
pub fn symmetric_nmf_with<A, F>(a: &A, config: &NmfConfig, mut observe: F) -> Result<NmfResult>
where
    A: NmfInput,
    F: FnMut(usize, &Array2<f64>, f64),
{
    config.validate()?;
    let (n, m) = a.shape();
    if n != m {
        return Err(validation(format!("symmetric factorization needs a square matrix, got {n}x{m}")));
    }
    check_input(a)?;
    let asym = a.max_asymmetry();
    if asym > 1e-9 {
        return Err(validation(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    if config.k > n {
        return Err(validation(format!("K = {} exceeds node count {n}", config.k)));
    }
    let k = config.k;
    let alpha = config.alpha;
    let mut rng = rng::seeded(config.seed);
    let mean = if n == 0 { 0.0 } else { a.sum() / (n * n) as f64 };
    let mut p = init_factor(n, k, (mean / k as f64).sqrt(), &a.zero_rows(), &mut rng);

    let objective = |p: &Array2<f64>| a.residual_sq(p, p) + alpha * sq_norm(p);
    let mut f = objective(&p);
    let mut trace = vec![f];
    let mut iterations = 0;
    for it in 1..=config.max_iters {
        let ap = a.mul(&p);
        let gram = p.t().dot(&p);
        let ppp = p.dot(&gram);
        let ratio = ndarray::Zip::from(&ap)
            .and(&ppp)
            .and(&p)
            .map_collect(|&num, &den, &pv| num / (den + 0.5 * alpha * pv + EPS));

        // Backtrack on the blend factor until the objective does not rise;
        // the update direction is a descent direction so a small enough
        // step always succeeds unless P is already stationary.
        let mut beta = config.damping;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = ndarray::Zip::from(&p).and(&ratio).map_collect(|&pv, &r| pv * (1.0 - beta + beta * r));
            let fc = objective(&cand);
            if fc <= f {
                accepted = Some((cand, fc));
                break;
            }
            beta *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };
        let drop = relative_drop(f, fc);
        p = cand;
        f = fc;
        iterations = it;
        trace.push(f);
        observe(it, &p, f);
        if drop < config.tol {
            break;
        }
    }
    Ok(NmfResult { p, q: None, objective: f, iterations, trace })
}

/// Solves `min_{P,Q ≥ 0} ‖A − PQᵀ‖² + α(‖P‖² + ‖Q‖²)` with Lee–Seung updates.
pub fn asymmetric_nmf<A: NmfInput>(a: &A, config: &NmfConfig) -> Result<NmfResult> {
    asymmetric_nmf_with(a, config, |_, _, _, _| {})
}

pub fn asymmetric_nmf_with<A, F>(a: &A, config: &NmfConfig, mut observe: F) -> Result<NmfResult>
where
    A: NmfInput,
    F: FnMut(usize, &Array2<f64>, &Array2<f64>, f64),
{
    config.validate()?;
    check_input(a)?;
    let (n, m) = a.shape();
    if config.k > n.min(m) {
        return Err(validation(format!("K = {} exceeds min({n}, {m})", config.k)));
    }
    let k = config.k;
    let alpha = config.alpha;
    let mut rng = rng::seeded(config.seed);
    let mean = if n * m == 0 { 0.0 } else { a.sum() / (n * m) as f64 };
    let scale = (mean / k as f64).sqrt();
    let mut p = init_factor(n, k, scale, &a.zero_rows(), &mut rng);
    let mut q = init_factor(m, k, scale, &a.zero_cols(), &mut rng);

    let objective = |p: &Array2<f64>, q: &Array2<f64>| a.residual_sq(p, q) + alpha * (sq_norm(p) + sq_norm(q));
    let mut f = objective(&p, &q);
    let mut trace = vec![f];
    let mut iterations = 0;
    for it in 1..=config.max_iters {
        let aq = a.mul(&q);
        let pqq = p.dot(&q.t().dot(&q));
        p = ndarray::Zip::from(&p)
            .and(&aq)
            .and(&pqq)
            .map_collect(|&pv, &num, &den| pv * num / (den + alpha * pv + EPS));
        let atp = a.tmul(&p);
        let qpp = q.dot(&p.t().dot(&p));
        q = ndarray::Zip::from(&q)
            .and(&atp)
            .and(&qpp)
            .map_collect(|&qv, &num, &den| qv * num / (den + alpha * qv + EPS));
        let fc = objective(&p, &q);
        let drop = relative_drop(f, fc);
        f = fc;
        iterations = it;
        trace.push(f);
        observe(it, &p, &q, f);
        if drop < config.tol {
            break;
        }
    }
    Ok(NmfResult { p, q: Some(q), objective: f, iterations, trace })
}

/// Row-stochastic facet distributions, one row of length `k` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Distributions {
    k: usize,
    data: Vec<f64>,
}

impl Distributions {
    pub fn uniform(rows: usize, k: usize) -> Self {
        Distributions { k, data: vec![1.0 / k as f64; rows * k] }
    }

    /// Wraps rows that are already normalized.
    pub fn from_rows(k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || !data.len().is_multiple_of(k) {
            return Err(validation("distribution data does not divide into rows of length K"));
        }
        let d = Distributions { k, data };
        for i in 0..d.len() {
            let row = d.row(i);
            let s: f64 = row.iter().sum();
            if row.iter().any(|&v| !(v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(validation(format!("row {i} is not a probability distribution")));
            }
        }
        Ok(d)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.len(), self.k), self.data.clone()).expect("shape")
    }
}

/// `p(k|v) = P[v,k] / Σ_c P[v,c]`; all-zero rows become uniform.
pub fn normalize_prior(p: &Array2<f64>) -> Result<Distributions> {
    let k = p.ncols();
    if k == 0 {
        return Err(validation("factor matrix has no columns"));
    }
    let mut data = Vec::with_capacity(p.len());
    for row in p.axis_iter(Axis(0)) {
        if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(validation("factor matrix has a negative or non-finite entry"));
        }
        let s: f64 = row.sum();
        if s > 0.0 {
            data.extend(row.iter().map(|v| v / s));
        } else {
            data.extend(std::iter::repeat_n(1.0 / k as f64, k));
        }
    }
    Ok(Distributions { k, data })
}

/// Global per-node facet distributions (the prior knowledge used by every
/// trainer). Bipartite priors carry a second table for type-B nodes.
#[derive(Debug, Clone)]
pub struct FacetPrior {
    pub p: Array2<f64>,
    pub q: Option<Array2<f64>>,
    pub alpha: f64,
    dist_a: Distributions,
    dist_b: Option<Distributions>,
}

impl FacetPrior {
    pub fn from_factors(p: Array2<f64>, q: Option<Array2<f64>>, alpha: f64) -> Result<Self> {
        let dist_a = normalize_prior(&p)?;
        let dist_b = match &q {
            Some(q) => {
                if q.ncols() != p.ncols() {
                    return Err(validation("P and Q disagree on K"));
                }
                Some(normalize_prior(q)?)
            }
            None => None,
        };
        Ok(FacetPrior { p, q, alpha, dist_a, dist_b })
    }

    /// Builds a prior from stored distributions; the factors are set to the
    /// distributions themselves.
    pub fn from_distributions(dist_a: Distributions, dist_b: Option<Distributions>) -> Result<Self> {
        if let Some(b) = &dist_b {
            if b.k() != dist_a.k() {
                return Err(validation("type-A and type-B priors disagree on K"));
            }
        }
        let p = dist_a.to_array();
        let q = dist_b.as_ref().map(Distributions::to_array);
        Ok(FacetPrior { p, q, alpha: 0.0, dist_a, dist_b })
    }

    /// Prior with every node uniform over `k` facets (`k = 1` gives the
    /// single-vector model).
    pub fn uniform(n: usize, m: Option<usize>, k: usize) -> Self {
        let dist_a = Distributions::uniform(n, k);
        let dist_b = m.map(|m| Distributions::uniform(m, k));
        Self::from_distributions(dist_a, dist_b).expect("uniform prior")
    }

    pub fn k(&self) -> usize {
        self.dist_a.k()
    }

    /// Distribution of a homogeneous or type-A node.
    pub fn dist(&self, v: usize) -> &[f64] {
        self.dist_a.row(v)
    }

    /// Distribution of a type-B node.
    pub fn dist_b(&self, u: usize) -> Option<&[f64]> {
        self.dist_b.as_ref().map(|d| d.row(u))
    }

    pub fn side_a(&self) -> &Distributions {
        &self.dist_a
    }

    pub fn side_b(&self) -> Option<&Distributions> {
        self.dist_b.as_ref()
    }

    pub fn is_bipartite(&self) -> bool {
        self.dist_b.is_some()
    }

    pub fn num_nodes(&self) -> usize {
        self.dist_a.len()
    }

    pub fn conditional(&self, v: usize, p_o: &[f64], rule: FacetRule) -> Vec<f64> {
        conditional_distribution(self.dist(v), p_o, rule)
    }
}

/// A training observation as seen by facet assignment.
#[derive(Debug, Clone, Copy)]
pub enum FacetObservation<'a> {
    /// Center node with its context window (homogeneous graph).
    Window { center: usize, context: &'a [usize] },
    /// Bipartite edge between type-A node `a` and type-B node `b`.
    Edge { a: usize, b: usize },
}

/// Facet distribution of an observation: the average of its nodes' priors.
pub fn observation_distribution(obs: FacetObservation<'_>, prior: &FacetPrior) -> Result<Vec<f64>> {
    let k = prior.k();
    let mut out = vec![0.0; k];
    match obs {
        FacetObservation::Window { center, context } => {
            if context.is_empty() {
                return Err(validation("observation context is empty"));
            }
            let n = prior.num_nodes();
            for &v in std::iter::once(&center).chain(context) {
                if v >= n {
                    return Err(Error::Index { index: v, len: n });
                }
            }
            window_distribution_into(prior, center, context, &mut out);
        }
        FacetObservation::Edge { a, b } => {
            let pb = prior
                .dist_b(b)
                .ok_or_else(|| validation("edge observation needs a bipartite prior"))?;
            for ((o, x), y) in out.iter_mut().zip(prior.dist(a)).zip(pb) {
                *o = (x + y) / 2.0;
            }
        }
    }
    Ok(out)
}

pub(crate) fn window_distribution_into(prior: &FacetPrior, center: usize, context: &[usize], out: &mut [f64]) {
    out.copy_from_slice(prior.dist(center));
    for &v in context {
        for (o, x) in out.iter_mut().zip(prior.dist(v)) {
            *o += x;
        }
    }
    let denom = (context.len() + 1) as f64;
    out.iter_mut().for_each(|o| *o /= denom);
}

/// How a node's facet distribution is conditioned on its observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetRule {
    /// Elementwise `min(p(v), p(o))`, renormalized.
    Min,
    /// `p(v|o) = p(o)`.
    Observation,
}

/// `p(v|o)` under `rule`. When the elementwise minimum vanishes entirely
/// the node's own prior is returned.
pub fn conditional_distribution(p_v: &[f64], p_o: &[f64], rule: FacetRule) -> Vec<f64> {
    let mut out = vec![0.0; p_v.len()];
    conditional_into(p_v, p_o, rule, &mut out);
    out
}

pub(crate) fn conditional_into(p_v: &[f64], p_o: &[f64], rule: FacetRule, out: &mut [f64]) {
    assert_eq!(p_v.len(), p_o.len(), "facet distributions differ in length");
    match rule {
        FacetRule::Observation => out.copy_from_slice(p_o),
        FacetRule::Min => {
            let mut s = 0.0;
            for ((o, &a), &b) in out.iter_mut().zip(p_v).zip(p_o) {
                *o = a.min(b);
                s += *o;
            }
            if s > 0.0 {
                out.iter_mut().for_each(|o| *o /= s);
            } else {
                out.copy_from_slice(p_v);
            }
        }
    }
}

/// Inverse-CDF draw from `dist`. A single-facet distribution returns 0
/// without consuming randomness.
pub fn sample_facet<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    if dist.len() == 1 {
        return 0;
    }
    let total: f64 = dist.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (k, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last_positive = k;
            if u < cum {
                return k;
            }
        }
    }
    last_positive
}

/// Writes `N K` followed by `label p_1 .. p_K` per node.
pub fn write_prior<W: Write>(out: &mut W, dist: &Distributions, ids: &IdMap) -> Result<()> {
    writeln!(out, "{} {}", dist.len(), dist.k())?;
    for i in 0..dist.len() {
        textio::write_row(out, ids.label(i), dist.row(i))?;
    }
    Ok(())
}

pub fn save_prior(path: &Path, dist: &Distributions, ids: &IdMap) -> Result<()> {
    let mut out = textio::create(path)?;
    write_prior(&mut out, dist, ids)?;
    out.flush()?;
    Ok(())
}

/// Parses a prior file, placing rows by label according to `ids` and
/// renormalizing each row.
pub fn parse_prior(text: &str, ids: &IdMap) -> Result<Distributions> {
    let mut lines = textio::data_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| validation("prior file is empty"))?;
    if header.len() != 2 {
        return Err(Error::Parse { line: hline, message: "expected header `N K`".into() });
    }
    let n: usize = textio::parse_field(hline, header[0], "N")?;
    let k: usize = textio::parse_field(hline, header[1], "K")?;
    if n != ids.len() {
        return Err(validation(format!("prior lists {n} nodes but the graph has {}", ids.len())));
    }
    if k == 0 {
        return Err(validation("prior has K = 0"));
    }
    let mut raw = Array2::<f64>::zeros((n, k));
    let mut seen = vec![false; n];
    for (line, fields) in lines {
        if fields.len() != k + 1 {
            return Err(Error::Parse { line, message: format!("expected label and {k} values") });
        }
        let v = ids
            .get(fields[0])
            .ok_or_else(|| validation(format!("line {line}: unknown node {:?}", fields[0])))?;
        for c in 0..k {
            raw[[v, c]] = textio::parse_field(line, fields[c + 1], "probability")?;
        }
        seen[v] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(validation(format!("prior has no row for node {:?}", ids.label(missing))));
    }
    normalize_prior(&raw)
}

pub fn load_prior(path: &Path, ids: &IdMap) -> Result<Distributions> {
    parse_prior(&textio::read_to_string(path)?, ids)
}

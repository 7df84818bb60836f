//! Turning per-facet tables into task representations: concatenated
//! features for classifiers and prior-weighted facet-pair similarity for
//! link ranking.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::embedding::{EmbeddingTables, FacetTable, TableKind};
use crate::error::{validation, Error, Result};
use crate::facets::{Distributions, FacetPrior};
use crate::graph::IdMap;
use crate::sgns::{dot, sigmoid};
use crate::textio;

/// One row per node: the facet vectors laid end to end.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEmbedding {
    pub data: Array2<f64>,
    /// Whether every block was scaled by its facet probability.
    pub weighted: bool,
}

impl JointEmbedding {
    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i).to_slice().expect("standard layout")
    }
}

/// Concatenates facets `1..K` of every node, scaling block `k` of node `v`
/// by `p(k|v)` when `weighted` is set.
pub fn concat(table: &FacetTable, dist: &Distributions, weighted: bool) -> Result<JointEmbedding> {
    if table.rows() != dist.len() || table.k() != dist.k() {
        return Err(validation(format!(
            "table is {}x{} but the prior is {}x{}",
            table.rows(),
            table.k(),
            dist.len(),
            dist.k()
        )));
    }
    let (k, d) = (table.k(), table.dim());
    let mut data = Array2::zeros((table.rows(), k * d));
    for (v, mut row) in data.rows_mut().into_iter().enumerate() {
        let p = dist.row(v);
        for f in 0..k {
            let scale = if weighted { p[f] } else { 1.0 };
            for (x, y) in row.iter_mut().skip(f * d).zip(table.vector(v, f)) {
                *x = scale * y;
            }
        }
    }
    Ok(JointEmbedding { data, weighted })
}

/// `Σ_k p[k]·V^k_v`.
pub fn weighted_sum(table: &FacetTable, v: usize, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; table.dim()];
    for (f, &w) in p.iter().enumerate() {
        for (o, x) in out.iter_mut().zip(table.vector(v, f)) {
            *o += w * x;
        }
    }
    out
}

/// `Σ_k Σ_k′ p_i[k] p_j[k′] ⟨X^k_i, Y^k′_j⟩`, evaluated as one inner product
/// of prior-weighted sums. The weights need not be normalized.
pub fn facet_pair_score(x: &FacetTable, i: usize, p_i: &[f64], y: &FacetTable, j: usize, p_j: &[f64]) -> f64 {
    dot(&weighted_sum(x, i, p_i), &weighted_sum(y, j, p_j))
}

/// `Σ_k p_i[k] p_j[k] σ(⟨X^k_i, Y^k_j⟩)`.
pub fn facet_mixture_score(x: &FacetTable, i: usize, p_i: &[f64], y: &FacetTable, j: usize, p_j: &[f64]) -> f64 {
    (0..x.k()).map(|f| p_i[f] * p_j[f] * sigmoid(dot(x.vector(i, f), y.vector(j, f)))).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMode {
    /// Both nodes index the target table.
    Homogeneous,
    /// Type-A target vectors against type-B context vectors.
    CrossType,
}

fn sides<'a>(
    tables: &'a EmbeddingTables,
    prior: &'a FacetPrior,
    mode: SimilarityMode,
) -> Result<(&'a FacetTable, &'a Distributions, &'a FacetTable, &'a Distributions)> {
    let (right, right_dist) = match mode {
        SimilarityMode::Homogeneous => (&tables.target, prior.side_a()),
        SimilarityMode::CrossType => {
            if tables.kind != TableKind::Bipartite {
                return Err(Error::Usage("cross-type similarity needs bipartite tables".into()));
            }
            let b = prior.side_b().ok_or_else(|| Error::Usage("cross-type similarity needs a bipartite prior".into()))?;
            (&tables.context, b)
        }
    };
    if tables.target.rows() != prior.num_nodes() || right.rows() != right_dist.len() || tables.k() != prior.k() {
        return Err(validation("tables and prior disagree on shape"));
    }
    Ok((&tables.target, prior.side_a(), right, right_dist))
}

/// Prior-weighted facet-pair similarity of `i` and `j`.
pub fn similarity(i: usize, j: usize, tables: &EmbeddingTables, prior: &FacetPrior, mode: SimilarityMode) -> Result<f64> {
    let (x, px, y, py) = sides(tables, prior, mode)?;
    if i >= x.rows() {
        return Err(Error::Index { index: i, len: x.rows() });
    }
    if j >= y.rows() {
        return Err(Error::Index { index: j, len: y.rows() });
    }
    Ok(facet_pair_score(x, i, px.row(i), y, j, py.row(j)))
}

/// How per-facet inner products are combined into one link score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreRule {
    /// `Σ_k Σ_k′ p_i[k] p_j[k′] ⟨X^k_i, Y^k′_j⟩` over every facet pair.
    FacetPairs,
    /// `Σ_k p_i[k] p_j[k] σ(⟨X^k_i, Y^k_j⟩)`: a prior-weighted mixture of
    /// per-facet link probabilities. Suits models whose facets are trained
    /// independently, where cross-facet products carry no signal.
    FacetMixture,
}

#[derive(Debug, Clone)]
enum Prepared {
    Sums { left: Vec<Vec<f64>>, right: Vec<Vec<f64>> },
    Mixture { x: FacetTable, px: Distributions, y: FacetTable, py: Distributions },
}

/// Scores many pairs of one embedding under a fixed [`ScoreRule`].
#[derive(Debug, Clone)]
pub struct FacetScorer {
    prepared: Prepared,
}

impl FacetScorer {
    pub fn new(tables: &EmbeddingTables, prior: &FacetPrior, mode: SimilarityMode) -> Result<Self> {
        Self::with_rule(tables, prior, mode, ScoreRule::FacetPairs)
    }

    pub fn with_rule(tables: &EmbeddingTables, prior: &FacetPrior, mode: SimilarityMode, rule: ScoreRule) -> Result<Self> {
        let (x, px, y, py) = sides(tables, prior, mode)?;
        let prepared = match rule {
            ScoreRule::FacetPairs => Prepared::Sums {
                left: (0..x.rows()).map(|v| weighted_sum(x, v, px.row(v))).collect(),
                right: (0..y.rows()).map(|v| weighted_sum(y, v, py.row(v))).collect(),
            },
            ScoreRule::FacetMixture => Prepared::Mixture { x: x.clone(), px: px.clone(), y: y.clone(), py: py.clone() },
        };
        Ok(FacetScorer { prepared })
    }

    pub fn score(&self, i: usize, j: usize) -> f64 {
        match &self.prepared {
            Prepared::Sums { left, right } => dot(&left[i], &right[j]),
            Prepared::Mixture { x, px, y, py } => facet_mixture_score(x, i, px.row(i), y, j, py.row(j)),
        }
    }

    pub fn num_left(&self) -> usize {
        match &self.prepared {
            Prepared::Sums { left, .. } => left.len(),
            Prepared::Mixture { x, .. } => x.rows(),
        }
    }

    pub fn num_right(&self) -> usize {
        match &self.prepared {
            Prepared::Sums { right, .. } => right.len(),
            Prepared::Mixture { y, .. } => y.rows(),
        }
    }

    /// Candidates by descending score, ties by ascending id.
    pub fn rank(&self, query: usize, candidates: &[usize]) -> Result<Vec<usize>> {
        if candidates.is_empty() {
            return Err(validation("candidate list is empty"));
        }
        if query >= self.num_left() {
            return Err(Error::Index { index: query, len: self.num_left() });
        }
        if let Some(&c) = candidates.iter().find(|&&c| c >= self.num_right()) {
            return Err(Error::Index { index: c, len: self.num_right() });
        }
        let scores: Vec<(usize, f64)> = candidates.iter().map(|&c| (c, self.score(query, c))).collect();
        Ok(rank_by_score(scores))
    }
}

/// Sorts `(id, score)` by descending score, ties by ascending id.
pub fn rank_by_score(mut scored: Vec<(usize, f64)>) -> Vec<usize> {
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    scored.into_iter().map(|(c, _)| c).collect()
}

pub fn rank_candidates(
    query: usize,
    candidates: &[usize],
    tables: &EmbeddingTables,
    prior: &FacetPrior,
    mode: SimilarityMode,
) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(validation("candidate list is empty"));
    }
    let scored = candidates
        .iter()
        .map(|&c| Ok((c, similarity(query, c, tables, prior, mode)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_by_score(scored))
}

/// Writes header `N KD` then `node v_1 .. v_KD` per row.
pub fn write_joint<W: Write>(out: &mut W, joint: &JointEmbedding, ids: &IdMap) -> Result<()> {
    if ids.len() != joint.len() {
        return Err(validation("id map and embedding disagree on node count"));
    }
    writeln!(out, "{} {}", joint.len(), joint.width())?;
    for v in 0..joint.len() {
        textio::write_row(out, ids.label(v), joint.row(v))?;
    }
    Ok(())
}

pub fn save_joint(path: &Path, joint: &JointEmbedding, ids: &IdMap) -> Result<()> {
    let mut out = textio::create(path)?;
    write_joint(&mut out, joint, ids)?;
    out.flush()?;
    Ok(())
}

/// Reads a joint embedding; the weighting flag is not stored and comes
/// back as `false`.
pub fn parse_joint(text: &str, ids: Option<&IdMap>) -> Result<(JointEmbedding, IdMap)> {
    let mut lines = textio::data_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| validation("embedding file is empty"))?;
    if header.len() != 2 {
        return Err(Error::Parse { line: hline, message: "expected header `N KD`".into() });
    }
    let n: usize = textio::parse_field(hline, header[0], "N")?;
    let width: usize = textio::parse_field(hline, header[1], "KD")?;
    let mut data = Array2::zeros((n, width));
    let mut seen = vec![false; n];
    let mut local = IdMap::default();
    for (line, fields) in lines {
        if fields.len() != width + 1 {
            return Err(Error::Parse { line, message: format!("expected node and {width} values") });
        }
        let v = match ids {
            Some(ids) => ids
                .get(fields[0])
                .ok_or_else(|| validation(format!("line {line}: unknown node {:?}", fields[0])))?,
            None => local.get_or_insert(fields[0]),
        };
        if v >= n {
            return Err(Error::Index { index: v, len: n });
        }
        for (slot, field) in data.row_mut(v).iter_mut().zip(&fields[1..]) {
            *slot = textio::parse_field(line, field, "value")?;
        }
        seen[v] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(validation("embedding file is missing rows"));
    }
    let map = ids.cloned().unwrap_or(local);
    Ok((JointEmbedding { data, weighted: false }, map))
}

pub fn load_joint(path: &Path, ids: Option<&IdMap>) -> Result<(JointEmbedding, IdMap)> {
    parse_joint(&textio::read_to_string(path)?, ids)
}

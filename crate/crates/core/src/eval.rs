//! Held-out link splits, ranking metrics and a linear stand-in classifier.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::Write;
use std::path::Path;

use log::warn;
use rand::seq::index;
use rand::Rng;

use crate::error::{validation, Error, Result};
use crate::graph::{AnyGraph, Edge, IdMap};
use crate::inference::{FacetScorer, JointEmbedding};
use crate::rng;
use crate::textio;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    /// One incident edge per eligible node of a homogeneous graph.
    OnePerNode,
    /// The most recent edge of every type-A node of a bipartite graph.
    LatestPerUser,
}

impl SplitStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SplitStrategy::OnePerNode => "one-per-node",
            SplitStrategy::LatestPerUser => "latest-per-user",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinkSplit {
    pub train: AnyGraph,
    pub test: Vec<Edge>,
    /// `(query, truth)` per test edge: the node the edge was held out for
    /// and its other endpoint.
    pub queries: Vec<(usize, usize)>,
}

/// Holds out test edges. Only nodes of degree at least two give up an
/// edge, and an edge is held out at most once.
pub fn split_links(graph: &AnyGraph, strategy: SplitStrategy, seed: u64) -> Result<LinkSplit> {
    match (graph, strategy) {
        (AnyGraph::Homogeneous(g), SplitStrategy::OnePerNode) => {
            let mut r = rng::seeded(rng::derive(seed, 11));
            let n = g.num_nodes();
            let mut degree: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
            let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
            for (e, edge) in g.edges().iter().enumerate() {
                incident[edge.src].push(e);
                incident[edge.dst].push(e);
            }
            let mut removed = vec![false; g.num_edges()];
            let mut queries = Vec::new();
            let mut test_ids = Vec::new();
            for v in 0..n {
                if degree[v] < 2 {
                    continue;
                }
                let other = |e: usize| {
                    let edge = &g.edges()[e];
                    if edge.src == v { edge.dst } else { edge.src }
                };
                let live: Vec<usize> = incident[v].iter().copied().filter(|&e| !removed[e]).collect();
                let safe: Vec<usize> = live.iter().copied().filter(|&e| degree[other(e)] >= 2).collect();
                let pool = if safe.is_empty() { &live } else { &safe };
                let e = pool[r.random_range(0..pool.len())];
                removed[e] = true;
                degree[v] -= 1;
                degree[other(e)] -= 1;
                queries.push((v, other(e)));
                test_ids.push(e);
            }
            let train: Vec<Edge> = g.edges().iter().zip(&removed).filter(|(_, &x)| !x).map(|(e, _)| *e).collect();
            let test = test_ids.iter().map(|&e| g.edges()[e]).collect();
            Ok(LinkSplit { train: AnyGraph::Homogeneous(g.with_edges(&train)?), test, queries })
        }
        (AnyGraph::Bipartite(g), SplitStrategy::LatestPerUser) => {
            let mut r = rng::seeded(rng::derive(seed, 12));
            let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); g.num_a()];
            for (e, edge) in g.edges().iter().enumerate() {
                by_user[edge.src].push(e);
            }
            let mut removed = vec![false; g.num_edges()];
            let mut queries = Vec::new();
            let mut test = Vec::new();
            for edges in &by_user {
                if edges.len() < 2 {
                    continue;
                }
                let stamped: Option<Vec<i64>> = edges.iter().map(|&e| g.edges()[e].timestamp).collect();
                let e = match stamped {
                    Some(ts) => {
                        // latest timestamp, lowest item id on ties
                        let best = ts.iter().copied().max().expect("nonempty");
                        edges
                            .iter()
                            .zip(&ts)
                            .filter(|(_, &t)| t == best)
                            .map(|(&e, _)| e)
                            .min_by_key(|&e| g.edges()[e].dst)
                            .expect("a maximum exists")
                    }
                    None => edges[r.random_range(0..edges.len())],
                };
                removed[e] = true;
                let edge = g.edges()[e];
                queries.push((edge.src, edge.dst));
                test.push(edge);
            }
            let train: Vec<Edge> = g.edges().iter().zip(&removed).filter(|(_, &x)| !x).map(|(e, _)| *e).collect();
            Ok(LinkSplit { train: AnyGraph::Bipartite(g.with_edges(&train)?), test, queries })
        }
        (_, s) => Err(Error::Usage(format!("split strategy {} does not apply to this graph type", s.name()))),
    }
}

/// Writes `query truth` label pairs, one per line.
pub fn write_queries<W: Write>(out: &mut W, queries: &[(usize, usize)], query_ids: &IdMap, truth_ids: &IdMap) -> Result<()> {
    for &(q, t) in queries {
        writeln!(out, "{} {}", query_ids.label(q), truth_ids.label(t))?;
    }
    Ok(())
}

pub fn save_queries(path: &Path, queries: &[(usize, usize)], query_ids: &IdMap, truth_ids: &IdMap) -> Result<()> {
    let mut out = textio::create(path)?;
    write_queries(&mut out, queries, query_ids, truth_ids)?;
    out.flush()?;
    Ok(())
}

/// Parses `query truth` lines. Pairs naming a node unknown to the maps are
/// returned separately so callers can report them.
pub fn parse_queries(text: &str, query_ids: &IdMap, truth_ids: &IdMap) -> Result<(Vec<(usize, usize)>, Vec<usize>)> {
    let mut queries = Vec::new();
    let mut unknown = Vec::new();
    for (line, fields) in textio::data_lines(text) {
        if fields.len() != 2 {
            return Err(Error::Parse { line, message: "expected `query truth`".into() });
        }
        match (query_ids.get(fields[0]), truth_ids.get(fields[1])) {
            (Some(q), Some(t)) => queries.push((q, t)),
            _ => unknown.push(line),
        }
    }
    Ok((queries, unknown))
}

pub fn load_queries(path: &Path, query_ids: &IdMap, truth_ids: &IdMap) -> Result<(Vec<(usize, usize)>, Vec<usize>)> {
    parse_queries(&textio::read_to_string(path)?, query_ids, truth_ids)
}

/// 1-based position of `truth` in `ranked`.
pub fn truth_rank(ranked: &[usize], truth: usize) -> Result<usize> {
    ranked
        .iter()
        .position(|&c| c == truth)
        .map(|p| p + 1)
        .ok_or_else(|| Error::Protocol(format!("true node {truth} is not among the candidates")))
}

/// Fraction of queries whose truth is within the top `k`, for every `k`.
pub fn hit_ratio<'a>(
    queries: impl IntoIterator<Item = (&'a [usize], usize)>,
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    let ranks = queries
        .into_iter()
        .map(|(ranked, truth)| truth_rank(ranked, truth))
        .collect::<Result<Vec<_>>>()?;
    Ok(hit_ratio_from_ranks(&ranks, ks))
}

pub fn hit_ratio_from_ranks(ranks: &[usize], ks: &[usize]) -> BTreeMap<usize, f64> {
    let n = ranks.len().max(1) as f64;
    ks.iter().map(|&k| (k, ranks.iter().filter(|&&r| r <= k).count() as f64 / n)).collect()
}

/// Probability that a positive outscores a negative, ties counted half,
/// from midranks of the pooled scores.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(validation("AUC needs at least one positive and one negative score"));
    }
    if pos.iter().chain(neg).any(|x| x.is_nan()) {
        return Err(validation("AUC scores must not be NaN"));
    }
    let mut pooled: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * pooled[i..j].iter().filter(|p| p.1).count() as f64;
        i = j;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// The truth followed by up to `num_negatives` nodes drawn uniformly
/// without replacement from the query's non-neighbors in `graph`.
pub fn candidate_protocol(query: usize, truth: usize, graph: &AnyGraph, num_negatives: usize, seed: u64) -> Result<Vec<usize>> {
    let cands = draw_candidates(query, truth, graph, num_negatives, seed)?;
    if cands.len() <= num_negatives {
        warn!("query {query}: only {} non-neighbors available, {num_negatives} requested", cands.len() - 1);
    }
    Ok(cands)
}

fn draw_candidates(query: usize, truth: usize, graph: &AnyGraph, num_negatives: usize, seed: u64) -> Result<Vec<usize>> {
    if num_negatives == 0 {
        return Err(validation("num_negatives must be at least 1"));
    }
    let (pool_size, neighbors): (usize, HashSet<usize>) = match graph {
        AnyGraph::Homogeneous(g) => {
            if query >= g.num_nodes() || truth >= g.num_nodes() {
                return Err(Error::Index { index: query.max(truth), len: g.num_nodes() });
            }
            (g.num_nodes(), g.neighbor_slice(query).0.iter().copied().chain([query]).collect())
        }
        AnyGraph::Bipartite(g) => {
            if query >= g.num_a() {
                return Err(Error::Index { index: query, len: g.num_a() });
            }
            if truth >= g.num_b() {
                return Err(Error::Index { index: truth, len: g.num_b() });
            }
            (g.num_b(), g.a_adjacency().row(query).0.iter().copied().collect())
        }
    };
    let eligible: Vec<usize> = (0..pool_size).filter(|c| *c != truth && !neighbors.contains(c)).collect();
    let take = num_negatives.min(eligible.len());
    let mut r = rng::seeded(seed);
    let mut out = vec![truth];
    out.extend(index::sample(&mut r, eligible.len(), take).into_iter().map(|i| eligible[i]));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkEvalConfig {
    pub ks: Vec<usize>,
    pub num_negatives: usize,
    pub seed: u64,
}

impl Default for LinkEvalConfig {
    fn default() -> Self {
        LinkEvalConfig { ks: vec![10, 50, 100, 200], num_negatives: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub hr_at_k: BTreeMap<usize, f64>,
    pub auc: Option<f64>,
    pub micro_f1: Option<f64>,
    pub macro_f1: Option<f64>,
    pub seed: u64,
    pub split: String,
    pub candidates: usize,
    pub queries: usize,
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>10}", "metric", "value");
        for (k, v) in &self.hr_at_k {
            let _ = writeln!(s, "{:<12} {:>10.4}", format!("HR@{k}"), v);
        }
        for (name, v) in [("AUC", self.auc), ("micro-F1", self.micro_f1), ("macro-F1", self.macro_f1)] {
            if let Some(v) = v {
                let _ = writeln!(s, "{name:<12} {v:>10.4}");
            }
        }
        let _ = writeln!(s, "split {} | queries {} | candidates {} | seed {}", self.split, self.queries, self.candidates, self.seed);
        s
    }

    /// `metric=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.hr_at_k {
            let _ = writeln!(s, "hr@{k}={v}");
        }
        for (name, v) in [("auc", self.auc), ("micro_f1", self.micro_f1), ("macro_f1", self.macro_f1)] {
            if let Some(v) = v {
                let _ = writeln!(s, "{name}={v}");
            }
        }
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "split={}", self.split);
        let _ = writeln!(s, "candidates={}", self.candidates);
        let _ = writeln!(s, "queries={}", self.queries);
        s
    }

    pub fn parse_key_values(text: &str) -> Result<Self> {
        let mut r = EvalReport::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let n = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: n, message: "expected key=value".into() })?;
            match key {
                "auc" => r.auc = Some(textio::parse_field(n, value, key)?),
                "micro_f1" => r.micro_f1 = Some(textio::parse_field(n, value, key)?),
                "macro_f1" => r.macro_f1 = Some(textio::parse_field(n, value, key)?),
                "seed" => r.seed = textio::parse_field(n, value, key)?,
                "split" => r.split = value.to_string(),
                "candidates" => r.candidates = textio::parse_field(n, value, key)?,
                "queries" => r.queries = textio::parse_field(n, value, key)?,
                _ => match key.strip_prefix("hr@") {
                    Some(k) => {
                        r.hr_at_k.insert(textio::parse_field(n, k, "k")?, textio::parse_field(n, value, key)?);
                    }
                    None => return Err(Error::Parse { line: n, message: format!("unknown key {key:?}") }),
                },
            }
        }
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = textio::create(path)?;
        out.write_all(self.to_key_values().as_bytes())?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_key_values(&textio::read_to_string(path)?)
    }
}

/// Ranks the truth of every query against sampled non-neighbors and pools
/// truth scores against negative scores for the AUC.
pub fn evaluate_links(scorer: &FacetScorer, split: &LinkSplit, config: &LinkEvalConfig) -> Result<EvalReport> {
    if split.queries.is_empty() {
        return Err(validation("split has no test queries"));
    }
    let mut ranks = Vec::with_capacity(split.queries.len());
    let mut pos = Vec::with_capacity(split.queries.len());
    let mut neg = Vec::new();
    let mut sizes = 0;
    let mut short = 0;
    for (q, &(query, truth)) in split.queries.iter().enumerate() {
        let cands = draw_candidates(query, truth, &split.train, config.num_negatives, rng::derive(config.seed, q as u64))?;
        sizes += cands.len();
        short += usize::from(cands.len() <= config.num_negatives);
        let ranked = scorer.rank(query, &cands)?;
        ranks.push(truth_rank(&ranked, truth)?);
        pos.push(scorer.score(query, truth));
        neg.extend(cands[1..].iter().map(|&c| scorer.score(query, c)));
    }
    if short > 0 {
        warn!("{short} of {} queries had fewer than {} non-neighbors to draw from", split.queries.len(), config.num_negatives);
    }
    let split_name = match split.train {
        AnyGraph::Homogeneous(_) => SplitStrategy::OnePerNode.name(),
        AnyGraph::Bipartite(_) => SplitStrategy::LatestPerUser.name(),
    };
    Ok(EvalReport {
        hr_at_k: hit_ratio_from_ranks(&ranks, &config.ks),
        auc: Some(auc(&pos, &neg)?),
        seed: config.seed,
        split: split_name.to_string(),
        candidates: sizes / split.queries.len(),
        queries: split.queries.len(),
        ..Default::default()
    })
}

/// Per-node label sets; nodes may carry several labels or none.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub names: Vec<String>,
    pub per_node: Vec<Vec<usize>>,
}

impl Labels {
    pub fn num_classes(&self) -> usize {
        self.names.len()
    }
}

/// Parses `node label` lines; repeated lines add labels.
pub fn parse_labels(text: &str, ids: &IdMap) -> Result<Labels> {
    let mut names = IdMap::default();
    let mut per_node = vec![Vec::new(); ids.len()];
    for (line, fields) in textio::data_lines(text) {
        if fields.len() != 2 {
            return Err(Error::Parse { line, message: "expected `node label`".into() });
        }
        let v = ids.get(fields[0]).ok_or_else(|| validation(format!("line {line}: unknown node {:?}", fields[0])))?;
        let c = names.get_or_insert(fields[1]);
        if !per_node[v].contains(&c) {
            per_node[v].push(c);
        }
    }
    Ok(Labels { names: names.labels().to_vec(), per_node })
}

pub fn load_labels(path: &Path, ids: &IdMap) -> Result<Labels> {
    parse_labels(&textio::read_to_string(path)?, ids)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyConfig {
    pub train_fraction: f64,
    pub seed: u64,
    pub epochs: usize,
    pub l2: f64,
    pub learning_rate: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { train_fraction: 0.8, seed: 0, epochs: 200, l2: 1e-4, learning_rate: 0.5 }
    }
}

fn sample_key(seed: u64, x: &[f64], labels: &[usize]) -> u64 {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    for v in x {
        v.to_bits().hash(&mut h);
    }
    let mut l = labels.to_vec();
    l.sort_unstable();
    l.hash(&mut h);
    h.finish()
}

/// One-vs-rest logistic regression on standardized features. Returns
/// `(micro_f1, macro_f1)` on the held-out fraction. Each held-out node is
/// assigned its top-`m` classes, `m` being its number of true labels.
pub fn classify(features: &JointEmbedding, labels: &Labels, config: &ClassifyConfig) -> Result<(f64, f64)> {
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(validation("train_fraction must lie strictly between 0 and 1"));
    }
    if labels.per_node.len() != features.len() {
        return Err(validation("labels and features disagree on node count"));
    }
    let classes = labels.num_classes();
    if classes < 2 {
        return Err(validation("classification needs at least two classes"));
    }
    // Identical samples hash alike, so duplicates always land on the same side.
    let mut keyed: Vec<(u64, usize)> = (0..features.len())
        .filter(|&v| !labels.per_node[v].is_empty())
        .map(|v| (sample_key(config.seed, features.row(v), &labels.per_node[v]), v))
        .collect();
    keyed.sort_unstable();
    let cut = config.train_fraction * keyed.len() as f64;
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start;
        while end < keyed.len() && keyed[end].0 == keyed[start].0 {
            end += 1;
        }
        let side = if (start as f64) < cut { &mut train } else { &mut test };
        side.extend(keyed[start..end].iter().map(|p| p.1));
        start = end;
    }
    if train.is_empty() || test.is_empty() {
        return Err(validation("split left no training or no test samples"));
    }

    let d = features.width();
    let mut mean = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for &v in &train {
        for (m, x) in mean.iter_mut().zip(features.row(v)) {
            *m += x / train.len() as f64;
        }
    }
    for &v in &train {
        for ((s, m), x) in sd.iter_mut().zip(&mean).zip(features.row(v)) {
            *s += (x - m).powi(2) / train.len() as f64;
        }
    }
    let sd: Vec<f64> = sd.iter().map(|s| if *s > 1e-24 { s.sqrt() } else { 1.0 }).collect();
    let standardize = |v: usize| -> Vec<f64> {
        features.row(v).iter().zip(&mean).zip(&sd).map(|((x, m), s)| (x - m) / s).chain([1.0]).collect()
    };
    let xs: Vec<Vec<f64>> = train.iter().map(|&v| standardize(v)).collect();

    let mut weights = vec![vec![0.0; d + 1]; classes];
    let n = xs.len() as f64;
    for (c, w) in weights.iter_mut().enumerate() {
        let ys: Vec<f64> = train.iter().map(|&v| f64::from(u8::from(labels.per_node[v].contains(&c)))).collect();
        for _ in 0..config.epochs {
            let mut grad = vec![0.0; d + 1];
            for (x, y) in xs.iter().zip(&ys) {
                let p = crate::sgns::sigmoid(crate::sgns::dot(w, x));
                for (g, xi) in grad.iter_mut().zip(x) {
                    *g += (p - y) * xi / n;
                }
            }
            for (i, (wi, g)) in w.iter_mut().zip(&grad).enumerate() {
                let reg = if i < d { config.l2 * *wi } else { 0.0 };
                *wi -= config.learning_rate * (g + reg);
            }
        }
    }

    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for &v in &test {
        let x = standardize(v);
        let truth = &labels.per_node[v];
        let scored: Vec<(usize, f64)> = weights.iter().enumerate().map(|(c, w)| (c, crate::sgns::dot(w, &x))).collect();
        let predicted: Vec<usize> = crate::inference::rank_by_score(scored).into_iter().take(truth.len()).collect();
        for c in 0..classes {
            match (predicted.contains(&c), truth.contains(&c)) {
                (true, true) => tp[c] += 1,
                (true, false) => fp[c] += 1,
                (false, true) => fn_[c] += 1,
                (false, false) => {}
            }
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 }
    };
    let micro = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let active: Vec<usize> = (0..classes).filter(|&c| tp[c] + fp[c] + fn_[c] > 0).collect();
    let macro_f1 = active.iter().map(|&c| f1(tp[c], fp[c], fn_[c])).sum::<f64>() / active.len().max(1) as f64;
    Ok((micro, macro_f1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{BipartiteGraph, Graph};

    #[test]
    fn path_split_holds_out_middle_edge() {
        let g = AnyGraph::Homogeneous(Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap());
        let s = split_links(&g, SplitStrategy::OnePerNode, 4).unwrap();
        assert_eq!(s.test.len(), 1);
        assert_eq!(s.queries[0].0, 1);
        assert!(matches!(split_links(&g, SplitStrategy::LatestPerUser, 4), Err(Error::Usage(_))));
    }

    #[test]
    fn latest_timestamp_wins() {
        let ids = IdMap::numeric(1);
        let items = IdMap::numeric(2);
        let g = BipartiteGraph::with_ids(ids, items, [(0, 0, 1.0, Some(5)), (0, 1, 1.0, Some(9))]).unwrap();
        let s = split_links(&AnyGraph::Bipartite(g), SplitStrategy::LatestPerUser, 0).unwrap();
        assert_eq!(s.queries, vec![(0, 1)]);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[2.0, 3.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auc(&[1.0, 1.0], &[1.0]).unwrap(), 0.5);
        assert_eq!(auc(&[1.0], &[0.0, 2.0]).unwrap(), 0.5);
        assert!(auc(&[], &[1.0]).is_err());
    }

    #[test]
    fn hit_ratio_examples() {
        let ranked: Vec<usize> = (0..200).collect();
        let hr = hit_ratio([(&ranked[..], 10)], &[10, 50]).unwrap();
        assert_eq!(hr[&10], 0.0);
        assert_eq!(hr[&50], 1.0);
        let hr = hit_ratio([(&ranked[..], 2), (&ranked[..], 29)], &[10]).unwrap();
        assert_eq!(hr[&10], 0.5);
        assert!(matches!(hit_ratio([(&ranked[..], 999)], &[10]), Err(Error::Protocol(_))));
    }

    #[test]
    fn report_round_trip() {
        let mut r = EvalReport { auc: Some(0.75), seed: 3, split: "one-per-node".into(), candidates: 201, queries: 9, ..Default::default() };
        r.hr_at_k.insert(10, 0.25);
        r.hr_at_k.insert(50, 0.5);
        assert_eq!(EvalReport::parse_key_values(&r.to_key_values()).unwrap(), r);
        assert!(r.to_table().contains("HR@10"));
    }

    #[test]
    fn single_class_rejected() {
        let f = JointEmbedding { data: ndarray::Array2::zeros((4, 2)), weighted: false };
        let labels = Labels { names: vec!["x".into()], per_node: vec![vec![0]; 4] };
        assert!(classify(&f, &labels, &ClassifyConfig::default()).is_err());
    }
}

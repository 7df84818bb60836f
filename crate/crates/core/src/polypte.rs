//! Facet-sampled edge embedding for bipartite graphs.
//!
//! Each observation is one edge `(a, b)`. Its facet distribution is the
//! average of the endpoint priors, and both endpoint facets are drawn from
//! it (the observation rule) unless the min rule is selected. `U` holds
//! type-A vectors, `H` type-B vectors.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};

use crate::embedding::{init_bipartite_tables, EmbeddingTables};
use crate::error::{validation, Error, Result};
use crate::facets::{conditional_into, sample_facet, FacetPrior, FacetRule};
use crate::graph::BipartiteGraph;
use crate::polydeepwalk::{learning_rate, Snapshot, TrainObserver, TrainOutput};
use crate::rng;
use crate::sgns::{dot, sgd_step, NegativeSampler, RowStore, Scratch, SharedTables, SharedView};

#[derive(Debug, Clone, PartialEq)]
pub struct PteConfig {
    /// Dimension of each facet vector.
    pub dim: usize,
    pub negatives: usize,
    /// Facet assignments per sampled edge; `None` means `K²`.
    pub facet_rate: Option<usize>,
    /// Total edge draws; `None` means 50 passes over the edge set.
    pub edge_samples: Option<u64>,
    pub learning_rate: f64,
    pub seed: u64,
    pub workers: usize,
    pub rule: FacetRule,
    /// Draw edges proportionally to weight instead of uniformly.
    pub weighted_edges: bool,
}

impl Default for PteConfig {
    fn default() -> Self {
        PteConfig {
            dim: 6,
            negatives: 30,
            facet_rate: None,
            edge_samples: None,
            learning_rate: 0.025,
            seed: 0,
            workers: 1,
            rule: FacetRule::Observation,
            weighted_edges: false,
        }
    }
}

impl PteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(validation("dim must be at least 1"));
        }
        if self.negatives == 0 {
            return Err(validation("negatives must be at least 1"));
        }
        if self.facet_rate == Some(0) {
            return Err(validation("facet_rate must be at least 1"));
        }
        if self.edge_samples == Some(0) {
            return Err(validation("edge_samples must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(validation("learning_rate must be positive"));
        }
        if self.workers == 0 {
            return Err(validation("workers must be at least 1"));
        }
        Ok(())
    }

    pub fn resolved_facet_rate(&self, k: usize) -> usize {
        self.facet_rate.unwrap_or(k * k)
    }

    pub fn resolved_samples(&self, num_edges: usize) -> u64 {
        self.edge_samples.unwrap_or(50 * num_edges as u64)
    }
}

enum EdgeSampler {
    Uniform(usize),
    Weighted(WeightedAliasIndex<f64>),
}

impl EdgeSampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        match self {
            EdgeSampler::Uniform(n) => rng.random_range(0..*n),
            EdgeSampler::Weighted(alias) => alias.sample(rng),
        }
    }
}

struct Shared<'a> {
    graph: &'a BipartiteGraph,
    prior: &'a FacetPrior,
    edges: &'a EdgeSampler,
    negatives: &'a NegativeSampler,
    config: &'a PteConfig,
    facet_rate: usize,
    total_steps: u64,
    step: &'a AtomicU64,
}

fn run_samples<S: RowStore + Snapshot>(
    store: &mut S,
    samples: u64,
    ctx: &Shared<'_>,
    rng: &mut rng::Rng,
    observer: &mut dyn TrainObserver,
    chunk: u64,
    trace: &mut Vec<(f64, u64)>,
) -> Result<()> {
    let k = ctx.prior.k();
    let dim = ctx.config.dim;
    let off = |v: usize, f: usize| (v * k + f) * dim;
    let dist_b = ctx.prior.side_b().expect("checked bipartite prior");
    let mut scratch = Scratch::new(dim);
    let mut p_o = vec![0.0; k];
    let mut cond = vec![0.0; k];
    let mut negs = Vec::with_capacity(ctx.config.negatives);
    for t in 0..samples {
        let e = ctx.graph.edges()[ctx.edges.draw(rng)];
        let (a, b) = (e.src, e.dst);
        let pa = ctx.prior.dist(a);
        let pb = dist_b.row(b);
        for ((o, x), y) in p_o.iter_mut().zip(pa).zip(pb) {
            *o = (x + y) / 2.0;
        }
        for _ in 0..ctx.facet_rate {
            conditional_into(pa, &p_o, ctx.config.rule, &mut cond);
            let fa = sample_facet(&cond, rng);
            observer.facet_activated(a, fa, &cond);
            conditional_into(pb, &p_o, ctx.config.rule, &mut cond);
            let fb = sample_facet(&cond, rng);
            negs.clear();
            for _ in 0..ctx.config.negatives {
                let (nv, nf) = ctx.negatives.sample(rng, dist_b);
                if nv != b {
                    negs.push(off(nv, nf));
                }
            }
            let step = ctx.step.fetch_add(1, Ordering::Relaxed);
            let lr = learning_rate(ctx.config.learning_rate, step, ctx.total_steps);
            let loss = sgd_step(store, off(a, fa), off(b, fb), &negs, lr, &mut scratch).ok_or(Error::NonFinite {
                epoch: (t / chunk) as usize,
                observation: t,
            })?;
            let slot = (t / chunk) as usize;
            if trace.len() <= slot {
                trace.resize(slot + 1, (0.0, 0));
            }
            trace[slot].0 += loss;
            trace[slot].1 += 1;
            if let Some(tables) = store.snapshot() {
                observer.after_update(step + 1, tables);
            }
        }
    }
    Ok(())
}

struct Silent;
impl TrainObserver for Silent {}

fn setup(graph: &BipartiteGraph, prior: &FacetPrior, config: &PteConfig) -> Result<(EdgeSampler, NegativeSampler)> {
    config.validate()?;
    let dist_b = prior.side_b().ok_or_else(|| validation("edge training needs a bipartite prior"))?;
    if prior.num_nodes() != graph.num_a() || dist_b.len() != graph.num_b() {
        return Err(validation(format!(
            "prior covers {}x{} nodes but the graph has {}x{}",
            prior.num_nodes(),
            dist_b.len(),
            graph.num_a(),
            graph.num_b()
        )));
    }
    if graph.num_edges() == 0 {
        return Err(validation("graph has no edges"));
    }
    let edges = if config.weighted_edges {
        let w: Vec<f64> = graph.edges().iter().map(|e| e.weight).collect();
        EdgeSampler::Weighted(
            WeightedAliasIndex::new(w).map_err(|e| validation(format!("edge weights unusable for sampling: {e}")))?,
        )
    } else {
        EdgeSampler::Uniform(graph.num_edges())
    };
    let degrees: Vec<f64> = (0..graph.num_b()).map(|b| graph.b_adjacency().degree(b) as f64).collect();
    let negatives = NegativeSampler::from_counts(&degrees, 0.75)?;
    Ok((edges, negatives))
}

/// Trains `U` over type-A nodes and `H` over type-B nodes.
pub fn train_pte(graph: &BipartiteGraph, prior: &FacetPrior, config: &PteConfig) -> Result<TrainOutput> {
    if config.workers > 1 {
        return train_pte_parallel(graph, prior, config);
    }
    train_pte_observed(graph, prior, config, &mut Silent)
}

/// Deterministic single-worker training with observation hooks. The loss
/// trace has one entry per `|E|` edge draws.
pub fn train_pte_observed(
    graph: &BipartiteGraph,
    prior: &FacetPrior,
    config: &PteConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutput> {
    let (edges, negatives) = setup(graph, prior, config)?;
    let k = prior.k();
    let facet_rate = config.resolved_facet_rate(k);
    let samples = config.resolved_samples(graph.num_edges());
    let mut tables = init_bipartite_tables(graph.num_a(), graph.num_b(), k, config.dim, rng::derive(config.seed, 1))?;
    let step = AtomicU64::new(0);
    let ctx = Shared {
        graph,
        prior,
        edges: &edges,
        negatives: &negatives,
        config,
        facet_rate,
        total_steps: samples * facet_rate as u64,
        step: &step,
    };
    let mut r = rng::seeded(rng::derive(config.seed, 2));
    let mut trace = Vec::new();
    run_samples(&mut tables, samples, &ctx, &mut r, observer, graph.num_edges() as u64, &mut trace)?;
    let loss_trace = trace.iter().map(|(s, c)| s / (*c).max(1) as f64).collect();
    Ok(TrainOutput { tables, loss_trace })
}

fn train_pte_parallel(graph: &BipartiteGraph, prior: &FacetPrior, config: &PteConfig) -> Result<TrainOutput> {
    let (edges, negatives) = setup(graph, prior, config)?;
    let k = prior.k();
    let facet_rate = config.resolved_facet_rate(k);
    let samples = config.resolved_samples(graph.num_edges());
    let mut tables = init_bipartite_tables(graph.num_a(), graph.num_b(), k, config.dim, rng::derive(config.seed, 1))?;
    let step = AtomicU64::new(0);
    let ctx = Shared {
        graph,
        prior,
        edges: &edges,
        negatives: &negatives,
        config,
        facet_rate,
        total_steps: samples * facet_rate as u64,
        step: &step,
    };
    let shared = SharedTables::new(&tables);
    let workers = config.workers as u64;
    let chunk = graph.num_edges() as u64;
    let results: Vec<Result<Vec<(f64, u64)>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let share = samples / workers + u64::from(w < samples % workers);
                let ctx = &ctx;
                let shared = &shared;
                s.spawn(move || {
                    let mut r = rng::seeded(rng::derive(config.seed, 100 + w));
                    let mut trace = Vec::new();
                    run_samples(&mut SharedView(shared), share, ctx, &mut r, &mut Silent, chunk, &mut trace)?;
                    Ok(trace)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut merged: Vec<(f64, u64)> = Vec::new();
    for r in results {
        let trace = r?;
        if merged.len() < trace.len() {
            merged.resize(trace.len(), (0.0, 0));
        }
        for (m, t) in merged.iter_mut().zip(trace) {
            m.0 += t.0;
            m.1 += t.1;
        }
    }
    shared.write_back(&mut tables);
    let loss_trace = merged.iter().map(|(s, c)| s / (*c).max(1) as f64).collect();
    Ok(TrainOutput { tables, loss_trace })
}

/// Exact log-likelihood of one edge and its facet-expectation lower bound
/// under the full softmax over every type-B (node, facet) vector.
pub fn pte_lower_bound_small(
    edge: (usize, usize),
    prior: &FacetPrior,
    tables: &EmbeddingTables,
    rule: FacetRule,
) -> Result<(f64, f64)> {
    let (a, b) = edge;
    let k = prior.k();
    let pb = prior.dist_b(b).ok_or_else(|| validation("edge bound needs a bipartite prior"))?;
    let pa = prior.dist(a);
    let p_o: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| (x + y) / 2.0).collect();
    let mut ca = vec![0.0; k];
    let mut cb = vec![0.0; k];
    conditional_into(pa, &p_o, rule, &mut ca);
    conditional_into(pb, &p_o, rule, &mut cb);

    let rows = tables.context.rows();
    let mut exact_terms = Vec::new();
    let mut lower = 0.0;
    for fa in 0..k {
        let u = tables.target.vector(a, fa);
        let logits: Vec<f64> = (0..rows)
            .flat_map(|v| (0..k).map(move |f| (v, f)))
            .map(|(v, f)| dot(tables.context.vector(v, f), u))
            .collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        for fb in 0..k {
            let p_s = ca[fa] * cb[fb];
            if p_s > 0.0 {
                let log_p = dot(tables.context.vector(b, fb), u) - log_z;
                exact_terms.push(p_s.ln() + log_p);
                lower += p_s * log_p;
            }
        }
    }
    let m = exact_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exact = m + exact_terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    Ok((exact, lower))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_facet_count() {
        let c = PteConfig::default();
        assert_eq!(c.resolved_facet_rate(5), 25);
        assert_eq!(c.negatives, 30);
        assert_eq!(c.resolved_samples(10), 500);
    }

    #[test]
    fn needs_bipartite_prior() {
        let g = BipartiteGraph::from_edges(2, 2, [(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let prior = FacetPrior::uniform(2, None, 2);
        assert!(train_pte(&g, &prior, &PteConfig::default()).is_err());
        let prior = FacetPrior::uniform(2, Some(3), 2);
        assert!(train_pte(&g, &prior, &PteConfig::default()).is_err());
    }

    #[test]
    fn weighted_edge_sampling_runs() {
        let g = BipartiteGraph::from_edges(2, 2, [(0, 0, 5.0), (1, 1, 1.0)]).unwrap();
        let prior = FacetPrior::uniform(2, Some(2), 2);
        let cfg = PteConfig { dim: 4, edge_samples: Some(200), weighted_edges: true, ..Default::default() };
        let out = train_pte(&g, &prior, &cfg).unwrap();
        assert!(out.tables.is_finite());
        assert_eq!(out.loss_trace.len(), 100);
    }
}

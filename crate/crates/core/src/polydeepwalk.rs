//! Facet-sampled skip-gram over random-walk windows.
//!
//! For every observation (a center node and its window) the trainer draws
//! `R` facet assignments, one facet per node from its conditional
//! distribution `p(v|o)`, and applies one negative-sampled update per
//! (center, context node) pair to the activated facet vectors. Facet
//! distributions come from the prior only and never receive gradients.

use std::sync::atomic::{AtomicU64, Ordering};

use log::debug;

use crate::embedding::{init_tables, EmbeddingTables};
use crate::error::{validation, Error, Result};
use crate::facets::{conditional_into, sample_facet, window_distribution_into, FacetPrior, FacetRule};
use crate::graph::Graph;
use crate::rng;
use crate::sgns::{dot, sgd_step, NegativeSampler, RowStore, Scratch, SharedTables, SharedView};
use crate::walks::{window_bounds, Observation, Walk};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Dimension of each facet vector.
    pub dim: usize,
    pub negatives: usize,
    /// Facet assignments drawn per observation.
    pub facet_rate: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Sliding-window radius used to cut observations from walks.
    pub window: usize,
    pub seed: u64,
    /// One worker is deterministic; more run lock-free in parallel.
    pub workers: usize,
    pub rule: FacetRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 35,
            negatives: 10,
            facet_rate: 1,
            epochs: 5,
            learning_rate: 0.025,
            window: 8,
            seed: 0,
            workers: 1,
            rule: FacetRule::Min,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(validation("dim must be at least 1"));
        }
        if self.negatives == 0 {
            return Err(validation("negatives must be at least 1"));
        }
        if self.facet_rate == 0 {
            return Err(validation("facet_rate must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(validation("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(validation("learning_rate must be positive"));
        }
        if self.window == 0 {
            return Err(validation("window must be at least 1"));
        }
        if self.workers == 0 {
            return Err(validation("workers must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub tables: EmbeddingTables,
    /// Mean pair loss of every epoch.
    pub loss_trace: Vec<f64>,
}

/// Hooks into the deterministic training loop.
pub trait TrainObserver {
    /// A facet was activated for `node`, drawn from `dist`.
    fn facet_activated(&mut self, _node: usize, _facet: usize, _dist: &[f64]) {}
    /// Called after every SGD update with the 1-based update count.
    fn after_update(&mut self, _step: u64, _tables: &EmbeddingTables) {}
}

struct Silent;
impl TrainObserver for Silent {}

/// Linear decay from the initial rate to `1e-4 ×` the initial rate.
pub(crate) fn learning_rate(initial: f64, step: u64, total: u64) -> f64 {
    let progress = step as f64 / total.max(1) as f64;
    initial * (1.0 - progress).max(1e-4)
}

pub(crate) trait Snapshot {
    fn snapshot(&self) -> Option<&EmbeddingTables>;
}

impl Snapshot for EmbeddingTables {
    fn snapshot(&self) -> Option<&EmbeddingTables> {
        Some(self)
    }
}

impl Snapshot for SharedView<'_> {
    fn snapshot(&self) -> Option<&EmbeddingTables> {
        None
    }
}

struct Shared<'a> {
    prior: &'a FacetPrior,
    sampler: &'a NegativeSampler,
    config: &'a TrainConfig,
    total_steps: u64,
    step: &'a AtomicU64,
}

#[derive(Default)]
struct ShardLoss {
    sum: f64,
    count: u64,
}

fn run_shard<S: RowStore + Snapshot>(
    store: &mut S,
    walks: &[Walk],
    epoch: usize,
    first_observation: u64,
    ctx: &Shared<'_>,
    rng: &mut rng::Rng,
    observer: &mut dyn TrainObserver,
) -> Result<ShardLoss> {
    let k = ctx.prior.k();
    let dim = ctx.config.dim;
    let row_off = |v: usize, f: usize| (v * k + f) * dim;
    let mut scratch = Scratch::new(dim);
    let mut context: Vec<usize> = Vec::new();
    let mut p_o = vec![0.0; k];
    let mut cond = vec![0.0; k];
    let mut facets: Vec<usize> = Vec::new();
    let mut negs: Vec<usize> = Vec::new();
    let mut loss = ShardLoss::default();
    let mut observation = first_observation;

    for walk in walks {
        for i in 0..walk.len() {
            let (lo, hi) = window_bounds(i, walk.len(), ctx.config.window);
            context.clear();
            context.extend((lo..hi).filter(|&j| j != i).map(|j| walk[j]));
            if context.is_empty() {
                continue;
            }
            let center = walk[i];
            window_distribution_into(ctx.prior, center, &context, &mut p_o);
            for _ in 0..ctx.config.facet_rate {
                conditional_into(ctx.prior.dist(center), &p_o, ctx.config.rule, &mut cond);
                let center_facet = sample_facet(&cond, rng);
                observer.facet_activated(center, center_facet, &cond);
                facets.clear();
                for &v in &context {
                    conditional_into(ctx.prior.dist(v), &p_o, ctx.config.rule, &mut cond);
                    let f = sample_facet(&cond, rng);
                    observer.facet_activated(v, f, &cond);
                    facets.push(f);
                }
                for (&v, &f) in context.iter().zip(&facets) {
                    negs.clear();
                    for _ in 0..ctx.config.negatives {
                        let (nv, nf) = ctx.sampler.sample(rng, ctx.prior.side_a());
                        if nv != v {
                            negs.push(row_off(nv, nf));
                        }
                    }
                    let step = ctx.step.fetch_add(1, Ordering::Relaxed);
                    let lr = learning_rate(ctx.config.learning_rate, step, ctx.total_steps);
                    let pair = sgd_step(store, row_off(center, center_facet), row_off(v, f), &negs, lr, &mut scratch)
                        .ok_or(Error::NonFinite { epoch, observation })?;
                    loss.sum += pair;
                    loss.count += 1;
                    if let Some(t) = store.snapshot() {
                        observer.after_update(step + 1, t);
                    }
                }
            }
            observation += 1;
        }
    }
    Ok(loss)
}

fn scheduled_updates(corpus: &[Walk], window: usize) -> u64 {
    corpus
        .iter()
        .map(|w| (0..w.len()).map(|i| {
            let (lo, hi) = window_bounds(i, w.len(), window);
            (hi - lo - 1) as u64
        }).sum::<u64>())
        .sum()
}

fn check_inputs(graph: &Graph, prior: &FacetPrior, corpus: &[Walk], config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if prior.num_nodes() != graph.num_nodes() {
        return Err(validation(format!(
            "prior covers {} nodes but the graph has {}",
            prior.num_nodes(),
            graph.num_nodes()
        )));
    }
    if corpus.iter().all(|w| w.len() < 2) {
        return Err(validation("corpus has no walk with at least two nodes"));
    }
    if let Some(v) = corpus.iter().flatten().find(|&&v| v >= graph.num_nodes()) {
        return Err(Error::Index { index: *v, len: graph.num_nodes() });
    }
    Ok(())
}

/// Trains target and context facet tables on `corpus`.
pub fn train(graph: &Graph, prior: &FacetPrior, corpus: &[Walk], config: &TrainConfig) -> Result<TrainOutput> {
    if config.workers > 1 {
        return train_parallel(graph, prior, corpus, config);
    }
    train_observed(graph, prior, corpus, config, &mut Silent)
}

/// Deterministic single-worker training with observation hooks.
pub fn train_observed(
    graph: &Graph,
    prior: &FacetPrior,
    corpus: &[Walk],
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutput> {
    check_inputs(graph, prior, corpus, config)?;
    let mut tables = init_tables(graph.num_nodes(), prior.k(), config.dim, rng::derive(config.seed, 1))?;
    let sampler = NegativeSampler::from_corpus(corpus, graph.num_nodes())?;
    let total = scheduled_updates(corpus, config.window) * (config.epochs * config.facet_rate) as u64;
    let step = AtomicU64::new(0);
    let ctx = Shared { prior, sampler: &sampler, config, total_steps: total, step: &step };
    let mut r = rng::seeded(rng::derive(config.seed, 2));
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let loss = run_shard(&mut tables, corpus, epoch, 0, &ctx, &mut r, observer)?;
        let mean = loss.sum / loss.count.max(1) as f64;
        debug!("epoch {epoch}: mean pair loss {mean:.6}");
        trace.push(mean);
    }
    Ok(TrainOutput { tables, loss_trace: trace })
}

/// Lock-free multi-worker training; results depend on thread timing.
fn train_parallel(graph: &Graph, prior: &FacetPrior, corpus: &[Walk], config: &TrainConfig) -> Result<TrainOutput> {
    check_inputs(graph, prior, corpus, config)?;
    let mut tables = init_tables(graph.num_nodes(), prior.k(), config.dim, rng::derive(config.seed, 1))?;
    let sampler = NegativeSampler::from_corpus(corpus, graph.num_nodes())?;
    let total = scheduled_updates(corpus, config.window) * (config.epochs * config.facet_rate) as u64;
    let step = AtomicU64::new(0);
    let ctx = Shared { prior, sampler: &sampler, config, total_steps: total, step: &step };
    let shared = SharedTables::new(&tables);
    let chunk = corpus.len().div_ceil(config.workers);
    let shards: Vec<&[Walk]> = corpus.chunks(chunk.max(1)).collect();
    let mut rngs: Vec<rng::Rng> = (0..shards.len())
        .map(|w| rng::seeded(rng::derive(config.seed, 100 + w as u64)))
        .collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let results: Vec<Result<ShardLoss>> = std::thread::scope(|s| {
            let handles: Vec<_> = shards
                .iter()
                .zip(rngs.iter_mut())
                .map(|(shard, r)| {
                    let ctx = &ctx;
                    let shared = &shared;
                    s.spawn(move || run_shard(&mut SharedView(shared), shard, epoch, 0, ctx, r, &mut Silent))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let mut total_loss = ShardLoss::default();
        for r in results {
            let l = r?;
            total_loss.sum += l.sum;
            total_loss.count += l.count;
        }
        trace.push(total_loss.sum / total_loss.count.max(1) as f64);
    }
    shared.write_back(&mut tables);
    Ok(TrainOutput { tables, loss_trace: trace })
}

/// Upper bound on the number of facet assignments enumerated exactly.
pub const ENUMERATION_LIMIT: usize = 100_000;

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact log-likelihood of one observation and its facet-expectation lower
/// bound, both with the full softmax over every (node, facet) context
/// vector. Returns `(exact, lower)`; `lower ≤ exact` always holds.
pub fn exact_objective_small(
    obs: &Observation,
    prior: &FacetPrior,
    tables: &EmbeddingTables,
    rule: FacetRule,
) -> Result<(f64, f64)> {
    let k = prior.k();
    if obs.context.is_empty() {
        return Err(validation("observation context is empty"));
    }
    let positions: Vec<usize> = std::iter::once(obs.center).chain(obs.context.iter().copied()).collect();
    let count = (0..positions.len()).try_fold(1usize, |acc, _| acc.checked_mul(k).filter(|&c| c <= ENUMERATION_LIMIT));
    let Some(count) = count else {
        return Err(Error::Capacity(format!(
            "K^{} facet assignments exceed the enumeration limit {ENUMERATION_LIMIT}",
            positions.len()
        )));
    };
    let mut p_o = vec![0.0; k];
    window_distribution_into(prior, obs.center, &obs.context, &mut p_o);
    let cond: Vec<Vec<f64>> = positions
        .iter()
        .map(|&v| {
            let mut c = vec![0.0; k];
            conditional_into(prior.dist(v), &p_o, rule, &mut c);
            c
        })
        .collect();

    let rows = tables.context.rows();
    let log_z: Vec<f64> = (0..k)
        .map(|kc| {
            let u = tables.target.vector(obs.center, kc);
            log_sum_exp((0..rows).flat_map(|v| (0..k).map(move |f| (v, f))).map(|(v, f)| dot(tables.context.vector(v, f), u)))
        })
        .collect();

    let mut assignment = vec![0usize; positions.len()];
    let mut exact_terms = Vec::with_capacity(count);
    let mut lower = 0.0;
    for _ in 0..count {
        let p_s: f64 = assignment.iter().zip(&cond).map(|(&f, c)| c[f]).product();
        if p_s > 0.0 {
            let kc = assignment[0];
            let u = tables.target.vector(obs.center, kc);
            let log_p: f64 = obs
                .context
                .iter()
                .zip(&assignment[1..])
                .map(|(&v, &f)| dot(tables.context.vector(v, f), u) - log_z[kc])
                .sum();
            exact_terms.push(p_s.ln() + log_p);
            lower += p_s * log_p;
        }
        for slot in assignment.iter_mut() {
            *slot += 1;
            if *slot < k {
                break;
            }
            *slot = 0;
        }
    }
    Ok((log_sum_exp(exact_terms.into_iter()), lower))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facets::Distributions;

    #[test]
    fn lr_schedule_floor() {
        assert_eq!(learning_rate(0.1, 0, 10), 0.1);
        assert!((learning_rate(0.1, 5, 10) - 0.05).abs() < 1e-15);
        assert!((learning_rate(0.1, 10, 10) - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { negatives: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { facet_rate: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn enumeration_guard() {
        let prior = FacetPrior::uniform(3, None, 10);
        let tables = init_tables(3, 10, 2, 0).unwrap();
        let obs = Observation { center: 0, context: vec![1, 2, 1, 2, 1] };
        assert!(matches!(exact_objective_small(&obs, &prior, &tables, FacetRule::Min), Err(Error::Capacity(_))));
    }

    #[test]
    fn rejects_mismatched_prior() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let prior = FacetPrior::from_distributions(Distributions::uniform(2, 2), None).unwrap();
        let cfg = TrainConfig { dim: 2, epochs: 1, ..Default::default() };
        assert!(train(&g, &prior, &[vec![0, 1, 2]], &cfg).is_err());
    }
}

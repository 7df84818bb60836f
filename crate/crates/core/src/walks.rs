//! Random-walk corpus generation and sliding-window observations.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{validation, Result};
use crate::graph::Graph;
use crate::rng;
use crate::textio;

pub type Walk = Vec<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    /// Nodes per walk.
    pub walk_length: usize,
    /// Context radius.
    pub window: usize,
    pub seed: u64,
    /// Sample neighbors proportionally to edge weight; uniform otherwise.
    pub weighted: bool,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig { walks_per_node: 110, walk_length: 11, window: 8, seed: 0, weighted: true }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_node == 0 {
            return Err(validation("walks_per_node must be positive"));
        }
        if self.walk_length < 2 {
            return Err(validation("walk_length must be at least 2"));
        }
        if self.window == 0 {
            return Err(validation("window must be at least 1"));
        }
        Ok(())
    }
}

/// A center node and the nodes around it in one walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub center: usize,
    pub context: Vec<usize>,
}

fn step<R: Rng>(graph: &Graph, v: usize, weighted: bool, rng: &mut R) -> Option<usize> {
    let (targets, weights) = graph.neighbor_slice(v);
    if targets.is_empty() {
        return None;
    }
    if !weighted {
        return Some(targets[rng.random_range(0..targets.len())]);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Some(targets[rng.random_range(0..targets.len())]);
    }
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    for (&t, &w) in targets.iter().zip(weights) {
        cum += w;
        if u < cum {
            return Some(t);
        }
    }
    targets.last().copied()
}

fn walk_from<R: Rng>(graph: &Graph, start: usize, config: &WalkConfig, rng: &mut R) -> Walk {
    let mut walk = Vec::with_capacity(config.walk_length);
    walk.push(start);
    let mut cur = start;
    while walk.len() < config.walk_length {
        match step(graph, cur, config.weighted, rng) {
            Some(next) => {
                walk.push(next);
                cur = next;
            }
            None => break,
        }
    }
    walk
}

fn node_rng(seed: u64, node: usize) -> rng::Rng {
    rng::seeded(seed ^ node as u64)
}

/// Materializes the corpus. Walks come out round-major (all start nodes
/// for round 0, then round 1, ...) and each start node owns a generator
/// seeded from `seed ^ node`, so the result is independent of the thread
/// count and identical to [`WalkStream`].
pub fn generate_walks(graph: &Graph, config: &WalkConfig) -> Result<Vec<Walk>> {
    config.validate()?;
    let starts: Vec<usize> = (0..graph.num_nodes()).filter(|&v| graph.degree(v) > 0).collect();
    let per_node: Vec<Vec<Walk>> = starts
        .par_iter()
        .map(|&v| {
            let mut r = node_rng(config.seed, v);
            (0..config.walks_per_node).map(|_| walk_from(graph, v, config, &mut r)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(starts.len() * config.walks_per_node);
    for round in 0..config.walks_per_node {
        for walks in &per_node {
            out.push(walks[round].clone());
        }
    }
    Ok(out)
}

/// Lazily generated corpus with the same content and order as
/// [`generate_walks`]; memory is one generator per start node.
pub struct WalkStream<'g> {
    graph: &'g Graph,
    config: WalkConfig,
    starts: Vec<usize>,
    rngs: Vec<rng::Rng>,
    round: usize,
    pos: usize,
}

impl<'g> WalkStream<'g> {
    pub fn new(graph: &'g Graph, config: &WalkConfig) -> Result<Self> {
        config.validate()?;
        let starts: Vec<usize> = (0..graph.num_nodes()).filter(|&v| graph.degree(v) > 0).collect();
        let rngs = starts.iter().map(|&v| node_rng(config.seed, v)).collect();
        Ok(WalkStream { graph, config: config.clone(), starts, rngs, round: 0, pos: 0 })
    }
}

impl Iterator for WalkStream<'_> {
    type Item = Walk;

    fn next(&mut self) -> Option<Walk> {
        if self.starts.is_empty() || self.round >= self.config.walks_per_node {
            return None;
        }
        let v = self.starts[self.pos];
        let walk = walk_from(self.graph, v, &self.config, &mut self.rngs[self.pos]);
        self.pos += 1;
        if self.pos == self.starts.len() {
            self.pos = 0;
            self.round += 1;
        }
        Some(walk)
    }
}

/// Context range `[lo, hi)` of position `i` in a walk of length `len`.
pub(crate) fn window_bounds(i: usize, len: usize, window: usize) -> (usize, usize) {
    (i.saturating_sub(window), (i + window + 1).min(len))
}

/// One observation per walk position; context is every node within
/// `window` steps, truncated at the walk ends.
pub fn sliding_windows(walk: &[usize], window: usize) -> Vec<Observation> {
    let mut out = Vec::with_capacity(walk.len());
    for (i, &center) in walk.iter().enumerate() {
        let (lo, hi) = window_bounds(i, walk.len(), window);
        let context: Vec<usize> = (lo..hi).filter(|&j| j != i).map(|j| walk[j]).collect();
        if !context.is_empty() {
            out.push(Observation { center, context });
        }
    }
    out
}

pub fn write_corpus<W: Write>(out: &mut W, walks: &[Walk]) -> Result<()> {
    for w in walks {
        let line: Vec<String> = w.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn save_corpus(path: &Path, walks: &[Walk]) -> Result<()> {
    let mut out = textio::create(path)?;
    write_corpus(&mut out, walks)?;
    out.flush()?;
    Ok(())
}

/// Parses a corpus; every id must be below `num_nodes`.
pub fn parse_corpus(text: &str, num_nodes: usize) -> Result<Vec<Walk>> {
    let mut walks = Vec::new();
    for (line, fields) in textio::data_lines(text) {
        let walk = fields
            .iter()
            .map(|f| {
                let v: usize = textio::parse_field(line, f, "node id")?;
                if v >= num_nodes {
                    return Err(validation(format!("line {line}: node {v} out of range ({num_nodes} nodes)")));
                }
                Ok(v)
            })
            .collect::<Result<Walk>>()?;
        walks.push(walk);
    }
    Ok(walks)
}

pub fn load_corpus(path: &Path, num_nodes: usize) -> Result<Vec<Walk>> {
    parse_corpus(&textio::read_to_string(path)?, num_nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(walks_per_node: usize, walk_length: usize) -> WalkConfig {
        WalkConfig { walks_per_node, walk_length, window: 1, seed: 7, weighted: true }
    }

    #[test]
    fn forced_trajectory_on_single_edge() {
        let g = Graph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let walks = generate_walks(&g, &cfg(1, 3)).unwrap();
        assert_eq!(walks[0], vec![0, 1, 0]);
        assert_eq!(walks[1], vec![1, 0, 1]);
    }

    #[test]
    fn isolated_nodes_start_no_walks() {
        let g = Graph::from_edges(3, [(0, 1, 1.0)]).unwrap();
        let walks = generate_walks(&g, &cfg(4, 5)).unwrap();
        assert_eq!(walks.len(), 8);
        assert!(walks.iter().all(|w| w[0] != 2 && !w.contains(&2)));
    }

    #[test]
    fn triangle_neighbor_frequency() {
        let g = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let config = WalkConfig { weighted: false, ..cfg(10_000, 2) };
        let walks = generate_walks(&g, &config).unwrap();
        let from0: Vec<_> = walks.iter().filter(|w| w[0] == 0).collect();
        assert_eq!(from0.len(), 10_000);
        let to1 = from0.iter().filter(|w| w[1] == 1).count() as f64 / 10_000.0;
        assert!((to1 - 0.5).abs() <= 0.02, "{to1}");
    }

    #[test]
    fn stream_matches_materialized() {
        let g = Graph::from_edges(5, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 0, 0.5)]).unwrap();
        let config = cfg(3, 6);
        let a = generate_walks(&g, &config).unwrap();
        let b: Vec<Walk> = WalkStream::new(&g, &config).unwrap().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn window_examples() {
        let obs = sliding_windows(&[10, 11, 12], 1);
        assert_eq!(
            obs,
            vec![
                Observation { center: 10, context: vec![11] },
                Observation { center: 11, context: vec![10, 12] },
                Observation { center: 12, context: vec![11] },
            ]
        );
        let obs = sliding_windows(&[10, 11], 5);
        assert_eq!(obs[0].context, vec![11]);
        assert_eq!(obs[1].context, vec![10]);
    }

    #[test]
    fn window_sizes_match_enumeration() {
        for len in 2..15 {
            for w in 1..6 {
                let walk: Vec<usize> = (0..len).collect();
                let obs = sliding_windows(&walk, w);
                assert_eq!(obs.len(), len);
                let total: usize = obs.iter().map(|o| o.context.len()).sum();
                // Count (i, j) pairs with 0 < |i - j| <= w directly.
                let mut brute = 0;
                for i in 0..len {
                    for j in 0..len {
                        if i != j && i.abs_diff(j) <= w {
                            brute += 1;
                        }
                    }
                }
                assert_eq!(total, brute);
                let formula: usize = (0..len).map(|i| i.min(w) + (len - 1 - i).min(w)).sum();
                assert_eq!(total, formula);
            }
        }
    }

    #[test]
    fn corpus_round_trip() {
        let walks = vec![vec![0, 1, 2], vec![2, 1]];
        let mut buf = Vec::new();
        write_corpus(&mut buf, &walks).unwrap();
        assert_eq!(parse_corpus(std::str::from_utf8(&buf).unwrap(), 3).unwrap(), walks);
        assert!(parse_corpus("0 5\n", 3).is_err());
    }
}

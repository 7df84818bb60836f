//! Small graphs with planted structure, for tests and demos.

use rand::Rng;

use crate::error::Result;
use crate::graph::{BipartiteGraph, Graph};
use crate::rng;

/// Homogeneous stochastic block model with `blocks` equal blocks. Returns
/// the graph and every node's block.
pub fn block_model(block_size: usize, blocks: usize, p_in: f64, p_out: f64, seed: u64) -> Result<(Graph, Vec<usize>)> {
    let n = block_size * blocks;
    let block: Vec<usize> = (0..n).map(|v| v / block_size.max(1)).collect();
    let mut r = rng::seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block[i] == block[j] { p_in } else { p_out };
            if r.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    Ok((Graph::from_edges(n, edges)?, block))
}

/// Bipartite graph whose type-A and type-B nodes are split into `blocks`
/// aligned groups; an (a, b) pair is linked with `p_in` inside a group and
/// `p_out` across. Returns the graph and the group of every A and B node.
pub fn planted_bipartite(
    num_a: usize,
    num_b: usize,
    blocks: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(BipartiteGraph, Vec<usize>, Vec<usize>)> {
    let group = |v: usize, n: usize| v * blocks / n.max(1);
    let ga: Vec<usize> = (0..num_a).map(|a| group(a, num_a)).collect();
    let gb: Vec<usize> = (0..num_b).map(|b| group(b, num_b)).collect();
    let mut r = rng::seeded(seed);
    let mut edges = Vec::new();
    for a in 0..num_a {
        for b in 0..num_b {
            let p = if ga[a] == gb[b] { p_in } else { p_out };
            if r.random::<f64>() < p {
                edges.push((a, b, 1.0));
            }
        }
    }
    Ok((BipartiteGraph::from_edges(num_a, num_b, edges)?, ga, gb))
}

/// The 60×60 two-group fixture with within-group probability 0.4 and
/// cross-group probability 0.02.
pub fn planted_fixture(seed: u64) -> Result<(BipartiteGraph, Vec<usize>, Vec<usize>)> {
    planted_bipartite(60, 60, 2, 0.4, 0.02, seed)
}

/// Two disjoint cliques of `size` nodes plus one bridge node (the last id)
/// joined to every clique member.
pub fn bridged_cliques(size: usize) -> Result<(Graph, usize)> {
    let bridge = 2 * size;
    let mut edges = Vec::new();
    for c in 0..2 {
        let base = c * size;
        for i in 0..size {
            for j in i + 1..size {
                edges.push((base + i, base + j, 1.0));
            }
            edges.push((base + i, bridge, 1.0));
        }
    }
    Ok((Graph::from_edges(bridge + 1, edges)?, bridge))
}

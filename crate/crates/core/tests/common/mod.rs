//! Reference implementations and instance builders shared by the
//! integration tests. Nothing here calls into the trainers under test.

#![allow(dead_code)]

use polyembed::embedding::{EmbeddingTables, FacetTable, TableKind};
use polyembed::facets::Distributions;
use polyembed::graph::{BipartiteGraph, Graph};
use polyembed::rng;
use rand::Rng;

pub fn random_dist<R: Rng>(r: &mut R, rows: usize, k: usize) -> Distributions {
    let mut data = Vec::with_capacity(rows * k);
    for _ in 0..rows {
        let raw: Vec<f64> = (0..k).map(|_| r.random::<f64>() + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        data.extend(raw.iter().map(|x| x / s));
    }
    Distributions::from_rows(k, data).unwrap()
}

pub fn one_hot_dist<R: Rng>(r: &mut R, rows: usize, k: usize) -> Distributions {
    let mut data = vec![0.0; rows * k];
    for v in 0..rows {
        data[v * k + r.random_range(0..k)] = 1.0;
    }
    Distributions::from_rows(k, data).unwrap()
}

pub fn random_table<R: Rng>(r: &mut R, rows: usize, k: usize, dim: usize, scale: f64) -> FacetTable {
    let data = (0..rows * k * dim).map(|_| (r.random::<f64>() * 2.0 - 1.0) * scale).collect();
    FacetTable::from_vec(rows, k, dim, data).unwrap()
}

pub fn random_tables<R: Rng>(r: &mut R, rows: usize, k: usize, dim: usize) -> EmbeddingTables {
    EmbeddingTables {
        kind: TableKind::Homogeneous,
        target: random_table(r, rows, k, dim, 1.0),
        context: random_table(r, rows, k, dim, 1.0),
    }
}

/// A connected-ish random homogeneous graph on `n` nodes.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng::seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((i, (i + 1) % n, 1.0));
        for j in i + 2..n {
            if r.random::<f64>() < p {
                edges.push((i, j, 1.0 + r.random::<f64>()));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

pub fn random_bipartite(na: usize, nb: usize, p: f64, seed: u64) -> BipartiteGraph {
    let mut r = rng::seeded(seed);
    let mut edges = Vec::new();
    for a in 0..na {
        edges.push((a, a % nb, 1.0));
        for b in 0..nb {
            if b != a % nb && r.random::<f64>() < p {
                edges.push((a, b, 1.0));
            }
        }
    }
    BipartiteGraph::from_edges(na, nb, edges).unwrap()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Unigram-style table: node `i` has weight `counts[i]^power`.
pub struct RefUnigram {
    nodes: Vec<usize>,
    cum: Vec<f64>,
}

impl RefUnigram {
    pub fn new(counts: &[f64], power: f64) -> Self {
        let mut nodes = Vec::new();
        let mut cum = Vec::new();
        let mut total = 0.0;
        for (i, &c) in counts.iter().enumerate() {
            if c > 0.0 {
                total += c.powf(power);
                nodes.push(i);
                cum.push(total);
            }
        }
        RefUnigram { nodes, cum }
    }

    pub fn draw<R: Rng>(&self, r: &mut R) -> usize {
        let u = r.random::<f64>() * self.cum.last().unwrap();
        let mut i = 0;
        while i + 1 < self.cum.len() && self.cum[i] <= u {
            i += 1;
        }
        self.nodes[i]
    }
}

/// Plain single-vector negative-sampling update of word2vec:
/// `center` row of `u`, `context` and `negs` rows of `h`.
pub fn ref_sgns_update(u: &mut [f64], h: &mut [f64], dim: usize, center: usize, context: usize, negs: &[usize], lr: f64) {
    let uc: Vec<f64> = u[center * dim..(center + 1) * dim].to_vec();
    let mut grad = vec![0.0; dim];
    let mut coeffs = Vec::with_capacity(negs.len() + 1);
    for (i, &row) in std::iter::once(&context).chain(negs).enumerate() {
        let hr = &h[row * dim..(row + 1) * dim];
        let s: f64 = hr.iter().zip(&uc).map(|(a, b)| a * b).sum();
        let s = s.clamp(-30.0, 30.0);
        let c = if i == 0 { sigmoid(s) - 1.0 } else { sigmoid(s) };
        for (g, x) in grad.iter_mut().zip(hr) {
            *g += c * x;
        }
        coeffs.push(c);
    }
    for (&row, &c) in std::iter::once(&context).chain(negs).zip(&coeffs) {
        let scale = -lr * c;
        for (x, y) in h[row * dim..(row + 1) * dim].iter_mut().zip(&uc) {
            *x += scale * y;
        }
    }
    for (x, g) in u[center * dim..(center + 1) * dim].iter_mut().zip(&grad) {
        *x += -lr * g;
    }
}

fn decayed(lr0: f64, step: u64, total: u64) -> f64 {
    lr0 * (1.0 - step as f64 / total.max(1) as f64).max(1e-4)
}

fn checksum_of(kind: TableKind, u: &[f64], h: &[f64], rows_u: usize, rows_h: usize, dim: usize) -> u64 {
    EmbeddingTables {
        kind,
        target: FacetTable::from_vec(rows_u, 1, dim, u.to_vec()).unwrap(),
        context: FacetTable::from_vec(rows_h, 1, dim, h.to_vec()).unwrap(),
    }
    .checksum()
}

/// Plain skip-gram over a walk corpus, starting from `init`. Returns the
/// table checksum after every update.
pub fn ref_skipgram(
    init: &EmbeddingTables,
    corpus: &[Vec<usize>],
    window: usize,
    negatives: usize,
    epochs: usize,
    lr0: f64,
    seed: u64,
) -> Vec<u64> {
    let n = init.target.rows();
    let dim = init.target.dim();
    let mut u = init.target.as_slice().to_vec();
    let mut h = init.context.as_slice().to_vec();
    let mut counts = vec![0.0; n];
    for w in corpus {
        for &v in w {
            counts[v] += 1.0;
        }
    }
    let table = RefUnigram::new(&counts, 0.75);
    let pairs: u64 = corpus
        .iter()
        .map(|w| (0..w.len()).map(|i| (i + window + 1).min(w.len()) - i.saturating_sub(window) - 1).sum::<usize>() as u64)
        .sum();
    let total = pairs * epochs as u64;
    let mut r = rng::seeded(rng::derive(seed, 2));
    let mut step = 0;
    let mut sums = Vec::new();
    for _ in 0..epochs {
        for w in corpus {
            for i in 0..w.len() {
                let lo = i.saturating_sub(window);
                let hi = (i + window + 1).min(w.len());
                for j in (lo..hi).filter(|&j| j != i) {
                    let mut negs = Vec::new();
                    for _ in 0..negatives {
                        let nv = table.draw(&mut r);
                        if nv != w[j] {
                            negs.push(nv);
                        }
                    }
                    ref_sgns_update(&mut u, &mut h, dim, w[i], w[j], &negs, decayed(lr0, step, total));
                    step += 1;
                    sums.push(checksum_of(TableKind::Homogeneous, &u, &h, n, n, dim));
                }
            }
        }
    }
    sums
}

/// Plain PTE edge sampling on a bipartite graph, starting from `init`.
pub fn ref_pte(init: &EmbeddingTables, graph: &BipartiteGraph, samples: u64, negatives: usize, lr0: f64, seed: u64) -> Vec<u64> {
    let (na, nb) = (graph.num_a(), graph.num_b());
    let dim = init.target.dim();
    let mut u = init.target.as_slice().to_vec();
    let mut h = init.context.as_slice().to_vec();
    let mut deg = vec![0.0; nb];
    for e in graph.edges() {
        deg[e.dst] += 1.0;
    }
    let table = RefUnigram::new(&deg, 0.75);
    let mut r = rng::seeded(rng::derive(seed, 2));
    let mut sums = Vec::new();
    for t in 0..samples {
        let e = graph.edges()[r.random_range(0..graph.num_edges())];
        let mut negs = Vec::new();
        for _ in 0..negatives {
            let nv = table.draw(&mut r);
            if nv != e.dst {
                negs.push(nv);
            }
        }
        ref_sgns_update(&mut u, &mut h, dim, e.src, e.dst, &negs, decayed(lr0, t, samples));
        sums.push(checksum_of(TableKind::Bipartite, &u, &h, na, nb, dim));
    }
    sums
}

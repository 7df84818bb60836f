use ndarray::Array2;
use polyembed::facets::{asymmetric_nmf, asymmetric_nmf_with, normalize_prior, symmetric_nmf, symmetric_nmf_with, NmfConfig};
use polyembed::graph::SparseMatrix;
use polyembed::rng;
use polyembed::synth;
use rand::Rng;

fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::seeded(seed);
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < 0.35 {
                let w = 1.0 + r.random::<f64>();
                a[[i, j]] = w;
                a[[j, i]] = w;
            }
        }
    }
    a
}

fn random_rect(n: usize, m: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::seeded(seed);
    Array2::from_shape_simple_fn((n, m), || if r.random::<f64>() < 0.4 { r.random::<f64>() * 3.0 } else { 0.0 })
}

fn assert_monotone(trace: &[f64]) {
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-10, "objective rose from {} to {}", w[0], w[1]);
    }
}

#[test]
fn symmetric_objective_never_increases() {
    for seed in 0..20 {
        let a = random_symmetric(15, seed);
        for k in [1, 2, 4] {
            let cfg = NmfConfig { k, seed, max_iters: 200, tol: 0.0, ..NmfConfig::new(k) };
            let mut seen = Vec::new();
            let res = symmetric_nmf_with(&a, &cfg, |_, _, f| seen.push(f)).unwrap();
            assert_monotone(&res.trace);
            assert_eq!(&res.trace[1..], &seen[..]);
        }
    }
}

#[test]
fn asymmetric_objective_never_increases() {
    for seed in 0..20 {
        let a = random_rect(12, 9, seed);
        for k in [1, 3] {
            let cfg = NmfConfig { k, seed, max_iters: 200, tol: 0.0, ..NmfConfig::new(k) };
            let res = asymmetric_nmf_with(&a, &cfg, |_, p, q, _| {
                assert!(p.iter().chain(q.iter()).all(|&x| x >= 0.0));
            })
            .unwrap();
            assert_monotone(&res.trace);
        }
    }
}

fn frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).mapv(|x| x * x).sum().sqrt()
}

#[test]
fn rank_one_inputs_are_reconstructed() {
    let x = ndarray::arr1(&[1.0, 2.0, 0.5, 3.0, 1.5]);
    let y = ndarray::arr1(&[0.5, 1.0, 2.0, 0.25]);
    let sym = x.view().insert_axis(ndarray::Axis(1)).dot(&x.view().insert_axis(ndarray::Axis(0)));
    let cfg = NmfConfig { alpha: 0.0, max_iters: 5000, tol: 1e-14, ..NmfConfig::new(1) };
    let res = symmetric_nmf(&sym, &cfg).unwrap();
    assert!(frobenius(&sym, &res.p.dot(&res.p.t())) < 1e-4);

    let rect = x.view().insert_axis(ndarray::Axis(1)).dot(&y.view().insert_axis(ndarray::Axis(0)));
    let res = asymmetric_nmf(&rect, &cfg).unwrap();
    let q = res.q.unwrap();
    assert!(frobenius(&rect, &res.p.dot(&q.t())) < 1e-4);
}

#[test]
fn sparse_and_dense_inputs_agree() {
    let a = random_symmetric(14, 3);
    let cfg = NmfConfig { max_iters: 50, ..NmfConfig::new(3) };
    let dense = symmetric_nmf(&a, &cfg).unwrap();
    let sparse = symmetric_nmf(&SparseMatrix::from_dense(&a), &cfg).unwrap();
    assert!(frobenius(&dense.p, &sparse.p) < 1e-9);
    let b = random_rect(10, 7, 3);
    let dense = asymmetric_nmf(&b, &cfg).unwrap();
    let sparse = asymmetric_nmf(&SparseMatrix::from_dense(&b), &cfg).unwrap();
    assert!(frobenius(&dense.p, &sparse.p) < 1e-9);
}

#[test]
fn invalid_inputs_are_rejected() {
    let a = random_rect(4, 5, 0);
    assert!(symmetric_nmf(&a, &NmfConfig::new(2)).is_err(), "not square");
    let mut s = random_symmetric(4, 0);
    s[[0, 1]] += 1.0;
    assert!(symmetric_nmf(&s, &NmfConfig::new(2)).is_err(), "not symmetric");
    let mut neg = random_symmetric(4, 0);
    neg[[0, 0]] = -1.0;
    assert!(symmetric_nmf(&neg, &NmfConfig::new(2)).is_err(), "negative entry");
    assert!(symmetric_nmf(&random_symmetric(4, 0), &NmfConfig::new(0)).is_err());
    assert!(asymmetric_nmf(&a, &NmfConfig::new(6)).is_err(), "K above min dimension");
}

/// Share of nodes whose argmax facet matches the planted block under the
/// better of the two column assignments.
fn recovery(p: &Array2<f64>, blocks: &[usize]) -> f64 {
    let arg: Vec<usize> = p
        .rows()
        .into_iter()
        .map(|r| if r[0] >= r[1] { 0 } else { 1 })
        .collect();
    let same = arg.iter().zip(blocks).filter(|(a, b)| a == b).count();
    same.max(blocks.len() - same) as f64 / blocks.len() as f64
}

#[test]
fn planted_blocks_are_recovered() {
    let mut good = 0;
    for seed in 0..10 {
        let (g, blocks) = synth::block_model(60, 2, 0.3, 0.02, seed).unwrap();
        let res = symmetric_nmf(&g.adjacency_sparse(), &NmfConfig { seed, ..NmfConfig::new(2) }).unwrap();
        let dist = normalize_prior(&res.p).unwrap();
        assert!((0..dist.len()).all(|v| (dist.row(v).iter().sum::<f64>() - 1.0).abs() < 1e-12));
        if recovery(&res.p, &blocks) >= 0.9 {
            good += 1;
        }
    }
    assert!(good >= 8, "{good} of 10 seeds recovered the blocks");
}

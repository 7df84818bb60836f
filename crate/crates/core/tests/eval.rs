mod common;

use std::collections::HashSet;

use ndarray::Array2;
use polyembed::embedding::{EmbeddingTables, TableKind};
use polyembed::eval::{
    auc, candidate_protocol, classify, evaluate_links, hit_ratio, hit_ratio_from_ranks, split_links, truth_rank,
    ClassifyConfig, EvalReport, Labels, LinkEvalConfig, SplitStrategy,
};
use polyembed::facets::FacetPrior;
use polyembed::graph::{AnyGraph, BipartiteGraph, IdMap};
use polyembed::inference::{FacetScorer, JointEmbedding, SimilarityMode};
use polyembed::rng;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn brute_hr(lists: &[(Vec<usize>, usize)], k: usize) -> f64 {
    let hits = lists.iter().filter(|(ranked, t)| ranked.iter().take(k).any(|c| c == t)).count();
    hits as f64 / lists.len() as f64
}

proptest! {
    #[test]
    fn auc_matches_pair_counting(seed: u64, np in 1usize..30, nn in 1usize..30, coarse: bool) {
        let mut r = rng::seeded(seed);
        // coarse scores force many ties
        let draw = |r: &mut dyn rand::RngCore| if coarse { r.random_range(0..4) as f64 } else { r.random::<f64>() };
        let pos: Vec<f64> = (0..np).map(|_| draw(&mut r)).collect();
        let neg: Vec<f64> = (0..nn).map(|_| draw(&mut r)).collect();
        prop_assert!((auc(&pos, &neg).unwrap() - brute_auc(&pos, &neg)).abs() <= 1e-12);
    }

    #[test]
    fn hit_ratio_matches_top_k_membership(seed: u64, queries in 1usize..20, size in 1usize..60) {
        let mut r = rng::seeded(seed);
        let lists: Vec<(Vec<usize>, usize)> = (0..queries)
            .map(|_| {
                let mut ranked: Vec<usize> = (0..size).collect();
                ranked.shuffle(&mut r);
                (ranked, r.random_range(0..size))
            })
            .collect();
        let ks: Vec<usize> = vec![1, 3, 10, 50, 100];
        let hr = hit_ratio(lists.iter().map(|(l, t)| (&l[..], *t)), &ks).unwrap();
        for &k in &ks {
            prop_assert!((hr[&k] - brute_hr(&lists, k)).abs() <= 1e-12);
        }
        let values: Vec<f64> = hr.values().copied().collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        let ranks: Vec<usize> = lists.iter().map(|(l, t)| truth_rank(l, *t).unwrap()).collect();
        prop_assert_eq!(hit_ratio_from_ranks(&ranks, &ks), hr);
    }

    #[test]
    fn one_per_node_split_is_a_partition(seed: u64, n in 3usize..25, p in 0.05f64..0.6) {
        let g = common::random_graph(n, p, seed);
        let s = split_links(&AnyGraph::Homogeneous(g.clone()), SplitStrategy::OnePerNode, seed).unwrap();
        let AnyGraph::Homogeneous(train) = &s.train else { panic!("kind changed") };
        prop_assert_eq!(train.num_edges() + s.test.len(), g.num_edges());
        for (&(q, t), e) in s.queries.iter().zip(&s.test) {
            prop_assert!(!train.neighbor_slice(q).0.contains(&t), "held-out edge still in train");
            prop_assert!((e.src, e.dst) == (q, t) || (e.dst, e.src) == (q, t));
        }
        let test: HashSet<(usize, usize)> = s.test.iter().map(|e| (e.src.min(e.dst), e.src.max(e.dst))).collect();
        prop_assert_eq!(test.len(), s.test.len());
        // every node that started with two or more edges is queried once
        let queried: HashSet<usize> = s.queries.iter().map(|q| q.0).collect();
        prop_assert_eq!(queried.len(), s.queries.len());
        let eligible: Vec<usize> = (0..n).filter(|&v| g.degree(v) >= 2).collect();
        for v in eligible {
            prop_assert!(queried.contains(&v) || test.iter().any(|&(a, b)| a == v || b == v));
        }
    }

    #[test]
    fn candidates_avoid_train_neighbors(seed: u64, na in 2usize..15, nb in 2usize..40, negs in 1usize..30) {
        let g = common::random_bipartite(na, nb, 0.3, seed);
        let graph = AnyGraph::Bipartite(g.clone());
        let mut r = rng::seeded(seed);
        let q = r.random_range(0..na);
        let t = r.random_range(0..nb);
        let cands = candidate_protocol(q, t, &graph, negs, seed).unwrap();
        prop_assert_eq!(cands[0], t);
        let distinct: HashSet<usize> = cands.iter().copied().collect();
        prop_assert_eq!(distinct.len(), cands.len());
        let free = (0..nb).filter(|&b| b != t && !g.has_edge(q, b)).count();
        prop_assert_eq!(cands.len() - 1, negs.min(free));
        prop_assert!(cands[1..].iter().all(|&b| !g.has_edge(q, b)));
        prop_assert_eq!(candidate_protocol(q, t, &graph, negs, seed).unwrap(), cands);
    }
}

#[test]
fn latest_edge_is_held_out_per_user() {
    let mut r = rng::seeded(5);
    let mut edges = Vec::new();
    for a in 0..8 {
        for b in 0..10 {
            if r.random::<f64>() < 0.5 {
                edges.push((a, b, 1.0, Some(r.random_range(0..20i64))));
            }
        }
    }
    let g = BipartiteGraph::with_ids(IdMap::numeric(8), IdMap::numeric(10), edges.clone()).unwrap();
    let s = split_links(&AnyGraph::Bipartite(g.clone()), SplitStrategy::LatestPerUser, 1).unwrap();
    for a in 0..8 {
        let mine: Vec<_> = g.edges().iter().filter(|e| e.src == a).collect();
        let held: Vec<_> = s.test.iter().filter(|e| e.src == a).collect();
        if mine.len() < 2 {
            assert!(held.is_empty());
            continue;
        }
        assert_eq!(held.len(), 1);
        let latest = mine.iter().filter_map(|e| e.timestamp).max();
        assert_eq!(held[0].timestamp, latest);
    }
    assert!(split_links(&AnyGraph::Bipartite(g), SplitStrategy::OnePerNode, 1).is_err());
}

#[test]
fn link_report_matches_manual_ranking() {
    let g = common::random_bipartite(12, 30, 0.25, 8);
    let split = split_links(&AnyGraph::Bipartite(g), SplitStrategy::LatestPerUser, 8).unwrap();
    let mut r = rng::seeded(8);
    let tables = EmbeddingTables {
        kind: TableKind::Bipartite,
        target: common::random_table(&mut r, 12, 2, 3, 1.0),
        context: common::random_table(&mut r, 30, 2, 3, 1.0),
    };
    let prior = FacetPrior::from_distributions(common::random_dist(&mut r, 12, 2), Some(common::random_dist(&mut r, 30, 2))).unwrap();
    let scorer = FacetScorer::new(&tables, &prior, SimilarityMode::CrossType).unwrap();
    let cfg = LinkEvalConfig { ks: vec![1, 5, 10, 20], num_negatives: 15, seed: 4 };
    let report = evaluate_links(&scorer, &split, &cfg).unwrap();

    let mut lists = Vec::new();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (q, &(query, truth)) in split.queries.iter().enumerate() {
        let cands = candidate_protocol(query, truth, &split.train, 15, rng::derive(4, q as u64)).unwrap();
        let truth_score = scorer.score(query, truth);
        let rank = 1 + cands[1..].iter().filter(|&&c| scorer.score(query, c) > truth_score).count();
        let mut ranked = vec![usize::MAX; rank - 1];
        ranked.push(truth);
        lists.push((ranked, truth));
        pos.push(truth_score);
        neg.extend(cands[1..].iter().map(|&c| scorer.score(query, c)));
    }
    for &k in &cfg.ks {
        assert!((report.hr_at_k[&k] - brute_hr(&lists, k)).abs() <= 1e-12);
    }
    let values: Vec<f64> = report.hr_at_k.values().copied().collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
    assert!((report.auc.unwrap() - brute_auc(&pos, &neg)).abs() <= 1e-12);
    assert_eq!(report.queries, split.queries.len());
    assert_eq!(EvalReport::parse_key_values(&report.to_key_values()).unwrap(), report);
}

fn clustered(n: usize, seed: u64, separation: f64) -> (JointEmbedding, Labels) {
    let mut r = rng::seeded(seed);
    let mut data = Array2::zeros((n, 3));
    let mut per_node = Vec::new();
    for v in 0..n {
        let c = v % 2;
        for d in 0..3 {
            data[[v, d]] = r.random::<f64>() + if c == 1 { separation } else { 0.0 };
        }
        per_node.push(vec![c]);
    }
    (JointEmbedding { data, weighted: false }, Labels { names: vec!["x".into(), "y".into()], per_node })
}

#[test]
fn separable_classes_are_learned() {
    let (f, labels) = clustered(80, 1, 5.0);
    let (micro, macro_f1) = classify(&f, &labels, &ClassifyConfig::default()).unwrap();
    assert_eq!((micro, macro_f1), (1.0, 1.0));
}

#[test]
fn shuffled_labels_score_near_chance() {
    let mut total = 0.0;
    for seed in 0..10 {
        let (f, mut labels) = clustered(200, seed, 0.0);
        labels.per_node.shuffle(&mut rng::seeded(seed + 100));
        total += classify(&f, &labels, &ClassifyConfig { seed, ..Default::default() }).unwrap().0;
    }
    let mean = total / 10.0;
    assert!((0.35..0.65).contains(&mean), "mean micro-F1 {mean}");
}

#[test]
fn duplicated_samples_do_not_leak_across_the_split() {
    let (f, labels) = clustered(40, 2, 1.0);
    let mut data = Array2::zeros((80, 3));
    data.slice_mut(ndarray::s![..40, ..]).assign(&f.data);
    data.slice_mut(ndarray::s![40.., ..]).assign(&f.data);
    let twice = JointEmbedding { data, weighted: false };
    let per_node = labels.per_node.iter().chain(&labels.per_node).cloned().collect();
    let labels2 = Labels { names: labels.names.clone(), per_node };
    let cfg = ClassifyConfig::default();
    let once = classify(&f, &labels, &cfg).unwrap();
    let doubled = classify(&twice, &labels2, &cfg).unwrap();
    // same samples on each side, each counted twice
    assert!((once.0 - doubled.0).abs() < 0.15, "{once:?} vs {doubled:?}");
    assert_eq!(classify(&twice, &labels2, &cfg).unwrap(), doubled);
}

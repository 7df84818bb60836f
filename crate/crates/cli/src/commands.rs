use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};

use polyembed::embedding::{load_table, save_table, EmbeddingTables, TableKind};
use polyembed::eval::{self, ClassifyConfig, EvalReport, LinkEvalConfig, LinkSplit, SplitStrategy};
use polyembed::facets::{self, FacetPrior, FacetRule, NmfConfig};
use polyembed::graph::{self, AnyGraph, GraphKind, IdMap};
use polyembed::inference::{self, FacetScorer, ScoreRule, SimilarityMode};
use polyembed::polydeepwalk::{self, TrainConfig};
use polyembed::polygcn::{self, GcnConfig, NeighborhoodMode};
use polyembed::polypte::{self, PteConfig};
use polyembed::walks::{self, WalkConfig};

use crate::config::{ensure, with_suffix, Resolver};
use crate::{
    Cutoffs, DeepwalkArgs, EmbedArgs, EvalClassArgs, EvalLinkArgs, FacetsArgs, GcnArgs, GraphFlags, Kind, Mode, Model,
    ModelFlags, NmfFlags, PipelineArgs, PteArgs, Rule, RunFlags, Score, SplitArgs, Strategy, WalkFlags, WalksArgs,
};

fn graph_kind(kind: Kind) -> GraphKind {
    match kind {
        Kind::Homogeneous => GraphKind::Homogeneous,
        Kind::Bipartite => GraphKind::Bipartite,
    }
}

fn load_graph(r: &mut Resolver, key: &str, path: Option<PathBuf>, kind: Option<Kind>) -> Result<(AnyGraph, Kind)> {
    let path = r.path(key, path)?;
    let kind = r.get("kind", kind, Kind::Homogeneous)?;
    let g = graph::load_edge_list(&path, graph_kind(kind)).with_context(|| format!("--{key} {}", path.display()))?;
    Ok((g, kind))
}

fn input_graph(r: &mut Resolver, flags: &GraphFlags) -> Result<(AnyGraph, Kind)> {
    load_graph(r, "input", flags.input.clone(), flags.kind)
}

fn run_flags(r: &mut Resolver, f: &RunFlags) -> Result<(u64, usize)> {
    let seed = r.get("seed", f.seed, 0u64)?;
    let workers = r.get("workers", f.workers, 1usize)?;
    ensure(workers >= 1, "workers", "must be at least 1")?;
    Ok((seed, workers))
}

fn nmf_config(r: &mut Resolver, f: &NmfFlags, kind: Kind, seed: u64) -> Result<NmfConfig> {
    let default_k = match kind {
        Kind::Homogeneous => 6,
        Kind::Bipartite => 5,
    };
    let k = r.get("k", f.k, default_k)?;
    ensure(k >= 1, "k", "must be at least 1")?;
    let mut cfg = NmfConfig::new(k);
    cfg.alpha = r.get("alpha", f.alpha, cfg.alpha)?;
    ensure(cfg.alpha >= 0.0 && cfg.alpha.is_finite(), "alpha", "must be finite and nonnegative")?;
    cfg.max_iters = r.get("max-iters", f.max_iters, cfg.max_iters)?;
    ensure(cfg.max_iters >= 1, "max-iters", "must be at least 1")?;
    cfg.tol = r.get("tol", f.tol, cfg.tol)?;
    ensure(cfg.tol >= 0.0 && cfg.tol.is_finite(), "tol", "must be finite and nonnegative")?;
    cfg.seed = seed;
    Ok(cfg)
}

fn walk_config(r: &mut Resolver, f: &WalkFlags, seed: u64) -> Result<WalkConfig> {
    let d = WalkConfig::default();
    let cfg = WalkConfig {
        walks_per_node: r.get("walks-per-node", f.walks_per_node, d.walks_per_node)?,
        walk_length: r.get("walk-length", f.walk_length, d.walk_length)?,
        window: r.get("window", f.window, d.window)?,
        seed,
        weighted: !r.get("unweighted", f.unweighted, false)?,
    };
    ensure(cfg.walks_per_node >= 1, "walks-per-node", "must be at least 1")?;
    ensure(cfg.walk_length >= 2, "walk-length", "must be at least 2")?;
    ensure(cfg.window >= 1, "window", "must be at least 1")?;
    Ok(cfg)
}

fn rule(r: Rule) -> FacetRule {
    match r {
        Rule::Min => FacetRule::Min,
        Rule::Observation => FacetRule::Observation,
    }
}

fn check_lr(lr: f64) -> Result<()> {
    ensure(lr > 0.0 && lr.is_finite(), "lr", "must be positive")
}

fn deepwalk_config(r: &mut Resolver, m: &ModelFlags, window: usize, seed: u64, workers: usize) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        dim: r.get("dim", m.dim, d.dim)?,
        negatives: r.get("negatives", m.negatives, d.negatives)?,
        facet_rate: r.get("facet-rate", m.facet_rate, d.facet_rate)?,
        epochs: r.get("epochs", m.epochs, d.epochs)?,
        learning_rate: r.get("lr", m.lr, d.learning_rate)?,
        window,
        seed,
        workers,
        rule: rule(r.get("rule", m.rule, Rule::Min)?),
    };
    ensure(cfg.dim >= 1, "dim", "must be at least 1")?;
    ensure(cfg.negatives >= 1, "negatives", "must be at least 1")?;
    ensure(cfg.facet_rate >= 1, "facet-rate", "must be at least 1")?;
    ensure(cfg.epochs >= 1, "epochs", "must be at least 1")?;
    check_lr(cfg.learning_rate)?;
    Ok(cfg)
}

/// Total dimension 30 split across facets.
fn split_dim(k: usize) -> usize {
    (30 / k.max(1)).max(1)
}

fn pte_config(r: &mut Resolver, m: &ModelFlags, k: usize, seed: u64, workers: usize) -> Result<PteConfig> {
    let d = PteConfig::default();
    let cfg = PteConfig {
        dim: r.get("dim", m.dim, split_dim(k))?,
        negatives: r.get("negatives", m.negatives, d.negatives)?,
        facet_rate: Some(r.get("facet-rate", m.facet_rate, k * k)?),
        edge_samples: r.opt("samples", m.samples)?,
        learning_rate: r.get("lr", m.lr, d.learning_rate)?,
        seed,
        workers,
        rule: rule(r.get("rule", m.rule, Rule::Observation)?),
        weighted_edges: r.get("weighted-edges", m.weighted_edges, false)?,
    };
    ensure(cfg.dim >= 1, "dim", "must be at least 1")?;
    ensure(cfg.negatives >= 1, "negatives", "must be at least 1")?;
    ensure(cfg.facet_rate != Some(0), "facet-rate", "must be at least 1")?;
    ensure(cfg.edge_samples != Some(0), "samples", "must be at least 1")?;
    check_lr(cfg.learning_rate)?;
    Ok(cfg)
}

fn gcn_config(r: &mut Resolver, m: &ModelFlags, k: usize, seed: u64, workers: usize) -> Result<GcnConfig> {
    let d = GcnConfig::default();
    let cfg = GcnConfig {
        dim: r.get("dim", m.dim, split_dim(k))?,
        depth: r.get("depth", m.depth, d.depth)?,
        epochs: r.get("epochs", m.epochs, d.epochs)?,
        learning_rate: r.get("lr", m.lr, d.learning_rate)?,
        negatives: r.get("negatives", m.negatives, d.negatives)?,
        seed,
        mode: match r.get("mode", m.mode, Mode::Direct)? {
            Mode::Direct => NeighborhoodMode::Direct,
            Mode::CoNeighborhood => NeighborhoodMode::CoNeighborhood,
        },
        threshold: r.get("threshold", m.threshold, d.threshold)?,
        workers,
    };
    ensure(cfg.dim >= 1, "dim", "must be at least 1")?;
    ensure(cfg.depth >= 1, "depth", "must be at least 1")?;
    ensure(cfg.epochs >= 1, "epochs", "must be at least 1")?;
    ensure(cfg.negatives >= 1, "negatives", "must be at least 1")?;
    ensure(cfg.threshold >= 0.0 && cfg.threshold.is_finite(), "threshold", "must be finite and nonnegative")?;
    check_lr(cfg.learning_rate)?;
    Ok(cfg)
}

fn link_config(r: &mut Resolver, candidates: Option<usize>, ks: Option<Cutoffs>, seed: u64) -> Result<LinkEvalConfig> {
    let d = LinkEvalConfig::default();
    let num_negatives = r.get("candidates", candidates, d.num_negatives)?;
    ensure(num_negatives >= 1, "candidates", "must be at least 1")?;
    let ks = r.get("ks", ks, Cutoffs(d.ks))?.0;
    ensure(!ks.is_empty() && ks.iter().all(|&k| k >= 1), "ks", "cutoffs must be at least 1")?;
    Ok(LinkEvalConfig { ks, num_negatives, seed })
}

fn estimate_prior(g: &AnyGraph, cfg: &NmfConfig) -> Result<FacetPrior> {
    let prior = match g {
        AnyGraph::Homogeneous(h) => {
            let res = facets::symmetric_nmf(&h.adjacency_sparse(), cfg)?;
            info!("symmetric factorization: {} iterations, objective {:.6}", res.iterations, res.objective);
            FacetPrior::from_factors(res.p, None, cfg.alpha)?
        }
        AnyGraph::Bipartite(b) => {
            let res = facets::asymmetric_nmf(&b.adjacency_sparse(), cfg)?;
            info!("asymmetric factorization: {} iterations, objective {:.6}", res.iterations, res.objective);
            FacetPrior::from_factors(res.p, res.q, cfg.alpha)?
        }
    };
    Ok(prior)
}

fn save_prior(out: &Path, g: &AnyGraph, prior: &FacetPrior) -> Result<Vec<PathBuf>> {
    match g {
        AnyGraph::Homogeneous(h) => {
            facets::save_prior(out, prior.side_a(), h.ids())?;
            Ok(vec![out.to_path_buf()])
        }
        AnyGraph::Bipartite(b) => {
            let (pa, pb) = (with_suffix(out, "a"), with_suffix(out, "b"));
            facets::save_prior(&pa, prior.side_a(), b.a_ids())?;
            facets::save_prior(&pb, prior.side_b().expect("bipartite prior"), b.b_ids())?;
            Ok(vec![pa, pb])
        }
    }
}

fn load_prior(path: &Path, g: &AnyGraph) -> Result<FacetPrior> {
    let ctx = |p: &Path| format!("--prior {}", p.display());
    let prior = match g {
        AnyGraph::Homogeneous(h) => {
            let d = facets::load_prior(path, h.ids()).with_context(|| ctx(path))?;
            FacetPrior::from_distributions(d, None)?
        }
        AnyGraph::Bipartite(b) => {
            let (pa, pb) = (with_suffix(path, "a"), with_suffix(path, "b"));
            let da = facets::load_prior(&pa, b.a_ids()).with_context(|| ctx(&pa))?;
            let db = facets::load_prior(&pb, b.b_ids()).with_context(|| ctx(&pb))?;
            FacetPrior::from_distributions(da, Some(db))?
        }
    };
    Ok(prior)
}

fn save_tables(out: &Path, g: &AnyGraph, tables: &EmbeddingTables, export_context: bool) -> Result<Vec<PathBuf>> {
    match g {
        AnyGraph::Homogeneous(h) => {
            save_table(out, &tables.target, h.ids())?;
            let mut files = vec![out.to_path_buf()];
            if export_context {
                let c = with_suffix(out, "context");
                save_table(&c, &tables.context, h.ids())?;
                files.push(c);
            }
            Ok(files)
        }
        AnyGraph::Bipartite(b) => {
            let (pa, pb) = (with_suffix(out, "a"), with_suffix(out, "b"));
            save_table(&pa, &tables.target, b.a_ids())?;
            save_table(&pb, &tables.context, b.b_ids())?;
            Ok(vec![pa, pb])
        }
    }
}

fn load_tables(path: &Path, g: &AnyGraph) -> Result<EmbeddingTables> {
    let ctx = |p: &Path| format!("--embedding {}", p.display());
    Ok(match g {
        AnyGraph::Homogeneous(h) => {
            let (t, _) = load_table(path, Some(h.ids())).with_context(|| ctx(path))?;
            EmbeddingTables { kind: TableKind::Homogeneous, context: t.clone(), target: t }
        }
        AnyGraph::Bipartite(b) => {
            let (pa, pb) = (with_suffix(path, "a"), with_suffix(path, "b"));
            let (target, _) = load_table(&pa, Some(b.a_ids())).with_context(|| ctx(&pa))?;
            let (context, _) = load_table(&pb, Some(b.b_ids())).with_context(|| ctx(&pb))?;
            EmbeddingTables { kind: TableKind::Bipartite, target, context }
        }
    })
}

fn node_ids(g: &AnyGraph) -> (&IdMap, &IdMap) {
    match g {
        AnyGraph::Homogeneous(h) => (h.ids(), h.ids()),
        AnyGraph::Bipartite(b) => (b.a_ids(), b.b_ids()),
    }
}

fn print_report(report: &EvalReport) {
    print!("{}", report.to_table());
}

pub fn facets(r: &mut Resolver, a: FacetsArgs) -> Result<()> {
    let (g, kind) = input_graph(r, &a.graph)?;
    let (seed, _) = run_flags(r, &a.run)?;
    let cfg = nmf_config(r, &a.nmf, kind, seed)?;
    let out = r.path("out", a.out)?;
    let prior = estimate_prior(&g, &cfg)?;
    let files = save_prior(&out, &g, &prior)?;
    r.write_manifests("facets", &files)
}

pub fn walks(r: &mut Resolver, a: WalksArgs) -> Result<()> {
    let (g, _) = input_graph(r, &a.graph)?;
    let (seed, _) = run_flags(r, &a.run)?;
    let cfg = walk_config(r, &a.walks, seed)?;
    let out = r.path("out", a.out)?;
    let AnyGraph::Homogeneous(g) = g else {
        bail!("invalid --kind: walks need a homogeneous graph");
    };
    let corpus = walks::generate_walks(&g, &cfg)?;
    walks::save_corpus(&out, &corpus)?;
    r.write_manifests("walks", &[out])
}

pub fn train_deepwalk(r: &mut Resolver, a: DeepwalkArgs) -> Result<()> {
    let (g, _) = input_graph(r, &a.graph)?;
    let (seed, workers) = run_flags(r, &a.run)?;
    let prior_path = r.path("prior", a.prior)?;
    let out = r.path("out", a.out)?;
    let export_context = r.get("export-context", a.export_context, false)?;
    let wcfg = walk_config(r, &a.walks, seed)?;
    let flags = ModelFlags {
        dim: a.dim,
        negatives: a.negatives,
        facet_rate: a.facet_rate,
        epochs: a.epochs,
        lr: a.lr,
        rule: a.rule,
        ..Default::default()
    };
    let cfg = deepwalk_config(r, &flags, wcfg.window, seed, workers)?;
    let corpus_path = r.opt_path("corpus", a.corpus)?;
    if !matches!(g, AnyGraph::Homogeneous(_)) {
        bail!("invalid --kind: walk-based training needs a homogeneous graph");
    }
    let prior = load_prior(&prior_path, &g)?;
    let AnyGraph::Homogeneous(h) = &g else { unreachable!() };
    let corpus = match corpus_path {
        Some(p) => walks::load_corpus(&p, h.num_nodes()).with_context(|| format!("--corpus {}", p.display()))?,
        None => walks::generate_walks(h, &wcfg)?,
    };
    let trained = polydeepwalk::train(h, &prior, &corpus, &cfg)?;
    info!("loss trace {:?}", trained.loss_trace);
    let files = save_tables(&out, &g, &trained.tables, export_context)?;
    r.write_manifests("train-deepwalk", &files)
}

pub fn train_pte(r: &mut Resolver, a: PteArgs) -> Result<()> {
    let (g, _) = input_graph(r, &a.graph)?;
    let (seed, workers) = run_flags(r, &a.run)?;
    let prior_path = r.path("prior", a.prior)?;
    let out = r.path("out", a.out)?;
    let AnyGraph::Bipartite(b) = &g else {
        bail!("invalid --kind: edge-sampling training needs a bipartite graph");
    };
    let prior = load_prior(&prior_path, &g)?;
    let flags = ModelFlags {
        dim: a.dim,
        negatives: a.negatives,
        facet_rate: a.facet_rate,
        samples: a.samples,
        lr: a.lr,
        rule: a.rule,
        weighted_edges: a.weighted_edges,
        ..Default::default()
    };
    let cfg = pte_config(r, &flags, prior.k(), seed, workers)?;
    let trained = polypte::train_pte(b, &prior, &cfg)?;
    info!("loss trace {:?}", trained.loss_trace);
    let files = save_tables(&out, &g, &trained.tables, false)?;
    r.write_manifests("train-pte", &files)
}

pub fn train_gcn(r: &mut Resolver, a: GcnArgs) -> Result<()> {
    let (g, _) = input_graph(r, &a.graph)?;
    let (seed, workers) = run_flags(r, &a.run)?;
    let prior_path = r.path("prior", a.prior)?;
    let out = r.path("out", a.out)?;
    let adj_out = r.opt_path("facet-adjacency", a.facet_adjacency)?;
    let AnyGraph::Bipartite(b) = &g else {
        bail!("invalid --kind: graph encoders need a bipartite graph");
    };
    let prior = load_prior(&prior_path, &g)?;
    let flags = ModelFlags {
        dim: a.dim,
        depth: a.depth,
        epochs: a.epochs,
        lr: a.lr,
        negatives: a.negatives,
        mode: a.mode,
        threshold: a.threshold,
        ..Default::default()
    };
    let cfg = gcn_config(r, &flags, prior.k(), seed, workers)?;
    let adj = polygcn::decompose_adjacency(&b.adjacency_sparse(), &prior.p, prior.q.as_ref().expect("bipartite prior"))?;
    let trained = polygcn::train_gcn(b, &adj, &cfg)?;
    info!("loss trace {:?}", trained.loss_trace);
    let mut files = save_tables(&out, &g, &trained.tables, false)?;
    if let Some(p) = adj_out {
        polygcn::save_facet_adjacency(&p, &adj, b.a_ids(), b.b_ids())?;
        files.push(p);
    }
    r.write_manifests("train-gcn", &files)
}

pub fn embed(r: &mut Resolver, a: EmbedArgs) -> Result<()> {
    let emb = r.path("embedding", a.embedding)?;
    let prior_path = r.path("prior", a.prior)?;
    let plain = r.get("plain", a.plain, false)?;
    let out = r.path("out", a.out)?;
    let (table, ids) = load_table(&emb, None).with_context(|| format!("--embedding {}", emb.display()))?;
    let dist = facets::load_prior(&prior_path, &ids).with_context(|| format!("--prior {}", prior_path.display()))?;
    let joint = inference::concat(&table, &dist, !plain)?;
    inference::save_joint(&out, &joint, &ids)?;
    r.write_manifests("embed", &[out])
}

fn link_report(
    split: &LinkSplit,
    tables: &EmbeddingTables,
    prior: &FacetPrior,
    cfg: &LinkEvalConfig,
    score: Score,
) -> Result<EvalReport> {
    let mode = match tables.kind {
        TableKind::Homogeneous => SimilarityMode::Homogeneous,
        TableKind::Bipartite => SimilarityMode::CrossType,
    };
    let rule = match score {
        Score::Pairs => ScoreRule::FacetPairs,
        Score::Mixture => ScoreRule::FacetMixture,
    };
    let scorer = FacetScorer::with_rule(tables, prior, mode, rule)?;
    Ok(eval::evaluate_links(&scorer, split, cfg)?)
}

pub fn eval_link(r: &mut Resolver, a: EvalLinkArgs) -> Result<()> {
    let (train, _) = load_graph(r, "train", a.train, a.kind)?;
    let test = r.path("test", a.test)?;
    let emb = r.path("embedding", a.embedding)?;
    let prior_path = r.path("prior", a.prior)?;
    let seed = r.get("seed", a.seed, 0u64)?;
    let cfg = link_config(r, a.candidates, a.ks, seed)?;
    let score = r.get("score", a.score, Score::Pairs)?;
    let out = r.path("out", a.out)?;
    let (qids, tids) = node_ids(&train);
    let (queries, unknown) =
        eval::load_queries(&test, qids, tids).with_context(|| format!("--test {}", test.display()))?;
    if !unknown.is_empty() {
        warn!("skipped {} test pair(s) naming nodes absent from the training graph", unknown.len());
    }
    let prior = load_prior(&prior_path, &train)?;
    let tables = load_tables(&emb, &train)?;
    let split = LinkSplit { train, test: Vec::new(), queries };
    let report = link_report(&split, &tables, &prior, &cfg, score)?;
    print_report(&report);
    report.save(&out)?;
    r.write_manifests("eval-link", &[out])
}

fn classify_config(r: &mut Resolver, fraction: Option<f64>, seed: u64) -> Result<ClassifyConfig> {
    let d = ClassifyConfig::default();
    let train_fraction = r.get("train-fraction", fraction, d.train_fraction)?;
    ensure(train_fraction > 0.0 && train_fraction < 1.0, "train-fraction", "must lie strictly between 0 and 1")?;
    Ok(ClassifyConfig { train_fraction, seed, ..d })
}

pub fn eval_class(r: &mut Resolver, a: EvalClassArgs) -> Result<()> {
    let emb = r.path("embedding", a.embedding)?;
    let labels_path = r.path("labels", a.labels)?;
    let seed = r.get("seed", a.seed, 0u64)?;
    let cfg = classify_config(r, a.train_fraction, seed)?;
    let out = r.path("out", a.out)?;
    let (joint, ids) = inference::load_joint(&emb, None).with_context(|| format!("--embedding {}", emb.display()))?;
    let labels = eval::load_labels(&labels_path, &ids).with_context(|| format!("--labels {}", labels_path.display()))?;
    let (micro, macro_f1) = eval::classify(&joint, &labels, &cfg)?;
    let report = EvalReport {
        micro_f1: Some(micro),
        macro_f1: Some(macro_f1),
        seed,
        split: format!("train-fraction {}", cfg.train_fraction),
        queries: labels.per_node.iter().filter(|l| !l.is_empty()).count(),
        ..Default::default()
    };
    print_report(&report);
    report.save(&out)?;
    r.write_manifests("eval-class", &[out])
}

fn strategy(r: &mut Resolver, s: Option<Strategy>, kind: Kind) -> Result<SplitStrategy> {
    let default = match kind {
        Kind::Homogeneous => Strategy::OnePerNode,
        Kind::Bipartite => Strategy::LatestPerUser,
    };
    Ok(match r.get("strategy", s, default)? {
        Strategy::OnePerNode => SplitStrategy::OnePerNode,
        Strategy::LatestPerUser => SplitStrategy::LatestPerUser,
    })
}

fn write_split(split: &LinkSplit, train_out: &Path, test_out: &Path) -> Result<()> {
    graph::save_edge_list(train_out, &split.train)?;
    let (qids, tids) = node_ids(&split.train);
    eval::save_queries(test_out, &split.queries, qids, tids)?;
    Ok(())
}

pub fn split(r: &mut Resolver, a: SplitArgs) -> Result<()> {
    let (g, kind) = input_graph(r, &a.graph)?;
    let strat = strategy(r, a.strategy, kind)?;
    let seed = r.get("seed", a.seed, 0u64)?;
    let train_out = r.path("out-train", a.out_train)?;
    let test_out = r.path("out-test", a.out_test)?;
    let s = eval::split_links(&g, strat, seed)?;
    write_split(&s, &train_out, &test_out)?;
    r.write_manifests("split", &[train_out, test_out])
}

pub fn pipeline(r: &mut Resolver, a: PipelineArgs) -> Result<()> {
    let (g, kind) = input_graph(r, &a.graph)?;
    let (seed, workers) = run_flags(r, &a.run)?;
    let model = r.get(
        "model",
        a.model,
        match kind {
            Kind::Homogeneous => Model::Deepwalk,
            Kind::Bipartite => Model::Pte,
        },
    )?;
    match (model, kind) {
        (Model::Deepwalk, Kind::Bipartite) => bail!("invalid --model: deepwalk needs a homogeneous graph"),
        (Model::Pte | Model::Gcn, Kind::Homogeneous) => bail!("invalid --model: {model} needs a bipartite graph"),
        _ => {}
    }
    let strat = strategy(r, a.strategy, kind)?;
    let nmf = nmf_config(r, &a.nmf, kind, seed)?;
    let flags = ModelFlags {
        dim: a.dim,
        negatives: a.negatives,
        facet_rate: a.facet_rate,
        epochs: a.epochs,
        lr: a.lr,
        rule: a.rule,
        samples: a.samples,
        weighted_edges: a.weighted_edges,
        depth: a.depth,
        mode: a.mode,
        threshold: a.threshold,
    };
    let link_cfg = link_config(r, a.candidates, a.ks, seed)?;
    let score = r.get("score", a.score, if model == Model::Gcn { Score::Mixture } else { Score::Pairs })?;
    let labels_path = r.opt_path("labels", a.labels)?;
    let class_cfg = match labels_path {
        Some(_) => Some(classify_config(r, a.train_fraction, seed)?),
        None => None,
    };
    let (wcfg, tcfg, pcfg, gcfg) = match model {
        Model::Deepwalk => {
            let w = walk_config(r, &a.walks, seed)?;
            let t = deepwalk_config(r, &flags, w.window, seed, workers)?;
            (Some(w), Some(t), None, None)
        }
        Model::Pte => (None, None, Some(pte_config(r, &flags, nmf.k, seed, workers)?), None),
        Model::Gcn => (None, None, None, Some(gcn_config(r, &flags, nmf.k, seed, workers)?)),
    };
    let dir = r.path("out", a.out)?;
    std::fs::create_dir_all(&dir).with_context(|| format!("--out {}", dir.display()))?;
    let mut files = Vec::new();

    let held_out = eval::split_links(&g, strat, seed)?;
    let (train_out, test_out) = (dir.join("train.edges"), dir.join("test.queries"));
    write_split(&held_out, &train_out, &test_out)?;
    // Continue from the written files so eval-link on them reproduces this report.
    let train = graph::load_edge_list(&train_out, graph_kind(kind))?;
    let (qids, tids) = node_ids(&train);
    let (queries, unknown) = eval::load_queries(&test_out, qids, tids)?;
    if !unknown.is_empty() {
        warn!("skipped {} test pair(s) naming nodes absent from the training graph", unknown.len());
    }
    let split = LinkSplit { train, test: held_out.test, queries };
    files.extend([train_out, test_out]);
    info!("held out {} link(s)", split.queries.len());

    let prior = estimate_prior(&split.train, &nmf)?;
    files.extend(save_prior(&dir.join("prior"), &split.train, &prior)?);

    let tables = match (&split.train, model) {
        (AnyGraph::Homogeneous(h), Model::Deepwalk) => {
            let corpus = walks::generate_walks(h, wcfg.as_ref().expect("walk config"))?;
            polydeepwalk::train(h, &prior, &corpus, tcfg.as_ref().expect("train config"))?.tables
        }
        (AnyGraph::Bipartite(b), Model::Pte) => polypte::train_pte(b, &prior, pcfg.as_ref().expect("pte config"))?.tables,
        (AnyGraph::Bipartite(b), Model::Gcn) => {
            let adj = polygcn::decompose_adjacency(&b.adjacency_sparse(), &prior.p, prior.q.as_ref().expect("bipartite prior"))?;
            polygcn::train_gcn(b, &adj, gcfg.as_ref().expect("gcn config"))?.tables
        }
        _ => unreachable!("model and graph kind checked above"),
    };
    files.extend(save_tables(&dir.join("embedding"), &split.train, &tables, false)?);

    let mut report = link_report(&split, &tables, &prior, &link_cfg, score)?;
    if let (Some(path), Some(cfg)) = (labels_path, class_cfg) {
        let (ids, _) = node_ids(&split.train);
        let labels = eval::load_labels(&path, ids).with_context(|| format!("--labels {}", path.display()))?;
        let joint = inference::concat(&tables.target, prior.side_a(), true)?;
        let joint_out = dir.join("joint");
        inference::save_joint(&joint_out, &joint, ids)?;
        files.push(joint_out);
        let (micro, macro_f1) = eval::classify(&joint, &labels, &cfg)?;
        report.micro_f1 = Some(micro);
        report.macro_f1 = Some(macro_f1);
    }
    print_report(&report);
    let report_out = dir.join("report.txt");
    report.save(&report_out)?;
    files.push(report_out);
    r.write_manifests("pipeline", &files)
}

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

#[derive(Parser)]
#[command(name = "polyembed", version, about = "Polysemous network embedding pipeline")]
struct Cli {
    /// key=value file with defaults for any flag; flags win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate facet priors by nonnegative factorization of the adjacency
    Facets(FacetsArgs),
    /// Generate a random-walk corpus
    Walks(WalksArgs),
    /// Train facet embeddings on random walks of a homogeneous graph
    TrainDeepwalk(DeepwalkArgs),
    /// Train facet embeddings by edge sampling on a bipartite graph
    TrainPte(PteArgs),
    /// Train per-facet graph encoders on a bipartite graph
    TrainGcn(GcnArgs),
    /// Export concatenated (optionally prior-weighted) embeddings
    Embed(EmbedArgs),
    /// Held-out link prediction: HR@k and AUC
    EvalLink(EvalLinkArgs),
    /// Node classification with a one-vs-rest logistic regression
    EvalClass(EvalClassArgs),
    /// Hold out test links and write the training graph
    Split(SplitArgs),
    /// Split, estimate facets, train and evaluate in one run
    Pipeline(PipelineArgs),
}

/// Declares a string-valued choice usable both as a flag and a config value.
macro_rules! choice {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name { $($variant),+ }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!("expected one of: {}", [$($text),+].join(", "))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }
    };
}

choice!(Kind { Homogeneous => "homogeneous", Bipartite => "bipartite" });
choice!(Rule { Min => "min", Observation => "observation" });
choice!(Mode { Direct => "direct", CoNeighborhood => "co-neighborhood" });
choice!(Strategy { OnePerNode => "one-per-node", LatestPerUser => "latest-per-user" });
choice!(Model { Deepwalk => "deepwalk", Pte => "pte", Gcn => "gcn" });
choice!(Score { Pairs => "pairs", Mixture => "mixture" });

/// Comma-separated list of cutoffs, e.g. `10,50,100`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cutoffs(pub Vec<usize>);

impl FromStr for Cutoffs {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| format!("cannot parse {t:?} as a cutoff")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Cutoffs)
    }
}

impl fmt::Display for Cutoffs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|k| k.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Args, Default)]
pub struct GraphFlags {
    /// Edge list: `src dst [weight [timestamp]]` per line
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// homogeneous | bipartite
    #[arg(long)]
    pub kind: Option<Kind>,
}

#[derive(Args, Default)]
pub struct NmfFlags {
    /// Number of facets (default 6 homogeneous, 5 bipartite)
    #[arg(long)]
    pub k: Option<usize>,
    /// Tikhonov weight of the factorization
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative objective change that stops the factorization
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Default)]
pub struct WalkFlags {
    #[arg(long)]
    pub walks_per_node: Option<usize>,
    #[arg(long)]
    pub walk_length: Option<usize>,
    /// Context radius
    #[arg(long)]
    pub window: Option<usize>,
    /// Ignore edge weights when stepping
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub unweighted: Option<bool>,
}

#[derive(Args, Default)]
pub struct RunFlags {
    /// Root seed for all randomness
    #[arg(long)]
    pub seed: Option<u64>,
    /// 1 is deterministic; more run lock-free in parallel
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Training hyperparameters of every model; each command reads its own.
#[derive(Default)]
pub struct ModelFlags {
    pub dim: Option<usize>,
    pub negatives: Option<usize>,
    pub facet_rate: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub rule: Option<Rule>,
    pub samples: Option<u64>,
    pub weighted_edges: Option<bool>,
    pub depth: Option<usize>,
    pub mode: Option<Mode>,
    pub threshold: Option<f64>,
}

#[derive(Args)]
pub struct FacetsArgs {
    #[command(flatten)]
    pub graph: GraphFlags,
    #[command(flatten)]
    pub nmf: NmfFlags,
    #[command(flatten)]
    pub run: RunFlags,
    /// Prior file; bipartite graphs get `<out>.a` and `<out>.b`
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct WalksArgs {
    #[command(flatten)]
    pub graph: GraphFlags,
    #[command(flatten)]
    pub walks: WalkFlags,
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DeepwalkArgs {
    #[command(flatten)]
    pub graph: GraphFlags,
    /// Facet prior file
    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,
    /// Walk corpus; generated from the walk flags when absent
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub walks: WalkFlags,
    #[command(flatten)]
    pub run: RunFlags,
    /// Dimension of each facet vector
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Facet assignments per observation
    #[arg(long)]
    pub facet_rate: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// min | observation
    #[arg(long)]
    pub rule: Option<Rule>,
    /// Also write the context table to `<out>.context`
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub export_context: Option<bool>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PteArgs {
    #[command(flatten)]
    pub graph: GraphFlags,
    /// Prior base path (`<prior>.a`, `<prior>.b`)
    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunFlags,
    /// Dimension of each facet vector (default 30/K)
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Facet assignments per edge (default K²)
    #[arg(long)]
    pub facet_rate: Option<usize>,
    /// Edge draws (default 50 per edge)
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// min | observation
    #[arg(long)]
    pub rule: Option<Rule>,
    /// Draw edges proportionally to weight
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub weighted_edges: Option<bool>,
    /// Output base path (`<out>.a`, `<out>.b`)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GcnArgs {
    #[command(flatten)]
    pub graph: GraphFlags,
    /// Prior base path (`<prior>.a`, `<prior>.b`)
    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunFlags,
    /// Dimension of each facet representation (default 30/K)
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam step size
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub negatives: Option<usize>,
    /// direct | co-neighborhood
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Facet mass an edge needs to join a neighborhood
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Also write the facet adjacency as `k i j value` triples
    #[arg(long, value_name = "FILE")]
    pub facet_adjacency: Option<PathBuf>,
    /// Output base path (`<out>.a`, `<out>.b`)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EmbedArgs {
    /// Facet embedding table
    #[arg(long, value_name = "FILE")]
    pub embedding: Option<PathBuf>,
    /// Prior over the same nodes
    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,
    /// Concatenate without prior weighting
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub plain: Option<bool>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalLinkArgs {
    /// Training edge list
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,
    /// homogeneous | bipartite
    #[arg(long)]
    pub kind: Option<Kind>,
    /// Held-out `query truth` pairs
    #[arg(long, value_name = "FILE")]
    pub test: Option<PathBuf>,
    /// Embedding table (bipartite: base path of `.a`/`.b`)
    #[arg(long, value_name = "FILE")]
    pub embedding: Option<PathBuf>,
    /// Prior file (bipartite: base path of `.a`/`.b`)
    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,
    /// Sampled negatives per query
    #[arg(long)]
    pub candidates: Option<usize>,
    /// HR cutoffs, comma-separated
    #[arg(long)]
    pub ks: Option<Cutoffs>,
    /// pairs | mixture (link score rule; mixture suits gcn embeddings)
    #[arg(long)]
    pub score: Option<Score>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report file (`metric=value` lines)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalClassArgs {
    /// Joint embedding file
    #[arg(long, value_name = "FILE")]
    pub embedding: Option<PathBuf>,
    /// `node label` lines
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub graph: GraphFlags,
    /// one-per-node | latest-per-user (default by graph kind)
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out_train: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out_test: Option<PathBuf>,
}

#[derive(Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub graph: GraphFlags,
    /// deepwalk | pte | gcn (default deepwalk for homogeneous, pte for bipartite)
    #[arg(long)]
    pub model: Option<Model>,
    #[command(flatten)]
    pub nmf: NmfFlags,
    #[command(flatten)]
    pub walks: WalkFlags,
    #[command(flatten)]
    pub run: RunFlags,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub facet_rate: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub rule: Option<Rule>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub weighted_edges: Option<bool>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub candidates: Option<usize>,
    #[arg(long)]
    pub ks: Option<Cutoffs>,
    /// pairs | mixture (default mixture for gcn, pairs otherwise)
    #[arg(long)]
    pub score: Option<Score>,
    /// Optional `node label` file for a classification report
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<()> {
    let mut r = config::Resolver::load(cli.config.as_deref())?;
    match cli.command {
        Command::Facets(a) => commands::facets(&mut r, a),
        Command::Walks(a) => commands::walks(&mut r, a),
        Command::TrainDeepwalk(a) => commands::train_deepwalk(&mut r, a),
        Command::TrainPte(a) => commands::train_pte(&mut r, a),
        Command::TrainGcn(a) => commands::train_gcn(&mut r, a),
        Command::Embed(a) => commands::embed(&mut r, a),
        Command::EvalLink(a) => commands::eval_link(&mut r, a),
        Command::EvalClass(a) => commands::eval_class(&mut r, a),
        Command::Split(a) => commands::split(&mut r, a),
        Command::Pipeline(a) => commands::pipeline(&mut r, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

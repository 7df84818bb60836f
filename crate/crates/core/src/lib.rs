//! Polysemous network embedding.
//!
//! Every node owns `K` facet embeddings instead of a single vector. Facet
//! priors come from a nonnegative factorization of the adjacency matrix and
//! drive facet sampling during training and facet weighting at inference.
//!
//! * [`graph`]: edge-list loading and CSR adjacency for homogeneous and bipartite graphs.
//! * [`facets`]: NMF facet priors and facet-distribution arithmetic.
//! * [`walks`]: random-walk corpus and sliding-window observations.
//! * [`polydeepwalk`]: facet-sampled skip-gram with negative sampling.
//! * [`polypte`]: facet-sampled edge embedding for bipartite graphs.
//! * [`polygcn`]: per-facet mean-aggregator graph encoders.
//! * [`inference`]: joint embeddings and facet-pair similarity.
//! * [`eval`]: link splits, HR@k, AUC and node classification.

pub mod embedding;
pub mod error;
pub mod eval;
pub mod facets;
pub mod graph;
pub mod inference;
pub mod polydeepwalk;
pub mod polygcn;
pub mod polypte;
pub mod sgns;
pub mod synth;
pub mod walks;

pub mod rng;
pub(crate) mod textio;

pub use error::{Error, Result};

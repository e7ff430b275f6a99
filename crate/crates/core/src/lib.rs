//! Graph embeddings via second-order random walks and skip-gram negative
//! sampling, together with the closed-form limit objects the embeddings
//! converge to on (degree-corrected) stochastic block models.
//!
//! The crate is organised as a pipeline plus an oracle:
//!
//! * [`graph`] — immutable CSR graphs with edge-list IO.
//! * [`genmodel`] — SBM / planted-partition / DCSBM samplers.
//! * [`sampler`] — biased second-order walks, window pair extraction,
//!   unigram negative sampling, and exact small-graph pair probabilities.
//! * [`trainer`] — SGD on the negative-sampling objective, constrained
//!   (single matrix) or unconstrained (center/context) modes.
//! * [`theory`] — limit gram matrices, their factor rows, separation, and
//!   the deviation statistics used to compare a trained model against them.
//! * [`cluster`] — k-means++/Lloyd with restarts and a normalized-Laplacian
//!   spectral baseline.
//! * [`metrics`] — permutation-minimized misclassification, NMI, ARI.
//! * [`downstream`] — node classification and link prediction on top of
//!   learned embeddings.

pub mod alias;
pub mod cluster;
pub mod downstream;
pub mod error;
pub mod genmodel;
pub mod graph;
pub mod mat;
pub mod metrics;
pub mod num;
pub mod rng;
pub mod sampler;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::Graph;
pub use mat::Mat;

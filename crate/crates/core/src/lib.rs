//! Sparse discrete denoising diffusion for graph generation.
//!
//! Graphs are kept as labelled edge lists end to end. Forward noising,
//! training and reverse sampling only ever touch the edges that exist plus a
//! fraction `λ` of all node pairs, so memory grows with the edge count
//! instead of `n²`.
//!
//! Module map:
//! - [`graph`]: sparse graph type and condensed pair indices
//! - [`noise`]: schedules, marginal transition kernels, forward corruption,
//!   posteriors and the sparsity tail bound
//! - [`query`]: query-edge sampling and message-graph construction
//! - [`encodings`]: spectral, cycle and distance features
//! - [`nn`]: the sparse graph transformer, its loss, gradients, optimizer and
//!   checkpoint format
//! - [`sampler`]: chunked reverse diffusion
//! - [`metrics`]: descriptor histograms and TV-kernel MMD
//! - [`datasets`]: synthetic generators, dataset files and statistics
//! - [`oracle`] and [`verify`]: dense reference implementations and the
//!   statistical checks built on them

#![allow(clippy::needless_range_loop)]

pub mod autodiff;
pub mod datasets;
pub mod encodings;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod oracle;
pub mod par;
pub mod query;
pub mod random;
pub mod sampler;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{GraphSpec, SparseGraph};

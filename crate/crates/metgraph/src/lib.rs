//! Subgraph detection and graph partitioning driven by random-walk exit times.
//!
//! A random walker started inside a "good" vertex set takes a long time to
//! first hit the complement. This crate scores vertex sets by that mean exit
//! time, relaxes the combinatorial search through a regularized graph
//! Schrödinger operator `L + eps^{-1} diag(1 - phi)`, and optimizes the
//! relaxation with fast rearrangement iterations:
//!
//! - [`detector::detect`] finds a vertex set of fixed size `k` maximizing the
//!   relaxed mean exit time, on directed or undirected graphs.
//! - [`partitioner::partition`] splits the vertex set into `K` classes that
//!   each trap walkers for comparably long times.
//!
//! Everything is deterministic under a caller-supplied seed. The [`synth`]
//! module generates the benchmark families used by the test suite (planted
//! multiscale ER blocks, power-law backgrounds, directed ER-plus-cycle traps),
//! and [`oracle`] holds independent ground-truth routines (Monte Carlo
//! walkers, exhaustive searches) against which everything else is validated.

pub mod detector;
pub mod energy;
mod error;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod partitioner;
pub mod solve;
pub mod sweep;
pub mod synth;
pub(crate) mod util;

pub use error::{Error, Result};
pub use graph::Graph;

//! Loss-landscape analysis for small neural networks.
//!
//! The crate trains desk-scale MLP classifiers, connects independently
//! trained modes with a trainable single-bend polygonal chain, checks
//! straight segments between parameter vectors for loss barriers, and
//! evaluates loss surfaces on the plane through three parameter vectors.
//!
//! Module map:
//!
//! - [`tensor`] / [`rng`]: flat parameter vectors and named random streams.
//! - [`net`]: MLP forward pass, cross-entropy and exact backpropagation.
//! - [`optim`]: SGD, Adam, step/linear decay and SGDR schedules.
//! - [`data`]: synthetic spirals and Gaussian blobs, batching, jitter, CSV input.
//! - [`curve`]: the chain `φ_θ(t)`, bend training and metric sweeps.
//! - [`landscape`]: segment scans, barrier detection, planes and surfaces.
//! - [`checkpoint`]: bit-exact binary snapshots.
//! - [`experiments`]: JSON-configured runs behind the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod curve;
pub mod data;
pub mod error;
pub mod experiments;
pub mod landscape;
pub mod net;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{axpy_combine, ParamVector};

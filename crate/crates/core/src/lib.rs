//! Optimizer-induced mode connectivity for two-layer ReLU networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, Jacobi SVD, matrix norms, assignment and LP kernels
//! - [`relu_net`]: the two-layer model `f(x) = (xW)_+ α`, datasets, losses and set membership
//! - [`optimizers`]: AdamW and the Lion-K family (Signum, normalized momentum GD, Muon)
//! - [`paths`]: closed-form zero-loss path primitives, intra-optimizer connectors,
//!   permutation alignment, polychain fitting and barrier profiling
//! - [`arrangement`]: activation patterns, convexified support sets and critical widths
//! - [`construction`]: the `[A; -A]` dataset whose zero-loss set splits into `2^d` components
//! - [`io`]: checkpoint and dataset text formats

pub mod arrangement;
pub mod construction;
pub mod error;
pub mod io;
pub mod numerics;
pub mod optimizers;
pub mod paths;
pub mod relu_net;
pub mod rng;

pub use error::{Error, Result};
pub use numerics::{Mat, NormKind};
pub use relu_net::{Dataset, RegSetSpec, TwoLayerNet};


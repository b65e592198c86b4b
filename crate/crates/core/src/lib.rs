//! Rate-constrained power minimization over Gaussian parallel interference
//! channels.
//!
//! Each of `Q` links picks a power allocation over `N` parallel subchannels so
//! that it reaches a target information rate with the least total power,
//! treating the other links as noise. The coupled problem is a generalized
//! Nash equilibrium problem. This crate provides:
//!
//! * [`model`]: scenario data and the SINR / rate formulas,
//! * [`waterfill`]: the rate-constrained single-user waterfilling best response,
//! * [`conditions`]: P-matrix certificates for existence and uniqueness of an
//!   equilibrium, the power upper bound and contraction factors,
//! * [`solvers`]: sequential and simultaneous iterative waterfilling, the
//!   single-subchannel closed form and equilibrium verification,
//! * [`netgen`]: hexagonal multicell geometry and frequency-selective Rayleigh
//!   channels,
//! * [`experiments`]: seeded certificate sweeps and convergence comparisons.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the parallel
//! runner and the command-line tool live in `gne-cli`.
//!
//! Rates are in nats throughout.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod conditions;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod netgen;
pub mod solvers;
pub mod spectral;
pub mod waterfill;

pub use conditions::DiagnosticsReport;
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{PowerAllocation, Scenario};
pub use solvers::{IterationTrace, SolveOutcome, SolverOptions};

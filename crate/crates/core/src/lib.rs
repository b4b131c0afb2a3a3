//! Reconstruction of sensor grids from a subset of active sensors.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the numerical core:
//!
//! * [`field`]: correlated Gaussian test fields and measurement noise,
//! * [`diagnostics`]: spectrum, energy capture and coherence of a field,
//! * [`sampling`]: random, Halton, quasi-crystal and farthest-point masks and
//!   the masking operator,
//! * [`solver`]: Majorization-Minimization completion with soft, hard and
//!   non-convex singular-value updates under a cooling schedule,
//! * [`experiment`]: single benchmark trials, aggregation and trend checks.
//!
//! File formats, the CLI and the parallel benchmark driver live in the
//! `bluefill` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;

pub mod diagnostics;
pub mod experiment;
pub mod field;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod sampling;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
pub use field::{add_noise, generate_field, CorrelationLevel, GridField};
pub use matrix::Matrix;
pub use metrics::nmse;
pub use sampling::{apply_mask, adjoint_mask, Observations, SamplingMask, Scheme};
pub use solver::{solve, HardRule, SolveResult, SolverConfig};

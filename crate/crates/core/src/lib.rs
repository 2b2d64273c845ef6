//! Kernel plug-in estimation of single-interval Schrödinger-bridge drifts.
//!
//! The drift at `(t, x)` given the conditioning state `xi` is a ratio of
//! bridge-weighted conditional moments of the terminal state. This crate
//! provides synthetic pair laws with exact quadrature truth, the plug-in
//! estimator, a Goldenshluger–Lepski bandwidth selector, pointwise inference
//! and reproducible experiment drivers.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod grid;
pub mod inference;
pub mod kernels;
pub mod models;
pub mod normal;
pub mod quadrature;
pub mod truth;

pub use bandwidth::{gl_select, oracle_bandwidth, BandwidthGrid, SelectorDiagnostics};
pub use error::{Error, Result};
pub use estimator::{estimate_drift, estimate_drift_grid, DriftEstimate, Floors};
pub use experiments::{ExperimentConfig, RunArtifacts, RunOptions};
pub use grid::EvalGrid;
pub use kernels::KernelSpec;
pub use models::{PairLaw, SampleSet, Testbed, Variant};
pub use truth::{IntervalSpec, Query, TruthCache, TruthEngine};

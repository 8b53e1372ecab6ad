//! Coordinate-chart tensor calculus on Galilei manifolds.
//!
//! This crate builds affine connections on Galilei manifolds
//! `(M, tau, h)` out of freely specifiable tensor data, extracts that data
//! back from any given connection, and numerically verifies the identities
//! relating torsion, non-metricity and the Newton–Coriolis form at sampled
//! chart points. All fields are exact symbolic expressions over a single
//! coordinate chart; residual checks are the only place floating point
//! enters.
//!
//! The main entry points are:
//!
//! - [`expr`] — symbolic scalar fields: parsing, evaluation, differentiation.
//! - [`tensor`] — dense multi-index tensor fields with variance-aware algebra.
//! - [`structure`] — Galilei structures, observers, projectors and the
//!   covariant space metric.
//! - [`connection`] — covariant derivatives, torsion, non-metricities, the
//!   Newton–Coriolis form, and the classification of connections by free
//!   field data (both directions).
//! - [`milne`] — observer changes and gauge-invariance checks.
//! - [`frames`] — Galilei frames, local connection forms, Cartan structure
//!   equation and the Galilei-algebra split.
//! - [`cli`] — the spec-file driven verification harness behind the
//!   `galilei` binary.
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability.

pub mod cli;
pub mod connection;
pub mod expr;
pub mod frames;
mod matrix;
pub mod milne;
pub mod sample;
pub mod structure;
pub mod synth;
pub mod tensor;

pub use connection::{build_connection, extract_data, special_connection, Connection, ConnectionData};
pub use expr::{parse_expression, ScalarExpr};
pub use structure::{GalileiStructure, Observer};
pub use tensor::{TensorField, Variance};

//! Direct solver for 2-D Poisson-type problems built around a precomputed
//! inverse operator.
//!
//! The pipeline is: discretize on a uniform grid ([`grid`]), invert the
//! system matrix once ([`dense`]), round the inverse to a fixed number of
//! decimal digits ([`quant`]), then apply it to right-hand sides with a
//! multiply that shares one product per distinct coefficient magnitude in
//! each column ([`applyplan`]). Every apply reports the exact number of
//! elementary multiplications and additions it performed.
//!
//! [`iterative`] provides Gauss-Seidel and SOR baselines with the same
//! operation accounting, and [`bench`] regenerates the error table and
//! scaling studies. [`cache`] holds the on-disk matrix format used by the
//! `invop` binary.

pub mod applyplan;
pub mod bench;
pub mod cache;
pub mod dense;
pub mod error;
pub mod grid;
pub mod iterative;
pub mod quant;

pub use applyplan::{ApplyPlan, CostPrediction, OpCounters};
pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use grid::{CoefficientField, Grid2D, OperatorMatrix, RowKind, SourceField};
pub use iterative::IterativeReport;
pub use quant::QuantizedMatrix;

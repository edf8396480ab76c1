//! Recovery of true covariance spectra from sample covariance eigenvalues.
//!
//! The sample eigenvalues of `n` Gaussian observations in dimension `p` are
//! spread and biased relative to the true ones whenever `p / n` is not
//! small. Two estimators undo this:
//!
//! * [`asymptotic::correct_spectrum`], a closed-form first-order correction;
//! * [`fixedpoint::iterate`], which searches for a spectrum whose simulated
//!   eigenvector overlaps map the sample spectrum back onto itself.
//!
//! [`scaling::recover_scaled`] runs the second on a reduced problem for
//! large `p`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fixedpoint;
pub mod io;
pub mod plot;
pub mod report;
pub mod scaling;
pub mod simulate;
pub mod spectra;

pub use error::{Error, ErrorClass, Result};
pub use report::{Method, RecoveryReport, Warning};
pub use spectra::{SampleShape, Spectrum};

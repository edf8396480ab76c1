//! Gaussian simulation in the principal-component basis, sample spectra,
//! Monte-Carlo B matrices and the Marchenko-Pastur baseline.

mod bmatrix;
mod data;
mod eigen;
mod mp;
mod seed;

pub use bmatrix::{estimate_b_matrix, BMatrix, BMatrixSidecar, STOCHASTIC_TOLERANCE};
pub use data::{sample_covariance, sample_data, DataMatrix};
pub use eigen::{decompose, eigenvalues, sample_eigenvalues, sample_spectrum, SampleEigen};
pub use mp::{ks_statistic, ks_two_sample, mp_cdf, mp_density, MarchenkoPastur};
pub use seed::SeedSpec;

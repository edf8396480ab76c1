use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use rand::Rng;
use rand_distr::StandardNormal;

use super::SeedSpec;
use crate::error::{Error, Result};
use crate::spectra::{SampleShape, Spectrum};

/// `n x p` observations, one row per sample.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    entries: Mat<f64>,
    shape: SampleShape,
}

impl DataMatrix {
    /// Build from rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let shape = SampleShape::new(n, p)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: i * p + j });
            }
        }
        Ok(DataMatrix {
            entries: Mat::from_fn(n, p, |i, j| rows[i][j]),
            shape,
        })
    }

    pub fn shape(&self) -> SampleShape {
        self.shape
    }

    pub fn entries(&self) -> MatRef<'_, f64> {
        self.entries.as_ref()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.shape.n).map(move |i| (0..self.shape.p).map(|j| self.entries[(i, j)]).collect())
    }
}

fn check_len(spectrum: &Spectrum, shape: SampleShape) -> Result<()> {
    if spectrum.len() != shape.p {
        return Err(Error::DimensionMismatch {
            expected: shape.p,
            actual: spectrum.len(),
        });
    }
    Ok(())
}

/// Independent Gaussian rows with diagonal covariance `diag(spectrum)`.
///
/// Working in the eigenbasis of the true covariance loses nothing: the
/// sample spectrum is invariant under the orthogonal change of basis.
/// Draws stream 0 of `seed`.
pub fn sample_data(spectrum: &Spectrum, shape: SampleShape, seed: &SeedSpec) -> Result<DataMatrix> {
    check_len(spectrum, shape)?;
    Ok(sample_data_with(spectrum, shape, &mut seed.stream(0)))
}

/// Entries are drawn row by row from `rng`.
pub(crate) fn sample_data_with<R: Rng>(spectrum: &Spectrum, shape: SampleShape, rng: &mut R) -> DataMatrix {
    debug_assert_eq!(spectrum.len(), shape.p);
    let scale: Vec<f64> = spectrum.values().iter().map(|v| v.sqrt()).collect();
    let mut entries = Mat::<f64>::zeros(shape.n, shape.p);
    for i in 0..shape.n {
        for (j, s) in scale.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            entries[(i, j)] = s * z;
        }
    }
    DataMatrix { entries, shape }
}

/// Maximum-likelihood covariance `X^T X / n` (zero-mean model).
pub fn sample_covariance(data: &DataMatrix) -> Mat<f64> {
    let SampleShape { n, p } = data.shape;
    let x = data.entries();
    let mut cov = Mat::<f64>::zeros(p, p);
    matmul(cov.as_mut(), Accum::Replace, x.transpose(), x, 1.0 / n as f64, Par::Seq);
    symmetrize(&mut cov);
    cov
}

/// `X X^T / n`, which has the same nonzero spectrum as the covariance.
pub(crate) fn gram_matrix(data: &DataMatrix) -> Mat<f64> {
    let n = data.shape.n;
    let x = data.entries();
    let mut gram = Mat::<f64>::zeros(n, n);
    matmul(
        gram.as_mut(),
        Accum::Replace,
        x,
        x.transpose(),
        1.0 / n as f64,
        Par::Seq,
    );
    symmetrize(&mut gram);
    gram
}

fn symmetrize(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        for i in 0..j {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

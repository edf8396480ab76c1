use faer::{Mat, Side};

use super::data::{gram_matrix, sample_covariance, sample_data};
use super::{DataMatrix, SeedSpec};
use crate::error::{Error, Result};
use crate::spectra::{SampleShape, Spectrum};

/// Sample eigenvalues with their orthonormal eigenvectors.
///
/// Column `k` of `eigenvectors` belongs to `spectrum.values()[k]`.
#[derive(Debug, Clone)]
pub struct SampleEigen {
    pub spectrum: Spectrum,
    pub eigenvectors: Mat<f64>,
}

/// Simulate data with the given true spectrum and decompose its sample
/// covariance.
pub fn sample_spectrum(spectrum: &Spectrum, shape: SampleShape, seed: &SeedSpec) -> Result<SampleEigen> {
    decompose(&sample_data(spectrum, shape, seed)?)
}

/// Like [`sample_spectrum`] without the eigenvectors.
pub fn sample_eigenvalues(spectrum: &Spectrum, shape: SampleShape, seed: &SeedSpec) -> Result<Spectrum> {
    eigenvalues(&sample_data(spectrum, shape, seed)?)
}

fn descending(ascending: impl DoubleEndedIterator<Item = f64>) -> Vec<f64> {
    // PSD by construction; round-off below zero is dropped.
    ascending.rev().map(|v| v.max(0.0)).collect()
}

/// Sample covariance spectrum of `data`.
///
/// When `n < p` the `n x n` Gram matrix is decomposed instead and `p - n`
/// exact zeros are appended.
pub fn eigenvalues(data: &DataMatrix) -> Result<Spectrum> {
    let SampleShape { n, p } = data.shape();
    let mut values = if n >= p {
        let evs = sample_covariance(data)
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::EigenDecompositionFailure)?;
        descending(evs.into_iter())
    } else {
        let evs = gram_matrix(data)
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::EigenDecompositionFailure)?;
        descending(evs.into_iter())
    };
    values.resize(p, 0.0);
    Ok(Spectrum::from_sorted_unchecked(values))
}

/// Full eigendecomposition of the sample covariance of `data`.
///
/// For `n < p`, eigenvectors of the nonzero eigenvalues are lifted from the
/// Gram matrix; the null space is completed by Gram-Schmidt on the canonical
/// basis and is arbitrary within that space.
pub fn decompose(data: &DataMatrix) -> Result<SampleEigen> {
    let SampleShape { n, p } = data.shape();
    if n >= p {
        let evd = sample_covariance(data)
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::EigenDecompositionFailure)?;
        let s = evd.S().column_vector();
        let values = descending((0..p).map(|k| s[k]));
        let u = evd.U();
        let eigenvectors = Mat::from_fn(p, p, |i, k| u[(i, p - 1 - k)]);
        return Ok(SampleEigen {
            spectrum: Spectrum::from_sorted_unchecked(values),
            eigenvectors,
        });
    }

    let evd = gram_matrix(data)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenDecompositionFailure)?;
    let s = evd.S().column_vector();
    let v = evd.U();
    let mut values = descending((0..n).map(|k| s[k]));
    values.resize(p, 0.0);

    let x = data.entries();
    let top = values[0];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    for (k, &mu) in values.iter().take(n).enumerate() {
        if !(mu > top * 1e-12) {
            break;
        }
        // u = X^T v / sqrt(n mu)
        let col = n - 1 - k;
        let norm = (n as f64 * mu).sqrt();
        let u: Vec<f64> = (0..p)
            .map(|j| (0..n).map(|i| x[(i, j)] * v[(i, col)]).sum::<f64>() / norm)
            .collect();
        basis.push(u);
    }
    complete_basis(&mut basis, p);

    let eigenvectors = Mat::from_fn(p, p, |i, k| basis[k][i]);
    Ok(SampleEigen {
        spectrum: Spectrum::from_sorted_unchecked(values),
        eigenvectors,
    })
}

/// Extend orthonormal vectors to a full basis of R^p.
fn complete_basis(basis: &mut Vec<Vec<f64>>, p: usize) {
    let mut candidate = 0;
    while basis.len() < p && candidate < p {
        let mut w = vec![0.0; p];
        w[candidate] = 1.0;
        candidate += 1;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in basis.iter() {
                let dot: f64 = b.iter().zip(&w).map(|(a, c)| a * c).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= dot * bi;
                }
            }
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.5 / (p as f64).sqrt() {
            w.iter_mut().for_each(|v| *v /= norm);
            basis.push(w);
        }
    }
    assert_eq!(basis.len(), p, "canonical basis spans R^p");
}

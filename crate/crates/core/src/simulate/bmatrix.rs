use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::sample_data_with;
use super::eigen::decompose;
use super::SeedSpec;
use crate::error::{Error, Result};
use crate::spectra::{SampleShape, Spectrum};

/// Tolerance on row and column sums.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-10;

/// Expected squared coefficients of the true eigenvectors in the sample
/// eigenbasis.
///
/// Entry `(i, j)` is `E[b_ij^2]`, where `b_ij` is the `i`-th coordinate of the
/// `j`-th true unit eigenvector written in the basis of sample eigenvectors.
/// Rows index sample eigenvalues, columns index true eigenvalues; both are
/// sorted nonincreasing. The matrix is doubly stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct BMatrix {
    p: usize,
    entries: Vec<f64>,
    std_error: Option<Vec<f64>>,
    /// Monte-Carlo replicates averaged; 0 for matrices supplied directly.
    pub replicates: usize,
    pub source_spectrum: Option<Spectrum>,
    pub shape: Option<SampleShape>,
    pub root_seed: Option<u64>,
    /// Largest |row sum - 1| or |column sum - 1| seen in any single replicate.
    pub max_replicate_sum_error: f64,
}

/// Metadata persisted next to a B matrix CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BMatrixSidecar {
    pub replicates: usize,
    pub n: Option<usize>,
    pub p: usize,
    pub root_seed: Option<u64>,
    pub source_spectrum_hash: Option<String>,
}

impl BMatrix {
    /// Wrap a row-major `p x p` matrix, checking the doubly-stochastic
    /// invariants.
    pub fn from_entries(p: usize, entries: Vec<f64>) -> Result<Self> {
        if p == 0 || entries.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                actual: entries.len(),
            });
        }
        if let Some(index) = entries
            .iter()
            .position(|v| !v.is_finite() || *v < -STOCHASTIC_TOLERANCE || *v > 1.0 + STOCHASTIC_TOLERANCE)
        {
            return Err(Error::BadParams(format!(
                "B entry {} = {} outside [0, 1]",
                index, entries[index]
            )));
        }
        let b = BMatrix {
            p,
            entries,
            std_error: None,
            replicates: 0,
            source_spectrum: None,
            shape: None,
            root_seed: None,
            max_replicate_sum_error: 0.0,
        };
        let err = b.max_sum_error();
        if err > STOCHASTIC_TOLERANCE {
            return Err(Error::BadParams(format!(
                "B is not doubly stochastic (sum error {err:e})"
            )));
        }
        Ok(b)
    }

    pub fn identity(p: usize) -> Self {
        let entries = (0..p * p).map(|k| if k / p == k % p { 1.0 } else { 0.0 }).collect();
        BMatrix::from_entries(p, entries).expect("identity is doubly stochastic")
    }

    /// Every entry `1/p`.
    pub fn uniform(p: usize) -> Self {
        BMatrix::from_entries(p, vec![1.0 / p as f64; p * p]).expect("uniform is doubly stochastic")
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.p + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.p..(i + 1) * self.p]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.p).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.p];
        for i in 0..self.p {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sums
    }

    /// Largest deviation of any row or column sum from 1.
    pub fn max_sum_error(&self) -> f64 {
        self.row_sums()
            .into_iter()
            .chain(self.col_sums())
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Per-entry Monte-Carlo standard error, row-major. `None` for fewer
    /// than two replicates.
    pub fn std_error(&self) -> Option<&[f64]> {
        self.std_error.as_deref()
    }

    pub fn max_std_error(&self) -> Option<f64> {
        self.std_error().map(|se| se.iter().copied().fold(0.0, f64::max))
    }

    pub fn mean_std_error(&self) -> Option<f64> {
        self.std_error().map(|se| se.iter().sum::<f64>() / se.len() as f64)
    }

    pub fn sidecar(&self) -> BMatrixSidecar {
        BMatrixSidecar {
            replicates: self.replicates,
            n: self.shape.map(|s| s.n),
            p: self.p,
            root_seed: self.root_seed,
            source_spectrum_hash: self.source_spectrum.as_ref().map(Spectrum::content_hash),
        }
    }
}

/// Squared eigenvector coordinates for one simulated data set, row-major in
/// `(sample index, true index)`, plus that replicate's worst sum error.
fn replicate_squares(nu: &Spectrum, shape: SampleShape, seed: &SeedSpec, index: usize) -> Result<(Vec<f64>, f64)> {
    let p = shape.p;
    let data = sample_data_with(nu, shape, &mut seed.stream(index as u64));
    let eig = decompose(&data)?;
    let u = eig.eigenvectors;
    // The j-th true eigenvector is e_j, so b_ij = (U^T e_j)_i = U_ji.
    let mut squares = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let v = u[(j, i)];
            squares[i * p + j] = v * v;
        }
    }
    let mut worst = 0.0f64;
    let mut col = vec![0.0; p];
    for i in 0..p {
        let row = &squares[i * p..(i + 1) * p];
        worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        for (c, v) in col.iter_mut().zip(row) {
            *c += v;
        }
    }
    worst = col.iter().map(|c| (c - 1.0).abs()).fold(worst, f64::max);
    Ok((squares, worst))
}

/// Monte-Carlo estimate of `B(nu)`.
///
/// Replicate `k` uses stream `k` of `seed`. Replicates are simulated in
/// parallel and folded in index order, so the result does not depend on the
/// thread count.
pub fn estimate_b_matrix(nu: &Spectrum, shape: SampleShape, replicates: usize, seed: &SeedSpec) -> Result<BMatrix> {
    if replicates == 0 {
        return Err(Error::BadParams("replicates must be at least 1".into()));
    }
    if nu.len() != shape.p {
        return Err(Error::DimensionMismatch {
            expected: shape.p,
            actual: nu.len(),
        });
    }
    let p = shape.p;
    let mut mean = vec![0.0; p * p];
    let mut m2 = vec![0.0; p * p];
    let mut worst = 0.0f64;
    let batch = 2 * rayon::current_num_threads().max(1);
    let mut done = 0usize;
    while done < replicates {
        let end = (done + batch).min(replicates);
        let results: Vec<Result<(Vec<f64>, f64)>> = (done..end)
            .into_par_iter()
            .map(|k| replicate_squares(nu, shape, seed, k))
            .collect();
        for result in results {
            let (squares, err) = result?;
            done += 1;
            worst = worst.max(err);
            // Welford update, always in replicate order.
            let count = done as f64;
            for ((m, s), x) in mean.iter_mut().zip(m2.iter_mut()).zip(&squares) {
                let delta = x - *m;
                *m += delta / count;
                *s += delta * (x - *m);
            }
        }
    }
    let std_error = (replicates > 1).then(|| {
        let r = replicates as f64;
        m2.iter().map(|s| (s / (r - 1.0) / r).sqrt()).collect()
    });
    Ok(BMatrix {
        p,
        entries: mean,
        std_error,
        replicates,
        source_spectrum: Some(nu.clone()),
        shape: Some(shape),
        root_seed: Some(seed.root_seed),
        max_replicate_sum_error: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_replicate_is_doubly_stochastic() {
        let nu = spectrum(&[4.0, 3.0, 2.0, 1.0, 0.5, 0.2]);
        let b = estimate_b_matrix(&nu, SampleShape::new(15, 6).unwrap(), 1, &SeedSpec::new(1)).unwrap();
        assert!(b.max_sum_error() < 1e-12);
        assert!(b.max_replicate_sum_error < 1e-12);
        assert!(b.std_error().is_none());
        assert!(b.entries().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn defective_replicates_stay_stochastic() {
        let nu = spectrum(&[1.0; 10]);
        let b = estimate_b_matrix(&nu, SampleShape::new(4, 10).unwrap(), 3, &SeedSpec::new(3)).unwrap();
        assert!(b.max_sum_error() < STOCHASTIC_TOLERANCE);
        assert!(b.max_replicate_sum_error < STOCHASTIC_TOLERANCE);
    }

    #[test]
    fn large_n_is_near_identity() {
        let nu = spectrum(&[16.0, 8.0, 4.0, 2.0, 1.0]);
        let b = estimate_b_matrix(&nu, SampleShape::new(50_000, 5).unwrap(), 20, &SeedSpec::new(5)).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((b.get(i, j) - target).abs() < 0.05, "B[{i},{j}] = {}", b.get(i, j));
            }
        }
    }

    #[test]
    fn isotropic_truth_is_uniform() {
        // Haar-distributed eigenvectors: E[U_ji^2] = 1/p with variance
        // 2(p-1)/(p^2 (p+2)) per replicate.
        let p = 8;
        let replicates = 400;
        let nu = spectrum(&[1.0; 8]);
        let b = estimate_b_matrix(&nu, SampleShape::new(20, p).unwrap(), replicates, &SeedSpec::new(6)).unwrap();
        let pf = p as f64;
        let sd = (2.0 * (pf - 1.0) / (pf * pf * (pf + 2.0)) / replicates as f64).sqrt();
        for &v in b.entries() {
            assert!((v - 1.0 / pf).abs() < 5.0 * sd, "{v}");
        }
    }

    #[test]
    fn standard_error_shrinks_with_replicates() {
        let nu = spectrum(&[3.0, 2.5, 2.0, 1.5, 1.0, 0.5]);
        let shape = SampleShape::new(12, 6).unwrap();
        let se: Vec<f64> = [10, 40, 160]
            .iter()
            .map(|&r| {
                estimate_b_matrix(&nu, shape, r, &SeedSpec::new(7))
                    .unwrap()
                    .mean_std_error()
                    .unwrap()
            })
            .collect();
        for w in se.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.5..2.7).contains(&ratio), "ratio {ratio} from {se:?}");
        }
    }

    #[test]
    fn constructors_and_validation() {
        assert_eq!(BMatrix::identity(3).get(1, 1), 1.0);
        assert_eq!(BMatrix::uniform(4).get(2, 3), 0.25);
        assert!(BMatrix::from_entries(2, vec![0.5, 0.5, 0.5]).is_err());
        assert!(BMatrix::from_entries(2, vec![1.0, 0.5, 0.0, 0.5]).is_err());
        assert!(BMatrix::from_entries(2, vec![1.5, -0.5, -0.5, 1.5]).is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        let nu = spectrum(&[1.0, 1.0]);
        assert!(estimate_b_matrix(&nu, SampleShape::new(5, 2).unwrap(), 0, &SeedSpec::new(0)).is_err());
        assert!(matches!(
            estimate_b_matrix(&nu, SampleShape::new(5, 3).unwrap(), 1, &SeedSpec::new(0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sidecar_records_provenance() {
        let nu = spectrum(&[2.0, 1.0]);
        let b = estimate_b_matrix(&nu, SampleShape::new(9, 2).unwrap(), 2, &SeedSpec::new(77)).unwrap();
        let side = b.sidecar();
        assert_eq!(
            (side.replicates, side.n, side.p, side.root_seed),
            (2, Some(9), 2, Some(77))
        );
        assert_eq!(side.source_spectrum_hash.unwrap(), nu.content_hash());
    }
}

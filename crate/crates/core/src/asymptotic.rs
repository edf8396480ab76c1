//! Closed-form correction of sample eigenvalues.
//!
//! To first order in `1/n` the bias of the `i`-th sample eigenvalue is
//!
//! ```text
//! lambda_hat_i - lambda_i ~ -(lambda_i / n) * S_i,
//! S_i = sum_{j != i} lambda_hat_j / (lambda_hat_j - lambda_hat_i)
//! ```
//!
//! and solving for `lambda_i` gives `lambda_hat_i / (1 - S_i / n)`. The top of
//! the spectrum is pulled down and the bottom pushed up. The variant with the
//! opposite sign in front of the sum is kept as [`BiasSign::Expanding`] for
//! comparison.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::flat_spectrum_check;
use crate::error::{Error, Result};
use crate::report::{Method, RecoveryReport, Warning};
use crate::spectra::{project_to_valid, SampleShape, Spectrum};

/// Denominators `1 -/+ S_i / n` at or below this value are clamped to it.
pub const DENOMINATOR_FLOOR: f64 = 0.05;

/// Sign in front of the correction sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasSign {
    /// `lambda_hat = lambda (1 - S/n)`: the sample spectrum is more spread
    /// out than the truth, so the correction contracts it.
    #[default]
    Contracting,
    /// `lambda_hat = lambda (1 + S/n)`: the correction spreads the sample
    /// spectrum further.
    Expanding,
}

impl BiasSign {
    fn factor(self) -> f64 {
        match self {
            BiasSign::Contracting => -1.0,
            BiasSign::Expanding => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticOptions {
    /// Pairs with `|lambda_hat_j - lambda_hat_i| < guard * lambda_hat_1` are
    /// degenerate.
    pub denominator_guard: f64,
    /// Number of nearest neighbours (by value) left out of each sum in
    /// addition to `j = i`. Capped at a quarter of the other entries, so
    /// short spectra use the full sum.
    pub neighbor_exclusion: usize,
    /// Floor applied when projecting the result.
    pub clamp_floor: f64,
    pub sign: BiasSign,
}

impl Default for AsymptoticOptions {
    fn default() -> Self {
        AsymptoticOptions {
            denominator_guard: 1e-8,
            neighbor_exclusion: 3,
            clamp_floor: 0.0,
            sign: BiasSign::Contracting,
        }
    }
}

impl AsymptoticOptions {
    /// The literal discrete sum: no neighbour exclusion.
    pub fn literal() -> Self {
        AsymptoticOptions {
            neighbor_exclusion: 0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.denominator_guard > 0.0) {
            return Err(Error::BadParams(format!(
                "denominator_guard must be positive, got {}",
                self.denominator_guard
            )));
        }
        if !(self.clamp_floor >= 0.0) {
            return Err(Error::BadParams(format!(
                "clamp_floor must be nonnegative, got {}",
                self.clamp_floor
            )));
        }
        Ok(())
    }
}

/// Per-index correction sums `S_i`.
struct CorrectionSums {
    sums: Vec<f64>,
    skipped_pairs: usize,
}

/// Indices of the `k` entries closest in value to `i` (excluding `i`) in a
/// sorted slice.
fn nearest_neighbors(values: &[f64], i: usize, k: usize, out: &mut Vec<usize>) {
    out.clear();
    let (mut left, mut right) = (i, i + 1);
    while out.len() < k {
        let gap_left = (left > 0).then(|| (values[left - 1] - values[i]).abs());
        let gap_right = (right < values.len()).then(|| (values[right] - values[i]).abs());
        match (gap_left, gap_right) {
            (Some(l), Some(r)) if l <= r => {
                left -= 1;
                out.push(left);
            }
            (Some(_), None) => {
                left -= 1;
                out.push(left);
            }
            (_, Some(_)) => {
                out.push(right);
                right += 1;
            }
            (None, None) => break,
        }
    }
}

fn correction_sums(lambda_hat: &Spectrum, opts: &AsymptoticOptions) -> Result<CorrectionSums> {
    let values = lambda_hat.values();
    let p = values.len();
    let k = opts.neighbor_exclusion.min(p.saturating_sub(1) / 4);
    let guard = opts.denominator_guard * lambda_hat.largest();
    let mut sums = Vec::with_capacity(p);
    let mut skipped_pairs = 0;
    let mut excluded = Vec::with_capacity(k);
    for i in 0..p {
        nearest_neighbors(values, i, k, &mut excluded);
        let mut s = 0.0;
        for j in 0..p {
            if j == i || excluded.contains(&j) || values[j] == 0.0 {
                continue;
            }
            let gap = values[j] - values[i];
            if gap.abs() < guard {
                if k == 0 {
                    return Err(Error::DegenerateDenominator { i, j });
                }
                skipped_pairs += 1;
                continue;
            }
            s += values[j] / gap;
        }
        sums.push(s);
    }
    Ok(CorrectionSums { sums, skipped_pairs })
}

/// Forward model: estimated bias `lambda_hat_i - lambda_i` of each sample
/// eigenvalue, with the sums built from the sample spectrum.
pub fn bias_estimate(lambda: &Spectrum, lambda_hat: &Spectrum, shape: SampleShape) -> Result<Vec<f64>> {
    bias_estimate_with(lambda, lambda_hat, shape, &AsymptoticOptions::literal())
}

pub fn bias_estimate_with(
    lambda: &Spectrum,
    lambda_hat: &Spectrum,
    shape: SampleShape,
    opts: &AsymptoticOptions,
) -> Result<Vec<f64>> {
    opts.validate()?;
    if lambda.len() != lambda_hat.len() {
        return Err(Error::LengthMismatch {
            expected: lambda_hat.len(),
            actual: lambda.len(),
        });
    }
    let n = shape.n as f64;
    let sign = opts.sign.factor();
    let sums = correction_sums(lambda_hat, opts)?;
    Ok(lambda
        .values()
        .iter()
        .zip(&sums.sums)
        .map(|(l, s)| sign * l / n * s)
        .collect())
}

/// Diagnostics of one asymptotic correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticDiagnostics {
    /// Indices whose denominator was at or below [`DENOMINATOR_FLOOR`].
    pub clamped_indices: Vec<usize>,
    /// Unclamped denominators `1 -/+ S_i / n`.
    pub denominators: Vec<f64>,
    /// Entries raised to `clamp_floor` by the final projection.
    pub projection_clamped: usize,
    pub skipped_pairs: usize,
    pub options: AsymptoticOptions,
}

/// Correct a sample spectrum with the closed-form inverse of the bias model.
pub fn correct_spectrum(lambda_hat: &Spectrum, shape: SampleShape, opts: &AsymptoticOptions) -> Result<RecoveryReport> {
    let start = Instant::now();
    opts.validate()?;
    if lambda_hat.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if lambda_hat.len() != shape.p {
        return Err(Error::DimensionMismatch {
            expected: shape.p,
            actual: lambda_hat.len(),
        });
    }
    let n = shape.n as f64;
    let sign = opts.sign.factor();
    let sums = correction_sums(lambda_hat, opts)?;

    let mut clamped_indices = Vec::new();
    let denominators: Vec<f64> = sums.sums.iter().map(|s| 1.0 + sign * s / n).collect();
    let corrected: Vec<f64> = lambda_hat
        .values()
        .iter()
        .zip(&denominators)
        .enumerate()
        .map(|(i, (&l, &d))| {
            if d <= DENOMINATOR_FLOOR {
                clamped_indices.push(i);
                l / DENOMINATOR_FLOOR
            } else {
                l / d
            }
        })
        .collect();
    let projection = project_to_valid(&corrected, opts.clamp_floor);

    let mut warnings = Vec::new();
    if let Some(w) = flat_spectrum_check(lambda_hat, shape) {
        warnings.push(w);
    }
    if !clamped_indices.is_empty() {
        warnings.push(Warning::DenominatorClamped {
            indices: clamped_indices.clone(),
            floor: DENOMINATOR_FLOOR,
        });
    }
    let zeros: Vec<usize> = (0..lambda_hat.len())
        .filter(|&i| lambda_hat.values()[i] == 0.0)
        .collect();
    if !zeros.is_empty() {
        warnings.push(Warning::ZeroSampleEigenvalues { indices: zeros });
    }
    if sums.skipped_pairs > 0 {
        warnings.push(Warning::DegeneratePairsSkipped {
            count: sums.skipped_pairs,
        });
    }
    if projection.clamped > 0 {
        warnings.push(Warning::ProjectionClamped {
            count: projection.clamped,
            iteration: None,
        });
    }

    Ok(RecoveryReport {
        method: Method::Asymptotic,
        input_hash: lambda_hat.content_hash(),
        shape,
        recovered: projection.spectrum,
        truth: None,
        error: None,
        warnings,
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
        config: serde_json::to_value(opts).expect("options serialize"),
        asymptotic: Some(AsymptoticDiagnostics {
            clamped_indices,
            denominators,
            projection_clamped: projection.clamped,
            skipped_pairs: sums.skipped_pairs,
            options: opts.clone(),
        }),
        fixed_point: None,
        scaling: None,
    })
}

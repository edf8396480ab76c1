//! Input checks shared by the recovery methods.

use crate::report::Warning;
use crate::simulate::{ks_statistic, MarchenkoPastur};
use crate::spectra::{SampleShape, Spectrum};

/// Relative range below which a sample spectrum is called flat outright.
pub const FLAT_RELATIVE_RANGE: f64 = 0.1;

/// A sample spectrum whose KS distance to the Marchenko-Pastur law is below
/// `FLAT_KS_SCALE / m` (for `m` nonzero eigenvalues) is indistinguishable
/// from pure isotropic noise.
pub const FLAT_KS_SCALE: f64 = 3.5;

/// Below this many nonzero eigenvalues the KS comparison is skipped: convex
/// spectra of a few dozen entries are not reliably told apart from noise.
pub const MIN_KS_EIGENVALUES: usize = 50;

/// KS distance between the nonzero part of a sample spectrum, normalized to
/// unit mean, and the Marchenko-Pastur law of the matching ratio.
pub fn mp_ks_distance(lambda_hat: &Spectrum, shape: SampleShape) -> Option<f64> {
    let m = shape.n.min(shape.p).min(lambda_hat.len());
    let nonzero = &lambda_hat.values()[..m];
    let mean = nonzero.iter().sum::<f64>() / m as f64;
    if !(mean > 0.0) {
        return None;
    }
    let ratio = shape.n.min(shape.p) as f64 / shape.n.max(shape.p) as f64;
    let mp = MarchenkoPastur::new(ratio).ok()?;
    let scaled: Vec<f64> = nonzero.iter().map(|v| v / mean).collect();
    Some(ks_statistic(&scaled, |x| mp.cdf(x)))
}

/// Flag sample spectra that are consistent with a flat true spectrum.
///
/// Fires when the relative range is below [`FLAT_RELATIVE_RANGE`], or when
/// the spectrum matches the Marchenko-Pastur law of an isotropic truth (in
/// the `n ~ p` regime a flat truth produces a widely spread sample spectrum,
/// so the range alone misses it).
pub fn flat_spectrum_check(lambda_hat: &Spectrum, shape: SampleShape) -> Option<Warning> {
    let relative_range = lambda_hat.relative_range();
    let m = shape.n.min(shape.p);
    let ks = (m >= MIN_KS_EIGENVALUES)
        .then(|| mp_ks_distance(lambda_hat, shape))
        .flatten();
    let flat_by_range = relative_range < FLAT_RELATIVE_RANGE;
    let flat_by_mp = ks.is_some_and(|d| d < FLAT_KS_SCALE / m as f64);
    (flat_by_range || flat_by_mp).then_some(Warning::FlatSpectrum {
        relative_range,
        mp_ks_distance: ks,
    })
}

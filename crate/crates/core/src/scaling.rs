//! Recovery on a reduced problem.
//!
//! A sample spectrum of dimension `p` is resampled to `q = ceil(p / f)`
//! eigenvalues with the same empirical quantile function, recovered at shape
//! `(round(n / f), q)` so the ratio `n / p` is kept, then interpolated back
//! to length `p`. The cost of each B estimate drops by roughly `f^3`.
//!
//! The coarse grid cannot resolve the few largest eigenvalues, so the top
//! `top_preserve` entries of the result are replaced by the asymptotic
//! correction of the full-size sample spectrum. The report lists them as
//! adjusted.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymptotic::{correct_spectrum, AsymptoticOptions};
use crate::error::{Error, Result};
use crate::fixedpoint::{iterate, FixedPointConfig, Init};
use crate::report::{Method, RecoveryReport, Warning};
use crate::spectra::{project_to_valid, SampleShape, Spectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    pub factor: usize,
    /// Largest eigenvalues recomputed on the full-size spectrum after
    /// upscaling.
    pub top_preserve: usize,
    pub inner: FixedPointConfig,
    /// Options for the top adjustment.
    pub top_adjust: AsymptoticOptions,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig {
            factor: 5,
            top_preserve: 5,
            inner: FixedPointConfig::default(),
            top_adjust: AsymptoticOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingDiagnostics {
    pub factor: usize,
    pub reduced_shape: SampleShape,
    pub top_adjusted_indices: Vec<usize>,
    /// Top entries of the upscaled recovery before adjustment.
    pub raw_top: Vec<f64>,
    pub adjusted_top: Vec<f64>,
}

/// Length of the reduced spectrum.
pub fn reduced_len(p: usize, factor: usize) -> usize {
    p.div_ceil(factor)
}

/// Linear interpolation of `values` at fractional index `pos`, clamped to
/// the end points.
fn interpolate(values: &[f64], pos: f64) -> f64 {
    let last = values.len() - 1;
    if pos <= 0.0 {
        return values[0];
    }
    if pos >= last as f64 {
        return values[last];
    }
    let lo = pos.floor() as usize;
    let t = pos - lo as f64;
    values[lo] + t * (values[lo + 1] - values[lo])
}

/// Resample `values` (sorted) to `len` entries at the midpoint quantiles
/// `(m + 1/2) / len`.
fn resample(values: &[f64], len: usize) -> Vec<f64> {
    let scale = values.len() as f64 / len as f64;
    (0..len)
        .map(|m| interpolate(values, (m as f64 + 0.5) * scale - 0.5))
        .collect()
}

/// Spectrum of length `ceil(p / factor)` with the same empirical quantiles.
pub fn downscale_spectrum(lambda_hat: &Spectrum, factor: usize) -> Result<Spectrum> {
    let p = lambda_hat.len();
    if factor == 0 || p < factor {
        return Err(Error::BadFactor { factor, p });
    }
    if factor == 1 {
        return Ok(lambda_hat.clone());
    }
    // Interpolating a nonincreasing sequence keeps it nonincreasing.
    Ok(Spectrum::from_sorted_unchecked(resample(
        lambda_hat.values(),
        reduced_len(p, factor),
    )))
}

/// Interpolate `small` back to length `p`, optionally overwriting the
/// largest entries with `top_adjust`.
pub fn upscale_spectrum(small: &Spectrum, p: usize, top_adjust: Option<&[f64]>) -> Result<Spectrum> {
    if small.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if small.len() > p {
        return Err(Error::BadDimensions(format!(
            "cannot upscale a spectrum of length {} to {p}",
            small.len()
        )));
    }
    let mut values = if small.len() == p {
        small.values().to_vec()
    } else {
        resample(small.values(), p)
    };
    match top_adjust {
        None => Ok(Spectrum::from_sorted_unchecked(values)),
        Some(top) => {
            if top.len() > p {
                return Err(Error::BadDimensions(format!(
                    "{} adjusted entries for a spectrum of length {p}",
                    top.len()
                )));
            }
            values[..top.len()].copy_from_slice(top);
            Ok(project_to_valid(&values, 0.0).spectrum)
        }
    }
}

fn validate(lambda_hat: &Spectrum, shape: SampleShape, cfg: &ScaleConfig) -> Result<()> {
    let p = lambda_hat.len();
    if shape.p != p {
        return Err(Error::DimensionMismatch {
            expected: shape.p,
            actual: p,
        });
    }
    if cfg.factor == 0 || shape.n < cfg.factor || p < cfg.factor {
        return Err(Error::BadFactor { factor: cfg.factor, p });
    }
    if cfg.factor > 1 && cfg.top_preserve >= reduced_len(p, cfg.factor) {
        return Err(Error::BadParams(format!(
            "top_preserve = {} must be below the reduced dimension {}",
            cfg.top_preserve,
            reduced_len(p, cfg.factor)
        )));
    }
    Ok(())
}

/// Fixed-point recovery on the downscaled problem, upscaled back.
///
/// With `factor == 1` this is exactly [`iterate`] with `cfg.inner`, apart
/// from the method tag and scaling diagnostics.
pub fn recover_scaled(lambda_hat: &Spectrum, shape: SampleShape, cfg: &ScaleConfig) -> Result<RecoveryReport> {
    let start = Instant::now();
    validate(lambda_hat, shape, cfg)?;
    let p = shape.p;
    let config = serde_json::to_value(cfg).expect("config serializes");

    if cfg.factor == 1 {
        let mut report = iterate(lambda_hat, shape, &cfg.inner)?;
        report.method = Method::Scaled;
        report.config = config;
        report.scaling = Some(ScalingDiagnostics {
            factor: 1,
            reduced_shape: shape,
            top_adjusted_indices: Vec::new(),
            raw_top: Vec::new(),
            adjusted_top: Vec::new(),
        });
        report.timing_ms = start.elapsed().as_secs_f64() * 1e3;
        return Ok(report);
    }

    let small = downscale_spectrum(lambda_hat, cfg.factor)?;
    let reduced_n = ((shape.n as f64 / cfg.factor as f64).round() as usize).max(1);
    let reduced_shape = SampleShape::new(reduced_n, small.len())?;
    let mut inner_cfg = cfg.inner.clone();
    if let Init::User(init) = &inner_cfg.init {
        inner_cfg.init = Init::User(downscale_spectrum(init, cfg.factor)?);
    }
    let inner = iterate(&small, reduced_shape, &inner_cfg)?;

    let upscaled = upscale_spectrum(&inner.recovered, p, None)?;
    let k = cfg.top_preserve;
    let raw_top = upscaled.values()[..k].to_vec();
    let corrected = correct_spectrum(lambda_hat, shape, &cfg.top_adjust)?;
    let adjusted_top = corrected.recovered.values()[..k].to_vec();
    let recovered = upscale_spectrum(&inner.recovered, p, Some(&adjusted_top))?;

    let mut warnings = inner.warnings;
    let top_adjusted_indices: Vec<usize> = (0..k).collect();
    if k > 0 {
        warnings.push(Warning::TopEigenvaluesAdjusted {
            indices: top_adjusted_indices.clone(),
        });
    }

    Ok(RecoveryReport {
        method: Method::Scaled,
        input_hash: lambda_hat.content_hash(),
        shape,
        recovered,
        truth: None,
        error: None,
        warnings,
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
        config,
        asymptotic: None,
        fixed_point: inner.fixed_point,
        scaling: Some(ScalingDiagnostics {
            factor: cfg.factor,
            reduced_shape,
            top_adjusted_indices,
            raw_top,
            adjusted_top,
        }),
    })
}

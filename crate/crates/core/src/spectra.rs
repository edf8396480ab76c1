//! Spectrum types, synthetic spectrum families and error metrics.
//!
//! A [`Spectrum`] is always sorted nonincreasing and nonnegative. Anything
//! that can produce stray negative or unordered values (the asymptotic
//! correction, iterates of the fixed-point map) goes through
//! [`project_to_valid`] before it becomes a `Spectrum`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Inputs this close below zero are treated as exact zeros.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// Default cut between relative and absolute error.
pub const DEFAULT_ERROR_THRESHOLD: f64 = 0.2;

/// Eigenvalues of a covariance matrix, sorted nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Spectrum(Vec<f64>);

impl Spectrum {
    /// Validate and sort raw eigenvalues.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_spectrum(values)
    }

    /// Wrap values that are already known to be valid and sorted.
    pub(crate) fn from_sorted_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.windows(2).all(|w| w[0] >= w[1]));
        Spectrum(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn largest(&self) -> f64 {
        self.0[0]
    }

    pub fn smallest(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Multiply every eigenvalue by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Spectrum::new(self.0.iter().map(|v| v * c).collect())
    }

    /// `(largest - smallest) / largest`, 0 for an all-zero spectrum.
    pub fn relative_range(&self) -> f64 {
        let top = self.largest();
        if top > 0.0 {
            (top - self.smallest()) / top
        } else {
            0.0
        }
    }

    /// SHA-256 over the little-endian bytes of the values, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for v in &self.0 {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

impl TryFrom<Vec<f64>> for Spectrum {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        validate_spectrum(values)
    }
}

impl From<Spectrum> for Vec<f64> {
    fn from(s: Spectrum) -> Self {
        s.0
    }
}

impl AsRef<[f64]> for Spectrum {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Number of samples and dimension of a data set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleShape {
    pub n: usize,
    pub p: usize,
}

impl SampleShape {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::BadDimensions(format!("n and p must be positive (n={n}, p={p})")));
        }
        Ok(SampleShape { n, p })
    }

    /// `p / n`.
    pub fn ratio(&self) -> f64 {
        self.p as f64 / self.n as f64
    }
}

impl fmt::Display for SampleShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={}, p={}", self.n, self.p)
    }
}

fn sort_descending(values: &mut [f64]) {
    // Stable: ties keep their original order.
    values.sort_by(|a, b| b.total_cmp(a));
}

/// Check finiteness and sign, then sort nonincreasing.
pub fn validate_spectrum(mut values: Vec<f64>) -> Result<Spectrum> {
    if values.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    for (index, v) in values.iter_mut().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if *v < 0.0 {
            if *v < -NEGATIVE_TOLERANCE {
                return Err(Error::NegativeEigenvalue { index, value: *v });
            }
            *v = 0.0;
        }
    }
    sort_descending(&mut values);
    Ok(Spectrum(values))
}

/// Result of [`project_to_valid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub spectrum: Spectrum,
    /// How many entries were raised to the floor.
    pub clamped: usize,
}

/// Clamp every entry to `floor` from below and sort nonincreasing.
///
/// Non-finite entries are replaced by the floor and counted as clamped.
/// Panics if `values` is empty or `floor` is negative.
pub fn project_to_valid(values: &[f64], floor: f64) -> Projection {
    assert!(!values.is_empty(), "cannot project an empty vector");
    assert!(floor >= 0.0, "floor must be nonnegative");
    let mut clamped = 0;
    let mut out: Vec<f64> = values
        .iter()
        .map(|&v| {
            if v.is_finite() && v >= floor {
                v
            } else {
                clamped += 1;
                floor
            }
        })
        .collect();
    sort_descending(&mut out);
    Projection {
        spectrum: Spectrum(out),
        clamped,
    }
}

/// Synthetic spectrum families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    /// Straight line from `high` down to `low`.
    Linear,
    /// `high` to `mid` over the first `n_break` entries, then `mid` to `low`.
    TwoSegment,
    /// `n_high` entries at `high`, the rest at `low`.
    Step,
    /// Constant `level`.
    Flat,
    /// `a * i^(-gamma) + b` for 1-based index `i`.
    ConvexPower,
    /// `k` factor eigenvalues at `c * p` above a bulk at `noise`.
    SectorModel,
}

impl SpectrumKind {
    pub const ALL: [SpectrumKind; 6] = [
        SpectrumKind::Linear,
        SpectrumKind::TwoSegment,
        SpectrumKind::Step,
        SpectrumKind::Flat,
        SpectrumKind::ConvexPower,
        SpectrumKind::SectorModel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpectrumKind::Linear => "linear",
            SpectrumKind::TwoSegment => "two_segment",
            SpectrumKind::Step => "step",
            SpectrumKind::Flat => "flat",
            SpectrumKind::ConvexPower => "convex_power",
            SpectrumKind::SectorModel => "sector_model",
        }
    }

    /// Accepted parameter names and their defaults.
    pub fn defaults(self, p: usize) -> Vec<(&'static str, f64)> {
        match self {
            SpectrumKind::Linear => vec![("high", 10.0), ("low", 1.0)],
            SpectrumKind::TwoSegment => vec![
                ("high", 10.0),
                ("mid", 3.0),
                ("low", 1.0),
                ("n_break", (p / 5).max(1) as f64),
            ],
            SpectrumKind::Step => vec![("high", 10.0), ("low", 1.0), ("n_high", 1.0)],
            SpectrumKind::Flat => vec![("level", 1.0)],
            SpectrumKind::ConvexPower => vec![
                ("a", CONVEX_POWER_FLOOR * (CONVEX_POWER_TOP_RATIO - 1.0)),
                ("gamma", 0.5),
                ("b", CONVEX_POWER_FLOOR),
            ],
            SpectrumKind::SectorModel => vec![("k", 2.0), ("c", 0.5), ("noise", 1.0)],
        }
    }
}

/// Floor of the default convex power spectrum.
const CONVEX_POWER_FLOOR: f64 = 0.3;
/// Default ratio of the top eigenvalue to the floor, `(a + b) / b`.
const CONVEX_POWER_TOP_RATIO: f64 = 30.0;

impl fmt::Display for SpectrumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpectrumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        SpectrumKind::ALL.into_iter().find(|k| k.name() == norm).ok_or_else(|| {
            let names: Vec<_> = SpectrumKind::ALL.iter().map(|k| k.name()).collect();
            Error::BadParams(format!(
                "unknown spectrum kind `{s}`; valid kinds: {}",
                names.join(", ")
            ))
        })
    }
}

/// Named generator parameters; missing names fall back to defaults.
pub type GeneratorParams = BTreeMap<String, f64>;

fn resolve_params(kind: SpectrumKind, p: usize, params: &GeneratorParams) -> Result<BTreeMap<&'static str, f64>> {
    let mut resolved: BTreeMap<&'static str, f64> = kind.defaults(p).into_iter().collect();
    for (key, &value) in params {
        let slot = resolved.get_mut(key.as_str()).ok_or_else(|| {
            let names: Vec<_> = kind.defaults(p).into_iter().map(|(k, _)| k).collect();
            Error::BadParams(format!(
                "parameter `{key}` not accepted by {kind}; expected one of: {}",
                names.join(", ")
            ))
        })?;
        if !value.is_finite() {
            return Err(Error::BadParams(format!("parameter `{key}` is not finite")));
        }
        *slot = value;
    }
    Ok(resolved)
}

fn count_param(name: &str, value: f64, max: usize) -> Result<usize> {
    if value < 0.0 || value.fract() != 0.0 || value > max as f64 {
        return Err(Error::BadParams(format!(
            "`{name}` must be an integer in [0, {max}], got {value}"
        )));
    }
    Ok(value as usize)
}

fn nonneg(name: &str, value: f64) -> Result<f64> {
    if value < 0.0 {
        return Err(Error::BadParams(format!("`{name}` must be nonnegative, got {value}")));
    }
    Ok(value)
}

fn ordered(hi_name: &str, hi: f64, lo_name: &str, lo: f64) -> Result<()> {
    if hi < lo {
        return Err(Error::BadParams(format!(
            "`{hi_name}` ({hi}) must be >= `{lo_name}` ({lo})"
        )));
    }
    Ok(())
}

/// Evaluate one of the synthetic spectrum families at dimension `p`.
pub fn generate_spectrum(kind: SpectrumKind, p: usize, params: &GeneratorParams) -> Result<Spectrum> {
    if p == 0 {
        return Err(Error::BadParams("p must be at least 1".into()));
    }
    let prm = resolve_params(kind, p, params)?;
    let get = |k: &str| prm[k];
    let values: Vec<f64> = match kind {
        SpectrumKind::Linear => {
            let (high, low) = (nonneg("high", get("high"))?, nonneg("low", get("low"))?);
            ordered("high", high, "low", low)?;
            let denom = (p.max(2) - 1) as f64;
            (0..p).map(|i| high - (high - low) * i as f64 / denom).collect()
        }
        SpectrumKind::TwoSegment => {
            let high = nonneg("high", get("high"))?;
            let mid = nonneg("mid", get("mid"))?;
            let low = nonneg("low", get("low"))?;
            ordered("high", high, "mid", mid)?;
            ordered("mid", mid, "low", low)?;
            let brk = count_param("n_break", get("n_break"), p)?;
            (0..p)
                .map(|i| {
                    if i < brk {
                        high - (high - mid) * i as f64 / brk as f64
                    } else if p - 1 > brk {
                        mid - (mid - low) * (i - brk) as f64 / (p - 1 - brk) as f64
                    } else {
                        mid
                    }
                })
                .collect()
        }
        SpectrumKind::Step => {
            let (high, low) = (nonneg("high", get("high"))?, nonneg("low", get("low"))?);
            ordered("high", high, "low", low)?;
            let n_high = count_param("n_high", get("n_high"), p)?;
            (0..p).map(|i| if i < n_high { high } else { low }).collect()
        }
        SpectrumKind::Flat => vec![nonneg("level", get("level"))?; p],
        SpectrumKind::ConvexPower => {
            let a = nonneg("a", get("a"))?;
            let gamma = nonneg("gamma", get("gamma"))?;
            let b = nonneg("b", get("b"))?;
            (1..=p).map(|i| a * (i as f64).powf(-gamma) + b).collect()
        }
        SpectrumKind::SectorModel => {
            let k = count_param("k", get("k"), p)?;
            let c = nonneg("c", get("c"))?;
            let noise = nonneg("noise", get("noise"))?;
            let factor = c * p as f64;
            ordered("c * p", factor, "noise", noise)?;
            (0..p).map(|i| if i < k { factor } else { noise }).collect()
        }
    };
    validate_spectrum(values)
}

/// Whether an index was scored relatively or absolutely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexError {
    pub index: usize,
    pub kind: ErrorKind,
    pub value: f64,
}

/// Max relative error over eigenvalues above the threshold and max absolute
/// error over the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub max_relative_error: f64,
    pub max_absolute_error_small: f64,
    pub threshold: f64,
    pub per_index_errors: Vec<IndexError>,
}

/// Compare an estimate against the true spectrum.
///
/// Indices whose true value exceeds `threshold` contribute
/// `|truth - estimate| / truth`; the others contribute `|truth - estimate|`.
pub fn error_metrics(truth: &Spectrum, estimate: &Spectrum, threshold: f64) -> Result<ErrorReport> {
    if truth.len() != estimate.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: estimate.len(),
        });
    }
    if !(threshold > 0.0) {
        return Err(Error::BadParams(format!("threshold must be positive, got {threshold}")));
    }
    let mut max_rel = 0.0f64;
    let mut max_abs = 0.0f64;
    let per_index_errors = truth
        .values()
        .iter()
        .zip(estimate.values())
        .enumerate()
        .map(|(index, (&t, &e))| {
            let diff = (t - e).abs();
            if t > threshold {
                let value = diff / t;
                max_rel = max_rel.max(value);
                IndexError {
                    index,
                    kind: ErrorKind::Relative,
                    value,
                }
            } else {
                max_abs = max_abs.max(diff);
                IndexError {
                    index,
                    kind: ErrorKind::Absolute,
                    value: diff,
                }
            }
        })
        .collect();
    Ok(ErrorReport {
        max_relative_error: max_rel,
        max_absolute_error_small: max_abs,
        threshold,
        per_index_errors,
    })
}

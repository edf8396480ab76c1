//! Fixed-point recovery through simulated eigenvector overlaps.
//!
//! If the true spectrum is `lambda`, the expected sample spectrum and the
//! overlap matrix `B(lambda)` satisfy, up to lower-order terms,
//! `lambda_j = sum_i E[lambda_hat_i] B_ij(lambda)`. The true spectrum is thus
//! approximately a fixed point of `nu -> lambda_hat . B(nu)`, with the
//! observed sample eigenvalues standing in for their expectations. We iterate
//! that map from an initial guess, re-estimating `B` by Monte Carlo at every
//! step.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymptotic::{correct_spectrum, AsymptoticOptions};
use crate::diagnostics::flat_spectrum_check;
use crate::error::{Error, Result};
use crate::report::{Method, RecoveryReport, Warning};
use crate::simulate::{estimate_b_matrix, BMatrix, SeedSpec, STOCHASTIC_TOLERANCE};
use crate::spectra::{project_to_valid, SampleShape, Spectrum};

/// Relative changes are measured against `max(nu_i, lambda_hat_1 * this)`.
const CHANGE_FLOOR: f64 = 1e-6;

/// Consecutive growing steps that count as oscillation.
const OSCILLATION_RUN: usize = 5;

/// Starting point of the iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Closed-form asymptotic correction of the sample spectrum.
    #[default]
    Asymptotic,
    /// The sample spectrum itself.
    Sample,
    User(Spectrum),
}

impl Init {
    pub fn kind(&self) -> InitKind {
        match self {
            Init::Asymptotic => InitKind::Asymptotic,
            Init::Sample => InitKind::Sample,
            Init::User(_) => InitKind::User,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Asymptotic,
    Sample,
    User,
}

/// How many replicates each iteration uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReplicateSchedule {
    #[default]
    Constant,
    /// `base + step * k` at iteration `k` (0-based).
    Linear { step: usize },
}

impl ReplicateSchedule {
    pub fn replicates(self, base: usize, iteration: usize) -> usize {
        match self {
            ReplicateSchedule::Constant => base,
            ReplicateSchedule::Linear { step } => base + step * iteration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    pub max_iterations: usize,
    pub replicates_per_iteration: usize,
    /// Stop once the sup-norm relative change drops below this.
    pub convergence_tol: f64,
    pub init: Init,
    pub seed: SeedSpec,
    pub schedule: ReplicateSchedule,
    /// Spend one extra B estimate on `lambda_hat . B(nu_final) - nu_final`.
    pub evaluate_residual: bool,
    /// Options for the asymptotic starting point.
    pub asymptotic: AsymptoticOptions,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            max_iterations: 50,
            replicates_per_iteration: 30,
            convergence_tol: 1e-3,
            init: Init::Asymptotic,
            seed: SeedSpec::new(0),
            schedule: ReplicateSchedule::Constant,
            evaluate_residual: true,
            asymptotic: AsymptoticOptions::default(),
        }
    }
}

impl FixedPointConfig {
    pub fn with_seed(seed: impl Into<SeedSpec>) -> Self {
        FixedPointConfig {
            seed: seed.into(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::BadParams("max_iterations must be at least 1".into()));
        }
        if self.replicates_per_iteration == 0 {
            return Err(Error::BadParams("replicates_per_iteration must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::BadParams(format!(
                "convergence_tol must be positive, got {}",
                self.convergence_tol
            )));
        }
        self.asymptotic.validate()
    }
}

/// One application of the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStep {
    /// 1-based iteration number.
    pub iteration: usize,
    pub spectrum: Spectrum,
    /// Sup-norm relative change from the previous iterate.
    pub change: f64,
    /// `|sum(nu) - sum(lambda_hat)| / sum(lambda_hat)` before projection.
    pub mass_error: f64,
    /// Entries clamped by the projection.
    pub clamped: usize,
    pub replicates: usize,
    pub b_max_std_error: Option<f64>,
    pub b_mean_std_error: Option<f64>,
    /// Worst single-replicate row/column sum error of B.
    pub b_sum_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub steps: Vec<IterationStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointDiagnostics {
    pub converged: bool,
    pub iterations_used: usize,
    pub init: InitKind,
    pub initial_spectrum: Spectrum,
    /// Largest mass error over all iterations.
    pub max_mass_error: f64,
    /// `sup_i |(lambda_hat . B(nu_final))_i - nu_final_i|`.
    pub residual_sup_norm: Option<f64>,
    /// The same residual divided by `max(nu_final_i, lambda_hat_1 * 1e-6)`.
    pub residual_relative: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<IterationTrace>,
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `(lambda_hat . B)_j = sum_i lambda_hat_i B_ij`, before projection.
pub fn map_raw(lambda_hat: &Spectrum, b: &BMatrix) -> Result<Vec<f64>> {
    let p = b.dim();
    check_dims(p, lambda_hat.len())?;
    let mut out = vec![0.0; p];
    for (i, &l) in lambda_hat.values().iter().enumerate() {
        for (o, bij) in out.iter_mut().zip(b.row(i)) {
            *o += l * bij;
        }
    }
    Ok(out)
}

/// One application of the map, projected onto valid spectra.
///
/// `nu` is the spectrum `b` was estimated for; only its length is used.
pub fn apply_map(nu: &Spectrum, lambda_hat: &Spectrum, b: &BMatrix) -> Result<Spectrum> {
    check_dims(b.dim(), nu.len())?;
    let raw = map_raw(lambda_hat, b)?;
    Ok(project_to_valid(&raw, 0.0).spectrum)
}

fn relative_change(new: &Spectrum, old: &Spectrum, floor: f64) -> f64 {
    new.values()
        .iter()
        .zip(old.values())
        .map(|(a, b)| (a - b).abs() / b.max(floor))
        .fold(0.0, f64::max)
}

fn initial_spectrum(lambda_hat: &Spectrum, shape: SampleShape, cfg: &FixedPointConfig) -> Result<Spectrum> {
    match &cfg.init {
        Init::Asymptotic => Ok(correct_spectrum(lambda_hat, shape, &cfg.asymptotic)?.recovered),
        Init::Sample => Ok(lambda_hat.clone()),
        Init::User(s) => {
            check_dims(shape.p, s.len())?;
            Ok(s.clone())
        }
    }
}

/// Iterate the map to a fixed point.
///
/// Iteration `k` estimates `B(nu_k)` with seed `cfg.seed.child(k)`, so a
/// fixed configuration reproduces the same report bit for bit.
pub fn iterate(lambda_hat: &Spectrum, shape: SampleShape, cfg: &FixedPointConfig) -> Result<RecoveryReport> {
    let start = Instant::now();
    cfg.validate()?;
    if lambda_hat.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    check_dims(shape.p, lambda_hat.len())?;

    let mut warnings = Vec::new();
    if let Some(w) = flat_spectrum_check(lambda_hat, shape) {
        warnings.push(w);
    }

    let initial = initial_spectrum(lambda_hat, shape, cfg)?;
    let floor = lambda_hat.largest() * CHANGE_FLOOR;
    let total = lambda_hat.sum();
    let mut nu = initial.clone();
    let mut steps: Vec<IterationStep> = Vec::new();
    let mut converged = false;
    let mut clamped_total = 0;
    let mut first_clamp = None;
    let mut oscillation_at = None;

    for k in 0..cfg.max_iterations {
        let replicates = cfg.schedule.replicates(cfg.replicates_per_iteration, k);
        let b = estimate_b_matrix(&nu, shape, replicates, &cfg.seed.child(k as u64))?;
        let raw = map_raw(lambda_hat, &b)?;
        let mass_error = if total > 0.0 {
            (raw.iter().sum::<f64>() - total).abs() / total
        } else {
            0.0
        };
        let projection = project_to_valid(&raw, 0.0);
        if projection.clamped > 0 {
            clamped_total += projection.clamped;
            first_clamp.get_or_insert(k + 1);
        }
        let change = relative_change(&projection.spectrum, &nu, floor);
        nu = projection.spectrum;
        steps.push(IterationStep {
            iteration: k + 1,
            spectrum: nu.clone(),
            change,
            mass_error,
            clamped: projection.clamped,
            replicates,
            b_max_std_error: b.max_std_error(),
            b_mean_std_error: b.mean_std_error(),
            b_sum_error: b.max_replicate_sum_error,
        });
        debug_assert!(b.max_replicate_sum_error <= STOCHASTIC_TOLERANCE);

        if oscillation_at.is_none() && steps.len() > OSCILLATION_RUN {
            let tail = &steps[steps.len() - OSCILLATION_RUN - 1..];
            if tail.windows(2).all(|w| w[1].change > w[0].change) {
                oscillation_at = Some(k + 1);
            }
        }
        if change < cfg.convergence_tol {
            converged = true;
            break;
        }
    }

    let iterations_used = steps.len();
    let last_change = steps.last().map_or(0.0, |s| s.change);
    if clamped_total > 0 {
        warnings.push(Warning::ProjectionClamped {
            count: clamped_total,
            iteration: first_clamp,
        });
    }
    if let Some(iteration) = oscillation_at {
        warnings.push(Warning::Oscillation { iteration });
    }
    if !converged {
        warnings.push(Warning::NotConverged {
            iterations: iterations_used,
            last_change,
        });
    }

    let (residual_sup_norm, residual_relative) = if cfg.evaluate_residual {
        let b = estimate_b_matrix(&nu, shape, cfg.replicates_per_iteration, &cfg.seed.child(u64::MAX))?;
        let image = map_raw(lambda_hat, &b)?;
        let mut abs = 0.0f64;
        let mut rel = 0.0f64;
        for (r, v) in image.iter().zip(nu.values()) {
            let d = (r - v).abs();
            abs = abs.max(d);
            rel = rel.max(d / v.max(floor));
        }
        (Some(abs), Some(rel))
    } else {
        (None, None)
    };

    let max_mass_error = steps.iter().map(|s| s.mass_error).fold(0.0, f64::max);
    Ok(RecoveryReport {
        method: Method::FixedPoint,
        input_hash: lambda_hat.content_hash(),
        shape,
        recovered: nu,
        truth: None,
        error: None,
        warnings,
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
        config: serde_json::to_value(cfg).expect("config serializes"),
        asymptotic: None,
        fixed_point: Some(FixedPointDiagnostics {
            converged,
            iterations_used,
            init: cfg.init.kind(),
            initial_spectrum: initial,
            max_mass_error,
            residual_sup_norm,
            residual_relative,
            trace: Some(IterationTrace { steps }),
        }),
        scaling: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::sample_eigenvalues;
    use approx::assert_relative_eq;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identity_b_returns_sample() {
        let lh = spec(&[3.0, 2.0, 1.0]);
        let out = apply_map(&lh, &lh, &BMatrix::identity(3)).unwrap();
        assert_eq!(out, lh);
    }

    #[test]
    fn uniform_b_averages() {
        let lh = spec(&[3.0, 1.0]);
        let out = apply_map(&lh, &lh, &BMatrix::uniform(2)).unwrap();
        assert_eq!(out.values(), &[2.0, 2.0]);
    }

    #[test]
    fn map_conserves_mass() {
        let nu = spec(&[5.0, 3.0, 2.0, 1.5, 1.0, 0.2]);
        let lh = spec(&[7.0, 3.5, 2.0, 1.0, 0.6, 0.1]);
        let b = estimate_b_matrix(&nu, SampleShape::new(9, 6).unwrap(), 7, &SeedSpec::new(2)).unwrap();
        let raw = map_raw(&lh, &b).unwrap();
        assert_relative_eq!(raw.iter().sum::<f64>(), lh.sum(), max_relative = 1e-10);
    }

    #[test]
    fn map_rejects_mismatched_dimensions() {
        let lh = spec(&[3.0, 1.0]);
        assert!(matches!(
            apply_map(&lh, &lh, &BMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = FixedPointConfig {
            max_iterations: 0,
            ..Default::default()
        };
        let lh = spec(&[1.0]);
        assert!(iterate(&lh, SampleShape::new(10, 1).unwrap(), &cfg).is_err());
        let cfg = FixedPointConfig {
            convergence_tol: 0.0,
            ..Default::default()
        };
        assert!(iterate(&lh, SampleShape::new(10, 1).unwrap(), &cfg).is_err());
        let cfg = FixedPointConfig {
            init: Init::User(spec(&[1.0, 2.0])),
            ..Default::default()
        };
        assert!(iterate(&lh, SampleShape::new(10, 1).unwrap(), &cfg).is_err());
    }

    #[test]
    fn huge_n_converges_quickly_to_sample() {
        let truth = spec(&[16.0, 8.0, 4.0, 2.0, 1.0]);
        let shape = SampleShape::new(50_000, 5).unwrap();
        let lh = sample_eigenvalues(&truth, shape, &SeedSpec::new(1)).unwrap();
        let cfg = FixedPointConfig {
            replicates_per_iteration: 10,
            ..FixedPointConfig::with_seed(3)
        };
        let r = iterate(&lh, shape, &cfg).unwrap();
        let fp = r.fixed_point.as_ref().unwrap();
        assert!(fp.converged);
        assert!(fp.iterations_used <= 3, "{} iterations", fp.iterations_used);
        for (a, b) in r.recovered.values().iter().zip(lh.values()) {
            assert!((a - b).abs() / b < 0.02);
        }
    }

    #[test]
    fn trace_and_mass_bookkeeping() {
        let truth = spec(&[6.0, 4.0, 3.0, 2.0, 1.5, 1.0, 0.8, 0.5]);
        let shape = SampleShape::new(16, 8).unwrap();
        let lh = sample_eigenvalues(&truth, shape, &SeedSpec::new(4)).unwrap();
        let cfg = FixedPointConfig {
            max_iterations: 4,
            replicates_per_iteration: 5,
            convergence_tol: 1e-12,
            schedule: ReplicateSchedule::Linear { step: 2 },
            ..FixedPointConfig::with_seed(5)
        };
        let r = iterate(&lh, shape, &cfg).unwrap();
        let fp = r.fixed_point.as_ref().unwrap();
        let steps = &fp.trace.as_ref().unwrap().steps;
        assert_eq!(steps.len(), 4);
        assert_eq!(
            steps.iter().map(|s| s.replicates).collect::<Vec<_>>(),
            vec![5, 7, 9, 11]
        );
        assert!(steps.iter().all(|s| s.mass_error <= 1e-8));
        assert!(!fp.converged);
        assert!(r
            .warnings
            .iter()
            .any(|w| matches!(w, Warning::NotConverged { iterations: 4, .. })));
        assert!(fp.residual_sup_norm.is_some());
        assert_eq!(r.recovered, steps[3].spectrum);
    }

    #[test]
    fn sample_and_user_init() {
        let lh = spec(&[4.0, 2.0, 1.0]);
        let shape = SampleShape::new(30, 3).unwrap();
        for init in [Init::Sample, Init::User(spec(&[3.0, 2.0, 1.5]))] {
            let cfg = FixedPointConfig {
                max_iterations: 2,
                replicates_per_iteration: 4,
                init: init.clone(),
                evaluate_residual: false,
                ..FixedPointConfig::with_seed(1)
            };
            let r = iterate(&lh, shape, &cfg).unwrap();
            let fp = r.fixed_point.unwrap();
            assert_eq!(fp.init, init.kind());
            assert!(fp.residual_sup_norm.is_none());
            if let Init::User(s) = init {
                assert_eq!(fp.initial_spectrum, s);
            }
        }
    }

    #[test]
    fn same_seed_same_report() {
        let lh = spec(&[5.0, 3.0, 2.0, 1.0, 0.5, 0.25]);
        let shape = SampleShape::new(12, 6).unwrap();
        let cfg = FixedPointConfig {
            max_iterations: 3,
            replicates_per_iteration: 6,
            ..FixedPointConfig::with_seed(99)
        };
        let a = iterate(&lh, shape, &cfg).unwrap();
        let b = iterate(&lh, shape, &cfg).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = iterate(
            &lh,
            shape,
            &FixedPointConfig {
                seed: SeedSpec::new(100),
                ..cfg
            },
        )
        .unwrap();
        assert_ne!(a.recovered, c.recovered);
    }
}

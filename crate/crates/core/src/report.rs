//! Recovery reports shared by all methods.

use serde::{Deserialize, Serialize};

use crate::asymptotic::AsymptoticDiagnostics;
use crate::error::Result;
use crate::fixedpoint::FixedPointDiagnostics;
use crate::scaling::ScalingDiagnostics;
use crate::spectra::{error_metrics, ErrorReport, SampleShape, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Asymptotic,
    FixedPoint,
    Scaled,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Asymptotic => "asymptotic",
            Method::FixedPoint => "fixed_point",
            Method::Scaled => "scaled",
        }
    }
}

/// Conditions a caller should know about; none of them abort a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The sample spectrum looks like that of a flat (isotropic) true
    /// spectrum, a regime where neither method is reliable.
    FlatSpectrum {
        /// `(largest - smallest) / largest` of the sample spectrum.
        relative_range: f64,
        /// KS distance to the Marchenko-Pastur law, when it was computed.
        mp_ks_distance: Option<f64>,
    },
    /// Correction denominators at or below the floor were raised to it.
    DenominatorClamped {
        indices: Vec<usize>,
        floor: f64,
    },
    /// Exact zero sample eigenvalues (`n < p`) passed through the formula.
    ZeroSampleEigenvalues {
        indices: Vec<usize>,
    },
    /// Near-degenerate pairs left out of the correction sums.
    DegeneratePairsSkipped {
        count: usize,
    },
    /// Entries raised to the floor when projecting onto valid spectra.
    ProjectionClamped {
        count: usize,
        iteration: Option<usize>,
    },
    NotConverged {
        iterations: usize,
        last_change: f64,
    },
    /// The step size grew over consecutive iterations.
    Oscillation {
        iteration: usize,
    },
    /// Top eigenvalues replaced after upscaling by a heuristic rule.
    TopEigenvaluesAdjusted {
        indices: Vec<usize>,
    },
}

impl Warning {
    pub fn is_flat_spectrum(&self) -> bool {
        matches!(self, Warning::FlatSpectrum { .. })
    }
}

/// Outcome of one recovery run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub method: Method,
    /// Content hash of the input sample spectrum.
    pub input_hash: String,
    pub shape: SampleShape,
    #[serde(rename = "final_spectrum")]
    pub recovered: Spectrum,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Spectrum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
    pub warnings: Vec<Warning>,
    pub timing_ms: f64,
    /// Echo of the options used.
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<AsymptoticDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<FixedPointDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingDiagnostics>,
}

impl RecoveryReport {
    /// Attach the true spectrum and its error report.
    pub fn with_truth(mut self, truth: Spectrum, threshold: f64) -> Result<Self> {
        self.error = Some(error_metrics(&truth, &self.recovered, threshold)?);
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn has_flat_warning(&self) -> bool {
        self.warnings.iter().any(Warning::is_flat_spectrum)
    }

    /// JSON of everything except wall-clock timing; equal for reruns with
    /// the same inputs and seed.
    pub fn fingerprint(&self) -> String {
        let mut copy = self.clone();
        copy.timing_ms = 0.0;
        serde_json::to_string(&copy).expect("report serializes")
    }

    /// Drop the per-iteration trace, keeping its summary fields.
    pub fn elide_trace(&mut self) {
        if let Some(fp) = self.fixed_point.as_mut() {
            fp.trace = None;
        }
    }
}

//! Declarative simulate-recover-compare runs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::asymptotic::{correct_spectrum, AsymptoticOptions};
use crate::error::{Error, Result};
use crate::fixedpoint::{iterate, FixedPointConfig};
use crate::io;
use crate::plot::{render_svg, PlotOptions, PlotSeries};
use crate::report::{Method, RecoveryReport};
use crate::scaling::{recover_scaled, ScaleConfig};
use crate::simulate::{sample_eigenvalues, SeedSpec};
use crate::spectra::{
    generate_spectrum, GeneratorParams, SampleShape, Spectrum, SpectrumKind, DEFAULT_ERROR_THRESHOLD,
};

/// Where the true spectrum comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Generator {
        kind: SpectrumKind,
        p: usize,
        #[serde(default)]
        params: GeneratorParams,
    },
    File(PathBuf),
}

impl SpectrumSource {
    pub fn load(&self) -> Result<Spectrum> {
        match self {
            SpectrumSource::Generator { kind, p, params } => generate_spectrum(*kind, *p, params),
            SpectrumSource::File(path) => io::read_spectrum(path),
        }
    }
}

fn default_threshold() -> f64 {
    DEFAULT_ERROR_THRESHOLD
}

/// One experiment: for every seed, draw a sample spectrum from the truth,
/// run each method on it and score the result against the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: SpectrumSource,
    pub n: usize,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub asymptotic: AsymptoticOptions,
    /// Its `seed` field is replaced per run.
    #[serde(default)]
    pub fixed_point: FixedPointConfig,
    #[serde(default)]
    pub scale: ScaleConfig,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub plot: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::BadParams("an experiment needs at least one seed".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::BadParams("an experiment needs at least one method".into()));
        }
        if self.plot && self.out_dir.is_none() {
            return Err(Error::BadParams("plotting requires out_dir".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub seed: u64,
    pub sample: Spectrum,
    pub reports: Vec<RecoveryReport>,
}

/// Run every seed. The sample for seed `s` is drawn with `SeedSpec(s)` and
/// the Monte-Carlo recoveries use its child stream 1.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRun>> {
    cfg.validate()?;
    let truth = cfg.source.load()?;
    let shape = SampleShape::new(cfg.n, truth.len())?;
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let root = SeedSpec::new(seed);
        let sample = sample_eigenvalues(&truth, shape, &root)?;
        let recovery_seed = root.child(1);
        let mut reports = Vec::with_capacity(cfg.methods.len());
        for &method in &cfg.methods {
            let report = match method {
                Method::Asymptotic => correct_spectrum(&sample, shape, &cfg.asymptotic)?,
                Method::FixedPoint => iterate(
                    &sample,
                    shape,
                    &FixedPointConfig {
                        seed: recovery_seed,
                        ..cfg.fixed_point.clone()
                    },
                )?,
                Method::Scaled => {
                    let mut scale = cfg.scale.clone();
                    scale.inner.seed = recovery_seed;
                    recover_scaled(&sample, shape, &scale)?
                }
            };
            reports.push(report.with_truth(truth.clone(), cfg.threshold)?);
        }
        if let Some(dir) = &cfg.out_dir {
            write_run(dir, seed, &truth, &sample, &reports, cfg.plot)?;
        }
        runs.push(ExperimentRun { seed, sample, reports });
    }
    Ok(runs)
}

fn write_run(
    dir: &std::path::Path,
    seed: u64,
    truth: &Spectrum,
    sample: &Spectrum,
    reports: &[RecoveryReport],
    plot: bool,
) -> Result<()> {
    io::write_spectrum(dir.join(format!("sample_{seed}.csv")), sample)?;
    for r in reports {
        let stem = format!("{}_{seed}", r.method.name());
        io::write_spectrum(dir.join(format!("{stem}.csv")), &r.recovered)?;
        io::write_report(dir.join(format!("{stem}.json")), r)?;
    }
    if plot {
        let mut series = vec![
            PlotSeries {
                label: "truth".into(),
                values: truth.values().to_vec(),
            },
            PlotSeries {
                label: "sample".into(),
                values: sample.values().to_vec(),
            },
        ];
        series.extend(reports.iter().map(|r| PlotSeries {
            label: r.method.name().into(),
            values: r.recovered.values().to_vec(),
        }));
        let svg = render_svg(
            &series,
            &PlotOptions {
                title: Some(format!("seed {seed}")),
                ..Default::default()
            },
        )?;
        let path = dir.join(format!("plot_{seed}.svg"));
        std::fs::write(&path, svg).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

//! The `specrec` command line.
//!
//! Every subcommand reads and writes the formats in [`crate::io`]. Options
//! may also come from a `--config` file of `key = value` lines named like
//! the long flags; flags given on the command line win.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::asymptotic::{correct_spectrum, AsymptoticOptions, BiasSign};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, ExperimentConfig};
use crate::fixedpoint::{iterate, FixedPointConfig, Init, ReplicateSchedule};
use crate::io::{self, ComparisonRow};
use crate::plot::{render_svg, PlotOptions, PlotSeries};
use crate::report::RecoveryReport;
use crate::scaling::{recover_scaled, ScaleConfig};
use crate::simulate::{
    eigenvalues, estimate_b_matrix, ks_statistic, mp_cdf, mp_density, sample_data, MarchenkoPastur, SeedSpec,
};
use crate::spectra::{error_metrics, generate_spectrum, GeneratorParams, SampleShape, Spectrum, SpectrumKind};

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "SPECREC_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "specrec",
    version,
    about = "Recover covariance spectra from sample eigenvalues"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads (0 = all cores); SPECREC_THREADS takes precedence.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// File of `key = value` defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic spectrum.
    Generate(GenerateArgs),
    /// Draw a sample spectrum for a true spectrum.
    Simulate(SimulateArgs),
    /// Recover the true spectrum from a sample spectrum.
    Recover(RecoverArgs),
    /// Score recovered spectra against a truth.
    Compare(CompareArgs),
    /// Tabulate the Marchenko-Pastur density and CDF.
    Mp(MpArgs),
    /// KS distance between a sample spectrum and the Marchenko-Pastur law.
    Ks(KsArgs),
    /// Plot spectra as SVG.
    Plot(PlotArgs),
    /// Run a JSON experiment description.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Family: linear, two_segment, step, flat, convex_power, sector_model.
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub p: usize,
    /// Generator parameter as `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long)]
    pub high: Option<f64>,
    #[arg(long)]
    pub mid: Option<f64>,
    #[arg(long)]
    pub low: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub n_high: Option<f64>,
    #[arg(long)]
    pub n_break: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// True spectrum.
    #[arg(long, required_unless_present = "from_data")]
    pub input: Option<PathBuf>,
    /// Number of observations.
    #[arg(long, required_unless_present = "from_data")]
    pub n: Option<usize>,
    /// Compute the sample spectrum of an existing data matrix instead.
    #[arg(long, value_name = "CSV", conflicts_with_all = ["input", "n"])]
    pub from_data: Option<PathBuf>,
    /// The data matrix file has a header row.
    #[arg(long)]
    pub skip_header: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the simulated data matrix.
    #[arg(long, value_name = "CSV")]
    pub data_out: Option<PathBuf>,
    /// Also write a Monte-Carlo estimate of B for the input spectrum.
    #[arg(long, value_name = "CSV")]
    pub b_out: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub replicates: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Asymptotic,
    #[value(alias = "fixed-point", alias = "fixed_point")]
    Fixedpoint,
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignArg {
    Contracting,
    Expanding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Asymptotic,
    Sample,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Sample spectrum.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of observations behind the sample spectrum.
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Fixedpoint)]
    pub method: MethodArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iter: u64,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    pub replicates: u64,
    /// Extra replicates per iteration.
    #[arg(long, default_value_t = 0)]
    pub replicate_step: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Asymptotic, conflicts_with = "init_file")]
    pub init: InitArg,
    /// Start the iteration from this spectrum.
    #[arg(long, value_name = "CSV")]
    pub init_file: Option<PathBuf>,
    /// Skip the extra B estimate for the final residual.
    #[arg(long)]
    pub no_residual: bool,
    #[arg(long, value_enum, default_value_t = SignArg::Contracting)]
    pub sign: SignArg,
    #[arg(long, default_value_t = 3)]
    pub neighbor_exclusion: usize,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub factor: u64,
    #[arg(long, default_value_t = 5)]
    pub top_preserve: usize,
    /// Score the result against this true spectrum.
    #[arg(long, value_name = "CSV")]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub threshold: f64,
    /// Leave the per-iteration trace out of the report.
    #[arg(long)]
    pub no_trace: bool,
    /// Recovered spectrum; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report; defaults to `<out>.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub truth: PathBuf,
    /// Recovered spectra.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub threshold: f64,
    /// Also write the table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MpArgs {
    /// Ratio `p / n` in (0, 1].
    #[arg(long)]
    pub ratio: f64,
    /// Grid points across the support.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(2..))]
    pub grid: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Marchenko-Pastur ratio; derived from `--n` when omitted.
    #[arg(long, required_unless_present = "n")]
    pub ratio: Option<f64>,
    /// Observations; selects the nonzero eigenvalues and the ratio.
    #[arg(long)]
    pub n: Option<usize>,
    /// Divide the eigenvalues by their mean first.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Stretch all spectra to the length of the longest.
    #[arg(long)]
    pub rescaled: bool,
    #[arg(long)]
    pub log: bool,
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment description.
    pub file: PathBuf,
}

/// Lines of a `key = value` config file as `--key value` arguments.
pub fn config_args(text: &str, path: &Path) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                // Repeatable flags take comma-separated lists.
                for v in value.split(',').map(str::trim) {
                    out.push(format!("--{key}").into());
                    out.push(v.into());
                }
            }
        }
    }
    Ok(out)
}

const SUBCOMMANDS: [&str; 8] = [
    "generate",
    "simulate",
    "recover",
    "compare",
    "mp",
    "ks",
    "plot",
    "experiment",
];

fn find_config(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Insert config-file arguments right after the subcommand, ahead of the
/// user's own flags, so the latter override them.
fn merge_config(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = find_config(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let extra = config_args(&text, &path)?;
    if let Some(pos) = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    {
        args.splice(pos + 1..pos + 1, extra);
    }
    Ok(args)
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::BadParams(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(flag.unwrap_or(0)),
    }
}

fn resolve_seed(seed: Option<u64>) -> SeedSpec {
    match seed {
        Some(s) => SeedSpec::new(s),
        None => {
            let s = SeedSpec::from_entropy();
            eprintln!("seed: {}", s.root_seed);
            s
        }
    }
}

fn emit_spectrum(out: Option<&Path>, spectrum: &Spectrum) -> Result<()> {
    match out {
        Some(path) => io::write_spectrum(path, spectrum),
        None => print_stdout(&io::format_spectrum(spectrum)),
    }
}

fn print_stdout(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let kind: SpectrumKind = a.kind.parse()?;
    let mut params = GeneratorParams::new();
    let named = [
        ("high", a.high),
        ("mid", a.mid),
        ("low", a.low),
        ("level", a.level),
        ("n_high", a.n_high),
        ("n_break", a.n_break),
        ("a", a.a),
        ("gamma", a.gamma),
        ("b", a.b),
        ("k", a.k),
        ("c", a.c),
        ("noise", a.noise),
    ];
    for (name, value) in named {
        if let Some(v) = value {
            params.insert(name.to_string(), v);
        }
    }
    for p in &a.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::BadParams(format!("--param expects NAME=VALUE, got {p:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::BadParams(format!("--param {k}: {v:?} is not a number")))?;
        params.insert(k.trim().replace('-', "_"), v);
    }
    let spectrum = generate_spectrum(kind, a.p, &params)?;
    emit_spectrum(a.out.as_deref(), &spectrum)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    if let Some(path) = &a.from_data {
        let data = io::read_data_matrix(path, a.skip_header)?;
        return emit_spectrum(a.out.as_deref(), &eigenvalues(&data)?);
    }
    let (Some(input), Some(n)) = (&a.input, a.n) else {
        return Err(Error::BadParams("--input and --n are required".into()));
    };
    let truth = io::read_spectrum(input)?;
    let shape = SampleShape::new(n, truth.len())?;
    let seed = resolve_seed(a.seed);
    let data = sample_data(&truth, shape, &seed)?;
    let lambda_hat = eigenvalues(&data)?;
    if let Some(path) = &a.data_out {
        io::write_data_matrix(path, &data)?;
    }
    if let Some(path) = &a.b_out {
        let b = estimate_b_matrix(&truth, shape, a.replicates, &seed.child(1))?;
        io::write_b_matrix(path, &b)?;
    }
    emit_spectrum(a.out.as_deref(), &lambda_hat)
}

fn recover_report(a: &RecoverArgs) -> Result<RecoveryReport> {
    let lambda_hat = io::read_spectrum(&a.input)?;
    let shape = SampleShape::new(a.n, lambda_hat.len())?;
    let sign = match a.sign {
        SignArg::Contracting => BiasSign::Contracting,
        SignArg::Expanding => BiasSign::Expanding,
    };
    let asymptotic = AsymptoticOptions {
        neighbor_exclusion: a.neighbor_exclusion,
        sign,
        ..Default::default()
    };
    let fixed_point = |seed: SeedSpec| -> Result<FixedPointConfig> {
        let init = match (&a.init_file, a.init) {
            (Some(path), _) => Init::User(io::read_spectrum(path)?),
            (None, InitArg::Asymptotic) => Init::Asymptotic,
            (None, InitArg::Sample) => Init::Sample,
        };
        Ok(FixedPointConfig {
            max_iterations: a.max_iter as usize,
            replicates_per_iteration: a.replicates as usize,
            convergence_tol: a.tol,
            init,
            seed,
            schedule: if a.replicate_step > 0 {
                ReplicateSchedule::Linear { step: a.replicate_step }
            } else {
                ReplicateSchedule::Constant
            },
            evaluate_residual: !a.no_residual,
            asymptotic: asymptotic.clone(),
        })
    };
    let mut report = match a.method {
        MethodArg::Asymptotic => correct_spectrum(&lambda_hat, shape, &asymptotic)?,
        MethodArg::Fixedpoint => iterate(&lambda_hat, shape, &fixed_point(resolve_seed(a.seed))?)?,
        MethodArg::Scaled => {
            let cfg = ScaleConfig {
                factor: a.factor as usize,
                top_preserve: a.top_preserve,
                inner: fixed_point(resolve_seed(a.seed))?,
                top_adjust: asymptotic.clone(),
            };
            recover_scaled(&lambda_hat, shape, &cfg)?
        }
    };
    if let Some(path) = &a.truth {
        report = report.with_truth(io::read_spectrum(path)?, a.threshold)?;
    }
    if a.no_trace {
        report.elide_trace();
    }
    Ok(report)
}

fn cmd_recover(a: &RecoverArgs) -> Result<()> {
    let report = recover_report(a)?;
    for w in &report.warnings {
        eprintln!("warning: {}", serde_json::to_string(w)?);
    }
    let report_path = a.report.clone().or_else(|| a.out.as_deref().map(io::sidecar_path));
    if let Some(path) = report_path {
        io::write_report(path, &report)?;
    }
    emit_spectrum(a.out.as_deref(), &report.recovered)
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let truth = io::read_spectrum(&a.truth)?;
    let rows = a
        .files
        .iter()
        .map(|f| {
            let est = io::read_spectrum(f)?;
            Ok(ComparisonRow {
                label: f.display().to_string(),
                report: error_metrics(&truth, &est, a.threshold)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = &a.out {
        std::fs::write(path, io::comparison_csv(&rows)).map_err(|e| Error::io(path, e))?;
    }
    print_stdout(&io::comparison_text(&rows))
}

fn cmd_mp(a: &MpArgs) -> Result<()> {
    let mp = MarchenkoPastur::new(a.ratio)?;
    let (lo, hi) = mp.support();
    let grid = a.grid as usize;
    let mut text = String::from("x,density,cdf\n");
    for k in 0..grid {
        let x = lo + (hi - lo) * k as f64 / (grid - 1) as f64;
        text.push_str(&format!(
            "{},{},{}\n",
            io::format_value(x),
            io::format_value(mp_density(x, a.ratio)?),
            io::format_value(mp_cdf(x, a.ratio)?)
        ));
    }
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => print_stdout(&text),
    }
}

fn cmd_ks(a: &KsArgs) -> Result<()> {
    let spectrum = io::read_spectrum(&a.input)?;
    let p = spectrum.len();
    let (m, ratio) = match (a.n, a.ratio) {
        (Some(n), r) => {
            let m = n.min(p);
            (m, r.unwrap_or(m as f64 / n.max(p) as f64))
        }
        (None, Some(r)) => (p, r),
        (None, None) => return Err(Error::BadParams("give --ratio or --n".into())),
    };
    let mut values = spectrum.values()[..m].to_vec();
    if a.normalize {
        let mean = values.iter().sum::<f64>() / m as f64;
        if !(mean > 0.0) {
            return Err(Error::BadParams("cannot normalize a zero spectrum".into()));
        }
        values.iter_mut().for_each(|v| *v /= mean);
    }
    let mp = MarchenkoPastur::new(ratio)?;
    let d = ks_statistic(&values, |x| mp.cdf(x));
    print_stdout(&format!("{}\n", io::format_value(d)))
}

fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let series = a
        .files
        .iter()
        .map(|f| {
            Ok(PlotSeries {
                label: f
                    .file_name()
                    .map_or_else(|| f.display().to_string(), |n| n.to_string_lossy().into_owned()),
                values: io::read_spectrum(f)?.into_values(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let svg = render_svg(
        &series,
        &PlotOptions {
            rescaled: a.rescaled,
            log_y: a.log,
            title: a.title.clone(),
            ..Default::default()
        },
    )?;
    std::fs::write(&a.out, svg).map_err(|e| Error::io(&a.out, e))
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let cfg: ExperimentConfig = io::read_json(&a.file)?;
    let runs = run_experiment(&cfg)?;
    let mut text = String::from("seed,method,max_relative_error,max_absolute_error_small,flat_warning\n");
    for run in &runs {
        for r in &run.reports {
            let e = r.error.as_ref().expect("experiments always score against the truth");
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                run.seed,
                r.method.name(),
                io::format_value(e.max_relative_error),
                io::format_value(e.max_absolute_error_small),
                r.has_flat_warning()
            ));
        }
    }
    print_stdout(&text)
}

/// Execute a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::BadParams(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Recover(a) => cmd_recover(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Mp(a) => cmd_mp(a),
        Command::Ks(a) => cmd_ks(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Experiment(a) => cmd_experiment(a),
    })
}

/// Parse `args` (including the program name), run, and map the outcome to
/// an exit code.
pub fn run(args: Vec<OsString>) -> ExitCode {
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => return report_error(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.class().exit_code() as u8)
}

//! C ABI over `specrec`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` or by a
//! recovery call and released with the matching `*_free`. Every fallible
//! function returns a [`SpecrecStatus`]; on failure a description is
//! available from [`specrec_last_error_message`] on the same thread.
//! Output pointers are written only on success.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use specrec::asymptotic::{correct_spectrum, AsymptoticOptions, BiasSign};
use specrec::fixedpoint::{iterate, FixedPointConfig, Init};
use specrec::scaling::{recover_scaled, ScaleConfig};
use specrec::simulate::{mp_cdf, mp_density, sample_eigenvalues, SeedSpec};
use specrec::spectra::{error_metrics, generate_spectrum, GeneratorParams, SampleShape, Spectrum, SpectrumKind};
use specrec::{Error, ErrorClass, RecoveryReport};

/// Result of every fallible call. The numeric values of the first four
/// match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecrecStatus {
    Ok = 0,
    Validation = 2,
    Numerical = 3,
    Io = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Sorted, nonnegative spectrum.
pub struct SpecrecSpectrum(Spectrum);

/// Result of a recovery run.
pub struct SpecrecReport(RecoveryReport);

/// Options for the closed-form correction.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpecrecAsymptoticOptions {
    /// Nearest neighbours left out of each correction sum.
    pub neighbor_exclusion: usize,
    /// 0: contracting (default), 1: expanding.
    pub sign: i32,
    pub denominator_guard: f64,
    pub clamp_floor: f64,
}

/// Options for the fixed-point iteration.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpecrecFixedPointOptions {
    pub max_iterations: usize,
    pub replicates: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// 0: asymptotic correction, 1: the sample spectrum.
    pub init: i32,
    pub evaluate_residual: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: SpecrecStatus, message: impl Into<String>) -> SpecrecStatus {
    set_last_error(message.into());
    status
}

fn status_of(e: &Error) -> SpecrecStatus {
    match e.class() {
        ErrorClass::Validation => SpecrecStatus::Validation,
        ErrorClass::Numerical => SpecrecStatus::Numerical,
        ErrorClass::Io => SpecrecStatus::Io,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), SpecrecStatus>) -> SpecrecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpecrecStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SpecrecStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn lift<T>(r: specrec::Result<T>) -> Result<T, SpecrecStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, SpecrecStatus> {
    p.as_ref()
        .ok_or_else(|| fail(SpecrecStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, SpecrecStatus> {
    p.as_mut()
        .ok_or_else(|| fail(SpecrecStatus::NullPointer, format!("{name} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, SpecrecStatus> {
    if p.is_null() {
        return Err(fail(SpecrecStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SpecrecStatus::Validation, format!("{name} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], SpecrecStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(SpecrecStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn shape(n: usize, p: usize) -> Result<SampleShape, SpecrecStatus> {
    lift(SampleShape::new(n, p))
}

fn boxed_report(report: RecoveryReport) -> *mut SpecrecReport {
    Box::into_raw(Box::new(SpecrecReport(report)))
}

/// Description of the last failure on this thread, or null. The string is
/// owned by the library and valid until the next failing call on this
/// thread.
#[no_mangle]
pub extern "C" fn specrec_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Build a spectrum from `len` values (sorted on entry).
#[no_mangle]
pub unsafe extern "C" fn specrec_spectrum_new(
    values: *const f64,
    len: usize,
    out: *mut *mut SpecrecSpectrum,
) -> SpecrecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let v = slice(values, len, "values")?.to_vec();
        let s = lift(Spectrum::new(v))?;
        *out = Box::into_raw(Box::new(SpecrecSpectrum(s)));
        Ok(())
    })
}

/// Number of eigenvalues; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn specrec_spectrum_len(spectrum: *const SpecrecSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.0.len())
}

/// Copy the eigenvalues (nonincreasing) into `out`, which holds `capacity`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn specrec_spectrum_values(
    spectrum: *const SpecrecSpectrum,
    out: *mut f64,
    capacity: usize,
) -> SpecrecStatus {
    guard(|| {
        let s = &deref(spectrum, "spectrum")?.0;
        if capacity < s.len() {
            return Err(fail(
                SpecrecStatus::Validation,
                format!("buffer holds {capacity} values, spectrum has {}", s.len()),
            ));
        }
        if out.is_null() {
            return Err(fail(SpecrecStatus::NullPointer, "out is null"));
        }
        std::slice::from_raw_parts_mut(out, s.len()).copy_from_slice(s.values());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn specrec_spectrum_free(spectrum: *mut SpecrecSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Synthetic spectrum of family `kind` (e.g. `"convex_power"`), with
/// `n_params` named overrides.
#[no_mangle]
pub unsafe extern "C" fn specrec_generate(
    kind: *const c_char,
    p: usize,
    param_names: *const *const c_char,
    param_values: *const f64,
    n_params: usize,
    out: *mut *mut SpecrecSpectrum,
) -> SpecrecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let kind: SpectrumKind = lift(c_str(kind, "kind")?.parse())?;
        let values = slice(param_values, n_params, "param_values")?;
        let mut params = GeneratorParams::new();
        if n_params > 0 {
            if param_names.is_null() {
                return Err(fail(SpecrecStatus::NullPointer, "param_names is null"));
            }
            for (k, &v) in values.iter().enumerate() {
                let name = c_str(*param_names.add(k), "parameter name")?;
                params.insert(name.to_string(), v);
            }
        }
        let s = lift(generate_spectrum(kind, p, &params))?;
        *out = Box::into_raw(Box::new(SpecrecSpectrum(s)));
        Ok(())
    })
}

/// Sample spectrum of `n` Gaussian observations with covariance spectrum
/// `truth`.
#[no_mangle]
pub unsafe extern "C" fn specrec_sample_spectrum(
    truth: *const SpecrecSpectrum,
    n: usize,
    seed: u64,
    out: *mut *mut SpecrecSpectrum,
) -> SpecrecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let truth = &deref(truth, "truth")?.0;
        let sh = shape(n, truth.len())?;
        let s = lift(sample_eigenvalues(truth, sh, &SeedSpec::new(seed)))?;
        *out = Box::into_raw(Box::new(SpecrecSpectrum(s)));
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn specrec_asymptotic_options_default() -> SpecrecAsymptoticOptions {
    let d = AsymptoticOptions::default();
    SpecrecAsymptoticOptions {
        neighbor_exclusion: d.neighbor_exclusion,
        sign: 0,
        denominator_guard: d.denominator_guard,
        clamp_floor: d.clamp_floor,
    }
}

#[no_mangle]
pub extern "C" fn specrec_fixed_point_options_default() -> SpecrecFixedPointOptions {
    let d = FixedPointConfig::default();
    SpecrecFixedPointOptions {
        max_iterations: d.max_iterations,
        replicates: d.replicates_per_iteration,
        tolerance: d.convergence_tol,
        seed: d.seed.root_seed,
        init: 0,
        evaluate_residual: d.evaluate_residual,
    }
}

unsafe fn asymptotic_options(opts: *const SpecrecAsymptoticOptions) -> Result<AsymptoticOptions, SpecrecStatus> {
    let Some(o) = opts.as_ref() else {
        return Ok(AsymptoticOptions::default());
    };
    let sign = match o.sign {
        0 => BiasSign::Contracting,
        1 => BiasSign::Expanding,
        other => return Err(fail(SpecrecStatus::Validation, format!("unknown sign {other}"))),
    };
    Ok(AsymptoticOptions {
        denominator_guard: o.denominator_guard,
        neighbor_exclusion: o.neighbor_exclusion,
        clamp_floor: o.clamp_floor,
        sign,
    })
}

unsafe fn fixed_point_config(opts: *const SpecrecFixedPointOptions) -> Result<FixedPointConfig, SpecrecStatus> {
    let Some(o) = opts.as_ref() else {
        return Ok(FixedPointConfig::default());
    };
    let init = match o.init {
        0 => Init::Asymptotic,
        1 => Init::Sample,
        other => return Err(fail(SpecrecStatus::Validation, format!("unknown init {other}"))),
    };
    Ok(FixedPointConfig {
        max_iterations: o.max_iterations,
        replicates_per_iteration: o.replicates,
        convergence_tol: o.tolerance,
        init,
        seed: SeedSpec::new(o.seed),
        evaluate_residual: o.evaluate_residual,
        ..Default::default()
    })
}

/// Closed-form correction. `options` may be null for the defaults.
#[no_mangle]
pub unsafe extern "C" fn specrec_correct_asymptotic(
    sample: *const SpecrecSpectrum,
    n: usize,
    options: *const SpecrecAsymptoticOptions,
    out: *mut *mut SpecrecReport,
) -> SpecrecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let lh = &deref(sample, "sample")?.0;
        let opts = asymptotic_options(options)?;
        let r = lift(correct_spectrum(lh, shape(n, lh.len())?, &opts))?;
        *out = boxed_report(r);
        Ok(())
    })
}

/// Fixed-point recovery. `options` may be null for the defaults.
#[no_mangle]
pub unsafe extern "C" fn specrec_recover_fixed_point(
    sample: *const SpecrecSpectrum,
    n: usize,
    options: *const SpecrecFixedPointOptions,
    out: *mut *mut SpecrecReport,
) -> SpecrecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let lh = &deref(sample, "sample")?.0;
        let cfg = fixed_point_config(options)?;
        let r = lift(iterate(lh, shape(n, lh.len())?, &cfg))?;
        *out = boxed_report(r);
        Ok(())
    })
}

/// Fixed-point recovery on a problem reduced by `factor`, with the largest
/// `top_preserve` eigenvalues taken from the closed-form correction.
#[no_mangle]
pub unsafe extern "C" fn specrec_recover_scaled(
    sample: *const SpecrecSpectrum,
    n: usize,
    factor: usize,
    top_preserve: usize,
    options: *const SpecrecFixedPointOptions,
    out: *mut *mut SpecrecReport,
) -> SpecrecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let lh = &deref(sample, "sample")?.0;
        let cfg = ScaleConfig {
            factor,
            top_preserve,
            inner: fixed_point_config(options)?,
            ..Default::default()
        };
        let r = lift(recover_scaled(lh, shape(n, lh.len())?, &cfg))?;
        *out = boxed_report(r);
        Ok(())
    })
}

/// Copy of the recovered spectrum.
#[no_mangle]
pub unsafe extern "C" fn specrec_report_spectrum(
    report: *const SpecrecReport,
    out: *mut *mut SpecrecSpectrum,
) -> SpecrecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let r = &deref(report, "report")?.0;
        *out = Box::into_raw(Box::new(SpecrecSpectrum(r.recovered.clone())));
        Ok(())
    })
}

/// Number of warnings attached to the report; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn specrec_report_warning_count(report: *const SpecrecReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.warnings.len())
}

/// Whether the input looked like the sample spectrum of a flat truth.
#[no_mangle]
pub unsafe extern "C" fn specrec_report_has_flat_warning(report: *const SpecrecReport) -> bool {
    report.as_ref().is_some_and(|r| r.0.has_flat_warning())
}

/// The full report as JSON. Release with [`specrec_string_free`].
#[no_mangle]
pub unsafe extern "C" fn specrec_report_to_json(report: *const SpecrecReport, out: *mut *mut c_char) -> SpecrecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let r = &deref(report, "report")?.0;
        let json = serde_json::to_string(r).map_err(|e| fail(SpecrecStatus::Io, e.to_string()))?;
        *out = CString::new(json).expect("JSON has no NULs").into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn specrec_report_free(report: *mut SpecrecReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[no_mangle]
pub unsafe extern "C" fn specrec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Maximum relative error over entries above `threshold` and maximum
/// absolute error over the rest.
#[no_mangle]
pub unsafe extern "C" fn specrec_error_metrics(
    truth: *const SpecrecSpectrum,
    estimate: *const SpecrecSpectrum,
    threshold: f64,
    max_relative_error: *mut f64,
    max_absolute_error_small: *mut f64,
) -> SpecrecStatus {
    guard(|| {
        let t = &deref(truth, "truth")?.0;
        let e = &deref(estimate, "estimate")?.0;
        let rel = out_ptr(max_relative_error, "max_relative_error")?;
        let abs = out_ptr(max_absolute_error_small, "max_absolute_error_small")?;
        let report = lift(error_metrics(t, e, threshold))?;
        *rel = report.max_relative_error;
        *abs = report.max_absolute_error_small;
        Ok(())
    })
}

/// Marchenko-Pastur density at `x` for ratio `r` in (0, 1].
#[no_mangle]
pub unsafe extern "C" fn specrec_mp_density(x: f64, r: f64, out: *mut f64) -> SpecrecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = lift(mp_density(x, r))?;
        Ok(())
    })
}

/// Marchenko-Pastur CDF at `x` for ratio `r` in (0, 1].
#[no_mangle]
pub unsafe extern "C" fn specrec_mp_cdf(x: f64, r: f64, out: *mut f64) -> SpecrecStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = lift(mp_cdf(x, r))?;
        Ok(())
    })
}

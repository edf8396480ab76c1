use std::ffi::{CStr, CString};
use std::ptr;

use specrec_ffi::*;

unsafe fn spectrum(values: &[f64]) -> *mut SpecrecSpectrum {
    let mut out = ptr::null_mut();
    assert_eq!(
        specrec_spectrum_new(values.as_ptr(), values.len(), &mut out),
        SpecrecStatus::Ok
    );
    out
}

unsafe fn values(s: *const SpecrecSpectrum) -> Vec<f64> {
    let mut v = vec![0.0; specrec_spectrum_len(s)];
    assert_eq!(specrec_spectrum_values(s, v.as_mut_ptr(), v.len()), SpecrecStatus::Ok);
    v
}

unsafe fn last_error() -> String {
    CStr::from_ptr(specrec_last_error_message())
        .to_string_lossy()
        .into_owned()
}

#[test]
fn spectrum_handles() {
    unsafe {
        let s = spectrum(&[1.0, 3.0, 2.0]);
        assert_eq!(values(s), vec![3.0, 2.0, 1.0]);
        let mut small = [0.0; 2];
        assert_eq!(
            specrec_spectrum_values(s, small.as_mut_ptr(), 2),
            SpecrecStatus::Validation
        );
        assert!(last_error().contains("buffer"));
        specrec_spectrum_free(s);
        specrec_spectrum_free(ptr::null_mut());
        assert_eq!(specrec_spectrum_len(ptr::null()), 0);
    }
}

#[test]
fn validation_errors_leave_output_untouched() {
    unsafe {
        let mut out = ptr::null_mut();
        let bad = [1.0, f64::NAN];
        assert_eq!(
            specrec_spectrum_new(bad.as_ptr(), 2, &mut out),
            SpecrecStatus::Validation
        );
        assert!(out.is_null());
        assert!(last_error().contains("non-finite"));
        assert_eq!(
            specrec_spectrum_new(ptr::null(), 3, &mut out),
            SpecrecStatus::NullPointer
        );
        assert_eq!(
            specrec_spectrum_new(bad.as_ptr(), 1, ptr::null_mut()),
            SpecrecStatus::NullPointer
        );
    }
}

#[test]
fn generate_with_parameters() {
    unsafe {
        let kind = CString::new("step").unwrap();
        let names = [CString::new("high").unwrap(), CString::new("n_high").unwrap()];
        let name_ptrs: Vec<_> = names.iter().map(|n| n.as_ptr()).collect();
        let vals = [5.0, 2.0];
        let mut out = ptr::null_mut();
        let st = specrec_generate(kind.as_ptr(), 4, name_ptrs.as_ptr(), vals.as_ptr(), 2, &mut out);
        assert_eq!(st, SpecrecStatus::Ok);
        assert_eq!(values(out), vec![5.0, 5.0, 1.0, 1.0]);
        specrec_spectrum_free(out);

        let bogus = CString::new("bogus").unwrap();
        let st = specrec_generate(bogus.as_ptr(), 4, ptr::null(), ptr::null(), 0, &mut out);
        assert_eq!(st, SpecrecStatus::Validation);
        assert!(last_error().contains("convex_power"));
    }
}

#[test]
fn asymptotic_hand_example_both_signs() {
    unsafe {
        let s = spectrum(&[3.0, 1.0]);
        let mut opts = specrec_asymptotic_options_default();
        opts.sign = 1;
        let mut report = ptr::null_mut();
        assert_eq!(specrec_correct_asymptotic(s, 10, &opts, &mut report), SpecrecStatus::Ok);
        let mut rec = ptr::null_mut();
        assert_eq!(specrec_report_spectrum(report, &mut rec), SpecrecStatus::Ok);
        let v = values(rec);
        assert!((v[0] - 3.0 / 0.95).abs() < 1e-12 && (v[1] - 1.0 / 1.15).abs() < 1e-12);
        specrec_spectrum_free(rec);
        specrec_report_free(report);

        assert_eq!(
            specrec_correct_asymptotic(s, 10, ptr::null(), &mut report),
            SpecrecStatus::Ok
        );
        assert_eq!(specrec_report_spectrum(report, &mut rec), SpecrecStatus::Ok);
        let v = values(rec);
        assert!((v[0] - 3.0 / 1.05).abs() < 1e-12 && (v[1] - 1.0 / 0.85).abs() < 1e-12);
        specrec_spectrum_free(rec);
        specrec_report_free(report);

        opts.sign = 9;
        assert_eq!(
            specrec_correct_asymptotic(s, 10, &opts, &mut report),
            SpecrecStatus::Validation
        );
        specrec_spectrum_free(s);
    }
}

#[test]
fn fixed_point_and_scaled_agree_at_factor_one() {
    unsafe {
        let kind = CString::new("linear").unwrap();
        let mut truth = ptr::null_mut();
        assert_eq!(
            specrec_generate(kind.as_ptr(), 12, ptr::null(), ptr::null(), 0, &mut truth),
            SpecrecStatus::Ok
        );
        let mut sample = ptr::null_mut();
        assert_eq!(specrec_sample_spectrum(truth, 24, 3, &mut sample), SpecrecStatus::Ok);
        let mut opts = specrec_fixed_point_options_default();
        opts.max_iterations = 2;
        opts.replicates = 4;
        opts.seed = 5;

        let mut a = ptr::null_mut();
        let mut b = ptr::null_mut();
        assert_eq!(
            specrec_recover_fixed_point(sample, 24, &opts, &mut a),
            SpecrecStatus::Ok
        );
        assert_eq!(
            specrec_recover_scaled(sample, 24, 1, 0, &opts, &mut b),
            SpecrecStatus::Ok
        );
        let (mut sa, mut sb) = (ptr::null_mut(), ptr::null_mut());
        specrec_report_spectrum(a, &mut sa);
        specrec_report_spectrum(b, &mut sb);
        assert_eq!(values(sa), values(sb));

        let mut json = ptr::null_mut();
        assert_eq!(specrec_report_to_json(a, &mut json), SpecrecStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        specrec_string_free(json);
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["method"], "fixed_point");
        assert_eq!(
            specrec_report_warning_count(a),
            parsed["warnings"].as_array().unwrap().len()
        );

        let (mut rel, mut abs) = (0.0, 0.0);
        assert_eq!(
            specrec_error_metrics(truth, sa, 0.2, &mut rel, &mut abs),
            SpecrecStatus::Ok
        );
        assert!(rel.is_finite() && rel >= 0.0);

        opts.max_iterations = 0;
        let mut c = ptr::null_mut();
        assert_eq!(
            specrec_recover_fixed_point(sample, 24, &opts, &mut c),
            SpecrecStatus::Validation
        );
        assert!(c.is_null());

        for p in [sa, sb, sample, truth] {
            specrec_spectrum_free(p);
        }
        specrec_report_free(a);
        specrec_report_free(b);
    }
}

#[test]
fn flat_warning_is_visible() {
    unsafe {
        let s = spectrum(&[1.0, 1.01, 0.99, 1.02]);
        let mut report = ptr::null_mut();
        assert_eq!(
            specrec_correct_asymptotic(s, 100, ptr::null(), &mut report),
            SpecrecStatus::Ok
        );
        assert!(specrec_report_has_flat_warning(report));
        assert!(!specrec_report_has_flat_warning(ptr::null()));
        specrec_report_free(report);
        specrec_spectrum_free(s);
    }
}

#[test]
fn marchenko_pastur_values() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(specrec_mp_cdf(0.0, 1.0, &mut v), SpecrecStatus::Ok);
        assert_eq!(v, 0.0);
        assert_eq!(specrec_mp_density(1.0, 0.25, &mut v), SpecrecStatus::Ok);
        assert!(v > 0.0);
        assert_eq!(specrec_mp_density(1.0, 2.0, &mut v), SpecrecStatus::Validation);
        assert!(last_error().contains("ratio"));
    }
}

#[test]
fn mismatched_lengths_in_metrics() {
    unsafe {
        let a = spectrum(&[2.0, 1.0]);
        let b = spectrum(&[2.0]);
        let (mut rel, mut abs) = (0.0, 0.0);
        assert_eq!(
            specrec_error_metrics(a, b, 0.2, &mut rel, &mut abs),
            SpecrecStatus::Validation
        );
        assert_eq!(
            specrec_error_metrics(a, ptr::null(), 0.2, &mut rel, &mut abs),
            SpecrecStatus::NullPointer
        );
        specrec_spectrum_free(a);
        specrec_spectrum_free(b);
    }
}

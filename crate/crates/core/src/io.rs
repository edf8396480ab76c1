//! File formats.
//!
//! * Spectra: one eigenvalue per line, optionally preceded by an
//!   `eigenvalue` header. Values are written in the shortest form that
//!   parses back to the same `f64`.
//! * Data matrices and B matrices: comma-separated rows. A B matrix is
//!   accompanied by a `<file>.json` sidecar with its provenance.
//! * Reports: JSON, see `schemas/recovery_report.schema.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Error, Result};
use crate::report::RecoveryReport;
use crate::simulate::{BMatrix, BMatrixSidecar, DataMatrix};
use crate::spectra::{validate_spectrum, ErrorReport, Spectrum};

pub const SPECTRUM_HEADER: &str = "eigenvalue";

/// Shortest round-trip representation; exponent form outside `[1e-5, 1e16)`.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parse spectrum text; `path` is only used in error messages.
pub fn parse_spectrum(text: &str, path: &Path) -> Result<Spectrum> {
    let mut values = Vec::new();
    let mut seen_content = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let first = !seen_content;
        seen_content = true;
        if first && line.eq_ignore_ascii_case(SPECTRUM_HEADER) {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| parse_error(path, idx + 1, format!("not a number: {line:?}")))?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(parse_error(path, 0, "no eigenvalues"));
    }
    validate_spectrum(values)
}

pub fn read_spectrum(path: impl AsRef<Path>) -> Result<Spectrum> {
    let path = path.as_ref();
    parse_spectrum(&read_text(path)?, path)
}

pub fn format_spectrum(spectrum: &Spectrum) -> String {
    let mut out = String::with_capacity(spectrum.len() * 20);
    for &v in spectrum.values() {
        out.push_str(&format_value(v));
        out.push('\n');
    }
    out
}

pub fn write_spectrum(path: impl AsRef<Path>, spectrum: &Spectrum) -> Result<()> {
    write_text(path.as_ref(), &format_spectrum(spectrum))
}

fn read_rows(path: &Path, skip_header: bool) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(skip_header)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_error(path, line, format!("not a finite number: {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 0, "no rows"));
    }
    Ok(rows)
}

fn format_rows<'a>(rows: impl Iterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for row in rows {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&format_value(*v));
        }
        out.push('\n');
    }
    out
}

/// Read an `n x p` data matrix, one observation per row.
pub fn read_data_matrix(path: impl AsRef<Path>, skip_header: bool) -> Result<DataMatrix> {
    let path = path.as_ref();
    DataMatrix::from_rows(&read_rows(path, skip_header)?)
}

pub fn write_data_matrix(path: impl AsRef<Path>, data: &DataMatrix) -> Result<()> {
    let rows: Vec<Vec<f64>> = data.rows().collect();
    write_text(path.as_ref(), &format_rows(rows.iter().map(Vec::as_slice)))
}

/// Path of the JSON sidecar that accompanies a B matrix CSV.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Write `b` as CSV plus its JSON sidecar.
pub fn write_b_matrix(path: impl AsRef<Path>, b: &BMatrix) -> Result<()> {
    let path = path.as_ref();
    write_text(path, &format_rows((0..b.dim()).map(|i| b.row(i))))?;
    write_json(sidecar_path(path), &b.sidecar())
}

/// Read a B matrix CSV and, if present, its sidecar.
pub fn read_b_matrix(path: impl AsRef<Path>) -> Result<(BMatrix, Option<BMatrixSidecar>)> {
    let path = path.as_ref();
    let rows = read_rows(path, false)?;
    let p = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: bad.len(),
        });
    }
    let mut b = BMatrix::from_entries(p, rows.concat())?;
    let side = sidecar_path(path);
    let sidecar = if side.exists() {
        let s: BMatrixSidecar = read_json(&side)?;
        b.replicates = s.replicates;
        b.root_seed = s.root_seed;
        Some(s)
    } else {
        None
    };
    Ok((b, sidecar))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path.as_ref(), &text)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    serde_json::from_str(&read_text(path)?).map_err(|e| parse_error(path, e.line(), e.to_string()))
}

pub fn write_report(path: impl AsRef<Path>, report: &RecoveryReport) -> Result<()> {
    write_json(path, report)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<RecoveryReport> {
    read_json(path)
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub report: ErrorReport,
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["file", "max_relative_error", "max_absolute_error_small", "threshold"])
        .expect("in-memory write");
    for row in rows {
        let r = &row.report;
        w.write_record([
            row.label.clone(),
            format_value(r.max_relative_error),
            format_value(r.max_absolute_error_small),
            format_value(r.threshold),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn comparison_text(rows: &[ComparisonRow]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(4).max(4);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>12}  {:>12}", "file", "max rel", "max abs <thr");
    for row in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>12.6}  {:>12.6}",
            row.label, row.report.max_relative_error, row.report.max_absolute_error_small
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_round_trips() {
        for v in [
            1.0,
            0.1,
            1.0 / 3.0,
            123456.789,
            1e-300,
            2.5e20,
            0.0,
            9.999_999_999_999_998e15,
        ] {
            let s = format_value(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_value(1.0), "1");
        assert_eq!(format_value(1e-7), "1e-7");
    }

    #[test]
    fn spectrum_header_comments_and_blanks() {
        let s = parse_spectrum("eigenvalue\n# truth\n3\n\n 1.5 \n", Path::new("x")).unwrap();
        assert_eq!(s.values(), &[3.0, 1.5]);
    }

    #[test]
    fn spectrum_is_sorted_on_read() {
        let s = parse_spectrum("1\n3\n2\n", Path::new("x")).unwrap();
        assert_eq!(s.values(), &[3.0, 2.0, 1.0]);
    }

    #[test]
    fn spectrum_parse_errors_carry_line() {
        match parse_spectrum("1\n2\nabc\n", Path::new("f.csv")) {
            Err(Error::Parse { line, path, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(path, Path::new("f.csv"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_spectrum("", Path::new("x")), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_spectrum("1\n-3\n", Path::new("x")),
            Err(Error::NegativeEigenvalue { .. })
        ));
        assert!(matches!(
            parse_spectrum("1\nNaN\n", Path::new("x")),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("out/b.csv")), Path::new("out/b.csv.json"));
    }

    #[test]
    fn comparison_table() {
        let rows = vec![ComparisonRow {
            label: "a.csv".into(),
            report: ErrorReport {
                max_relative_error: 0.25,
                max_absolute_error_small: 0.0,
                threshold: 0.2,
                per_index_errors: vec![],
            },
        }];
        assert_eq!(
            comparison_csv(&rows),
            "file,max_relative_error,max_absolute_error_small,threshold\na.csv,0.25,0,0.2\n"
        );
        assert!(comparison_text(&rows).contains("0.250000"));
    }
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn specrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specrec"))
        .args(args)
        .env_remove("SPECREC_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = specrec(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = specrec(args);
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn values(p: &Path) -> Vec<f64> {
    specrec::io::read_spectrum(p).unwrap().into_values()
}

#[test]
fn generate_flat_writes_plain_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "flat.csv");
    ok(&[
        "generate",
        "--kind",
        "flat",
        "--p",
        "3",
        "--level",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "1\n1\n1\n");
}

#[test]
fn generate_step_to_stdout() {
    let stdout = ok(&[
        "generate", "--kind", "step", "--p", "4", "--high", "10", "--low", "1", "--n-high", "1",
    ]);
    assert_eq!(stdout, "10\n1\n1\n1\n");
}

#[test]
fn generate_generic_params() {
    let stdout = ok(&[
        "generate", "--kind", "linear", "--p", "3", "--param", "high=5", "--param", "low=3",
    ]);
    assert_eq!(stdout, "5\n4\n3\n");
}

#[test]
fn bad_kind_lists_valid_kinds() {
    let (c, err) = code(&["generate", "--kind", "wobbly", "--p", "3"]);
    assert_eq!(c, 2);
    assert!(err.contains("convex_power") && err.contains("sector_model"), "{err}");
}

#[test]
fn bad_generator_parameter_is_validation_error() {
    let (c, err) = code(&["generate", "--kind", "flat", "--p", "3", "--high", "2"]);
    assert_eq!(c, 2);
    assert!(err.contains("high"), "{err}");
}

#[test]
fn simulate_defective_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let truth = path(&dir, "t.csv");
    ok(&["generate", "--kind", "linear", "--p", "20", "--out", s(&truth)]);
    let a = path(&dir, "a.csv");
    let b = path(&dir, "b.csv");
    ok(&[
        "simulate",
        "--input",
        s(&truth),
        "--n",
        "10",
        "--seed",
        "4",
        "--out",
        s(&a),
    ]);
    ok(&[
        "simulate",
        "--input",
        s(&truth),
        "--n",
        "10",
        "--seed",
        "4",
        "--out",
        s(&b),
    ]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v = values(&a);
    assert_eq!(v.len(), 20);
    assert_eq!(v.iter().filter(|&&x| x == 0.0).count(), 10);
}

#[test]
fn simulate_without_seed_prints_one() {
    let dir = tempfile::tempdir().unwrap();
    let truth = path(&dir, "t.csv");
    ok(&["generate", "--kind", "linear", "--p", "5", "--out", s(&truth)]);
    let out = specrec(&["simulate", "--input", s(&truth), "--n", "10"]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    let seed: u64 = err
        .lines()
        .find_map(|l| l.strip_prefix("seed: "))
        .expect("seed printed")
        .parse()
        .unwrap();
    let again = ok(&[
        "simulate",
        "--input",
        s(&truth),
        "--n",
        "10",
        "--seed",
        &seed.to_string(),
    ]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), again);
}

#[test]
fn simulate_missing_file_names_path() {
    let (c, err) = code(&[
        "simulate",
        "--input",
        "/nonexistent/truth.csv",
        "--n",
        "5",
        "--seed",
        "1",
    ]);
    assert_eq!(c, 4);
    assert!(err.contains("/nonexistent/truth.csv"), "{err}");
}

#[test]
fn simulate_writes_data_and_b_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let truth = path(&dir, "t.csv");
    ok(&["generate", "--kind", "linear", "--p", "6", "--out", s(&truth)]);
    let data = path(&dir, "x.csv");
    let bm = path(&dir, "b.csv");
    let sample = ok(&[
        "simulate",
        "--input",
        s(&truth),
        "--n",
        "12",
        "--seed",
        "3",
        "--data-out",
        s(&data),
        "--b-out",
        s(&bm),
        "--replicates",
        "4",
    ]);
    let from_data = ok(&["simulate", "--from-data", s(&data)]);
    assert_eq!(sample, from_data);
    let (b, side) = specrec::io::read_b_matrix(&bm).unwrap();
    assert_eq!(b.dim(), 6);
    let side = side.unwrap();
    assert_eq!((side.replicates, side.n, side.p), (4, Some(12), 6));
}

#[test]
fn recover_asymptotic_hand_example() {
    let dir = tempfile::tempdir().unwrap();
    let input = path(&dir, "s.csv");
    std::fs::write(&input, "3\n1\n").unwrap();
    let out = ok(&[
        "recover",
        "--input",
        s(&input),
        "--n",
        "10",
        "--method",
        "asymptotic",
        "--sign",
        "expanding",
    ]);
    let v: Vec<f64> = out.lines().map(|l| l.parse().unwrap()).collect();
    assert!((v[0] - 3.0 / 0.95).abs() < 1e-12);
    assert!((v[1] - 1.0 / 1.15).abs() < 1e-12);
    let out = ok(&["recover", "--input", s(&input), "--n", "10", "--method", "asymptotic"]);
    let v: Vec<f64> = out.lines().map(|l| l.parse().unwrap()).collect();
    assert!((v[0] - 3.0 / 1.05).abs() < 1e-12);
    assert!((v[1] - 1.0 / 0.85).abs() < 1e-12);
}

#[test]
fn recover_rejects_zero_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let input = path(&dir, "s.csv");
    std::fs::write(&input, "3\n1\n").unwrap();
    let (c, _) = code(&["recover", "--input", s(&input), "--n", "10", "--max-iter", "0"]);
    assert_eq!(c, 2);
}

#[test]
fn scaled_factor_one_equals_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let truth = path(&dir, "t.csv");
    let sample = path(&dir, "s.csv");
    ok(&["generate", "--kind", "convex_power", "--p", "15", "--out", s(&truth)]);
    ok(&[
        "simulate",
        "--input",
        s(&truth),
        "--n",
        "30",
        "--seed",
        "1",
        "--out",
        s(&sample),
    ]);
    let common = [
        "--input",
        s(&sample),
        "--n",
        "30",
        "--seed",
        "9",
        "--max-iter",
        "3",
        "--replicates",
        "5",
    ];
    let mut fp = vec!["recover", "--method", "fixedpoint"];
    fp.extend(common);
    let mut sc = vec!["recover", "--method", "scaled", "--factor", "1"];
    sc.extend(common);
    assert_eq!(ok(&fp), ok(&sc));
}

#[test]
fn recover_writes_report_next_to_output() {
    let dir = tempfile::tempdir().unwrap();
    let truth = path(&dir, "t.csv");
    let sample = path(&dir, "s.csv");
    let out = path(&dir, "r.csv");
    ok(&["generate", "--kind", "linear", "--p", "8", "--out", s(&truth)]);
    ok(&[
        "simulate",
        "--input",
        s(&truth),
        "--n",
        "32",
        "--seed",
        "1",
        "--out",
        s(&sample),
    ]);
    ok(&[
        "recover",
        "--input",
        s(&sample),
        "--n",
        "32",
        "--seed",
        "2",
        "--max-iter",
        "2",
        "--replicates",
        "3",
        "--truth",
        s(&truth),
        "--no-trace",
        "--out",
        s(&out),
    ]);
    let report = specrec::io::read_report(path(&dir, "r.csv.json")).unwrap();
    assert!(report.error.is_some());
    assert!(report.fixed_point.unwrap().trace.is_none());
    assert_eq!(report.recovered.into_values(), values(&out));
}

#[test]
fn config_file_supplies_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(&dir, "gen.conf");
    std::fs::write(&cfg, "# defaults\nkind = flat\np = 2\nlevel = 4\n").unwrap();
    assert_eq!(ok(&["--config", s(&cfg), "generate"]), "4\n4\n");
    assert_eq!(ok(&["--config", s(&cfg), "generate", "--level", "7"]), "7\n7\n");
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let sample = path(&dir, "s.csv");
    ok(&["generate", "--kind", "convex_power", "--p", "12", "--out", s(&sample)]);
    let args = [
        "recover",
        "--input",
        s(&sample),
        "--n",
        "24",
        "--seed",
        "5",
        "--max-iter",
        "2",
        "--replicates",
        "9",
    ];
    let one = ok(&[&["--threads", "1"], &args[..]].concat());
    let four = ok(&[&["--threads", "4"], &args[..]].concat());
    assert_eq!(one, four);
    let env = Command::new(env!("CARGO_BIN_EXE_specrec"))
        .args(["--threads", "1"])
        .args(args)
        .env("SPECREC_THREADS", "3")
        .output()
        .unwrap();
    assert!(env.status.success());
    assert_eq!(String::from_utf8(env.stdout).unwrap(), one);
    let bad = Command::new(env!("CARGO_BIN_EXE_specrec"))
        .args(args)
        .env("SPECREC_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn compare_identical_and_mismatched() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(&dir, "a.csv");
    let b = path(&dir, "b.csv");
    let table = path(&dir, "table.csv");
    std::fs::write(&a, "2\n1\n").unwrap();
    std::fs::write(&b, "2\n1\n0.5\n").unwrap();
    let text = ok(&["compare", "--truth", s(&a), s(&a), "--out", s(&table)]);
    assert!(text.contains("0.000000"));
    let csv = std::fs::read_to_string(&table).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",0,0,0.2"), "{csv}");
    let (c, _) = code(&["compare", "--truth", s(&a), s(&b)]);
    assert_eq!(c, 2);
}

#[test]
fn mp_table_endpoints() {
    let out = ok(&["mp", "--ratio", "1", "--grid", "5"]);
    let rows: Vec<Vec<f64>> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[4][0], 4.0);
    assert!((rows[4][2] - 1.0).abs() < 1e-9);
    let (c, _) = code(&["mp", "--ratio", "1.5"]);
    assert_eq!(c, 2);
}

#[test]
fn ks_of_identity_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let truth = path(&dir, "t.csv");
    let sample = path(&dir, "s.csv");
    ok(&["generate", "--kind", "flat", "--p", "200", "--out", s(&truth)]);
    ok(&[
        "simulate",
        "--input",
        s(&truth),
        "--n",
        "800",
        "--seed",
        "11",
        "--out",
        s(&sample),
    ]);
    let d: f64 = ok(&["ks", "--input", s(&sample), "--ratio", "0.25"])
        .trim()
        .parse()
        .unwrap();
    assert!(d <= 0.05, "{d}");
    let d2: f64 = ok(&["ks", "--input", s(&sample), "--n", "800"]).trim().parse().unwrap();
    assert_eq!(d, d2);
}

#[test]
fn plot_modes() {
    let dir = tempfile::tempdir().unwrap();
    let long = path(&dir, "long.csv");
    let short = path(&dir, "short.csv");
    let empty = path(&dir, "empty.csv");
    let svg = path(&dir, "p.svg");
    ok(&["generate", "--kind", "linear", "--p", "800", "--out", s(&long)]);
    ok(&["generate", "--kind", "linear", "--p", "400", "--out", s(&short)]);
    std::fs::write(&empty, "").unwrap();

    ok(&["plot", s(&long), "--out", s(&svg)]);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 1);
    assert!(text.contains(">index<") && text.contains(">eigenvalue<"));

    ok(&["plot", s(&long), s(&short), "--rescaled", "--out", s(&svg)]);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);

    let (c, _) = code(&["plot", s(&empty), "--out", s(&svg)]);
    assert_ne!(c, 0);
}

#[test]
fn experiment_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(&dir, "exp.json");
    let out_dir = path(&dir, "out");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"source": {{"generator": {{"kind": "linear", "p": 10}}}}, "n": 40,
                "methods": ["asymptotic", "fixed_point"], "seeds": [1, 2],
                "fixed_point": {{"max_iterations": 2, "replicates_per_iteration": 3, "convergence_tol": 0.001,
                                 "init": "asymptotic", "seed": {{"root_seed": 0}},
                                 "schedule": {{"kind": "constant"}}, "evaluate_residual": false,
                                 "asymptotic": {{"denominator_guard": 1e-8, "neighbor_exclusion": 3,
                                                "clamp_floor": 0.0, "sign": "contracting"}}}},
                "out_dir": {:?}, "plot": true}}"#,
            s(&out_dir)
        ),
    )
    .unwrap();
    let table = ok(&["experiment", s(&cfg)]);
    assert_eq!(table.lines().count(), 5);
    assert!(out_dir.join("fixed_point_2.json").exists());
    assert!(out_dir.join("plot_1.svg").exists());
}

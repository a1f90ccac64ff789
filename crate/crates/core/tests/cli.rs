use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_optosense"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Non-comment lines: the column header and data rows.
fn body(text: &str) -> Vec<String> {
    text.lines().filter(|l| !l.starts_with('#')).map(str::to_owned).collect()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    body(text)
        .into_iter()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

const MINIMAL: &str = r#"
[system]
kappa = 0.1
coupling = 0.02

[[bath]]
kind = "markovian"
gamma_m = 0.0031415926535897933
temperature = 0.0

[grid]
start = 0.9
stop = 1.1
points = 201

[spectrum]
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn spectrum_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", MINIMAL);
    let out = dir.path().join("run.csv");
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with(&format!("# optosense {}\n", env!("CARGO_PKG_VERSION"))));
    // Defaults are recorded in the metadata.
    assert!(text.contains("#   detuning = 1.0"), "{text}");
    assert!(text.contains("#   theta = 0.0"), "{text}");
    let b = body(&text);
    assert_eq!(b[0], "bath,omega,chi_xm_re,chi_xm_im,chi_ratio,s_add,s_xixi");
    let r = rows(&text);
    assert_eq!(r.len(), 201);
    assert!(r.iter().all(|row| row.len() == 7 && row[0] == "markovian"));
    // 17 significant digits.
    assert_eq!(r[0][1], "9.0000000000000002e-1");
}

#[test]
fn stdout_when_no_output_is_given() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", MINIMAL);
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(rows(&String::from_utf8_lossy(&o.stdout)).len(), 201);
}

#[test]
fn negative_kappa_is_reported_by_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &MINIMAL.replace("kappa = 0.1", "kappa = -1"));
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("system.kappa must be > 0"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_reported_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &MINIMAL.replace("kappa = 0.1", "kapa = 0.1"));
    let o = run(&["spectrum", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("kapa") && e.contains("line"), "{e}");
}

#[test]
fn subcommand_must_match_job() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", MINIMAL);
    let o = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("spectrum job"), "{}", stderr(&o));
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("coupling_sweep.toml");
    let mut bodies = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = dir.path().join(format!("coupling_sweep_{i}.csv"));
        let o = run(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        bodies.push(body(&fs::read_to_string(&out).unwrap()));
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[1], bodies[2]);
}

/// Runs a bundled config into a temporary directory and returns its tables.
fn run_bundled(job: &str, name: &str) -> (Output, Vec<String>) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join(format!("{name}.csv"));
    let cfg = configs_dir().join(format!("{name}.toml"));
    let o = run(&[job, "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    let mut tables = vec![fs::read_to_string(&out).unwrap_or_default()];
    if let Ok(s) = fs::read_to_string(dir.path().join(format!("{name}.summary.csv"))) {
        tables.push(s);
    }
    (o, tables)
}

fn column_by_bath(text: &str, col: usize) -> HashMap<String, Vec<f64>> {
    let mut m: HashMap<String, Vec<f64>> = HashMap::new();
    for r in rows(text) {
        m.entry(r[0].clone()).or_default().push(r[col].parse().unwrap_or(f64::NAN));
    }
    m
}

fn max(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn sensitivity_ratio_recipe_orders_ohmic_family() {
    let (o, t) = run_bundled("spectrum", "sensitivity_ratio");
    assert!(o.status.success(), "{}", stderr(&o));
    let ratio = column_by_bath(&t[0], 4);
    let (sub, ohm, sup) = (max(&ratio["sub-ohmic"]), max(&ratio["ohmic"]), max(&ratio["super-ohmic"]));
    assert!(sup > ohm && ohm > sub, "{sub} {ohm} {sup}");
}

#[test]
fn coupling_sweep_recipe_has_interior_minimum() {
    let (o, t) = run_bundled("sweep", "coupling_sweep");
    assert!(o.status.success(), "{}", stderr(&o));
    let s = &column_by_bath(&t[0], 3)["markovian"];
    let i = s
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert!(i > 0 && i + 1 < s.len(), "minimum at index {i} of {}", s.len());
}

#[test]
fn remaining_recipes_run() {
    for (job, name) in [("sweep", "kappa_sweep"), ("spectrum", "added_noise")] {
        let (o, t) = run_bundled(job, name);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        assert!(rows(&t[0]).len() > 100, "{name}");
    }
}

#[test]
fn sense_recipe_writes_summary() {
    let (o, t) = run_bundled("sense", "mass_sensing");
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(body(&t[0])[0], "bath,n,omega,s_out");
    assert_eq!(body(&t[1])[0], "bath,n,i_out,omega_eff");
    let i_out = column_by_bath(&t[1], 2);
    assert_eq!(i_out["super-ohmic"].len(), 6);
    assert!(t[1].contains("# fit super-ohmic: slope = "));
}

#[test]
fn validate_recipe_passes() {
    let (o, t) = run_bundled("validate", "validate");
    assert!(o.status.success(), "{}", stderr(&o));
    let e = stderr(&o);
    let line = e.lines().find(|l| l.starts_with("max relative deviation:")).expect("deviation printed");
    let dev: f64 = line.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(dev < 1e-2, "{line}");
    assert_eq!(rows(&t[0]).len(), 20);
}

#[test]
fn validate_fails_loudly_past_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    // A window too short to settle cannot meet a tight tolerance.
    let text = MINIMAL.replace("[spectrum]", "[validate]\nt_final = 400.0\nsettle_fraction = 0.5\ntolerance = 1e-6");
    let cfg = write_config(dir.path(), "run.toml", &text);
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("FAIL"));
}

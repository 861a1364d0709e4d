//! End-to-end checks of the `ivci` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ivci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ivci")).args(args).env_remove("IVCI_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn col(csv: &str, name: &str) -> usize {
    csv.lines().next().unwrap().split(',').position(|h| h == name).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn config(tau: f64, psi: &str, reps: u64) -> String {
    format!(
        "[experiment]\nalpha = 0.05\nreps = {reps}\nseed = 11\nn = [2000]\npsi = [{psi}]\nci = [\"ci1\", \"ci2\"]\n\n\
         [dgp]\ntheta_l = 0\nmu = 1\nsigma_l = 1\nsigma_u = 1\nrho = 1\ntau = {tau}\n"
    )
}

#[test]
fn critval_symmetric_case() {
    let o = ivci(&["critval", "--ci", "1", "--alpha", "0.05", "--delta", "0", "--sigma-l", "1", "--sigma-u", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let c: f64 = rows(&out)[0][col(&out, "c_l")].parse().unwrap();
    assert!((c - 1.959964).abs() < 5e-7);
}

#[test]
fn critval_infinite_delta() {
    let o = ivci(&[
        "critval", "--ci", "2", "--alpha", "0.05", "--delta", "inf", "--sigma-l", "1", "--sigma-u", "1", "--rho", "0.3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let row = &rows(&out)[0];
    for name in ["c_l", "c_u"] {
        let c: f64 = row[col(&out, name)].parse().unwrap();
        assert!((c - 1.644854).abs() < 5e-7);
    }
}

#[test]
fn critval_rejects_alpha() {
    let o = ivci(&["critval", "--ci", "1", "--alpha", "0.6", "--delta", "0", "--sigma-l", "1", "--sigma-u", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha must lie in (0, 0.5)"));
    assert!(o.stdout.is_empty());
}

#[test]
fn critval_csv_has_lf_endings_and_fixed_header() {
    let o = ivci(&[
        "critval", "--ci", "2", "--alpha", "0.1", "--delta", "0.5", "--sigma-l", "1", "--sigma-u", "2", "--rho", "0.3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(!out.contains('\r'));
    assert_eq!(out.lines().next().unwrap(), ivci::cli::CRITVAL_HEADER);
    assert_eq!(out.lines().count(), 2);
}

#[test]
fn limit_examples() {
    let o = ivci(&["limit", "--fn", "h", "--sigma", "1", "--mu", "0", "--psi", "0", "--alpha", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(rows(&stdout(&o))[0].last().unwrap(), "0.95");

    let o = ivci(&[
        "limit", "--fn", "w", "--mu", "inf", "--psi", "0", "--sigma-l", "1", "--sigma-u", "1", "--rho", "0.7", "--alpha",
        "0.05",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(rows(&stdout(&o))[0].last().unwrap(), "0.95");

    let o = ivci(&["limit", "--fn", "h-scan", "--alpha", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1, "no violation rows expected");
}

#[test]
fn limit_grid_and_unreachable_regime() {
    let o = ivci(&["limit", "--fn", "h", "--sigma", "0.5:0.5:2", "--mu", "0,1", "--psi", "1", "--alpha", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(rows(&stdout(&o)).len(), 8);

    let o = ivci(&[
        "limit", "--fn", "w", "--mu", "1", "--psi", "0", "--sigma-l", "1", "--sigma-u", "2", "--rho", "1", "--alpha", "0.05",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("finite mu requires rho = 1"));
}

#[test]
fn power_dominance_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dominance.toml", &config(0.5, "0, 0.5, 1, 2, 4", 20_000));
    let plot = dir.path().join("plot.svg");
    let o = ivci(&["power", "--config", &cfg, "--plot", plot.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next().unwrap(), ivci::cli::POWER_HEADER);
    let (d, se) = (col(&out, "diff"), col(&out, "mc_se"));
    let table = rows(&out);
    assert_eq!(table.len(), 10);
    for row in &table {
        let (diff, se): (f64, f64) = (row[d].parse().unwrap(), row[se].parse().unwrap());
        assert!(diff <= 3.0 * se, "{row:?}");
    }
    assert!(fs::read_to_string(&plot).unwrap().starts_with("<svg"));
}

#[test]
fn power_identical_channels_without_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tau0.toml", &config(0.0, "0, 1, 2", 5_000));
    let o = ivci(&["power", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let (d, se) = (col(&out, "diff"), col(&out, "mc_se"));
    for row in rows(&out) {
        let (diff, se): (f64, f64) = (row[d].parse().unwrap(), row[se].parse().unwrap());
        assert!(diff.abs() <= 3.0 * se, "{row:?}");
    }
}

#[test]
fn power_boundary_only_grid_has_nominal_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "psi0.toml", &config(0.5, "0", 20_000));
    let out_path = dir.path().join("out.csv");
    let o = ivci(&["power", "--config", &cfg, "--out", out_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let out = fs::read_to_string(&out_path).unwrap();
    let se_col = col(&out, "mc_se");
    for row in rows(&out) {
        let se: f64 = row[se_col].parse().unwrap();
        for name in ["cover_e", "cover_i"] {
            let c: f64 = row[col(&out, name)].parse().unwrap();
            assert!((c - 0.95).abs() <= 3.0 * se + 0.005, "{name} {row:?}");
        }
    }
}

#[test]
fn power_output_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "det.toml", &config(1.0, "0, 1", 3_000));
    let a = ivci(&["power", "--config", &cfg, "--threads", "1"]);
    let b = Command::new(env!("CARGO_BIN_EXE_ivci"))
        .args(["power", "--config", &cfg])
        .env("IVCI_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn power_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = ivci(&["power", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let bad = config(0.5, "0", 2_000).replace("[dgp]\n", "[dgp]\ncolour = 3\n");
    let cfg = write_config(dir.path(), "unknown.toml", &bad);
    let o = ivci(&["power", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));

    let low = config(0.5, "0", 10);
    let cfg = write_config(dir.path(), "low.toml", &low);
    let o = ivci(&["power", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
}

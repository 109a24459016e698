use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use maxwell_vie::driver::{read_field_dump, run, sweep, ExperimentConfig, CSV_HEADER};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_maxwell-vie"));
    c.env("VIE_THREADS", "1");
    c
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn columns(line: &str) -> Vec<String> {
    line.split(',').map(str::to_string).collect()
}

#[test]
fn solve_writes_row_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", "k_over_2pi = 2\n");
    let csv = dir.path().join("out.csv");
    let dump = dir.path().join("field.bin");
    let out = bin()
        .args(["solve", "--config"])
        .arg(&cfg)
        .arg("--dump-fields")
        .arg(&dump)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 2);
    let row = columns(lines[1]);
    assert_eq!(row.len(), 8);
    assert_eq!(&row[..3], ["2", "11", "242"]);

    let field = read_field_dump(&dump).unwrap();
    assert_eq!(field.grid().n(), 11);
    let bytes = fs::read(&dump).unwrap();
    assert!(bytes.starts_with(b"VIEFIELD 2 11 "));

    // appending keeps one header
    let again = bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&csv).output().unwrap();
    assert!(again.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().filter(|l| *l == CSV_HEADER).count(), 1);
}

#[test]
fn oracle_agrees_with_gmres() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "o.cfg", "k_over_2pi = 2\n");
    let out = bin().args(["solve", "--oracle", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let dev: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("oracle relative deviation: "))
        .expect("oracle line")
        .parse()
        .unwrap();
    assert!(dev <= 10.0 * 1e-6, "{dev}");
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", "k_over_2pi = 2\nprofile.kind = sphere\n");
    let out = bin().args(["solve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sphere"));
}

#[test]
fn stage_errors_are_tagged() {
    // a large contrast violates the medium constraints
    let cfg = ExperimentConfig::parse("k_over_2pi = 2\nprofile.amplitude_re = 1.0\n").unwrap();
    let err = run(&cfg).unwrap_err().to_string();
    assert!(err.starts_with("medium: "), "{err}");
    let cfg = ExperimentConfig::parse("k_over_2pi = 20\noracle = true\n").unwrap();
    let err = run(&cfg).unwrap_err().to_string();
    assert!(err.starts_with("oracle: "), "{err}");
}

#[test]
fn sweep_records_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_cfg(dir.path(), "g.cfg", "k_over_2pi = 2\nprofile.kind = smoothed_box\n");
    let bad = write_cfg(dir.path(), "b.cfg", "k_over_2pi = 2.5\nmaxiter = 1\n");
    let csv = dir.path().join("s.csv");
    let out = bin()
        .args(["sweep", "--configs"])
        .arg(&good)
        .arg(&bad)
        .arg(&good)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], format!("{CSV_HEADER},error"));
    assert_eq!(lines.len(), 4);
    let rows: Vec<Vec<String>> = lines[1..].iter().map(|l| columns(l)).collect();
    assert_eq!(rows[0][0], "2");
    assert_eq!(rows[1][0], "2.5");
    assert!(rows[1][8].contains("no convergence"));
    assert_eq!(rows[0][8], "");
    // identical configs give identical n_iter and residual columns
    assert_eq!(rows[0][5], rows[2][5]);
    assert_eq!(rows[0][7], rows[2][7]);
}

#[test]
fn sweep_success_has_frozen_header() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_cfg(dir.path(), "a.cfg", "k_over_2pi = 2\n");
    let b = write_cfg(dir.path(), "b.cfg", "k_over_2pi = 3\nprofile.kind = perturbed_box\nprofile.seed = 4\n");
    let csv = dir.path().join("s.csv");
    let out = bin()
        .args(["sweep", "--parallel", "--configs"])
        .arg(&a)
        .arg(&b)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(columns(lines[1])[0], "2");
    assert_eq!(columns(lines[2])[0], "3");
}

#[test]
fn parallel_and_sequential_sweeps_agree() {
    let cfgs: Vec<ExperimentConfig> = ["k_over_2pi = 2", "k_over_2pi = 3\nprofile.kind = smoothed_box"]
        .iter()
        .map(|t| ExperimentConfig::parse(t).unwrap())
        .collect();
    let seq = sweep(&cfgs, false);
    let par = sweep(&cfgs, true);
    assert_eq!(seq.failures, 0);
    for (a, b) in seq.rows.iter().zip(&par.rows) {
        let (a, b) = (a.output.as_ref().unwrap(), b.output.as_ref().unwrap());
        assert_eq!(a.stats.iterations, b.stats.iterations);
        assert_eq!(a.stats.true_rel_res, b.stats.true_rel_res);
        assert_eq!(a.total, b.total);
    }
}

#[test]
fn zero_amplitude_needs_no_iterations() {
    let cfg = ExperimentConfig::parse("k_over_2pi = 2\nprofile.amplitude_re = 0\n").unwrap();
    let out = run(&cfg).unwrap();
    assert!(out.stats.converged);
    assert_eq!(out.stats.iterations, 0);
    assert!(out.scattered.values().iter().all(|v| v.norm() == 0.0));
}

#[test]
fn lens_at_twenty_wavelengths() {
    let cfg = ExperimentConfig::parse("k_over_2pi = 20\nprofile.kind = gaussian_lens\n").unwrap();
    let out = run(&cfg).unwrap();
    assert_eq!(out.grid.n(), 119);
    assert_eq!(out.grid.unknowns(), 2 * 119 * 119);
    assert!(out.stats.iterations <= 8, "{}", out.stats.iterations);
}

#[test]
fn singular_value_and_sparse_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let sv = dir.path().join("sv.txt");
    let coo = dir.path().join("a.coo");
    let cfg = ExperimentConfig::parse(&format!(
        "k_over_2pi = 2\ndump_singular_values = {}\ndump_sparse = {}\n",
        sv.display(),
        coo.display()
    ))
    .unwrap();
    let out = run(&cfg).unwrap();
    assert_eq!(fs::read_to_string(&sv).unwrap().lines().count(), 9);
    let text = fs::read_to_string(&coo).unwrap();
    let head: Vec<usize> = text.lines().next().unwrap()[2..]
        .split(' ')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(head[0], out.grid.unknowns());
    assert_eq!(text.lines().count(), head[2] + 1);
}

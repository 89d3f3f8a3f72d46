use std::path::Path;
use std::process::{Command, Output};

use qdd_core::multi_sensor::ChannelModel;
use qdd_core::optimizer::evaluate_rules;
use qdd_core::sensor::{Prior, SensingModel, SensorRule};
use qdd_runner::output::read_csv;

fn qdd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdd")).args(args).output().expect("binary runs")
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"))
}

fn num(s: &str) -> Option<f64> {
    (!s.is_empty()).then(|| s.parse().expect("numeric cell"))
}

#[test]
fn fig3_ordering_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3.csv");
    let o = qdd(&["--preset", "fig3", "--starts", "6", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read_to_string(&out).unwrap();
    assert!(first.starts_with("# qdd-csv v1 config={"));
    assert!(out.with_extension("summary.txt").exists());

    let t = read_csv(&out).unwrap();
    assert_eq!(t.rows.len(), 39);
    let (sc, u, c, q) = (col(&t.header, "sigma_c"), col(&t.header, "udd_pe"), col(&t.header, "cdd_pe"), col(&t.header, "qdd_pe"));
    let prior = Prior::new(0.7).unwrap();
    let s = SensingModel::new(1.0, 1.5).unwrap();
    for row in &t.rows {
        let sigma_c = num(&row[sc]).unwrap();
        let (udd, cdd, qdd_pe) = (num(&row[u]).unwrap(), num(&row[c]).unwrap(), num(&row[q]).unwrap());
        assert!(qdd_pe <= udd.min(cdd) + 1e-6, "sigma_c {sigma_c}");
        if sigma_c <= 1.9 {
            assert!(cdd < udd, "sigma_c {sigma_c}");
        }
        if sigma_c >= 2.1 {
            assert!(udd < cdd, "sigma_c {sigma_c}");
        }
        let rule = SensorRule::new(
            num(&row[col(&t.header, "qdd_t1")]).unwrap(),
            num(&row[col(&t.header, "qdd_m0_1")]).unwrap(),
            num(&row[col(&t.header, "qdd_m1_1")]).unwrap(),
        )
        .unwrap();
        let again = evaluate_rules(&prior, &[s], &ChannelModel::iid(sigma_c, 1), &[rule], 801).unwrap();
        assert!((again - qdd_pe).abs() < 1e-9, "round trip at sigma_c {sigma_c}: {again} vs {qdd_pe}");
    }
}

#[test]
fn fig8_boundary_claims() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig8.csv");
    let o = qdd(&["--preset", "fig8", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_csv(&out).unwrap();
    let crossings = |regime: &str| -> Vec<(f64, f64)> {
        t.rows
            .iter()
            .filter(|r| r[0] == regime && r[3] == "crossing")
            .map(|r| (num(&r[1]).unwrap(), num(&r[2]).unwrap()))
            .collect()
    };
    let asym = crossings("asymptotic");
    let last = asym.iter().map(|p| p.0).fold(0.0, f64::max);
    assert!(last > 0.7 && last < 0.9, "largest asymptotic crossing at {last}");
    let one = crossings("one_sensor");
    let min = one.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    assert!((1.9..2.3).contains(&min), "one-sensor minimum {min}");
}

#[test]
fn empty_boundary_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("b.csv");
    std::fs::write(&cfg, r#"{"kind": "boundary", "boundary": {"sigma_s": []}}"#).unwrap();
    let o = qdd(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1], "regime,sigma_s,sigma_c_star,status");
}

#[test]
fn config_errors_exit_one_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{\n  \"kind\": \"sweep\",\n  \"sigma_z\": 1.0\n}").unwrap();
    let o = qdd(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sigma_z") && err.contains("line 3"), "{err}");

    std::fs::write(&cfg, r#"{"sweep": {"axis": "sigma_c", "start": 1.0, "stop": 2.0, "step": -0.1}}"#).unwrap();
    let o = qdd(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep"));

    let o = qdd(&["--preset", "fig99"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let o = qdd(&["validate", "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("total:"));
    let t = read_csv(&out).unwrap();
    assert!(t.rows.len() >= 10 && t.rows.iter().all(|r| r[5] == "true"));
}

fn run_preset(dir: &Path, name: &str, extra: &[&str]) -> Vec<std::path::PathBuf> {
    let out = dir.join(format!("{name}.csv"));
    let mut args = vec!["--preset", name, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = qdd(&args);
    assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .filter_map(|l| l.strip_prefix("wrote "))
        .map(std::path::PathBuf::from)
        .collect()
}

#[test]
fn remaining_presets_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_preset(dir.path(), "fig4", &["--starts", "4"]).len(), 1);
    for name in ["fig5", "fig6"] {
        let files = run_preset(dir.path(), name, &["--starts", "2", "--max-evals", "200", "--grid", "101"]);
        let t = read_csv(&files[0]).unwrap();
        assert_eq!(t.rows.len(), 40);
        assert!(t.rows.iter().all(|r| r.last().unwrap() == "ok"));
    }
    let files = run_preset(dir.path(), "fig7", &["--starts", "1", "--max-evals", "60", "--grid", "61"]);
    assert_eq!(files.len(), 3);
    for (f, rho) in files.iter().zip(["0", "0.5", "0.9"]) {
        assert!(f.to_string_lossy().ends_with(&format!("fig7_rho{rho}.csv")), "{}", f.display());
        assert_eq!(read_csv(f).unwrap().rows.len(), 15);
    }
}

#[test]
fn eval_and_chernoff_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let o = qdd(&["eval", "--trials", "20000", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = read_csv(&out).unwrap();
    assert_eq!(t.rows.len(), 3);
    let z = col(&t.header, "mc_z");
    assert!(t.rows.iter().all(|r| num(&r[z]).unwrap().abs() < 5.0));

    let out = dir.path().join("c.csv");
    let o = qdd(&["chernoff", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_csv(&out).unwrap().rows.len(), 40);
}

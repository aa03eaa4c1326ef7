use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn metastab(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metastab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn analyze_double_well() {
    let dir = TempDir::new().unwrap();
    let o = metastab(&["analyze"], &fixture("double_well.toml"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("critical points: 3") && text.contains("edges: 1"), "{text}");
    assert!(text.contains("delta_gap"));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("landscape.json")).unwrap()).unwrap();
    assert_eq!(json["critical_points"].as_array().unwrap().len(), 3);
    assert_eq!(json["graph"]["edges"].as_array().unwrap().len(), 1);
    assert!(json["graph"]["delta_gap"].is_null());
    assert_eq!(json["graph"]["edges"][0]["height"].as_f64().unwrap(), 1.0);
}

/// Minima ordered by the dense-grid oracle: global minimum first, then by
/// decreasing barrier H(s₁ᵢ) − H(mᵢ), with the barrier read off as the
/// maximum of H between the two minima.
fn triple_well_order_oracle() -> Vec<f64> {
    let h = |x: f64| x * x * (x * x - 2.0).powi(2) / 2.0 + 0.2 * x;
    let n = 4 * 4096;
    let xs: Vec<f64> = (0..=n).map(|k| -2.0 + 4.0 * k as f64 / n as f64).collect();
    let hs: Vec<f64> = xs.iter().map(|&x| h(x)).collect();
    let mut minima: Vec<usize> = (1..n).filter(|&k| hs[k] < hs[k - 1] && hs[k] < hs[k + 1]).collect();
    minima.sort_by(|&a, &b| hs[a].total_cmp(&hs[b]));
    let g = minima[0];
    let barrier = |k: usize| {
        let (lo, hi) = (g.min(k), g.max(k));
        hs[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max) - hs[k]
    };
    let mut rest = minima[1..].to_vec();
    rest.sort_by(|&a, &b| barrier(b).total_cmp(&barrier(a)));
    std::iter::once(g).chain(rest).map(|k| xs[k]).collect()
}

#[test]
fn analyze_triple_well_orders_minima() {
    let dir = TempDir::new().unwrap();
    let o = metastab(&["analyze"], &fixture("triple_well.toml"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("landscape.json")).unwrap()).unwrap();
    let minima: Vec<f64> =
        json["graph"]["minima"].as_array().unwrap().iter().map(|m| m["location"][0].as_f64().unwrap()).collect();
    let expect = triple_well_order_oracle();
    assert_eq!(minima.len(), 3);
    for (a, b) in minima.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-3, "{minima:?} vs {expect:?}");
    }
    assert_eq!(json["graph"]["edges"].as_array().unwrap().len(), 3);
    assert!(json["graph"]["delta_gap"].as_f64().unwrap() > 0.0);
    assert_eq!(json["graph"]["ultrametric"], Value::Bool(true));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let path = fixture("malformed.toml");
    let o = metastab(&["constants"], &path, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains(&format!("{}:6:", path.display())), "{err}");

    let bad = dir.path().join("syntax.toml");
    std::fs::write(&bad, "[potential]\nexpr = \"(x1^2 - 1\"\ndim = 1\n").unwrap();
    let o = metastab(&["analyze"], &bad, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("syntax.toml:2:8:"), "{}", stderr(&o));

    let o = metastab(&["constants", "--grid", "1000"], &fixture("double_well.toml"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn constants_sweep_is_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = fixture("double_well.toml");
    let oa = metastab(&["constants"], &cfg, a.path());
    let ob = metastab(&["constants"], &cfg, b.path());
    assert!(oa.status.success(), "{}", stderr(&oa));
    let csv_a = std::fs::read(a.path().join("constants.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.path().join("constants.csv")).unwrap());
    assert_eq!(stdout(&oa).as_bytes(), csv_a.as_slice());
    assert_eq!(oa.stdout, ob.stdout);

    let text = String::from_utf8(csv_a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].ends_with("fd_gap,gap_ratio"));
    let ratios: Vec<f64> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    // ε = 0.2, 0.1, 0.07, 0.05: the oracle ratio approaches 1 from below.
    assert!(ratios.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()), "{ratios:?}");
    assert!((ratios[3] - 1.0).abs() < 0.05);
    // 17 significant digits.
    let first = lines[1].split(',').next().unwrap();
    assert_eq!(first.split('e').next().unwrap().replace('.', "").len(), 17);
}

#[test]
fn no_oracle_flag_keeps_ek_columns() {
    let dir = TempDir::new().unwrap();
    let o = metastab(&["constants", "--no-oracle", "--eps", "0.1,0.05"], &fixture("double_well.toml"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epsilon,inv_rho,inv_alpha_times2,ratio_rho_alpha,dominant_i,dominant_j");
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
}

#[test]
fn three_dimensional_oracle_is_skipped_with_warning() {
    let dir = TempDir::new().unwrap();
    let o = metastab(&["constants"], &fixture("double_well_3d.toml"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    assert!(!stdout(&o).contains("fd_gap"));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn three_dimensional_config_needs_saddles() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("d3.toml");
    std::fs::write(&cfg, "[potential]\nexpr = \"x1^2 + x2^2 + x3^2\"\ndim = 3\n").unwrap();
    let o = metastab(&["analyze"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("d3.toml:3:"), "{}", stderr(&o));
}

#[test]
fn validate_reference_configs() {
    for name in ["double_well.toml", "model_2d.toml"] {
        let dir = TempDir::new().unwrap();
        let o = metastab(&["validate"], &fixture(name), dir.path());
        let text = stdout(&o);
        assert!(o.status.success(), "{name}: {text}{}", stderr(&o));
        for suite in ["means", "discrete", "transport", "lyapunov", "oracle1d"] {
            assert!(text.lines().any(|l| l.starts_with(suite) && l.contains("PASS")), "{text}");
        }
    }
}

#[test]
fn validate_detects_flipped_saddle_eigenvalue() {
    let dir = TempDir::new().unwrap();
    let o = metastab(&["validate", "--filter", "oracle1d"], &fixture("flipped_saddle.toml"), dir.path());
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("oracle1d") && l.contains("FAIL")), "{text}");
    assert!(text.contains("EK/oracle gap ratio"), "{text}");
}

#[test]
fn filter_runs_one_suite() {
    let dir = TempDir::new().unwrap();
    let o = metastab(&["validate", "--filter", "transport"], &fixture("double_well.toml"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let suites: Vec<&str> = text.lines().skip(1).filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(suites, ["transport"]);

    let o = metastab(&["validate", "--filter", "nonsense"], &fixture("double_well.toml"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seeded_validation_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture("double_well.toml");
    let run = |seed: &str| metastab(&["validate", "--filter", "discrete", "--seed", seed], &cfg, dir.path());
    let (a, b, c) = (run("1"), run("1"), run("2"));
    assert_eq!(a.stdout, b.stdout);
    assert!(a.status.success() && c.status.success());
    assert_ne!(a.stdout, c.stdout);
}

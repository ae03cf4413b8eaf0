use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kw(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kw"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("KW_SEED_TOL")
        .output()
        .expect("kw runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_column(path: &Path, col: usize) -> Vec<Option<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().ok())
        .collect()
}

#[test]
fn delay_roots_at_large_speed() {
    let dir = tempfile::tempdir().unwrap();
    let o = kw(&["roots", "--gamma", "9", "--tau", "3", "--model", "discrete", "--c", "1e6"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("roots.json"));
    assert_eq!(r["plus"]["real_negative_count"], 2);
    assert!(r["plus"]["roots"].as_array().unwrap().iter().all(|z| z["re"].as_f64().unwrap() < 0.0));
}

#[test]
fn weak_roots_focus() {
    let dir = tempfile::tempdir().unwrap();
    let o = kw(&["roots", "--gamma", "40", "--tau", "11", "--model", "weak", "--c", "1e6"], dir.path());
    assert!(o.status.success());
    assert_eq!(read_json(&dir.path().join("roots.json"))["plus"]["class"], "focus");
}

#[test]
fn kpp_roots_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    assert!(kw(&["roots", "--model", "kpp", "--c", "2.5"], dir.path()).status.success());
    let r = read_json(&dir.path().join("roots.json"));
    assert!((r["minus"]["lambda"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((r["minus"]["mu"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    // z^2 - 2.5 z - 1
    let z = 0.5 * (2.5 - (6.25f64 + 4.0).sqrt());
    assert!((r["plus"]["dominant_real"].as_f64().unwrap() - z).abs() < 1e-9);
}

#[test]
fn malformed_json_exits_2_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let o = kw(&["roots", "--json", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed JSON"));
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["status"], "input-error");
    assert_eq!(m["command"], "roots");
}

#[test]
fn unknown_json_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"gamma": 40, "taus": 10}"#).unwrap();
    assert_eq!(kw(&["heteroclinic", "--json", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn json_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"gamma": 40, "tau": 10}"#).unwrap();
    let o = kw(&["heteroclinic", "--gamma", "2", "--tau", "0.5", "--json", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["params"]["gamma"], "40");
    assert_eq!(read_json(&dir.path().join("result.json"))["shape"], "non-monotone-non-oscillating");
}

#[test]
fn subcritical_speed_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = kw(&["iterate", "--model", "kpp", "--c", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(read_json(&dir.path().join("manifest.json"))["status"], "input-error");
}

#[test]
fn missing_flag_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(kw(&["heteroclinic", "--gamma", "40"], dir.path()).status.code(), Some(2));
}

#[test]
fn heteroclinic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(kw(&["heteroclinic", "--gamma", "40", "--tau", "10"], dir.path()).status.success());
    let r = read_json(&dir.path().join("result.json"));
    assert_eq!(r["shape"], "non-monotone-non-oscillating");
    assert!(r["phi_max"].as_f64().unwrap() > 1.0);
    let csv = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(csv.starts_with("t,phi\n"));
    // 17 significant digits
    let first = csv.lines().nth(1).unwrap();
    assert!(first.split(',').all(|v| v.split('e').next().unwrap().trim_start_matches('-').len() == 18), "{first}");
    let svg = std::fs::read_to_string(dir.path().join("profile.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(svg.contains("stroke-dasharray"));
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["status"], "ok");
    let files: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in ["profile.csv", "profile.json", "profile.svg", "psi.csv", "result.json"] {
        assert!(files.contains(&f), "{files:?}");
    }
}

#[test]
fn limit_profile_shape() {
    let dir = tempfile::tempdir().unwrap();
    assert!(kw(&["limit-profile", "--gamma", "9", "--tau", "3"], dir.path()).status.success());
    let s = read_json(&dir.path().join("profile.json"));
    assert_eq!(s["shape"], "non-monotone-non-oscillating");
    assert!(s["sup"].as_f64().unwrap() > 1.0);
}

#[test]
fn iterate_kpp_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = kw(&["iterate", "--preset", "kpp", "--c", "2.5"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = read_json(&dir.path().join("run.json"));
    assert_eq!(run["converged"], true);
    assert!(run["equation_residual"].as_f64().unwrap() < 1e-5);
    let phi = csv_column(&dir.path().join("profile.csv"), 1);
    assert!(phi.iter().all(|v| v.unwrap() <= 1.0 + 1e-9));
}

#[test]
fn check_asymptotics_delay() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["check-asymptotics", "--gamma", "9", "--kernel", "discrete", "--tau", "0.3", "--c", "2.5"];
    assert!(kw(&args, dir.path()).status.success());
    let a = read_json(&dir.path().join("asymptotics.json"));
    assert!(a["rel_err_minus"].as_f64().unwrap() < 0.05);
    assert!(a["rel_err_plus"].as_f64().unwrap() < 0.1);
}

#[test]
fn point_outputs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert!(kw(&["heteroclinic", "--gamma", "40", "--tau", "10"], d.path()).status.success());
    }
    for f in ["profile.csv", "psi.csv", "profile.json", "result.json", "profile.svg"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn region_tau_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = kw(&["region", "tau-sharp", "--gamma", "36:40:2", "--jobs", "2"], dir.path());
    assert!(o.status.success());
    let csv = dir.path().join("region.csv");
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("gamma,tau_sharp,tau_star,tau_upper\n"));
    let gamma: Vec<f64> = csv_column(&csv, 0).into_iter().map(Option::unwrap).collect();
    assert_eq!(gamma, vec![36.0, 38.0, 40.0]);
    let sharp = csv_column(&csv, 1);
    let star = csv_column(&csv, 2);
    let t40 = sharp[2].unwrap();
    assert!((8.6..=8.9).contains(&t40), "{t40}");
    for (a, b) in sharp.iter().zip(&star) {
        assert!(b.unwrap() >= a.unwrap() - 0.01);
    }
    let svg = std::fs::read_to_string(dir.path().join("region.svg")).unwrap();
    assert!(svg.matches("<polyline").count() >= 3);
}

#[test]
fn region_zeta_gaps() {
    let dir = tempfile::tempdir().unwrap();
    assert!(kw(&["region", "zeta", "--gamma", "1:10:1"], dir.path()).status.success());
    let csv = dir.path().join("region.csv");
    let lower = csv_column(&csv, 1);
    let upper: Vec<f64> = csv_column(&csv, 2).into_iter().map(Option::unwrap).collect();
    assert_eq!(lower.len(), 10);
    assert!(lower[0].is_none());
    assert!(lower[8].is_some());
    for (l, u) in lower.iter().zip(&upper) {
        if let Some(l) = l {
            assert!(l <= u);
        }
    }
}

#[test]
fn bad_range_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(kw(&["region", "zeta", "--gamma", "10:1:1"], dir.path()).status.code(), Some(2));
}

#[test]
fn seed_tolerance_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kw"))
        .args(["zeta", "--gamma", "9", "--tau", "3", "--out"])
        .arg(dir.path())
        .env("KW_SEED_TOL", "1e-7")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(read_json(&dir.path().join("manifest.json"))["params"]["tol"], 1e-7);
    assert!(read_json(&dir.path().join("zeta.json"))["zeta"].as_f64().unwrap() > 1.0);
}

#[test]
fn table_kernel_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("n.csv");
    std::fs::write(&table, "s,density\n-3,0\n-2,1\n-1,0\n").unwrap();
    let spec = format!("table:{}", table.display());
    let o = kw(&["iterate", "--model", "kpp", "--kernel", &spec, "--c", "3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&dir.path().join("run.json"))["bound"]["branch"], "advanced-kernel");
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn psimix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psimix"))
        .args(args)
        .output()
        .expect("spawn psimix")
}

fn study_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/study.json")
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("cfg.json");
    fs::write(
        &path,
        r#"{"schema":"psimix-experiment/1",
            "copulas":[{"name":"fgm","copula":{"family":"fgm","theta":0.4}},
                       {"name":"frechet","copula":{"family":"frechet","theta":0.6}},
                       {"name":"mardia","copula":{"family":"mardia","a":0.3,"b":0.3}},
                       {"name":"fold","copula":{"family":"numeric_fold",
                           "left":{"family":"m"},"right":{"family":"amh","theta":0.5}}}],
            "marginal":{"kind":"normal","mu":0.0,"sigma":1.0},
            "sizes":[100],
            "perturbations":[{"name":"fgm_m","base":"fgm","kind":"m","alpha":0.7}],
            "seed":42}"#,
    )
    .unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_chain_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = psimix(&["--config", s(&cfg), "--out", s(dir.path()), "simulate", "--copula", "fgm_m", "--n", "500"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("chain_fgm_m.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,u,y");
    assert_eq!(lines.len(), 501);
    assert!(!text.contains('\r'));

    let out = psimix(&["--config", s(&cfg), "--out", s(dir.path()), "simulate", "--copula", "fgm", "--n", "1"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("chain_fgm.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn simulate_frechet_copy_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = psimix(&["--config", s(&cfg), "--out", s(dir.path()), "simulate", "--copula", "frechet", "--n", "500"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("chain_frechet.csv")).unwrap();
    let u: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let copies = u.windows(2).filter(|w| w[0] == w[1]).count() as f64 / 499.0;
    // a = 0.288; binomial sd at n = 499 is about 0.02.
    assert!((copies - 0.288).abs() < 0.08, "copy fraction {copies}");
}

#[test]
fn unresolvable_name_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = psimix(&["--config", s(&cfg), "--out", s(dir.path()), "simulate", "--copula", "nope", "--n", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn unsupported_sampling_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = psimix(&["--config", s(&cfg), "--out", s(dir.path()), "simulate", "--copula", "fold", "--n", "5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn mixing_fgm_matches_closed_form_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = psimix(&[
        "--config", s(&cfg), "--out", s(dir.path()), "mixing", "--copula", "fgm", "--n-max", "4", "--resolution", "128",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("mixing_fgm.json")).unwrap()).unwrap();
    let lags = report["lags"].as_array().unwrap();
    assert_eq!(lags.len(), 4);
    for lag in lags {
        let n = lag["n"].as_u64().unwrap() as i32;
        let d = 3.0 * (0.4f64 / 3.0).powi(n);
        let lo = lag["psi_prime_lower"].as_f64().unwrap();
        let hi = lag["psi_star_upper"].as_f64().unwrap();
        assert!(lo <= 1.0 - d + 1e-12 && lo > 1.0 - d - 1e-3, "n={n} lower {lo}");
        assert!(hi >= 1.0 + d - 1e-12 && hi < 1.0 + d + 1e-3, "n={n} upper {hi}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PsiMixing"));
}

#[test]
fn mixing_mardia_reports_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = psimix(&[
        "--config", s(&cfg), "--out", s(dir.path()), "mixing", "--copula", "mardia", "--n-max", "2", "--resolution", "64",
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("mixing_mardia.json")).unwrap();
    assert!(text.contains("NotPsiStarMixing"));
    assert!(text.contains("\"+inf\""));
}

#[test]
fn mixing_independence_inline_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = psimix(&["--out", s(dir.path()), "mixing", "--copula", r#"{"family":"independence"}"#, "--n-max", "1", "--resolution", "16"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("verdict: PsiMixing"));
}

#[test]
fn table4_has_sixteen_rows_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = study_config();
    for dir in [&a, &b] {
        let out = psimix(&["--config", s(&cfg), "--out", s(dir.path()), "--workers", "2", "table4"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ta = fs::read(a.path().join("table4.csv")).unwrap();
    let tb = fs::read(b.path().join("table4.csv")).unwrap();
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert_eq!(text.lines().count(), 17);
    assert!(text.lines().next().unwrap().ends_with("coverage"));
    for line in text.lines().skip(1).filter(|l| l.split(',').nth(1) == Some("20000")) {
        let f: Vec<f64> = line.split(',').skip(6).take(2).map(|x| x.parse().unwrap()).collect();
        assert!(f[0] < 30.0 && 30.0 < f[1], "{line}");
    }
}

#[test]
fn figure_data_file_sets() {
    let dir = tempfile::tempdir().unwrap();
    let out = psimix(&["--out", s(dir.path()), "--seed", "3", "figure-data", "--figure", "1"]);
    assert!(out.status.success());
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["fig1_fgm_0.6_pi_0.4_surface.csv", "fig1_fgm_0.6_surface.csv"]);
    let text = fs::read_to_string(dir.path().join("fig1_fgm_0.6_surface.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 101 * 101);

    let out = psimix(&["--out", s(dir.path()), "figure-data", "--figure", "3"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("fig3_frechet_0.6_chain.csv")).unwrap();
    assert_eq!(text.lines().count(), 501);

    let missing = dir.path().join("none");
    let out = psimix(&["--out", s(&missing), "figure-data", "--figure", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!missing.exists());
}

#[test]
fn fold_prints_closed_forms() {
    let out = psimix(&["fold", "--left", r#"{"family":"fgm","theta":0.6}"#, "--right", r#"{"family":"fgm","theta":0.6}"#]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["family"], "fgm");
    assert!((v["theta"].as_f64().unwrap() - 0.12).abs() < 1e-15);

    let out = psimix(&["fold", "--copula", r#"{"family":"w"}"#, "--n", "2"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["family"], "m");

    let out = psimix(&["fold", "--left", r#"{"family":"fgm","theta":0.6}"#]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_reports_axioms() {
    let out = psimix(&["check", "--copula", r#"{"family":"amh","theta":-0.5}"#, "--resolution", "32"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);

    let out = psimix(&["check", "--copula", r#"{"family":"fgm","theta":1.5}"#]);
    assert_eq!(out.status.code(), Some(2));
}

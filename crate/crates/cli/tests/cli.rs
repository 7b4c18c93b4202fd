use std::path::Path;
use std::process::{Command, Output};

fn negcurv(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_negcurv"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["green", "--model", "sphere2"],
        &["green", "--nr", "8"],
        &["green", "--poles", "2,x"],
        &["poisson", "--source", "powerlaw:q=1"],
        &["poisson", "--route", "sideways"],
        &["verify", "--profile", "huge"],
        &["green", "--cache", "sometimes"],
    ];
    for args in cases {
        let out = negcurv(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "colour = 1\n").unwrap();
    let out = negcurv(&["green", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = negcurv(&["green", "--config", "/nonexistent.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let file = dir.path().join("file");
    std::fs::write(&file, "").unwrap();
    let out = negcurv(&["heat"], &file.join("sub"));
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_negcurv"))
        .arg("sweep")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_certificate_exits_with_one_and_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, "[flow]\nt_final = 0.5\nnr = 128\n").unwrap();
    let out = negcurv(&["flow", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = read_json(&dir.path().join("flow.report.json"));
    assert_eq!(report["pass"], false);
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["invariant"].as_str().unwrap())
        .collect();
    assert!(
        failed.iter().any(|i| i.contains("sup |R+1| on B(4)")),
        "{failed:?}"
    );
    let csv = std::fs::read_to_string(dir.path().join("flow.csv")).unwrap();
    assert!(csv.starts_with("t,sup_dev_B2,sup_dev_B4,max_w\n"));
}

#[test]
fn green_reports_per_pole_and_reuses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "green", "--rmax", "6", "--nr", "192", "--poles", "2,3", "--cache", "use",
    ];
    let first = negcurv(&args, dir.path());
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let before = std::fs::read(dir.path().join("green.report.json")).unwrap();
    let entries = std::fs::read_dir(dir.path().join("cache")).unwrap().count();
    assert_eq!(entries, 2);
    let second = Command::new(env!("CARGO_BIN_EXE_negcurv"))
        .args(args)
        .arg("--out")
        .arg(dir.path())
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    let log = String::from_utf8_lossy(&second.stderr);
    assert_eq!(log.matches("cache Hit").count(), 2, "{log}");
    assert_eq!(
        std::fs::read(dir.path().join("green.report.json")).unwrap(),
        before
    );
    let report = read_json(&dir.path().join("green.report.json"));
    for key in ["A", "B", "C0"] {
        assert!(report["details"][key].is_number(), "{key}");
    }
    for pole in ["2", "3"] {
        assert!(dir
            .path()
            .join(format!("green_x{pole}.report.json"))
            .exists());
    }
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["config"]["nr"], 192);
    assert_eq!(manifest["config"]["poles"], serde_json::json!([2.0, 3.0]));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "model = \"perturbed\"\nnr = 64\npoles = \"0,1\"\n").unwrap();
    let out = negcurv(
        &["heat", "--config", cfg.to_str().unwrap(), "--poles", "0.5"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["config"]["model_spec"], "perturbed");
    assert_eq!(manifest["config"]["poles"], serde_json::json!([0.5]));
    let csv = std::fs::read_to_string(dir.path().join("heat.csv")).unwrap();
    assert!(csv.starts_with("pole,t,mass\n"));
}

#[test]
fn poisson_reports_route_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let out = negcurv(
        &[
            "poisson",
            "--source",
            "powerlaw:eps=2",
            "--rmax",
            "64",
            "--nr",
            "512",
            "--route",
            "exhaustion",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_json(&dir.path().join("poisson.report.json"));
    assert!(
        report["details"]["exhaustion_agreement"]["relative"]
            .as_f64()
            .unwrap()
            < 0.02
    );
    assert!(report["details"].get("green-integral_agreement").is_none());
}

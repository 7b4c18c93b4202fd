//! Acceptance criteria 1–14 at the full profile, one PASS/FAIL line each.

use std::process::Command;
use std::time::{Duration, Instant};

use negcurv_cli::cache::KernelCache;
use negcurv_cli::config::Profile;
use negcurv_cli::report::failing;
use negcurv_cli::suite::{Suite, CRITERIA};

/// Wall-clock limits per criterion.
fn runtime_limit(id: u32) -> Option<Duration> {
    match id {
        1 => Some(Duration::from_secs(10)),
        2 | 8 => Some(Duration::from_secs(120)),
        13 => Some(Duration::from_secs(300)),
        _ => None,
    }
}

fn verify_quick(out: &std::path::Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_negcurv"))
        .args(["verify", "--profile", "quick", "--out"])
        .arg(out)
        .env("RUST_LOG", "warn")
        .status()
        .expect("binary runs");
    assert_eq!(status.code(), Some(0), "verify --profile quick failed");
    std::fs::read(out.join("summary.json")).expect("summary.json written")
}

#[test]
fn acceptance() {
    let suite = Suite::new(Profile::Full, KernelCache::disabled()).expect("suite models certify");
    let mut failures = Vec::new();
    for (id, title) in CRITERIA {
        let start = Instant::now();
        let report = suite.run(id);
        let elapsed = start.elapsed();
        let mut notes = Vec::new();
        let mut pass = report.pass;
        if let Some(e) = &report.error {
            notes.push(format!("error: {e}"));
        }
        notes.extend(
            failing(&report.checks)
                .iter()
                .map(|s| format!("failed: {s}")),
        );
        if let Some(limit) = runtime_limit(id) {
            let within = elapsed < limit;
            pass &= within;
            notes.push(format!(
                "runtime {:.1}s < {}s: {within}",
                elapsed.as_secs_f64(),
                limit.as_secs()
            ));
        } else {
            notes.push(format!("runtime {:.1}s", elapsed.as_secs_f64()));
        }
        println!(
            "criterion {id:2} {:<48} {} ({} checks; {})",
            title,
            if pass { "PASS" } else { "FAIL" },
            report.checks.len(),
            notes.join("; ")
        );
        if !pass {
            failures.push(id);
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let a = verify_quick(&dir.path().join("a"));
    let b = verify_quick(&dir.path().join("b"));
    let identical = a == b;
    println!(
        "criterion 14 {:<48} {} (summary.json {} bytes, byte-identical: {identical})",
        "determinism of verify --profile quick",
        if identical { "PASS" } else { "FAIL" },
        a.len()
    );
    if !identical {
        failures.push(14);
    }
    assert!(failures.is_empty(), "failing criteria: {failures:?}");
}

//! End-to-end CLI checks: simulate/ingest round trips, fit smoke runs,
//! manifest guards and the pmf subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn heapctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heapctl"))
        .args(args)
        .output()
        .expect("failed to launch heapctl")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heapctl-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn assert_success(out: &Output, context: &str) {
    assert!(
        out.status.success(),
        "{context} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_write_ingest_round_trip_is_identical() {
    let dir = tmp_dir("roundtrip");
    let out = heapctl(&[
        "simulate",
        "--n-subjects",
        "8",
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_success(&out, "simulate");
    let panel_path = dir.join("panel.csv");
    assert!(panel_path.exists());
    assert!(dir.join("truth.json").exists());

    // Ingest and re-emit: the bytes must be identical.
    let panel = heaplab::io::ingest_csv(&panel_path).unwrap();
    let rewritten = dir.join("panel2.csv");
    heaplab::io::write_panel_csv(&panel, &rewritten).unwrap();
    let original = std::fs::read(&panel_path).unwrap();
    let second = std::fs::read(&rewritten).unwrap();
    assert_eq!(original, second, "round trip changed the file bytes");

    let panel2 = heaplab::io::ingest_csv(&rewritten).unwrap();
    assert_eq!(panel, panel2);
}

#[test]
fn fit_no_heaping_emits_report_and_manifest() {
    let dir = tmp_dir("fit");
    assert_success(
        &heapctl(&[
            "simulate",
            "--n-subjects",
            "6",
            "--seed",
            "11",
            "--out",
            dir.to_str().unwrap(),
        ]),
        "simulate",
    );
    let data = dir.join("panel.csv");
    let run = dir.join("run");
    let out = heapctl(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--variant",
        "no-heaping",
        "--iterations",
        "400",
        "--burn-in",
        "100",
        "--thin",
        "2",
        "--seed",
        "1",
        "--out",
        run.to_str().unwrap(),
    ]);
    assert_success(&out, "fit");
    for f in [
        "chain_0.ndjson",
        "chain_0.meta.json",
        "chain_0.csv",
        "fit_report.json",
        "manifest.json",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("fit_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["variant"], "no-heaping");
    assert!(report["dic"].as_f64().is_some());
    assert!(report["sspe"].as_f64().is_some());

    // Re-running with identical settings resumes cleanly...
    assert_success(
        &heapctl(&[
            "fit",
            "--data",
            data.to_str().unwrap(),
            "--variant",
            "no-heaping",
            "--iterations",
            "400",
            "--burn-in",
            "100",
            "--thin",
            "2",
            "--seed",
            "1",
            "--out",
            run.to_str().unwrap(),
        ]),
        "identical re-run",
    );
    // ...but a changed configuration against the same directory is refused.
    let out = heapctl(&[
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--variant",
        "no-heaping",
        "--iterations",
        "400",
        "--burn-in",
        "100",
        "--thin",
        "2",
        "--seed",
        "2",
        "--out",
        run.to_str().unwrap(),
    ]);
    assert!(!out.status.success(), "config drift must be refused");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("manifest"),
        "expected a manifest error, got: {stderr}"
    );
}

#[test]
fn diagnose_recomputes_the_report_from_persisted_chains() {
    let dir = tmp_dir("diagnose");
    assert_success(
        &heapctl(&[
            "simulate",
            "--n-subjects",
            "5",
            "--seed",
            "7",
            "--out",
            dir.to_str().unwrap(),
        ]),
        "simulate",
    );
    let data = dir.join("panel.csv");
    let run = dir.join("run");
    assert_success(
        &heapctl(&[
            "fit",
            "--data",
            data.to_str().unwrap(),
            "--variant",
            "wh08",
            "--iterations",
            "300",
            "--burn-in",
            "100",
            "--seed",
            "4",
            "--out",
            run.to_str().unwrap(),
        ]),
        "fit wh08",
    );
    let out = heapctl(&[
        "diagnose",
        "--data",
        data.to_str().unwrap(),
        "--run",
        run.to_str().unwrap(),
    ]);
    assert_success(&out, "diagnose");
    assert!(run.join("trace_0.csv").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("DIC"));
    assert!(stdout.contains("gamma[0]"));
}

#[test]
fn multi_chain_fit_writes_per_chain_files() {
    let dir = tmp_dir("chains");
    assert_success(
        &heapctl(&[
            "simulate",
            "--n-subjects",
            "4",
            "--seed",
            "9",
            "--out",
            dir.to_str().unwrap(),
        ]),
        "simulate",
    );
    let run = dir.join("run");
    assert_success(
        &heapctl(&[
            "fit",
            "--data",
            dir.join("panel.csv").to_str().unwrap(),
            "--variant",
            "no-heaping",
            "--iterations",
            "200",
            "--burn-in",
            "50",
            "--chains",
            "2",
            "--seed",
            "3",
            "--out",
            run.to_str().unwrap(),
        ]),
        "fit with two chains",
    );
    assert!(run.join("chain_0.ndjson").exists());
    assert!(run.join("chain_1.ndjson").exists());
    // Independent seeds: the two chains differ.
    let c0 = std::fs::read_to_string(run.join("chain_0.ndjson")).unwrap();
    let c1 = std::fs::read_to_string(run.join("chain_1.ndjson")).unwrap();
    assert_ne!(c0, c1);
}

#[test]
fn pmf_emits_normalized_csv() {
    let out = heapctl(&[
        "pmf",
        "--theta-disp",
        "1",
        "--theta-heap",
        "2.5",
        "--grids",
        "5",
        "--x",
        "33",
    ]);
    assert_success(&out, "pmf");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), "y,probability");
    let mut sum = 0.0f64;
    let mut probs = Vec::new();
    for line in lines {
        let (_, p) = line.split_once(',').unwrap();
        let p: f64 = p.parse().unwrap();
        probs.push(p);
        sum += p;
    }
    assert!((sum - 1.0).abs() < 1e-6, "pmf sums to {sum}");
    // Heaping spikes at the grid points flanking the start state.
    assert!(probs[30] > probs[29] && probs[30] > probs[31]);
    assert!(probs[35] > probs[34] && probs[35] > probs[36]);
}

#[test]
fn gamma_flag_accepts_negative_values() {
    let out = heapctl(&[
        "pmf",
        "--theta-disp",
        "0.5",
        "--theta-heap",
        "1.5",
        "--gamma",
        "1,-5,-10,-20",
        "--grids",
        "5,10,50",
        "--x",
        "14",
        "--max-y",
        "30",
    ]);
    assert_success(&out, "pmf with regimes");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().count() == 32);
}

#[test]
fn bad_inputs_produce_clean_errors() {
    let dir = tmp_dir("bad");
    let bad_csv = dir.join("bad.csv");
    std::fs::write(&bad_csv, "subject_id,time_index,y\na,0,-3\n").unwrap();
    let out = heapctl(&[
        "fit",
        "--data",
        bad_csv.to_str().unwrap(),
        "--variant",
        "no-heaping",
        "--out",
        dir.join("run").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 1"), "stderr: {stderr}");
    assert!(stderr.contains('y'), "stderr: {stderr}");

    let out = heapctl(&["fit", "--data", "nope.csv", "--variant", "bogus", "--out", "x"]);
    assert!(!out.status.success());
}

#[test]
fn path_helpers_do_not_collide() {
    // Guard for the temp-dir helper itself.
    let a = tmp_dir("a");
    let b = tmp_dir("b");
    assert_ne!(Path::new(&a), Path::new(&b));
}

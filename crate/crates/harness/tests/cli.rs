use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn upca(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_upca"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synth_then_pipeline_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&upca(
        &[
            "synth",
            "--m",
            "30",
            "--n",
            "200",
            "--r",
            "3",
            "--outlier-ratio",
            "0.5",
            "--alpha",
            "0.2",
            "--snr-db",
            "40",
            "--seed",
            "4",
            "--out",
            "bundle",
        ],
        d,
    ));
    ok(&upca(&["pipeline", "--input", "bundle", "--out", "run"], d));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("run/metrics.json")).unwrap()).unwrap();
    let err = metrics["rel_error"].as_f64().unwrap();
    assert!(err < 0.05, "{err}");
    assert!(d.join("run/x_hat.txt").exists() && d.join("run/outliers.json").exists());

    ok(&upca(
        &[
            "stage1", "--input", "bundle", "--method", "rsgm", "--out", "s1",
        ],
        d,
    ));
    ok(&upca(
        &[
            "stage2",
            "--input",
            "bundle",
            "--basis",
            "s1/s_hat.txt",
            "--method",
            "l1rr",
            "--out",
            "s2",
        ],
        d,
    ));
    assert!(d.join("s2/metrics.json").exists());
}

#[test]
fn plain_matrix_input_has_no_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&upca(
        &[
            "synth", "--m", "20", "--n", "80", "--r", "2", "--out", "bundle",
        ],
        d,
    ));
    ok(&upca(
        &[
            "pipeline",
            "--input",
            "bundle/x_tilde.txt",
            "--r",
            "2",
            "--out",
            "run",
        ],
        d,
    ));
    assert!(!d.join("run/metrics.json").exists());
    let report = fs::read_to_string(d.join("run/report.json")).unwrap();
    assert!(!report.contains("metrics"));
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = upca(&["pipeline", "--input", "missing", "--r", "2"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));

    fs::write(d.join("bad.txt"), "2 2\n1 2\n3 x\n").unwrap();
    let out = upca(&["pipeline", "--input", "bad.txt", "--r", "1"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn grid_csv_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"{"m": 15, "n": 60, "ranks": [2, 5], "outlier_ratios": [0.2, 0.6],
        "alphas": [0.4], "trials": 3, "record_timing": false, "heatmap": true}"#;
    fs::write(d.join("grid.json"), cfg).unwrap();
    ok(&upca(
        &[
            "phase-transition",
            "--config",
            "grid.json",
            "--jobs",
            "1",
            "--out",
            "a",
        ],
        d,
    ));
    ok(&upca(
        &[
            "phase-transition",
            "--config",
            "grid.json",
            "--jobs",
            "3",
            "--out",
            "b",
        ],
        d,
    ));
    for f in [
        "phase_transition.csv",
        "phase_transition_mean.csv",
        "phase_transition_alpha0.4.pgm",
    ] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let csv = fs::read_to_string(d.join("a/phase_transition.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);

    ok(&upca(
        &[
            "stage2-grid",
            "--config",
            "grid.json",
            "--seed",
            "5",
            "--out",
            "c",
        ],
        d,
    ));
    let csv = fs::read_to_string(d.join("c/stage2_grid.csv")).unwrap();
    assert!(csv.starts_with("r,ratio,alpha,trial,theta_max_deg,wall_ms,status,realized_alpha,rel_error,rel_error_oracle\n"));
}

#[test]
fn theory_report_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&upca(&["theory-check", "--out", "report.json"], d));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../schema/theory_report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(&report)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert_eq!(report["pass"], true);
    let constant = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "rank_minimality_constant")
        .unwrap();
    assert_eq!(constant["expected"], "fail");
    assert_eq!(constant["observed"], "fail");

    ok(&upca(&["theory-check", "--out", "again.json"], d));
    assert_eq!(
        fs::read(d.join("report.json")).unwrap(),
        fs::read(d.join("again.json")).unwrap()
    );
}

#[test]
fn patch_permutation_and_its_inverse() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let pixels: Vec<u8> = (0..16 * 8).map(|i| (i * 7 % 256) as u8).collect();
    let img = upca_harness::pgm::Pgm::new(16, 8, pixels).unwrap();
    img.write(&d.join("in.pgm"), upca_harness::pgm::PgmFormat::Raw)
        .unwrap();
    ok(&upca(
        &[
            "patch-permute",
            "--input",
            "in.pgm",
            "--patch",
            "4x4",
            "--alpha",
            "0.5",
            "--seed",
            "2",
            "--perm-out",
            "p.csv",
            "--out",
            "moved.pgm",
        ],
        d,
    ));
    assert_ne!(
        fs::read(d.join("moved.pgm")).unwrap(),
        fs::read(d.join("in.pgm")).unwrap()
    );
    ok(&upca(
        &[
            "patch-permute",
            "--input",
            "moved.pgm",
            "--patch",
            "4x4",
            "--perm",
            "p.csv",
            "--inverse",
            "--out",
            "back.pgm",
        ],
        d,
    ));
    assert_eq!(
        fs::read(d.join("back.pgm")).unwrap(),
        fs::read(d.join("in.pgm")).unwrap()
    );
    ok(&upca(
        &[
            "patch-permute",
            "--input",
            "in.pgm",
            "--patch",
            "4x4",
            "--alpha",
            "0",
            "--out",
            "same.pgm",
        ],
        d,
    ));
    assert_eq!(
        fs::read(d.join("same.pgm")).unwrap(),
        fs::read(d.join("in.pgm")).unwrap()
    );
    let out = upca(&["patch-permute", "--input", "in.pgm", "--patch", "5x4"], d);
    assert!(!out.status.success());
}

#[test]
fn synthetic_image_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&upca(&["image-pipeline", "--synthetic", "--out", "img"], d));
    assert_eq!(fs::read_dir(d.join("img/restored")).unwrap().count(), 64);
    ok(&upca(
        &[
            "image-pipeline",
            "--input",
            "img/corrupted",
            "--truth",
            "img/truth",
            "--out",
            "again",
        ],
        d,
    ));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("again/report.json")).unwrap()).unwrap();
    assert!(report["rel_error"].as_f64().unwrap() <= 0.05);
}

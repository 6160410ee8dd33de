//! End-to-end tests of the installed binary: the full workflow, output file
//! contract, exit codes, error JSON, and rerun determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gplcp")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn gplcp")
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "gplcp {:?} failed\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

fn read_json(path: PathBuf) -> serde_json::Value {
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

/// Generates a small training volume and a fixed-hyperparameter model.
fn setup_model(dir: &Path) {
    run_ok(dir, &["gen-tangle", "--dims", "12,12,12", "--out", "tangle"]);
    run_ok(
        dir,
        &[
            "fit",
            "--in",
            "tangle",
            "--inducing",
            "24",
            "--lengthscale",
            "13.0",
            "--variance",
            "600.0",
            "--noise",
            "0.4",
            "--out",
            "model.json",
        ],
    );
}

#[test]
fn full_workflow_produces_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let gen = run_ok(dir, &["gen-tangle", "--dims", "12,12,12", "--out", "tangle"]);
    assert!(
        String::from_utf8_lossy(&gen.stderr).contains("\"subcommand\""),
        "config echo missing from stderr"
    );
    for name in ["tangle.json", "tangle.raw", "tangle.provenance.json"] {
        assert!(dir.join(name).exists(), "missing {name}");
    }

    let fit = run_ok(
        dir,
        &[
            "fit", "--in", "tangle", "--inducing", "24", "--lengthscale", "13.0",
            "--variance", "600.0", "--noise", "0.4", "--out", "model.json",
        ],
    );
    assert!(
        String::from_utf8_lossy(&fit.stdout).contains("PSNR"),
        "fit must report reconstruction PSNR"
    );
    assert!(dir.join("model.json").exists());

    run_ok(
        dir,
        &[
            "predict-mean", "--model", "model.json", "--dims", "12,12,12",
            "--out", "mean", "--vtk", "mean.vtk",
        ],
    );
    let vtk = std::fs::read_to_string(dir.join("mean.vtk")).unwrap();
    assert!(vtk.contains("STRUCTURED_POINTS") && vtk.contains("POINT_DATA"));

    let adaptive = run_ok(
        dir,
        &[
            "lcp-adaptive", "--model", "model.json", "--iso", "-0.59",
            "--dims", "12,12,12", "--seed", "5", "--out", "lcp_a",
            "--levels-out", "levels", "--vtk", "lcp_a.vtk",
        ],
    );
    assert!(String::from_utf8_lossy(&adaptive.stdout).contains("octree:"));
    for name in [
        "lcp_a.json",
        "lcp_a.raw",
        "lcp_a.stats.json",
        "lcp_a.provenance.json",
        "lcp_a.vtk",
        "levels.json",
        "levels.raw",
    ] {
        assert!(dir.join(name).exists(), "missing {name}");
    }
    let levels_sidecar = read_json(dir.join("levels.json"));
    assert_eq!(levels_sidecar["dtype"], "u8");
    assert_eq!(levels_sidecar["kind"], "cell");
    let lcp_sidecar = read_json(dir.join("lcp_a.json"));
    assert_eq!(lcp_sidecar["dtype"], "f32le");
    assert_eq!(lcp_sidecar["kind"], "cell");
    assert_eq!(lcp_sidecar["dims"], serde_json::json!([12, 12, 12]));

    let prov = read_json(dir.join("lcp_a.provenance.json"));
    assert_eq!(prov["tool"], "gplcp");
    assert_eq!(prov["subcommand"], "lcp-adaptive");
    assert_eq!(prov["seed"], 5);
    let sha = prov["model_sha256"].as_str().unwrap();
    assert_eq!(sha.len(), 64);
    assert!(sha.chars().all(|c| c.is_ascii_hexdigit()));

    run_ok(
        dir,
        &[
            "lcp-dense", "--model", "model.json", "--iso", "-0.59",
            "--dims", "12,12,12", "--seed", "5", "--out", "lcp_d",
        ],
    );

    run_ok(
        dir,
        &[
            "compare", "--truth", "lcp_d", "--test", "lcp_a", "--out", "report.json",
            "--truth-stats", "lcp_d.stats.json", "--test-stats", "lcp_a.stats.json",
        ],
    );
    let report = read_json(dir.join("report.json"));
    // Matched seeds: differences only in pruned cells with near-zero truth.
    assert!(report["rmse"].as_f64().unwrap() <= 0.02, "rmse {}", report["rmse"]);
    assert!(report["max_abs_error"].as_f64().unwrap() <= 0.02);
    assert!(report["speedup_percent"].is_number());
    assert!(report["time_breakdown"]["dense"]["time_mc"].is_number());
    assert!(dir.join("report-abserr.json").exists());
    assert!(dir.join("report-abserr.raw").exists());
}

#[test]
fn identical_seeds_reproduce_byte_identical_volumes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup_model(dir);
    let args = |out: &str, threads: &str| {
        [
            "lcp-adaptive".to_string(),
            "--model".into(), "model.json".into(),
            "--iso".into(), "-0.59".into(),
            "--dims".into(), "12,12,12".into(),
            "--seed".into(), "11".into(),
            "--threads".into(), threads.into(),
            "--out".into(), out.into(),
        ]
    };
    for (out, threads) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let argv: Vec<String> = args(out, threads).into();
        let argv: Vec<&str> = argv.iter().map(|s| s.as_str()).collect();
        run_ok(dir, &argv);
    }
    let bytes = |name: &str| std::fs::read(dir.join(name)).unwrap();
    assert_eq!(bytes("a.raw"), bytes("b.raw"), "same seed, same thread count");
    assert_eq!(bytes("a.raw"), bytes("c.raw"), "same seed, different thread count");
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let unknown = run_in(dir, &["lcp-dense", "--bogus"]);
    assert_eq!(exit_code(&unknown), 2);

    let bad_dims = run_in(dir, &["gen-tangle", "--dims", "1,4,4", "--out", "x"]);
    assert_eq!(exit_code(&bad_dims), 2);
    assert!(String::from_utf8_lossy(&bad_dims.stderr).contains("at least 2"));

    setup_model(dir);
    let bad_alpha = run_in(
        dir,
        &[
            "lcp-dense", "--model", "model.json", "--iso", "0.0",
            "--dims", "8,8,8", "--alpha", "0.9", "--out", "x",
        ],
    );
    assert_eq!(exit_code(&bad_alpha), 2);
    assert!(String::from_utf8_lossy(&bad_alpha.stderr).contains("alpha"));

    let zero_threads = run_in(
        dir,
        &[
            "lcp-dense", "--model", "model.json", "--iso", "0.0",
            "--dims", "8,8,8", "--threads", "0", "--out", "x",
        ],
    );
    assert_eq!(exit_code(&zero_threads), 2);
}

#[test]
fn input_errors_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let missing = run_in(
        dir,
        &["lcp-dense", "--model", "missing.json", "--iso", "0.0", "--dims", "8,8,8", "--out", "x"],
    );
    assert_eq!(exit_code(&missing), 3);

    std::fs::write(dir.join("broken.json"), "not a model").unwrap();
    let broken = run_in(
        dir,
        &["lcp-dense", "--model", "broken.json", "--iso", "0.0", "--dims", "8,8,8", "--out", "x"],
    );
    assert_eq!(exit_code(&broken), 3);

    // Truncated payload: the sidecar byte count no longer matches.
    run_ok(dir, &["gen-tangle", "--dims", "8,8,8", "--out", "tr"]);
    let raw = std::fs::read(dir.join("tr.raw")).unwrap();
    std::fs::write(dir.join("tr.raw"), &raw[..raw.len() / 2]).unwrap();
    let truncated = run_in(
        dir,
        &["fit", "--in", "tr", "--inducing", "8", "--lengthscale", "9.0",
          "--variance", "600.0", "--noise", "0.4", "--out", "m.json"],
    );
    assert_eq!(exit_code(&truncated), 3);
    assert!(String::from_utf8_lossy(&truncated.stderr).contains("bytes"));
}

#[test]
fn json_errors_flag_emits_machine_readable_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("broken.json"), "{\"format_version\": 1").unwrap();
    let out = run_in(
        dir,
        &[
            "--json-errors", "lcp-dense", "--model", "broken.json",
            "--iso", "0.0", "--dims", "8,8,8", "--out", "x",
        ],
    );
    assert_eq!(exit_code(&out), 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .find(|l| l.trim_start().starts_with("{\"error\""))
        .unwrap_or_else(|| panic!("no error JSON in stderr: {stderr}"));
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    assert_eq!(v["error"]["kind"], "parse");
    assert_eq!(v["error"]["exit_code"], 3);
    assert!(v["error"]["message"].is_string());
}

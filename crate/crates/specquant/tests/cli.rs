//! End-to-end tests of the command-line interface, run against the compiled
//! binary.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specquant"))
}

struct Run {
    status: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = bin();
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        status: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ok(args: &[&str]) -> Run {
    let r = run(args);
    assert_eq!(r.status, 0, "command {args:?} failed:\n{}", r.stderr);
    r
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), read(&e.path()))
        })
        .collect();
    entries.sort();
    entries
}

/// Small desk setup shared by the pipeline tests.
fn setup(dirpath: &Path) -> (PathBuf, PathBuf) {
    let lib = dirpath.join("lib");
    let ds = dirpath.join("train.spqd");
    ok(&[
        "gen-library",
        "--seed",
        "7",
        "--out",
        lib.to_str().unwrap(),
        "--grid-points",
        "160",
    ]);
    ok(&[
        "gen-dataset",
        "--group",
        "1",
        "--snr-db",
        "40",
        "--n",
        "220",
        "--seed",
        "11",
        "--library",
        lib.to_str().unwrap(),
        "--out",
        ds.to_str().unwrap(),
        "--path-length",
        "10",
    ]);
    (lib, ds)
}

#[test]
fn gen_library_twice_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["gen-library", "--seed", "7", "--out", a.to_str().unwrap(), "--grid-points", "120"]);
    ok(&["gen-library", "--seed", "7", "--out", b.to_str().unwrap(), "--grid-points", "120"]);
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
    // the resolved config exists and names the command
    let cfg = std::fs::read_to_string(a.join("resolved_config.json")).unwrap();
    assert!(cfg.contains("\"command\": \"gen-library\""));
    assert!(cfg.contains("\"seed\": 7"));
}

#[test]
fn underdetermined_fit_exits_one_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let (_lib, _ds) = setup(tmp.path());
    let tiny = tmp.path().join("tiny.spqd");
    ok(&[
        "gen-dataset", "--group", "1", "--snr-db", "40", "--n", "5", "--seed", "3",
        "--library", tmp.path().join("lib").to_str().unwrap(),
        "--out", tiny.to_str().unwrap(),
    ]);
    let r = run(&[
        "fit", "--model", "lr", "--components", "9",
        "--dataset", tiny.to_str().unwrap(),
        "--out", tmp.path().join("m").to_str().unwrap(),
    ]);
    assert_eq!(r.status, 1, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("ERROR[underdetermined]:"), "stderr: {}", r.stderr);
}

#[test]
fn unknown_flags_are_rejected() {
    let r = run(&["gen-library", "--seed", "1", "--out", "x", "--bogus-flag", "3"]);
    assert_ne!(r.status, 0);
    assert!(r.stderr.contains("bogus-flag"));
}

#[test]
fn full_pipeline_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let (lib, ds) = setup(tmp.path());
    let model_dir = tmp.path().join("tf-model");
    ok(&[
        "fit", "--model", "tf", "--learn-b", "--learn-noise",
        "--dataset", ds.to_str().unwrap(),
        "--library", lib.to_str().unwrap(),
        "--out", model_dir.to_str().unwrap(),
    ]);
    let pred = tmp.path().join("pred.csv");
    ok(&[
        "predict", "--model-dir", model_dir.to_str().unwrap(),
        "--dataset", ds.to_str().unwrap(),
        "--out", pred.to_str().unwrap(),
    ]);
    let eval_dir = tmp.path().join("eval");
    let r = ok(&[
        "evaluate", "--model", "tf", "--learn-b", "--learn-noise",
        "--dataset", ds.to_str().unwrap(),
        "--library", lib.to_str().unwrap(),
        "--folds", "5", "--seed", "1",
        "--out", eval_dir.to_str().unwrap(),
    ]);
    assert!(r.stdout.contains("mean RMSE"));
    // report CSV present and schema-valid
    let summary = std::fs::read_to_string(eval_dir.join("report_summary.csv")).unwrap();
    let header = summary.lines().next().unwrap();
    assert_eq!(
        header,
        "model,dataset,gas,rmse,mape,excluded_zeros,random_guess_rmse"
    );
    assert_eq!(summary.lines().count(), 1 + 9);
    // external-predictions hook scores the saved predictions
    let ext_dir = tmp.path().join("ext");
    ok(&[
        "evaluate", "--model", "mean", "--predictions", pred.to_str().unwrap(),
        "--dataset", ds.to_str().unwrap(),
        "--out", ext_dir.to_str().unwrap(),
    ]);
    let ext = std::fs::read_to_string(ext_dir.join("report_summary.csv")).unwrap();
    assert!(ext.lines().nth(1).unwrap().starts_with("external,"));
}

#[test]
fn manifest_counts_match_emitted_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let (_lib, ds) = setup(tmp.path());
    let out = tmp.path().join("sweep");
    ok(&[
        "sweep", "pcs", "--dataset", ds.to_str().unwrap(),
        "--max-components", "12", "--out", out.to_str().unwrap(),
    ]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let listed = manifest["files"].as_array().unwrap().len();
    let on_disk = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".csv")
        })
        .count();
    assert_eq!(listed, on_disk);
}

#[test]
fn export_re_renders_byte_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let (_lib, ds) = setup(tmp.path());
    let eval_dir = tmp.path().join("eval");
    ok(&[
        "evaluate", "--model", "lr", "--components", "9",
        "--dataset", ds.to_str().unwrap(),
        "--folds", "5", "--seed", "2",
        "--out", eval_dir.to_str().unwrap(),
    ]);
    let exported = tmp.path().join("exported");
    ok(&[
        "export", "--report", eval_dir.join("report.json").to_str().unwrap(),
        "--out", exported.to_str().unwrap(),
    ]);
    for name in ["report_summary.csv", "report_folds.csv", "manifest.json"] {
        assert_eq!(
            read(&eval_dir.join(name)),
            read(&exported.join(name)),
            "{name} differs"
        );
    }
}

#[test]
fn outputs_identical_for_one_and_eight_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let lib = tmp.path().join("lib");
    ok(&["gen-library", "--seed", "9", "--out", lib.to_str().unwrap(), "--grid-points", "200"]);
    let ds1 = tmp.path().join("t1.spqd");
    let ds8 = tmp.path().join("t8.spqd");
    for (threads, out) in [("1", &ds1), ("8", &ds8)] {
        ok(&[
            "--threads", threads,
            "gen-dataset", "--group", "2", "--snr-db", "20", "--n", "300", "--seed", "4",
            "--library", lib.to_str().unwrap(),
            "--out", out.to_str().unwrap(),
        ]);
    }
    assert_eq!(read(&ds1), read(&ds8));

    let b1 = tmp.path().join("b1");
    let b8 = tmp.path().join("b8");
    for (threads, out) in [("1", &b1), ("8", &b8)] {
        ok(&[
            "--threads", threads,
            "fit-pca", "--dataset", ds1.to_str().unwrap(),
            "--components", "9", "--flavor", "fpca",
            "--out", out.to_str().unwrap(),
        ]);
    }
    assert_eq!(read(&b1.join("basis.csv")), read(&b8.join("basis.csv")));
    assert_eq!(read(&b1.join("basis.json")), read(&b8.join("basis.json")));

    // SPECQUANT_THREADS is honored as a fallback
    let ds_env = tmp.path().join("tenv.spqd");
    let r = run_env(
        &[
            "gen-dataset", "--group", "2", "--snr-db", "20", "--n", "300", "--seed", "4",
            "--library", lib.to_str().unwrap(),
            "--out", ds_env.to_str().unwrap(),
        ],
        &[("SPECQUANT_THREADS", "3")],
    );
    assert_eq!(r.status, 0, "{}", r.stderr);
    assert_eq!(read(&ds1), read(&ds_env));
}

#[test]
fn noise_estimate_reports_power() {
    let tmp = tempfile::tempdir().unwrap();
    let (lib, _) = setup(tmp.path());
    let noisy = tmp.path().join("noisy.spqd");
    ok(&[
        "gen-dataset", "--group", "1", "--snr-db", "20", "--n", "100", "--seed", "5",
        "--library", lib.to_str().unwrap(),
        "--out", noisy.to_str().unwrap(),
        "--path-length", "10",
    ]);
    let out = tmp.path().join("noise");
    ok(&[
        "noise-estimate", "--library", lib.to_str().unwrap(),
        "--dataset", noisy.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("noise_power.json")).unwrap())
            .unwrap();
    assert!(doc["mean_power"].as_f64().unwrap() > 0.0);
    assert_eq!(doc["n_samples"].as_u64().unwrap(), 100);
}

#[test]
fn every_subcommand_documents_its_flags() {
    let cases: &[(&[&str], &[&str])] = &[
        (
            &["gen-library"],
            &["--seed", "--out", "--grid-points", "--grid-min", "--grid-max", "--threads"],
        ),
        (
            &["gen-dataset"],
            &["--group", "--snr-db", "--n", "--seed", "--library", "--out", "--path-length"],
        ),
        (
            &["fit-pca"],
            &["--dataset", "--components", "--flavor", "--uncentered", "--out"],
        ),
        (
            &["fit"],
            &["--model", "--components", "--retain", "--learn-b", "--learn-noise",
              "--calibration", "--dataset", "--library", "--flavor", "--uncentered", "--out"],
        ),
        (&["predict"], &["--model-dir", "--dataset", "--out"]),
        (
            &["evaluate"],
            &["--model", "--dataset", "--library", "--predictions", "--folds", "--seed", "--out"],
        ),
        (
            &["sweep", "pcs"],
            &["--dataset", "--max-components", "--seed", "--out"],
        ),
        (
            &["sweep", "snr"],
            &["--datasets", "--model", "--library", "--folds", "--seed", "--out"],
        ),
        (
            &["sweep", "train-size"],
            &["--dataset", "--model", "--library", "--sizes", "--out"],
        ),
        (
            &["out-of-range"],
            &["--train", "--test", "--models", "--components", "--calibration",
              "--library", "--bins", "--folds", "--seed", "--out"],
        ),
        (
            &["noise-estimate"],
            &["--library", "--dataset", "--path-length", "--out"],
        ),
        (&["export"], &["--report", "--out"]),
    ];
    for (cmd, flags) in cases {
        let mut args: Vec<&str> = cmd.to_vec();
        args.push("--help");
        let r = run(&args);
        assert_eq!(r.status, 0, "{cmd:?} --help failed");
        for flag in *flags {
            assert!(
                r.stdout.contains(flag),
                "{cmd:?} help does not document {flag}\n{}",
                r.stdout
            );
        }
    }
}

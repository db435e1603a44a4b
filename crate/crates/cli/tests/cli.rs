use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &[&str] = &[
    "--set",
    "data.samples_train=240",
    "--set",
    "data.samples_test=80",
    "--set",
    "optimizer.epochs=2",
    "--set",
    "optimizer.batch_size=64",
    "--set",
    "seed=17",
];

fn osr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osr"))
        .args(args)
        .output()
        .unwrap()
}

fn run_ok(args: &[&str]) -> Value {
    let out = osr(args);
    assert!(
        out.status.success(),
        "osr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_of(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap();
    serde_json::from_str::<Value>(line).unwrap()["error"].clone()
}

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn args(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn train_and_eval(dir: &Path, name: &str, extra: &[&str]) -> Value {
    let data = dir.join("data");
    let run = dir.join(name);
    let d = data.to_str().unwrap();
    let r = run.to_str().unwrap();
    let config = with(SMALL, extra);
    let config = args(&config);
    let ck = run.join("checkpoint.json");
    let m = run.join("metrics.json");
    run_ok(&[&["train"][..], &config, &["--data", d, "--out", r]].concat());
    run_ok(
        &[
            &["eval"][..],
            &config,
            &[
                "--data",
                d,
                "--checkpoint",
                ck.to_str().unwrap(),
                "--out",
                m.to_str().unwrap(),
            ],
        ]
        .concat(),
    );
    serde_json::from_str(&fs::read_to_string(m).unwrap()).unwrap()
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let a = with(SMALL, &["--out", out.to_str().unwrap()]);
        run_ok(&[&["generate"][..], &args(&a)].concat());
    }
    for file in ["dataset.jsonl", "metadata.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs");
    }
    let meta: Value =
        serde_json::from_slice(&fs::read(dir.path().join("a/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["seed"], 17);
}

#[test]
fn train_eval_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let g = with(SMALL, &["--out", data.to_str().unwrap()]);
    run_ok(&[&["generate"][..], &args(&g)].concat());

    let on = train_and_eval(dir.path(), "on", &[]);
    let off = train_and_eval(dir.path(), "off", &["--set", "optimizer.debias=false"]);
    assert_eq!(on["format"], "osr-metrics");
    assert_eq!(on["seed"], 17);
    assert_eq!(on["config"], on["checkpoint_config"]);
    assert_eq!(off["config"]["optimizer"]["debias"], false);
    let mechanisms: Vec<&str> = on["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["mechanism"].as_str().unwrap())
        .collect();
    assert_eq!(mechanisms, ["PE", "NE", "PNE", "Belief"]);
    for row in on["rows"].as_array().unwrap() {
        let auroc = row["auroc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auroc));
    }

    let trace = fs::read_to_string(dir.path().join("on/trace.csv")).unwrap();
    assert!(trace.starts_with("# seed=17\n# config={"));
    assert!(trace.contains("\nstep,epoch,loss,hsic,lambda\n"));

    let report = dir.path().join("report.csv");
    let d = dir.path();
    run_ok(&[
        "report",
        "--metrics",
        d.join("off/metrics.json").to_str().unwrap(),
        "--metrics",
        d.join("on/metrics.json").to_str().unwrap(),
        "--trace",
        d.join("off/trace.csv").to_str().unwrap(),
        "--trace",
        d.join("on/trace.csv").to_str().unwrap(),
        "--label",
        "off",
        "--label",
        "on",
        "--out",
        report.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&report).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        body[0],
        "run,mechanism,Error,AUROC,AUPR,FPR@95TPR,mAP,test_hsic,final_lambda,final_batch_loss"
    );
    assert_eq!(body.len(), 1 + 12);
    assert!(body.iter().any(|l| l.starts_with("on-off,PE,")));
    assert_eq!(text.lines().filter(|l| l.starts_with("# run=")).count(), 2);
}

#[test]
fn rerunning_from_the_echo_reproduces_the_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let t = with(SMALL, &["--out", first.to_str().unwrap()]);
    run_ok(&[&["train"][..], &args(&t)].concat());
    let m1 = dir.path().join("m1.json");
    let e = with(
        SMALL,
        &[
            "--checkpoint",
            first.join("checkpoint.json").to_str().unwrap(),
            "--out",
            m1.to_str().unwrap(),
        ],
    );
    run_ok(&[&["eval"][..], &args(&e)].concat());

    let metrics: Value = serde_json::from_str(&fs::read_to_string(&m1).unwrap()).unwrap();
    let echo = dir.path().join("echo.json");
    fs::write(&echo, metrics["config"].to_string()).unwrap();
    let second = dir.path().join("second");
    let cfg = echo.to_str().unwrap();
    run_ok(&["train", "--config", cfg, "--out", second.to_str().unwrap()]);
    let m2 = dir.path().join("m2.json");
    run_ok(&[
        "eval",
        "--config",
        cfg,
        "--checkpoint",
        second.join("checkpoint.json").to_str().unwrap(),
        "--out",
        m2.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
}

#[test]
fn verify_bounds_passes_and_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = osr(&["verify-bounds", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = stdout
        .lines()
        .filter(|l| l.contains("PASS") || l.contains("FAIL"))
        .collect();
    assert_eq!(rows.len(), 24);
    assert!(rows.iter().all(|l| l.contains(" PASS ")));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
    assert_eq!(report["problems"].as_array().unwrap().len(), 4);
    let trace = fs::read_to_string(dir.path().join("active_quadratic.csv")).unwrap();
    assert_eq!(
        trace.lines().filter(|l| !l.starts_with('#')).count(),
        1 + 1001
    );
}

#[test]
fn cold_start_certificate_failure_exits_with_three() {
    let out = osr(&["verify-bounds", "--cold-start", "--steps", "200"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["kind"], "certificate");
}

#[test]
fn configuration_errors_exit_with_one() {
    let out = osr(&[
        "generate",
        "--set",
        "data.bias_strength=1.5",
        "--out",
        "/tmp/unused",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["kind"], "config");

    let out = osr(&[
        "generate",
        "--set",
        "data.unknown_field=1",
        "--out",
        "/tmp/unused",
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = osr(&[
        "generate",
        "--config",
        "/nonexistent/config.json",
        "--out",
        "/tmp/unused",
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = osr(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["kind"], "usage");

    let out = osr(&["verify-bounds", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mismatched_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let g = with(SMALL, &["--out", data.to_str().unwrap()]);
    run_ok(&[&["generate"][..], &args(&g)].concat());
    let t = with(
        SMALL,
        &[
            "--set",
            "data.noise_sigma=0.3",
            "--data",
            data.to_str().unwrap(),
            "--out",
            dir.path().join("run").to_str().unwrap(),
        ],
    );
    let out = osr(&[&["train"][..], &args(&t)].concat());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = osr(&[
        "eval",
        "--checkpoint",
        dir.path().join("missing.json").to_str().unwrap(),
        "--out",
        dir.path().join("m.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "runtime");

    // A learning rate this large overflows the network.
    let t = with(
        SMALL,
        &[
            "--set",
            "optimizer.primal.eta1=1e12",
            "--out",
            dir.path().join("run").to_str().unwrap(),
        ],
    );
    let out = osr(&[&["train"][..], &args(&t)].concat());
    assert_eq!(out.status.code(), Some(2));
}

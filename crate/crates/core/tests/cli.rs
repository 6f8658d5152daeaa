use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use etl::cli::{
    cmd_eval, cmd_prepare, cmd_report, cmd_sweep, cmd_synth, collect_runs, dir_fingerprint,
    load_run_dataset, parse_grid, Comparison, RunConfig, SynthOptions,
};
use etl::dataio::{load_dataset, Phase, SplitOptions};
use etl::eval::Metric;
use etl::Error;

fn etl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_synth(dir: &Path) {
    let opts = SynthOptions {
        n_users: 300,
        n_items: [80, 80],
        sparsity: 0.1,
        n_negatives: 50,
        seed: 3,
        ..SynthOptions::default()
    };
    cmd_synth(&opts, dir).unwrap();
}

const SMALL: &[&str] = &[
    "latent=8",
    "hidden=16",
    "disc_hidden=8",
    "batch=32",
    "epochs=3",
    "lr=0.003",
];

fn train_args<'a>(data: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<String> {
    let mut v = vec![
        "train".to_string(),
        "--set".into(),
        format!("dataset={data}"),
        "--set".into(),
        format!("out={out}"),
    ];
    for s in SMALL.iter().chain(extra) {
        v.push("--set".into());
        v.push(s.to_string());
    }
    v
}

fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = etl(&refs);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn train_is_reproducible_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let s = etl(&[
        "synth",
        "--users",
        "300",
        "--items-a",
        "80",
        "--items-b",
        "80",
        "--sparsity",
        "0.1",
        "--n-negatives",
        "50",
        "--out",
        data.to_str().unwrap(),
    ]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));

    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    for r in [&r1, &r2] {
        let out = run(&train_args(
            data.to_str().unwrap(),
            r.to_str().unwrap(),
            &["seed=5"],
        ));
        assert!(String::from_utf8_lossy(&out.stdout).contains("best_epoch="));
    }
    for f in ["log.csv", "model.etl1", "metrics.csv"] {
        assert_eq!(
            fs::read(r1.join(f)).unwrap(),
            fs::read(r2.join(f)).unwrap(),
            "{f} differs"
        );
    }

    let e = etl(&[
        "eval",
        "--checkpoint",
        r1.join("model.etl1").to_str().unwrap(),
    ]);
    assert!(e.status.success());
    assert_eq!(
        String::from_utf8_lossy(&e.stdout),
        fs::read_to_string(r1.join("metrics.csv")).unwrap()
    );

    let a = etl(&[
        "analyze",
        "--checkpoint",
        r1.join("model.etl1").to_str().unwrap(),
        "--which",
        "mmd",
    ]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(v["mmd"]["transformed"].as_f64().unwrap() >= 0.0);
}

#[test]
fn hash_mismatch_is_a_format_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_synth(&data);
    let r = tmp.path().join("run");
    run(&train_args(
        data.to_str().unwrap(),
        r.to_str().unwrap(),
        &["epochs=1"],
    ));

    let cfg_path = r.join("config.txt");
    let text = fs::read_to_string(&cfg_path).unwrap();
    fs::write(&cfg_path, text.replace("latent = 8", "latent = 9")).unwrap();
    match cmd_eval(r.join("model.etl1"), None, Phase::Test) {
        Err(Error::Format(_)) => {}
        other => panic!("expected a format error, got {other:?}"),
    }
    let out = etl(&[
        "eval",
        "--checkpoint",
        r.join("model.etl1").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("etl-error format:"));
}

#[test]
fn bad_input_exits_nonzero_with_a_category() {
    let out = etl(&["train", "--set", "latent=zero"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("etl-error config:"));
    let out = etl(&["eval", "--checkpoint", "/nonexistent/model.etl1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("etl-error io:"));
}

#[test]
fn prepare_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let mut text = [String::new(), String::new()];
    for (d, t) in text.iter_mut().enumerate() {
        for u in 0..60 {
            for i in 0..40 {
                if (u * 7 + i * 3 + d) % 5 < 2 {
                    t.push_str(&format!(
                        "user{u},item{d}_{i},{},{}\n",
                        1 + (u + i) % 5,
                        u * 1000 + i
                    ));
                }
            }
        }
    }
    let (a, b) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
    fs::write(&a, &text[0]).unwrap();
    fs::write(&b, &text[1]).unwrap();
    let opts = SplitOptions {
        n_negatives: 10,
        seed: 4,
        ..SplitOptions::default()
    };
    let (o1, o2) = (tmp.path().join("p1"), tmp.path().join("p2"));
    cmd_prepare(&a, &b, &o1, &opts).unwrap();
    cmd_prepare(&a, &b, &o2, &opts).unwrap();
    assert_eq!(dir_fingerprint(&o1).unwrap(), dir_fingerprint(&o2).unwrap());
    cmd_prepare(&a, &b, &o1, &opts).unwrap();
    assert_eq!(dir_fingerprint(&o1).unwrap(), dir_fingerprint(&o2).unwrap());
    assert_eq!(load_dataset(&o1).unwrap(), load_dataset(&o2).unwrap());
}

#[test]
fn full_train_ratio_keeps_the_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_synth(&data);
    let mut cfg = RunConfig {
        dataset: Some(data.clone()),
        train_ratio: 1.0,
        ..RunConfig::default()
    };
    assert_eq!(
        load_run_dataset(&cfg, None).unwrap(),
        load_dataset(&data).unwrap()
    );
    cfg.train_ratio = 0.5;
    let half = load_run_dataset(&cfg, None).unwrap();
    assert!(half.train_nnz() < load_dataset(&data).unwrap().train_nnz());
}

#[test]
fn sweep_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_synth(&data);
    let mut base = RunConfig {
        dataset: Some(data),
        ..RunConfig::default()
    };
    base.apply_overrides(&SMALL.iter().map(|s| s.to_string()).collect::<Vec<_>>())
        .unwrap();
    base.train.epochs = 2;
    let grid = parse_grid(&["lambda=0,1".into(), "seed=1,2".into()]).unwrap();
    let sweep = tmp.path().join("sweep");
    let rows = cmd_sweep(&base, &grid, &sweep, 2).unwrap();
    assert_eq!(rows.len(), 4);
    let csv = fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("run,lambda,seed,best_epoch,"));

    let records = collect_runs(std::slice::from_ref(&sweep)).unwrap();
    assert_eq!(records.len(), 4);
    let cmp: Comparison = "lambda=0,1".parse().unwrap();
    let s = cmd_report(&records, Metric::Hr, 10, Some(&cmp), Some(&sweep)).unwrap();
    assert_eq!(s.groups.len(), 2);
    assert!(s.groups.iter().all(|g| g.runs == 2));
    assert!(s.ttest.is_some());
    assert!(sweep.join("report.csv").exists() && sweep.join("report.json").exists());

    let out = etl(&["report", sweep.to_str().unwrap(), "--compare", "lambda=0,1"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("ttest domain=a n=2"));

    assert!(parse_grid(&["out=x,y".into()]).is_err());
    assert!(parse_grid(&["nonsense=1".into()]).is_err());
}

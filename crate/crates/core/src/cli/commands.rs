//! The operations behind each subcommand. Each takes explicit inputs, writes
//! its artifacts, and returns what it computed so callers can print it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde_json::{json, Value};

use crate::analysis::{latent_mmd, latent_probe, mean_and_se, paired_ttest, TTest};
use crate::cli::config::RunConfig;
use crate::cli::synth::{save_synth, synthesize, SynthData, SynthOptions};
use crate::dataio::storage::write_file;
use crate::dataio::{
    load_dataset, prepare_from_files, save_dataset, Domain, DomainStats, PairedDataset, Phase,
    SplitOptions,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Metric, MetricsReport};
use crate::model::{load_checkpoint, save_checkpoint, EtlModel};
use crate::numerics::rng::fnv1a64;
use crate::numerics::Rng;
use crate::training::{fit_with, FitResult};

pub const CONFIG_FILE: &str = "config.txt";
pub const LOG_FILE: &str = "log.csv";
pub const CHECKPOINT_FILE: &str = "model.etl1";
pub const METRICS_JSON: &str = "metrics.json";
/// The one metadata key that holds wall-clock time.
pub const WALL_CLOCK_KEY: &str = "wall_clock_s";

pub fn cmd_prepare(
    ratings_a: impl AsRef<Path>,
    ratings_b: impl AsRef<Path>,
    out: impl AsRef<Path>,
    opts: &SplitOptions,
) -> Result<[DomainStats; 2]> {
    let ds = prepare_from_files(ratings_a, ratings_b, opts)?;
    save_dataset(&ds, out)?;
    Ok(ds.stats())
}

pub fn cmd_synth(opts: &SynthOptions, out: impl AsRef<Path>) -> Result<SynthData> {
    let data = synthesize(opts)?;
    save_synth(&data, out)?;
    Ok(data)
}

/// Loads the run's dataset and applies its train-ratio subsampling, which is
/// seeded so that training, evaluation and analysis all see the same rows.
pub fn load_run_dataset(cfg: &RunConfig, dataset: Option<&Path>) -> Result<PairedDataset> {
    let path = dataset
        .map(Path::to_path_buf)
        .or_else(|| cfg.dataset.clone())
        .ok_or_else(|| Error::Config("no dataset given".into()))?;
    let ds = load_dataset(&path)?;
    if cfg.train_ratio < 1.0 {
        ds.subsample_train(
            cfg.train_ratio,
            &mut Rng::keyed(cfg.train.seed, "subsample"),
        )
    } else {
        Ok(ds)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub fit: FitResult,
    /// Test-phase metrics of the selected checkpoint.
    pub report: MetricsReport,
}

/// Trains per `cfg` and writes `config.txt`, `log.csv`, `model.etl1` (the
/// best validation checkpoint) and test-phase `metrics.{csv,json}` under
/// `cfg.out`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let run_dir = cfg
        .out
        .clone()
        .ok_or_else(|| Error::Config("no run directory (`out`) given".into()))?;
    let ds = load_run_dataset(cfg, None)?;
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    write_file(&run_dir.join(CONFIG_FILE), cfg.to_text().as_bytes())?;

    let start = Instant::now();
    let fit = fit_with(&ds, &cfg.train, &mut |r| {
        log::info!(
            "epoch {} jrl={:.5} disc={:.5} gen={:.5} val={:?}",
            r.stats.epoch,
            r.stats.jrl,
            r.stats.disc,
            r.stats.gen,
            r.val_ndcg10
        );
    })?;
    let wall = start.elapsed().as_secs_f64();
    write_file(
        &run_dir.join(LOG_FILE),
        fit.log_csv(cfg.train.log_timing).as_bytes(),
    )?;
    save_checkpoint(&fit.best, run_dir.join(CHECKPOINT_FILE))?;

    let mut report = evaluate(&fit.best, &ds, Phase::Test, &cfg.train.cutoffs)?;
    report.seed = cfg.train.seed;
    report.config_hash = fit.best.spec.hash();
    report
        .metadata
        .insert("best_epoch".into(), fit.best_epoch.to_string());
    report
        .metadata
        .insert("best_val_ndcg10".into(), format!("{:.6}", fit.best_val));
    report
        .metadata
        .insert("epochs".into(), cfg.train.epochs.to_string());
    report
        .metadata
        .insert(WALL_CLOCK_KEY.into(), format!("{wall:.3}"));
    report.write(&run_dir)?;
    Ok(TrainOutcome {
        run_dir,
        fit,
        report,
    })
}

/// Reads a run's config and its checkpoint. The checkpoint's stored hash must
/// match the shapes implied by the config and dataset.
pub fn load_run(
    checkpoint: &Path,
    dataset: Option<&Path>,
) -> Result<(RunConfig, PairedDataset, EtlModel)> {
    let dir = checkpoint.parent().unwrap_or(Path::new("."));
    let cfg = RunConfig::load(dir.join(CONFIG_FILE))?;
    let ds = load_run_dataset(&cfg, dataset)?;
    let items = [
        ds.domain(Domain::A).n_items(),
        ds.domain(Domain::B).n_items(),
    ];
    let model = load_checkpoint(checkpoint, cfg.train.model_spec(items))?;
    Ok((cfg, ds, model))
}

pub fn cmd_eval(
    checkpoint: impl AsRef<Path>,
    dataset: Option<&Path>,
    phase: Phase,
) -> Result<MetricsReport> {
    let (cfg, ds, model) = load_run(checkpoint.as_ref(), dataset)?;
    let mut report = evaluate(&model, &ds, phase, &cfg.train.cutoffs)?;
    report.seed = cfg.train.seed;
    report.config_hash = model.spec.hash();
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalysisKind {
    Mmd,
    Probe,
    All,
}

impl std::str::FromStr for AnalysisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mmd" => Ok(AnalysisKind::Mmd),
            "probe" => Ok(AnalysisKind::Probe),
            "all" => Ok(AnalysisKind::All),
            other => Err(Error::Config(format!("unknown analysis `{other}`"))),
        }
    }
}

/// Runs MMD and/or the pairing probe on a trained run. Results are written
/// to `analysis.json` beside the checkpoint and merged into `metrics.json`
/// when that exists.
pub fn cmd_analyze(
    checkpoint: impl AsRef<Path>,
    dataset: Option<&Path>,
    which: AnalysisKind,
) -> Result<Value> {
    let checkpoint = checkpoint.as_ref();
    let (cfg, ds, model) = load_run(checkpoint, dataset)?;
    let mut out = BTreeMap::new();
    if matches!(which, AnalysisKind::Mmd | AnalysisKind::All) {
        let m = latent_mmd(&model, &ds, &cfg.mmd_sigmas, cfg.mmd_max_users)?;
        out.insert(
            "mmd".to_string(),
            serde_json::to_value(m).map_err(|e| Error::Format(e.to_string()))?,
        );
    }
    if matches!(which, AnalysisKind::Probe | AnalysisKind::All) {
        let p = latent_probe(&model, &ds, cfg.probe_runs, &cfg.probe, cfg.train.seed)?;
        out.insert(
            "probe_auc".to_string(),
            serde_json::to_value(p).map_err(|e| Error::Format(e.to_string()))?,
        );
    }
    let dir = checkpoint.parent().unwrap_or(Path::new("."));
    let value = json!(out);
    write_json(&dir.join("analysis.json"), &value)?;
    let metrics = dir.join(METRICS_JSON);
    if metrics.exists() {
        let mut r = MetricsReport::read_json(&metrics)?;
        r.analysis.extend(out);
        r.write(dir)?;
    }
    Ok(value)
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    write_file(path, format!("{text}\n").as_bytes())
}

/// `key=v1,v2,...` axes of a sweep grid.
pub fn parse_grid(specs: &[String]) -> Result<Vec<(String, Vec<String>)>> {
    let probe = RunConfig::default();
    specs
        .iter()
        .map(|s| {
            let (k, vs) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("grid axis `{s}` is not key=v1,v2")))?;
            let k = k.trim().to_string();
            if k == "out" {
                return Err(Error::Config("`out` cannot be swept".into()));
            }
            let values: Vec<String> = vs
                .split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            if values.is_empty() {
                return Err(Error::Config(format!("grid axis `{k}` has no values")));
            }
            for v in &values {
                probe.clone().set(&k, v)?;
            }
            Ok((k, values))
        })
        .collect()
}

/// Cartesian product of the grid, first axis slowest.
pub fn expand_grid(grid: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut out = vec![Vec::new()];
    for (k, vs) in grid {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                vs.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((k.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub run: String,
    pub settings: Vec<(String, String)>,
    pub best_epoch: usize,
    pub report: MetricsReport,
}

/// Trains every grid point into `out/run_NNN` and writes `out/sweep.csv`.
/// Runs execute serially when `jobs <= 1`; otherwise up to `jobs` runs train
/// at once on separate threads with disjoint output directories.
pub fn cmd_sweep(
    base: &RunConfig,
    grid: &[(String, Vec<String>)],
    out: impl AsRef<Path>,
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    let out = out.as_ref();
    let points = expand_grid(grid);
    let mut configs = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let mut cfg = base.clone();
        for (k, v) in p {
            cfg.set(k, v)?;
        }
        cfg.out = Some(out.join(format!("run_{i:03}")));
        cfg.validate()?;
        configs.push(cfg);
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let results: Mutex<Vec<Option<Result<SweepRow>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= configs.len() {
            break;
        }
        let r = cmd_train(&configs[i]).map(|o| SweepRow {
            run: format!("run_{i:03}"),
            settings: points[i].clone(),
            best_epoch: o.fit.best_epoch,
            report: o.report,
        });
        results.lock().expect("sweep results")[i] = Some(r);
    };
    if jobs <= 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..jobs.min(configs.len()) {
                s.spawn(worker);
            }
        });
    }
    let rows: Vec<SweepRow> = results
        .into_inner()
        .expect("sweep results")
        .into_iter()
        .map(|r| r.expect("every run visited"))
        .collect::<Result<_>>()?;
    write_file(
        &out.join("sweep.csv"),
        sweep_csv(grid, &rows, &base.train.cutoffs).as_bytes(),
    )?;
    Ok(rows)
}

fn sweep_csv(grid: &[(String, Vec<String>)], rows: &[SweepRow], cutoffs: &[usize]) -> String {
    let mut s = String::from("run");
    for (k, _) in grid {
        let _ = write!(s, ",{k}");
    }
    s.push_str(",best_epoch");
    for d in Domain::BOTH {
        for m in Metric::ALL {
            for k in cutoffs {
                let _ = write!(s, ",{d}_{m}@{k}");
            }
        }
    }
    s.push('\n');
    for r in rows {
        s.push_str(&r.run);
        for (_, v) in &r.settings {
            let _ = write!(s, ",{v}");
        }
        let _ = write!(s, ",{}", r.best_epoch);
        for d in Domain::BOTH {
            for m in Metric::ALL {
                for &k in cutoffs {
                    let v = r
                        .report
                        .get(d, m, k)
                        .map(|v| format!("{v:.6}"))
                        .unwrap_or_default();
                    let _ = write!(s, ",{v}");
                }
            }
        }
        s.push('\n');
    }
    s
}

/// One trained run as seen by `report`.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub metrics: MetricsReport,
}

pub fn read_run(dir: impl AsRef<Path>) -> Result<RunRecord> {
    let dir = dir.as_ref();
    Ok(RunRecord {
        dir: dir.to_path_buf(),
        config: RunConfig::load(dir.join(CONFIG_FILE))?,
        metrics: MetricsReport::read_json(dir.join(METRICS_JSON))?,
    })
}

/// Run directories given directly or found one level below a sweep directory.
pub fn collect_runs(paths: &[PathBuf]) -> Result<Vec<RunRecord>> {
    let mut dirs = Vec::new();
    for p in paths {
        if p.join(CONFIG_FILE).exists() {
            dirs.push(p.clone());
            continue;
        }
        let mut sub: Vec<PathBuf> = fs::read_dir(p)
            .map_err(|e| Error::io(p, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| d.join(CONFIG_FILE).exists() && d.join(METRICS_JSON).exists())
            .collect();
        sub.sort();
        dirs.extend(sub);
    }
    if dirs.is_empty() {
        return Err(Error::Config("no run directories found".into()));
    }
    dirs.iter().map(read_run).collect()
}

/// Two-level comparison: runs with `key = a` against runs with `key = b`,
/// paired by every other setting (including the seed).
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub key: String,
    pub a: String,
    pub b: String,
}

impl std::str::FromStr for Comparison {
    type Err = Error;

    /// `key=a,b`
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("comparison `{s}` is not key=a,b"));
        let (k, vs) = s.split_once('=').ok_or_else(bad)?;
        let (a, b) = vs.split_once(',').ok_or_else(bad)?;
        Ok(Comparison {
            key: k.trim().to_string(),
            a: a.trim().to_string(),
            b: b.trim().to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupSummary {
    /// Settings that vary across the collected runs, excluding the seed.
    pub label: String,
    pub runs: usize,
    /// Per domain: mean and standard error.
    pub values: [(f64, f64); 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportSummary {
    pub metric: Metric,
    pub k: usize,
    pub groups: Vec<GroupSummary>,
    /// Per domain, when a comparison was requested.
    pub ttest: Option<[TTest; 2]>,
}

impl ReportSummary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("group,runs,domain,metric,k,mean,se\n");
        for g in &self.groups {
            for d in Domain::BOTH {
                let (m, se) = g.values[d.index()];
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{:.6},{:.6}",
                    g.label, g.runs, d, self.metric, self.k, m, se
                );
            }
        }
        s
    }

    pub fn to_json(&self) -> Value {
        let groups: Vec<Value> = self
            .groups
            .iter()
            .map(|g| {
                json!({
                    "label": g.label,
                    "runs": g.runs,
                    "a": {"mean": g.values[0].0, "se": g.values[0].1},
                    "b": {"mean": g.values[1].0, "se": g.values[1].1},
                })
            })
            .collect();
        let mut analysis = serde_json::Map::new();
        if let Some(t) = &self.ttest {
            analysis.insert("ttest".into(), json!({"a": t[0], "b": t[1]}));
        }
        json!({
            "metric": format!("{}@{}", self.metric, self.k),
            "groups": groups,
            "analysis": analysis,
        })
    }
}

/// The config text minus the keys that never define a group.
fn settings(cfg: &RunConfig, skip: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for (k, _) in crate::cli::config::KEYS {
        if !skip.contains(k) {
            m.insert(k.to_string(), cfg.get(k)?);
        }
    }
    Ok(m)
}

/// Aggregates `metric@k` over runs as mean ± SE per group, and optionally
/// runs a paired t-test for `compare`. Writes `report.csv` and `report.json`
/// into `out` when given.
pub fn cmd_report(
    runs: &[RunRecord],
    metric: Metric,
    k: usize,
    compare: Option<&Comparison>,
    out: Option<&Path>,
) -> Result<ReportSummary> {
    if runs.is_empty() {
        return Err(Error::Config("no runs to report".into()));
    }
    let value = |r: &RunRecord, d: Domain| {
        r.metrics.get(d, metric, k).ok_or_else(|| {
            Error::Evaluation(format!("{}: no {metric}@{k} in metrics", r.dir.display()))
        })
    };
    let all: Vec<BTreeMap<String, String>> = runs
        .iter()
        .map(|r| settings(&r.config, &["seed", "out"]))
        .collect::<Result<_>>()?;
    let varying: Vec<&String> = all[0]
        .keys()
        .filter(|k| all.iter().any(|s| s[*k] != all[0][*k]))
        .collect();
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in all.iter().enumerate() {
        let label = varying
            .iter()
            .map(|k| format!("{k}={}", s[*k]))
            .collect::<Vec<_>>()
            .join(";");
        let label = if label.is_empty() {
            "all".to_string()
        } else {
            label
        };
        groups.entry(label).or_default().push(i);
    }
    let mut summary = Vec::new();
    for (label, idx) in groups {
        let mut values = [(0.0, 0.0); 2];
        for d in Domain::BOTH {
            let xs: Vec<f64> = idx
                .iter()
                .map(|&i| value(&runs[i], d))
                .collect::<Result<_>>()?;
            values[d.index()] = mean_and_se(&xs);
        }
        summary.push(GroupSummary {
            label,
            runs: idx.len(),
            values,
        });
    }

    let ttest = match compare {
        None => None,
        Some(c) => {
            let keyed: Vec<BTreeMap<String, String>> = runs
                .iter()
                .map(|r| settings(&r.config, &["out", c.key.as_str()]))
                .collect::<Result<_>>()?;
            let side = |r: &RunRecord| r.config.get(&c.key);
            let mut pairs = Vec::new();
            for (i, ri) in runs.iter().enumerate() {
                if side(ri)? != c.a {
                    continue;
                }
                let partner = (0..runs.len()).find(|&j| {
                    keyed[j] == keyed[i] && side(&runs[j]).ok().as_deref() == Some(c.b.as_str())
                });
                match partner {
                    Some(j) => pairs.push((i, j)),
                    None => log::warn!(
                        "{}: no partner run with {}={}",
                        ri.dir.display(),
                        c.key,
                        c.b
                    ),
                }
            }
            let mut tt = Vec::with_capacity(2);
            for d in Domain::BOTH {
                let a: Vec<f64> = pairs
                    .iter()
                    .map(|&(i, _)| value(&runs[i], d))
                    .collect::<Result<_>>()?;
                let b: Vec<f64> = pairs
                    .iter()
                    .map(|&(_, j)| value(&runs[j], d))
                    .collect::<Result<_>>()?;
                tt.push(paired_ttest(&a, &b)?);
            }
            Some([tt[0], tt[1]])
        }
    };
    let summary = ReportSummary {
        metric,
        k,
        groups: summary,
        ttest,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("report.csv"), summary.to_csv().as_bytes())?;
        write_json(&dir.join("report.json"), &summary.to_json())?;
    }
    Ok(summary)
}

/// FNV-1a over every file below `dir` (relative path and contents, in sorted
/// order). Equal fingerprints mean byte-identical trees.
pub fn dir_fingerprint(dir: impl AsRef<Path>) -> Result<u64> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, PathBuf)>) -> Result<()> {
        for e in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let p = e.map_err(|e| Error::io(dir, e))?.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                let rel = p
                    .strip_prefix(root)
                    .unwrap_or(&p)
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, p));
            }
        }
        Ok(())
    }
    let dir = dir.as_ref();
    let mut files = Vec::new();
    walk(dir, dir, &mut files)?;
    files.sort();
    let mut buf = Vec::new();
    for (rel, p) in files {
        buf.extend_from_slice(rel.as_bytes());
        buf.push(0);
        buf.extend_from_slice(&fs::read(&p).map_err(|e| Error::io(&p, e))?);
        buf.push(0);
    }
    Ok(fnv1a64(&buf))
}

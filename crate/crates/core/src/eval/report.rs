use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::dataio::storage::write_file;
use crate::dataio::{Domain, Phase};
use crate::error::{Error, Result};
use crate::eval::metrics::Metric;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub domain: Domain,
    pub metric: Metric,
    pub k: usize,
    pub value: f64,
}

/// Metric means per domain, plus optional analysis results and metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub phase: Phase,
    pub n_users: usize,
    pub seed: u64,
    pub config_hash: u32,
    pub cutoffs: Vec<usize>,
    pub rows: Vec<MetricRow>,
    /// Reciprocal rank without a cutoff, per domain.
    pub mrr_full: [f64; 2],
    /// Keyed by analysis name (`mmd`, `probe_auc`, `ttest`).
    pub analysis: BTreeMap<String, Value>,
    /// Free-form run metadata. Anything non-deterministic, such as wall-clock
    /// time, belongs here and nowhere else.
    pub metadata: BTreeMap<String, String>,
}

impl MetricsReport {
    pub fn new(phase: Phase, n_users: usize, cutoffs: Vec<usize>) -> Self {
        MetricsReport {
            phase,
            n_users,
            seed: 0,
            config_hash: 0,
            cutoffs,
            rows: Vec::new(),
            mrr_full: [0.0; 2],
            analysis: BTreeMap::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, domain: Domain, metric: Metric, k: usize, value: f64) {
        self.rows.push(MetricRow {
            domain,
            metric,
            k,
            value,
        });
    }

    pub fn get(&self, domain: Domain, metric: Metric, k: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.domain == domain && r.metric == metric && r.k == k)
            .map(|r| r.value)
    }

    /// Mean over both domains.
    pub fn mean(&self, metric: Metric, k: usize) -> Option<f64> {
        let a = self.get(Domain::A, metric, k)?;
        let b = self.get(Domain::B, metric, k)?;
        Some((a + b) / 2.0)
    }

    /// `domain,phase,metric,k,value`; the uncut MRR appears with `k = full`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("domain,phase,metric,k,value\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.domain,
                self.phase.name(),
                r.metric,
                r.k,
                r.value
            );
        }
        for d in Domain::BOTH {
            let _ = writeln!(
                s,
                "{},{},mrr,full,{}",
                d,
                self.phase.name(),
                self.mrr_full[d.index()]
            );
        }
        s
    }

    pub fn to_json(&self) -> Value {
        let mut metrics = Map::new();
        for d in Domain::BOTH {
            let mut m = Map::new();
            for r in self.rows.iter().filter(|r| r.domain == d) {
                m.insert(format!("{}@{}", r.metric, r.k), json!(r.value));
            }
            m.insert("mrr".into(), json!(self.mrr_full[d.index()]));
            metrics.insert(d.name().into(), Value::Object(m));
        }
        json!({
            "phase": self.phase.name(),
            "n_users": self.n_users,
            "seed": self.seed,
            "config_hash": format!("{:08x}", self.config_hash),
            "cutoffs": self.cutoffs,
            "metrics": metrics,
            "analysis": self.analysis,
            "metadata": self.metadata,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Format(format!("metrics report: bad or missing `{what}`"));
        let phase: Phase = v["phase"].as_str().ok_or_else(|| bad("phase"))?.parse()?;
        let n_users = v["n_users"].as_u64().ok_or_else(|| bad("n_users"))? as usize;
        let cutoffs: Vec<usize> = v["cutoffs"]
            .as_array()
            .ok_or_else(|| bad("cutoffs"))?
            .iter()
            .map(|k| k.as_u64().map(|k| k as usize).ok_or_else(|| bad("cutoffs")))
            .collect::<Result<_>>()?;
        let mut r = MetricsReport::new(phase, n_users, cutoffs.clone());
        r.seed = v["seed"].as_u64().ok_or_else(|| bad("seed"))?;
        r.config_hash = u32::from_str_radix(
            v["config_hash"]
                .as_str()
                .ok_or_else(|| bad("config_hash"))?,
            16,
        )
        .map_err(|_| bad("config_hash"))?;
        for d in Domain::BOTH {
            let m = &v["metrics"][d.name()];
            for metric in Metric::ALL {
                for &k in &cutoffs {
                    let key = format!("{metric}@{k}");
                    r.push(d, metric, k, m[&key].as_f64().ok_or_else(|| bad(&key))?);
                }
            }
            r.mrr_full[d.index()] = m["mrr"].as_f64().ok_or_else(|| bad("mrr"))?;
        }
        if let Some(obj) = v["analysis"].as_object() {
            r.analysis = obj.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        }
        if let Some(obj) = v["metadata"].as_object() {
            r.metadata = obj
                .iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        v.as_str()
                            .map(str::to_string)
                            .unwrap_or_else(|| v.to_string()),
                    )
                })
                .collect();
        }
        Ok(r)
    }

    /// Writes `metrics.csv` and `metrics.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_file(&dir.join("metrics.csv"), self.to_csv().as_bytes())?;
        let json = serde_json::to_string_pretty(&self.to_json())
            .map_err(|e| Error::Format(e.to_string()))?;
        write_file(&dir.join("metrics.json"), format!("{json}\n").as_bytes())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&v)
    }
}

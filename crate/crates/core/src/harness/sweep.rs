use std::collections::{BTreeMap, HashSet};
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::error::{invalid, Result};
use crate::forecaster::{run_online, BmForecaster};
use crate::rng::mix_seed;

use super::adversary::{generate_stream, AdversaryKind, AdversarySpec};
use super::select::{evaluate, parse_class, parse_losses, MetricName, NRule};

/// Environment variable bounding the sweep worker pool.
pub const THREADS_ENV: &str = "SWAPCAL_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(rename = "T_list")]
    pub t_list: Vec<usize>,
    pub d: usize,
    pub reps: usize,
    pub metric: String,
    pub n_rule: NRule,
    /// Comparator class; the metric's default when absent.
    #[serde(default)]
    pub class: Option<String>,
    /// Loss menu for `somni`, comma separated.
    #[serde(default)]
    pub losses: Option<String>,
    #[serde(default)]
    pub adversary: AdversaryKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Record wall-clock time per row. Off by default so result files are
    /// reproducible byte for byte.
    #[serde(default)]
    pub record_timing: bool,
}

impl SweepConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_list.is_empty() || self.t_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("T_list must be non-empty and strictly increasing"));
        }
        if self.reps == 0 || self.d == 0 {
            return Err(invalid("reps and d must be at least 1"));
        }
        let metric: MetricName = self.metric.parse()?;
        parse_class::<f64>(self.class.as_deref().unwrap_or(metric.default_class()))?;
        parse_losses::<f64>(self.losses.as_deref())?;
        Ok(())
    }
}

/// One line of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub rep: usize,
    pub seed: u64,
    pub metric: String,
    pub value: Option<f64>,
    pub wall_ms: u64,
    pub error: String,
}

/// Seed of the `(T, rep)` row, shared by its adversary and forecaster streams.
pub fn row_seed(base: u64, t: usize, rep: usize) -> u64 {
    mix_seed(mix_seed(base ^ mix_seed(t as u64)) ^ rep as u64)
}

pub fn run_row(cfg: &SweepConfig, t: usize, rep: usize) -> ResultRow {
    let seed = row_seed(cfg.seed, t, rep);
    let start = Instant::now();
    let mut row = ResultRow {
        t,
        n: 0,
        d: cfg.d,
        rep,
        seed,
        metric: cfg.metric.clone(),
        value: None,
        wall_ms: 0,
        error: String::new(),
    };
    let outcome = (|| -> Result<f64> {
        let metric: MetricName = cfg.metric.parse()?;
        let class = parse_class::<f64>(cfg.class.as_deref().unwrap_or(metric.default_class()))?;
        let losses = parse_losses::<f64>(cfg.losses.as_deref())?;
        row.n = cfg.n_rule.resolve(t, cfg.d)?;
        let stream = generate_stream::<f64>(&AdversarySpec::new(cfg.adversary.clone(), seed), t, cfg.d)?;
        let mut f = BmForecaster::new(row.n, cfg.d, seed)?.slim(true);
        let tr = run_online(&mut f, stream)?;
        Ok(evaluate(&tr, metric, &class, &losses)?.value)
    })();
    match outcome {
        Ok(v) => row.value = Some(v),
        Err(e) => row.error = e.to_string(),
    }
    if cfg.record_timing {
        row.wall_ms = start.elapsed().as_millis() as u64;
    }
    row
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.parse().ok().filter(|&n| n > 0)
}

/// Runs every missing `(T, rep)` row of the sweep, appending rows to `out` in
/// job order as they complete. Returns the full table including rows found in
/// an existing file.
pub fn run_sweep(cfg: &SweepConfig, out: &Path) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let existing = if out.exists() && std::fs::metadata(out)?.len() > 0 {
        read_results(out)?
    } else {
        Vec::new()
    };
    let done: HashSet<(usize, usize)> = existing.iter().map(|r| (r.t, r.rep)).collect();
    let jobs: Vec<(usize, usize)> = cfg
        .t_list
        .iter()
        .flat_map(|&t| (0..cfg.reps).map(move |rep| (t, rep)))
        .filter(|j| !done.contains(j))
        .collect();
    info!(pending = jobs.len(), skipped = done.len(), "starting sweep");

    let file = OpenOptions::new().create(true).append(true).open(out)?;
    let mut writer = csv::WriterBuilder::new().has_headers(existing.is_empty()).from_writer(file);

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| invalid(e.to_string()))?;

    let (tx, rx) = mpsc::channel::<(usize, ResultRow)>();
    let mut rows = existing;
    std::thread::scope(|scope| -> Result<()> {
        let jobs_ref = &jobs;
        scope.spawn(move || {
            pool.install(|| {
                jobs_ref.par_iter().enumerate().for_each_with(tx, |tx, (i, &(t, rep))| {
                    let _ = tx.send((i, run_row(cfg, t, rep)));
                });
            });
        });
        let mut pending: BTreeMap<usize, ResultRow> = BTreeMap::new();
        let mut next = 0;
        for (i, row) in rx {
            pending.insert(i, row);
            while let Some(row) = pending.remove(&next) {
                if !row.error.is_empty() {
                    warn!(t = row.t, rep = row.rep, error = %row.error, "row failed");
                }
                writer.serialize(&row)?;
                writer.flush()?;
                rows.push(row);
                next += 1;
            }
        }
        Ok(())
    })?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> SweepConfig {
        SweepConfig::from_json(r#"{"T_list":[4],"d":2,"reps":1,"metric":"cal2","n_rule":"auto-smcal","seed":3}"#).unwrap()
    }

    #[test]
    fn single_row_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("results.csv");
        let rows = run_sweep(&config(), &out).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].value.unwrap() >= 0.0);
        assert!(rows[0].error.is_empty());
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("T,N,d,rep,seed,metric,value,wall_ms,error\n"));
    }

    #[test]
    fn sweeps_are_reproducible_and_resumable() {
        let mut cfg = config();
        cfg.t_list = vec![8, 16, 32];
        cfg.reps = 3;
        cfg.metric = "smcal2".into();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        run_sweep(&cfg, &a).unwrap();
        run_sweep(&cfg, &b).unwrap();
        let text = std::fs::read(&a).unwrap();
        assert_eq!(text, std::fs::read(&b).unwrap());
        // A second run over a complete file adds nothing.
        let rows = run_sweep(&cfg, &a).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(std::fs::read(&a).unwrap(), text);
        // Extending the sweep appends only the new rows.
        cfg.t_list.push(64);
        let rows = run_sweep(&cfg, &a).unwrap();
        assert_eq!(rows.len(), 12);
        assert_eq!(read_results(&a).unwrap(), rows);
    }

    #[test]
    fn failing_rows_are_recorded() {
        let mut cfg = config();
        cfg.adversary = AdversaryKind::Csv {
            path: "/nonexistent/data.csv".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let rows = run_sweep(&cfg, &dir.path().join("r.csv")).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].value.is_none());
        assert!(!rows[0].error.is_empty());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(SweepConfig::from_json(r#"{"T_list":[8,4],"d":2,"reps":1,"metric":"cal2","n_rule":3}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"T_list":[4],"d":2,"reps":0,"metric":"cal2","n_rule":3}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"T_list":[4],"d":2,"reps":1,"metric":"nope","n_rule":3}"#).is_err());
    }
}

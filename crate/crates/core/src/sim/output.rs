//! Result files: per-seed series, the seed-mean aggregate and a JSON manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::config::RunConfig;
use super::experiment::{AggregateRow, ExperimentResult};
use crate::error::{Error, Result};
use crate::metrics::fmt_real;

pub const AGGREGATE_HEADER: [&str; 5] = ["t", "cost", "inst_regret", "cum_regret", "max_var"];

/// Version string in the style of `git describe`; the build may inject one.
pub fn version_string() -> String {
    option_env!("DSLC_GIT_DESCRIBE")
        .map(str::to_owned)
        .unwrap_or_else(|| format!("v{}", env!("CARGO_PKG_VERSION")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub seed_files: Vec<PathBuf>,
    pub aggregate: PathBuf,
    pub manifest: PathBuf,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: String,
    policy: String,
    seeds: &'a [u64],
    horizon: u64,
    config: &'a RunConfig,
    files: Vec<String>,
    started_unix_s: f64,
    finished_unix_s: f64,
    wall_clock_s: f64,
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record(&[
            r.t.to_string(),
            fmt_real(r.cost),
            fmt_real(r.inst_regret),
            fmt_real(r.cum_regret),
            fmt_real(r.max_var),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
                path: path.to_owned(),
                message: format!("bad value in column {k}"),
            })
        };
        rows.push(AggregateRow {
            t: num(0)? as u64,
            cost: num(1)?,
            inst_regret: num(2)?,
            cum_regret: num(3)?,
            max_var: num(4)?,
        });
    }
    Ok(rows)
}

fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Writes `seed_<s>.csv` per run, `aggregate.csv` and `manifest.json` into `dir`.
///
/// `started` is when the experiment began; it feeds the manifest's wall-clock entry.
pub fn write_results(result: &ExperimentResult, cfg: &RunConfig, dir: &Path, started: SystemTime) -> Result<OutputPaths> {
    if result.runs.is_empty() {
        return Err(Error::InvalidArgument("no runs to write".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut seed_files = Vec::with_capacity(result.runs.len());
    for run in &result.runs {
        let p = dir.join(format!("seed_{}.csv", run.seed));
        run.series.save_csv(&p)?;
        seed_files.push(p);
    }
    let aggregate = dir.join("aggregate.csv");
    write_aggregate_csv(&result.aggregate, &aggregate)?;

    let manifest = dir.join("manifest.json");
    let finished = SystemTime::now();
    let seeds: Vec<u64> = result.runs.iter().map(|r| r.seed).collect();
    let files = seed_files
        .iter()
        .chain(std::iter::once(&aggregate))
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    let body = Manifest {
        version: version_string(),
        policy: result.policy.to_string(),
        seeds: &seeds,
        horizon: cfg.horizon,
        config: cfg,
        files,
        started_unix_s: unix_seconds(started),
        finished_unix_s: unix_seconds(finished),
        wall_clock_s: finished.duration_since(started).map_or(0.0, |d| d.as_secs_f64()),
    };
    let text = serde_json::to_string_pretty(&body)?;
    std::fs::write(&manifest, text + "\n").map_err(|e| Error::io(&manifest, e))?;
    Ok(OutputPaths {
        seed_files,
        aggregate,
        manifest,
    })
}

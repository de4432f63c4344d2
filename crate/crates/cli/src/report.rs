//! Raw and aggregate result CSVs, their metadata sidecars, and reading the
//! aggregate back for plotting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use crowdalloc::{ResultTable, SweepConfig, TrialResult};

use crate::config::write_config;

pub const RAW_HEADER: &str = "policy,sweep_point,trial,final_error,labels_used";
pub const AGGREGATE_HEADER: &str = "policy,sweep_point,mean_error,std_error,ci95,trials";

pub fn raw_csv(trials: &[TrialResult]) -> String {
    let mut out = String::with_capacity(64 * (trials.len() + 1));
    out.push_str(RAW_HEADER);
    out.push('\n');
    for t in trials {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t.policy, t.sweep_point, t.trial, t.final_error, t.labels_used
        );
    }
    out
}

pub fn aggregate_csv(table: &ResultTable) -> String {
    let mut out = String::new();
    out.push_str(AGGREGATE_HEADER);
    out.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.policy, r.sweep_point, r.mean_error, r.std_error, r.ci95, r.trials
        );
    }
    out
}

/// Config echo written next to a results file.
pub fn metadata(kind: &str, cfg: &SweepConfig<f64>, note: Option<&str>) -> String {
    let mut out = format!("# crowdalloc {kind} sweep\n# master_seed = {}\n", cfg.master_seed);
    if let Some(n) = note {
        let _ = writeln!(out, "# note: {n}");
    }
    out.push_str(&write_config(cfg));
    out
}

/// Writes `contents` to `dir/name` and its sidecar `dir/name.meta`.
pub fn write_with_sidecar(dir: &Path, name: &str, contents: &str, meta: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    let meta_path = dir.join(format!("{name}.meta"));
    std::fs::write(&meta_path, meta).with_context(|| format!("writing {}", meta_path.display()))?;
    Ok(path)
}

/// One row of an aggregate CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRecord {
    pub policy: String,
    pub sweep_point: f64,
    pub mean_error: f64,
    pub std_error: f64,
    pub ci95: f64,
    pub trials: usize,
}

pub fn read_aggregate_csv(text: &str) -> Result<Vec<AggregateRecord>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == AGGREGATE_HEADER => {}
        Some((_, h)) => bail!("unexpected aggregate header {h:?}"),
        None => bail!("empty aggregate file"),
    }
    lines
        .map(|(i, line)| {
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 6 {
                bail!("line {}: expected 6 fields, found {}", i + 1, f.len());
            }
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| anyhow!("line {}: malformed number {s:?}", i + 1))
            };
            Ok(AggregateRecord {
                policy: f[0].to_string(),
                sweep_point: num(f[1])?,
                mean_error: num(f[2])?,
                std_error: num(f[3])?,
                ci95: num(f[4])?,
                trials: f[5]
                    .parse()
                    .map_err(|_| anyhow!("line {}: malformed trial count", i + 1))?,
            })
        })
        .collect()
}

//! Experiment dispatch, shared check bookkeeping and output plumbing.

pub mod hardcase_figures;
pub mod hull_sweep;
pub mod transfer_sweep;
pub mod warmstart;

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};

/// One acceptance check evaluated from the experiment's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Check { name: name.to_string(), pass, detail }
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub kind: &'static str,
    pub output_dir: String,
    pub seeds: Vec<u64>,
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

/// Run the experiment, write all figure data plus `summary.json` into the
/// output directory, and return the summary.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Summary> {
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output dir {}", out.display()))?;
    let (kind, checks) = match &cfg.kind {
        ExperimentKind::TransferSweep(c) => {
            ("transfer-sweep", transfer_sweep::run(c, &cfg.seeds, out)?)
        }
        ExperimentKind::HardcaseFigures(c) => {
            ("hardcase-figures", hardcase_figures::run(c, out)?)
        }
        ExperimentKind::Warmstart(c) => ("warmstart", warmstart::run(c, &cfg.seeds, out)?),
        ExperimentKind::HullSweep(c) => ("hull-sweep", hull_sweep::run(c, &cfg.seeds, out)?),
    };
    let summary = Summary {
        kind,
        output_dir: out.display().to_string(),
        seeds: cfg.seeds.clone(),
        all_pass: checks.iter().all(|c| c.pass),
        checks,
    };
    write_text(out, "summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(summary)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

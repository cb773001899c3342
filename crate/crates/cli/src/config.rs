//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// One fully specified experiment. The `kind` field selects the variant; the
/// remaining top-level keys are the variant's parameters.
#[derive(Debug, Deserialize)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    #[serde(flatten)]
    pub kind: ExperimentKind,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentKind {
    TransferSweep(TransferSweepCfg),
    HardcaseFigures(HardcaseFiguresCfg),
    Warmstart(WarmstartCfg),
    HullSweep(HullSweepCfg),
}

/// Which prior model a transfer sweep runs against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    /// Seeded dense random prior.
    #[default]
    Random,
    /// Fixed three-state prior whose optimal actions beat the runner-up by a
    /// margin wider than the elimination threshold, so every candidate set
    /// over multi-action states is a singleton.
    WideGap,
    /// Prior loaded from `prior_file`.
    File,
}

#[derive(Debug, Deserialize)]
pub struct TransferSweepCfg {
    #[serde(default)]
    pub instance: InstanceKind,
    pub prior_file: Option<PathBuf>,
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default = "default_actions")]
    pub actions: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_instance_seed")]
    pub instance_seed: u64,
    pub beta: f64,
    pub eps: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub budget_scales: Vec<f64>,
    #[serde(default)]
    pub checks: TransferChecks,
}

#[derive(Debug, Default, Deserialize)]
pub struct TransferChecks {
    /// Success-rate floor at the largest budget scale.
    pub min_success_rate: Option<f64>,
    /// Require every trial's retained count over multi-action states to equal
    /// the number of those states (singleton candidate sets).
    #[serde(default)]
    pub n_bar_equals_sprime: bool,
}

#[derive(Debug, Deserialize)]
pub struct HardcaseFiguresCfg {
    /// Panel 1: thresholds against beta, one curve pair per gamma.
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Panel 2: thresholds against gamma, one curve pair per beta.
    pub panel2_betas: Vec<f64>,
    pub panel2_gammas: Vec<f64>,
    /// Accuracy target as a fraction of each cell's eps ceiling.
    pub eps_frac: f64,
    pub family: FamilyCfg,
}

/// Reference hard-case family written out in full next to the grids.
#[derive(Debug, Deserialize)]
pub struct FamilyCfg {
    pub beta: f64,
    pub gamma: f64,
    /// Prior success probabilities, one nonincreasing row per decision state.
    pub p0: Vec<Vec<f64>>,
    /// Defaults to half the admissible ceiling.
    pub eps: Option<f64>,
}

#[derive(Debug, Deserialize)]
pub struct WarmstartCfg {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_wind_count")]
    pub wind_count: usize,
    #[serde(default)]
    pub wind_change: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub beta: f64,
    pub sweeps: usize,
    pub eval_every: usize,
    #[serde(default = "default_step_h")]
    pub step_h: f64,
    /// Fraction of seeds whose warm start must open strictly above the cold
    /// start. Defaults to all of them.
    #[serde(default = "default_one")]
    pub min_jumpstart_fraction: f64,
}

#[derive(Debug, Deserialize)]
pub struct HullSweepCfg {
    pub k: usize,
    #[serde(default = "default_states")]
    pub states: usize,
    #[serde(default = "default_actions")]
    pub actions: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_instance_seed")]
    pub base_seed: u64,
    pub eps: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Generative sample counts for the coefficient estimate, ascending.
    pub l_values: Vec<u64>,
}

fn default_states() -> usize {
    6
}
fn default_actions() -> usize {
    4
}
fn default_gamma() -> f64 {
    0.9
}
fn default_delta() -> f64 {
    0.05
}
fn default_instance_seed() -> u64 {
    1
}
fn default_wind_count() -> usize {
    1
}
fn default_step_h() -> f64 {
    50.0
}
fn default_one() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("config field `seeds` must be nonempty");
        }
        match &self.kind {
            ExperimentKind::TransferSweep(c) => {
                if c.budget_scales.is_empty() {
                    bail!("config field `budget_scales` must be nonempty");
                }
                match c.instance {
                    InstanceKind::File => {
                        let p = c.prior_file.as_ref().ok_or_else(|| {
                            anyhow::anyhow!("instance = \"file\" needs `prior_file`")
                        })?;
                        if !p.exists() {
                            bail!("prior_file {} does not exist", p.display());
                        }
                    }
                    _ if c.prior_file.is_some() => {
                        bail!("`prior_file` requires instance = \"file\"");
                    }
                    _ => {}
                }
            }
            ExperimentKind::HardcaseFigures(c) => {
                if c.betas.is_empty()
                    || c.gammas.is_empty()
                    || c.panel2_betas.is_empty()
                    || c.panel2_gammas.is_empty()
                {
                    bail!("grid axes must be nonempty");
                }
                if !(c.eps_frac > 0.0 && c.eps_frac < 1.0) {
                    bail!("config field `eps_frac` must lie in (0,1), got {}", c.eps_frac);
                }
                if c.family.p0.is_empty() {
                    bail!("config field `family.p0` must be nonempty");
                }
            }
            ExperimentKind::Warmstart(c) => {
                if c.eval_every == 0 || c.sweeps == 0 {
                    bail!("`sweeps` and `eval_every` must be positive");
                }
                if !(0.0..=1.0).contains(&c.min_jumpstart_fraction) {
                    bail!(
                        "config field `min_jumpstart_fraction` must lie in [0,1], got {}",
                        c.min_jumpstart_fraction
                    );
                }
            }
            ExperimentKind::HullSweep(c) => {
                if c.k == 0 {
                    bail!("config field `k` must be positive");
                }
                if c.l_values.is_empty() {
                    bail!("config field `l_values` must be nonempty");
                }
                if c.l_values.windows(2).any(|w| w[0] >= w[1]) {
                    bail!("config field `l_values` must be strictly ascending");
                }
            }
        }
        Ok(())
    }
}

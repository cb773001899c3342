//! Experiment harness for the transfer-mdp library.

mod config;
mod experiments;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use transfer_mdp::convexhull::select_anchor_pairs;
use transfer_mdp::hardcase::{eps_ceiling, HardCaseParams};
use transfer_mdp::mdp::value_iteration;
use transfer_mdp::GenerativeModel;

use config::ExperimentConfig;
use experiments::run_experiment;

/// Environment variable overriding the config's `output_dir`.
const OUTPUT_DIR_ENV: &str = "TRANSFER_MDP_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "transfer-mdp", version, about = "Transfer RL experiment harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment from a TOML config. Exit code 0 iff every
    /// acceptance check listed in the config passes.
    Run { config: PathBuf },
    /// Validate an MDP JSON file and print a short report.
    Validate { mdp: PathBuf },
    /// Build the three-layer hard-case family and print its derived
    /// parameters as JSON.
    Hardcase {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        gamma: f64,
        /// Accuracy target; defaults to half the admissible ceiling.
        #[arg(long)]
        eps: Option<f64>,
        /// Prior self-loop probabilities; one comma-separated nonincreasing
        /// row per occurrence, e.g. --p0 0.97,0.9,0.87,0.7
        #[arg(long = "p0", required = true)]
        p0: Vec<String>,
        /// Also write the prior, every hypothesis, and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a hull model from base MDP files and print its manifest; with a
    /// target, estimate the target's mixing coefficients from samples.
    Hull {
        /// Base MDP JSON files (one per hull vertex).
        #[arg(long, required = true, num_args = 1..)]
        bases: Vec<PathBuf>,
        /// Target MDP whose coefficients to estimate.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Generative samples for the estimate.
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { config } => return run(config),
        Cmd::Validate { mdp } => validate(mdp),
        Cmd::Hardcase { beta, gamma, eps, p0, out } => hardcase(beta, gamma, eps, &p0, out),
        Cmd::Hull { bases, target, samples, seed, eps, delta } => {
            hull(&bases, target, samples, seed, eps, delta)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(config_path: PathBuf) -> ExitCode {
    let summary = (|| -> Result<_> {
        let cfg = ExperimentConfig::load(&config_path)?;
        let out = match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) => PathBuf::from(dir),
            None => cfg.output_dir.clone(),
        };
        run_experiment(&cfg, &out)
    })();
    match summary {
        Ok(summary) => {
            for c in &summary.checks {
                println!(
                    "check {} : {} — {}",
                    c.name,
                    if c.pass { "PASS" } else { "FAIL" },
                    c.detail
                );
            }
            println!(
                "{}: {} ({} checks, outputs in {})",
                summary.kind,
                if summary.all_pass { "all checks passed" } else { "CHECKS FAILED" },
                summary.checks.len(),
                summary.output_dir
            );
            if summary.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn validate(path: PathBuf) -> Result<()> {
    let mdp = transfer_mdp::io::load_mdp(&path)
        .with_context(|| format!("validating {}", path.display()))?;
    let (v, _, _) = value_iteration(&mdp, 1e-9)?;
    let (vmin, vmax) = v
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    println!(
        "valid MDP: {} states, {} state-action pairs, gamma {}, optimal values in [{vmin}, {vmax}]",
        mdp.num_states(),
        mdp.num_pairs(),
        mdp.gamma()
    );
    Ok(())
}

fn hardcase(
    beta: f64,
    gamma: f64,
    eps: Option<f64>,
    p0_rows: &[String],
    out: Option<PathBuf>,
) -> Result<()> {
    let p0: Vec<Vec<f64>> = p0_rows
        .iter()
        .map(|row| {
            row.split(',')
                .map(|x| x.trim().parse::<f64>().with_context(|| format!("parsing p0 entry {x:?}")))
                .collect()
        })
        .collect::<Result<_>>()?;
    let l_actions = p0.first().map_or(0, Vec::len);
    let base = HardCaseParams {
        k_states: p0.len(),
        l_actions,
        beta,
        gamma,
        p0,
        eps: f64::MIN_POSITIVE,
    };
    let eps = match eps {
        Some(e) => e,
        None => eps_ceiling(&base)? / 2.0,
    };
    let params = HardCaseParams { eps, ..base };
    let manifest = match out {
        Some(dir) => {
            std::fs::create_dir_all(&dir)
                .with_context(|| format!("creating {}", dir.display()))?;
            experiments::hardcase_figures::materialize_family(&params, &dir)?
        }
        None => {
            let tmp = tempdir_lite()?;
            let m = experiments::hardcase_figures::materialize_family(&params, &tmp)?;
            std::fs::remove_dir_all(&tmp).ok();
            m
        }
    };
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(())
}

/// Scratch directory for the fileless `hardcase` invocation.
fn tempdir_lite() -> Result<PathBuf> {
    let dir = std::env::temp_dir().join(format!("transfer-mdp-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn hull(
    bases: &[PathBuf],
    target: Option<PathBuf>,
    samples: u64,
    seed: u64,
    eps: f64,
    delta: f64,
) -> Result<()> {
    let models: Vec<_> = bases
        .iter()
        .map(|p| transfer_mdp::io::load_mdp(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<_>>()?;
    let hull = select_anchor_pairs(&models)?;
    let mut report = serde_json::json!({
        "num_bases": hull.num_bases(),
        "anchor_pairs": hull.anchor_pairs,
        "lambda_min": hull.lambda_min,
        "lambda_max": hull.lambda_max,
        "theoretical_l": hull.theoretical_l(eps, delta),
    });
    if let Some(tpath) = target {
        let tgt = transfer_mdp::io::load_mdp(&tpath)
            .with_context(|| format!("loading {}", tpath.display()))?;
        if samples == 0 {
            bail!("--samples must be positive when a target is given");
        }
        let gm = GenerativeModel::new(tgt, seed);
        let (coeffs, _) =
            transfer_mdp::convexhull::estimate_coefficients(&hull, &gm, samples, seed)?;
        report["target"] = serde_json::json!({
            "file": tpath.display().to_string(),
            "samples": samples,
            "coefficients": coeffs.weights,
        });
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

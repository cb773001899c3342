//! Elimination-transfer sweep over budget scales and seeds.

use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;

use transfer_mdp::learners::LearnerConfig;
use transfer_mdp::mdp::{is_eps_optimal, perturb_within_ball, random_dense_mdp};
use transfer_mdp::transfer::{transfer_learn, ThresholdVariant, TransferConfig};
use transfer_mdp::{GenerativeModel, Mdp};

use crate::config::{InstanceKind, TransferSweepCfg};
use crate::experiments::{write_text, Check};
use crate::svg::{line_chart, Series};

struct TrialRow {
    budget_scale: f64,
    seed: u64,
    c_bar: f64,
    n_bar: usize,
    retained_total: usize,
    samples: u64,
    set_sizes: String,
    success: bool,
    worst_gap: f64,
}

/// Three-state prior whose optimal actions dominate by more than the
/// elimination threshold, so planning alone fixes the policy.
fn wide_gap_prior() -> Mdp {
    let transition = vec![
        vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
        vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        vec![vec![0.0, 0.0, 1.0]],
    ];
    let reward = vec![
        vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
        vec![vec![0.0, 0.9, 0.0], vec![0.0, 0.0, 0.0]],
        vec![vec![0.0, 0.0, 0.0]],
    ];
    Mdp::new(0.5, transition, reward).expect("static instance is valid")
}

fn build_prior(cfg: &TransferSweepCfg) -> Result<Mdp> {
    Ok(match cfg.instance {
        InstanceKind::Random => {
            random_dense_mdp(cfg.states, cfg.actions, cfg.gamma, cfg.instance_seed)?
        }
        InstanceKind::WideGap => wide_gap_prior(),
        InstanceKind::File => {
            transfer_mdp::io::load_mdp(cfg.prior_file.as_ref().expect("validated"))?
        }
    })
}

fn run_trial(prior: &Mdp, cfg: &TransferSweepCfg, scale: f64, seed: u64) -> Result<TrialRow> {
    let truth = perturb_within_ball(prior, cfg.beta, seed.wrapping_mul(2).wrapping_add(1))?;
    let gm = GenerativeModel::new(truth.clone(), seed ^ 0x5EED_5EED);
    let tcfg = TransferConfig {
        beta: cfg.beta,
        eps: cfg.eps,
        delta: cfg.delta,
        threshold_variant: ThresholdVariant::TheoremBound,
        learner: LearnerConfig { budget_scale: scale, ..LearnerConfig::default() },
    };
    let out = transfer_learn(prior, &gm, &tcfg)?;
    let report = is_eps_optimal(&truth, &out.policy, cfg.eps)?;
    let set_sizes = out
        .candidate_sets
        .sets
        .iter()
        .map(|s| s.len().to_string())
        .collect::<Vec<_>>()
        .join(";");
    Ok(TrialRow {
        budget_scale: scale,
        seed,
        c_bar: out.c_bar,
        n_bar: out.retained_over_sprime,
        retained_total: out.retained_total,
        samples: out.report.total,
        set_sizes,
        success: report.is_eps_optimal,
        worst_gap: report.worst_gap,
    })
}

pub fn run(cfg: &TransferSweepCfg, seeds: &[u64], out: &Path) -> Result<Vec<Check>> {
    let prior = build_prior(cfg)?;
    let jobs: Vec<(f64, u64)> = cfg
        .budget_scales
        .iter()
        .flat_map(|&sc| seeds.iter().map(move |&sd| (sc, sd)))
        .collect();
    let rows: Vec<TrialRow> = jobs
        .par_iter()
        .map(|&(sc, sd)| run_trial(&prior, cfg, sc, sd))
        .collect::<Result<_>>()?;

    let mut csv = String::from(
        "budget_scale,seed,c_bar,n_bar,retained_total,samples,set_sizes,success,worst_gap\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.budget_scale,
            r.seed,
            r.c_bar,
            r.n_bar,
            r.retained_total,
            r.samples,
            r.set_sizes,
            r.success,
            r.worst_gap
        ));
    }
    write_text(out, "trials.csv", &csv)?;

    let rates: Vec<(f64, f64)> = cfg
        .budget_scales
        .iter()
        .map(|&sc| {
            let hits =
                rows.iter().filter(|r| r.budget_scale == sc && r.success).count();
            (sc, hits as f64 / seeds.len() as f64)
        })
        .collect();
    let svg = line_chart(
        "transfer success rate",
        "budget scale",
        "success rate",
        &[Series { label: "success rate".into(), points: rates.clone(), dashed: false }],
    );
    write_text(out, "success_rate.svg", &svg)?;

    let mut checks = Vec::new();
    if let Some(min_rate) = cfg.checks.min_success_rate {
        let (sc, rate) = *rates.last().expect("budget_scales nonempty");
        checks.push(Check::new(
            "min_success_rate",
            rate >= min_rate,
            format!("success rate {rate} at budget scale {sc} (floor {min_rate})"),
        ));
    }
    if cfg.checks.n_bar_equals_sprime {
        let sprime = prior.multi_action_states().len();
        let ok = rows.iter().all(|r| r.n_bar == sprime);
        checks.push(Check::new(
            "n_bar_equals_sprime",
            ok,
            format!("retained counts vs {} multi-action states across {} trials", sprime, rows.len()),
        ));
    }
    Ok(checks)
}

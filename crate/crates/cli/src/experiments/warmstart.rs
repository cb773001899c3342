//! Warm-start versus cold-start Q-learning on a perturbed sailing pair.

use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;

use transfer_mdp::learners::{q_learning, LearnerConfig, LearningCurve};
use transfer_mdp::mdp::{perturb_within_ball, value_iteration, QFunction};
use transfer_mdp::sailing::{make_sailing, SailingInstance};
use transfer_mdp::GenerativeModel;

use crate::config::WarmstartCfg;
use crate::experiments::{write_text, Check};
use crate::svg::{line_chart, Series};

pub fn run(cfg: &WarmstartCfg, seeds: &[u64], out: &Path) -> Result<Vec<Check>> {
    let inst = SailingInstance {
        width: cfg.width,
        height: cfg.height,
        wind_count: cfg.wind_count,
        wind_change: cfg.wind_change,
        gamma: cfg.gamma,
    };
    inst.validate()?;
    let schedule: Vec<usize> = (0..=cfg.sweeps / cfg.eval_every)
        .map(|i| i * cfg.eval_every)
        .collect();
    let lcfg = LearnerConfig {
        max_iters: cfg.sweeps,
        step_h: cfg.step_h,
        ..LearnerConfig::default()
    };

    let curves: Vec<(u64, LearningCurve, LearningCurve)> = seeds
        .par_iter()
        .map(|&seed| -> Result<_> {
            // prior is the generated instance; the unknown model is a
            // perturbation of it inside the TV ball
            let prior = make_sailing(&inst, seed)?;
            let truth = perturb_within_ball(&prior, cfg.beta, seed ^ 0xB411)?;
            let (_, q_prior, _) = value_iteration(&prior, 1e-9)?;

            let gm_warm = GenerativeModel::new(truth.clone(), seed ^ 0x0A11);
            let (warm, _) = q_learning(&gm_warm, &q_prior, &lcfg, &schedule)?;
            let gm_cold = GenerativeModel::new(truth, seed ^ 0x0A11);
            let zero = QFunction {
                values: q_prior.values.iter().map(|row| vec![0.0; row.len()]).collect(),
            };
            let (cold, _) = q_learning(&gm_cold, &zero, &lcfg, &schedule)?;
            Ok((seed, warm, cold))
        })
        .collect::<Result<_>>()?;

    for (seed, warm, cold) in &curves {
        write_text(out, &format!("warm_seed{seed}.csv"), &warm.to_csv())?;
        write_text(out, &format!("cold_seed{seed}.csv"), &cold.to_csv())?;
    }

    // pointwise mean curves; identical schedules give identical sample counts
    let n_pts = curves[0].1.points.len();
    let mean_of = |pick: fn(&(u64, LearningCurve, LearningCurve)) -> &LearningCurve| {
        (0..n_pts)
            .map(|i| {
                let samples = pick(&curves[0]).points[i].samples_used;
                let mean = curves
                    .iter()
                    .map(|c| pick(c).points[i].greedy_mean_value)
                    .sum::<f64>()
                    / curves.len() as f64;
                (samples as f64, mean)
            })
            .collect::<Vec<_>>()
    };
    let warm_mean = mean_of(|c| &c.1);
    let cold_mean = mean_of(|c| &c.2);
    let mut csv = String::from("samples_used,warm_mean_value,cold_mean_value\n");
    for (i, (s, w)) in warm_mean.iter().enumerate() {
        csv.push_str(&format!("{},{},{}\n", *s as u64, w, cold_mean[i].1));
    }
    write_text(out, "mean_curves.csv", &csv)?;
    let svg = line_chart(
        "warm vs cold Q-learning (mean over seeds)",
        "samples",
        "mean greedy value",
        &[
            Series { label: "warm start".into(), points: warm_mean, dashed: false },
            Series { label: "cold start".into(), points: cold_mean, dashed: true },
        ],
    );
    write_text(out, "warmstart.svg", &svg)?;

    let wins = curves
        .iter()
        .filter(|(_, warm, cold)| {
            warm.points[0].greedy_mean_value > cold.points[0].greedy_mean_value
        })
        .count();
    let fraction = wins as f64 / curves.len() as f64;
    Ok(vec![Check::new(
        "jumpstart",
        fraction >= cfg.min_jumpstart_fraction,
        format!(
            "warm start opens strictly higher in {wins}/{} seeds (floor {})",
            curves.len(),
            cfg.min_jumpstart_fraction
        ),
    )])
}

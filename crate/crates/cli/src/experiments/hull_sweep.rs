//! Convex-hull coefficient recovery over sample budgets.

use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use transfer_mdp::convexhull::{
    estimate_coefficients, select_anchor_pairs, MixCoefficients,
};
use transfer_mdp::mdp::{policy_evaluation_exact, random_dense_mdp, value_iteration};
use transfer_mdp::{GenerativeModel, Mdp};

use crate::config::HullSweepCfg;
use crate::experiments::{median, write_text, Check};
use crate::svg::{line_chart, Series};

#[derive(Serialize)]
struct HullManifest {
    base_files: Vec<String>,
    anchor_pairs: Vec<(usize, usize)>,
    lambda_min: f64,
    lambda_max: f64,
    theoretical_l: f64,
}

struct TrialRow {
    seed: u64,
    l_samples: u64,
    coeff_err: f64,
    policy_gap: f64,
    bound: f64,
    bound_holds: bool,
}

/// Deterministic interior simplex point per seed.
fn simplex_point(k: usize, seed: u64) -> MixCoefficients {
    let mut weights = Vec::with_capacity(k);
    let mut acc = 1.0;
    for i in 0..k - 1 {
        let t = 0.15 + 0.7 * (((seed * 131 + 17 * i as u64) % 1009) as f64 / 1009.0);
        let w = acc * t / (k - i) as f64;
        weights.push(w);
        acc -= w;
    }
    weights.push(acc);
    MixCoefficients { weights }
}

pub fn run(cfg: &HullSweepCfg, seeds: &[u64], out: &Path) -> Result<Vec<Check>> {
    let bases: Vec<Mdp> = (0..cfg.k)
        .map(|i| random_dense_mdp(cfg.states, cfg.actions, cfg.gamma, cfg.base_seed + i as u64))
        .collect::<transfer_mdp::Result<_>>()?;
    let hull = select_anchor_pairs(&bases)?;

    let base_dir = out.join("bases");
    std::fs::create_dir_all(&base_dir)?;
    let mut base_files = Vec::new();
    for (i, b) in bases.iter().enumerate() {
        let name = format!("bases/base_{i}.json");
        transfer_mdp::io::save_mdp(b, out.join(&name))?;
        base_files.push(name);
    }
    let manifest = HullManifest {
        base_files,
        anchor_pairs: hull.anchor_pairs.clone(),
        lambda_min: hull.lambda_min,
        lambda_max: hull.lambda_max,
        theoretical_l: hull.theoretical_l(cfg.eps, cfg.delta),
    };
    write_text(out, "hull_manifest.json", &(serde_json::to_string_pretty(&manifest)? + "\n"))?;

    let jobs: Vec<(u64, u64)> = cfg
        .l_values
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&sd| (l, sd)))
        .collect();
    let gamma = cfg.gamma;
    let rows: Vec<TrialRow> = jobs
        .par_iter()
        .map(|&(l, seed)| -> Result<TrialRow> {
            let c_true = simplex_point(cfg.k, seed);
            let target = hull.mix(&c_true)?;
            let gm = GenerativeModel::new(target.clone(), seed ^ 0x4011);
            let (c_hat, _) = estimate_coefficients(&hull, &gm, l, seed ^ 0x7077)?;
            let surrogate = hull.mix(&c_hat)?;
            let (_, _, pi) = value_iteration(&surrogate, 1e-10)?;
            let (v_star, _, _) = value_iteration(&target, 1e-10)?;
            let v_pi = policy_evaluation_exact(&target, &pi)?;
            let policy_gap = v_star
                .values
                .iter()
                .zip(&v_pi.values)
                .map(|(a, b)| a - b)
                .fold(0.0f64, f64::max);
            let coeff_err = c_hat.l2_distance(&c_true);
            // planning on the surrogate is exact, so the eps/2 planning slack
            // plus the coefficient-error term bounds the policy gap
            let bound = cfg.eps / 2.0
                + 6.0 * coeff_err * (cfg.k as f64).sqrt() / (1.0 - gamma).powi(2)
                + 4e-10;
            Ok(TrialRow {
                seed,
                l_samples: l,
                coeff_err,
                policy_gap,
                bound,
                bound_holds: policy_gap <= bound,
            })
        })
        .collect::<Result<_>>()?;

    let mut csv = String::from("seed,l_samples,coeff_err,policy_gap,bound,bound_holds\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.seed, r.l_samples, r.coeff_err, r.policy_gap, r.bound, r.bound_holds
        ));
    }
    write_text(out, "trials.csv", &csv)?;

    let med_err: Vec<(f64, f64)> = cfg
        .l_values
        .iter()
        .map(|&l| {
            let mut errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.l_samples == l)
                .map(|r| r.coeff_err)
                .collect();
            errs.sort_by(f64::total_cmp);
            (l as f64, median(&errs))
        })
        .collect();
    let svg = line_chart(
        "coefficient error vs sample budget",
        "samples L",
        "median |C_hat - C|_2",
        &[Series { label: "median error".into(), points: med_err.clone(), dashed: false }],
    );
    write_text(out, "coeff_error.svg", &svg)?;

    let violations = rows.iter().filter(|r| !r.bound_holds).count();
    let shrinks = med_err.last().unwrap().1 < med_err.first().unwrap().1;
    Ok(vec![
        Check::new(
            "per_trial_bound",
            violations == 0,
            format!("{violations} violations across {} trials", rows.len()),
        ),
        Check::new(
            "error_shrinks_with_samples",
            shrinks,
            format!(
                "median error {} at L={} vs {} at L={}",
                med_err.last().unwrap().1,
                cfg.l_values.last().unwrap(),
                med_err.first().unwrap().1,
                cfg.l_values.first().unwrap()
            ),
        ),
    ])
}

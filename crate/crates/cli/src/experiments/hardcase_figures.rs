//! Threshold-relation grids plus a fully materialized reference family.

use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use transfer_mdp::hardcase::{
    build_family, derive_params, eps_ceiling, lower_bound_curves, separation_check,
    verify_ball_membership, GridCell, HardCaseDerived, HardCaseParams, SeparationReport,
};

use crate::config::HardcaseFiguresCfg;
use crate::experiments::{write_text, Check};
use crate::svg::{line_chart, Series};

#[derive(Serialize)]
pub struct FamilyManifest {
    pub params: HardCaseParams,
    pub derived: HardCaseDerived,
    pub num_hypotheses: usize,
    pub prior_file: String,
    pub hypothesis_files: Vec<String>,
    pub ball_membership: bool,
    pub separation: SeparationReport,
}

/// Build the family, write the prior and every hypothesis as MDP JSON files
/// into `out`, and return the manifest (also written as
/// `family_manifest.json`).
pub fn materialize_family(params: &HardCaseParams, out: &Path) -> Result<FamilyManifest> {
    let derived = derive_params(params)?;
    let fam = build_family(params)?;
    transfer_mdp::io::save_mdp(&fam.prior, out.join("prior.json"))?;
    let mut hypothesis_files = Vec::new();
    for (i, h) in fam.hypotheses().enumerate() {
        let name = format!("hypothesis_{i:03}.json");
        transfer_mdp::io::save_mdp(h, out.join(&name))?;
        hypothesis_files.push(name);
    }
    let manifest = FamilyManifest {
        params: params.clone(),
        derived,
        num_hypotheses: fam.num_hypotheses(),
        prior_file: "prior.json".into(),
        hypothesis_files,
        ball_membership: verify_ball_membership(&fam)?,
        separation: separation_check(&fam)?,
    };
    write_text(out, "family_manifest.json", &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(manifest)
}

fn grid_csv(cells: &[GridCell]) -> String {
    let mut csv = String::from("beta,gamma,eps,eps0,c_bar,c_lower,gamma_valid\n");
    for c in cells {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.beta, c.gamma, c.eps, c.eps0, c.c_bar, c.c_lower, c.gamma_valid
        ));
    }
    csv
}

/// Solid upper / dashed lower threshold curves, one pair per fixed parameter.
fn grid_svg(cells: &[GridCell], x_is_beta: bool) -> String {
    let mut series = Vec::new();
    let fixed: Vec<f64> = {
        let mut v: Vec<f64> =
            cells.iter().map(|c| if x_is_beta { c.gamma } else { c.beta }).collect();
        v.dedup();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let fixed_name = if x_is_beta { "gamma" } else { "beta" };
    for &f in &fixed {
        let pick = |c: &&GridCell| {
            c.gamma_valid && (if x_is_beta { c.gamma } else { c.beta }) == f
        };
        let upper: Vec<(f64, f64)> = cells
            .iter()
            .filter(pick)
            .map(|c| (if x_is_beta { c.beta } else { c.gamma }, c.c_bar))
            .collect();
        let lower: Vec<(f64, f64)> = cells
            .iter()
            .filter(pick)
            .map(|c| (if x_is_beta { c.beta } else { c.gamma }, c.c_lower))
            .collect();
        series.push(Series {
            label: format!("upper, {fixed_name}={f}"),
            points: upper,
            dashed: false,
        });
        series.push(Series {
            label: format!("lower, {fixed_name}={f}"),
            points: lower,
            dashed: true,
        });
    }
    line_chart(
        "elimination thresholds",
        if x_is_beta { "beta" } else { "gamma" },
        "threshold",
        &series,
    )
}

fn ordering_check(name: &str, cells: &[GridCell]) -> Check {
    let valid = cells.iter().filter(|c| c.gamma_valid).count();
    let violations = cells
        .iter()
        .filter(|c| c.gamma_valid && c.c_lower > c.c_bar + 1e-12)
        .count();
    Check::new(
        name,
        violations == 0,
        format!("{violations} ordering violations across {valid} valid cells"),
    )
}

pub fn run(cfg: &HardcaseFiguresCfg, out: &Path) -> Result<Vec<Check>> {
    let panel1 = lower_bound_curves(&cfg.betas, &cfg.gammas, cfg.eps_frac);
    let panel2 = lower_bound_curves(&cfg.panel2_betas, &cfg.panel2_gammas, cfg.eps_frac);
    write_text(out, "thresholds_vs_beta.csv", &grid_csv(&panel1))?;
    write_text(out, "thresholds_vs_gamma.csv", &grid_csv(&panel2))?;
    write_text(out, "thresholds_vs_beta.svg", &grid_svg(&panel1, true))?;
    write_text(out, "thresholds_vs_gamma.svg", &grid_svg(&panel2, false))?;

    // reference family, fully materialized next to the grids
    let fam_cfg = &cfg.family;
    let base = HardCaseParams {
        k_states: fam_cfg.p0.len(),
        l_actions: fam_cfg.p0.first().map_or(0, Vec::len),
        beta: fam_cfg.beta,
        gamma: fam_cfg.gamma,
        p0: fam_cfg.p0.clone(),
        eps: f64::MIN_POSITIVE,
    };
    let eps = match fam_cfg.eps {
        Some(e) => e,
        None => eps_ceiling(&base)? / 2.0,
    };
    let params = HardCaseParams { eps, ..base };
    let manifest = materialize_family(&params, out)?;

    Ok(vec![
        ordering_check("thresholds_vs_beta_ordering", &panel1),
        ordering_check("thresholds_vs_gamma_ordering", &panel2),
        Check::new(
            "family_ball_membership",
            manifest.ball_membership,
            format!(
                "{} hypotheses inside B(M0, {})",
                manifest.num_hypotheses, manifest.params.beta
            ),
        ),
        Check::new(
            "family_separation",
            manifest.separation.all_pass,
            format!(
                "best-action margins >= 2*eps = {} in every hypothesis",
                2.0 * manifest.params.eps
            ),
        ),
    ])
}

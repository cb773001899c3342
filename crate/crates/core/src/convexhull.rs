//! Transfer when the unknown MDP is a simplex mixture of K known base models:
//! pick anchor state-action pairs whose stacked transition rows identify the
//! mixture, estimate the coefficients by simplex-projected least squares from
//! generative samples, and plan on the reconstructed surrogate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{value_iteration, Mdp, Policy, DEFAULT_PLANNING_TOL};
use crate::sampling::GenerativeModel;

/// Singular values above this count toward rank.
const RANK_TOL: f64 = 1e-10;

/// Mixing weights on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixCoefficients {
    pub weights: Vec<f64>,
}

impl MixCoefficients {
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidConfig("mixing weights must be nonnegative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "mixing weights sum to {sum}, expected 1 within 1e-12"
            )));
        }
        Ok(())
    }

    pub fn l2_distance(&self, other: &MixCoefficients) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// K base models plus the anchor structure that identifies mixtures of them.
#[derive(Debug, Clone)]
pub struct HullModel {
    pub bases: Vec<Mdp>,
    /// K anchor (state, action) pairs; may contain repeats.
    pub anchor_pairs: Vec<(usize, usize)>,
    /// (K*S) x K: column k stacks base k's anchor transition rows, scaled 1/K.
    pub u_trun: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

fn check_shared_structure(bases: &[Mdp]) -> Result<()> {
    if bases.is_empty() {
        return Err(Error::InvalidConfig("need at least one base model".into()));
    }
    for (i, b) in bases.iter().enumerate().skip(1) {
        if !bases[0].same_structure(b) {
            return Err(Error::IncompatibleModels(format!(
                "base {i} does not share the structure of base 0"
            )));
        }
    }
    Ok(())
}

fn rank_of(m: &DMatrix<f64>) -> usize {
    m.clone().svd(false, false).singular_values.iter().filter(|&&s| s > RANK_TOL).count()
}

/// Greedy anchor selection: scan (s,a) pairs in index order, keep a pair when
/// its stacked block raises the rank, stop at rank K, pad with repeats of the
/// first anchor if rank K arrives early. Errors if even the full stack is
/// rank deficient.
pub fn select_anchor_pairs(bases: &[Mdp]) -> Result<HullModel> {
    check_shared_structure(bases)?;
    let k = bases.len();
    let n = bases[0].num_states();

    let block = |s: usize, a: usize| -> DMatrix<f64> {
        DMatrix::from_fn(n, k, |sp, kk| bases[kk].transition_row(s, a)[sp])
    };

    // full-stack rank check (the identifiability assumption)
    let mut full_rows = Vec::new();
    for s in 0..n {
        for a in 0..bases[0].num_actions(s) {
            full_rows.push(block(s, a));
        }
    }
    let full = stack_rows(&full_rows, k);
    let full_rank = rank_of(&full);
    if full_rank < k {
        return Err(Error::RankDeficient { rank: full_rank, k });
    }

    let mut anchors: Vec<(usize, usize)> = Vec::new();
    let mut kept_blocks: Vec<DMatrix<f64>> = Vec::new();
    let mut rank = 0usize;
    'outer: for s in 0..n {
        for a in 0..bases[0].num_actions(s) {
            let b = block(s, a);
            let mut trial = kept_blocks.clone();
            trial.push(b.clone());
            let r = rank_of(&stack_rows(&trial, k));
            if r > rank {
                rank = r;
                anchors.push((s, a));
                kept_blocks.push(b);
                if rank == k {
                    break 'outer;
                }
            }
        }
    }
    debug_assert_eq!(rank, k);
    while anchors.len() < k {
        // redundant anchors keep the shape (K*S x K) without changing rank
        anchors.push(anchors[0]);
        kept_blocks.push(kept_blocks[0].clone());
    }

    let u_trun = stack_rows(&kept_blocks, k) / k as f64;
    let gram = u_trun.transpose() * &u_trun;
    let eigen = gram.symmetric_eigen();
    let lambda_min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda_max = eigen.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(HullModel {
        bases: bases.to_vec(),
        anchor_pairs: anchors,
        u_trun,
        lambda_min,
        lambda_max,
    })
}

fn stack_rows(blocks: &[DMatrix<f64>], cols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(b);
        at += b.nrows();
    }
    out
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> MixCoefficients {
    let k = v.len();
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (i as f64 + 1.0);
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut weights: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // exact renormalization residue to the largest weight
    let sum: f64 = weights.iter().sum();
    let resid = 1.0 - sum;
    if resid != 0.0 {
        let imax = (0..k).max_by(|&i, &j| weights[i].total_cmp(&weights[j])).unwrap();
        weights[imax] += resid;
    }
    MixCoefficients { weights }
}

impl HullModel {
    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    /// Exact stacked anchor vector of a candidate target model (noise-free
    /// mode); same 1/K scaling as `u_trun`.
    pub fn exact_p_vector(&self, target: &Mdp) -> Result<DVector<f64>> {
        if !self.bases[0].same_structure(target) {
            return Err(Error::IncompatibleModels(
                "target does not share the base models' structure".into(),
            ));
        }
        let n = target.num_states();
        let k = self.num_bases();
        let mut p = DVector::zeros(k * n);
        for (j, &(s, a)) in self.anchor_pairs.iter().enumerate() {
            for (sp, &prob) in target.transition_row(s, a).iter().enumerate() {
                p[j * n + sp] = prob / k as f64;
            }
        }
        Ok(p)
    }

    /// Least-squares coefficients for a stacked anchor vector, projected onto
    /// the simplex. Solved by SVD, which coincides with the normal-equations
    /// solution because `u_trun` has full column rank.
    pub fn coefficients_from_p(&self, p: &DVector<f64>) -> Result<MixCoefficients> {
        let svd = self.u_trun.clone().svd(true, true);
        let c = svd
            .solve(p, 1e-14)
            .map_err(|e| Error::PlanningFailure(format!("least-squares solve failed: {e}")))?;
        Ok(project_simplex(c.as_slice()))
    }

    /// Convex combination of the base kernels and rewards.
    pub fn mix(&self, c: &MixCoefficients) -> Result<Mdp> {
        c.validate()?;
        if c.weights.len() != self.num_bases() {
            return Err(Error::InvalidConfig(format!(
                "{} weights for {} bases",
                c.weights.len(),
                self.num_bases()
            )));
        }
        let proto = &self.bases[0];
        let n = proto.num_states();
        let mut transition = Vec::with_capacity(n);
        let mut reward = Vec::with_capacity(n);
        for s in 0..n {
            let mut t_rows = Vec::with_capacity(proto.num_actions(s));
            let mut r_rows = Vec::with_capacity(proto.num_actions(s));
            for a in 0..proto.num_actions(s) {
                let mut t = vec![0.0; n];
                let mut r = vec![0.0; n];
                for (kk, base) in self.bases.iter().enumerate() {
                    let w = c.weights[kk];
                    for sp in 0..n {
                        t[sp] += w * base.transition_row(s, a)[sp];
                        r[sp] += w * base.reward_triple(s, a, sp);
                    }
                }
                // convexity keeps entries valid; absorb float residue
                let resid = 1.0 - t.iter().sum::<f64>();
                if resid != 0.0 {
                    let imax = (0..n).max_by(|&i, &j| t[i].total_cmp(&t[j])).unwrap();
                    t[imax] += resid;
                }
                for x in r.iter_mut() {
                    *x = x.clamp(0.0, 1.0);
                }
                t_rows.push(t);
                r_rows.push(r);
            }
            transition.push(t_rows);
            reward.push(r_rows);
        }
        Mdp::new(proto.gamma(), transition, reward)
    }

    /// The theoretical sample count
    /// ceil(432 K lambda_max / (eps^2 (1-gamma)^4 lambda_min^2) * log((1+K S)/delta)).
    pub fn theoretical_l(&self, eps: f64, delta: f64) -> f64 {
        let k = self.num_bases() as f64;
        let s = self.bases[0].num_states() as f64;
        let gamma = self.bases[0].gamma();
        (432.0 * k * self.lambda_max
            / (eps * eps * (1.0 - gamma).powi(4) * self.lambda_min * self.lambda_min))
            * ((1.0 + k * s) / delta).ln()
    }
}

/// Coefficient estimate from `l_samples` generative draws: each draw picks an
/// anchor uniformly, samples its transition once, and increments the matching
/// coordinate of the empirical stacked vector.
pub fn estimate_coefficients(
    hull: &HullModel,
    gm: &GenerativeModel,
    l_samples: u64,
    seed: u64,
) -> Result<(MixCoefficients, DVector<f64>)> {
    if l_samples == 0 {
        return Err(Error::ZeroBudget);
    }
    let k = hull.num_bases();
    let n = hull.bases[0].num_states();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p_hat = DVector::zeros(k * n);
    for _ in 0..l_samples {
        let j = rng.random_range(0..k);
        let (s, a) = hull.anchor_pairs[j];
        let (sp, _) = gm.sample(s, a)?;
        p_hat[j * n + sp] += 1.0;
    }
    p_hat /= l_samples as f64;
    let c = hull.coefficients_from_p(&p_hat)?;
    Ok((c, p_hat))
}

#[derive(Debug, Clone)]
pub struct HullTransferOutcome {
    pub policy: Policy,
    pub coefficients: MixCoefficients,
    pub samples_used: u64,
    pub theoretical_l: f64,
}

/// End-to-end hull transfer: estimate coefficients with
/// `L = ceil(theoretical * l_scale)` samples (at least 1), rebuild the
/// surrogate mixture, and return its exactly planned greedy policy.
pub fn hull_transfer(
    hull: &HullModel,
    gm: &GenerativeModel,
    eps: f64,
    delta: f64,
    l_scale: f64,
    seed: u64,
) -> Result<HullTransferOutcome> {
    if !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) || !(l_scale > 0.0) {
        return Err(Error::InvalidConfig(
            "hull transfer needs eps > 0, delta in (0,1), l_scale > 0".into(),
        ));
    }
    let theoretical = hull.theoretical_l(eps, delta);
    let l_samples = (theoretical * l_scale).ceil().max(1.0) as u64;
    let (coefficients, _) = estimate_coefficients(hull, gm, l_samples, seed)?;
    let surrogate = hull.mix(&coefficients)?;
    let tol = DEFAULT_PLANNING_TOL.min(eps / 2.0);
    let (_, _, policy) = value_iteration(&surrogate, tol)?;
    Ok(HullTransferOutcome { policy, coefficients, samples_used: l_samples, theoretical_l: theoretical })
}

//! The three-layer lower-bound family.
//!
//! Topology: `K` decision states `x_k`, each with `L` actions. Action `a_l`
//! at `x_k` moves deterministically to its own middle state `y1(k,l)`, which
//! self-loops with probability `p(x_k,a_l)` and otherwise falls into the
//! absorbing state `y2(k,l)`. Reward is 1 exactly when the next state is in
//! the `y1` layer, so `Q(x_k,a_l) = 1/(1 - gamma * p(x_k,a_l))` in closed
//! form. A prior `M0` together with a pencil of hypotheses that all sit
//! inside the TV ball `B(M0, beta)` yet disagree about the best action makes
//! action elimination provably necessary-and-sufficient at matching
//! thresholds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{tv_distance, value_iteration, Mdp};
use crate::sampling::GenerativeModel;
use crate::transfer::{compute_c_bar, ThresholdVariant};

/// Instance parameters for the family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardCaseParams {
    /// Number of decision (x) states.
    pub k_states: usize,
    /// Actions per decision state.
    pub l_actions: usize,
    pub beta: f64,
    pub gamma: f64,
    /// `p0[k][l]` - prior self-loop probabilities, rows nonincreasing, with
    /// `p0[k][0]` in ((4*gamma-1)/(3*gamma), 1).
    pub p0: Vec<Vec<f64>>,
    pub eps: f64,
}

/// Lower edge of the admissible leading-probability range.
pub fn p_floor(gamma: f64) -> f64 {
    (4.0 * gamma - 1.0) / (3.0 * gamma)
}

impl HardCaseParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_states == 0 || self.l_actions == 0 {
            return Err(Error::ParameterDomain(
                "need at least one decision state and one action".into(),
            ));
        }
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(Error::ParameterDomain(format!(
                "beta must lie in (0,2), got {}",
                self.beta
            )));
        }
        let gamma_floor = 0.4f64.max(1.0 - 10.0 * self.beta);
        if !(self.gamma > gamma_floor && self.gamma < 1.0) {
            return Err(Error::ParameterDomain(format!(
                "gamma must lie in ({gamma_floor},1) for beta = {}, got {}",
                self.beta, self.gamma
            )));
        }
        if self.p0.len() != self.k_states {
            return Err(Error::ParameterDomain(format!(
                "p0 has {} rows, expected {}",
                self.p0.len(),
                self.k_states
            )));
        }
        let floor = p_floor(self.gamma);
        for (k, row) in self.p0.iter().enumerate() {
            if row.len() != self.l_actions {
                return Err(Error::ParameterDomain(format!(
                    "p0 row {k} has {} entries, expected {}",
                    row.len(),
                    self.l_actions
                )));
            }
            if !(row[0] > floor && row[0] < 1.0) {
                return Err(Error::ParameterDomain(format!(
                    "p0[{k}][0] must lie in ({floor},1), got {}",
                    row[0]
                )));
            }
            for l in 0..row.len() {
                if !(0.0..=1.0).contains(&row[l]) {
                    return Err(Error::ParameterDomain(format!(
                        "p0[{k}][{l}] = {} is not a probability",
                        row[l]
                    )));
                }
                if l > 0 && row[l] > row[l - 1] {
                    return Err(Error::ParameterDomain(format!(
                        "p0 row {k} is not nonincreasing at column {l}"
                    )));
                }
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Closed-form quantities derived from the parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardCaseDerived {
    /// Reference probability per decision state:
    /// max{p0[k][0] - beta/2, (4*gamma-1)/(3*gamma)}.
    pub p0k: Vec<f64>,
    /// Largest admissible eps for the construction.
    pub eps0: f64,
    /// Advantage bump making a_1 the best by exactly 2*eps.
    pub alpha1: Vec<f64>,
    /// Larger bump used by the alternative hypotheses.
    pub alpha2: Vec<f64>,
    /// Number of confusable actions per decision state (a prefix of the row).
    pub lk: Vec<usize>,
    /// Lower elimination threshold per decision state.
    pub c_lower: Vec<f64>,
    /// Upper elimination threshold for the same (beta, gamma, eps).
    pub c_bar: f64,
}

fn q_of(gamma: f64, p: f64) -> f64 {
    1.0 / (1.0 - gamma * p)
}

/// Largest admissible accuracy target for given parameters.
pub fn eps_ceiling(params: &HardCaseParams) -> Result<f64> {
    params.validate()?;
    let floor = p_floor(params.gamma);
    Ok(params
        .p0
        .iter()
        .map(|row| {
            let p0k = (row[0] - params.beta / 2.0).max(floor);
            params.beta * params.gamma * (1.0 - p0k)
                / (16.0 * (1.0 - params.gamma * p0k).powi(2))
        })
        .fold(f64::INFINITY, f64::min))
}

pub fn derive_params(params: &HardCaseParams) -> Result<HardCaseDerived> {
    params.validate()?;
    let gamma = params.gamma;
    let beta = params.beta;
    let eps = params.eps;
    let floor = p_floor(gamma);

    let p0k: Vec<f64> = params
        .p0
        .iter()
        .map(|row| (row[0] - beta / 2.0).max(floor))
        .collect();
    let eps0 = p0k
        .iter()
        .map(|&p| beta * gamma * (1.0 - p) / (16.0 * (1.0 - gamma * p).powi(2)))
        .fold(f64::INFINITY, f64::min);
    if eps >= eps0 {
        return Err(Error::ParameterDomain(format!(
            "eps = {eps} violates eps < eps0 = {eps0}; shrink eps or grow beta"
        )));
    }

    let mut alpha1 = Vec::with_capacity(params.k_states);
    let mut alpha2 = Vec::with_capacity(params.k_states);
    let mut lk = Vec::with_capacity(params.k_states);
    for (k, &p) in p0k.iter().enumerate() {
        // invert q_of(gamma, p + a1) = q_of(gamma, p) + 2 eps
        let a1 = (1.0 - 1.0 / (q_of(gamma, p) + 2.0 * eps)) / gamma - p;
        let a2 = 4.0 * (1.0 - gamma * p).powi(2) * eps / gamma;

        let resid = q_of(gamma, p + a1) - q_of(gamma, p) - 2.0 * eps;
        if resid.abs() > 1e-10 {
            return Err(Error::ParameterDomain(format!(
                "alpha1 closed form failed to reproduce the defining equation \
                 (residual {resid:e} at k = {k})"
            )));
        }
        let gap = q_of(gamma, p + a2) - q_of(gamma, p + a1);
        if gap < 2.0 * eps - 1e-12 {
            return Err(Error::ParameterDomain(format!(
                "advantage gap {gap} < 2 eps at k = {k}"
            )));
        }
        if !(0.0 < a1 && a1 < a2 && a2 < beta / 2.0) {
            return Err(Error::ParameterDomain(format!(
                "expected 0 < alpha1 < alpha2 < beta/2 at k = {k}, \
                 got alpha1 = {a1}, alpha2 = {a2}"
            )));
        }
        if p + a2 >= 1.0 {
            return Err(Error::ParameterDomain(format!(
                "p0k + alpha2 = {} >= 1 at k = {k}",
                p + a2
            )));
        }

        let center = p + a2;
        let members: Vec<usize> = (0..params.l_actions)
            .filter(|&l| (center - params.p0[k][l]).abs() <= beta / 2.0)
            .collect();
        // the sorted row makes the window a prefix
        for (i, &m) in members.iter().enumerate() {
            if m != i {
                return Err(Error::ParameterDomain(format!(
                    "confusable-action window is not a prefix at k = {k}"
                )));
            }
        }
        lk.push(members.len());
        alpha1.push(a1);
        alpha2.push(a2);
    }

    let c_lower = params
        .p0
        .iter()
        .map(|row| c_lower_threshold(beta, gamma, eps, row[0]))
        .collect();
    let c_bar = compute_c_bar(beta, gamma, eps, ThresholdVariant::TheoremBound);
    Ok(HardCaseDerived { p0k, eps0, alpha1, alpha2, lk, c_lower, c_bar })
}

/// Lower elimination threshold at a decision state whose prior best action
/// has self-loop probability `p_lead`; two-case closed form.
pub fn c_lower_threshold(beta: f64, gamma: f64, eps: f64, p_lead: f64) -> f64 {
    let v = q_of(gamma, p_lead);
    if beta / 2.0 + p_floor(gamma) >= 1.0 {
        v - 9.0
            / (12.0 * (1.0 - gamma) - 64.0 * (1.0 - gamma).powi(2) * eps
                + 4.5 * beta * gamma)
    } else {
        v - v * v
            / (v + beta * gamma * v * v
                + 4.0 * eps * (1.0 + gamma * beta * v / 2.0).powi(2))
    }
}

/// Direct form of the same threshold, via the confusability window edge.
pub fn c_lower_direct(gamma: f64, p_lead: f64, p0k: f64, alpha2: f64, beta: f64) -> f64 {
    q_of(gamma, p_lead) - q_of(gamma, p0k + alpha2 - beta / 2.0)
}

/// Prior plus all alternative hypotheses.
#[derive(Debug, Clone)]
pub struct HardCaseFamily {
    pub params: HardCaseParams,
    pub derived: HardCaseDerived,
    pub prior: Mdp,
    /// Hypothesis where a_1 is best everywhere by exactly 2*eps.
    pub m1: Mdp,
    /// `(k, l, model)` with `l` a 0-based slot in `1..lk[k]`: the hypothesis
    /// making `a_l` at `x_k` the best action.
    pub hypotheses_kl: Vec<(usize, usize, Mdp)>,
}

impl HardCaseFamily {
    pub fn x_state(&self, k: usize) -> usize {
        k
    }

    pub fn y1_state(&self, k: usize, l: usize) -> usize {
        self.params.k_states + k * self.params.l_actions + l
    }

    pub fn y2_state(&self, k: usize, l: usize) -> usize {
        self.params.k_states * (1 + self.params.l_actions)
            + k * self.params.l_actions
            + l
    }

    /// All hypotheses, `m1` first, then the `(k,l)` pencil in build order.
    pub fn hypotheses(&self) -> impl Iterator<Item = &Mdp> {
        std::iter::once(&self.m1).chain(self.hypotheses_kl.iter().map(|(_, _, m)| m))
    }

    pub fn num_hypotheses(&self) -> usize {
        1 + self.hypotheses_kl.len()
    }

    /// Generative-model oracle for hypothesis `idx` (0 = m1).
    pub fn oracle(&self, idx: usize, seed: u64) -> Option<GenerativeModel> {
        self.hypotheses()
            .nth(idx)
            .map(|m| GenerativeModel::new(m.clone(), seed))
    }
}

/// Build the three-layer MDP with the given self-loop probability matrix.
pub fn build_layer_mdp(gamma: f64, p: &[Vec<f64>]) -> Result<Mdp> {
    let k_states = p.len();
    let l_actions = p[0].len();
    let n = k_states * (1 + 2 * l_actions);
    let y1 = |k: usize, l: usize| k_states + k * l_actions + l;
    let y2 = |k: usize, l: usize| k_states * (1 + l_actions) + k * l_actions + l;

    let mut transition = Vec::with_capacity(n);
    let mut reward = Vec::with_capacity(n);
    for k in 0..k_states {
        let mut t_rows = Vec::with_capacity(l_actions);
        let mut r_rows = Vec::with_capacity(l_actions);
        for l in 0..l_actions {
            let mut t = vec![0.0; n];
            t[y1(k, l)] = 1.0;
            let mut r = vec![0.0; n];
            r[y1(k, l)] = 1.0;
            t_rows.push(t);
            r_rows.push(r);
        }
        transition.push(t_rows);
        reward.push(r_rows);
    }
    for k in 0..k_states {
        for l in 0..l_actions {
            let mut t = vec![0.0; n];
            t[y1(k, l)] = p[k][l];
            t[y2(k, l)] = 1.0 - p[k][l];
            let mut r = vec![0.0; n];
            r[y1(k, l)] = 1.0;
            transition.push(vec![t]);
            reward.push(vec![r]);
        }
    }
    for k in 0..k_states {
        for l in 0..l_actions {
            let mut t = vec![0.0; n];
            t[y2(k, l)] = 1.0;
            transition.push(vec![t]);
            reward.push(vec![vec![0.0; n]]);
        }
    }
    Mdp::new(gamma, transition, reward)
}

pub fn build_family(params: &HardCaseParams) -> Result<HardCaseFamily> {
    let derived = derive_params(params)?;
    let prior = build_layer_mdp(params.gamma, &params.p0)?;

    // M1: a_1 bumped to p0k + alpha1; confusable runners-up flattened to p0k;
    // the rest untouched.
    let mut p_m1 = params.p0.clone();
    for k in 0..params.k_states {
        p_m1[k][0] = derived.p0k[k] + derived.alpha1[k];
        for l in 1..derived.lk[k] {
            p_m1[k][l] = derived.p0k[k];
        }
    }
    let m1 = build_layer_mdp(params.gamma, &p_m1)?;

    let mut hypotheses_kl = Vec::new();
    for k in 0..params.k_states {
        for l in 1..derived.lk[k] {
            let mut p = p_m1.clone();
            p[k][l] = derived.p0k[k] + derived.alpha2[k];
            hypotheses_kl.push((k, l, build_layer_mdp(params.gamma, &p)?));
        }
    }
    Ok(HardCaseFamily { params: params.clone(), derived, prior, m1, hypotheses_kl })
}

/// True iff every hypothesis lies inside the TV ball around the prior.
pub fn verify_ball_membership(fam: &HardCaseFamily) -> Result<bool> {
    for h in fam.hypotheses() {
        if tv_distance(&fam.prior, h)? > fam.params.beta {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Per-hypothesis best-action margins established by exact planning.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    /// Per decision state: gap between a_1 and the runner-up in m1
    /// (infinite when the state has a single action).
    pub m1_margins: Vec<f64>,
    /// Per (k, l) hypothesis: Q*(x_k, a_l) - Q*(x_k, a_1).
    pub kl_margins: Vec<(usize, usize, f64)>,
    pub all_pass: bool,
}

pub fn separation_check(fam: &HardCaseFamily) -> Result<SeparationReport> {
    let eps = fam.params.eps;
    let tol = 1e-10;
    let mut all_pass = true;

    let (_, q1, _) = value_iteration(&fam.m1, tol)?;
    let mut m1_margins = Vec::with_capacity(fam.params.k_states);
    for k in 0..fam.params.k_states {
        let qs = &q1.values[k];
        let best = (0..qs.len()).max_by(|&i, &j| qs[i].total_cmp(&qs[j])).unwrap();
        if best != 0 {
            all_pass = false;
        }
        let margin = if qs.len() > 1 {
            let runner = qs
                .iter()
                .enumerate()
                .filter(|&(a, _)| a != best)
                .map(|(_, &q)| q)
                .fold(f64::NEG_INFINITY, f64::max);
            qs[best] - runner
        } else {
            f64::INFINITY
        };
        // with at least one confusable runner-up the margin is exactly 2 eps
        if fam.derived.lk[k] >= 2 && (margin - 2.0 * eps).abs() > 1e-9 {
            all_pass = false;
        }
        if margin < 2.0 * eps - 1e-9 {
            all_pass = false;
        }
        m1_margins.push(margin);
    }

    let mut kl_margins = Vec::with_capacity(fam.hypotheses_kl.len());
    for (k, l, model) in &fam.hypotheses_kl {
        let (_, q, _) = value_iteration(model, tol)?;
        let qs = &q.values[*k];
        let best = (0..qs.len()).max_by(|&i, &j| qs[i].total_cmp(&qs[j])).unwrap();
        if best != *l {
            all_pass = false;
        }
        let margin = qs[*l] - qs[0];
        if margin < 2.0 * eps - 1e-9 {
            all_pass = false;
        }
        kl_margins.push((*k, *l, margin));
    }
    Ok(SeparationReport { m1_margins, kl_margins, all_pass })
}

/// One cell of the parameter-relation grids.
#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub beta: f64,
    pub gamma: f64,
    pub eps: f64,
    pub eps0: f64,
    pub c_bar: f64,
    pub c_lower: f64,
    /// gamma inside (max{0.4, 1-10 beta}, 1)
    pub gamma_valid: bool,
}

/// Closed-form threshold curves over a (beta, gamma) grid, with the reference
/// probability pinned at its floor (4 gamma - 1)/(3 gamma) and
/// `eps = eps_frac * eps0` per cell.
pub fn lower_bound_curves(betas: &[f64], gammas: &[f64], eps_frac: f64) -> Vec<GridCell> {
    let mut cells = Vec::with_capacity(betas.len() * gammas.len());
    for &beta in betas {
        for &gamma in gammas {
            let gamma_valid = gamma > 0.4f64.max(1.0 - 10.0 * beta) && gamma < 1.0;
            let p0k = p_floor(gamma);
            let eps0 = beta * gamma * (1.0 - p0k) / (16.0 * (1.0 - gamma * p0k).powi(2));
            let eps = eps_frac * eps0;
            let c_bar = compute_c_bar(beta, gamma, eps, ThresholdVariant::TheoremBound);
            let c_lower = c_lower_threshold(beta, gamma, eps, p0k);
            cells.push(GridCell { beta, gamma, eps, eps0, c_bar, c_lower, gamma_valid });
        }
    }
    cells
}

/// Sizes of the prior candidate sets at the per-state thresholds; used to
/// cross-check the two threshold forms against the confusability counts.
pub fn prefix_sizes_at(fam: &HardCaseFamily, thresholds: &[f64]) -> Vec<usize> {
    (0..fam.params.k_states)
        .map(|k| {
            let v = q_of(fam.params.gamma, fam.params.p0[k][0]);
            (0..fam.params.l_actions)
                .filter(|&l| v - q_of(fam.params.gamma, fam.params.p0[k][l]) < thresholds[k])
                .count()
        })
        .collect()
}

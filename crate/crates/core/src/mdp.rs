//! Finite discounted MDPs and the planning / distance / candidate-set
//! primitives everything else builds on.
//!
//! Conventions: states are `0..num_states()`; at each state the available
//! actions are the local slots `0..num_actions(s)`. Rewards are stored per
//! `(s, a, s')` triple and lie in `[0,1]`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Transition rows must sum to one within this.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Equality tolerance used by the argmax branch of candidate sets.
pub const ARGMAX_TOL: f64 = 1e-9;

/// Default planning tolerance. Theorem checks downstream add `2 * tol` slack.
pub const DEFAULT_PLANNING_TOL: f64 = 1e-9;

/// A finite infinite-horizon discounted MDP.
///
/// Immutable after construction; all invariants are checked in [`Mdp::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    gamma: f64,
    /// `transition[s][a][s']` - probability vector over next states.
    transition: Vec<Vec<Vec<f64>>>,
    /// `reward[s][a][s']` in [0,1].
    reward: Vec<Vec<Vec<f64>>>,
    /// Expected reward per (s,a), precomputed for backups.
    expected_reward: Vec<Vec<f64>>,
}

impl Mdp {
    pub fn new(
        gamma: f64,
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidGamma(gamma));
        }
        let n = transition.len();
        if reward.len() != n {
            return Err(Error::IncompatibleModels(format!(
                "transition has {n} states but reward has {}",
                reward.len()
            )));
        }
        for (s, rows) in transition.iter().enumerate() {
            if rows.is_empty() {
                return Err(Error::NoActions { state: s });
            }
            if reward[s].len() != rows.len() {
                return Err(Error::IncompatibleModels(format!(
                    "state {s}: {} transition rows but {} reward rows",
                    rows.len(),
                    reward[s].len()
                )));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != n || reward[s][a].len() != n {
                    return Err(Error::IncompatibleModels(format!(
                        "state {s} action {a}: row length does not match state count {n}"
                    )));
                }
                let mut sum = 0.0;
                for (sp, &p) in row.iter().enumerate() {
                    if !(p >= 0.0) || !p.is_finite() {
                        return Err(Error::InvalidProbability {
                            state: s,
                            action: a,
                            next: sp,
                            value: p,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::RowNotNormalized { state: s, action: a, sum });
                }
                for (sp, &r) in reward[s][a].iter().enumerate() {
                    if !(0.0..=1.0).contains(&r) || !r.is_finite() {
                        return Err(Error::RewardOutOfRange {
                            state: s,
                            action: a,
                            next: sp,
                            value: r,
                        });
                    }
                }
            }
        }
        let expected_reward = transition
            .iter()
            .zip(&reward)
            .map(|(rows, rrows)| {
                rows.iter()
                    .zip(rrows)
                    .map(|(p, r)| p.iter().zip(r).map(|(pi, ri)| pi * ri).sum())
                    .collect()
            })
            .collect();
        Ok(Self { gamma, transition, reward, expected_reward })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn num_states(&self) -> usize {
        self.transition.len()
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.transition[s].len()
    }

    /// Total number of (s,a) pairs.
    pub fn num_pairs(&self) -> usize {
        self.transition.iter().map(|rows| rows.len()).sum()
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[s][a]
    }

    pub fn reward_triple(&self, s: usize, a: usize, sp: usize) -> f64 {
        self.reward[s][a][sp]
    }

    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.expected_reward[s][a]
    }

    /// Value ceiling 1/(1-gamma).
    pub fn value_bound(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    /// States with more than one available action.
    pub fn multi_action_states(&self) -> Vec<usize> {
        (0..self.num_states()).filter(|&s| self.num_actions(s) > 1).collect()
    }

    /// Same state count, per-state action counts, and discount factor.
    pub fn same_structure(&self, other: &Mdp) -> bool {
        self.gamma == other.gamma
            && self.num_states() == other.num_states()
            && (0..self.num_states()).all(|s| self.num_actions(s) == other.num_actions(s))
    }

    fn check_structure(&self, other: &Mdp) -> Result<()> {
        if self.gamma != other.gamma {
            return Err(Error::IncompatibleModels(format!(
                "discount factors differ: {} vs {}",
                self.gamma, other.gamma
            )));
        }
        if self.num_states() != other.num_states() {
            return Err(Error::IncompatibleModels(format!(
                "state counts differ: {} vs {}",
                self.num_states(),
                other.num_states()
            )));
        }
        for s in 0..self.num_states() {
            if self.num_actions(s) != other.num_actions(s) {
                return Err(Error::IncompatibleModels(format!(
                    "action counts differ at state {s}: {} vs {}",
                    self.num_actions(s),
                    other.num_actions(s)
                )));
            }
        }
        Ok(())
    }
}

/// Dense per-state values, bounded by `1/(1-gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Dense per-(s,a) values aligned with the MDP's action slots.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    pub values: Vec<Vec<f64>>,
}

impl QFunction {
    pub fn zeros_like(mdp: &Mdp) -> Self {
        Self {
            values: (0..mdp.num_states()).map(|s| vec![0.0; mdp.num_actions(s)]).collect(),
        }
    }

    /// Per-state maximum, V(s) = max_a Q(s,a).
    pub fn greedy_values(&self) -> ValueFunction {
        ValueFunction {
            values: self.values.iter().map(|q| q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect(),
        }
    }

    /// Greedy policy with lowest-index tie-breaking.
    pub fn greedy_policy(&self) -> Policy {
        Policy {
            actions: self
                .values
                .iter()
                .map(|q| {
                    let mut best = 0;
                    for (a, &v) in q.iter().enumerate() {
                        if v > q[best] {
                            best = a;
                        }
                    }
                    best
                })
                .collect(),
        }
    }

    pub fn sup_distance(&self, other: &QFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Deterministic state -> action-slot map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub actions: Vec<usize>,
}

impl Policy {
    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        if self.actions.len() != mdp.num_states() {
            return Err(Error::InvalidPolicy(format!(
                "policy covers {} states, mdp has {}",
                self.actions.len(),
                mdp.num_states()
            )));
        }
        for (s, &a) in self.actions.iter().enumerate() {
            if a >= mdp.num_actions(s) {
                return Err(Error::InvalidAction { state: s, action: a });
            }
        }
        Ok(())
    }
}

/// Per-state potential-optimal action sets at a threshold `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSets {
    pub threshold: f64,
    /// Kept action slots per state, ascending.
    pub sets: Vec<Vec<usize>>,
    /// Sum of set sizes restricted to multi-action states.
    pub total_count: usize,
}

impl CandidateSets {
    /// Sum of set sizes over all states.
    pub fn full_count(&self) -> usize {
        self.sets.iter().map(|s| s.len()).sum()
    }
}

/// Exact value iteration to sup-norm accuracy `tol`.
///
/// Stops once the successive-iterate gap is at most `tol*(1-gamma)/(2*gamma)`,
/// which by the contraction bound guarantees `||V - V*||_inf <= tol`. The
/// Q-function is one backup of the final V and the policy is greedy with
/// lowest-index tie-breaking.
pub fn value_iteration(mdp: &Mdp, tol: f64) -> Result<(ValueFunction, QFunction, Policy)> {
    if !(tol > 0.0) {
        return Err(Error::PlanningFailure(format!("tolerance must be positive, got {tol}")));
    }
    let n = mdp.num_states();
    let gamma = mdp.gamma();
    let stop = tol * (1.0 - gamma) / (2.0 * gamma);
    let mut v = vec![0.0f64; n];
    let mut v_next = vec![0.0f64; n];
    let max_iters = 10_000_000usize;
    for _ in 0..max_iters {
        let mut gap = 0.0f64;
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.num_actions(s) {
                let row = mdp.transition_row(s, a);
                let mut q = mdp.expected_reward(s, a);
                let mut acc = 0.0;
                for (sp, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        acc += p * v[sp];
                    }
                }
                q += gamma * acc;
                if q > best {
                    best = q;
                }
            }
            if !best.is_finite() {
                return Err(Error::PlanningFailure(format!(
                    "non-finite backup at state {s}"
                )));
            }
            v_next[s] = best;
            gap = gap.max((v_next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut v_next);
        if gap <= stop {
            let q = backup_q(mdp, &v);
            let qf = QFunction { values: q };
            let policy = qf.greedy_policy();
            return Ok((ValueFunction { values: v }, qf, policy));
        }
    }
    Err(Error::PlanningFailure("value iteration did not converge".into()))
}

fn backup_q(mdp: &Mdp, v: &[f64]) -> Vec<Vec<f64>> {
    (0..mdp.num_states())
        .map(|s| {
            (0..mdp.num_actions(s))
                .map(|a| {
                    let row = mdp.transition_row(s, a);
                    mdp.expected_reward(s, a)
                        + mdp.gamma()
                            * row.iter().enumerate().map(|(sp, &p)| p * v[sp]).sum::<f64>()
                })
                .collect()
        })
        .collect()
}

/// Exact policy evaluation by direct linear solve of `V = R^pi + gamma P^pi V`.
pub fn policy_evaluation_exact(mdp: &Mdp, pi: &Policy) -> Result<ValueFunction> {
    pi.validate(mdp)?;
    let n = mdp.num_states();
    let gamma = mdp.gamma();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for s in 0..n {
        let act = pi.actions[s];
        let row = mdp.transition_row(s, act);
        for (sp, &p) in row.iter().enumerate() {
            a[(s, sp)] -= gamma * p;
        }
        b[s] = mdp.expected_reward(s, act);
    }
    let lu = a.lu();
    let v = lu
        .solve(&b)
        .ok_or_else(|| Error::PlanningFailure("singular evaluation system".into()))?;
    Ok(ValueFunction { values: v.iter().cloned().collect() })
}

/// TV-distance between two structurally identical MDPs: the max over (s,a) of
/// the L1 transition gap, joined with the sup-norm reward gap over triples.
pub fn tv_distance(m0: &Mdp, m: &Mdp) -> Result<f64> {
    m0.check_structure(m)?;
    let mut dist = 0.0f64;
    for s in 0..m0.num_states() {
        for a in 0..m0.num_actions(s) {
            let l1: f64 = m0
                .transition_row(s, a)
                .iter()
                .zip(m.transition_row(s, a))
                .map(|(p, q)| (p - q).abs())
                .sum();
            dist = dist.max(l1);
            for sp in 0..m0.num_states() {
                dist = dist.max((m0.reward_triple(s, a, sp) - m.reward_triple(s, a, sp)).abs());
            }
        }
    }
    Ok(dist)
}

/// Per-state candidate sets at threshold `c`.
///
/// For `c > 0` this is `{a : V(s) - Q(s,a) < c}` with strict inequality; for
/// `c <= 0` it is the argmax set with a `1e-9` equality tolerance.
pub fn candidate_set(mdp: &Mdp, q: &QFunction, c: f64) -> CandidateSets {
    let sets: Vec<Vec<usize>> = q
        .values
        .iter()
        .map(|qs| {
            let vmax = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if c > 0.0 {
                (0..qs.len()).filter(|&a| vmax - qs[a] < c).collect()
            } else {
                (0..qs.len()).filter(|&a| vmax - qs[a] <= ARGMAX_TOL).collect()
            }
        })
        .collect();
    let total_count = mdp
        .multi_action_states()
        .iter()
        .map(|&s| sets[s].len())
        .sum();
    CandidateSets { threshold: c, sets, total_count }
}

/// Result of an epsilon-optimality check: the verdict plus per-state gaps
/// `V^pi(s) - V*(s)` (nonpositive up to planning error).
#[derive(Debug, Clone)]
pub struct OptimalityReport {
    pub is_eps_optimal: bool,
    pub gaps: Vec<f64>,
    pub worst_gap: f64,
}

/// True iff `V^pi(s) >= V*(s) - eps` for all states, with `V^pi` evaluated
/// exactly and `V*` planned at tolerance `eps/100`.
pub fn is_eps_optimal(mdp: &Mdp, pi: &Policy, eps: f64) -> Result<OptimalityReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    let v_pi = policy_evaluation_exact(mdp, pi)?;
    let (v_star, _, _) = value_iteration(mdp, eps / 100.0)?;
    let gaps: Vec<f64> = v_pi
        .values
        .iter()
        .zip(&v_star.values)
        .map(|(vp, vs)| vp - vs)
        .collect();
    let worst_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(OptimalityReport { is_eps_optimal: worst_gap >= -eps, gaps, worst_gap })
}

/// Random model inside the TV ball `B(m0, beta)`, deterministic per seed.
///
/// Each transition row is moved along a random zero-sum direction with L1
/// magnitude at most `beta`, clipped back onto the simplex, and the magnitude
/// halved until the realized L1 distance respects the bound. Rewards are
/// shifted within `[-beta, beta]` and clipped to `[0,1]`.
pub fn perturb_within_ball(m0: &Mdp, beta: f64, seed: u64) -> Result<Mdp> {
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::ParameterDomain(format!("beta must lie in (0,2], got {beta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = m0.num_states();
    let mut transition = Vec::with_capacity(n);
    let mut reward = Vec::with_capacity(n);
    for s in 0..n {
        let mut t_rows = Vec::with_capacity(m0.num_actions(s));
        let mut r_rows = Vec::with_capacity(m0.num_actions(s));
        for a in 0..m0.num_actions(s) {
            let base = m0.transition_row(s, a);
            let mut dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mean = dir.iter().sum::<f64>() / n as f64;
            for d in dir.iter_mut() {
                *d -= mean;
            }
            let l1: f64 = dir.iter().map(|d| d.abs()).sum();
            if l1 > 0.0 {
                for d in dir.iter_mut() {
                    *d /= l1;
                }
            }
            let mut mag = rng.random::<f64>() * beta;
            let row = loop {
                let cand = clip_to_simplex(base, &dir, mag);
                let dist: f64 = cand.iter().zip(base).map(|(c, b)| (c - b).abs()).sum();
                if dist <= beta || mag < 1e-300 {
                    break cand;
                }
                mag *= 0.5;
            };
            t_rows.push(row);
            let r_row: Vec<f64> = (0..n)
                .map(|sp| {
                    let delta = (rng.random::<f64>() * 2.0 - 1.0) * beta;
                    (m0.reward_triple(s, a, sp) + delta).clamp(0.0, 1.0)
                })
                .collect();
            r_rows.push(r_row);
        }
        transition.push(t_rows);
        reward.push(r_rows);
    }
    Mdp::new(m0.gamma(), transition, reward)
}

fn clip_to_simplex(base: &[f64], dir: &[f64], mag: f64) -> Vec<f64> {
    let mut row: Vec<f64> = base.iter().zip(dir).map(|(b, d)| (b + mag * d).max(0.0)).collect();
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        for p in row.iter_mut() {
            *p /= sum;
        }
    } else {
        row.copy_from_slice(base);
    }
    // exact renormalization residue goes to the largest entry
    let sum: f64 = row.iter().sum();
    let resid = 1.0 - sum;
    if resid != 0.0 {
        let (imax, _) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
        row[imax] += resid;
    }
    row
}

/// Seeded dense random MDP: every transition row is drawn from a Dirichlet-ish
/// normalization of uniforms and every reward triple is uniform in [0,1].
/// Deterministic per seed; used by experiment sweeps and tests.
pub fn random_dense_mdp(states: usize, actions: usize, gamma: f64, seed: u64) -> Result<Mdp> {
    if states == 0 || actions == 0 {
        return Err(Error::InvalidConfig("need at least one state and action".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transition: Vec<Vec<Vec<f64>>> = (0..states)
        .map(|_| {
            (0..actions)
                .map(|_| {
                    let raw: Vec<f64> = (0..states).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let sum: f64 = raw.iter().sum();
                    let mut row: Vec<f64> = raw.iter().map(|x| x / sum).collect();
                    let resid = 1.0 - row.iter().sum::<f64>();
                    row[0] += resid;
                    row
                })
                .collect()
        })
        .collect();
    let reward: Vec<Vec<Vec<f64>>> = (0..states)
        .map(|_| {
            (0..actions)
                .map(|_| (0..states).map(|_| rng.random::<f64>()).collect())
                .collect()
        })
        .collect();
    Mdp::new(gamma, transition, reward)
}

/// Bellman optimality residual of `v`: `||T v - v||_inf`.
pub fn bellman_residual(mdp: &Mdp, v: &ValueFunction) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..mdp.num_states() {
        let mut best = f64::NEG_INFINITY;
        for a in 0..mdp.num_actions(s) {
            let row = mdp.transition_row(s, a);
            let q = mdp.expected_reward(s, a)
                + mdp.gamma() * row.iter().enumerate().map(|(sp, &p)| p * v.values[sp]).sum::<f64>();
            best = best.max(q);
        }
        worst = worst.max((best - v.values[s]).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn absorbing_unit_reward(gamma: f64) -> Mdp {
        Mdp::new(gamma, vec![vec![vec![1.0]]], vec![vec![vec![1.0]]]).unwrap()
    }

    pub(crate) fn random_mdp(states: usize, actions: usize, gamma: f64, seed: u64) -> Mdp {
        random_dense_mdp(states, actions, gamma, seed).unwrap()
    }

    #[test]
    fn absorbing_state_value_is_geometric_series() {
        let mdp = absorbing_unit_reward(0.9);
        let (v, q, pi) = value_iteration(&mdp, 1e-10).unwrap();
        assert_abs_diff_eq!(v.values[0], 10.0, epsilon = 1e-8);
        assert_abs_diff_eq!(q.values[0][0], 10.0, epsilon = 1e-8);
        assert_eq!(pi.actions, vec![0]);
    }

    #[test]
    fn chain_self_loop_q_matches_closed_form() {
        // y1 self-loops with p=0.5 rewarding 1, else falls into an absorbing
        // zero state: Q = 1/(1 - gamma*p).
        let gamma = 0.9;
        let transition = vec![
            vec![vec![0.5, 0.5]],
            vec![vec![0.0, 1.0]],
        ];
        let reward = vec![
            vec![vec![1.0, 0.0]],
            vec![vec![0.0, 0.0]],
        ];
        let mdp = Mdp::new(gamma, transition, reward).unwrap();
        let (_, q, _) = value_iteration(&mdp, 1e-10).unwrap();
        // V(y1) = p/(1-gamma p); entering from outside would add the instant 1.
        let p = 0.5;
        assert_abs_diff_eq!(q.values[0][0], p / (1.0 - gamma * p), epsilon = 1e-8);
    }

    #[test]
    fn bellman_residual_within_tolerance_on_random_mdps() {
        for seed in 0..100 {
            let mdp = random_mdp(6, 3, 0.9, seed);
            let (v, _, _) = value_iteration(&mdp, 1e-8).unwrap();
            assert!(bellman_residual(&mdp, &v) <= 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn policy_evaluation_zero_reward() {
        let mdp = Mdp::new(
            0.9,
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, 1.0]]],
            vec![vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![vec![0.0, 0.0]]],
        )
        .unwrap();
        let v = policy_evaluation_exact(&mdp, &Policy { actions: vec![1, 0] }).unwrap();
        assert_abs_diff_eq!(v.values[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.values[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn policy_evaluation_matches_value_iteration_for_optimal_policy() {
        for seed in 0..20 {
            let mdp = random_mdp(5, 3, 0.9, 100 + seed);
            let tol = 1e-9;
            let (v, _, pi) = value_iteration(&mdp, tol).unwrap();
            let v_pi = policy_evaluation_exact(&mdp, &pi).unwrap();
            assert!(v.sup_distance(&v_pi) <= 2.0 * tol, "seed {seed}");
        }
    }

    #[test]
    fn two_state_chain_hand_oracle() {
        // Deterministic chain 0 -> 1 -> 1, rewards (1, 0), gamma = 0.5, fixed pi.
        // V(1) = 0; V(0) = 1 + 0.5*V(1) = 1.
        let mdp = Mdp::new(
            0.5,
            vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]],
            vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 0.0]]],
        )
        .unwrap();
        let v = policy_evaluation_exact(&mdp, &Policy { actions: vec![0, 0] }).unwrap();
        assert_abs_diff_eq!(v.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.values[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tv_distance_identity_and_arithmetic() {
        let m = random_mdp(4, 2, 0.9, 7);
        assert_eq!(tv_distance(&m, &m).unwrap(), 0.0);

        let t0 = vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]];
        let t1 = vec![vec![vec![0.9, 0.1]], vec![vec![0.0, 1.0]]];
        let r = vec![vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]]];
        let m0 = Mdp::new(0.9, t0, r.clone()).unwrap();
        let m1 = Mdp::new(0.9, t1, r.clone()).unwrap();
        assert_abs_diff_eq!(tv_distance(&m0, &m1).unwrap(), 0.2, epsilon = 1e-12);

        let mut r2 = r.clone();
        r2[1][0][1] = 0.57;
        let m2 = Mdp::new(0.9, vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]], r2).unwrap();
        assert_abs_diff_eq!(tv_distance(&m0, &m2).unwrap(), 0.07, epsilon = 1e-12);
    }

    #[test]
    fn tv_distance_rejects_gamma_mismatch() {
        let m0 = random_mdp(3, 2, 0.9, 1);
        let m1 = random_mdp(3, 2, 0.8, 1);
        assert!(tv_distance(&m0, &m1).is_err());
    }

    fn q_for(vals: &[&[f64]]) -> QFunction {
        QFunction { values: vals.iter().map(|v| v.to_vec()).collect() }
    }

    fn mdp_with_actions(counts: &[usize]) -> Mdp {
        let n = counts.len();
        let transition: Vec<Vec<Vec<f64>>> = counts
            .iter()
            .map(|&k| {
                (0..k)
                    .map(|_| {
                        let mut row = vec![0.0; n];
                        row[0] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        let reward: Vec<Vec<Vec<f64>>> =
            counts.iter().map(|&k| (0..k).map(|_| vec![0.0; n]).collect()).collect();
        Mdp::new(0.9, transition, reward).unwrap()
    }

    #[test]
    fn candidate_set_threshold_branches() {
        let mdp = mdp_with_actions(&[3]);
        let q = q_for(&[&[10.0, 9.5, 7.0]]);
        assert_eq!(candidate_set(&mdp, &q, 1.0).sets[0], vec![0, 1]);
        assert_eq!(candidate_set(&mdp, &q, -1.0).sets[0], vec![0]);
        assert_eq!(candidate_set(&mdp, &q, 20.0).sets[0], vec![0, 1, 2]);
    }

    #[test]
    fn candidate_set_counts_restrict_to_multi_action_states() {
        let mdp = mdp_with_actions(&[3, 1]);
        let q = q_for(&[&[10.0, 9.5, 7.0], &[3.0]]);
        let cs = candidate_set(&mdp, &q, 1.0);
        assert_eq!(cs.total_count, 2);
        assert_eq!(cs.full_count(), 3);
    }

    #[test]
    fn eps_optimality_with_engineered_gap() {
        // Two actions at state 0: stay (reward 1) or jump to a dead state.
        // gamma=0.5: V*(0)=2; the bad action gives 1.5 + ... compute via solver.
        let mdp = Mdp::new(
            0.5,
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, 1.0]]],
            vec![vec![vec![1.0, 1.0], vec![1.0, 0.75]], vec![vec![0.0, 0.0]]],
        )
        .unwrap();
        let bad = Policy { actions: vec![1, 0] };
        // V^bad(0) = 0.75, V*(0) = 2.0 -> gap 1.25... engineered 0.5 gap instead:
        // use eps checks around the true gap.
        let rep = is_eps_optimal(&mdp, &bad, 1.0).unwrap();
        assert!(!rep.is_eps_optimal);
        let rep2 = is_eps_optimal(&mdp, &bad, 1.5).unwrap();
        assert!(rep2.is_eps_optimal);
        let (_, _, opt) = value_iteration(&mdp, 1e-10).unwrap();
        assert!(is_eps_optimal(&mdp, &opt, 1e-6).unwrap().is_eps_optimal);
    }

    #[test]
    fn all_policies_tie_when_rewards_uniform() {
        let mdp = Mdp::new(
            0.9,
            vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![vec![0.5, 0.5], vec![0.5, 0.5]]],
            vec![vec![vec![0.3; 2]; 2]; 2],
        )
        .unwrap();
        for a0 in 0..2 {
            for a1 in 0..2 {
                let pi = Policy { actions: vec![a0, a1] };
                assert!(is_eps_optimal(&mdp, &pi, 1e-6).unwrap().is_eps_optimal);
            }
        }
    }

    #[test]
    fn perturbation_stays_in_ball_and_is_deterministic() {
        let m0 = random_mdp(5, 3, 0.9, 42);
        for seed in 0..200 {
            let m = perturb_within_ball(&m0, 0.2, seed).unwrap();
            assert!(tv_distance(&m0, &m).unwrap() <= 0.2 + 1e-12, "seed {seed}");
        }
        let a = perturb_within_ball(&m0, 0.2, 9).unwrap();
        let b = perturb_within_ball(&m0, 0.2, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_beta_leaves_kernels_nearly_unchanged() {
        let m0 = random_mdp(4, 2, 0.9, 5);
        let m = perturb_within_ball(&m0, 1e-12, 3).unwrap();
        for s in 0..4 {
            for a in 0..2 {
                for sp in 0..4 {
                    assert!(
                        (m0.transition_row(s, a)[sp] - m.transition_row(s, a)[sp]).abs() <= 1e-11
                    );
                }
            }
        }
    }

    #[test]
    fn value_iteration_contraction() {
        // successive iterates contract by gamma; recheck via two manual sweeps
        let mdp = random_mdp(5, 3, 0.8, 11);
        let n = mdp.num_states();
        let mut v = vec![0.0; n];
        let mut prev_gap = f64::INFINITY;
        for _ in 0..30 {
            let mut next = vec![0.0; n];
            for s in 0..n {
                let mut best = f64::NEG_INFINITY;
                for a in 0..mdp.num_actions(s) {
                    let q = mdp.expected_reward(s, a)
                        + mdp.gamma()
                            * mdp
                                .transition_row(s, a)
                                .iter()
                                .enumerate()
                                .map(|(sp, &p)| p * v[sp])
                                .sum::<f64>();
                    best = best.max(q);
                }
                next[s] = best;
            }
            let gap = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if prev_gap.is_finite() {
                assert!(gap <= mdp.gamma() * prev_gap + 1e-12);
            }
            prev_gap = gap;
            v = next;
        }
    }
}

#[cfg(test)]
pub(crate) use tests::random_mdp;

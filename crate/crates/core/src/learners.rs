//! Learning algorithms that consume the generative-model oracle: the plug-in
//! empirical-model learner (the near-optimal subroutine used by the transfer
//! pipeline) and tabular Q-learning for warm-start experiments.

use crate::error::{Error, Result};
use crate::mdp::{
    policy_evaluation_exact, value_iteration, CandidateSets, Mdp, Policy, QFunction,
    DEFAULT_PLANNING_TOL,
};
use crate::sampling::GenerativeModel;

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    /// Target accuracy.
    pub eps: f64,
    /// Failure probability.
    pub delta: f64,
    /// Multiplier on the theoretical per-pair sample count. The theoretical
    /// constant is astronomically conservative; experiments scale it down,
    /// accuracy sweeps scale it up.
    pub budget_scale: f64,
    /// Maximum Q-learning sweeps.
    pub max_iters: usize,
    /// Step-size schedule parameter: eta_t = h / (h + t).
    pub step_h: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self { eps: 0.1, delta: 0.05, budget_scale: 1.0, max_iters: 1000, step_h: 50.0 }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if !(self.budget_scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "budget_scale must be positive, got {}",
                self.budget_scale
            )));
        }
        if !(self.step_h > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step_h must be positive, got {}",
                self.step_h
            )));
        }
        Ok(())
    }

    /// Per-pair sample count: ceil(scale * log(2 * total_actions / delta) /
    /// ((1-gamma)^3 * eps^2)).
    pub fn per_pair_budget(&self, gamma: f64, total_actions: usize) -> u64 {
        let log_term = (2.0 * total_actions as f64 / self.delta).ln();
        let n = self.budget_scale * log_term / ((1.0 - gamma).powi(3) * self.eps * self.eps);
        n.ceil() as u64
    }
}

/// Plug-in model-based learner restricted to the given candidate action sets.
///
/// Draws the same number of samples for every retained (s,a) pair, builds the
/// empirical MDP over exactly those pairs, plans it exactly, and maps the
/// greedy policy back to the original action slots. The sample total is an
/// exact multiple of the number of retained pairs, auditable via the oracle's
/// report.
pub fn empirical_model_learner(
    gm: &GenerativeModel,
    action_sets: &CandidateSets,
    cfg: &LearnerConfig,
) -> Result<Policy> {
    cfg.validate()?;
    let n_states = gm.num_states();
    if action_sets.sets.len() != n_states {
        return Err(Error::InvalidConfig(format!(
            "candidate sets cover {} states, oracle has {n_states}",
            action_sets.sets.len()
        )));
    }
    for (s, set) in action_sets.sets.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::EmptyActionSet { state: s });
        }
    }
    let total_actions = action_sets.full_count();
    let n = cfg.per_pair_budget(gm.gamma(), total_actions);
    if n == 0 {
        return Err(Error::ZeroBudget);
    }

    let mut transition = Vec::with_capacity(n_states);
    let mut reward = Vec::with_capacity(n_states);
    for s in 0..n_states {
        let mut t_rows = Vec::with_capacity(action_sets.sets[s].len());
        let mut r_rows = Vec::with_capacity(action_sets.sets[s].len());
        for &a in &action_sets.sets[s] {
            let mut counts = vec![0u64; n_states];
            let mut rewards = vec![0.0f64; n_states];
            for _ in 0..n {
                let (sp, r) = gm.sample(s, a)?;
                counts[sp] += 1;
                rewards[sp] = r;
            }
            let mut row: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
            // push float residue into the most-visited state so the row sums
            // to 1 exactly
            let resid = 1.0 - row.iter().sum::<f64>();
            if resid != 0.0 {
                let imax = (0..n_states).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap();
                row[imax] += resid;
            }
            t_rows.push(row);
            r_rows.push(rewards);
        }
        transition.push(t_rows);
        reward.push(r_rows);
    }
    let empirical = Mdp::new(gm.gamma(), transition, reward)?;
    let (_, _, pi_restricted) = value_iteration(&empirical, DEFAULT_PLANNING_TOL)?;
    let actions = pi_restricted
        .actions
        .iter()
        .enumerate()
        .map(|(s, &slot)| action_sets.sets[s][slot])
        .collect();
    Ok(Policy { actions })
}

/// One evaluation point on a learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub samples_used: u64,
    pub greedy_min_value: f64,
    pub greedy_mean_value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("samples_used,greedy_policy_min_value,greedy_policy_mean_value\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{}\n",
                p.samples_used, p.greedy_min_value, p.greedy_mean_value
            ));
        }
        out
    }
}

/// Tabular Q-learning with synchronous sweeps over all (s,a) pairs.
///
/// One generative sample per update, step size `eta_t = h/(h+t)` with `t` the
/// sweep index. At every sweep listed in `eval_schedule` (0 = before any
/// update) the greedy policy's exact value is recorded; evaluation uses the
/// true model and costs no samples.
pub fn q_learning(
    gm: &GenerativeModel,
    init_q: &QFunction,
    cfg: &LearnerConfig,
    eval_schedule: &[usize],
) -> Result<(LearningCurve, QFunction)> {
    cfg.validate()?;
    let n_states = gm.num_states();
    if init_q.values.len() != n_states
        || (0..n_states).any(|s| init_q.values[s].len() != gm.num_actions(s))
    {
        return Err(Error::InvalidConfig(
            "initial Q-function shape does not match the oracle's model".into(),
        ));
    }
    let gamma = gm.gamma();
    let truth = gm.underlying();
    let mut q = init_q.clone();
    let mut curve = LearningCurve::default();
    let start = gm.report().total;

    let record = |q: &QFunction, curve: &mut LearningCurve| -> Result<()> {
        let pi = q.greedy_policy();
        let v = policy_evaluation_exact(truth, &pi)?;
        let min = v.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = v.values.iter().sum::<f64>() / v.values.len() as f64;
        curve.points.push(CurvePoint {
            samples_used: gm.report().total - start,
            greedy_min_value: min,
            greedy_mean_value: mean,
        });
        Ok(())
    };

    if eval_schedule.contains(&0) {
        record(&q, &mut curve)?;
    }
    for t in 1..=cfg.max_iters {
        let eta = cfg.step_h / (cfg.step_h + t as f64);
        for s in 0..n_states {
            for a in 0..gm.num_actions(s) {
                let (sp, r) = gm.sample(s, a)?;
                let max_next =
                    q.values[sp].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                q.values[s][a] = (1.0 - eta) * q.values[s][a] + eta * (r + gamma * max_next);
            }
        }
        if eval_schedule.contains(&t) {
            record(&q, &mut curve)?;
        }
    }
    Ok((curve, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{candidate_set, random_mdp};
    use approx::assert_abs_diff_eq;

    fn full_sets(mdp: &Mdp) -> CandidateSets {
        let (_, q, _) = value_iteration(mdp, 1e-9).unwrap();
        candidate_set(mdp, &q, mdp.value_bound() + 1.0)
    }

    #[test]
    fn deterministic_mdp_learned_exactly_from_one_sample() {
        // deterministic ring with a rewarding shortcut
        let transition = vec![
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![vec![0.0, 0.0, 1.0]],
            vec![vec![1.0, 0.0, 0.0]],
        ];
        let reward = vec![
            vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![vec![0.0, 0.0, 0.2]],
            vec![vec![0.0, 0.0, 0.0]],
        ];
        let mdp = Mdp::new(0.9, transition, reward).unwrap();
        let gm = GenerativeModel::new(mdp.clone(), 3);
        let sets = full_sets(&mdp);
        let cfg = LearnerConfig {
            eps: 10.0,
            budget_scale: 1e-6,
            ..LearnerConfig::default()
        };
        // budget resolves to n = 1
        assert_eq!(cfg.per_pair_budget(0.9, sets.full_count()), 1);
        let pi = empirical_model_learner(&gm, &sets, &cfg).unwrap();
        let (_, _, opt) = value_iteration(&mdp, 1e-10).unwrap();
        assert_eq!(pi, opt);
        assert_eq!(gm.report().total, sets.full_count() as u64);
    }

    #[test]
    fn singleton_sets_force_the_policy_and_budget() {
        let mdp = random_mdp(4, 3, 0.9, 21);
        let gm = GenerativeModel::new(mdp.clone(), 5);
        let sets = CandidateSets {
            threshold: -1.0,
            sets: vec![vec![2], vec![0], vec![1], vec![2]],
            total_count: 4,
        };
        let cfg = LearnerConfig { eps: 1.0, budget_scale: 0.01, ..LearnerConfig::default() };
        let n = cfg.per_pair_budget(0.9, 4);
        let pi = empirical_model_learner(&gm, &sets, &cfg).unwrap();
        assert_eq!(pi.actions, vec![2, 0, 1, 2]);
        assert_eq!(gm.report().total, n * 4);
    }

    /// Two-action state feeding an absorbing zero state, gamma = 0.5:
    /// Q(a0) = 0.7(1 + 0.5 V0), Q(a1) = 0.4(1 + 0.5 V0); V0 = 0.7/0.65,
    /// so the optimal gap is about 0.46.
    fn noisy_bandit() -> Mdp {
        let transition = vec![
            vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            vec![vec![0.0, 1.0]],
        ];
        let reward = vec![
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![vec![0.0, 0.0]],
        ];
        Mdp::new(0.5, transition, reward).unwrap()
    }

    #[test]
    fn bandit_gap_instance_succeeds_with_hoeffding_budget() {
        let mdp = noisy_bandit();
        let (_, _, opt) = value_iteration(&mdp, 1e-10).unwrap();
        let sets = full_sets(&mdp);
        let cfg = LearnerConfig { eps: 0.1, budget_scale: 0.2, ..LearnerConfig::default() };
        let mut success = 0;
        for seed in 0..200 {
            let gm = GenerativeModel::new(mdp.clone(), seed);
            let pi = empirical_model_learner(&gm, &sets, &cfg).unwrap();
            if crate::mdp::is_eps_optimal(&mdp, &pi, 0.1).unwrap().is_eps_optimal {
                success += 1;
            }
        }
        assert!(success >= 190, "only {success}/200 trials succeeded");
        let _ = opt;
    }

    #[test]
    fn empty_action_set_rejected() {
        let mdp = random_mdp(2, 2, 0.9, 0);
        let gm = GenerativeModel::new(mdp, 0);
        let sets =
            CandidateSets { threshold: 0.5, sets: vec![vec![0], vec![]], total_count: 1 };
        let err = empirical_model_learner(&gm, &sets, &LearnerConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyActionSet { state: 1 }));
    }

    #[test]
    fn q_learning_fixed_point_start() {
        let mdp = random_mdp(4, 2, 0.9, 8);
        let (v_star, q_star, _) = value_iteration(&mdp, 1e-10).unwrap();
        let gm = GenerativeModel::new(mdp, 1);
        let cfg = LearnerConfig { max_iters: 1, ..LearnerConfig::default() };
        let (curve, _) = q_learning(&gm, &q_star, &cfg, &[0]).unwrap();
        assert_eq!(curve.points[0].samples_used, 0);
        let min_star = v_star.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(curve.points[0].greedy_min_value, min_star, epsilon = 1e-6);
    }

    #[test]
    fn q_learning_converges_on_deterministic_chain() {
        let transition = vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]];
        let reward = vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 0.5]]];
        let mdp = Mdp::new(0.5, transition, reward).unwrap();
        let (_, q_star, _) = value_iteration(&mdp, 1e-12).unwrap();
        let gm = GenerativeModel::new(mdp.clone(), 4);
        let cfg = LearnerConfig { max_iters: 20_000, step_h: 50.0, ..LearnerConfig::default() };
        let init = QFunction::zeros_like(&mdp);
        let (_, q) = q_learning(&gm, &init, &cfg, &[]).unwrap();
        assert!(q.sup_distance(&q_star) <= 1e-3, "gap = {}", q.sup_distance(&q_star));
    }

    #[test]
    fn q_learning_iterates_stay_bounded() {
        let mdp = random_mdp(5, 3, 0.9, 13);
        let bound = mdp.value_bound();
        let gm = GenerativeModel::new(mdp.clone(), 77);
        let cfg = LearnerConfig { max_iters: 300, ..LearnerConfig::default() };
        let (_, q) = q_learning(&gm, &QFunction::zeros_like(&mdp), &cfg, &[]).unwrap();
        for row in &q.values {
            for &v in row {
                assert!((0.0..=bound + 1e-12).contains(&v));
            }
        }
    }

    #[test]
    fn failure_rate_decreases_with_budget() {
        let mdp = noisy_bandit();
        let sets = full_sets(&mdp);
        let mut failures = Vec::new();
        for scale in [0.0005, 0.005, 0.05] {
            let cfg = LearnerConfig { eps: 0.1, budget_scale: scale, ..LearnerConfig::default() };
            let mut fail = 0;
            for seed in 0..100 {
                let gm = GenerativeModel::new(mdp.clone(), 1000 + seed);
                let pi = empirical_model_learner(&gm, &sets, &cfg).unwrap();
                if !crate::mdp::is_eps_optimal(&mdp, &pi, 0.1).unwrap().is_eps_optimal {
                    fail += 1;
                }
            }
            failures.push(fail);
        }
        assert!(failures[0] >= failures[2], "not monotone in budget: {failures:?}");
        assert_eq!(failures[2], 0, "largest budget should always succeed: {failures:?}");
    }
}

//! Transfer by action elimination: plan on the prior model, keep only actions
//! that could still be optimal within the TV ball, then learn the contracted
//! MDP through the generative model.

use crate::error::{Error, Result};
use crate::learners::{empirical_model_learner, LearnerConfig};
use crate::mdp::{candidate_set, value_iteration, CandidateSets, Mdp, Policy, DEFAULT_PLANNING_TOL};
use crate::sampling::{GenerativeModel, SampleBudgetReport};

/// Which elimination-threshold constant to use. The two differ only in how
/// much accuracy slack is subtracted; `TheoremBound` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdVariant {
    /// min{2/(1-g), 2b/(1-g)^2} - e(1-g)/2
    #[default]
    TheoremBound,
    /// 2 min{1/(1-g), b/(1-g)^2} - e(1-g)
    LemmaBound,
}

/// Elimination threshold for TV radius `beta`, discount `gamma`, accuracy `eps`.
pub fn compute_c_bar(beta: f64, gamma: f64, eps: f64, variant: ThresholdVariant) -> f64 {
    let base = (2.0 / (1.0 - gamma)).min(2.0 * beta / (1.0 - gamma).powi(2));
    match variant {
        ThresholdVariant::TheoremBound => base - eps * (1.0 - gamma) / 2.0,
        ThresholdVariant::LemmaBound => base - eps * (1.0 - gamma),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    /// Known TV-ball radius containing the true model.
    pub beta: f64,
    /// Target accuracy of the returned policy.
    pub eps: f64,
    /// Failure probability.
    pub delta: f64,
    pub threshold_variant: ThresholdVariant,
    /// Budget/step parameters for the inner learner; its `eps`/`delta` are
    /// overridden by `eps/2` and `delta`.
    pub learner: LearnerConfig,
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub c_bar: f64,
    pub candidate_sets: CandidateSets,
    pub policy: Policy,
    pub report: SampleBudgetReport,
    /// 1 - (retained pairs over multi-action states) / (all pairs there).
    pub eliminated_fraction: f64,
    /// Retained-pair count restricted to multi-action states (the quantity the
    /// theory counts).
    pub retained_over_sprime: usize,
    /// Retained-pair count over all states (what the plug-in learner samples).
    pub retained_total: usize,
}

/// Run the elimination pipeline against an oracle for the unknown model.
pub fn transfer_learn(
    prior: &Mdp,
    gm: &GenerativeModel,
    cfg: &TransferConfig,
) -> Result<TransferOutcome> {
    cfg.validate()?;
    if prior.num_states() != gm.num_states()
        || prior.gamma() != gm.gamma()
        || (0..prior.num_states()).any(|s| prior.num_actions(s) != gm.num_actions(s))
    {
        return Err(Error::IncompatibleModels(
            "prior and oracle models have different structure".into(),
        ));
    }
    let (_, q0, _) = value_iteration(prior, DEFAULT_PLANNING_TOL)?;
    let c_bar = compute_c_bar(cfg.beta, prior.gamma(), cfg.eps, cfg.threshold_variant);
    let sets = candidate_set(prior, &q0, c_bar);

    let learner_cfg = LearnerConfig {
        eps: cfg.eps / 2.0,
        delta: cfg.delta,
        ..cfg.learner.clone()
    };
    let policy = empirical_model_learner(gm, &sets, &learner_cfg)?;

    let sprime = prior.multi_action_states();
    let pairs_sprime: usize = sprime.iter().map(|&s| prior.num_actions(s)).sum();
    let retained_over_sprime = sets.total_count;
    let eliminated_fraction = if pairs_sprime == 0 {
        0.0
    } else {
        1.0 - retained_over_sprime as f64 / pairs_sprime as f64
    };
    Ok(TransferOutcome {
        c_bar,
        retained_total: sets.full_count(),
        candidate_sets: sets,
        policy,
        report: gm.report(),
        eliminated_fraction,
        retained_over_sprime,
    })
}

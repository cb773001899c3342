//! Tabular-MDP transfer reinforcement learning.
//!
//! The crate is organized around a prior (approximate) model that is close to
//! the true unknown model in TV-distance. Planning on the prior eliminates
//! actions that cannot be optimal in the true model, and a generative-model
//! learner then explores only the surviving actions. Also included: the
//! three-layer hard-case family used to certify that the elimination
//! thresholds are essentially tight, and the convex-hull setting where the
//! unknown model is a simplex mixture of known base models.

pub mod convexhull;
pub mod error;
pub mod hardcase;
pub mod io;
pub mod learners;
pub mod mdp;
pub mod sailing;
pub mod sampling;
pub mod transfer;

pub use error::{Error, Result};
pub use mdp::{CandidateSets, Mdp, Policy, QFunction, ValueFunction};
pub use transfer::{compute_c_bar, transfer_learn, ThresholdVariant, TransferConfig, TransferOutcome};
pub use sampling::{GenerativeModel, SampleBudgetReport};

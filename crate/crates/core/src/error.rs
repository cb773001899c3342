use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("discount factor must lie in (0,1), got {0}")]
    InvalidGamma(f64),

    #[error("state {state} has no available actions")]
    NoActions { state: usize },

    #[error("transition row ({state},{action}) sums to {sum}, expected 1 within 1e-12")]
    RowNotNormalized { state: usize, action: usize, sum: f64 },

    #[error("transition probability p({next}|{state},{action}) = {value} is invalid")]
    InvalidProbability { state: usize, action: usize, next: usize, value: f64 },

    #[error("reward r({state},{action},{next}) = {value} lies outside [0,1]")]
    RewardOutOfRange { state: usize, action: usize, next: usize, value: f64 },

    #[error("models are incompatible: {0}")]
    IncompatibleModels(String),

    #[error("action {action} is not available at state {state}")]
    InvalidAction { state: usize, action: usize },

    #[error("planning failed: {0}")]
    PlanningFailure(String),

    #[error("policy is invalid: {0}")]
    InvalidPolicy(String),

    #[error("learner configuration invalid: {0}")]
    InvalidConfig(String),

    #[error("sample budget resolved to zero")]
    ZeroBudget,

    #[error("empty action set at state {state}")]
    EmptyActionSet { state: usize },

    #[error("parameter domain violated: {0}")]
    ParameterDomain(String),

    #[error("full stacked base matrix is rank deficient (rank {rank} < K = {k}); the mixture is not identifiable")]
    RankDeficient { rank: usize, k: usize },

    #[error("model file error at {location}: {message}")]
    ModelFile { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

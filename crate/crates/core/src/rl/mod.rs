//! Offline reinforcement learning: discrete actions, state features, reward
//! terms, dataset synthesis and conservative Q-learning over a tabular Q.

mod action;
mod cql;
mod dataset;
mod features;
mod reward;

use thiserror::Error;

pub use action::{ActionIndex, ActionMask, ANGULAR_RATES, LINEAR_SPEEDS, NUM_ACTIONS, OMEGA_MAX, V_MAX};
pub use cql::{
    cql_step, cql_train, greedy_action, greedy_from_row, log_sum_exp, CqlParams, EpochLoss, QFunction, QTable,
    TabularTransition, QFUNCTION_FORMAT,
};
pub use dataset::*;
pub use features::{
    bearing_bucket, bucket, extract_features, FeatureInput, FeatureParams, StateFeatures, NUM_STATES,
};
pub use reward::{
    reward_collision, reward_cover, reward_goal, reward_threat, total_reward, RewardTerms, RewardWeights,
};

#[derive(Debug, Error, PartialEq)]
pub enum RlError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no feasible action")]
    NoFeasibleAction,
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("invalid transition: {0}")]
    BadTransition(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

//! Tabular softmax policies on DraftWorld: rollouts, analytic gradients,
//! imitation from scripted experts, and the reinforcement-learning loops.

mod gradient;
mod imitation;
mod tabular;
mod train;
mod world;

pub use gradient::{
    analytic_segment_gradient, bias_gradient, clipped_gradient, decomposition_fd_residual, dfpo_gradient,
    dfpo_surrogate_value, finite_difference_gradient, log_likelihood_gradient, mgrpo_gradient, sum_logprob,
    verify_decomposition,
};
pub use imitation::{dtft_imitation, mean_log_likelihood, ImitationConfig, ImitationResult};
pub use tabular::{
    entropy, entropy_delta_check, log_softmax, single_step_update, softmax, EntropyDelta, ParamTable, StateId,
    TabularPolicy,
};
pub use train::{
    evaluate_policy, group_update, run_pipeline, sample_episodes, train, Algorithm, PipelineConfig, PipelineRun,
    PolicyEval, TrainConfig, TrainingLog, TrainingRecord,
};
pub use world::{
    expert_dataset, rollout_group, DraftToken, DraftWorld, DraftWorldConfig, Observation, Phase, Question,
    RolloutGroup, Trajectory, Turn, MAX_DRAFT_LEN, NO_ANSWER,
};

use crate::advantage::AdvantageError;
use crate::metrics::MetricsError;
use crate::router::RouterError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("unknown state {0}")]
    UnknownState(usize),
    #[error("state {state} has no action {action}")]
    UnknownAction { state: usize, action: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no expert trajectories to imitate")]
    EmptyExpertSet,
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },
    #[error(transparent)]
    Advantage(#[from] AdvantageError),
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

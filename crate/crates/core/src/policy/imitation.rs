use serde::{Deserialize, Serialize};

use super::gradient::{log_likelihood_gradient, sum_logprob};
use super::tabular::{ParamTable, StateId, TabularPolicy};
use super::world::Trajectory;
use super::PolicyError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImitationConfig {
    /// Safe at 1.0: the mean log-likelihood has curvature at most 1/2 per
    /// row as long as no state repeats within a demonstration.
    pub learning_rate: f64,
    pub epochs: usize,
    /// Fit the plan tokens too. Off gives plain tool-use cloning with the
    /// draft rows left untouched.
    pub include_draft: bool,
}

impl Default for ImitationConfig {
    fn default() -> Self {
        Self { learning_rate: 1.0, epochs: 30, include_draft: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImitationResult {
    pub policy: TabularPolicy,
    /// Mean demonstration log-likelihood before the first epoch and after
    /// every epoch.
    pub log_likelihood: Vec<f64>,
}

fn fitted_steps(t: &Trajectory, include_draft: bool) -> Vec<(StateId, usize)> {
    let mut steps = if include_draft { t.draft_steps() } else { Vec::new() };
    steps.extend(t.solution_steps());
    steps
}

pub fn mean_log_likelihood(
    policy: &TabularPolicy,
    experts: &[Trajectory],
    include_draft: bool,
) -> Result<f64, PolicyError> {
    if experts.is_empty() {
        return Err(PolicyError::EmptyExpertSet);
    }
    let total: f64 =
        experts.iter().map(|t| sum_logprob(policy, &fitted_steps(t, include_draft))).sum::<Result<f64, _>>()?;
    Ok(total / experts.len() as f64)
}

/// Full-batch gradient ascent on the mean demonstration log-likelihood.
pub fn dtft_imitation(
    experts: &[Trajectory],
    policy: &TabularPolicy,
    config: &ImitationConfig,
) -> Result<ImitationResult, PolicyError> {
    if experts.is_empty() {
        return Err(PolicyError::EmptyExpertSet);
    }
    if !(config.learning_rate > 0.0) {
        return Err(PolicyError::InvalidConfig(format!("learning rate {} must be > 0", config.learning_rate)));
    }
    let mut policy = policy.clone();
    let n = experts.len() as f64;
    let mut curve = vec![mean_log_likelihood(&policy, experts, config.include_draft)?];
    for _ in 0..config.epochs {
        let mut grad = ParamTable::zeros_like(policy.params());
        for t in experts {
            grad.add_scaled(&log_likelihood_gradient(&policy, &fitted_steps(t, config.include_draft))?, 1.0);
        }
        policy.apply(&grad, config.learning_rate / n)?;
        curve.push(mean_log_likelihood(&policy, experts, config.include_draft)?);
    }
    Ok(ImitationResult { policy, log_likelihood: curve })
}

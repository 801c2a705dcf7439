use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::gradient::{clipped_gradient, dfpo_gradient, mgrpo_gradient};
use super::imitation::{dtft_imitation, ImitationConfig};
use super::tabular::{entropy, ParamTable, StateId, TabularPolicy};
use super::world::{expert_dataset, rollout_group, DraftWorld, DraftWorldConfig, RolloutGroup, Trajectory};
use super::PolicyError;
use crate::advantage::{dfpo_objective, group_normalize, mgrpo_objective, AdvantageRule, AdvantageSet, ClipRange};
use crate::metrics::{repetition_score, valid_answer_rate, EfficiencyReport};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Dfpo,
    Mgrpo,
    DfpoOffClipped,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dfpo => "dfpo",
            Algorithm::Mgrpo => "mgrpo",
            Algorithm::DfpoOffClipped => "dfpo-off-clipped",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dfpo" => Ok(Algorithm::Dfpo),
            "mgrpo" => Ok(Algorithm::Mgrpo),
            "dfpo-off-clipped" => Ok(Algorithm::DfpoOffClipped),
            other => Err(PolicyError::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// Draft advantage rule for the draft-aware algorithms.
    pub advantage_rule: AdvantageRule,
    /// Optimization passes over each rollout batch (clipped variant only).
    pub inner_epochs: usize,
    pub clip: ClipRange,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            learning_rate: 0.05,
            advantage_rule: AdvantageRule::Masked,
            inner_epochs: 4,
            clip: ClipRange::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(PolicyError::InvalidConfig(format!("learning rate {} must be >= 0", self.learning_rate)));
        }
        if self.inner_epochs == 0 {
            return Err(PolicyError::InvalidConfig("inner_epochs must be >= 1".into()));
        }
        self.clip.validate()?;
        Ok(())
    }
}

/// One optimization step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub step: usize,
    pub objective: f64,
    pub mean_reward: f64,
    pub mean_turns: f64,
    pub valid_rate: f64,
    /// Mean natural-log entropy over drafted tokens' states.
    pub draft_entropy: f64,
    pub solution_entropy_correct: Option<f64>,
    pub solution_entropy_wrong: Option<f64>,
    pub repetition_score: f64,
    /// Largest absolute parameter change applied this step.
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub records: Vec<TrainingRecord>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn state_entropy(policy: &TabularPolicy, s: StateId) -> Result<f64, PolicyError> {
    Ok(entropy(policy.params().row(s)?))
}

fn group_record(
    policy: &TabularPolicy,
    group: &RolloutGroup,
    step: usize,
    objective: f64,
    update_norm: f64,
) -> Result<TrainingRecord, PolicyError> {
    let ts = &group.trajectories;
    let solution_entropy = |success: bool| -> Result<Option<f64>, PolicyError> {
        let values = ts
            .iter()
            .filter(|t| t.is_success() == success)
            .flat_map(|t| t.turns.iter().map(|u| state_entropy(policy, u.state)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(mean(values))
    };
    let draft_entropy = ts
        .iter()
        .flat_map(|t| t.draft.iter().map(|d| state_entropy(policy, d.state)))
        .collect::<Result<Vec<_>, _>>()?;
    let repetition = ts.iter().map(|t| repetition_score(&t.actions())).collect::<Result<Vec<_>, _>>()?;
    Ok(TrainingRecord {
        step,
        objective,
        mean_reward: mean(ts.iter().map(|t| t.solution_reward)).unwrap_or(0.0),
        mean_turns: mean(ts.iter().map(|t| t.turn_count as f64)).unwrap_or(0.0),
        valid_rate: valid_answer_rate(ts)?,
        draft_entropy: mean(draft_entropy).unwrap_or(0.0),
        solution_entropy_correct: solution_entropy(true)?,
        solution_entropy_wrong: solution_entropy(false)?,
        repetition_score: mean(repetition).unwrap_or(0.0),
        update_norm,
    })
}

/// Computes this group's parameter delta (already scaled by the learning
/// rate) and the objective value at the rollout policy.
pub fn group_update(
    policy: &TabularPolicy,
    group: &RolloutGroup,
    algorithm: Algorithm,
    config: &TrainConfig,
) -> Result<(ParamTable, f64), PolicyError> {
    let rewards = &group.rewards;
    let lr = config.learning_rate;
    match algorithm {
        Algorithm::Dfpo => {
            let adv = AdvantageSet::compute(rewards, config.advantage_rule)?;
            let mut delta = dfpo_gradient(policy, group, &adv)?;
            delta.scale(lr);
            Ok((delta, dfpo_objective(rewards, &adv)?))
        }
        Algorithm::Mgrpo => {
            let sol = group_normalize(rewards.solution_rewards())?;
            let mut delta = mgrpo_gradient(policy, group, &sol)?;
            delta.scale(lr);
            Ok((delta, mgrpo_objective(rewards, &sol, 0.0)?))
        }
        Algorithm::DfpoOffClipped => {
            let adv = AdvantageSet::compute(rewards, config.advantage_rule)?;
            let objective = dfpo_objective(rewards, &adv)?;
            let mut current = policy.clone();
            for _ in 0..config.inner_epochs {
                let g = clipped_gradient(&current, group, &adv, config.clip)?;
                current.apply(&g, lr)?;
            }
            let mut delta = current.params().clone();
            delta.add_scaled(policy.params(), -1.0);
            Ok((delta, objective))
        }
    }
}

pub fn train(
    algorithm: Algorithm,
    world: &DraftWorld,
    policy: &TabularPolicy,
    config: &TrainConfig,
    seed: u64,
) -> Result<(TabularPolicy, TrainingLog), PolicyError> {
    config.validate()?;
    world.check_policy(policy)?;
    let mut policy = policy.clone();
    let mut records = Vec::with_capacity(config.steps);
    let g = world.config().group_size;
    for step in 0..config.steps {
        let group = rollout_group(world, &policy, g, rng::derive_seed(seed, &[step as u64]))?;
        let (delta, objective) = group_update(&policy, &group, algorithm, config)?;
        if !delta.is_finite() {
            return Err(PolicyError::Diverged { step, detail: "non-finite update".into() });
        }
        records.push(group_record(&policy, &group, step, objective, delta.max_abs())?);
        policy.apply(&delta, 1.0).map_err(|e| PolicyError::Diverged { step, detail: e.to_string() })?;
    }
    Ok((policy, TrainingLog { algorithm, seed, records }))
}

/// Held-out performance of a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEval {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_turns: f64,
    pub valid_rate: f64,
    pub repetition_score: f64,
    pub efficiency: EfficiencyReport,
}

pub fn sample_episodes(
    world: &DraftWorld,
    policy: &TabularPolicy,
    episodes: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, PolicyError> {
    world.check_policy(policy)?;
    let mut r = rng::stream(seed, &[]);
    (0..episodes)
        .map(|_| {
            let q = world.sample_question(&mut r);
            world.rollout(policy, q, &mut r)
        })
        .collect()
}

pub fn evaluate_policy(
    world: &DraftWorld,
    policy: &TabularPolicy,
    episodes: usize,
    seed: u64,
) -> Result<PolicyEval, PolicyError> {
    if episodes == 0 {
        return Err(PolicyError::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let ts = sample_episodes(world, policy, episodes, seed)?;
    let rep = ts.iter().map(|t| repetition_score(&t.actions())).collect::<Result<Vec<_>, _>>()?;
    let scores: Vec<f64> = ts.iter().map(|t| t.solution_reward).collect();
    Ok(PolicyEval {
        efficiency: EfficiencyReport::from_episodes(&ts, &scores, world.config().max_turns)?,
        episodes,
        success_rate: mean(ts.iter().map(|t| t.solution_reward)).unwrap_or(0.0),
        mean_turns: mean(ts.iter().map(|t| t.turn_count as f64)).unwrap_or(0.0),
        valid_rate: valid_answer_rate(&ts)?,
        repetition_score: mean(rep).unwrap_or(0.0),
    })
}

/// Imitation, then reinforcement learning, with held-out evaluation of both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub world: DraftWorldConfig,
    pub expert_questions: usize,
    pub imitation: ImitationConfig,
    /// Skip imitation and start RL from the uniform policy.
    pub from_scratch: bool,
    pub train: TrainConfig,
    pub eval_episodes: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            world: DraftWorldConfig::default(),
            expert_questions: 64,
            imitation: ImitationConfig::default(),
            from_scratch: false,
            train: TrainConfig::default(),
            eval_episodes: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub baseline: PolicyEval,
    /// Absent when no training steps were requested.
    pub trained: Option<PolicyEval>,
    pub imitation_log_likelihood: Vec<f64>,
    pub log: Option<TrainingLog>,
}

pub fn run_pipeline(config: &PipelineConfig, algorithm: Algorithm, seed: u64) -> Result<PipelineRun, PolicyError> {
    let world = DraftWorld::new(config.world.clone())?;
    let (start, imitation_log_likelihood) = if config.from_scratch {
        (world.uniform_policy(), Vec::new())
    } else {
        let experts = expert_dataset(&world, config.expert_questions, rng::derive_seed(seed, &[1]))?;
        let fit = dtft_imitation(&experts, &world.uniform_policy(), &config.imitation)?;
        (fit.policy, fit.log_likelihood)
    };
    // Both evaluations share one seed so they see the same questions.
    let eval_seed = rng::derive_seed(seed, &[3]);
    let baseline = evaluate_policy(&world, &start, config.eval_episodes, eval_seed)?;
    if config.train.steps == 0 {
        return Ok(PipelineRun { algorithm, seed, baseline, trained: None, imitation_log_likelihood, log: None });
    }
    let (trained_policy, log) = train(algorithm, &world, &start, &config.train, rng::derive_seed(seed, &[2]))?;
    let trained = Some(evaluate_policy(&world, &trained_policy, config.eval_episodes, eval_seed)?);
    let log = Some(log);
    Ok(PipelineRun { algorithm, seed, baseline, trained, imitation_log_likelihood, log })
}

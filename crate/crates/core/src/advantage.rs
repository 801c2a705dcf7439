//! Group-relative advantages and the draft/solution objectives built on them.
//!
//! Everything here is a pure function of a [`RewardGroup`]: normalization,
//! negative sample masking, the joint draft-and-follow objective, the
//! whole-trajectory baseline objective, the clipped off-policy variant and its
//! surrogate, plus executable checks of the relative-advantage inequalities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used when checking the relative-advantage inequalities.
pub const INEQUALITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdvantageError {
    #[error("group too small: need at least 2 members, got {0}")]
    GroupTooSmall(usize),
    #[error("invalid reward group: {0}")]
    InvalidGroup(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("draft has no tokens")]
    EmptyDraft,
    #[error("log-probability {0} is positive")]
    InvalidLogprob(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("coefficient of variation undefined for zero mean")]
    UndefinedCv,
}

pub type Result<T> = std::result::Result<T, AdvantageError>;

/// Rewards and segment lengths for one group of trajectories sampled for the
/// same question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRewardGroup", into = "RawRewardGroup")]
pub struct RewardGroup {
    solution_rewards: Vec<f64>,
    draft_rewards: Vec<f64>,
    draft_lengths: Vec<usize>,
    solution_lengths: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawRewardGroup {
    solution_rewards: Vec<f64>,
    draft_rewards: Vec<f64>,
    draft_lengths: Vec<usize>,
    solution_lengths: Vec<usize>,
}

impl TryFrom<RawRewardGroup> for RewardGroup {
    type Error = AdvantageError;

    fn try_from(raw: RawRewardGroup) -> Result<Self> {
        RewardGroup::new(raw.solution_rewards, raw.draft_rewards, raw.draft_lengths, raw.solution_lengths)
    }
}

impl From<RewardGroup> for RawRewardGroup {
    fn from(g: RewardGroup) -> Self {
        RawRewardGroup {
            solution_rewards: g.solution_rewards,
            draft_rewards: g.draft_rewards,
            draft_lengths: g.draft_lengths,
            solution_lengths: g.solution_lengths,
        }
    }
}

impl RewardGroup {
    pub fn new(
        solution_rewards: Vec<f64>,
        draft_rewards: Vec<f64>,
        draft_lengths: Vec<usize>,
        solution_lengths: Vec<usize>,
    ) -> Result<Self> {
        let g = solution_rewards.len();
        if draft_rewards.len() != g || draft_lengths.len() != g || solution_lengths.len() != g {
            return Err(AdvantageError::InvalidGroup(format!(
                "vector lengths differ: solution={}, draft={}, |d|={}, |y|={}",
                g,
                draft_rewards.len(),
                draft_lengths.len(),
                solution_lengths.len()
            )));
        }
        if g < 2 {
            return Err(AdvantageError::GroupTooSmall(g));
        }
        for i in 0..g {
            let s = solution_rewards[i];
            if s != 0.0 && s != 1.0 {
                return Err(AdvantageError::InvalidGroup(format!("solution reward {s} at index {i} is not binary")));
            }
            let d = draft_rewards[i];
            if !(0.0..=1.0).contains(&d) {
                return Err(AdvantageError::InvalidGroup(format!("draft reward {d} at index {i} outside [0, 1]")));
            }
            if s == 0.0 && d != 0.0 {
                return Err(AdvantageError::InvalidGroup(format!(
                    "draft reward {d} at index {i} must be 0 for a failed solution"
                )));
            }
            if draft_lengths[i] == 0 || solution_lengths[i] == 0 {
                return Err(AdvantageError::InvalidGroup(format!("segment lengths at index {i} must be positive")));
            }
        }
        Ok(Self { solution_rewards, draft_rewards, draft_lengths, solution_lengths })
    }

    /// Builds a group from binary outcomes and draft-quality values, applying
    /// the product gate `r_draft = rho * r_solution`.
    pub fn from_outcomes(
        successes: &[bool],
        rhos: &[f64],
        draft_lengths: Vec<usize>,
        solution_lengths: Vec<usize>,
    ) -> Result<Self> {
        if successes.len() != rhos.len() {
            return Err(AdvantageError::Shape(format!("{} outcomes vs {} rho values", successes.len(), rhos.len())));
        }
        let solution: Vec<f64> = successes.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
        let draft = rhos.iter().zip(&solution).map(|(&rho, &s)| draft_reward(rho, s)).collect::<Result<Vec<_>>>()?;
        Self::new(solution, draft, draft_lengths, solution_lengths)
    }

    pub fn len(&self) -> usize {
        self.solution_rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solution_rewards.is_empty()
    }

    pub fn solution_rewards(&self) -> &[f64] {
        &self.solution_rewards
    }

    pub fn draft_rewards(&self) -> &[f64] {
        &self.draft_rewards
    }

    pub fn draft_lengths(&self) -> &[usize] {
        &self.draft_lengths
    }

    pub fn solution_lengths(&self) -> &[usize] {
        &self.solution_lengths
    }

    pub fn is_success(&self, i: usize) -> bool {
        self.solution_rewards[i] == 1.0
    }

    pub fn n_success(&self) -> usize {
        self.solution_rewards.iter().filter(|&&r| r == 1.0).count()
    }

    pub fn n_failure(&self) -> usize {
        self.len() - self.n_success()
    }
}

/// Mean, population standard deviation and coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: f64,
    pub std: f64,
    pub cv: Option<f64>,
}

impl GroupStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(AdvantageError::Precondition("statistics of an empty vector".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let cv = (mean > 0.0).then(|| std / mean);
        Ok(Self { mean, std, cv })
    }

    pub fn variance(&self) -> f64 {
        self.std * self.std
    }
}

/// `(r_i - mean) / std` with the population standard deviation. A group with
/// zero spread yields all-zero advantages.
pub fn group_normalize(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(AdvantageError::GroupTooSmall(rewards.len()));
    }
    let stats = GroupStats::of(rewards)?;
    if stats.std == 0.0 {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - stats.mean) / stats.std).collect())
}

pub fn draft_reward(rho: f64, solution_reward: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(AdvantageError::Domain(format!("rho {rho} outside [0, 1]")));
    }
    if solution_reward != 0.0 && solution_reward != 1.0 {
        return Err(AdvantageError::Domain(format!("solution reward {solution_reward} is not binary")));
    }
    Ok(rho * solution_reward)
}

/// Draft confidence: the geometric-mean token probability `exp(mean log p)`.
pub fn rho_from_logprobs(token_logprobs: &[f64]) -> Result<f64> {
    if token_logprobs.is_empty() {
        return Err(AdvantageError::EmptyDraft);
    }
    if let Some(&bad) = token_logprobs.iter().find(|&&lp| lp > 0.0 || lp.is_nan()) {
        return Err(AdvantageError::InvalidLogprob(bad));
    }
    let mean = token_logprobs.iter().sum::<f64>() / token_logprobs.len() as f64;
    Ok(mean.exp())
}

/// Negative sample masking: failed trajectories copy their solution advantage,
/// successful ones are normalized against the draft rewards of the whole group.
pub fn nsm_advantages(group: &RewardGroup, solution_advantages: &[f64]) -> Result<Vec<f64>> {
    if solution_advantages.len() != group.len() {
        return Err(AdvantageError::Shape(format!(
            "{} solution advantages for a group of {}",
            solution_advantages.len(),
            group.len()
        )));
    }
    let normalized_drafts = group_normalize(group.draft_rewards())?;
    Ok((0..group.len())
        .map(|i| if group.is_success(i) { normalized_drafts[i] } else { solution_advantages[i] })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AdvantageRule {
    /// Draft advantages normalized over draft rewards, as the inequality
    /// analysis assumes.
    Unmasked,
    /// Draft advantages with negative sample masking (training default).
    #[default]
    Masked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageSet {
    pub draft_advantages: Vec<f64>,
    pub solution_advantages: Vec<f64>,
    /// `1 / (|d_i| + |y_i|)`.
    pub bias_coefficients: Vec<f64>,
    pub masked: bool,
}

impl AdvantageSet {
    pub fn compute(group: &RewardGroup, rule: AdvantageRule) -> Result<Self> {
        let solution_advantages = group_normalize(group.solution_rewards())?;
        let (draft_advantages, masked) = match rule {
            AdvantageRule::Unmasked => (group_normalize(group.draft_rewards())?, false),
            AdvantageRule::Masked => (nsm_advantages(group, &solution_advantages)?, true),
        };
        Ok(Self { draft_advantages, solution_advantages, bias_coefficients: bias_coefficients(group), masked })
    }

    pub fn unmasked(group: &RewardGroup) -> Result<Self> {
        Self::compute(group, AdvantageRule::Unmasked)
    }

    pub fn masked(group: &RewardGroup) -> Result<Self> {
        Self::compute(group, AdvantageRule::Masked)
    }

    pub fn len(&self) -> usize {
        self.solution_advantages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solution_advantages.is_empty()
    }

    fn check_matches(&self, group: &RewardGroup) -> Result<()> {
        let g = group.len();
        if self.draft_advantages.len() != g || self.solution_advantages.len() != g || self.bias_coefficients.len() != g
        {
            return Err(AdvantageError::Shape(format!(
                "advantage set of size {} does not match group of {g}",
                self.solution_advantages.len()
            )));
        }
        Ok(())
    }
}

fn bias_coefficients(group: &RewardGroup) -> Vec<f64> {
    group.draft_lengths().iter().zip(group.solution_lengths()).map(|(&d, &y)| 1.0 / (d + y) as f64).collect()
}

/// `(1/G) Σ (|d_i| A^d_i + |y_i| A^s_i) / (|d_i| + |y_i|)`. Per-token
/// advantages are constant within a segment so the token sums collapse.
pub fn segment_objective(
    draft_lengths: &[usize],
    solution_lengths: &[usize],
    draft_advantages: &[f64],
    solution_advantages: &[f64],
) -> Result<f64> {
    let g = draft_lengths.len();
    if g == 0 || solution_lengths.len() != g || draft_advantages.len() != g || solution_advantages.len() != g {
        return Err(AdvantageError::Shape("objective inputs must share a nonzero length".into()));
    }
    let total: f64 = (0..g)
        .map(|i| {
            let d = draft_lengths[i] as f64;
            let y = solution_lengths[i] as f64;
            (d * draft_advantages[i] + y * solution_advantages[i]) / (d + y)
        })
        .sum();
    Ok(total / g as f64)
}

pub fn dfpo_objective(group: &RewardGroup, advantages: &AdvantageSet) -> Result<f64> {
    advantages.check_matches(group)?;
    segment_objective(
        group.draft_lengths(),
        group.solution_lengths(),
        &advantages.draft_advantages,
        &advantages.solution_advantages,
    )
}

/// Whole-trajectory group-relative objective. No reference policy is kept,
/// so any positive KL weight is rejected rather than silently ignored.
pub fn mgrpo_objective(group: &RewardGroup, solution_advantages: &[f64], kl_weight: f64) -> Result<f64> {
    if kl_weight != 0.0 {
        return Err(AdvantageError::Unsupported(format!("kl_weight {kl_weight}: no reference policy is maintained")));
    }
    if solution_advantages.len() != group.len() {
        return Err(AdvantageError::Shape(format!(
            "{} solution advantages for a group of {}",
            solution_advantages.len(),
            group.len()
        )));
    }
    Ok(solution_advantages.iter().sum::<f64>() / group.len() as f64)
}

/// `ΔÂ_i = c_i (Â^draft_i − Â^solution_i)`.
pub fn bias_terms(group: &RewardGroup, advantages: &AdvantageSet) -> Result<Vec<f64>> {
    advantages.check_matches(group)?;
    Ok((0..group.len())
        .map(|i| advantages.bias_coefficients[i] * (advantages.draft_advantages[i] - advantages.solution_advantages[i]))
        .collect())
}

/// Clip range for the probability ratio. `low == high` is symmetric clipping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipRange {
    pub low: f64,
    pub high: f64,
}

impl Default for ClipRange {
    fn default() -> Self {
        Self { low: 0.2, high: 0.2 }
    }
}

impl ClipRange {
    pub fn symmetric(eps: f64) -> Self {
        Self { low: eps, high: eps }
    }

    /// Clip-higher preset used for the decoupled-clip baseline.
    pub fn clip_higher() -> Self {
        Self { low: 0.2, high: 0.28 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |e: f64| e > 0.0 && e < 1.0;
        if !ok(self.low) || !ok(self.high) {
            return Err(AdvantageError::Domain(format!(
                "clip epsilons ({}, {}) must lie in (0, 1)",
                self.low, self.high
            )));
        }
        Ok(())
    }

    pub fn clip(&self, ratio: f64) -> f64 {
        ratio.clamp(1.0 - self.low, 1.0 + self.high)
    }

    /// `min(ratio·A, clip(ratio)·A)`.
    pub fn term(&self, ratio: f64, advantage: f64) -> f64 {
        (ratio * advantage).min(self.clip(ratio) * advantage)
    }

    /// `min(ratio, clip(ratio))`, the advantage-free factor of the surrogate bonus.
    pub fn ratio_floor(&self, ratio: f64) -> f64 {
        ratio.min(self.clip(ratio))
    }
}

/// Per-token log-probabilities of one trajectory, split at the draft boundary.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TokenLogprobs {
    pub draft: Vec<f64>,
    pub solution: Vec<f64>,
}

impl TokenLogprobs {
    pub fn len(&self) -> usize {
        self.draft.len() + self.solution.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_aligned(new: &[TokenLogprobs], old: &[TokenLogprobs], g: usize) -> Result<()> {
    if new.len() != g || old.len() != g {
        return Err(AdvantageError::Shape(format!(
            "{} new / {} old trajectories for {g} advantages",
            new.len(),
            old.len()
        )));
    }
    for (i, (n, o)) in new.iter().zip(old).enumerate() {
        if n.draft.len() != o.draft.len() || n.solution.len() != o.solution.len() {
            return Err(AdvantageError::Shape(format!("trajectory {i}: token vectors not aligned")));
        }
        if n.is_empty() {
            return Err(AdvantageError::Shape(format!("trajectory {i} has no tokens")));
        }
    }
    Ok(())
}

fn ratios<'a>(new: &'a [f64], old: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    new.iter().zip(old).map(|(n, o)| (n - o).exp())
}

/// Clipped off-policy objective with separate draft and solution advantages.
pub fn clipped_objective(
    new_logprobs: &[TokenLogprobs],
    old_logprobs: &[TokenLogprobs],
    advantages: &AdvantageSet,
    clip: ClipRange,
) -> Result<f64> {
    clip.validate()?;
    let g = advantages.len();
    check_aligned(new_logprobs, old_logprobs, g)?;
    let total: f64 = (0..g)
        .map(|i| {
            let (n, o) = (&new_logprobs[i], &old_logprobs[i]);
            let a_d = advantages.draft_advantages[i];
            let a_s = advantages.solution_advantages[i];
            let draft: f64 = ratios(&n.draft, &o.draft).map(|r| clip.term(r, a_d)).sum();
            let sol: f64 = ratios(&n.solution, &o.solution).map(|r| clip.term(r, a_s)).sum();
            (draft + sol) / n.len() as f64
        })
        .sum();
    Ok(total / g as f64)
}

/// Clipped whole-trajectory objective: the solution advantage on every token.
pub fn mgrpo_off_objective(
    new_logprobs: &[TokenLogprobs],
    old_logprobs: &[TokenLogprobs],
    advantages: &AdvantageSet,
    clip: ClipRange,
) -> Result<f64> {
    clip.validate()?;
    let g = advantages.len();
    check_aligned(new_logprobs, old_logprobs, g)?;
    let total: f64 = (0..g)
        .map(|i| {
            let (n, o) = (&new_logprobs[i], &old_logprobs[i]);
            let a_s = advantages.solution_advantages[i];
            let s: f64 =
                ratios(&n.draft, &o.draft).chain(ratios(&n.solution, &o.solution)).map(|r| clip.term(r, a_s)).sum();
            s / n.len() as f64
        })
        .sum();
    Ok(total / g as f64)
}

/// Surrogate = clipped whole-trajectory objective plus, for every successful
/// trajectory with a non-negative draft advantage, the draft-token bonus
/// `Σ_t min(r_t, clip(r_t)) (Â^draft − Â^solution)` normalized by its length.
pub fn surrogate_objective(
    new_logprobs: &[TokenLogprobs],
    old_logprobs: &[TokenLogprobs],
    group: &RewardGroup,
    advantages: &AdvantageSet,
    clip: ClipRange,
) -> Result<f64> {
    advantages.check_matches(group)?;
    let base = mgrpo_off_objective(new_logprobs, old_logprobs, advantages, clip)?;
    let g = group.len();
    let bonus: f64 = (0..g)
        .filter(|&i| group.is_success(i) && advantages.draft_advantages[i] >= 0.0)
        .map(|i| {
            let (n, o) = (&new_logprobs[i], &old_logprobs[i]);
            let gap = advantages.draft_advantages[i] - advantages.solution_advantages[i];
            let s: f64 = ratios(&n.draft, &o.draft).map(|r| clip.ratio_floor(r) * gap).sum();
            s / n.len() as f64
        })
        .sum();
    Ok(base + bonus / g as f64)
}

/// `J_surrogate − J_clipped`; non-negative whenever masking was applied.
pub fn surrogate_gap(
    new_logprobs: &[TokenLogprobs],
    old_logprobs: &[TokenLogprobs],
    group: &RewardGroup,
    advantages: &AdvantageSet,
    clip: ClipRange,
) -> Result<f64> {
    if !advantages.masked {
        return Err(AdvantageError::Precondition("surrogate bound assumes negative sample masking".into()));
    }
    let surrogate = surrogate_objective(new_logprobs, old_logprobs, group, advantages, clip)?;
    let clipped = clipped_objective(new_logprobs, old_logprobs, advantages, clip)?;
    Ok(surrogate - clipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub part1: bool,
    pub part2: bool,
    pub part3: bool,
}

impl TheoremCheck {
    pub fn all(&self) -> bool {
        self.part1 && self.part2 && self.part3
    }
}

/// Smallest slack of each relative-advantage inequality (negative means
/// violated). `None` when a part has no index it applies to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremMargins {
    /// min over failures of `Â^draft − Â^solution`.
    pub part1: Option<f64>,
    /// min over successes with `r^draft ≤ mean` of `Â^solution − Â^draft`.
    pub part2: Option<f64>,
    /// `Â^draft − Â^solution` at the arg-max draft reward.
    pub part3: Option<f64>,
}

impl TheoremMargins {
    pub fn check(&self, tolerance: f64) -> TheoremCheck {
        let ok = |m: Option<f64>| m.is_none_or(|v| v >= -tolerance);
        TheoremCheck { part1: ok(self.part1), part2: ok(self.part2), part3: ok(self.part3) }
    }
}

fn theorem_preconditions(group: &RewardGroup) -> Result<()> {
    if group.n_success() == 0 || group.n_failure() == 0 {
        return Err(AdvantageError::Precondition(format!(
            "need at least one success and one failure (n1={}, n0={})",
            group.n_success(),
            group.n_failure()
        )));
    }
    Ok(())
}

/// Margins of the three relative-advantage inequalities for an arbitrary
/// advantage set (the unmasked rule is what the inequalities are stated for).
pub fn relative_advantage_margins(group: &RewardGroup, advantages: &AdvantageSet) -> Result<TheoremMargins> {
    theorem_preconditions(group)?;
    advantages.check_matches(group)?;
    let draft_mean = GroupStats::of(group.draft_rewards())?.mean;
    if draft_mean <= 0.0 {
        return Err(AdvantageError::UndefinedCv);
    }
    let a_d = &advantages.draft_advantages;
    let a_s = &advantages.solution_advantages;
    let min_opt =
        |it: &mut dyn Iterator<Item = f64>| it.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));

    let part1 = min_opt(&mut (0..group.len()).filter(|&i| !group.is_success(i)).map(|i| a_d[i] - a_s[i]));
    let part2 = min_opt(
        &mut (0..group.len())
            .filter(|&i| group.is_success(i) && group.draft_rewards()[i] <= draft_mean)
            .map(|i| a_s[i] - a_d[i]),
    );
    let i_max = argmax(group.draft_rewards());
    let part3 = group.is_success(i_max).then(|| a_d[i_max] - a_s[i_max]);
    Ok(TheoremMargins { part1, part2, part3 })
}

pub fn check_relative_advantage_with(group: &RewardGroup, advantages: &AdvantageSet) -> Result<TheoremCheck> {
    Ok(relative_advantage_margins(group, advantages)?.check(INEQUALITY_TOLERANCE))
}

/// Checks the three relative-advantage inequalities on unmasked advantages.
pub fn check_relative_advantage(group: &RewardGroup) -> Result<TheoremCheck> {
    theorem_preconditions(group)?;
    let adv = AdvantageSet::unmasked(group)?;
    check_relative_advantage_with(group, &adv)
}

/// `CV(r_draft) − CV(r_solution)`.
pub fn cv_margin(group: &RewardGroup) -> Result<f64> {
    theorem_preconditions(group)?;
    let draft = GroupStats::of(group.draft_rewards())?;
    let sol = GroupStats::of(group.solution_rewards())?;
    match (draft.cv, sol.cv) {
        (Some(d), Some(s)) => Ok(d - s),
        _ => Err(AdvantageError::UndefinedCv),
    }
}

pub fn cv_inequality_holds(group: &RewardGroup) -> Result<bool> {
    Ok(cv_margin(group)? >= -INEQUALITY_TOLERANCE)
}

/// `mean·(max − mean) − variance` for data in `[0, max]`.
pub fn variance_bound_margin(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(AdvantageError::Precondition("empty vector".into()));
    }
    if let Some(&v) = values.iter().find(|&&v| v < 0.0 || !v.is_finite()) {
        return Err(AdvantageError::Domain(format!("value {v} outside [0, max]")));
    }
    let stats = GroupStats::of(values)?;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(stats.mean * (max - stats.mean) - stats.variance())
}

pub fn variance_bound_holds(values: &[f64]) -> Result<bool> {
    Ok(variance_bound_margin(values)? >= -1e-12)
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

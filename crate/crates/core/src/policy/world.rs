//! DraftWorld: find a hidden location. The agent first drafts a short plan of
//! location tokens, then executes searches, each of which reports hit or
//! miss, and finally answers. Reward is terminal and binary.
//!
//! State layout (ids are dense, draft states first):
//!
//! - draft position 0, one state per hint: `h`
//! - draft position `t >= 1`, one state per previous token: `L + (t-1)·L + prev`
//! - execution, conditioned on the plan: `(suggested location, fresh|hit)`
//! - execution, unconditioned ablation: `(hint, searches so far, fresh|hit)`
//!
//! The suggested location for search `j` is plan token `j`, and past the end
//! of the plan it steps forward from the last token.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tabular::{ParamTable, StateId, TabularPolicy};
use super::PolicyError;
use crate::advantage::{rho_from_logprobs, RewardGroup};
use crate::metrics::{ActionRecord, Episode};
use crate::rng;
use crate::router::{evaluate, AnswerValue, EvalKind, EvalSpec};

pub const MAX_DRAFT_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DraftWorldConfig {
    pub n_locations: usize,
    /// Plan tokens per draft.
    pub draft_len: usize,
    pub max_turns: usize,
    /// Pin the hidden location instead of sampling it per question.
    pub answer_location: Option<usize>,
    /// P(location = hint).
    pub hint_accuracy: f64,
    /// P(location = hint + 1); the remaining mass is uniform.
    pub hint_adjacent: f64,
    pub group_size: usize,
    /// Execution states see the plan. Off is the no-draft ablation.
    pub draft_conditioning: bool,
}

impl Default for DraftWorldConfig {
    fn default() -> Self {
        Self {
            n_locations: 4,
            draft_len: 2,
            max_turns: 6,
            answer_location: None,
            hint_accuracy: 0.6,
            hint_adjacent: 0.3,
            group_size: 8,
            draft_conditioning: true,
        }
    }
}

impl DraftWorldConfig {
    /// Two locations, one-token plans: six states in total.
    pub fn tiny() -> Self {
        Self { n_locations: 2, draft_len: 1, max_turns: 4, group_size: 4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: String| Err(PolicyError::InvalidConfig(m));
        if self.n_locations < 2 {
            return bad(format!("n_locations {} must be >= 2", self.n_locations));
        }
        if self.max_turns < 2 {
            return bad(format!("max_turns {} must be >= 2", self.max_turns));
        }
        if self.draft_len == 0 || self.draft_len > MAX_DRAFT_LEN {
            return bad(format!("draft_len {} must lie in 1..={MAX_DRAFT_LEN}", self.draft_len));
        }
        if self.group_size < 2 {
            return bad(format!("group_size {} must be >= 2", self.group_size));
        }
        if let Some(l) = self.answer_location {
            if l >= self.n_locations {
                return bad(format!("answer_location {l} >= n_locations {}", self.n_locations));
            }
        }
        let (a, b) = (self.hint_accuracy, self.hint_adjacent);
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a + b > 1.0 {
            return bad(format!("hint probabilities ({a}, {b}) must be in [0, 1] and sum to <= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub hint: usize,
    pub location: usize,
}

impl Question {
    pub fn golden(&self) -> AnswerValue {
        AnswerValue::Text(location_answer(self.location))
    }
}

fn location_answer(k: usize) -> String {
    format!("loc{k}")
}

pub const NO_ANSWER: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    Found,
    Empty,
    Answered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftToken {
    pub state: StateId,
    pub token: usize,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub state: StateId,
    pub action: usize,
    pub logprob: f64,
    pub record: ActionRecord,
    pub observation: Observation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub question: Question,
    pub draft: Vec<DraftToken>,
    pub turns: Vec<Turn>,
    /// An answer action was emitted before the turn limit.
    pub terminal: bool,
    pub answer: Option<AnswerValue>,
    pub turn_count: usize,
    pub solution_reward: f64,
    pub draft_reward: f64,
}

impl Trajectory {
    pub fn draft_steps(&self) -> Vec<(StateId, usize)> {
        self.draft.iter().map(|d| (d.state, d.token)).collect()
    }

    pub fn solution_steps(&self) -> Vec<(StateId, usize)> {
        self.turns.iter().map(|t| (t.state, t.action)).collect()
    }

    pub fn draft_logprobs(&self) -> Vec<f64> {
        self.draft.iter().map(|d| d.logprob).collect()
    }

    pub fn solution_logprobs(&self) -> Vec<f64> {
        self.turns.iter().map(|t| t.logprob).collect()
    }

    pub fn actions(&self) -> Vec<ActionRecord> {
        self.turns.iter().map(|t| t.record.clone()).collect()
    }

    pub fn is_success(&self) -> bool {
        self.solution_reward == 1.0
    }
}

impl Episode for Trajectory {
    fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn turn_count(&self) -> usize {
        self.turn_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Draft,
    Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DraftWorld {
    config: DraftWorldConfig,
    spec: EvalSpec,
}

impl DraftWorld {
    pub fn new(config: DraftWorldConfig) -> Result<Self, PolicyError> {
        config.validate()?;
        Ok(Self { config, spec: EvalSpec::leaf(EvalKind::StringExactMatch) })
    }

    pub fn config(&self) -> &DraftWorldConfig {
        &self.config
    }

    fn l(&self) -> usize {
        self.config.n_locations
    }

    pub fn n_draft_states(&self) -> usize {
        self.config.draft_len * self.l()
    }

    pub fn n_exec_states(&self) -> usize {
        let l = self.l();
        if self.config.draft_conditioning {
            2 * l
        } else {
            2 * l * l
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_draft_states() + self.n_exec_states()
    }

    /// Search actions `0..L`, then the answer action at index `L`.
    pub fn answer_action(&self) -> usize {
        self.l()
    }

    pub fn action_counts(&self) -> Vec<usize> {
        let mut v = vec![self.l(); self.n_draft_states()];
        v.extend(std::iter::repeat_n(self.l() + 1, self.n_exec_states()));
        v
    }

    pub fn phase(&self, s: StateId) -> Phase {
        if s.0 < self.n_draft_states() {
            Phase::Draft
        } else {
            Phase::Execution
        }
    }

    pub fn uniform_policy(&self) -> TabularPolicy {
        TabularPolicy::uniform(&self.action_counts())
    }

    pub fn check_policy(&self, policy: &TabularPolicy) -> Result<(), PolicyError> {
        let want = self.action_counts();
        let fits = policy.n_states() == want.len()
            && want.iter().enumerate().all(|(s, &n)| policy.n_actions(StateId(s)).is_ok_and(|m| m == n));
        if fits {
            Ok(())
        } else {
            Err(PolicyError::Shape("policy table does not match the world's state layout".into()))
        }
    }

    pub fn draft_state(&self, hint: usize, position: usize, prev: usize) -> StateId {
        let l = self.l();
        if position == 0 {
            StateId(hint)
        } else {
            StateId(l + (position - 1) * l + prev)
        }
    }

    fn suggestion(&self, plan: &[usize], searches: usize) -> usize {
        let d = plan.len();
        if searches < d {
            plan[searches]
        } else {
            (plan[d - 1] + searches - d + 1) % self.l()
        }
    }

    pub fn exec_state(&self, question: &Question, plan: &[usize], searches: usize, hit: bool) -> StateId {
        let l = self.l();
        let obs = usize::from(hit);
        let local = if self.config.draft_conditioning {
            self.suggestion(plan, searches) * 2 + obs
        } else {
            (question.hint * l + searches.min(l - 1)) * 2 + obs
        };
        StateId(self.n_draft_states() + local)
    }

    pub fn sample_question(&self, rng: &mut ChaCha8Rng) -> Question {
        let l = self.l();
        let (acc, adj) = (self.config.hint_accuracy, self.config.hint_adjacent);
        let u: f64 = rng.random();
        let fallback = rng.random_range(0..l);
        match self.config.answer_location {
            Some(location) => {
                let hint = if u < acc {
                    location
                } else if u < acc + adj {
                    (location + l - 1) % l
                } else {
                    fallback
                };
                Question { hint, location }
            }
            None => {
                let hint = rng.random_range(0..l);
                let location = if u < acc {
                    hint
                } else if u < acc + adj {
                    (hint + 1) % l
                } else {
                    fallback
                };
                Question { hint, location }
            }
        }
    }

    /// Samples one trajectory for `question` and scores it.
    pub fn rollout(
        &self,
        policy: &TabularPolicy,
        question: Question,
        rng: &mut ChaCha8Rng,
    ) -> Result<Trajectory, PolicyError> {
        self.play(question, |s| sample(policy, s, rng))
    }

    /// Plays the scripted expert: plan from the true location, search the
    /// suggestion, answer on the first hit.
    pub fn expert_trajectory(&self, question: Question) -> Result<Trajectory, PolicyError> {
        let l = self.l();
        let answer = self.answer_action();
        let draft_len = self.config.draft_len;
        let mut position = 0;
        let mut plan_prev = None::<usize>;
        let mut searches = 0;
        let mut last_hit = false;
        self.play(question, |_| {
            let a = if position < draft_len {
                let tok = plan_prev.map_or(question.location, |p| (p + 1) % l);
                plan_prev = Some(tok);
                position += 1;
                tok
            } else if last_hit {
                answer
            } else {
                let k = (question.location + searches) % l;
                searches += 1;
                last_hit = k == question.location;
                k
            };
            Ok((a, 0.0))
        })
    }

    fn play(
        &self,
        question: Question,
        mut choose: impl FnMut(StateId) -> Result<(usize, f64), PolicyError>,
    ) -> Result<Trajectory, PolicyError> {
        let l = self.l();
        let mut plan = Vec::with_capacity(self.config.draft_len);
        let mut draft = Vec::with_capacity(self.config.draft_len);
        for pos in 0..self.config.draft_len {
            let state = self.draft_state(question.hint, pos, plan.last().copied().unwrap_or(0));
            let (token, logprob) = choose(state)?;
            if token >= l {
                return Err(PolicyError::UnknownAction { state: state.0, action: token });
            }
            plan.push(token);
            draft.push(DraftToken { state, token, logprob });
        }

        let mut turns = Vec::new();
        let mut searches = 0;
        let mut last_hit: Option<usize> = None;
        let mut answer = None;
        while turns.len() < self.config.max_turns {
            let state = self.exec_state(&question, &plan, searches, last_hit.is_some());
            let (action, logprob) = choose(state)?;
            if action == self.answer_action() {
                let text = last_hit.map_or_else(|| NO_ANSWER.to_string(), location_answer);
                let record = ActionRecord::new("GenerateAnswer").with("answer", text.clone());
                turns.push(Turn { state, action, logprob, record, observation: Observation::Answered });
                answer = Some(AnswerValue::Text(text));
                break;
            }
            if action > l {
                return Err(PolicyError::UnknownAction { state: state.0, action });
            }
            let found = action == question.location;
            let record = ActionRecord::new("ClassicRetrieve").with("query", format!("location {action}"));
            let observation = if found { Observation::Found } else { Observation::Empty };
            turns.push(Turn { state, action, logprob, record, observation });
            searches += 1;
            last_hit = found.then_some(action);
        }

        let terminal = answer.is_some();
        let solution_reward = match &answer {
            Some(a) => f64::from(evaluate(&self.spec, a, &question.golden(), None)?.binary),
            None => 0.0,
        };
        let rho = rho_from_logprobs(&draft.iter().map(|d: &DraftToken| d.logprob).collect::<Vec<_>>())?;
        Ok(Trajectory {
            question,
            turn_count: turns.len(),
            draft,
            turns,
            terminal,
            answer,
            solution_reward,
            draft_reward: rho * solution_reward,
        })
    }

    /// A near-deterministic policy that plays the expert for a known
    /// location: logit `strength` on the expert action, 0 elsewhere.
    pub fn expert_policy(&self, location: usize, strength: f64) -> Result<TabularPolicy, PolicyError> {
        let l = self.l();
        let mut params = ParamTable::zeros(&self.action_counts());
        for h in 0..l {
            params.set(self.draft_state(h, 0, 0).0, location, strength);
        }
        for pos in 1..self.config.draft_len {
            for prev in 0..l {
                params.set(self.draft_state(0, pos, prev).0, (prev + 1) % l, strength);
            }
        }
        let base = self.n_draft_states();
        for local in 0..self.n_exec_states() {
            let hit = local % 2 == 1;
            let a = if hit {
                self.answer_action()
            } else if self.config.draft_conditioning {
                local / 2
            } else {
                location
            };
            params.set(base + local, a, strength);
        }
        TabularPolicy::from_params(params)
    }
}

fn sample(policy: &TabularPolicy, state: StateId, rng: &mut ChaCha8Rng) -> Result<(usize, f64), PolicyError> {
    let probs = policy.distribution(state)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut choice = probs.len() - 1;
    for (a, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            choice = a;
            break;
        }
    }
    Ok((choice, policy.log_prob(state, choice)?))
}

/// A sampled group for one question.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub question: Question,
    pub trajectories: Vec<Trajectory>,
    pub rewards: RewardGroup,
}

impl RolloutGroup {
    pub fn from_trajectories(question: Question, trajectories: Vec<Trajectory>) -> Result<Self, PolicyError> {
        let rewards = RewardGroup::new(
            trajectories.iter().map(|t| t.solution_reward).collect(),
            trajectories.iter().map(|t| t.draft_reward).collect(),
            trajectories.iter().map(|t| t.draft.len()).collect(),
            trajectories.iter().map(|t| t.turn_count).collect(),
        )?;
        Ok(Self { question, trajectories, rewards })
    }
}

pub fn rollout_group(
    world: &DraftWorld,
    policy: &TabularPolicy,
    group_size: usize,
    seed: u64,
) -> Result<RolloutGroup, PolicyError> {
    if group_size < 2 {
        return Err(PolicyError::InvalidConfig(format!("group_size {group_size} must be >= 2")));
    }
    world.check_policy(policy)?;
    let mut rng = rng::stream(seed, &[]);
    let question = world.sample_question(&mut rng);
    let trajectories =
        (0..group_size).map(|_| world.rollout(policy, question, &mut rng)).collect::<Result<Vec<_>, _>>()?;
    RolloutGroup::from_trajectories(question, trajectories)
}

/// Expert demonstrations for `n` sampled questions.
pub fn expert_dataset(world: &DraftWorld, n: usize, seed: u64) -> Result<Vec<Trajectory>, PolicyError> {
    let mut rng = rng::stream(seed, &[]);
    (0..n).map(|_| world.expert_trajectory(world.sample_question(&mut rng))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::valid_answer_rate;

    #[test]
    fn tiny_world_has_six_states() {
        let w = DraftWorld::new(DraftWorldConfig::tiny()).unwrap();
        assert_eq!(w.n_states(), 6);
        let w = DraftWorld::new(DraftWorldConfig::default()).unwrap();
        assert_eq!(w.n_states(), 8 + 8);
        assert_eq!(w.phase(StateId(7)), Phase::Draft);
        assert_eq!(w.phase(StateId(8)), Phase::Execution);
    }

    #[test]
    fn config_validation() {
        let bad = [
            DraftWorldConfig { n_locations: 1, ..Default::default() },
            DraftWorldConfig { max_turns: 1, ..Default::default() },
            DraftWorldConfig { draft_len: 0, ..Default::default() },
            DraftWorldConfig { answer_location: Some(9), ..Default::default() },
            DraftWorldConfig { hint_accuracy: 0.8, hint_adjacent: 0.3, ..Default::default() },
        ];
        for c in bad {
            assert!(DraftWorld::new(c).is_err());
        }
    }

    #[test]
    fn expert_policy_solves_in_two_turns() {
        for conditioning in [true, false] {
            let cfg =
                DraftWorldConfig { answer_location: Some(2), draft_conditioning: conditioning, ..Default::default() };
            let w = DraftWorld::new(cfg).unwrap();
            let p = w.expert_policy(2, 60.0).unwrap();
            let g = rollout_group(&w, &p, 8, 11).unwrap();
            for t in &g.trajectories {
                assert_eq!(t.solution_reward, 1.0);
                assert_eq!(t.turn_count, 2);
                assert!(t.terminal);
                assert_eq!(t.answer, Some(AnswerValue::Text("loc2".into())));
            }
        }
    }

    #[test]
    fn scripted_expert_matches_expert_policy() {
        let w = DraftWorld::new(DraftWorldConfig::default()).unwrap();
        let q = Question { hint: 1, location: 3 };
        let t = w.expert_trajectory(q).unwrap();
        assert_eq!(t.draft.iter().map(|d| d.token).collect::<Vec<_>>(), vec![3, 0]);
        assert_eq!(t.solution_steps().iter().map(|s| s.1).collect::<Vec<_>>(), vec![3, 4]);
        assert_eq!(t.solution_reward, 1.0);
        assert_eq!(t.draft_reward, 1.0);
    }

    #[test]
    fn never_answering_truncates() {
        let w = DraftWorld::new(DraftWorldConfig::default()).unwrap();
        let mut params = ParamTable::zeros(&w.action_counts());
        for s in w.n_draft_states()..w.n_states() {
            params.set(s, w.answer_action(), -1e3);
        }
        let p = TabularPolicy::from_params(params).unwrap();
        let g = rollout_group(&w, &p, 4, 2).unwrap();
        for t in &g.trajectories {
            assert_eq!(t.solution_reward, 0.0);
            assert_eq!(t.turn_count, 6);
            assert!(!t.terminal);
            assert_eq!(t.answer, None);
        }
        assert_eq!(valid_answer_rate(&g.trajectories).unwrap(), 0.0);
    }

    #[test]
    fn rollouts_are_deterministic_and_shift_invariant() {
        let w = DraftWorld::new(DraftWorldConfig::default()).unwrap();
        let p = w.uniform_policy();
        let a = rollout_group(&w, &p, 8, 99).unwrap();
        let b = rollout_group(&w, &p, 8, 99).unwrap();
        assert_eq!(format!("{:?}", a), format!("{:?}", b));

        let mut shifted = p.clone();
        for s in 0..shifted.n_states() {
            shifted.params_mut().row_mut(StateId(s)).unwrap().iter_mut().for_each(|x| *x += 3.25);
        }
        let c = rollout_group(&w, &shifted, 8, 99).unwrap();
        for (x, y) in a.trajectories.iter().zip(&c.trajectories) {
            assert_eq!(x.draft_steps(), y.draft_steps());
            assert_eq!(x.solution_steps(), y.solution_steps());
            for (u, v) in x.solution_logprobs().iter().zip(y.solution_logprobs()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn draft_reward_is_rho_times_success() {
        let w = DraftWorld::new(DraftWorldConfig::default()).unwrap();
        let g = rollout_group(&w, &w.uniform_policy(), 16, 5).unwrap();
        for t in &g.trajectories {
            let rho = rho_from_logprobs(&t.draft_logprobs()).unwrap();
            assert!((t.draft_reward - rho * t.solution_reward).abs() < 1e-15);
            assert!(t.draft_logprobs().iter().chain(&t.solution_logprobs()).all(|&l| l <= 0.0));
            assert!(t.turn_count <= 6);
        }
    }

    #[test]
    fn sampler_follows_distribution() {
        let p = TabularPolicy::from_params(ParamTable::from_rows(vec![vec![3f64.ln(), 0.0]])).unwrap();
        let mut rng = rng::stream(1, &[]);
        let n = 20_000;
        let zeros = (0..n).filter(|_| sample(&p, StateId(0), &mut rng).unwrap().0 == 0).count();
        let frac = zeros as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.02, "{frac}");
    }
}

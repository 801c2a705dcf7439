//! Knowing-doing probe: a multi-armed bandit where the "right" move at every
//! step is the UCB argmax. An agent declares per-arm values (knowing) and
//! picks an arm (doing); the harness tallies both against the truth.

use std::io::BufRead;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::advantage::argmax;
use crate::rng;

/// `mean + c · sqrt(ln t / pulls)`.
pub fn ucb(mean: f64, pulls: u64, t: u64, c: f64) -> f64 {
    mean + c * ((t as f64).ln() / pulls as f64).sqrt()
}

fn ucb_from_stats(avg_rewards: &[f64], pulls: &[u64], c: f64) -> Result<Vec<f64>, MetricsError> {
    if avg_rewards.len() != pulls.len() || pulls.is_empty() {
        return Err(MetricsError::Domain("bandit statistics must be non-empty and aligned".into()));
    }
    if let Some(a) = pulls.iter().position(|&p| p == 0) {
        return Err(MetricsError::Precondition(format!("arm {a} has never been pulled")));
    }
    let t: u64 = pulls.iter().sum();
    Ok(avg_rewards.iter().zip(pulls).map(|(&m, &p)| ucb(m, p, t, c)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditEnv {
    /// Hidden Bernoulli means.
    means: Vec<f64>,
    c: f64,
    pulls: Vec<u64>,
    reward_sums: Vec<f64>,
}

impl BanditEnv {
    pub fn new(means: Vec<f64>, c: f64) -> Result<Self, MetricsError> {
        if means.len() < 2 {
            return Err(MetricsError::Domain("a bandit needs at least 2 arms".into()));
        }
        if means.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(MetricsError::Domain("arm means must lie in [0, 1]".into()));
        }
        if !(c >= 0.0) || !c.is_finite() {
            return Err(MetricsError::Domain(format!("exploration coefficient {c} must be >= 0")));
        }
        let n = means.len();
        Ok(Self { means, c, pulls: vec![0; n], reward_sums: vec![0.0; n] })
    }

    /// Environment with a given pull history, for inspecting UCB values.
    pub fn with_history(means: Vec<f64>, c: f64, empirical_means: &[f64], pulls: &[u64]) -> Result<Self, MetricsError> {
        let mut env = Self::new(means, c)?;
        if empirical_means.len() != env.n_arms() || pulls.len() != env.n_arms() {
            return Err(MetricsError::Domain("history does not match the arm count".into()));
        }
        env.pulls = pulls.to_vec();
        env.reward_sums = empirical_means.iter().zip(pulls).map(|(m, &p)| m * p as f64).collect();
        Ok(env)
    }

    pub fn random(n_arms: usize, c: f64, rng: &mut ChaCha8Rng) -> Result<Self, MetricsError> {
        let means = (0..n_arms).map(|_| rng.random_range(0.1..0.9)).collect();
        Self::new(means, c)
    }

    pub fn n_arms(&self) -> usize {
        self.means.len()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn t(&self) -> u64 {
        self.pulls.iter().sum()
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn empirical_means(&self) -> Vec<f64> {
        self.reward_sums.iter().zip(&self.pulls).map(|(s, &p)| if p == 0 { 0.0 } else { s / p as f64 }).collect()
    }

    pub fn pull(&mut self, arm: usize, rng: &mut ChaCha8Rng) -> Result<f64, MetricsError> {
        let mean = *self.means.get(arm).ok_or(MetricsError::Protocol(format!("arm {arm} out of range")))?;
        let r = if rng.random::<f64>() < mean { 1.0 } else { 0.0 };
        self.pulls[arm] += 1;
        self.reward_sums[arm] += r;
        Ok(r)
    }

    pub fn warm_start(&mut self, rng: &mut ChaCha8Rng) {
        for a in 0..self.n_arms() {
            // Index is in range by construction.
            let _ = self.pull(a, rng);
        }
    }
}

pub fn ucb_values(env: &BanditEnv) -> Result<Vec<f64>, MetricsError> {
    ucb_from_stats(&env.empirical_means(), &env.pulls, env.c)
}

/// What an agent sees before each decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeObservation {
    pub step: usize,
    pub avg_rewards: Vec<f64>,
    pub pulls: Vec<u64>,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDecision {
    /// The agent's stated UCB value per arm.
    pub declared: Vec<f64>,
    pub action: usize,
}

pub trait ProbeAgent: Sync {
    fn decide(&self, obs: &ProbeObservation, rng: &mut ChaCha8Rng) -> Result<ProbeDecision, MetricsError>;
}

/// Computes UCB exactly and acts on it.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactUcbAgent;

/// Declares UCB values with Gaussian noise and acts on its own declaration.
#[derive(Debug, Clone, Copy)]
pub struct NoisyKnowingAgent {
    pub sigma: f64,
}

/// Declares exact UCB values but pulls the empirically best arm.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyDoingAgent;

impl ProbeAgent for ExactUcbAgent {
    fn decide(&self, obs: &ProbeObservation, _: &mut ChaCha8Rng) -> Result<ProbeDecision, MetricsError> {
        let declared = ucb_from_stats(&obs.avg_rewards, &obs.pulls, obs.c)?;
        let action = argmax(&declared);
        Ok(ProbeDecision { declared, action })
    }
}

impl ProbeAgent for NoisyKnowingAgent {
    fn decide(&self, obs: &ProbeObservation, rng: &mut ChaCha8Rng) -> Result<ProbeDecision, MetricsError> {
        let noise = Normal::new(0.0, self.sigma)
            .map_err(|e| MetricsError::Domain(format!("noise sigma {}: {e}", self.sigma)))?;
        let declared: Vec<f64> =
            ucb_from_stats(&obs.avg_rewards, &obs.pulls, obs.c)?.into_iter().map(|v| v + noise.sample(rng)).collect();
        let action = argmax(&declared);
        Ok(ProbeDecision { declared, action })
    }
}

impl ProbeAgent for GreedyDoingAgent {
    fn decide(&self, obs: &ProbeObservation, _: &mut ChaCha8Rng) -> Result<ProbeDecision, MetricsError> {
        let declared = ucb_from_stats(&obs.avg_rewards, &obs.pulls, obs.c)?;
        Ok(ProbeDecision { declared, action: argmax(&obs.avg_rewards) })
    }
}

/// One line of a probe transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeRecord {
    pub env: usize,
    pub step: usize,
    pub avg_rewards: Vec<f64>,
    pub pulls: Vec<u64>,
    pub c: f64,
    pub declared: Vec<f64>,
    pub action: usize,
}

impl ProbeRecord {
    /// `(knowing, doing)` against the true UCB argmax.
    pub fn judge(&self) -> Result<(bool, bool), MetricsError> {
        let truth = argmax(&ucb_from_stats(&self.avg_rewards, &self.pulls, self.c)?);
        if self.declared.len() != self.pulls.len() || self.declared.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::Protocol(format!(
                "env {} step {}: declared values must be finite, one per arm",
                self.env, self.step
            )));
        }
        if self.action >= self.pulls.len() {
            return Err(MetricsError::Protocol(format!(
                "env {} step {}: arm {} out of range",
                self.env, self.step, self.action
            )));
        }
        Ok((argmax(&self.declared) == truth, self.action == truth))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KnowingDoingCounts {
    pub knowing_doing: u64,
    pub knowing_not_doing: u64,
    pub not_knowing_doing: u64,
    pub not_knowing_not_doing: u64,
}

impl KnowingDoingCounts {
    fn add(&mut self, knowing: bool, doing: bool) {
        match (knowing, doing) {
            (true, true) => self.knowing_doing += 1,
            (true, false) => self.knowing_not_doing += 1,
            (false, true) => self.not_knowing_doing += 1,
            (false, false) => self.not_knowing_not_doing += 1,
        }
    }

    fn merge(mut self, o: Self) -> Self {
        self.knowing_doing += o.knowing_doing;
        self.knowing_not_doing += o.knowing_not_doing;
        self.not_knowing_doing += o.not_knowing_doing;
        self.not_knowing_not_doing += o.not_knowing_not_doing;
        self
    }

    pub fn total(&self) -> u64 {
        self.knowing_doing + self.knowing_not_doing + self.not_knowing_doing + self.not_knowing_not_doing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowingDoingMatrix {
    pub n_envs: usize,
    pub steps: usize,
    pub counts: KnowingDoingCounts,
    pub total: u64,
    pub knowing_rate: f64,
    pub doing_rate: f64,
    /// `None` when the agent never knew.
    pub doing_given_knowing: Option<f64>,
}

impl KnowingDoingMatrix {
    fn from_counts(n_envs: usize, steps: usize, counts: KnowingDoingCounts) -> Self {
        let total = counts.total();
        let knowing = counts.knowing_doing + counts.knowing_not_doing;
        let doing = counts.knowing_doing + counts.not_knowing_doing;
        let rate = |k: u64, n: u64| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        Self {
            n_envs,
            steps,
            counts,
            total,
            knowing_rate: rate(knowing, total),
            doing_rate: rate(doing, total),
            doing_given_knowing: (knowing > 0).then(|| rate(counts.knowing_doing, knowing)),
        }
    }

    /// Zero off-diagonal mass: knowing and doing always agree.
    pub fn is_gap_free(&self) -> bool {
        self.counts.knowing_not_doing == 0 && self.counts.not_knowing_doing == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub n_envs: usize,
    pub steps: usize,
    pub n_arms: usize,
    pub c: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { n_envs: 64, steps: 50, n_arms: 3, c: 1.0 }
    }
}

/// Runs every environment and returns the full transcript, ordered by
/// `(env, step)`. Environments are independent and run in parallel.
pub fn probe_transcript(
    agent: &dyn ProbeAgent,
    config: &ProbeConfig,
    seed: u64,
) -> Result<Vec<ProbeRecord>, MetricsError> {
    if config.n_envs == 0 || config.steps == 0 {
        return Err(MetricsError::Domain("n_envs and steps must be positive".into()));
    }
    let per_env: Vec<Vec<ProbeRecord>> =
        (0..config.n_envs).into_par_iter().map(|e| run_env(agent, config, seed, e)).collect::<Result<_, _>>()?;
    Ok(per_env.into_iter().flatten().collect())
}

fn run_env(
    agent: &dyn ProbeAgent,
    config: &ProbeConfig,
    seed: u64,
    env_index: usize,
) -> Result<Vec<ProbeRecord>, MetricsError> {
    let mut env_rng = rng::stream(seed, &[env_index as u64, 0]);
    let mut agent_rng = rng::stream(seed, &[env_index as u64, 1]);
    let mut env = BanditEnv::random(config.n_arms, config.c, &mut env_rng)?;
    env.warm_start(&mut env_rng);
    let mut out = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let obs = ProbeObservation { step, avg_rewards: env.empirical_means(), pulls: env.pulls.clone(), c: env.c };
        let decision = agent.decide(&obs, &mut agent_rng)?;
        let record = ProbeRecord {
            env: env_index,
            step,
            avg_rewards: obs.avg_rewards,
            pulls: obs.pulls,
            c: obs.c,
            declared: decision.declared,
            action: decision.action,
        };
        record.judge()?;
        env.pull(decision.action, &mut env_rng)?;
        out.push(record);
    }
    Ok(out)
}

/// Tallies a transcript into the 2×2 matrix.
pub fn score_transcript(records: &[ProbeRecord]) -> Result<KnowingDoingMatrix, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty("probe transcript"));
    }
    let mut counts = KnowingDoingCounts::default();
    for r in records {
        let (k, d) = r.judge()?;
        counts.add(k, d);
    }
    let n_envs = records.iter().map(|r| r.env).collect::<std::collections::BTreeSet<_>>().len();
    let steps = records.iter().map(|r| r.step + 1).max().unwrap_or(0);
    Ok(KnowingDoingMatrix::from_counts(n_envs, steps, counts))
}

pub fn run_probe(agent: &dyn ProbeAgent, config: &ProbeConfig, seed: u64) -> Result<KnowingDoingMatrix, MetricsError> {
    let records = probe_transcript(agent, config, seed)?;
    let counts = records
        .par_iter()
        .map(|r| {
            let (k, d) = r.judge()?;
            let mut c = KnowingDoingCounts::default();
            c.add(k, d);
            Ok(c)
        })
        .try_reduce(KnowingDoingCounts::default, |a, b| Ok(a.merge(b)))?;
    Ok(KnowingDoingMatrix::from_counts(config.n_envs, config.steps, counts))
}

/// Reads a line-delimited transcript. Blank lines are ignored; any malformed
/// line is an error naming its line number.
pub fn read_transcript(reader: impl BufRead) -> Result<Vec<ProbeRecord>, MetricsError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MetricsError::Protocol(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ProbeRecord =
            serde_json::from_str(&line).map_err(|e| MetricsError::Protocol(format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ucb_examples() {
        let env = BanditEnv::with_history(vec![0.5; 3], 1.0, &[0.5; 3], &[1, 1, 1]).unwrap();
        let v = ucb_values(&env).unwrap();
        let expect = 0.5 + 3f64.ln().sqrt();
        assert!(v.iter().all(|x| (x - expect).abs() < 1e-15));

        let env = BanditEnv::with_history(vec![0.5; 3], 0.0, &[0.2, 0.8, 0.5], &[5, 2, 3]).unwrap();
        assert_eq!(ucb_values(&env).unwrap(), vec![0.2, 0.8, 0.5]);

        let env = BanditEnv::with_history(vec![0.5; 3], 1.0, &[0.2, 0.8, 0.5], &[5, 2, 3]).unwrap();
        let v = ucb_values(&env).unwrap();
        for (got, want) in v.iter().zip([0.8786, 1.8727, 1.3760]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-3);
        }
    }

    #[test]
    fn unpulled_arm_is_a_precondition_error() {
        let env = BanditEnv::new(vec![0.3, 0.6], 1.0).unwrap();
        assert!(matches!(ucb_values(&env), Err(MetricsError::Precondition(_))));
    }

    #[test]
    fn ucb_monotone_in_t_and_pulls() {
        assert!(ucb(0.4, 3, 11, 1.0) > ucb(0.4, 3, 10, 1.0));
        assert!(ucb(0.4, 4, 10, 1.0) < ucb(0.4, 3, 10, 1.0));
    }

    #[test]
    fn exact_agent_has_no_gap() {
        let m = run_probe(&ExactUcbAgent, &ProbeConfig::default(), 3).unwrap();
        assert_eq!(m.total, 64 * 50);
        assert!(m.is_gap_free());
        assert_eq!(m.knowing_rate, 1.0);
        assert_eq!(m.doing_given_knowing, Some(1.0));
    }

    #[test]
    fn greedy_agent_knows_but_does_not_always_do() {
        let cfg = ProbeConfig::default();
        let records = probe_transcript(&GreedyDoingAgent, &cfg, 5).unwrap();
        let diverged = records.iter().filter(|r| argmax(&r.avg_rewards) != argmax(&r.declared)).count() as u64;
        let m = score_transcript(&records).unwrap();
        assert_eq!(m.knowing_rate, 1.0);
        assert_eq!(m.counts.knowing_not_doing, diverged);
        assert!(diverged > 0);
        assert!(m.doing_given_knowing.unwrap() < 1.0);
        assert_eq!(run_probe(&GreedyDoingAgent, &cfg, 5).unwrap(), m);
    }

    #[test]
    fn noisy_agent_runs_and_counts_conserve() {
        let cfg = ProbeConfig { n_envs: 8, steps: 20, ..Default::default() };
        let m = run_probe(&NoisyKnowingAgent { sigma: 0.5 }, &cfg, 1).unwrap();
        assert_eq!(m.total, 160);
        assert!(m.knowing_rate < 1.0);
    }

    #[test]
    fn transcript_replay_hand_count() {
        let text = r#"{"env":0,"step":0,"avg_rewards":[0.2,0.8,0.5],"pulls":[5,2,3],"c":1.0,"declared":[0.9,1.9,1.4],"action":1}

{"env":0,"step":1,"avg_rewards":[0.2,0.8,0.5],"pulls":[5,2,3],"c":1.0,"declared":[0.9,1.9,1.4],"action":2}
"#;
        let recs = read_transcript(text.as_bytes()).unwrap();
        let m = score_transcript(&recs).unwrap();
        assert_eq!(m.counts.knowing_doing, 1);
        assert_eq!(m.counts.knowing_not_doing, 1);
        assert_eq!(m.doing_given_knowing, Some(0.5));
        assert!(read_transcript("{\"env\":0}\n".as_bytes()).is_err());
    }

    #[test]
    fn out_of_range_arm_is_a_protocol_error() {
        let r = ProbeRecord {
            env: 0,
            step: 0,
            avg_rewards: vec![0.1, 0.2],
            pulls: vec![1, 1],
            c: 1.0,
            declared: vec![0.0, 0.0],
            action: 7,
        };
        assert!(matches!(r.judge(), Err(MetricsError::Protocol(_))));
    }
}

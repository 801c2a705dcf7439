//! Analytic score-function gradients for tabular policies.
//!
//! The on-policy objectives are treated as surrogates with the advantages held
//! fixed: `J(θ) = (1/G) Σ_i (1/n_i) [Â^d_i Σ_{t∈d_i} log π(t) + Â^s_i Σ_{t∈y_i} log π(t)]`
//! with `n_i = |d_i| + |y_i|`. Their gradients are what training ascends.

use super::tabular::{log_softmax, ParamTable, StateId, TabularPolicy};
use super::world::RolloutGroup;
use super::PolicyError;
use crate::advantage::{bias_terms, AdvantageSet, ClipRange};

/// `Σ_t ∇_θ log π(a_t | s_t)`; each step adds `e_a − π(·|s)` to its row.
pub fn log_likelihood_gradient(policy: &TabularPolicy, steps: &[(StateId, usize)]) -> Result<ParamTable, PolicyError> {
    let mut g = ParamTable::zeros_like(policy.params());
    accumulate(policy, steps, 1.0, &mut g)?;
    Ok(g)
}

fn accumulate(
    policy: &TabularPolicy,
    steps: &[(StateId, usize)],
    weight: f64,
    out: &mut ParamTable,
) -> Result<(), PolicyError> {
    if weight == 0.0 {
        return Ok(());
    }
    for &(s, a) in steps {
        let probs = policy.distribution(s)?;
        if a >= probs.len() {
            return Err(PolicyError::UnknownAction { state: s.0, action: a });
        }
        let row = out.row_mut(s)?;
        for (b, (g, p)) in row.iter_mut().zip(&probs).enumerate() {
            let ind = if b == a { 1.0 } else { 0.0 };
            *g += weight * (ind - p);
        }
    }
    Ok(())
}

/// `(advantage / normalizer) Σ_t ∇ log π(a_t|s_t)`.
pub fn analytic_segment_gradient(
    policy: &TabularPolicy,
    steps: &[(StateId, usize)],
    advantage: f64,
    normalizer: f64,
) -> Result<ParamTable, PolicyError> {
    if !(normalizer > 0.0) {
        return Err(PolicyError::InvalidConfig(format!("normalizer {normalizer} must be > 0")));
    }
    let mut g = ParamTable::zeros_like(policy.params());
    accumulate(policy, steps, advantage / normalizer, &mut g)?;
    Ok(g)
}

fn check_group(group: &RolloutGroup, adv: &AdvantageSet) -> Result<(), PolicyError> {
    if adv.len() != group.trajectories.len() {
        return Err(PolicyError::Shape(format!(
            "{} advantages for {} trajectories",
            adv.len(),
            group.trajectories.len()
        )));
    }
    Ok(())
}

fn normalizer(group: &RolloutGroup, i: usize) -> f64 {
    let t = &group.trajectories[i];
    (t.draft.len() + t.turns.len()) as f64
}

/// Gradient of the joint draft/solution objective.
pub fn dfpo_gradient(
    policy: &TabularPolicy,
    group: &RolloutGroup,
    adv: &AdvantageSet,
) -> Result<ParamTable, PolicyError> {
    check_group(group, adv)?;
    let g_inv = 1.0 / group.trajectories.len() as f64;
    let mut out = ParamTable::zeros_like(policy.params());
    for (i, t) in group.trajectories.iter().enumerate() {
        let n = normalizer(group, i);
        accumulate(policy, &t.draft_steps(), g_inv * adv.draft_advantages[i] / n, &mut out)?;
        accumulate(policy, &t.solution_steps(), g_inv * adv.solution_advantages[i] / n, &mut out)?;
    }
    Ok(out)
}

/// Gradient of the whole-trajectory objective: the solution advantage on
/// every token, draft included.
pub fn mgrpo_gradient(
    policy: &TabularPolicy,
    group: &RolloutGroup,
    solution_advantages: &[f64],
) -> Result<ParamTable, PolicyError> {
    if solution_advantages.len() != group.trajectories.len() {
        return Err(PolicyError::Shape("one solution advantage per trajectory required".into()));
    }
    let g_inv = 1.0 / group.trajectories.len() as f64;
    let mut out = ParamTable::zeros_like(policy.params());
    for (i, t) in group.trajectories.iter().enumerate() {
        let w = g_inv * solution_advantages[i] / normalizer(group, i);
        accumulate(policy, &t.draft_steps(), w, &mut out)?;
        accumulate(policy, &t.solution_steps(), w, &mut out)?;
    }
    Ok(out)
}

/// `(1/G) Σ_i ΔÂ_i ∇ log π(d_i)` with `ΔÂ_i = (Â^d_i − Â^s_i) / n_i`.
pub fn bias_gradient(
    policy: &TabularPolicy,
    group: &RolloutGroup,
    adv: &AdvantageSet,
) -> Result<ParamTable, PolicyError> {
    check_group(group, adv)?;
    let delta = bias_terms(&group.rewards, adv)?;
    let g_inv = 1.0 / group.trajectories.len() as f64;
    let mut out = ParamTable::zeros_like(policy.params());
    for (i, t) in group.trajectories.iter().enumerate() {
        accumulate(policy, &t.draft_steps(), g_inv * delta[i], &mut out)?;
    }
    Ok(out)
}

/// Max-norm of `∇J_DFPO − (∇J_M-GRPO + bias)`, all three computed
/// analytically and independently.
pub fn verify_decomposition(
    policy: &TabularPolicy,
    group: &RolloutGroup,
    adv: &AdvantageSet,
) -> Result<f64, PolicyError> {
    let lhs = dfpo_gradient(policy, group, adv)?;
    let mut rhs = mgrpo_gradient(policy, group, &adv.solution_advantages)?;
    rhs.add_scaled(&bias_gradient(policy, group, adv)?, 1.0);
    Ok(lhs.max_abs_diff(&rhs))
}

/// Value of the joint surrogate at `policy`, advantages held fixed.
pub fn dfpo_surrogate_value(
    policy: &TabularPolicy,
    group: &RolloutGroup,
    adv: &AdvantageSet,
) -> Result<f64, PolicyError> {
    check_group(group, adv)?;
    let g = group.trajectories.len() as f64;
    let mut total = 0.0;
    for (i, t) in group.trajectories.iter().enumerate() {
        let n = normalizer(group, i);
        let d: f64 = sum_logprob(policy, &t.draft_steps())?;
        let y: f64 = sum_logprob(policy, &t.solution_steps())?;
        total += (adv.draft_advantages[i] * d + adv.solution_advantages[i] * y) / n;
    }
    Ok(total / g)
}

pub fn sum_logprob(policy: &TabularPolicy, steps: &[(StateId, usize)]) -> Result<f64, PolicyError> {
    steps.iter().map(|&(s, a)| policy.log_prob(s, a)).sum()
}

/// Central differences of `f` over every parameter.
pub fn finite_difference_gradient(
    policy: &TabularPolicy,
    h: f64,
    f: impl Fn(&TabularPolicy) -> Result<f64, PolicyError>,
) -> Result<ParamTable, PolicyError> {
    let mut out = ParamTable::zeros_like(policy.params());
    let mut probe = policy.clone();
    for (s, a) in policy.params().flat_index() {
        let x = policy.params().get(s, a);
        probe.params_mut().set(s, a, x + h);
        let up = f(&probe)?;
        probe.params_mut().set(s, a, x - h);
        let down = f(&probe)?;
        probe.params_mut().set(s, a, x);
        out.set(s, a, (up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Max-norm of finite-difference `∇J_DFPO` minus the analytic decomposition.
pub fn decomposition_fd_residual(
    policy: &TabularPolicy,
    group: &RolloutGroup,
    adv: &AdvantageSet,
    h: f64,
) -> Result<f64, PolicyError> {
    let fd = finite_difference_gradient(policy, h, |p| dfpo_surrogate_value(p, group, adv))?;
    let mut rhs = mgrpo_gradient(policy, group, &adv.solution_advantages)?;
    rhs.add_scaled(&bias_gradient(policy, group, adv)?, 1.0);
    Ok(fd.max_abs_diff(&rhs))
}

/// Gradient of the clipped off-policy objective with respect to the current
/// policy. A token contributes `r·Â·∇log π` when the unclipped branch of
/// `min(rÂ, clip(r)Â)` is the active one, and nothing otherwise.
pub fn clipped_gradient(
    policy: &TabularPolicy,
    group: &RolloutGroup,
    adv: &AdvantageSet,
    clip: ClipRange,
) -> Result<ParamTable, PolicyError> {
    check_group(group, adv)?;
    clip.validate()?;
    let g_inv = 1.0 / group.trajectories.len() as f64;
    let mut out = ParamTable::zeros_like(policy.params());
    for (i, t) in group.trajectories.iter().enumerate() {
        let n = normalizer(group, i);
        let segments = [
            (t.draft.iter().map(|d| (d.state, d.token, d.logprob)).collect::<Vec<_>>(), adv.draft_advantages[i]),
            (t.turns.iter().map(|u| (u.state, u.action, u.logprob)).collect(), adv.solution_advantages[i]),
        ];
        for (tokens, a) in segments {
            if a == 0.0 {
                continue;
            }
            for (s, act, old) in tokens {
                let lp = log_softmax(policy.params().row(s)?);
                let r = (lp[act] - old).exp();
                if r * a <= clip.clip(r) * a {
                    accumulate(policy, &[(s, act)], g_inv * r * a / n, &mut out)?;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::tabular::single_step_update;
    use crate::policy::world::{rollout_group, DraftWorld, DraftWorldConfig};
    use crate::rng;
    use rand::Rng;

    fn random_policy(world: &DraftWorld, seed: u64, scale: f64) -> TabularPolicy {
        let mut r = rng::stream(seed, &[]);
        let rows =
            world.action_counts().iter().map(|&n| (0..n).map(|_| r.random_range(-scale..scale)).collect()).collect();
        TabularPolicy::from_params(ParamTable::from_rows(rows)).unwrap()
    }

    #[test]
    fn zero_advantage_gives_zero_gradient() {
        let p = TabularPolicy::uniform(&[3, 2]);
        let g = analytic_segment_gradient(&p, &[(StateId(0), 1), (StateId(1), 0)], 0.0, 3.0).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn single_token_matches_single_step_update() {
        let p = TabularPolicy::from_params(ParamTable::from_rows(vec![vec![0.2, -0.4, 0.9]])).unwrap();
        let g = analytic_segment_gradient(&p, &[(StateId(0), 2)], 0.7, 4.0).unwrap();
        let d = single_step_update(&p, StateId(0), 2, 0.7, 0.25).unwrap();
        assert!(g.max_abs_diff(&d) < 1e-15);
    }

    #[test]
    fn segment_gradient_matches_finite_differences() {
        let w = DraftWorld::new(DraftWorldConfig::default()).unwrap();
        let p = random_policy(&w, 4, 1.5);
        let g = rollout_group(&w, &p, 2, 8).unwrap();
        let t = &g.trajectories[0];
        let steps: Vec<_> = t.draft_steps().into_iter().chain(t.solution_steps()).collect();
        let analytic = analytic_segment_gradient(&p, &steps, 1.3, 5.0).unwrap();
        let fd = finite_difference_gradient(&p, 1e-5, |q| Ok(1.3 / 5.0 * sum_logprob(q, &steps)?)).unwrap();
        assert!(analytic.max_abs_diff(&fd) <= 1e-6);
    }

    #[test]
    fn decomposition_holds_on_random_groups() {
        let w = DraftWorld::new(DraftWorldConfig::tiny()).unwrap();
        for seed in 0..20 {
            let p = random_policy(&w, seed, 2.0);
            let g = rollout_group(&w, &p, 4, seed + 100).unwrap();
            for adv in [AdvantageSet::unmasked(&g.rewards), AdvantageSet::masked(&g.rewards)] {
                let adv = match adv {
                    Ok(a) => a,
                    Err(_) => continue,
                };
                assert!(verify_decomposition(&p, &g, &adv).unwrap() <= 1e-10);
                assert!(decomposition_fd_residual(&p, &g, &adv, 1e-6).unwrap() <= 1e-5);
            }
        }
    }

    #[test]
    fn zero_advantage_group_has_zero_residual() {
        let w = DraftWorld::new(DraftWorldConfig::tiny()).unwrap();
        let p = w.uniform_policy();
        let g = rollout_group(&w, &p, 4, 1).unwrap();
        let adv = AdvantageSet {
            draft_advantages: vec![0.0; 4],
            solution_advantages: vec![0.0; 4],
            bias_coefficients: vec![0.5; 4],
            masked: false,
        };
        assert_eq!(verify_decomposition(&p, &g, &adv).unwrap(), 0.0);
    }

    #[test]
    fn clipped_gradient_on_policy_equals_dfpo_gradient() {
        let w = DraftWorld::new(DraftWorldConfig::default()).unwrap();
        let p = random_policy(&w, 2, 1.0);
        let g = rollout_group(&w, &p, 8, 3).unwrap();
        let adv = AdvantageSet::unmasked(&g.rewards).unwrap();
        let a = clipped_gradient(&p, &g, &adv, ClipRange::default()).unwrap();
        let b = dfpo_gradient(&p, &g, &adv).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }
}

use serde::{Deserialize, Serialize};

use super::PolicyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub usize);

/// A ragged table indexed by `(state, action)`; each state has its own
/// action count. Used for parameters, gradients and update deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTable {
    rows: Vec<Vec<f64>>,
}

impl ParamTable {
    pub fn zeros(action_counts: &[usize]) -> Self {
        Self { rows: action_counts.iter().map(|&n| vec![0.0; n]).collect() }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        Self { rows }
    }

    pub fn zeros_like(other: &ParamTable) -> Self {
        Self { rows: other.rows.iter().map(|r| vec![0.0; r.len()]).collect() }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn n_params(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, s: StateId) -> Result<&[f64], PolicyError> {
        self.rows.get(s.0).map(Vec::as_slice).ok_or(PolicyError::UnknownState(s.0))
    }

    pub fn row_mut(&mut self, s: StateId) -> Result<&mut [f64], PolicyError> {
        self.rows.get_mut(s.0).map(Vec::as_mut_slice).ok_or(PolicyError::UnknownState(s.0))
    }

    pub fn same_shape(&self, other: &ParamTable) -> bool {
        self.rows.len() == other.rows.len() && self.rows.iter().zip(&other.rows).all(|(a, b)| a.len() == b.len())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ParamTable, scale: f64) {
        debug_assert!(self.same_shape(other));
        for (r, o) in self.rows.iter_mut().zip(&other.rows) {
            for (x, y) in r.iter_mut().zip(o) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.rows.iter_mut().flatten().for_each(|x| *x *= factor);
    }

    pub fn max_abs(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &ParamTable) -> f64 {
        self.rows.iter().flatten().zip(other.rows.iter().flatten()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().flatten().all(|&x| x == 0.0)
    }

    pub(crate) fn flat_index(&self) -> Vec<(usize, usize)> {
        self.rows.iter().enumerate().flat_map(|(s, r)| (0..r.len()).map(move |a| (s, a))).collect()
    }

    pub(crate) fn get(&self, s: usize, a: usize) -> f64 {
        self.rows[s][a]
    }

    pub(crate) fn set(&mut self, s: usize, a: usize, v: f64) {
        self.rows[s][a] = v;
    }
}

/// Softmax policy `π(a|s) = exp θ[s,a] / Σ_b exp θ[s,b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    params: ParamTable,
}

impl TabularPolicy {
    pub fn uniform(action_counts: &[usize]) -> Self {
        Self { params: ParamTable::zeros(action_counts) }
    }

    pub fn from_params(params: ParamTable) -> Result<Self, PolicyError> {
        if !params.is_finite() {
            return Err(PolicyError::NonFinite("initial parameters".into()));
        }
        if params.rows.iter().any(Vec::is_empty) {
            return Err(PolicyError::InvalidConfig("every state needs at least one action".into()));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &ParamTable {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamTable {
        &mut self.params
    }

    pub fn n_states(&self) -> usize {
        self.params.n_states()
    }

    pub fn n_actions(&self, s: StateId) -> Result<usize, PolicyError> {
        Ok(self.params.row(s)?.len())
    }

    pub fn distribution(&self, s: StateId) -> Result<Vec<f64>, PolicyError> {
        Ok(softmax(self.params.row(s)?))
    }

    pub fn log_prob(&self, s: StateId, a: usize) -> Result<f64, PolicyError> {
        let row = self.params.row(s)?;
        if a >= row.len() {
            return Err(PolicyError::UnknownAction { state: s.0, action: a });
        }
        Ok(log_softmax(row)[a])
    }

    pub fn entropy(&self, s: StateId) -> Result<f64, PolicyError> {
        Ok(entropy(self.params.row(s)?))
    }

    pub fn argmax(&self, s: StateId) -> Result<usize, PolicyError> {
        Ok(crate::advantage::argmax(self.params.row(s)?))
    }

    pub fn apply(&mut self, delta: &ParamTable, scale: f64) -> Result<(), PolicyError> {
        if !self.params.same_shape(delta) {
            return Err(PolicyError::Shape("update table does not match the policy".into()));
        }
        self.params.add_scaled(delta, scale);
        if !self.params.is_finite() {
            return Err(PolicyError::NonFinite("parameters after update".into()));
        }
        Ok(())
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

/// Natural-log entropy of `softmax(logits)`.
pub fn entropy(logits: &[f64]) -> f64 {
    let p = softmax(logits);
    let lp = log_softmax(logits);
    -p.iter().zip(&lp).filter(|(p, _)| **p > 0.0).map(|(p, l)| p * l).sum::<f64>()
}

/// Single-sample score-function step on one state's row:
/// `Δθ[s,a'] = α (1[a'=a] − π(a'|s)) A`, zero for every other state.
pub fn single_step_update(
    policy: &TabularPolicy,
    state: StateId,
    action: usize,
    advantage: f64,
    learning_rate: f64,
) -> Result<ParamTable, PolicyError> {
    if !(learning_rate > 0.0) {
        return Err(PolicyError::InvalidConfig(format!("learning rate {learning_rate} must be > 0")));
    }
    let probs = policy.distribution(state)?;
    if action >= probs.len() {
        return Err(PolicyError::UnknownAction { state: state.0, action });
    }
    let mut delta = ParamTable::zeros_like(policy.params());
    let row = delta.row_mut(state)?;
    for (b, (d, p)) in row.iter_mut().zip(&probs).enumerate() {
        let indicator = if b == action { 1.0 } else { 0.0 };
        *d = learning_rate * (indicator - p) * advantage;
    }
    Ok(delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyDelta {
    /// `H(softmax(θ+Δθ)) − H(softmax(θ))` at the state.
    pub exact: f64,
    /// `−Cov_{a∼π}(log π(a|s), Δθ[s,a])`.
    pub approx: f64,
}

impl EntropyDelta {
    pub fn error(&self) -> f64 {
        (self.exact - self.approx).abs()
    }
}

/// Compares the exact entropy change at `state` with its first-order
/// covariance approximation. `delta` must be zero outside `state`'s row.
pub fn entropy_delta_check(
    policy: &TabularPolicy,
    state: StateId,
    delta: &ParamTable,
) -> Result<EntropyDelta, PolicyError> {
    if !policy.params().same_shape(delta) {
        return Err(PolicyError::Shape("delta does not match the policy".into()));
    }
    let off_row = delta.rows().iter().enumerate().any(|(s, r)| s != state.0 && r.iter().any(|&x| x != 0.0));
    if off_row {
        return Err(PolicyError::Shape(format!("delta touches states other than {}", state.0)));
    }
    let theta = policy.params().row(state)?;
    let d = delta.row(state)?;
    let shifted: Vec<f64> = theta.iter().zip(d).map(|(t, x)| t + x).collect();
    let exact = entropy(&shifted) - entropy(theta);

    let p = softmax(theta);
    let lp = log_softmax(theta);
    let mean_lp: f64 = p.iter().zip(&lp).map(|(p, l)| p * l).sum();
    let mean_d: f64 = p.iter().zip(d).map(|(p, x)| p * x).sum();
    let cov: f64 = p.iter().zip(&lp).zip(d).map(|((p, l), x)| p * (l - mean_lp) * (x - mean_d)).sum();
    Ok(EntropyDelta { exact, approx: -cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_state(theta: &[f64]) -> TabularPolicy {
        TabularPolicy::from_params(ParamTable::from_rows(vec![theta.to_vec()])).unwrap()
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(one_state(&[0.0, 0.0]).distribution(StateId(0)).unwrap(), vec![0.5, 0.5]);
        let p = one_state(&[3f64.ln(), 0.0]).distribution(StateId(0)).unwrap();
        assert_abs_diff_eq!(p[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.25, epsilon = 1e-12);
        let p = one_state(&[1000.0, 0.0]).distribution(StateId(0)).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-12);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!(matches!(one_state(&[0.0]).distribution(StateId(3)), Err(PolicyError::UnknownState(3))));
    }

    #[test]
    fn update_examples() {
        let d = single_step_update(&one_state(&[0.0, 0.0]), StateId(0), 0, 1.0, 0.1).unwrap();
        assert_abs_diff_eq!(d.row(StateId(0)).unwrap()[0], 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(d.row(StateId(0)).unwrap()[1], -0.05, epsilon = 1e-15);

        let d = single_step_update(&one_state(&[0.0, 0.0]), StateId(0), 1, 0.0, 0.1).unwrap();
        assert!(d.is_zero());

        let d = single_step_update(&one_state(&[0.0, 0.0, 0.0]), StateId(0), 2, -1.0, 0.3).unwrap();
        let r = d.row(StateId(0)).unwrap();
        assert_abs_diff_eq!(r[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(r[2], -0.2, epsilon = 1e-15);

        assert!(single_step_update(&one_state(&[0.0, 0.0]), StateId(0), 0, 1.0, 0.0).is_err());
    }

    #[test]
    fn update_leaves_other_states_untouched() {
        let p = TabularPolicy::from_params(ParamTable::from_rows(vec![vec![0.3, -0.2], vec![1.0, 0.0, 2.0]])).unwrap();
        let d = single_step_update(&p, StateId(1), 1, 0.7, 0.5).unwrap();
        assert!(d.row(StateId(0)).unwrap().iter().all(|&x| x == 0.0));
        assert!(d.row(StateId(1)).unwrap().iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn entropy_delta_examples() {
        let p = one_state(&[0.4, -0.3, 1.1]);
        let zero = ParamTable::zeros_like(p.params());
        assert_eq!(entropy_delta_check(&p, StateId(0), &zero).unwrap(), EntropyDelta { exact: 0.0, approx: 0.0 });

        let constant = ParamTable::from_rows(vec![vec![0.25; 3]]);
        let e = entropy_delta_check(&p, StateId(0), &constant).unwrap();
        assert!(e.exact.abs() < 1e-15 && e.approx.abs() < 1e-15);

        // Uniform start: log π is constant so the covariance vanishes exactly,
        // while the exact entropy still drops at second order.
        let u = one_state(&[0.0, 0.0]);
        let d = single_step_update(&u, StateId(0), 0, 1.0, 0.1).unwrap();
        let e = entropy_delta_check(&u, StateId(0), &d).unwrap();
        assert!(e.exact < 0.0);
        assert_eq!(e.approx, 0.0);

        // Slightly off uniform towards the reinforced action: both negative.
        let nu = one_state(&[0.1, 0.0]);
        let d = single_step_update(&nu, StateId(0), 0, 1.0, 0.1).unwrap();
        let e = entropy_delta_check(&nu, StateId(0), &d).unwrap();
        assert!(e.exact < 0.0 && e.approx < 0.0);
    }

    #[test]
    fn entropy_delta_rejects_off_row_updates() {
        let p = TabularPolicy::uniform(&[2, 2]);
        let d = ParamTable::from_rows(vec![vec![0.1, 0.0], vec![0.0, 0.1]]);
        assert!(entropy_delta_check(&p, StateId(0), &d).is_err());
    }

    #[test]
    fn entropy_is_log_n_at_uniform() {
        assert_abs_diff_eq!(entropy(&[0.0; 4]), 4f64.ln(), epsilon = 1e-15);
        assert!(entropy(&[800.0, 0.0]) >= 0.0);
    }
}

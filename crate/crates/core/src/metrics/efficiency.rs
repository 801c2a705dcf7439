use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::MetricsError;

/// Efficiency-weighted accuracy `avg · sqrt(1 − mean_turns / max_turns)`.
pub fn i_avg(avg: f64, mean_turns: f64, max_turns: usize) -> Result<f64, MetricsError> {
    if max_turns == 0 {
        return Err(MetricsError::Domain("max_turns must be >= 1".into()));
    }
    if !(avg >= 0.0) || !avg.is_finite() {
        return Err(MetricsError::Domain(format!("avg {avg} must be finite and >= 0")));
    }
    let m = max_turns as f64;
    if !(mean_turns >= 0.0 && mean_turns <= m) {
        return Err(MetricsError::Domain(format!("mean_turns {mean_turns} outside [0, {max_turns}]")));
    }
    if mean_turns == m {
        return Ok(0.0);
    }
    Ok(avg * (1.0 - mean_turns / m).sqrt())
}

/// One tool call: a function name and its parameters. Parameters are kept in
/// a key-sorted map so two records are identical iff they print identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub name: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl ActionRecord {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), params: Map::new() }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    /// Canonical identity string used for grouping.
    pub fn identity(&self) -> String {
        // serde_json's default map is ordered, so this is stable.
        format!("{}{}", self.name, Value::Object(self.params.clone()))
    }
}

/// `−0.1 · (largest count of an exactly repeated action − 1)`.
pub fn repetition_score(actions: &[ActionRecord]) -> Result<f64, MetricsError> {
    if actions.is_empty() {
        return Err(MetricsError::Empty("action list"));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for a in actions {
        *counts.entry(a.identity()).or_default() += 1;
    }
    let max = counts.values().copied().max().unwrap_or(1);
    if max == 1 {
        return Ok(0.0);
    }
    Ok(-0.1 * (max - 1) as f64)
}

/// Anything that ends either with an answer or by running out of turns.
pub trait Episode {
    fn is_terminal(&self) -> bool;
    fn turn_count(&self) -> usize;
}

pub fn valid_answer_rate<E: Episode>(episodes: &[E]) -> Result<f64, MetricsError> {
    if episodes.is_empty() {
        return Err(MetricsError::Empty("episode list"));
    }
    let n = episodes.iter().filter(|e| e.is_terminal()).count();
    Ok(n as f64 / episodes.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    /// Task score on a 0–100 scale.
    pub avg: f64,
    pub mean_turns: f64,
    pub max_turns: usize,
    pub i_avg: f64,
    pub valid_answer_rate: f64,
    /// `turn_histogram[k]` = number of episodes that used `k` turns.
    pub turn_histogram: Vec<usize>,
}

impl EfficiencyReport {
    /// `scores` are per-episode task scores in `[0, 1]`.
    pub fn from_episodes<E: Episode>(episodes: &[E], scores: &[f64], max_turns: usize) -> Result<Self, MetricsError> {
        if episodes.is_empty() {
            return Err(MetricsError::Empty("episode list"));
        }
        if scores.len() != episodes.len() {
            return Err(MetricsError::Domain(format!("{} scores for {} episodes", scores.len(), episodes.len())));
        }
        let mut turn_histogram = vec![0; max_turns + 1];
        for e in episodes {
            let t = e.turn_count();
            if t > max_turns {
                return Err(MetricsError::Domain(format!("episode used {t} turns, limit is {max_turns}")));
            }
            turn_histogram[t] += 1;
        }
        let n = episodes.len() as f64;
        let avg = 100.0 * scores.iter().sum::<f64>() / n;
        let mean_turns = episodes.iter().map(|e| e.turn_count() as f64).sum::<f64>() / n;
        Ok(Self {
            avg,
            mean_turns,
            max_turns,
            i_avg: i_avg(avg, mean_turns, max_turns)?,
            valid_answer_rate: valid_answer_rate(episodes)?,
            turn_histogram,
        })
    }

    /// Pools reports over disjoint episode sets with the same turn limit.
    pub fn merge(reports: &[EfficiencyReport]) -> Result<Self, MetricsError> {
        let first = reports.first().ok_or(MetricsError::Empty("report list"))?;
        if reports.iter().any(|r| r.max_turns != first.max_turns) {
            return Err(MetricsError::Domain("reports use different turn limits".into()));
        }
        let mut turn_histogram = vec![0; first.max_turns + 1];
        for r in reports {
            for (k, c) in r.turn_histogram.iter().enumerate() {
                turn_histogram[k] += c;
            }
        }
        let total: usize = turn_histogram.iter().sum();
        if total == 0 {
            return Err(MetricsError::Empty("episode list"));
        }
        let weight = |r: &EfficiencyReport| r.turn_histogram.iter().sum::<usize>() as f64 / total as f64;
        let avg = reports.iter().map(|r| r.avg * weight(r)).sum();
        let mean_turns = turn_histogram.iter().enumerate().map(|(k, &c)| (k * c) as f64).sum::<f64>() / total as f64;
        Ok(Self {
            avg,
            mean_turns,
            max_turns: first.max_turns,
            i_avg: i_avg(avg, mean_turns, first.max_turns)?,
            valid_answer_rate: reports.iter().map(|r| r.valid_answer_rate * weight(r)).sum(),
            turn_histogram,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    struct Ep(bool, usize);

    impl Episode for Ep {
        fn is_terminal(&self) -> bool {
            self.0
        }
        fn turn_count(&self) -> usize {
            self.1
        }
    }

    #[test]
    fn i_avg_examples() {
        assert_eq!(i_avg(100.0, 0.0, 10).unwrap(), 100.0);
        assert_eq!(i_avg(50.0, 10.0, 10).unwrap(), 0.0);
        assert_abs_diff_eq!(i_avg(23.7, 2.878, 10).unwrap(), 20.0, epsilon = 0.05);
        assert!(i_avg(10.0, 11.0, 10).is_err());
        assert!(i_avg(10.0, 1.0, 0).is_err());
    }

    #[test]
    fn repetition_examples() {
        let a = ActionRecord::new("ClassicRetrieve").with("query", "x");
        let b = ActionRecord::new("ClassicRetrieve").with("query", "y");
        assert_abs_diff_eq!(
            repetition_score(&[a.clone(), a.clone(), a.clone(), b.clone()]).unwrap(),
            -0.2,
            epsilon = 1e-15
        );
        let varied: Vec<_> = (0..4).map(|k| ActionRecord::new("ClassicRetrieve").with("query", k)).collect();
        assert_eq!(repetition_score(&varied).unwrap(), 0.0);
        assert_eq!(repetition_score(&[a, b]).unwrap(), 0.0);
        assert!(repetition_score(&[]).is_err());
    }

    #[test]
    fn parameter_order_does_not_matter() {
        let x = ActionRecord::new("f").with("a", 1).with("b", 2);
        let y = ActionRecord::new("f").with("b", 2).with("a", 1);
        assert_eq!(x.identity(), y.identity());
        assert_eq!(repetition_score(&[x, y]).unwrap(), -0.1);
    }

    #[test]
    fn valid_rate_examples() {
        assert_eq!(valid_answer_rate(&[Ep(true, 1), Ep(true, 2)]).unwrap(), 1.0);
        assert_eq!(valid_answer_rate(&[Ep(false, 3), Ep(false, 3)]).unwrap(), 0.0);
        let mixed = [Ep(true, 1), Ep(true, 1), Ep(false, 3), Ep(true, 2)];
        assert_eq!(valid_answer_rate(&mixed).unwrap(), 0.75);
        assert!(valid_answer_rate::<Ep>(&[]).is_err());
    }

    #[test]
    fn report_from_four_records() {
        let eps = [Ep(true, 3), Ep(true, 3), Ep(true, 3), Ep(true, 3)];
        let r = EfficiencyReport::from_episodes(&eps, &[1.0, 1.0, 1.0, 0.0], 10).unwrap();
        assert_abs_diff_eq!(r.avg, 75.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.i_avg, 62.75, epsilon = 0.01);
        assert_eq!(r.turn_histogram.iter().sum::<usize>(), 4);
        assert_eq!(r.turn_histogram[3], 4);
    }

    #[test]
    fn merge_pools_episodes() {
        let a = EfficiencyReport::from_episodes(&[Ep(true, 2), Ep(true, 4)], &[1.0, 0.0], 6).unwrap();
        let b = EfficiencyReport::from_episodes(&[Ep(false, 6)], &[0.0], 6).unwrap();
        let m = EfficiencyReport::merge(&[a, b]).unwrap();
        assert_abs_diff_eq!(m.avg, 100.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean_turns, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.valid_answer_rate, 2.0 / 3.0, epsilon = 1e-12);
        assert!(EfficiencyReport::merge(&[]).is_err());
    }
}

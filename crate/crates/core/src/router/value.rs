use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A predicted or golden answer. Deserializes from plain JSON: integers map to
/// `Int`, other numbers to `Real`, arrays to `List` and objects to `Map`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
    List(Vec<AnswerValue>),
    Map(BTreeMap<String, AnswerValue>),
}

impl AnswerValue {
    pub fn text(s: impl Into<String>) -> Self {
        AnswerValue::Text(s.into())
    }

    pub fn shape(&self) -> &'static str {
        match self {
            AnswerValue::Bool(_) => "bool",
            AnswerValue::Int(_) => "int",
            AnswerValue::Real(_) => "real",
            AnswerValue::Text(_) => "text",
            AnswerValue::List(_) => "list",
            AnswerValue::Map(_) => "map",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            AnswerValue::Int(i) => Some(i as f64),
            AnswerValue::Real(r) => Some(r),
            _ => None,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            AnswerValue::List(items) => 1 + items.iter().map(Self::depth).max().unwrap_or(0),
            AnswerValue::Map(m) => 1 + m.values().map(Self::depth).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Stable JSON rendering, used for hashing and prompts.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

impl fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerValue::Text(s) => f.write_str(s),
            other => f.write_str(&other.canonical()),
        }
    }
}

impl From<&str> for AnswerValue {
    fn from(s: &str) -> Self {
        AnswerValue::Text(s.to_string())
    }
}

impl From<bool> for AnswerValue {
    fn from(b: bool) -> Self {
        AnswerValue::Bool(b)
    }
}

impl From<i64> for AnswerValue {
    fn from(i: i64) -> Self {
        AnswerValue::Int(i)
    }
}

impl From<f64> for AnswerValue {
    fn from(x: f64) -> Self {
        AnswerValue::Real(x)
    }
}

/// Trim, case-fold and collapse internal whitespace runs.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().map(|w| w.to_lowercase()).collect::<Vec<_>>().join(" ")
}

/// Comparison settings shared by the match evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    pub normalize_text: bool,
    pub tolerance: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { normalize_text: true, tolerance: 0.0 }
    }
}

/// Recursive equality: lists are ordered, maps compare key sets, numbers
/// compare numerically (so `3` equals `3.0`).
pub fn values_equal(a: &AnswerValue, b: &AnswerValue, opts: MatchOptions) -> bool {
    use AnswerValue::*;
    match (a, b) {
        (Bool(x), Bool(y)) => x == y,
        (Text(x), Text(y)) => {
            if opts.normalize_text {
                normalize_text(x) == normalize_text(y)
            } else {
                x == y
            }
        }
        (Int(x), Int(y)) => x == y,
        (List(xs), List(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| values_equal(x, y, opts)),
        (Map(xs), Map(ys)) => {
            xs.len() == ys.len() && xs.iter().all(|(k, x)| ys.get(k).is_some_and(|y| values_equal(x, y, opts)))
        }
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => (x - y).abs() <= opts.tolerance,
            _ => false,
        },
    }
}

//! Trajectory-log ingestion and scoring.
//!
//! Log format, version 1: one JSON object per line.
//!
//! ```text
//! {"version":1,"question_id":"q1","category":"text","answer_format":"python string",
//!  "draft":{"text":"...","token_logprobs":[-0.1,-0.3]},
//!  "turns":[{"thought":"...","action":{"name":"ClassicRetrieve","parameters":{"query":"x"}},"observation":"..."}],
//!  "final_answer":"loc1","golden_answer":"loc1"}
//! ```
//!
//! Action names come from the fixed alphabet below or carry the `ext.`
//! prefix. A record whose last action is `GenerateAnswer` is terminal and
//! may contain no other `GenerateAnswer`.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::metrics::{i_avg, repetition_score, ActionRecord, Episode};
use crate::router::{evaluate, AnswerValue, JudgeClient, RouterTable};

pub const LOG_FORMAT_VERSION: u32 = 1;
pub const ANSWER_ACTION: &str = "GenerateAnswer";
pub const ACTION_ALPHABET: [&str; 6] =
    ["RetrieveFromVectorstore", "ClassicRetrieve", "RetrieveFromDatabase", "ViewImage", "CalculateExpr", ANSWER_ACTION];
pub const EXTENSION_PREFIX: &str = "ext.";

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DraftRecord {
    pub text: String,
    #[serde(default)]
    pub token_logprobs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRecord {
    #[serde(default)]
    pub thought: String,
    pub action: LoggedAction,
    #[serde(default)]
    pub observation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoggedAction {
    pub name: String,
    #[serde(default)]
    pub parameters: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryLogRecord {
    #[serde(default = "one")]
    pub version: u32,
    pub question_id: String,
    pub category: String,
    pub answer_format: String,
    #[serde(default)]
    pub draft: Option<DraftRecord>,
    pub turns: Vec<TurnRecord>,
    /// Absent or null when the episode ran out of turns.
    #[serde(default)]
    pub final_answer: Option<AnswerValue>,
    pub golden_answer: AnswerValue,
}

impl TrajectoryLogRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.version != LOG_FORMAT_VERSION {
            return Err(format!("unsupported log version {}", self.version));
        }
        for (i, t) in self.turns.iter().enumerate() {
            let n = &t.action.name;
            if !ACTION_ALPHABET.contains(&n.as_str()) && !n.starts_with(EXTENSION_PREFIX) {
                return Err(format!("turn {i}: unknown action {n:?}"));
            }
        }
        let answers = self.turns.iter().filter(|t| t.action.name == ANSWER_ACTION).count();
        if self.is_terminal() && answers != 1 {
            return Err(format!("terminal record has {answers} {ANSWER_ACTION} actions"));
        }
        if self.is_terminal() && self.final_answer.is_none() {
            return Err("terminal record has no final_answer".into());
        }
        if !self.is_terminal() && answers > 0 {
            return Err(format!("{ANSWER_ACTION} must be the last action"));
        }
        if let Some(d) = &self.draft {
            if let Some(lp) = d.token_logprobs.iter().find(|&&lp| !(lp <= 0.0)) {
                return Err(format!("draft log-probability {lp} must be <= 0"));
            }
        }
        Ok(())
    }

    pub fn actions(&self) -> Vec<ActionRecord> {
        self.turns
            .iter()
            .map(|t| ActionRecord { name: t.action.name.clone(), params: t.action.parameters.clone() })
            .collect()
    }
}

impl Episode for TrajectoryLogRecord {
    fn is_terminal(&self) -> bool {
        self.turns.last().is_some_and(|t| t.action.name == ANSWER_ACTION)
    }

    fn turn_count(&self) -> usize {
        self.turns.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordResult {
    pub line: usize,
    pub question_id: String,
    pub eval_kind: String,
    pub score: Option<f64>,
    pub reward: Option<u8>,
    pub turns: usize,
    pub valid: bool,
    pub repetition_score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub input_lines: usize,
    pub parsed: usize,
    pub skipped: usize,
    pub evaluated: usize,
    pub errors: usize,
    pub max_turns: usize,
    /// 0–100 over evaluated records.
    pub avg: f64,
    pub mean_turns: f64,
    pub i_avg: f64,
    pub valid_answer_rate: f64,
    pub mean_repetition_score: f64,
    /// Repetition score value (as printed) -> record count.
    pub repetition_distribution: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub summary: EvalSummary,
    pub records: Vec<RecordResult>,
    pub skipped: Vec<SkippedLine>,
}

/// Line count, parsed records with their 1-based line numbers, skipped lines.
pub type ParsedLog = (usize, Vec<(usize, TrajectoryLogRecord)>, Vec<SkippedLine>);

/// Parses every line; malformed lines are returned, never dropped.
pub fn parse_log(reader: impl BufRead) -> std::io::Result<ParsedLog> {
    let mut lines = 0;
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        lines += 1;
        let n = i + 1;
        if line.trim().is_empty() {
            skipped.push(SkippedLine { line: n, reason: "blank line".into() });
            continue;
        }
        match serde_json::from_str::<TrajectoryLogRecord>(&line) {
            Ok(rec) => match rec.validate() {
                Ok(()) => ok.push((n, rec)),
                Err(reason) => skipped.push(SkippedLine { line: n, reason }),
            },
            Err(e) => skipped.push(SkippedLine { line: n, reason: e.to_string() }),
        }
    }
    Ok((lines, ok, skipped))
}

pub fn score_records(
    input_lines: usize,
    records: &[(usize, TrajectoryLogRecord)],
    skipped: Vec<SkippedLine>,
    table: &RouterTable,
    judge: Option<&dyn JudgeClient>,
    max_turns: usize,
) -> Result<EvalResult, String> {
    let mut results = Vec::with_capacity(records.len());
    for (line, rec) in records {
        let spec = table.route(&rec.category, &rec.answer_format);
        let turns = rec.turn_count();
        let rep = repetition_score(&rec.actions()).ok();
        let valid = rec.is_terminal() && turns <= max_turns;
        let base = RecordResult {
            line: *line,
            question_id: rec.question_id.clone(),
            eval_kind: spec.kind.name().into(),
            score: None,
            reward: None,
            turns,
            valid,
            repetition_score: rep,
            error: None,
        };
        // An episode without an answer scores zero whatever its final_answer says.
        let outcome = match (&rec.final_answer, rec.is_terminal()) {
            (Some(answer), true) => evaluate(&spec, answer, &rec.golden_answer, judge).map(|o| (o.score, o.binary)),
            _ => Ok((0.0, 0)),
        };
        results.push(match outcome {
            Ok((score, reward)) => RecordResult { score: Some(score), reward: Some(reward), ..base },
            Err(e) => RecordResult { error: Some(e.to_string()), ..base },
        });
    }
    let scored: Vec<&RecordResult> = results.iter().filter(|r| r.reward.is_some()).collect();
    let n = scored.len();
    let mean = |f: &dyn Fn(&RecordResult) -> f64| {
        if n == 0 {
            0.0
        } else {
            scored.iter().map(|r| f(r)).sum::<f64>() / n as f64
        }
    };
    let avg = 100.0 * mean(&|r| f64::from(r.reward.unwrap_or(0)));
    let mean_turns = mean(&|r| r.turns as f64);
    let i = if n == 0 {
        0.0
    } else {
        i_avg(avg, mean_turns.min(max_turns as f64), max_turns).map_err(|e| e.to_string())?
    };
    let mut dist = std::collections::BTreeMap::<String, usize>::new();
    for r in &results {
        if let Some(s) = r.repetition_score {
            *dist.entry(format!("{s:.1}")).or_default() += 1;
        }
    }
    let reps: Vec<f64> = results.iter().filter_map(|r| r.repetition_score).collect();
    let summary = EvalSummary {
        input_lines,
        parsed: records.len(),
        skipped: skipped.len(),
        evaluated: n,
        errors: results.len() - n,
        max_turns,
        avg,
        mean_turns,
        i_avg: i,
        valid_answer_rate: if results.is_empty() {
            0.0
        } else {
            results.iter().filter(|r| r.valid).count() as f64 / results.len() as f64
        },
        mean_repetition_score: if reps.is_empty() { 0.0 } else { reps.iter().sum::<f64>() / reps.len() as f64 },
        repetition_distribution: dist.into_iter().collect(),
    };
    debug_assert_eq!(summary.parsed + summary.skipped, summary.input_lines);
    Ok(EvalResult { summary, records: results, skipped })
}

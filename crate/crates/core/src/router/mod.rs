//! Reward router: evaluation-function trees, routing by question type, and
//! score binarization into a 0/1 reward.

mod eval;
mod f1;
pub mod judge;
mod spec;
mod table;
mod value;

pub use eval::{binarize, evaluate, EvalOutcome, EvalTrace};
pub use f1::token_f1;
pub use judge::{judge_evaluate, HttpJudge, JudgeClient, JudgeConfig, StubJudge};
pub use spec::{EvalKind, EvalParams, EvalSpec, DEFAULT_THRESHOLD};
pub use table::{route, Route, RouterTable};
pub use value::{normalize_text, values_equal, AnswerValue, MatchOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RouterError {
    #[error("evaluation type error: {0}")]
    EvalType(String),
    #[error("judge unavailable: {0}")]
    JudgeUnavailable(String),
    #[error("could not parse judge verdict ({reason}): {raw:?}")]
    JudgeParse { raw: String, reason: String },
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("invalid eval spec: {0}")]
    InvalidSpec(String),
    #[error("router configuration: {0}")]
    Config(String),
}

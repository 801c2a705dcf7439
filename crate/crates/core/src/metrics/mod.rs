//! Efficiency and diagnostic metrics, and the knowing-doing bandit probe.
//!
//! Reference rates observed for language-model agents on the same probe
//! (not reproduced here): knowing 16.5% vs 13.7%, doing-given-knowing
//! 50.3% vs 41.6%, for the draft-trained model vs its baseline.

mod efficiency;
mod probe;

pub use efficiency::{i_avg, repetition_score, valid_answer_rate, ActionRecord, EfficiencyReport, Episode};
pub use probe::{
    probe_transcript, read_transcript, run_probe, score_transcript, ucb, ucb_values, BanditEnv, ExactUcbAgent,
    GreedyDoingAgent, KnowingDoingCounts, KnowingDoingMatrix, NoisyKnowingAgent, ProbeAgent, ProbeConfig,
    ProbeDecision, ProbeObservation, ProbeRecord,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("probe protocol error: {0}")]
    Protocol(String),
}

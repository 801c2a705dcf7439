//! External judges for the LLM-scored evaluation functions.
//!
//! A judge receives one templated comparison prompt and answers with a
//! decimal verdict on a 0–10 scale in half-point steps, which is normalized
//! to `[0, 1]`. [`StubJudge`] replays scripted verdicts without any I/O;
//! [`HttpJudge`] performs a single JSON request per verdict.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::value::{values_equal, AnswerValue, MatchOptions};
use super::{EvalKind, RouterError};

/// Number of HTTP requests issued by any [`HttpJudge`] in this process.
static HTTP_REQUESTS: AtomicUsize = AtomicUsize::new(0);

pub fn http_requests_issued() -> usize {
    HTTP_REQUESTS.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JudgeRequest {
    pub kind: EvalKind,
    pub predicted: AnswerValue,
    pub golden: AnswerValue,
    pub prompt: String,
}

impl JudgeRequest {
    /// Hex digest identifying the comparison, independent of prompt wording.
    pub fn key(&self) -> String {
        input_key(self.kind, &self.predicted, &self.golden)
    }
}

pub fn input_key(kind: EvalKind, predicted: &AnswerValue, golden: &AnswerValue) -> String {
    let mut h = Sha256::new();
    h.update(kind.name().as_bytes());
    h.update([0]);
    h.update(predicted.canonical().as_bytes());
    h.update([0]);
    h.update(golden.canonical().as_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JudgeError {
    #[error("judge unavailable: {0}")]
    Unavailable(String),
}

pub trait JudgeClient: Send + Sync {
    /// Returns the raw response text for one request.
    fn complete(&self, request: &JudgeRequest) -> Result<String, JudgeError>;
}

/// Scripted judge keyed by [`input_key`]. Never touches the network.
#[derive(Debug, Default)]
pub struct StubJudge {
    verdicts: HashMap<String, String>,
    default_verdict: Option<String>,
    calls: AtomicUsize,
}

impl StubJudge {
    pub fn new() -> Self {
        Self::default()
    }

    /// Verdict returned for requests without a scripted entry.
    pub fn with_default(mut self, verdict: f64) -> Self {
        self.default_verdict = Some(format!("{verdict}"));
        self
    }

    pub fn script(&mut self, kind: EvalKind, predicted: &AnswerValue, golden: &AnswerValue, verdict: f64) {
        self.verdicts.insert(input_key(kind, predicted, golden), format!("{verdict}"));
    }

    /// Scripts a raw response body, e.g. to exercise parse failures.
    pub fn script_raw(&mut self, key: String, response: impl Into<String>) {
        self.verdicts.insert(key, response.into());
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn external_calls(&self) -> usize {
        0
    }
}

impl JudgeClient for StubJudge {
    fn complete(&self, request: &JudgeRequest) -> Result<String, JudgeError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.verdicts
            .get(&request.key())
            .or(self.default_verdict.as_ref())
            .cloned()
            .ok_or_else(|| JudgeError::Unavailable(format!("no scripted verdict for key {}", request.key())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Name of the environment variable holding the bearer credential.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

fn default_timeout() -> u64 {
    30
}

fn default_in_flight() -> usize {
    4
}

/// Counting semaphore bounding concurrent judge requests.
struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

/// Judge backed by an HTTP endpoint: `POST {model, prompt, temperature: 0}`.
pub struct HttpJudge {
    config: JudgeConfig,
    agent: ureq::Agent,
    in_flight: InFlight,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
}

impl HttpJudge {
    pub fn new(config: JudgeConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(true)
            .build()
            .into();
        let limit = config.max_in_flight.max(1);
        Self { config, agent, in_flight: InFlight { limit, active: Mutex::new(0), freed: Condvar::new() } }
    }
}

impl JudgeClient for HttpJudge {
    fn complete(&self, request: &JudgeRequest) -> Result<String, JudgeError> {
        let body = serde_json::to_string(&WireRequest {
            model: &self.config.model,
            prompt: &request.prompt,
            temperature: 0.0,
        })
        .map_err(|e| JudgeError::Unavailable(e.to_string()))?;

        let _slot = self.in_flight.acquire();
        let mut req = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Some(var) = &self.config.credential_env {
            let token = std::env::var(var)
                .map_err(|_| JudgeError::Unavailable(format!("credential variable {var} is not set")))?;
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        HTTP_REQUESTS.fetch_add(1, Ordering::SeqCst);
        let mut resp = req.send(body.as_str()).map_err(|e| JudgeError::Unavailable(e.to_string()))?;
        let text = resp.body_mut().read_to_string().map_err(|e| JudgeError::Unavailable(e.to_string()))?;
        Ok(extract_verdict_text(&text))
    }
}

/// Accepts either `{"verdict": ...}` JSON or a plain-text body.
fn extract_verdict_text(body: &str) -> String {
    match serde_json::from_str::<serde_json::Value>(body) {
        Ok(serde_json::Value::Object(map)) => match map.get("verdict") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(v) => v.to_string(),
            None => body.to_string(),
        },
        _ => body.to_string(),
    }
}

fn number_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"-?\d+(?:\.\d+)?").expect("static regex"))
}

/// Parses the first decimal in `raw` as a 0–10 half-point verdict and
/// normalizes it to `[0, 1]`.
pub fn parse_verdict(raw: &str) -> Result<f64, RouterError> {
    let parse_err = |reason: &str| RouterError::JudgeParse { raw: raw.to_string(), reason: reason.to_string() };
    let m = number_pattern().find(raw).ok_or_else(|| parse_err("no decimal verdict"))?;
    let v: f64 = m.as_str().parse().map_err(|_| parse_err("unparseable number"))?;
    if !(0.0..=10.0).contains(&v) {
        return Err(parse_err("verdict outside 0-10"));
    }
    if (v * 2.0).fract() != 0.0 {
        return Err(parse_err("verdict not on the half-point scale"));
    }
    Ok(v / 10.0)
}

pub fn prompt_for(kind: EvalKind, template: Option<&str>, predicted: &AnswerValue, golden: &AnswerValue) -> String {
    let task = match (kind, template) {
        (_, Some(t)) => t.to_string(),
        (EvalKind::ComplexMathFormulaWithLlm, _) => {
            "Judge whether the predicted LaTeX formula is mathematically equivalent to the reference formula.".into()
        }
        (EvalKind::ScoringPointsWithLlm | EvalKind::PartialScoringPointsWithLlm, _) => {
            "Judge whether the predicted answer mentions the given scoring point.".into()
        }
        (EvalKind::Scidqa, _) => {
            "Judge how well the predicted answer to a reviewer question agrees with the author's reference answer."
                .into()
        }
        _ => "Judge whether the predicted answer agrees with the reference answer.".into(),
    };
    format!(
        "{task}\nReply with a single score between 0 and 10 in steps of 0.5.\n\nReference: {golden}\nPredicted: {predicted}\nScore:"
    )
}

/// One judged comparison, normalized to `[0, 1]`. Identical answers score 1
/// without contacting the judge.
pub fn judge_evaluate(
    client: &dyn JudgeClient,
    kind: EvalKind,
    template: Option<&str>,
    predicted: &AnswerValue,
    golden: &AnswerValue,
) -> Result<f64, RouterError> {
    if !kind.is_llm_judged() {
        return Err(RouterError::EvalType(format!("{} is not judge-scored", kind.name())));
    }
    if values_equal(predicted, golden, MatchOptions { normalize_text: false, tolerance: 0.0 }) {
        return Ok(1.0);
    }
    let request = JudgeRequest {
        kind,
        predicted: predicted.clone(),
        golden: golden.clone(),
        prompt: prompt_for(kind, template, predicted, golden),
    };
    let raw = client.complete(&request).map_err(|JudgeError::Unavailable(msg)| RouterError::JudgeUnavailable(msg))?;
    parse_verdict(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stub_verdicts_normalize() {
        let mut stub = StubJudge::new();
        let (p, g) = (AnswerValue::text("roughly x"), AnswerValue::text("x"));
        stub.script(EvalKind::ReferenceAnswerWithLlm, &p, &g, 8.5);
        let s = judge_evaluate(&stub, EvalKind::ReferenceAnswerWithLlm, None, &p, &g).unwrap();
        assert!((s - 0.85).abs() < 1e-12);

        let (p0, g0) = (AnswerValue::text("wrong"), AnswerValue::text("x"));
        stub.script(EvalKind::ReferenceAnswerWithLlm, &p0, &g0, 0.0);
        assert_eq!(judge_evaluate(&stub, EvalKind::ReferenceAnswerWithLlm, None, &p0, &g0).unwrap(), 0.0);
        assert_eq!(stub.calls(), 2);
        assert_eq!(stub.external_calls(), 0);
    }

    #[test]
    fn identical_answers_skip_the_judge() {
        let stub = StubJudge::new();
        let v = AnswerValue::text("E = mc^2");
        let s = judge_evaluate(&stub, EvalKind::ComplexMathFormulaWithLlm, None, &v, &v).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(stub.calls(), 0);
    }

    #[test]
    fn missing_script_is_unavailable_not_zero() {
        let stub = StubJudge::new();
        let err = judge_evaluate(&stub, EvalKind::Scidqa, None, &"a".into(), &"b".into()).unwrap_err();
        assert!(matches!(err, RouterError::JudgeUnavailable(_)));
    }

    #[test]
    fn verdict_parsing() {
        assert_eq!(parse_verdict("Score: 7.5").unwrap(), 0.75);
        assert_eq!(parse_verdict("10").unwrap(), 1.0);
        assert_eq!(parse_verdict("9/10").unwrap(), 0.9);
        for bad in ["no idea", "11", "7.3", "-1"] {
            match parse_verdict(bad) {
                Err(RouterError::JudgeParse { raw, .. }) => assert_eq!(raw, bad),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn json_verdict_bodies() {
        assert_eq!(extract_verdict_text(r#"{"verdict": 6.5}"#), "6.5");
        assert_eq!(extract_verdict_text(r#"{"verdict": "6"}"#), "6");
        assert_eq!(extract_verdict_text("Score 3"), "Score 3");
    }

    #[test]
    fn keys_depend_on_inputs() {
        let a = input_key(EvalKind::Scidqa, &"a".into(), &"b".into());
        assert_eq!(a, input_key(EvalKind::Scidqa, &"a".into(), &"b".into()));
        assert_ne!(a, input_key(EvalKind::Scidqa, &"b".into(), &"a".into()));
        assert_ne!(a, input_key(EvalKind::ReferenceAnswerWithLlm, &"a".into(), &"b".into()));
    }
}

use serde::{Deserialize, Serialize};

use super::judge::{judge_evaluate, JudgeClient};
use super::value::{values_equal, AnswerValue, MatchOptions};
use super::{EvalKind, EvalSpec, RouterError};

const DEFAULT_FLOAT_TOLERANCE: f64 = 1e-9;

/// Score trace mirroring the spec tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTrace {
    pub kind: EvalKind,
    pub score: f64,
    pub binary: u8,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<EvalTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub score: f64,
    pub binary: u8,
    pub detail: EvalTrace,
}

/// `1` iff `score >= threshold`.
pub fn binarize(score: f64, threshold: f64) -> Result<u8, RouterError> {
    if !(0.0..=1.0).contains(&score) {
        return Err(RouterError::Domain(format!("score {score} outside [0, 1]")));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(RouterError::Domain(format!("threshold {threshold} outside (0, 1]")));
    }
    Ok(u8::from(score >= threshold))
}

/// Evaluates `predicted` against `golden`. LLM-judged kinds need a judge;
/// without one they fail with [`RouterError::JudgeUnavailable`].
pub fn evaluate(
    spec: &EvalSpec,
    predicted: &AnswerValue,
    golden: &AnswerValue,
    judge: Option<&dyn JudgeClient>,
) -> Result<EvalOutcome, RouterError> {
    spec.validate()?;
    let detail = eval_node(spec, predicted, golden, judge)?;
    Ok(EvalOutcome { score: detail.score, binary: detail.binary, detail })
}

fn type_error(kind: EvalKind, predicted: &AnswerValue, golden: &AnswerValue) -> RouterError {
    RouterError::EvalType(format!("{} cannot compare {} with {}", kind.name(), predicted.shape(), golden.shape()))
}

fn eval_node(
    spec: &EvalSpec,
    predicted: &AnswerValue,
    golden: &AnswerValue,
    judge: Option<&dyn JudgeClient>,
) -> Result<EvalTrace, RouterError> {
    let (score, children) = if spec.kind.is_combinator() {
        let traces = eval_children(spec, predicted, golden, judge)?;
        let binaries = traces.iter().map(|t| t.binary);
        let b = match spec.kind {
            EvalKind::Conjunction => binaries.min().unwrap_or(0),
            EvalKind::Disjunction => binaries.max().unwrap_or(0),
            _ => 1 - traces[0].binary,
        };
        (f64::from(b), traces)
    } else {
        (leaf_score(spec, predicted, golden, judge)?, Vec::new())
    };
    let binary = binarize(score, spec.threshold())?;
    Ok(EvalTrace { kind: spec.kind, score, binary, children })
}

fn eval_children(
    spec: &EvalSpec,
    predicted: &AnswerValue,
    golden: &AnswerValue,
    judge: Option<&dyn JudgeClient>,
) -> Result<Vec<EvalTrace>, RouterError> {
    let n = spec.children.len();
    let elementwise = spec.kind != EvalKind::Negation && spec.params.elementwise.unwrap_or(true);
    if !elementwise {
        return spec.children.iter().map(|c| eval_node(c, predicted, golden, judge)).collect();
    }
    let AnswerValue::List(preds) = predicted else {
        return Err(RouterError::EvalType(format!(
            "{} expects a list of {n} output elements, got {}",
            spec.kind.name(),
            predicted.shape()
        )));
    };
    if preds.len() != n {
        return Err(RouterError::EvalType(format!(
            "{} has {n} sub-evaluations but the output has {} elements",
            spec.kind.name(),
            preds.len()
        )));
    }
    let golds: Vec<&AnswerValue> = match golden {
        AnswerValue::List(gs) if gs.len() == n => gs.iter().collect(),
        other => vec![other; n],
    };
    spec.children.iter().zip(preds).zip(golds).map(|((c, p), g)| eval_node(c, p, g, judge)).collect()
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn leaf_score(
    spec: &EvalSpec,
    predicted: &AnswerValue,
    golden: &AnswerValue,
    judge: Option<&dyn JudgeClient>,
) -> Result<f64, RouterError> {
    use AnswerValue::*;
    let kind = spec.kind;
    let opts = MatchOptions {
        normalize_text: !spec.params.raw,
        tolerance: spec.params.tolerance.unwrap_or(DEFAULT_FLOAT_TOLERANCE),
    };
    let contains = |list: &[AnswerValue], item: &AnswerValue| list.iter().any(|g| values_equal(item, g, opts));

    let score = match kind {
        EvalKind::BoolExactMatch => match (predicted, golden) {
            (Bool(a), Bool(b)) => indicator(a == b),
            _ => return Err(type_error(kind, predicted, golden)),
        },
        EvalKind::IntExactMatch => match (as_integer(predicted), as_integer(golden)) {
            (Some(a), Some(b)) => indicator(a == b),
            _ => return Err(type_error(kind, predicted, golden)),
        },
        EvalKind::FloatExactMatch => match (predicted.as_f64(), golden.as_f64()) {
            (Some(a), Some(b)) => match spec.params.precision {
                Some(p) => {
                    let scale = 10f64.powi(p as i32);
                    indicator((a * scale).round() == (b * scale).round())
                }
                None => indicator((a - b).abs() <= opts.tolerance),
            },
            _ => return Err(type_error(kind, predicted, golden)),
        },
        EvalKind::StringExactMatch | EvalKind::PaperRelevanceWithReferenceAnswer => match (predicted, golden) {
            (Text(_), Text(_)) => indicator(values_equal(predicted, golden, opts)),
            _ => return Err(type_error(kind, predicted, golden)),
        },
        EvalKind::StructuredObjectExactMatch => indicator(values_equal(predicted, golden, opts)),
        EvalKind::ElementIncluded => match golden {
            List(gs) => indicator(contains(gs, predicted)),
            _ => return Err(type_error(kind, predicted, golden)),
        },
        EvalKind::ElementListIncluded => match (predicted, golden) {
            (List(ps), List(gs)) => indicator(ps.iter().all(|p| contains(gs, p))),
            _ => return Err(type_error(kind, predicted, golden)),
        },
        EvalKind::ElementListOverlap => match (predicted, golden) {
            (List(ps), List(gs)) => indicator(ps.iter().any(|p| contains(gs, p))),
            _ => return Err(type_error(kind, predicted, golden)),
        },
        EvalKind::ReferenceAnswerWithLlm | EvalKind::ComplexMathFormulaWithLlm | EvalKind::Scidqa => {
            let judge = require_judge(kind, judge)?;
            judge_evaluate(judge, kind, spec.params.template.as_deref(), predicted, golden)?
        }
        EvalKind::ScoringPointsWithLlm | EvalKind::PartialScoringPointsWithLlm => {
            let judge = require_judge(kind, judge)?;
            let points = scoring_points(spec, golden)?;
            let mut passed = 0usize;
            for point in &points {
                let v = judge_evaluate(judge, kind, spec.params.template.as_deref(), predicted, point)?;
                if v >= spec.threshold() {
                    passed += 1;
                }
            }
            if kind == EvalKind::ScoringPointsWithLlm {
                indicator(passed == points.len())
            } else {
                passed as f64 / points.len() as f64
            }
        }
        EvalKind::Conjunction | EvalKind::Disjunction | EvalKind::Negation => {
            unreachable!("combinators are handled by eval_node")
        }
    };
    Ok(score)
}

fn as_integer(v: &AnswerValue) -> Option<i64> {
    match *v {
        AnswerValue::Int(i) => Some(i),
        AnswerValue::Real(r) if r.fract() == 0.0 && r.abs() < 9.0e15 => Some(r as i64),
        _ => None,
    }
}

fn require_judge(kind: EvalKind, judge: Option<&dyn JudgeClient>) -> Result<&dyn JudgeClient, RouterError> {
    judge.ok_or_else(|| RouterError::JudgeUnavailable(format!("{} needs a judge client", kind.name())))
}

/// Points come from the spec parameters, falling back to the golden answer
/// (a list of point strings or a single string).
fn scoring_points(spec: &EvalSpec, golden: &AnswerValue) -> Result<Vec<AnswerValue>, RouterError> {
    let points: Vec<AnswerValue> = if !spec.params.scoring_points.is_empty() {
        spec.params.scoring_points.iter().map(|s| AnswerValue::text(s.as_str())).collect()
    } else {
        match golden {
            AnswerValue::List(items) => items.clone(),
            AnswerValue::Text(_) => vec![golden.clone()],
            other => {
                return Err(RouterError::EvalType(format!(
                    "{} needs scoring points, golden answer is {}",
                    spec.kind.name(),
                    other.shape()
                )))
            }
        }
    };
    if points.is_empty() {
        return Err(RouterError::EvalType(format!("{} has no scoring points", spec.kind.name())));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::super::judge::StubJudge;
    use super::super::EvalParams;
    use super::*;

    fn leaf(kind: EvalKind) -> EvalSpec {
        EvalSpec::leaf(kind)
    }

    fn list(items: &[&str]) -> AnswerValue {
        AnswerValue::List(items.iter().map(|s| AnswerValue::text(*s)).collect())
    }

    #[test]
    fn string_match() {
        let o =
            evaluate(&leaf(EvalKind::StringExactMatch), &"Transformer".into(), &"Transformer".into(), None).unwrap();
        assert_eq!((o.score, o.binary), (1.0, 1));
        let o =
            evaluate(&leaf(EvalKind::StringExactMatch), &" transformer ".into(), &"Transformer".into(), None).unwrap();
        assert_eq!(o.binary, 1);
        let raw = leaf(EvalKind::StringExactMatch).with_params(EvalParams { raw: true, ..Default::default() });
        assert_eq!(evaluate(&raw, &" transformer ".into(), &"Transformer".into(), None).unwrap().binary, 0);
    }

    #[test]
    fn conjunction_fails_when_one_child_fails() {
        let spec = EvalSpec::conjunction(vec![leaf(EvalKind::BoolExactMatch), leaf(EvalKind::BoolExactMatch)]);
        let pred = AnswerValue::List(vec![true.into(), true.into()]);
        let gold = AnswerValue::List(vec![true.into(), false.into()]);
        let o = evaluate(&spec, &pred, &gold, None).unwrap();
        assert_eq!(o.score, 0.0);
        assert_eq!(o.detail.children.len(), 2);
        assert_eq!((o.detail.children[0].binary, o.detail.children[1].binary), (1, 0));
    }

    #[test]
    fn float_tolerance() {
        let pred = AnswerValue::Real(2.5041);
        let gold = AnswerValue::Real(2.5);
        assert_eq!(evaluate(&EvalSpec::float(0.01), &pred, &gold, None).unwrap().score, 1.0);
        assert_eq!(evaluate(&EvalSpec::float(0.001), &pred, &gold, None).unwrap().score, 0.0);
        let prec = leaf(EvalKind::FloatExactMatch).with_params(EvalParams { precision: Some(2), ..Default::default() });
        assert_eq!(evaluate(&prec, &pred, &gold, None).unwrap().score, 1.0);
    }

    #[test]
    fn int_and_bool() {
        assert_eq!(
            evaluate(&leaf(EvalKind::IntExactMatch), &AnswerValue::Int(4), &AnswerValue::Real(4.0), None)
                .unwrap()
                .binary,
            1
        );
        assert_eq!(
            evaluate(&leaf(EvalKind::IntExactMatch), &AnswerValue::Int(4), &AnswerValue::Int(5), None).unwrap().binary,
            0
        );
        let err = evaluate(&leaf(EvalKind::BoolExactMatch), &"true".into(), &true.into(), None).unwrap_err();
        assert!(matches!(err, RouterError::EvalType(_)));
    }

    #[test]
    fn set_kinds() {
        let gold = list(&["BERT", "GPT", "T5"]);
        assert_eq!(evaluate(&leaf(EvalKind::ElementIncluded), &"gpt".into(), &gold, None).unwrap().binary, 1);
        assert_eq!(evaluate(&leaf(EvalKind::ElementIncluded), &"LLaMA".into(), &gold, None).unwrap().binary, 0);
        let inc = leaf(EvalKind::ElementListIncluded);
        assert_eq!(evaluate(&inc, &list(&["BERT", "T5"]), &gold, None).unwrap().binary, 1);
        assert_eq!(evaluate(&inc, &list(&["BERT", "LLaMA"]), &gold, None).unwrap().binary, 0);
        let ov = leaf(EvalKind::ElementListOverlap);
        assert_eq!(evaluate(&ov, &list(&["BERT", "LLaMA"]), &gold, None).unwrap().binary, 1);
        assert_eq!(evaluate(&ov, &list(&["LLaMA"]), &gold, None).unwrap().binary, 0);
        assert!(evaluate(&ov, &"BERT".into(), &gold, None).is_err());
    }

    #[test]
    fn structured_match_recurses() {
        let a: AnswerValue = serde_json::from_str(r#"{"a": [1, "X"], "b": {"c": 2.0}}"#).unwrap();
        let b: AnswerValue = serde_json::from_str(r#"{"b": {"c": 2}, "a": [1, "x"]}"#).unwrap();
        let c: AnswerValue = serde_json::from_str(r#"{"a": ["x", 1], "b": {"c": 2}}"#).unwrap();
        let spec = leaf(EvalKind::StructuredObjectExactMatch);
        assert_eq!(evaluate(&spec, &a, &b, None).unwrap().binary, 1);
        assert_eq!(evaluate(&spec, &a, &c, None).unwrap().binary, 0);
    }

    #[test]
    fn paper_relevance_compares_identifiers() {
        let spec = leaf(EvalKind::PaperRelevanceWithReferenceAnswer);
        let id = "fd81f90f-555d-5e99-835b-153c2cdb7303";
        assert_eq!(evaluate(&spec, &id.into(), &id.to_uppercase().as_str().into(), None).unwrap().binary, 1);
        assert_eq!(evaluate(&spec, &"a6ef6048".into(), &id.into(), None).unwrap().binary, 0);
    }

    #[test]
    fn llm_kinds_need_a_judge() {
        let err = evaluate(&leaf(EvalKind::ReferenceAnswerWithLlm), &"a".into(), &"b".into(), None).unwrap_err();
        assert!(matches!(err, RouterError::JudgeUnavailable(_)));
    }

    #[test]
    fn scoring_points_all_and_partial() {
        let pred = AnswerValue::text("scaling and data mixtures");
        let points = ["Compute-optimal scaling", "Improved dataset mixtures", "Architectural improvements"];
        let mut stub = StubJudge::new();
        for (p, v) in points.iter().zip([9.0, 7.0, 2.0]) {
            stub.script(EvalKind::ScoringPointsWithLlm, &pred, &(*p).into(), v);
            stub.script(EvalKind::PartialScoringPointsWithLlm, &pred, &(*p).into(), v);
        }
        let gold = list(&points);
        let all = evaluate(&leaf(EvalKind::ScoringPointsWithLlm), &pred, &gold, Some(&stub)).unwrap();
        assert_eq!(all.binary, 0);
        let partial = evaluate(&leaf(EvalKind::PartialScoringPointsWithLlm), &pred, &gold, Some(&stub)).unwrap();
        assert!((partial.score - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(partial.binary, 1);
        assert_eq!(stub.external_calls(), 0);
    }

    #[test]
    fn binarize_boundaries() {
        assert_eq!(binarize(1.0, 0.5).unwrap(), 1);
        assert_eq!(binarize(0.49, 0.5).unwrap(), 0);
        assert_eq!(binarize(0.5, 0.5).unwrap(), 1);
        assert!(binarize(1.2, 0.5).is_err());
        assert!(binarize(0.5, 0.0).is_err());
    }

    #[test]
    fn elementwise_shape_errors() {
        let spec = EvalSpec::conjunction(vec![leaf(EvalKind::BoolExactMatch), leaf(EvalKind::BoolExactMatch)]);
        let pred = AnswerValue::List(vec![true.into()]);
        assert!(matches!(evaluate(&spec, &pred, &pred, None), Err(RouterError::EvalType(_))));
    }
}

use serde::{Deserialize, Serialize};

use super::RouterError;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// The evaluation functions available to the router.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalKind {
    #[serde(rename = "eval_bool_exact_match")]
    BoolExactMatch,
    #[serde(rename = "eval_float_exact_match")]
    FloatExactMatch,
    #[serde(rename = "eval_int_exact_match")]
    IntExactMatch,
    #[serde(rename = "eval_string_exact_match")]
    StringExactMatch,
    #[serde(rename = "eval_structured_object_exact_match")]
    StructuredObjectExactMatch,
    #[serde(rename = "eval_element_included")]
    ElementIncluded,
    #[serde(rename = "eval_element_list_included")]
    ElementListIncluded,
    #[serde(rename = "eval_element_list_overlap")]
    ElementListOverlap,
    #[serde(rename = "eval_paper_relevance_with_reference_answer")]
    PaperRelevanceWithReferenceAnswer,
    #[serde(rename = "eval_reference_answer_with_llm")]
    ReferenceAnswerWithLlm,
    #[serde(rename = "eval_scoring_points_with_llm")]
    ScoringPointsWithLlm,
    #[serde(rename = "eval_partial_scoring_points_with_llm")]
    PartialScoringPointsWithLlm,
    #[serde(rename = "eval_complex_math_formula_with_llm")]
    ComplexMathFormulaWithLlm,
    #[serde(rename = "eval_conjunction")]
    Conjunction,
    #[serde(rename = "eval_disjunction")]
    Disjunction,
    #[serde(rename = "eval_negation")]
    Negation,
    #[serde(rename = "eval_scidqa")]
    Scidqa,
}

impl EvalKind {
    pub const ALL: [EvalKind; 17] = [
        EvalKind::BoolExactMatch,
        EvalKind::FloatExactMatch,
        EvalKind::IntExactMatch,
        EvalKind::StringExactMatch,
        EvalKind::StructuredObjectExactMatch,
        EvalKind::ElementIncluded,
        EvalKind::ElementListIncluded,
        EvalKind::ElementListOverlap,
        EvalKind::PaperRelevanceWithReferenceAnswer,
        EvalKind::ReferenceAnswerWithLlm,
        EvalKind::ScoringPointsWithLlm,
        EvalKind::PartialScoringPointsWithLlm,
        EvalKind::ComplexMathFormulaWithLlm,
        EvalKind::Conjunction,
        EvalKind::Disjunction,
        EvalKind::Negation,
        EvalKind::Scidqa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EvalKind::BoolExactMatch => "eval_bool_exact_match",
            EvalKind::FloatExactMatch => "eval_float_exact_match",
            EvalKind::IntExactMatch => "eval_int_exact_match",
            EvalKind::StringExactMatch => "eval_string_exact_match",
            EvalKind::StructuredObjectExactMatch => "eval_structured_object_exact_match",
            EvalKind::ElementIncluded => "eval_element_included",
            EvalKind::ElementListIncluded => "eval_element_list_included",
            EvalKind::ElementListOverlap => "eval_element_list_overlap",
            EvalKind::PaperRelevanceWithReferenceAnswer => "eval_paper_relevance_with_reference_answer",
            EvalKind::ReferenceAnswerWithLlm => "eval_reference_answer_with_llm",
            EvalKind::ScoringPointsWithLlm => "eval_scoring_points_with_llm",
            EvalKind::PartialScoringPointsWithLlm => "eval_partial_scoring_points_with_llm",
            EvalKind::ComplexMathFormulaWithLlm => "eval_complex_math_formula_with_llm",
            EvalKind::Conjunction => "eval_conjunction",
            EvalKind::Disjunction => "eval_disjunction",
            EvalKind::Negation => "eval_negation",
            EvalKind::Scidqa => "eval_scidqa",
        }
    }

    pub fn is_combinator(self) -> bool {
        matches!(self, EvalKind::Conjunction | EvalKind::Disjunction | EvalKind::Negation)
    }

    /// Kinds whose score comes from an external judge.
    pub fn is_llm_judged(self) -> bool {
        matches!(
            self,
            EvalKind::ReferenceAnswerWithLlm
                | EvalKind::ScoringPointsWithLlm
                | EvalKind::PartialScoringPointsWithLlm
                | EvalKind::ComplexMathFormulaWithLlm
                | EvalKind::Scidqa
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    /// Absolute tolerance for float matches.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Decimal places to round both sides to before a float match.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<u32>,
    /// Compare strings byte-for-byte instead of normalized.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub raw: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Judge prompt template identifier.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scoring_points: Vec<String>,
    /// Combinators only: feed element `i` of list answers to child `i`
    /// (default) or the whole answer to every child.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elementwise: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    pub kind: EvalKind,
    #[serde(default, skip_serializing_if = "is_default_params")]
    pub params: EvalParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<EvalSpec>,
}

fn is_default_params(p: &EvalParams) -> bool {
    *p == EvalParams::default()
}

impl EvalSpec {
    pub fn leaf(kind: EvalKind) -> Self {
        Self { kind, params: EvalParams::default(), children: Vec::new() }
    }

    pub fn with_params(mut self, params: EvalParams) -> Self {
        self.params = params;
        self
    }

    pub fn float(tolerance: f64) -> Self {
        Self::leaf(EvalKind::FloatExactMatch)
            .with_params(EvalParams { tolerance: Some(tolerance), ..Default::default() })
    }

    pub fn conjunction(children: Vec<EvalSpec>) -> Self {
        Self { kind: EvalKind::Conjunction, params: EvalParams::default(), children }
    }

    pub fn disjunction(children: Vec<EvalSpec>) -> Self {
        Self { kind: EvalKind::Disjunction, params: EvalParams::default(), children }
    }

    pub fn negation(child: EvalSpec) -> Self {
        Self { kind: EvalKind::Negation, params: EvalParams::default(), children: vec![child] }
    }

    /// Applies a combinator's children to the whole answer instead of
    /// element by element.
    pub fn whole_value(mut self) -> Self {
        self.params.elementwise = Some(false);
        self
    }

    pub fn threshold(&self) -> f64 {
        self.params.threshold.unwrap_or(DEFAULT_THRESHOLD)
    }

    pub fn validate(&self) -> Result<(), RouterError> {
        let n = self.children.len();
        let bad = |msg: String| Err(RouterError::InvalidSpec(format!("{}: {msg}", self.kind.name())));
        match self.kind {
            EvalKind::Negation if n != 1 => return bad(format!("negation needs exactly 1 child, got {n}")),
            EvalKind::Conjunction | EvalKind::Disjunction if n < 2 => {
                return bad(format!("needs at least 2 children, got {n}"))
            }
            k if !k.is_combinator() && n != 0 => return bad(format!("leaf has {n} children")),
            _ => {}
        }
        if let Some(t) = self.params.tolerance {
            if !(t >= 0.0) {
                return bad(format!("tolerance {t} must be >= 0"));
            }
        }
        if let Some(t) = self.params.threshold {
            if !(t > 0.0 && t <= 1.0) {
                return bad(format!("threshold {t} must lie in (0, 1]"));
            }
        }
        self.children.iter().try_for_each(EvalSpec::validate)
    }
}

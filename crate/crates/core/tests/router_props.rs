use std::collections::BTreeMap;

use dfpo_core::router::{evaluate, token_f1, AnswerValue, EvalKind, EvalSpec, RouterTable, StubJudge};
use proptest::prelude::*;

fn values() -> impl Strategy<Value = AnswerValue> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(AnswerValue::Bool),
        any::<i64>().prop_map(AnswerValue::Int),
        (-1e6f64..1e6).prop_map(AnswerValue::Real),
        "[a-z ]{0,12}".prop_map(AnswerValue::Text),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(AnswerValue::List),
            prop::collection::btree_map("[a-z]{1,4}", inner, 0..4)
                .prop_map(|m: BTreeMap<String, AnswerValue>| AnswerValue::Map(m)),
        ]
    })
}

fn leaf(kind: EvalKind) -> EvalSpec {
    EvalSpec::leaf(kind)
}

fn binary(spec: &EvalSpec, p: &AnswerValue, g: &AnswerValue) -> u8 {
    evaluate(spec, p, g, None).unwrap().binary
}

proptest! {
    #[test]
    fn structured_match_is_reflexive(v in values()) {
        let o = evaluate(&leaf(EvalKind::StructuredObjectExactMatch), &v, &v, None).unwrap();
        prop_assert_eq!(o.score, 1.0);
        prop_assert_eq!(o.binary, 1);
    }

    #[test]
    fn scalar_matches_are_reflexive(s in "[A-Za-z0-9 ]{1,20}", i in any::<i64>(), x in -1e9f64..1e9, b in any::<bool>()) {
        prop_assert_eq!(binary(&leaf(EvalKind::StringExactMatch), &AnswerValue::Text(s.clone()), &AnswerValue::Text(s)), 1);
        prop_assert_eq!(binary(&leaf(EvalKind::IntExactMatch), &AnswerValue::Int(i), &AnswerValue::Int(i)), 1);
        prop_assert_eq!(binary(&leaf(EvalKind::FloatExactMatch), &AnswerValue::Real(x), &AnswerValue::Real(x)), 1);
        prop_assert_eq!(binary(&leaf(EvalKind::BoolExactMatch), &AnswerValue::Bool(b), &AnswerValue::Bool(b)), 1);
    }

    #[test]
    fn f1_is_symmetric_and_bounded(a in "[a-e ]{0,30}", b in "[a-e ]{0,30}") {
        let (x, y) = (token_f1(&a, &b), token_f1(&b, &a));
        prop_assert_eq!(x, y);
        prop_assert!((0.0..=1.0).contains(&x));
        if a.split_whitespace().next().is_some() {
            prop_assert_eq!(token_f1(&a, &a), 1.0);
        }
    }

    #[test]
    fn combinators_follow_boolean_algebra(p in -5i64..5, q in -5i64..5, g in -5i64..5) {
        let eq = leaf(EvalKind::IntExactMatch);
        let (pv, gv) = (AnswerValue::Int(p), AnswerValue::Int(g));
        let pair = AnswerValue::List(vec![AnswerValue::Int(p), AnswerValue::Int(q)]);
        let a = binary(&eq, &pv, &gv);
        let b = binary(&eq, &AnswerValue::Int(q), &gv);

        let not_not = EvalSpec::negation(EvalSpec::negation(eq.clone()));
        prop_assert_eq!(binary(&not_not, &pv, &gv), a);

        let and = EvalSpec::conjunction(vec![eq.clone(), eq.clone()]);
        let or = EvalSpec::disjunction(vec![eq.clone(), eq.clone()]);
        prop_assert_eq!(binary(&and, &pair, &gv), a.min(b));
        prop_assert_eq!(binary(&or, &pair, &gv), a.max(b));

        // De Morgan, element by element.
        let lhs = EvalSpec::negation(EvalSpec::conjunction(vec![eq.clone(), eq.clone()]));
        let rhs = EvalSpec::disjunction(vec![EvalSpec::negation(eq.clone()), EvalSpec::negation(eq.clone())]);
        prop_assert_eq!(binary(&lhs, &pair, &gv), binary(&rhs, &pair, &gv));

        // Whole-value combinators hand the same answer to every child.
        let whole = EvalSpec::conjunction(vec![eq.clone(), EvalSpec::negation(eq)]).whole_value();
        prop_assert_eq!(binary(&whole, &pv, &gv), 0);
    }

    #[test]
    fn routing_is_total(category in ".{0,12}", hint in ".{0,24}") {
        let spec = RouterTable::builtin().route(&category, &hint);
        prop_assert!(spec.validate().is_ok());
    }
}

#[test]
fn every_kind_has_a_distinct_name() {
    let names: std::collections::BTreeSet<_> = EvalKind::ALL.iter().map(|k| k.name()).collect();
    assert_eq!(names.len(), 17);
}

#[test]
fn stub_judge_never_touches_the_network() {
    let before = dfpo_core::router::judge::http_requests_issued();
    let (p, g) = (AnswerValue::text("x = 2"), AnswerValue::text("x=2"));
    let mut stub = StubJudge::new();
    stub.script(EvalKind::ComplexMathFormulaWithLlm, &p, &g, 9.5);
    let o = evaluate(&leaf(EvalKind::ComplexMathFormulaWithLlm), &p, &g, Some(&stub)).unwrap();
    assert_eq!((o.score, o.binary), (0.95, 1));
    assert_eq!(stub.calls(), 1);
    assert_eq!(stub.external_calls(), 0);
    assert_eq!(dfpo_core::router::judge::http_requests_issued(), before);
    // Unscripted inputs without a default are an error, not a guess.
    let other = AnswerValue::text("y");
    assert!(evaluate(&leaf(EvalKind::ComplexMathFormulaWithLlm), &other, &g, Some(&stub)).is_err());
}

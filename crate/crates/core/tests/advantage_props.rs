use dfpo_core::advantage::{
    bias_terms, check_relative_advantage, cv_inequality_holds, dfpo_objective, group_normalize, mgrpo_objective,
    variance_bound_holds, AdvantageSet, RewardGroup,
};
use proptest::prelude::*;

fn groups() -> impl Strategy<Value = RewardGroup> {
    (2usize..=16)
        .prop_flat_map(|g| {
            (
                prop::collection::vec(any::<bool>(), g),
                prop::collection::vec(0.0f64..=1.0, g),
                prop::collection::vec(1usize..20, g),
                prop::collection::vec(1usize..40, g),
            )
        })
        .prop_map(|(succ, rho, dl, sl)| RewardGroup::from_outcomes(&succ, &rho, dl, sl).unwrap())
}

proptest! {
    #[test]
    fn normalized_rewards_have_zero_mean_unit_std(v in prop::collection::vec(0.0f64..=1.0, 2..32)) {
        let a = group_normalize(&v).unwrap();
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        let var = a.iter().map(|x| x * x).sum::<f64>() / n;
        let constant = v.iter().all(|&x| x == v[0]);
        if constant {
            prop_assert!(a.iter().all(|&x| x == 0.0));
        } else {
            prop_assert!((var - 1.0).abs() < 1e-9, "var {var}");
        }
    }

    #[test]
    fn objective_splits_into_solution_part_and_bias(group in groups(), masked in any::<bool>()) {
        let adv = if masked { AdvantageSet::masked(&group) } else { AdvantageSet::unmasked(&group) }.unwrap();
        let total = dfpo_objective(&group, &adv).unwrap();
        let base = mgrpo_objective(&group, &adv.solution_advantages, 0.0).unwrap();
        let bias = bias_terms(&group, &adv).unwrap();
        let g = group.len() as f64;
        let weighted: f64 = bias.iter().zip(group.draft_lengths()).map(|(b, &d)| b * d as f64).sum::<f64>() / g;
        prop_assert!((total - base - weighted).abs() < 1e-12);
    }

    #[test]
    fn masked_failures_copy_solution_advantage(group in groups()) {
        let adv = AdvantageSet::masked(&group).unwrap();
        for i in 0..group.len() {
            if !group.is_success(i) {
                prop_assert_eq!(adv.draft_advantages[i], adv.solution_advantages[i]);
            }
        }
    }

    #[test]
    fn inequalities_hold_on_mixed_groups(group in groups()) {
        prop_assume!(group.n_success() > 0 && group.n_failure() > 0);
        prop_assume!(group.draft_rewards().iter().any(|&d| d > 0.0));
        prop_assert!(check_relative_advantage(&group).unwrap().all());
        prop_assert!(cv_inequality_holds(&group).unwrap());
    }

    #[test]
    fn variance_bound(v in prop::collection::vec(0.0f64..=1.0, 1..32)) {
        prop_assert!(variance_bound_holds(&v).unwrap());
    }
}

#[test]
fn groups_reject_bad_input() {
    assert!(RewardGroup::new(vec![1.0], vec![0.5], vec![1], vec![1]).is_err());
    assert!(RewardGroup::new(vec![0.5, 1.0], vec![0.0, 0.5], vec![1, 1], vec![1, 1]).is_err());
    assert!(RewardGroup::new(vec![0.0, 1.0], vec![0.1, 0.5], vec![1, 1], vec![1, 1]).is_err());
    assert!(RewardGroup::new(vec![0.0, 1.0], vec![0.0, 0.5], vec![0, 1], vec![1, 1]).is_err());
    assert!(RewardGroup::new(vec![0.0, 1.0], vec![0.0, 0.5], vec![1, 1], vec![1, 1]).is_ok());
}

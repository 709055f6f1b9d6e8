//! Invariants of the objectives: nonnegativity, zero at the target,
//! permutation invariance, and finite-difference gradient agreement at
//! the per-operation scale.

use bmq_core::boundary::LaplacianConfig;
use bmq_core::loss::{
    basis_objective, bce_loss, dice_loss, gradcheck, scoring_regression_loss, ObjectiveWeights,
};
use bmq_core::mask::{BinaryMask, SoftMap};
use proptest::prelude::*;

fn arb_mask(side: usize) -> impl Strategy<Value = BinaryMask> {
    proptest::collection::vec(0u8..=1, side * side)
        .prop_map(move |data| BinaryMask::new(side, side, data).unwrap())
}

fn arb_probs(side: usize) -> impl Strategy<Value = SoftMap> {
    proptest::collection::vec(0.0f64..=1.0, side * side)
        .prop_map(move |data| SoftMap::new(side, side, data).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn losses_are_nonnegative(gt in arb_mask(8), probs in arb_probs(8),
                              logits_scale in 0.1f64..3.0) {
        let logits = SoftMap::from_fn(8, 8, |r, c| (probs.get(r, c) - 0.5) * logits_scale);
        prop_assert!(bce_loss(&logits, &gt).unwrap().value >= 0.0);
        prop_assert!(dice_loss(&probs, &gt, 1.0).unwrap().value >= 0.0);
        let w = ObjectiveWeights::default();
        let v = basis_objective(&logits, &gt, &gt, &w, &LaplacianConfig::default(), 1.0)
            .unwrap()
            .value;
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn dice_zero_exactly_at_target(gt in arb_mask(8)) {
        prop_assert_eq!(dice_loss(&gt.to_soft(), &gt, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn bce_vanishes_at_saturated_correct_logits(gt in arb_mask(8)) {
        let logits = SoftMap::from_fn(8, 8, |r, c| {
            if gt.get(r, c) == 1 { 40.0 } else { -40.0 }
        });
        prop_assert!(bce_loss(&logits, &gt).unwrap().value < 1e-12);
    }

    #[test]
    fn dice_invariant_under_common_pixel_permutation(
        gt in arb_mask(6), probs in arb_probs(6), seed in 0u64..1000
    ) {
        // Permute prediction and target with the same permutation.
        let mut order: Vec<usize> = (0..36).collect();
        let mut rng = bmq_core::rng::SplitMix64::new(seed);
        for i in (1..36).rev() {
            let j = rng.next_below(i as u64 + 1) as usize;
            order.swap(i, j);
        }
        let p2 = SoftMap::new(6, 6, order.iter().map(|&i| probs.data()[i]).collect()).unwrap();
        let g2 = BinaryMask::new(6, 6, order.iter().map(|&i| gt.data()[i]).collect()).unwrap();
        let a = dice_loss(&probs, &gt, 1.0).unwrap().value;
        let b = dice_loss(&p2, &g2, 1.0).unwrap().value;
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn regression_loss_nonnegative_and_zero_at_target(
        p0 in 0.0f64..=1.0, p1 in 0.0f64..=1.0
    ) {
        let r = scoring_regression_loss((p0, p1), (p0, p1)).unwrap();
        prop_assert_eq!(r.value, 0.0);
        let r = scoring_regression_loss((p0, p1), (p1, p0)).unwrap();
        prop_assert!(r.value >= 0.0);
    }
}

#[test]
fn finite_difference_agreement_per_loss() {
    // Operation-level gradient checks (the acceptance suite runs the full
    // 50-instance sweep).
    for report in gradcheck::check_all(1234, 10, 16, gradcheck::DEFAULT_STEP) {
        assert!(
            report.max_rel_error < gradcheck::DEFAULT_TOLERANCE,
            "{} gradient check failed: {}",
            report.loss,
            report.max_rel_error
        );
    }
}

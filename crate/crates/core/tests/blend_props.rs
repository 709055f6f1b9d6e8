//! Invariants of basis assembly.

use bmq_core::blend::{assemble_instance, AttentionMap, BasisStack};
use bmq_core::mask::{BBox, SoftMap};
use proptest::prelude::*;

fn arb_stack(k: usize, side: usize) -> impl Strategy<Value = BasisStack> {
    proptest::collection::vec(-2.0f64..2.0, k * side * side).prop_map(move |data| {
        let channels = data
            .chunks(side * side)
            .map(|chunk| SoftMap::new(side, side, chunk.to_vec()).unwrap())
            .collect();
        BasisStack::new(channels, 4).unwrap()
    })
}

fn arb_attention(k: usize, r: usize) -> impl Strategy<Value = AttentionMap> {
    proptest::collection::vec(-3.0f64..3.0, k * r * r)
        .prop_map(move |logits| AttentionMap::new(k, r, logits).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_strictly_inside_unit_interval(
        stack in arb_stack(3, 10),
        att in arb_attention(3, 5),
    ) {
        let out = assemble_instance(&stack, &att, &BBox::new(2, 2, 20, 16).unwrap(), 8).unwrap();
        for &v in out.data() {
            prop_assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn softmax_weights_sum_to_one(
        att in arb_attention(4, 5),
        base in -1.5f64..1.5,
    ) {
        // With all channels equal to the same constant map, the blended
        // value is that constant iff the per-pixel weights sum to 1.
        let channels = (0..4).map(|_| SoftMap::constant(8, 8, base)).collect();
        let stack = BasisStack::new(channels, 4).unwrap();
        let out = assemble_instance(&stack, &att, &BBox::new(0, 0, 32, 32).unwrap(), 8).unwrap();
        let expected = 1.0 / (1.0 + (-base).exp());
        for &v in out.data() {
            prop_assert!((v - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn attention_shift_invariance(
        stack in arb_stack(3, 8),
        att in arb_attention(3, 5),
        shift in -5.0f64..5.0,
    ) {
        let bbox = BBox::new(1, 1, 20, 20).unwrap();
        let base = assemble_instance(&stack, &att, &bbox, 8).unwrap();
        let shifted_logits: Vec<f64> = att.logits().iter().map(|&v| v + shift).collect();
        let shifted = AttentionMap::new(3, 5, shifted_logits).unwrap();
        let out = assemble_instance(&stack, &shifted, &bbox, 8).unwrap();
        for (a, b) in base.data().iter().zip(out.data()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn channel_permutation_invariance(
        stack in arb_stack(3, 8),
        att in arb_attention(3, 5),
    ) {
        let bbox = BBox::new(0, 0, 24, 24).unwrap();
        let base = assemble_instance(&stack, &att, &bbox, 6).unwrap();
        // Rotate channels together with attention channels.
        let perm = [2usize, 0, 1];
        let channels: Vec<SoftMap> = perm.iter().map(|&i| stack.channels()[i].clone()).collect();
        let pstack = BasisStack::new(channels, 4).unwrap();
        let r = att.resolution();
        let mut logits = Vec::new();
        for &i in &perm {
            logits.extend_from_slice(&att.logits()[i * r * r..(i + 1) * r * r]);
        }
        let patt = AttentionMap::new(3, r, logits).unwrap();
        let out = assemble_instance(&pstack, &patt, &bbox, 6).unwrap();
        for (a, b) in base.data().iter().zip(out.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

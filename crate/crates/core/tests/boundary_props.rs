//! Invariants of the Laplacian, the boundary extractor, and the Dice
//! score.

use bmq_core::boundary::{
    boundary_dice, boundary_dice_binary, extract_boundary, laplacian, Connectivity, DiceConfig,
    LaplacianConfig,
};
use bmq_core::mask::{BinaryMask, SoftMap};
use proptest::prelude::*;

fn arb_mask(side: usize) -> impl Strategy<Value = BinaryMask> {
    proptest::collection::vec(0u8..=1, side * side)
        .prop_map(move |data| BinaryMask::new(side, side, data).unwrap())
}

fn arb_soft(side: usize) -> impl Strategy<Value = SoftMap> {
    proptest::collection::vec(-2.0f64..2.0, side * side)
        .prop_map(move |data| SoftMap::new(side, side, data).unwrap())
}

fn configs() -> [LaplacianConfig; 2] {
    [
        LaplacianConfig {
            connectivity: Connectivity::Four,
        },
        LaplacianConfig {
            connectivity: Connectivity::Eight,
        },
    ]
}

proptest! {
    #[test]
    fn dice_symmetric_positive_bounded((a, b) in (arb_mask(10), arb_mask(10))) {
        let cfg = DiceConfig::default();
        let ab = boundary_dice_binary(&a, &b, &cfg).unwrap();
        let ba = boundary_dice_binary(&b, &a, &cfg).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab > 0.0 && ab <= 1.0);
        prop_assert_eq!(boundary_dice_binary(&a, &a, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn dice_self_is_one_for_soft_maps(m in arb_soft(9)) {
        prop_assert_eq!(boundary_dice(&m, &m, &DiceConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn laplacian_is_linear(a in arb_soft(8), b in arb_soft(8),
                           alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        for cfg in configs() {
            let mixed = SoftMap::from_fn(8, 8, |r, c| alpha * a.get(r, c) + beta * b.get(r, c));
            let lhs = laplacian(&mixed, &cfg);
            let la = laplacian(&a, &cfg);
            let lb = laplacian(&b, &cfg);
            for r in 0..8 {
                for c in 0..8 {
                    let rhs = alpha * la.get(r, c) + beta * lb.get(r, c);
                    prop_assert!((lhs.get(r, c) - rhs).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn laplacian_response_sums_to_zero_for_interior_support(m in arb_mask(6)) {
        // Embed with a 1-pixel zero margin so the support avoids the
        // border; the stencil coefficients sum to zero, so the total
        // response must too.
        let padded = BinaryMask::from_fn(8, 8, |r, c| {
            if r == 0 || c == 0 || r == 7 || c == 7 {
                false
            } else {
                m.get(r - 1, c - 1) == 1
            }
        });
        for cfg in configs() {
            let l = laplacian(&padded.to_soft(), &cfg);
            let total: f64 = l.data().iter().sum();
            prop_assert!(total.abs() < 1e-9);
        }
    }

    #[test]
    fn extract_boundary_translation_equivariant(m in arb_mask(5), dr in 0usize..3, dc in 0usize..3) {
        // Place the motif at two offsets, keeping a free margin so the
        // 1-pixel dilation stays inside the canvas.
        let place = |orow: usize, ocol: usize| {
            BinaryMask::from_fn(12, 12, |r, c| {
                r > orow
                    && c > ocol
                    && r < orow + 1 + 5
                    && c < ocol + 1 + 5
                    && m.get(r - orow - 1, c - ocol - 1) == 1
            })
        };
        let base = place(0, 0);
        let moved = place(dr, dc);
        for cfg in configs() {
            let ba = extract_boundary(&base, &cfg);
            let bb = extract_boundary(&moved, &cfg);
            for r in 0..12 {
                for c in 0..12 {
                    if r > dr && c > dc && r < dr + 7 && c < dc + 7 {
                        prop_assert_eq!(bb.get(r, c), ba.get(r - dr, c - dc));
                    }
                }
            }
        }
    }

    #[test]
    fn boundary_superset_of_exposed_foreground(m in arb_mask(9)) {
        // Under 4-connectivity every mask pixel with a background
        // 4-neighbor (zero padding included) is boundary.
        let cfg = LaplacianConfig {
            connectivity: Connectivity::Four,
        };
        let b = extract_boundary(&m, &cfg);
        for r in 0..9i64 {
            for c in 0..9i64 {
                if m.get(r as usize, c as usize) == 0 {
                    continue;
                }
                let bg_neighbor = [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
                    .iter()
                    .any(|&(rr, cc)| {
                        !(0..9).contains(&rr)
                            || !(0..9).contains(&cc)
                            || m.get(rr as usize, cc as usize) == 0
                    });
                if bg_neighbor {
                    prop_assert_eq!(b.get(r as usize, c as usize), 1);
                }
            }
        }
    }
}

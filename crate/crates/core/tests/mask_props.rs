//! Algebraic invariants of the raster types and codecs.

use bmq_core::mask::{mask_iou, BBox, BinaryMask, SoftMap};
use bmq_core::rle;
use proptest::prelude::*;

fn arb_mask(max_side: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max_side, 1..=max_side)
        .prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u8..=1, w * h).prop_map(move |data| {
                BinaryMask::new(w, h, data).unwrap()
            })
        })
}

fn arb_mask_pair(max_side: usize) -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        (
            proptest::collection::vec(0u8..=1, w * h),
            proptest::collection::vec(0u8..=1, w * h),
        )
            .prop_map(move |(a, b)| {
                (
                    BinaryMask::new(w, h, a).unwrap(),
                    BinaryMask::new(w, h, b).unwrap(),
                )
            })
    })
}

proptest! {
    #[test]
    fn rle_roundtrip_is_identity(mask in arb_mask(12)) {
        let back = rle::decode(&rle::encode(&mask)).unwrap();
        prop_assert_eq!(back, mask);
    }

    #[test]
    fn compressed_string_roundtrip_is_identity(mask in arb_mask(12)) {
        let r = rle::encode(&mask);
        let s = rle::compress(&r);
        let back = rle::decompress(&s, r.height, r.width).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn iou_symmetric_bounded_and_zero_iff_disjoint(
        (a, b) in arb_mask_pair(10)
    ) {
        let ab = mask_iou(&a, &b).unwrap();
        let ba = mask_iou(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);

        let inter: u32 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| (x & y) as u32)
            .sum();
        let union: u32 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| (x | y) as u32)
            .sum();
        if union > 0 {
            prop_assert_eq!(ab == 0.0, inter == 0);
        }
    }

    #[test]
    fn crop_with_full_box_is_identity(mask in arb_mask(10)) {
        let full = BBox::new(0, 0, mask.width() as u32, mask.height() as u32).unwrap();
        prop_assert_eq!(mask.crop(&full), mask.clone());
        // And cropping the crop with its own full box changes nothing.
        let c = mask.crop(&BBox::new(1, 1, 4, 3).unwrap());
        let cfull = BBox::new(0, 0, 4, 3).unwrap();
        prop_assert_eq!(c.crop(&cfull), c.clone());
    }

    #[test]
    fn resize_identity_and_constant(
        w in 1usize..8, h in 1usize..8,
        ow in 1usize..12, oh in 1usize..12,
        v in -5.0f64..5.0,
    ) {
        let m = SoftMap::constant(w, h, v);
        let r = m.resize_bilinear(ow, oh);
        for &x in r.data() {
            prop_assert!((x - v).abs() < 1e-12);
        }
        let patterned = SoftMap::from_fn(w, h, |r, c| (r * w + c) as f64);
        prop_assert_eq!(patterned.resize_bilinear(w, h), patterned);
    }

    #[test]
    fn resize_bilinear_stays_within_input_range(
        mask in arb_mask(8), ow in 1usize..16, oh in 1usize..16
    ) {
        let soft = mask.to_soft();
        let r = soft.resize_bilinear(ow, oh);
        let lo = soft.data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = soft.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for &v in r.data() {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}

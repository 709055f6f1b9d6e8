//! Invariants of score fusion and re-ranking.

use bmq_core::boundary::{DiceConfig, LaplacianConfig};
use bmq_core::mask::{BBox, BinaryMask};
use bmq_core::scoring::{
    fuse_score, rerank, score_targets, InstancePrediction, MaskRep, RerankMode,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn fuse_monotone_in_each_argument(
        s in 0.0f64..=1.0, i in 0.0f64..=1.0, b in 0.001f64..=1.0,
        ds in 0.0f64..0.3, di in 0.0f64..0.3, db in 0.0f64..0.3,
    ) {
        let base = fuse_score(s, i, b).unwrap();
        prop_assert!(fuse_score((s + ds).min(1.0), i, b).unwrap() >= base);
        prop_assert!(fuse_score(s, (i + di).min(1.0), b).unwrap() >= base);
        prop_assert!(fuse_score(s, i, (b + db).min(1.0)).unwrap() >= base);
    }

    #[test]
    fn fuse_zero_iff_class_or_iou_zero(
        s in 0.0f64..=1.0, i in 0.0f64..=1.0, b in 0.001f64..=1.0,
    ) {
        let v = fuse_score(s, i, b).unwrap();
        prop_assert_eq!(v == 0.0, s == 0.0 || i == 0.0);
    }

    #[test]
    fn rank_by_fused_equals_rank_by_square_transform(
        rows in proptest::collection::vec((0.01f64..=1.0, 0.0f64..=1.0, 0.001f64..=1.0), 1..30)
    ) {
        // s_mask ordering must equal s_class^2 * s_iou * s_boundary
        // ordering: the square root is strictly monotone.
        let fused: Vec<f64> = rows
            .iter()
            .map(|&(s, i, b)| fuse_score(s, i, b).unwrap())
            .collect();
        let transformed: Vec<f64> = rows.iter().map(|&(s, i, b)| s * s * i * b).collect();
        let order = |vals: &[f64]| {
            let mut idx: Vec<usize> = (0..vals.len()).collect();
            idx.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap().then(a.cmp(&b)));
            idx
        };
        prop_assert_eq!(order(&fused), order(&transformed));
    }

    #[test]
    fn class_scale_does_not_change_rerank_order(
        scores in proptest::collection::vec(0.01f64..=1.0, 1..20),
        scale in 0.05f64..=1.0,
    ) {
        let mask = BinaryMask::from_fn(4, 4, |r, c| r < 2 && c < 2);
        let mk = |s: f64| {
            InstancePrediction::new(
                1,
                BBox::new(0, 0, 2, 2).unwrap(),
                MaskRep::Raster(mask.clone()),
                s,
            )
            .unwrap()
        };
        let preds: Vec<_> = scores.iter().map(|&s| mk(s)).collect();
        let scaled: Vec<_> = scores.iter().map(|&s| mk(s * scale)).collect();
        let lcfg = LaplacianConfig::default();
        let dcfg = DiceConfig::default();
        let a = rerank(&preds, None, RerankMode::ClassOnly, &lcfg, &dcfg).unwrap();
        let b = rerank(&scaled, None, RerankMode::ClassOnly, &lcfg, &dcfg).unwrap();
        let ia: Vec<usize> = a.iter().map(|r| r.source_index).collect();
        let ib: Vec<usize> = b.iter().map(|r| r.source_index).collect();
        prop_assert_eq!(ia, ib);
    }

    #[test]
    fn score_targets_of_perfect_prediction_is_unit(
        x0 in 0usize..6, y0 in 0usize..6, w in 1usize..6, h in 1usize..6,
    ) {
        let gt = BinaryMask::from_fn(12, 12, |r, c| {
            (y0..y0 + h).contains(&r) && (x0..x0 + w).contains(&c)
        });
        let bbox = gt.tight_bbox().unwrap();
        let pred = InstancePrediction::new(1, bbox, MaskRep::Raster(gt.clone()), 0.5).unwrap();
        let (s_iou, s_b) = score_targets(
            &pred,
            &gt,
            &LaplacianConfig::default(),
            &DiceConfig::default(),
        )
        .unwrap();
        prop_assert_eq!(s_iou, 1.0);
        prop_assert_eq!(s_b, 1.0);
    }
}

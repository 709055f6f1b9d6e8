//! The AP evaluator against an independent brute-force implementation,
//! plus rank-only-dependence invariants.
//!
//! The oracle below recomputes everything from first principles: pixel
//! loops for IoU, an explicit greedy replay for matching, and a direct
//! max-scan over the precision-recall points for the 101-point
//! interpolation. It shares no code with the evaluator.

use bmq_core::eval::{default_thresholds, evaluate_ap, EvalGt, EvalPrediction};
use bmq_core::mask::BinaryMask;
use bmq_core::rng::SplitMix64;

/// Brute-force mean AP over categories then thresholds, with per-50/75
/// extraction. All-area range only.
fn brute_force_ap(
    preds: &[EvalPrediction],
    gts: &[EvalGt],
    thresholds: &[f64],
) -> (f64, Option<f64>, Option<f64>) {
    let mut cats: Vec<u64> = gts
        .iter()
        .map(|g| g.category)
        .chain(preds.iter().map(|p| p.category))
        .collect();
    cats.sort_unstable();
    cats.dedup();

    let pixel_iou = |a: &BinaryMask, b: &BinaryMask| -> f64 {
        let mut inter = 0u64;
        let mut union = 0u64;
        for r in 0..a.height() {
            for c in 0..a.width() {
                let (x, y) = (a.get(r, c), b.get(r, c));
                if x == 1 && y == 1 {
                    inter += 1;
                }
                if x == 1 || y == 1 {
                    union += 1;
                }
            }
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    };

    let mut per_threshold_sums = vec![0.0f64; thresholds.len()];
    for &cat in &cats {
        let mut order: Vec<usize> = (0..preds.len())
            .filter(|&i| preds[i].category == cat)
            .collect();
        order.sort_by(|&a, &b| {
            preds[b]
                .score
                .partial_cmp(&preds[a].score)
                .unwrap()
                .then(a.cmp(&b))
        });
        let gt_idx: Vec<usize> = (0..gts.len()).filter(|&i| gts[i].category == cat).collect();

        for (ti, &t) in thresholds.iter().enumerate() {
            let mut used = vec![false; gt_idx.len()];
            let mut tp_flags = Vec::new();
            for &pi in &order {
                let mut best: Option<(usize, f64)> = None;
                for (slot, &gi) in gt_idx.iter().enumerate() {
                    if used[slot] || gts[gi].image_id != preds[pi].image_id {
                        continue;
                    }
                    let iou = pixel_iou(&preds[pi].mask, &gts[gi].mask);
                    if iou < t {
                        continue;
                    }
                    if best.is_none_or(|(_, b)| iou > b) {
                        best = Some((slot, iou));
                    }
                }
                if let Some((slot, _)) = best {
                    used[slot] = true;
                    tp_flags.push(true);
                } else {
                    tp_flags.push(false);
                }
            }

            let total_gt = gt_idx.len();
            let ap = if total_gt == 0 {
                0.0
            } else {
                let mut points = Vec::new();
                let (mut tp, mut fp) = (0usize, 0usize);
                for &is_tp in &tp_flags {
                    if is_tp {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                    points.push((tp as f64 / total_gt as f64, tp as f64 / (tp + fp) as f64));
                }
                let mut sum = 0.0;
                for step in 0..=100u32 {
                    let r = step as f64 / 100.0;
                    let best = points
                        .iter()
                        .filter(|(recall, _)| *recall >= r)
                        .map(|&(_, p)| p)
                        .fold(0.0f64, f64::max);
                    sum += best;
                }
                sum / 101.0
            };
            per_threshold_sums[ti] += ap;
        }
    }

    let per_threshold: Vec<f64> = per_threshold_sums
        .iter()
        .map(|s| s / cats.len() as f64)
        .collect();
    let ap = per_threshold.iter().sum::<f64>() / thresholds.len() as f64;
    let pick = |target: f64| {
        thresholds
            .iter()
            .position(|&t| (t - target).abs() < 1e-9)
            .map(|i| per_threshold[i])
    };
    (ap, pick(0.5), pick(0.75))
}

fn random_tiny_case(
    rng: &mut SplitMix64,
) -> (Vec<EvalPrediction>, Vec<EvalGt>) {
    let n_images = 1 + rng.next_below(3);
    let n_gts = rng.next_below(4) as usize;
    let n_preds = rng.next_below(5) as usize;
    let rand_mask = |rng: &mut SplitMix64| {
        let x0 = rng.next_below(8) as usize;
        let y0 = rng.next_below(8) as usize;
        let w = 1 + rng.next_below(4) as usize;
        let h = 1 + rng.next_below(4) as usize;
        BinaryMask::from_fn(12, 12, |r, c| {
            (y0..(y0 + h).min(12)).contains(&r) && (x0..(x0 + w).min(12)).contains(&c)
        })
    };
    let gts: Vec<EvalGt> = (0..n_gts)
        .map(|_| EvalGt {
            image_id: 1 + rng.next_below(n_images),
            category: 1 + rng.next_below(2),
            mask: rand_mask(rng),
        })
        .collect();
    let preds: Vec<EvalPrediction> = (0..n_preds)
        .map(|_| EvalPrediction {
            image_id: 1 + rng.next_below(n_images),
            category: 1 + rng.next_below(2),
            mask: rand_mask(rng),
            score: (rng.next_below(100) as f64 + 1.0) / 100.0,
        })
        .collect();
    (preds, gts)
}

#[test]
fn evaluator_matches_brute_force_on_random_tiny_cases() {
    let mut rng = SplitMix64::new(7);
    let thresholds = default_thresholds();
    let mut checked = 0;
    while checked < 60 {
        let (preds, gts) = random_tiny_case(&mut rng);
        if preds.is_empty() && gts.is_empty() {
            continue;
        }
        let got = evaluate_ap(&preds, &gts, &thresholds).unwrap();
        let (ap, ap50, ap75) = brute_force_ap(&preds, &gts, &thresholds);
        assert_eq!(got.ap, ap, "ap mismatch on case {checked}");
        assert_eq!(got.ap50, ap50, "ap50 mismatch on case {checked}");
        assert_eq!(got.ap75, ap75, "ap75 mismatch on case {checked}");
        checked += 1;
    }
}

#[test]
fn ap_thresholds_are_monotone_and_bounded() {
    let mut rng = SplitMix64::new(99);
    let thresholds = default_thresholds();
    for _ in 0..40 {
        let (preds, gts) = random_tiny_case(&mut rng);
        if preds.is_empty() && gts.is_empty() {
            continue;
        }
        let r = evaluate_ap(&preds, &gts, &thresholds).unwrap();
        assert!((0.0..=1.0).contains(&r.ap));
        let (a50, a75) = (r.ap50.unwrap(), r.ap75.unwrap());
        assert!(a50 >= a75, "AP50 {a50} < AP75 {a75}");
        // And the last threshold never beats AP75.
        let strict = evaluate_ap(&preds, &gts, &[0.95]).unwrap();
        assert!(a75 >= strict.ap);
    }
}

#[test]
fn scaling_ranking_scores_leaves_result_unchanged() {
    let mut rng = SplitMix64::new(4242);
    let thresholds = default_thresholds();
    for _ in 0..20 {
        let (mut preds, gts) = random_tiny_case(&mut rng);
        if preds.is_empty() || gts.is_empty() {
            continue;
        }
        let base = evaluate_ap(&preds, &gts, &thresholds).unwrap();
        for p in preds.iter_mut() {
            p.score *= 0.37;
        }
        let scaled = evaluate_ap(&preds, &gts, &thresholds).unwrap();
        assert_eq!(base.ap, scaled.ap);
        assert_eq!(base.ap50, scaled.ap50);
        assert_eq!(base.per_category, scaled.per_category);
    }
}

#[test]
fn image_order_permutation_preserves_result() {
    // Swap the roles of image ids 1 and 2 everywhere; the pooled PR
    // curves are identical, so every aggregate must be too.
    let mut rng = SplitMix64::new(5151);
    let thresholds = default_thresholds();
    for _ in 0..20 {
        let (preds, gts) = random_tiny_case(&mut rng);
        if preds.is_empty() || gts.is_empty() {
            continue;
        }
        let swap = |id: u64| match id {
            1 => 2,
            2 => 1,
            other => other,
        };
        let preds2: Vec<EvalPrediction> = preds
            .iter()
            .map(|p| EvalPrediction {
                image_id: swap(p.image_id),
                category: p.category,
                mask: p.mask.clone(),
                score: p.score,
            })
            .collect();
        let gts2: Vec<EvalGt> = gts
            .iter()
            .map(|g| EvalGt {
                image_id: swap(g.image_id),
                category: g.category,
                mask: g.mask.clone(),
            })
            .collect();
        let a = evaluate_ap(&preds, &gts, &thresholds).unwrap();
        let b = evaluate_ap(&preds2, &gts2, &thresholds).unwrap();
        assert_eq!(a.ap, b.ap);
        assert_eq!(a.ap50, b.ap50);
        assert_eq!(a.ap75, b.ap75);
    }
}

#[test]
fn equal_score_input_order_swap_preserves_curve() {
    // Two equally scored predictions in different images, each shifted
    // off its own GT by the same amount: their IoUs are equal, so every
    // threshold gives each rank the same TP/FP label whichever of the two
    // is processed first, and the pooled curve is unchanged by the swap.
    let gt_at = |img: u64| EvalGt {
        image_id: img,
        category: 1,
        mask: BinaryMask::from_fn(10, 10, |r, c| (2..6).contains(&r) && (2..6).contains(&c)),
    };
    let pred_at = |img: u64| EvalPrediction {
        image_id: img,
        category: 1,
        mask: BinaryMask::from_fn(10, 10, |r, c| (2..6).contains(&r) && (3..7).contains(&c)),
        score: 0.7,
    };
    let gts = vec![gt_at(1), gt_at(2)];
    let (a, b) = (pred_at(1), pred_at(2));
    let thresholds = default_thresholds();
    let fwd = evaluate_ap(&[a.clone(), b.clone()], &gts, &thresholds).unwrap();
    let rev = evaluate_ap(&[b, a], &gts, &thresholds).unwrap();
    assert_eq!(fwd.ap, rev.ap);
    assert_eq!(fwd.ap50, rev.ap50);
    assert_eq!(fwd.ap75, rev.ap75);
}

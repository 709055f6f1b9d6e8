//! COCO-style average precision and the quality re-ranking experiment.
//!
//! Per category and IoU threshold: predictions are sorted by descending
//! ranking score (stable, input order breaks ties), greedily matched per
//! image against unmatched same-category ground truth at highest mask IoU,
//! and the resulting precision-recall curve is integrated with 101-point
//! interpolation. The headline AP averages over categories first, then
//! thresholds. Area-range breakdowns follow the standard pixel-area
//! cutoffs and ignore out-of-range instances rather than penalizing them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{DiceConfig, LaplacianConfig};
use crate::coco::{GtDataset, PredictionRecord};
use crate::error::{Error, Result};
use crate::mask::{mask_iou, BinaryMask};
use crate::rng::derive_seed;
use crate::scoring::{self, GtInstance};
use crate::synth::{degrade_scenes, generate_scene, Scene, SceneSpec, DegradeSpec};

/// Ground-truth instance for evaluation.
#[derive(Debug, Clone)]
pub struct EvalGt {
    pub image_id: u64,
    pub category: u64,
    pub mask: BinaryMask,
}

/// Prediction for evaluation; `score` is the ranking score.
#[derive(Debug, Clone)]
pub struct EvalPrediction {
    pub image_id: u64,
    pub category: u64,
    pub mask: BinaryMask,
    pub score: f64,
}

/// Pixel-area cutoffs for the small/medium/large breakdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaRanges {
    pub small_max: f64,
    pub medium_max: f64,
}

impl Default for AreaRanges {
    fn default() -> Self {
        AreaRanges {
            small_max: 1024.0,
            medium_max: 9216.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalResult {
    /// Mean over categories, then over the IoU thresholds.
    pub ap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap50: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap75: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_small: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_medium: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_large: Option<f64>,
    /// Per-category AP at the all-area range, averaged over thresholds.
    pub per_category: BTreeMap<u64, f64>,
}

/// The default COCO threshold sweep 0.50:0.05:0.95.
pub fn default_thresholds() -> Vec<f64> {
    (50..=95).step_by(5).map(|p| p as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MatchFlag {
    Tp,
    Fp,
    Ignored,
}

/// Everything the per-category worker needs, precomputed once.
struct CategoryCase {
    /// Prediction indices in ranking order (score desc, input order).
    pred_order: Vec<usize>,
    pred_areas: Vec<f64>,
    /// Per ranked prediction: IoUs against its image's GT list.
    ious: Vec<Vec<f64>>,
    /// Per ranked prediction: which image-local GT list it indexes.
    pred_image: Vec<u64>,
    /// Image id -> (gt areas) in input order.
    gt_by_image: BTreeMap<u64, Vec<f64>>,
}

impl CategoryCase {
    fn build(preds: &[EvalPrediction], gts: &[EvalGt], category: u64) -> Result<CategoryCase> {
        let mut pred_order: Vec<usize> = preds
            .iter()
            .enumerate()
            .filter(|(_, p)| p.category == category)
            .map(|(i, _)| i)
            .collect();
        pred_order.sort_by(|&a, &b| {
            preds[b]
                .score
                .partial_cmp(&preds[a].score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });

        let mut gt_index_by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, g) in gts.iter().enumerate() {
            if g.category == category {
                gt_index_by_image.entry(g.image_id).or_default().push(i);
            }
        }

        let ious: Vec<Vec<f64>> = pred_order
            .iter()
            .map(|&pi| {
                let p = &preds[pi];
                match gt_index_by_image.get(&p.image_id) {
                    None => Ok(Vec::new()),
                    Some(list) => list
                        .iter()
                        .map(|&gi| mask_iou(&p.mask, &gts[gi].mask))
                        .collect::<Result<Vec<f64>>>(),
                }
            })
            .collect::<Result<_>>()?;

        let pred_areas = pred_order
            .iter()
            .map(|&pi| preds[pi].mask.area() as f64)
            .collect();
        let pred_image = pred_order.iter().map(|&pi| preds[pi].image_id).collect();
        let gt_by_image = gt_index_by_image
            .iter()
            .map(|(&img, list)| {
                (
                    img,
                    list.iter().map(|&gi| gts[gi].mask.area() as f64).collect(),
                )
            })
            .collect();
        Ok(CategoryCase {
            pred_order,
            pred_areas,
            ious,
            pred_image,
            gt_by_image,
        })
    }

    /// Greedy matching at one threshold and area range, then 101-point AP.
    fn ap(&self, threshold: f64, range: (f64, f64)) -> f64 {
        let in_range = |a: f64| a >= range.0 && a <= range.1;
        // Taken flags per image, aligned with the per-image GT lists.
        let mut taken: BTreeMap<u64, Vec<bool>> = self
            .gt_by_image
            .iter()
            .map(|(&img, list)| (img, vec![false; list.len()]))
            .collect();
        let total_gt: usize = self
            .gt_by_image
            .values()
            .flat_map(|areas| areas.iter())
            .filter(|&&a| in_range(a))
            .count();

        let mut flags = Vec::with_capacity(self.pred_order.len());
        for (rank, _) in self.pred_order.iter().enumerate() {
            let img = self.pred_image[rank];
            let ious = &self.ious[rank];
            let gt_areas = self.gt_by_image.get(&img);
            let mut best_normal: Option<(usize, f64)> = None;
            let mut best_ignored: Option<(usize, f64)> = None;
            if let Some(areas) = gt_areas {
                let taken_flags = taken.get_mut(&img).expect("aligned maps");
                for (j, (&iou, &area)) in ious.iter().zip(areas.iter()).enumerate() {
                    if taken_flags[j] || iou < threshold {
                        continue;
                    }
                    let slot = if in_range(area) {
                        &mut best_normal
                    } else {
                        &mut best_ignored
                    };
                    let better = match slot {
                        None => true,
                        Some((_, best)) => iou > *best,
                    };
                    if better {
                        *slot = Some((j, iou));
                    }
                }
                if let Some((j, _)) = best_normal {
                    taken_flags[j] = true;
                    flags.push(MatchFlag::Tp);
                    continue;
                }
                if let Some((j, _)) = best_ignored {
                    taken_flags[j] = true;
                    flags.push(MatchFlag::Ignored);
                    continue;
                }
            }
            // Unmatched: out-of-range predictions are ignored, not FPs.
            if in_range(self.pred_areas[rank]) {
                flags.push(MatchFlag::Fp);
            } else {
                flags.push(MatchFlag::Ignored);
            }
        }
        ap_from_flags(&flags, total_gt)
    }

    fn participates(&self, range: (f64, f64)) -> bool {
        let in_range = |a: f64| a >= range.0 && a <= range.1;
        self.gt_by_image
            .values()
            .any(|areas| areas.iter().any(|&a| in_range(a)))
            || self.pred_areas.iter().any(|&a| in_range(a))
    }
}

/// 101-point interpolated AP from the match flags in ranking order.
/// An empty ground-truth set scores 0 when predictions exist.
fn ap_from_flags(flags: &[MatchFlag], total_gt: usize) -> f64 {
    if total_gt == 0 {
        return 0.0;
    }
    let mut recalls = Vec::new();
    let mut precisions = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for &f in flags {
        match f {
            MatchFlag::Tp => tp += 1,
            MatchFlag::Fp => fp += 1,
            MatchFlag::Ignored => continue,
        }
        recalls.push(tp as f64 / total_gt as f64);
        precisions.push(tp as f64 / (tp + fp) as f64);
    }
    // Precision envelope: running max from the right.
    for i in (0..precisions.len().saturating_sub(1)).rev() {
        if precisions[i + 1] > precisions[i] {
            precisions[i] = precisions[i + 1];
        }
    }
    let mut sum = 0.0;
    let mut idx = 0usize;
    for step in 0..=100u32 {
        let r = step as f64 / 100.0;
        while idx < recalls.len() && recalls[idx] < r {
            idx += 1;
        }
        if idx < recalls.len() {
            sum += precisions[idx];
        }
    }
    sum / 101.0
}

pub fn evaluate_ap(
    preds: &[EvalPrediction],
    gts: &[EvalGt],
    thresholds: &[f64],
) -> Result<EvalResult> {
    evaluate_ap_with(preds, gts, thresholds, &AreaRanges::default())
}

pub fn evaluate_ap_with(
    preds: &[EvalPrediction],
    gts: &[EvalGt],
    thresholds: &[f64],
    ranges: &AreaRanges,
) -> Result<EvalResult> {
    if thresholds.is_empty() {
        return Err(Error::input("threshold list is empty".to_string()));
    }
    if let Some(bad) = thresholds.iter().find(|t| !(0.0 < **t && **t <= 1.0)) {
        return Err(Error::input(format!("iou threshold {bad} outside (0, 1]")));
    }
    let mut categories: Vec<u64> = gts
        .iter()
        .map(|g| g.category)
        .chain(preds.iter().map(|p| p.category))
        .collect();
    categories.sort_unstable();
    categories.dedup();
    if categories.is_empty() {
        return Err(Error::input(
            "nothing to evaluate: no ground truth and no predictions".to_string(),
        ));
    }

    let all = (0.0, f64::INFINITY);
    let small = (0.0, ranges.small_max);
    let medium = (ranges.small_max, ranges.medium_max);
    let large = (ranges.medium_max, f64::INFINITY);

    // Per category: AP per threshold for each range (None where the
    // category has no instance in the range). Parallel over categories,
    // reduced in category order.
    type PerRange = [Option<Vec<f64>>; 4];
    let per_cat: Vec<PerRange> = categories
        .par_iter()
        .map(|&cat| -> Result<PerRange> {
            let case = CategoryCase::build(preds, gts, cat)?;
            let mut out: PerRange = [None, None, None, None];
            for (slot, range) in out.iter_mut().zip([all, small, medium, large]) {
                if case.participates(range) {
                    *slot = Some(
                        thresholds
                            .iter()
                            .map(|&t| case.ap(t, range))
                            .collect::<Vec<f64>>(),
                    );
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    // Mean over categories at each threshold, then over thresholds.
    let range_mean = |slot: usize| -> Option<Vec<f64>> {
        let participating: Vec<&Vec<f64>> = per_cat
            .iter()
            .filter_map(|ranges| ranges[slot].as_ref())
            .collect();
        if participating.is_empty() {
            return None;
        }
        Some(
            (0..thresholds.len())
                .map(|ti| {
                    participating.iter().map(|aps| aps[ti]).sum::<f64>()
                        / participating.len() as f64
                })
                .collect(),
        )
    };

    let all_by_threshold = range_mean(0).expect("every category participates at the all range");
    let ap = all_by_threshold.iter().sum::<f64>() / thresholds.len() as f64;
    let find_thr = |target: f64| -> Option<f64> {
        thresholds
            .iter()
            .position(|&t| (t - target).abs() < 1e-9)
            .map(|i| all_by_threshold[i])
    };
    let range_ap = |slot: usize| -> Option<f64> {
        range_mean(slot).map(|v| v.iter().sum::<f64>() / thresholds.len() as f64)
    };

    let per_category = categories
        .iter()
        .zip(&per_cat)
        .map(|(&cat, ranges)| {
            let aps = ranges[0].as_ref().expect("all range always present");
            (cat, aps.iter().sum::<f64>() / thresholds.len() as f64)
        })
        .collect();

    Ok(EvalResult {
        ap,
        ap50: find_thr(0.5),
        ap75: find_thr(0.75),
        ap_small: range_ap(1),
        ap_medium: range_ap(2),
        ap_large: range_ap(3),
        per_category,
    })
}

/// Assemble evaluation inputs from COCO-style JSON values. The ranking
/// score of a record is `s_mask` when present, otherwise `score`.
pub fn eval_inputs_from_coco(
    gt: &GtDataset,
    preds: &[PredictionRecord],
) -> Result<(Vec<EvalPrediction>, Vec<EvalGt>)> {
    let dims: BTreeMap<u64, (usize, usize)> = gt
        .images
        .iter()
        .map(|img| (img.id, (img.width as usize, img.height as usize)))
        .collect();
    let mut out_gts = Vec::with_capacity(gt.annotations.len());
    for ann in &gt.annotations {
        let &(w, h) = dims.get(&ann.image_id).ok_or_else(|| {
            Error::format(format!(
                "annotation {} references unknown image {}",
                ann.id, ann.image_id
            ))
        })?;
        let mask = ann.segmentation.to_mask(w, h).map_err(|e| {
            Error::format(format!("annotation {}: {e}", ann.id))
        })?;
        out_gts.push(EvalGt {
            image_id: ann.image_id,
            category: ann.category_id,
            mask,
        });
    }
    let mut out_preds = Vec::with_capacity(preds.len());
    for (i, rec) in preds.iter().enumerate() {
        let &(w, h) = dims.get(&rec.image_id).ok_or_else(|| {
            Error::format(format!(
                "prediction {i} references unknown image {}",
                rec.image_id
            ))
        })?;
        let mask = rec
            .segmentation
            .to_mask(w, h)
            .map_err(|e| Error::format(format!("prediction {i}: {e}")))?;
        out_preds.push(EvalPrediction {
            image_id: rec.image_id,
            category: rec.category_id,
            mask,
            score: rec.s_mask.unwrap_or(rec.score),
        });
    }
    Ok((out_preds, out_gts))
}

/// Ranking policies compared by the re-ranking experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    ClassOnly,
    /// Oracle quality with the boundary factor forced to 1.
    OracleIou,
    /// Oracle quality with the IoU factor forced to 1.
    OracleBoundary,
    /// Full fused oracle score.
    OracleFull,
}

impl ExperimentMode {
    pub fn all() -> [ExperimentMode; 4] {
        [
            ExperimentMode::ClassOnly,
            ExperimentMode::OracleIou,
            ExperimentMode::OracleBoundary,
            ExperimentMode::OracleFull,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentMode::ClassOnly => "class_only",
            ExperimentMode::OracleIou => "oracle_iou",
            ExperimentMode::OracleBoundary => "oracle_boundary",
            ExperimentMode::OracleFull => "oracle_full",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRow {
    pub mode: ExperimentMode,
    pub result: EvalResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutcome {
    pub scenes: usize,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentOutcome {
    pub fn result_for(&self, mode: ExperimentMode) -> Option<&EvalResult> {
        self.rows.iter().find(|r| r.mode == mode).map(|r| &r.result)
    }

    /// Aligned plain-text table.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>8} {:>8} {:>8}\n",
            "mode", "AP", "AP50", "AP75"
        ));
        for row in &self.rows {
            let fmt = |v: Option<f64>| match v {
                Some(x) => format!("{x:.4}"),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{:<16} {:>8.4} {:>8} {:>8}\n",
                row.mode.name(),
                row.result.ap,
                fmt(row.result.ap50),
                fmt(row.result.ap75),
            ));
        }
        out
    }
}

/// Build the deterministic corpus for the experiment: `n_scenes` scenes
/// seeded from `base.seed`, degraded with `dspec`.
pub fn build_corpus(base: &SceneSpec, n_scenes: usize) -> Result<Vec<Scene>> {
    if n_scenes == 0 {
        return Err(Error::input("corpus needs at least one scene".to_string()));
    }
    (0..n_scenes)
        .into_par_iter()
        .map(|i| {
            let spec = SceneSpec {
                seed: derive_seed(base.seed, i as u64),
                ..base.clone()
            };
            generate_scene(&spec)
        })
        .collect()
}

/// Evaluate the same degraded predictions under several ranking policies.
/// Ground truth, predictions, matching, and quality pairs are shared;
/// only the ranking scores differ between modes.
pub fn experiment_rerank(
    base: &SceneSpec,
    n_scenes: usize,
    dspec: &DegradeSpec,
    modes: &[ExperimentMode],
    lcfg: &LaplacianConfig,
    dcfg: &DiceConfig,
    thresholds: &[f64],
) -> Result<ExperimentOutcome> {
    let scenes = build_corpus(base, n_scenes)?;
    let per_scene_preds = degrade_scenes(&scenes, dspec)?;

    // Oracle quality pairs per scene, computed once.
    let quality: Vec<Vec<(f64, f64)>> = scenes
        .par_iter()
        .zip(&per_scene_preds)
        .map(|(scene, preds)| {
            let gts: Vec<GtInstance> = scene
                .instances
                .iter()
                .map(|inst| GtInstance {
                    category: inst.category,
                    mask: inst.mask.clone(),
                })
                .collect();
            scoring::oracle_quality_scores(
                preds,
                &gts,
                scoring::ORACLE_MATCH_THRESHOLD,
                lcfg,
                dcfg,
            )
        })
        .collect::<Result<_>>()?;

    let gts: Vec<EvalGt> = scenes
        .iter()
        .enumerate()
        .flat_map(|(i, scene)| {
            scene.instances.iter().map(move |inst| EvalGt {
                image_id: i as u64 + 1,
                category: inst.category,
                mask: inst.mask.clone(),
            })
        })
        .collect();

    let build_preds = |mode: ExperimentMode| -> Result<Vec<EvalPrediction>> {
        let mut out = Vec::new();
        for (i, (preds, pairs)) in per_scene_preds.iter().zip(&quality).enumerate() {
            for (p, &(s_iou, s_boundary)) in preds.iter().zip(pairs) {
                let score = match mode {
                    ExperimentMode::ClassOnly => p.s_class,
                    ExperimentMode::OracleIou => p.s_class * s_iou.sqrt(),
                    ExperimentMode::OracleBoundary => p.s_class * s_boundary.sqrt(),
                    ExperimentMode::OracleFull => p.s_class * (s_iou * s_boundary).sqrt(),
                };
                out.push(EvalPrediction {
                    image_id: i as u64 + 1,
                    category: p.category,
                    mask: p.mask.to_mask()?,
                    score,
                });
            }
        }
        Ok(out)
    };

    let rows = modes
        .iter()
        .map(|&mode| {
            let preds = build_preds(mode)?;
            Ok(ExperimentRow {
                mode,
                result: evaluate_ap(&preds, &gts, thresholds)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutcome {
        scenes: n_scenes,
        rows,
    })
}

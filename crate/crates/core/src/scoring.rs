//! Quality-score targets, the unified mask-score fusion, prediction-to-GT
//! matching, and re-ranking of instance predictions.
//!
//! The ranking score of a prediction fuses its classification confidence
//! with two quality estimates:
//!
//! ```text
//! s_mask = s_class * sqrt(s_iou * s_boundary)
//! ```
//!
//! In oracle mode the quality estimates are computed against matched
//! ground truth, upper-bounding what a learned scorer could achieve;
//! unmatched predictions are suppressed with exact-zero quality.

use crate::boundary::{boundary_score_for_masks, DiceConfig, LaplacianConfig};
use crate::error::{Error, Result};
use crate::mask::{mask_iou, BBox, BinaryMask};
use crate::rle::{self, RleMask};

/// Mask payload of a prediction: either a raster or a run-length encoding.
#[derive(Debug, Clone)]
pub enum MaskRep {
    Raster(BinaryMask),
    Rle(RleMask),
}

impl MaskRep {
    pub fn to_mask(&self) -> Result<BinaryMask> {
        match self {
            MaskRep::Raster(m) => Ok(m.clone()),
            MaskRep::Rle(r) => rle::decode(r),
        }
    }
}

/// One instance prediction. `s_class` lies in [0, 1]; the optional quality
/// scores, when present, lie in [0, 1] (a zero boundary score is the
/// suppressed-prediction sentinel; genuine boundary Dice values are
/// strictly positive).
#[derive(Debug, Clone)]
pub struct InstancePrediction {
    pub category: u64,
    pub bbox: BBox,
    pub mask: MaskRep,
    pub s_class: f64,
    pub s_iou: Option<f64>,
    pub s_boundary: Option<f64>,
}

impl InstancePrediction {
    pub fn new(category: u64, bbox: BBox, mask: MaskRep, s_class: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s_class) {
            return Err(Error::input(format!(
                "s_class = {s_class} outside [0, 1]"
            )));
        }
        Ok(InstancePrediction {
            category,
            bbox,
            mask,
            s_class,
            s_iou: None,
            s_boundary: None,
        })
    }

    pub fn with_quality(mut self, s_iou: f64, s_boundary: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s_iou) {
            return Err(Error::input(format!("s_iou = {s_iou} outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&s_boundary) {
            return Err(Error::input(format!(
                "s_boundary = {s_boundary} outside [0, 1]"
            )));
        }
        self.s_iou = Some(s_iou);
        self.s_boundary = Some(s_boundary);
        Ok(self)
    }
}

/// Ground-truth instance as seen by matching and oracle scoring.
#[derive(Debug, Clone)]
pub struct GtInstance {
    pub category: u64,
    pub mask: BinaryMask,
}

/// The four scores of one instance. `s_mask` always equals
/// `s_class * sqrt(s_iou * s_boundary)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScoreBreakdown {
    pub s_class: f64,
    pub s_iou: f64,
    pub s_boundary: f64,
    pub s_mask: f64,
}

impl ScoreBreakdown {
    /// Breakdown for a suppressed (unmatched-in-oracle) prediction.
    pub fn suppressed(s_class: f64) -> Self {
        ScoreBreakdown {
            s_class,
            s_iou: 0.0,
            s_boundary: 0.0,
            s_mask: 0.0,
        }
    }
}

/// Unified mask score: `s_class * sqrt(s_iou * s_boundary)`.
/// `s_class` and `s_iou` must lie in [0, 1]; `s_boundary` in (0, 1].
pub fn fuse_score(s_class: f64, s_iou: f64, s_boundary: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s_class) {
        return Err(Error::input(format!("s_class = {s_class} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&s_iou) {
        return Err(Error::input(format!("s_iou = {s_iou} outside [0, 1]")));
    }
    if !(s_boundary > 0.0 && s_boundary <= 1.0) {
        return Err(Error::input(format!(
            "s_boundary = {s_boundary} outside (0, 1]"
        )));
    }
    Ok(s_class * (s_iou * s_boundary).sqrt())
}

/// Regression targets for a prediction against its ground-truth mask:
/// crop both to the prediction box, then measure mask IoU and the boundary
/// score at that native box resolution.
pub fn score_targets(
    pred: &InstancePrediction,
    gt_mask: &BinaryMask,
    lcfg: &LaplacianConfig,
    dcfg: &DiceConfig,
) -> Result<(f64, f64)> {
    let pred_mask = pred.mask.to_mask()?;
    if pred_mask.width() != gt_mask.width() || pred_mask.height() != gt_mask.height() {
        return Err(Error::input(format!(
            "score targets dimension mismatch: prediction {}x{} vs ground truth {}x{}",
            pred_mask.width(),
            pred_mask.height(),
            gt_mask.width(),
            gt_mask.height()
        )));
    }
    let pred_crop = pred_mask.crop(&pred.bbox);
    let gt_crop = gt_mask.crop(&pred.bbox);
    let s_iou = mask_iou(&pred_crop, &gt_crop)?;
    let s_boundary = boundary_score_for_masks(&pred_crop, &gt_crop, lcfg, dcfg)?;
    Ok((s_iou, s_boundary))
}

/// [`score_targets`] at a fixed square resolution instead of the native
/// box size: both crops are resized bilinearly and re-binarized at 0.5.
/// Exists for resolution-parity experiments; the native form is primary.
pub fn score_targets_fixed(
    pred: &InstancePrediction,
    gt_mask: &BinaryMask,
    lcfg: &LaplacianConfig,
    dcfg: &DiceConfig,
    resolution: u32,
) -> Result<(f64, f64)> {
    if resolution == 0 {
        return Err(Error::input("resolution must be at least 1".to_string()));
    }
    let pred_mask = pred.mask.to_mask()?;
    if pred_mask.width() != gt_mask.width() || pred_mask.height() != gt_mask.height() {
        return Err(Error::input(format!(
            "score targets dimension mismatch: prediction {}x{} vs ground truth {}x{}",
            pred_mask.width(),
            pred_mask.height(),
            gt_mask.width(),
            gt_mask.height()
        )));
    }
    let res = resolution as usize;
    let to_fixed = |m: &BinaryMask| -> BinaryMask {
        m.crop(&pred.bbox)
            .to_soft()
            .resize_bilinear(res, res)
            .threshold(0.5)
    };
    let pred_crop = to_fixed(&pred_mask);
    let gt_crop = to_fixed(gt_mask);
    let s_iou = mask_iou(&pred_crop, &gt_crop)?;
    let s_boundary = boundary_score_for_masks(&pred_crop, &gt_crop, lcfg, dcfg)?;
    Ok((s_iou, s_boundary))
}

/// Greedy category-wise matching. Predictions are processed in the order
/// given (callers sort by descending ranking score first); each one takes
/// the unmatched same-category ground truth of highest full-mask IoU,
/// provided that IoU reaches the threshold. Ties break toward the lower
/// ground-truth index. Returns, per prediction, the matched GT index.
pub fn match_predictions_to_gt(
    preds: &[InstancePrediction],
    gts: &[GtInstance],
    iou_threshold: f64,
) -> Result<Vec<Option<usize>>> {
    let pred_masks: Vec<BinaryMask> = preds
        .iter()
        .map(|p| p.mask.to_mask())
        .collect::<Result<_>>()?;
    let mut taken = vec![false; gts.len()];
    let mut matches = Vec::with_capacity(preds.len());
    for (pred, pred_mask) in preds.iter().zip(&pred_masks) {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if taken[gi] || gt.category != pred.category {
                continue;
            }
            let iou = mask_iou(pred_mask, &gt.mask)?;
            if iou < iou_threshold {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, best_iou)) => iou > best_iou,
            };
            if better {
                best = Some((gi, iou));
            }
        }
        if let Some((gi, _)) = best {
            taken[gi] = true;
            matches.push(Some(gi));
        } else {
            matches.push(None);
        }
    }
    Ok(matches)
}

/// Default IoU threshold for oracle matching.
pub const ORACLE_MATCH_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RerankMode {
    /// Rank by the classification score alone.
    ClassOnly,
    /// Rank by the fused score with quality computed against matched
    /// ground truth.
    Oracle,
    /// Rank by the fused score using the quality fields already present
    /// on every prediction.
    External,
}

/// A prediction with its post-ranking score. `source_index` is the
/// position in the input list and serves as the final sort tiebreaker.
#[derive(Debug, Clone)]
pub struct RankedPrediction {
    pub prediction: InstancePrediction,
    pub breakdown: Option<ScoreBreakdown>,
    pub ranking_score: f64,
    pub source_index: usize,
}

/// Per-prediction oracle quality pairs `(s_iou, s_boundary)`. Predictions
/// are matched in descending `s_class` order at `iou_threshold`; unmatched
/// predictions get exact-zero quality. The result is indexed like `preds`.
pub fn oracle_quality_scores(
    preds: &[InstancePrediction],
    gts: &[GtInstance],
    iou_threshold: f64,
    lcfg: &LaplacianConfig,
    dcfg: &DiceConfig,
) -> Result<Vec<(f64, f64)>> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .s_class
            .partial_cmp(&preds[a].s_class)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let sorted: Vec<InstancePrediction> = order.iter().map(|&i| preds[i].clone()).collect();
    let matched = match_predictions_to_gt(&sorted, gts, iou_threshold)?;
    let mut out = vec![(0.0, 0.0); preds.len()];
    for (slot, (pred, gt_idx)) in order.iter().zip(sorted.iter().zip(&matched)) {
        if let Some(gi) = gt_idx {
            out[*slot] = score_targets(pred, &gts[*gi].mask, lcfg, dcfg)?;
        }
    }
    Ok(out)
}

/// Re-rank predictions. The output is sorted by descending ranking score,
/// stable, with the source index as the final tiebreaker; masks and boxes
/// are never altered.
pub fn rerank(
    preds: &[InstancePrediction],
    gts: Option<&[GtInstance]>,
    mode: RerankMode,
    lcfg: &LaplacianConfig,
    dcfg: &DiceConfig,
) -> Result<Vec<RankedPrediction>> {
    let mut ranked: Vec<RankedPrediction> = match mode {
        RerankMode::ClassOnly => preds
            .iter()
            .enumerate()
            .map(|(i, p)| RankedPrediction {
                prediction: p.clone(),
                breakdown: None,
                ranking_score: p.s_class,
                source_index: i,
            })
            .collect(),
        RerankMode::Oracle => {
            let gts = gts.ok_or_else(|| {
                Error::input("oracle re-ranking requires ground-truth instances".to_string())
            })?;
            let quality =
                oracle_quality_scores(preds, gts, ORACLE_MATCH_THRESHOLD, lcfg, dcfg)?;
            preds
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let (s_iou, s_boundary) = quality[i];
                    let breakdown = if s_iou == 0.0 && s_boundary == 0.0 {
                        ScoreBreakdown::suppressed(p.s_class)
                    } else {
                        ScoreBreakdown {
                            s_class: p.s_class,
                            s_iou,
                            s_boundary,
                            s_mask: fuse_score(p.s_class, s_iou, s_boundary)?,
                        }
                    };
                    Ok(RankedPrediction {
                        prediction: p.clone(),
                        breakdown: Some(breakdown),
                        ranking_score: breakdown.s_mask,
                        source_index: i,
                    })
                })
                .collect::<Result<_>>()?
        }
        RerankMode::External => preds
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let s_iou = p.s_iou.ok_or_else(|| {
                    Error::input(format!("prediction {i} is missing s_iou"))
                })?;
                let s_boundary = p.s_boundary.ok_or_else(|| {
                    Error::input(format!("prediction {i} is missing s_boundary"))
                })?;
                let breakdown = if s_iou == 0.0 && s_boundary == 0.0 {
                    ScoreBreakdown::suppressed(p.s_class)
                } else {
                    ScoreBreakdown {
                        s_class: p.s_class,
                        s_iou,
                        s_boundary,
                        s_mask: fuse_score(p.s_class, s_iou, s_boundary)
                            .map_err(|e| Error::input(format!("prediction {i}: {e}")))?,
                    }
                };
                Ok(RankedPrediction {
                    prediction: p.clone(),
                    breakdown: Some(breakdown),
                    ranking_score: breakdown.s_mask,
                    source_index: i,
                })
            })
            .collect::<Result<_>>()?,
    };
    ranked.sort_by(|a, b| {
        b.ranking_score
            .partial_cmp(&a.ranking_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.source_index.cmp(&b.source_index))
    });
    Ok(ranked)
}

//! Laplacian filtering, boundary extraction from masks, and the boundary
//! Dice score.
//!
//! Boundaries come from a discrete Laplacian (4-neighbor stencil by
//! default, 8-neighbor available) with zero padding outside the image,
//! thresholded on the absolute response. The Dice score between two
//! boundary maps is
//!
//! ```text
//! (2 * sum(a_i * b_i) + eps) / (sum(a_i^2) + sum(b_i^2) + eps)
//! ```
//!
//! with a positive smoothing epsilon so identical inputs (including two
//! empty maps) score exactly 1 and the score never divides by zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, SoftMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

/// Laplacian stencil selection. Padding is always zero outside the image,
/// so objects touching the border contribute border boundary identically
/// for prediction and ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LaplacianConfig {
    pub connectivity: Connectivity,
}

/// Smoothing term for the boundary Dice score. Must be positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiceConfig {
    epsilon: f64,
}

impl DiceConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon <= 0.0 || !epsilon.is_finite() {
            return Err(Error::input(format!(
                "dice epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(DiceConfig { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for DiceConfig {
    fn default() -> Self {
        DiceConfig { epsilon: 1.0 }
    }
}

/// Offsets and center weight of the two stencils. The neighbor weight is
/// +1 in both, the center weight the negated neighbor count, so every
/// stencil's coefficients sum to zero.
fn stencil(connectivity: Connectivity) -> (&'static [(i64, i64)], f64) {
    const FOUR: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    const EIGHT: [(i64, i64); 8] = [
        (-1, -1),
        (-1, 0),
        (-1, 1),
        (0, -1),
        (0, 1),
        (1, -1),
        (1, 0),
        (1, 1),
    ];
    match connectivity {
        Connectivity::Four => (&FOUR, -4.0),
        Connectivity::Eight => (&EIGHT, -8.0),
    }
}

/// Discrete Laplacian of a real-valued map, zero padded, same output size.
pub fn laplacian(map: &SoftMap, cfg: &LaplacianConfig) -> SoftMap {
    let (offsets, center) = stencil(cfg.connectivity);
    let w = map.width();
    let h = map.height();
    SoftMap::from_fn(w, h, |r, c| {
        let mut acc = center * map.get(r, c);
        for &(dr, dc) in offsets {
            let rr = r as i64 + dr;
            let cc = c as i64 + dc;
            if rr >= 0 && rr < h as i64 && cc >= 0 && cc < w as i64 {
                acc += map.get(rr as usize, cc as usize);
            }
        }
        acc
    })
}

/// Laplacian of a binary mask, computed in integer arithmetic.
pub fn laplacian_mask(mask: &BinaryMask, cfg: &LaplacianConfig) -> SoftMap {
    let (offsets, center) = stencil(cfg.connectivity);
    let w = mask.width();
    let h = mask.height();
    SoftMap::from_fn(w, h, |r, c| {
        let mut acc = center as i64 * mask.get(r, c) as i64;
        for &(dr, dc) in offsets {
            let rr = r as i64 + dr;
            let cc = c as i64 + dc;
            if rr >= 0 && rr < h as i64 && cc >= 0 && cc < w as i64 {
                acc += mask.get(rr as usize, cc as usize) as i64;
            }
        }
        acc as f64
    })
}

/// Binary boundary of a mask: pixels where the Laplacian response is
/// nonzero in absolute value. Zero padding makes objects touching the
/// image border produce a border boundary.
pub fn extract_boundary(mask: &BinaryMask, cfg: &LaplacianConfig) -> BinaryMask {
    let response = laplacian_mask(mask, cfg);
    let w = mask.width();
    let h = mask.height();
    BinaryMask::from_fn(w, h, |r, c| response.get(r, c) != 0.0)
}

/// Boundary Dice score between two boundary maps of equal size.
/// Symmetric, in (0, 1] for positive epsilon, exactly 1 for identical
/// inputs.
pub fn boundary_dice(b_pred: &SoftMap, b_gt: &SoftMap, cfg: &DiceConfig) -> Result<f64> {
    if b_pred.width() != b_gt.width() || b_pred.height() != b_gt.height() {
        return Err(Error::input(format!(
            "boundary dice dimension mismatch: {}x{} vs {}x{}",
            b_pred.width(),
            b_pred.height(),
            b_gt.width(),
            b_gt.height()
        )));
    }
    let mut cross = 0.0;
    let mut sq_pred = 0.0;
    let mut sq_gt = 0.0;
    for (&a, &b) in b_pred.data().iter().zip(b_gt.data()) {
        cross += a * b;
        sq_pred += a * a;
        sq_gt += b * b;
    }
    let eps = cfg.epsilon();
    Ok((2.0 * cross + eps) / (sq_pred + sq_gt + eps))
}

/// [`boundary_dice`] on binary boundary maps.
pub fn boundary_dice_binary(a: &BinaryMask, b: &BinaryMask, cfg: &DiceConfig) -> Result<f64> {
    boundary_dice(&a.to_soft(), &b.to_soft(), cfg)
}

/// Full boundary-quality pipeline for a mask pair: extract both
/// boundaries, then score them with the boundary Dice.
pub fn boundary_score_for_masks(
    m_pred: &BinaryMask,
    m_gt: &BinaryMask,
    lcfg: &LaplacianConfig,
    dcfg: &DiceConfig,
) -> Result<f64> {
    if m_pred.width() != m_gt.width() || m_pred.height() != m_gt.height() {
        return Err(Error::input(format!(
            "boundary score dimension mismatch: {}x{} vs {}x{}",
            m_pred.width(),
            m_pred.height(),
            m_gt.width(),
            m_gt.height()
        )));
    }
    boundary_dice_binary(
        &extract_boundary(m_pred, lcfg),
        &extract_boundary(m_gt, lcfg),
        dcfg,
    )
}

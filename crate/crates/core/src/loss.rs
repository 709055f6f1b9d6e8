//! Differentiable scalar objectives with analytic gradients, plus a
//! finite-difference checker that validates every gradient path.
//!
//! All losses are nonnegative, reach 0 at a perfect prediction, and return
//! both the value and the gradient with respect to the prediction.

use crate::boundary::{extract_boundary, laplacian, LaplacianConfig};
use crate::error::{Error, Result};
use crate::mask::{BinaryMask, SoftMap};

/// Loss value plus its gradient with respect to the prediction raster.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub value: f64,
    pub gradient: SoftMap,
}

/// Loss value plus its gradient for a two-component prediction.
#[derive(Debug, Clone, Copy)]
pub struct PairLossReport {
    pub value: f64,
    pub gradient: [f64; 2],
}

/// Relative weights of the three map-objective terms. All nonnegative;
/// defaults are 1:1:1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    pub w_bce: f64,
    pub w_dice: f64,
    pub w_boundary: f64,
}

impl ObjectiveWeights {
    pub fn new(w_bce: f64, w_dice: f64, w_boundary: f64) -> Result<Self> {
        for (name, v) in [("w_bce", w_bce), ("w_dice", w_dice), ("w_boundary", w_boundary)] {
            if v.is_nan() || v < 0.0 || !v.is_finite() {
                return Err(Error::input(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        Ok(ObjectiveWeights {
            w_bce,
            w_dice,
            w_boundary,
        })
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            w_bce: 1.0,
            w_dice: 1.0,
            w_boundary: 1.0,
        }
    }
}

fn check_shapes(pred_w: usize, pred_h: usize, gt: &BinaryMask, what: &str) -> Result<()> {
    if pred_w != gt.width() || pred_h != gt.height() {
        return Err(Error::input(format!(
            "{what} shape mismatch: prediction {}x{} vs target {}x{}",
            pred_w,
            pred_h,
            gt.width(),
            gt.height()
        )));
    }
    Ok(())
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy over logits, in the numerically stable form
/// `max(z, 0) - z*g + ln(1 + exp(-|z|))`. Gradient: `(sigmoid(z) - g) / N`.
pub fn bce_loss(pred_logits: &SoftMap, gt: &BinaryMask) -> Result<LossReport> {
    check_shapes(pred_logits.width(), pred_logits.height(), gt, "bce")?;
    let n = pred_logits.data().len() as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(pred_logits.data().len());
    for (&z, &g) in pred_logits.data().iter().zip(gt.data()) {
        let g = g as f64;
        total += z.max(0.0) - z * g + (-z.abs()).exp().ln_1p();
        grad.push((sigmoid(z) - g) / n);
    }
    Ok(LossReport {
        value: total / n,
        gradient: SoftMap::new(pred_logits.width(), pred_logits.height(), grad)?,
    })
}

/// Dice loss `1 - (2*sum(p*g) + eps) / (sum(p^2) + sum(g^2) + eps)` over
/// probabilities in [0, 1]. The gradient follows from the quotient rule.
pub fn dice_loss(pred_probs: &SoftMap, gt: &BinaryMask, epsilon: f64) -> Result<LossReport> {
    check_shapes(pred_probs.width(), pred_probs.height(), gt, "dice")?;
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::input(format!(
            "dice epsilon must be positive, got {epsilon}"
        )));
    }
    if let Some(bad) = pred_probs.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::input(format!(
            "dice prediction value {bad} outside [0, 1]"
        )));
    }
    let report = dice_on_values(pred_probs, &gt.to_soft(), epsilon)?;
    Ok(report)
}

/// Dice loss over two real rasters; the target is treated as a constant.
fn dice_on_values(pred: &SoftMap, target: &SoftMap, epsilon: f64) -> Result<LossReport> {
    let mut cross = 0.0;
    let mut sq_p = 0.0;
    let mut sq_t = 0.0;
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        cross += p * t;
        sq_p += p * p;
        sq_t += t * t;
    }
    let numer = 2.0 * cross + epsilon;
    let denom = sq_p + sq_t + epsilon;
    let value = 1.0 - numer / denom;
    let grad: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (2.0 * numer * p - 2.0 * denom * t) / (denom * denom))
        .collect();
    Ok(LossReport {
        value,
        gradient: SoftMap::new(pred.width(), pred.height(), grad)?,
    })
}

/// Edge-sharpness loss: Dice between the absolute Laplacian response of
/// the prediction and the binary boundary of the target mask. The gradient
/// composes the Dice gradient with the sign of the response and the
/// (self-adjoint) Laplacian; at a response of exactly 0 the subgradient 0
/// is used.
pub fn boundary_loss(
    pred_probs: &SoftMap,
    gt: &BinaryMask,
    lcfg: &LaplacianConfig,
    epsilon: f64,
) -> Result<LossReport> {
    check_shapes(pred_probs.width(), pred_probs.height(), gt, "boundary loss")?;
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::input(format!(
            "boundary loss epsilon must be positive, got {epsilon}"
        )));
    }
    let response = laplacian(pred_probs, lcfg);
    let soft_boundary = SoftMap::from_fn(response.width(), response.height(), |r, c| {
        response.get(r, c).abs()
    });
    let target = extract_boundary(gt, lcfg).to_soft();
    let dice = dice_on_values(&soft_boundary, &target, epsilon)?;

    // d|q|/dq = sign(q), 0 at the kink; the zero-padded Laplacian is its
    // own transpose, so the chain closes with one more Laplacian pass.
    let signed = SoftMap::from_fn(response.width(), response.height(), |r, c| {
        let q = response.get(r, c);
        let s = if q > 0.0 {
            1.0
        } else if q < 0.0 {
            -1.0
        } else {
            0.0
        };
        s * dice.gradient.get(r, c)
    });
    let gradient = laplacian(&signed, lcfg);
    Ok(LossReport {
        value: dice.value,
        gradient,
    })
}

/// Combined map objective on logits:
/// `w_bce * bce(z, gt) + w_dice * dice(sigmoid(z), gt) + w_boundary *
/// boundary(sigmoid(z), boundary_gt)`. The gradient is the weighted sum,
/// chained through the sigmoid where the term consumes probabilities.
pub fn basis_objective(
    pred_logits: &SoftMap,
    gt: &BinaryMask,
    boundary_gt: &BinaryMask,
    weights: &ObjectiveWeights,
    lcfg: &LaplacianConfig,
    epsilon: f64,
) -> Result<LossReport> {
    check_shapes(pred_logits.width(), pred_logits.height(), gt, "objective")?;
    check_shapes(
        pred_logits.width(),
        pred_logits.height(),
        boundary_gt,
        "objective boundary target",
    )?;
    let w = pred_logits.width();
    let h = pred_logits.height();
    let probs = SoftMap::from_fn(w, h, |r, c| sigmoid(pred_logits.get(r, c)));

    let mut value = 0.0;
    let mut grad = vec![0.0; w * h];

    if weights.w_bce != 0.0 {
        let bce = bce_loss(pred_logits, gt)?;
        value += weights.w_bce * bce.value;
        for (acc, &g) in grad.iter_mut().zip(bce.gradient.data()) {
            *acc += weights.w_bce * g;
        }
    }

    // Gradients of the probability-space terms, chained through sigmoid'.
    let mut prob_grad = vec![0.0; w * h];
    let mut any_prob_term = false;
    if weights.w_dice != 0.0 {
        let dice = dice_loss(&probs, gt, epsilon)?;
        value += weights.w_dice * dice.value;
        for (acc, &g) in prob_grad.iter_mut().zip(dice.gradient.data()) {
            *acc += weights.w_dice * g;
        }
        any_prob_term = true;
    }
    if weights.w_boundary != 0.0 {
        let bnd = boundary_loss(&probs, boundary_gt, lcfg, epsilon)?;
        value += weights.w_boundary * bnd.value;
        for (acc, &g) in prob_grad.iter_mut().zip(bnd.gradient.data()) {
            *acc += weights.w_boundary * g;
        }
        any_prob_term = true;
    }
    if any_prob_term {
        for (i, acc) in grad.iter_mut().enumerate() {
            let p = probs.data()[i];
            *acc += prob_grad[i] * p * (1.0 - p);
        }
    }

    Ok(LossReport {
        value,
        gradient: SoftMap::new(w, h, grad)?,
    })
}

/// L2 regression loss for a (quality, boundary-quality) score pair:
/// `((dq)^2 + (db)^2) / 2`, gradient `(dq, db)`. All four values must lie
/// in [0, 1].
pub fn scoring_regression_loss(pred: (f64, f64), target: (f64, f64)) -> Result<PairLossReport> {
    for (name, v) in [
        ("pred.0", pred.0),
        ("pred.1", pred.1),
        ("target.0", target.0),
        ("target.1", target.1),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::input(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let d0 = pred.0 - target.0;
    let d1 = pred.1 - target.1;
    Ok(PairLossReport {
        value: (d0 * d0 + d1 * d1) / 2.0,
        gradient: [d0, d1],
    })
}

pub mod gradcheck {
    //! Central finite-difference verification of the analytic gradients.
    //!
    //! The checker re-evaluates only loss *values* at perturbed inputs, so
    //! it is independent of every analytic-gradient code path. For the
    //! boundary loss, pixels whose stencil neighborhood sits within the
    //! step size of the |x| kink are skipped.

    use super::*;
    use crate::rng::SplitMix64;

    pub const DEFAULT_STEP: f64 = 1e-4;
    pub const DEFAULT_TOLERANCE: f64 = 1e-4;

    #[derive(Debug, Clone, serde::Serialize)]
    pub struct GradCheckReport {
        pub loss: String,
        pub trials: usize,
        pub checked_components: usize,
        pub skipped_components: usize,
        pub max_rel_error: f64,
    }

    fn rel_error(a: f64, b: f64) -> f64 {
        let denom = a.abs().max(b.abs());
        if denom < 1e-12 {
            0.0
        } else {
            (a - b).abs() / denom
        }
    }

    fn random_mask(rng: &mut SplitMix64, side: usize) -> BinaryMask {
        BinaryMask::from_fn(side, side, |_, _| rng.next_below(2) == 1)
    }

    fn random_map(rng: &mut SplitMix64, side: usize, lo: f64, hi: f64) -> SoftMap {
        SoftMap::from_fn(side, side, |_, _| lo + rng.next_f64() * (hi - lo))
    }

    /// Generic per-pixel central-difference check for a map loss.
    fn check_map_loss(
        mut pred: SoftMap,
        analytic: &SoftMap,
        step: f64,
        skip: impl Fn(usize, usize) -> bool,
        eval: impl Fn(&SoftMap) -> f64,
        report: &mut GradCheckReport,
    ) {
        let (w, h) = (pred.width(), pred.height());
        for r in 0..h {
            for c in 0..w {
                if skip(r, c) {
                    report.skipped_components += 1;
                    continue;
                }
                let orig = pred.get(r, c);
                pred.set(r, c, orig + step);
                let plus = eval(&pred);
                pred.set(r, c, orig - step);
                let minus = eval(&pred);
                pred.set(r, c, orig);
                let fd = (plus - minus) / (2.0 * step);
                let err = rel_error(analytic.get(r, c), fd);
                report.checked_components += 1;
                if err > report.max_rel_error {
                    report.max_rel_error = err;
                }
            }
        }
    }

    pub fn check_bce(seed: u64, trials: usize, side: usize, step: f64) -> GradCheckReport {
        let mut rng = SplitMix64::new(seed);
        let mut report = GradCheckReport {
            loss: "bce".to_string(),
            trials,
            checked_components: 0,
            skipped_components: 0,
            max_rel_error: 0.0,
        };
        for _ in 0..trials {
            let gt = random_mask(&mut rng, side);
            let logits = random_map(&mut rng, side, -3.0, 3.0);
            let analytic = bce_loss(&logits, &gt).unwrap().gradient;
            check_map_loss(
                logits,
                &analytic,
                step,
                |_, _| false,
                |p| bce_loss(p, &gt).unwrap().value,
                &mut report,
            );
        }
        report
    }

    pub fn check_dice(seed: u64, trials: usize, side: usize, step: f64) -> GradCheckReport {
        let mut rng = SplitMix64::new(seed);
        let mut report = GradCheckReport {
            loss: "dice".to_string(),
            trials,
            checked_components: 0,
            skipped_components: 0,
            max_rel_error: 0.0,
        };
        for _ in 0..trials {
            let gt = random_mask(&mut rng, side);
            // Stay inside [0,1] under +-step perturbation.
            let probs = random_map(&mut rng, side, 0.01, 0.99);
            let analytic = dice_loss(&probs, &gt, 1.0).unwrap().gradient;
            check_map_loss(
                probs,
                &analytic,
                step,
                |_, _| false,
                |p| dice_loss(p, &gt, 1.0).unwrap().value,
                &mut report,
            );
        }
        report
    }

    pub fn check_boundary(
        seed: u64,
        trials: usize,
        side: usize,
        step: f64,
        lcfg: &LaplacianConfig,
    ) -> GradCheckReport {
        let mut rng = SplitMix64::new(seed);
        let mut report = GradCheckReport {
            loss: "boundary".to_string(),
            trials,
            checked_components: 0,
            skipped_components: 0,
            max_rel_error: 0.0,
        };
        for _ in 0..trials {
            let gt = random_mask(&mut rng, side);
            let probs = random_map(&mut rng, side, 0.01, 0.99);
            let analytic = boundary_loss(&probs, &gt, lcfg, 1.0).unwrap().gradient;
            let response = laplacian(&probs, lcfg);
            // Perturbing pixel (r,c) by h moves each response in its
            // stencil by at most |center| * h; stay clear of sign flips.
            let margin = 16.0 * step;
            let near_kink = |r: usize, c: usize| -> bool {
                let (h, w) = (response.height() as i64, response.width() as i64);
                for (dr, dc) in [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
                    let rr = r as i64 + dr;
                    let cc = c as i64 + dc;
                    if rr >= 0 && rr < h && cc >= 0 && cc < w
                        && response.get(rr as usize, cc as usize).abs() <= margin
                    {
                        return true;
                    }
                }
                false
            };
            check_map_loss(
                probs,
                &analytic,
                step,
                near_kink,
                |p| boundary_loss(p, &gt, lcfg, 1.0).unwrap().value,
                &mut report,
            );
        }
        report
    }

    pub fn check_objective(
        seed: u64,
        trials: usize,
        side: usize,
        step: f64,
        weights: &ObjectiveWeights,
        lcfg: &LaplacianConfig,
    ) -> GradCheckReport {
        let mut rng = SplitMix64::new(seed);
        let mut report = GradCheckReport {
            loss: "objective".to_string(),
            trials,
            checked_components: 0,
            skipped_components: 0,
            max_rel_error: 0.0,
        };
        for _ in 0..trials {
            let gt = random_mask(&mut rng, side);
            let boundary_gt = random_mask(&mut rng, side);
            let logits = random_map(&mut rng, side, -2.0, 2.0);
            let analytic = basis_objective(&logits, &gt, &boundary_gt, weights, lcfg, 1.0)
                .unwrap()
                .gradient;
            // The |Laplacian| kink lives in probability space; map the
            // sigmoid of the logits through the same guard as the plain
            // boundary check.
            let probs = SoftMap::from_fn(side, side, |r, c| sigmoid(logits.get(r, c)));
            let response = laplacian(&probs, lcfg);
            let margin = 16.0 * step;
            let near_kink = |r: usize, c: usize| -> bool {
                let (h, w) = (side as i64, side as i64);
                for (dr, dc) in [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)] {
                    let rr = r as i64 + dr;
                    let cc = c as i64 + dc;
                    if rr >= 0 && rr < h && cc >= 0 && cc < w
                        && response.get(rr as usize, cc as usize).abs() <= margin
                    {
                        return true;
                    }
                }
                false
            };
            check_map_loss(
                logits,
                &analytic,
                step,
                near_kink,
                |z| {
                    basis_objective(z, &gt, &boundary_gt, weights, lcfg, 1.0)
                        .unwrap()
                        .value
                },
                &mut report,
            );
        }
        report
    }

    pub fn check_scoring_regression(seed: u64, trials: usize, step: f64) -> GradCheckReport {
        let mut rng = SplitMix64::new(seed);
        let mut report = GradCheckReport {
            loss: "scoring_regression".to_string(),
            trials,
            checked_components: 0,
            skipped_components: 0,
            max_rel_error: 0.0,
        };
        for _ in 0..trials {
            let pred = (
                0.01 + rng.next_f64() * 0.98,
                0.01 + rng.next_f64() * 0.98,
            );
            let target = (rng.next_f64(), rng.next_f64());
            let analytic = scoring_regression_loss(pred, target).unwrap().gradient;
            #[allow(clippy::needless_range_loop)]
            for i in 0..2 {
                let mut plus = pred;
                let mut minus = pred;
                if i == 0 {
                    plus.0 += step;
                    minus.0 -= step;
                } else {
                    plus.1 += step;
                    minus.1 -= step;
                }
                let fd = (scoring_regression_loss(plus, target).unwrap().value
                    - scoring_regression_loss(minus, target).unwrap().value)
                    / (2.0 * step);
                let err = rel_error(analytic[i], fd);
                report.checked_components += 1;
                if err > report.max_rel_error {
                    report.max_rel_error = err;
                }
            }
        }
        report
    }

    /// Run all five checks with shared settings.
    pub fn check_all(seed: u64, trials: usize, side: usize, step: f64) -> Vec<GradCheckReport> {
        let lcfg = LaplacianConfig::default();
        let weights = ObjectiveWeights::default();
        vec![
            check_bce(seed, trials, side, step),
            check_dice(crate::rng::derive_seed(seed, 1), trials, side, step),
            check_boundary(crate::rng::derive_seed(seed, 2), trials, side, step, &lcfg),
            check_objective(
                crate::rng::derive_seed(seed, 3),
                trials,
                side,
                step,
                &weights,
                &lcfg,
            ),
            check_scoring_regression(crate::rng::derive_seed(seed, 4), trials, step),
        ]
    }
}

//! Implementations behind the subcommands. Every command is idempotent:
//! identical inputs, flags, and seeds produce byte-identical outputs, and
//! no command mutates its inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use bmq_core::boundary::extract_boundary;
use bmq_core::coco::{
    read_gt_json, read_predictions_json, write_json_pretty, GtDataset, PredictionRecord,
};
use bmq_core::error::Error;
use bmq_core::eval::{
    eval_inputs_from_coco, evaluate_ap, experiment_rerank, ExperimentMode,
};
use bmq_core::loss::gradcheck;
use bmq_core::mask::BBox;
use bmq_core::scoring::{self, fuse_score, GtInstance, InstancePrediction};
use bmq_core::synth::{
    degrade_scenes, predictions_to_records, scenes_to_gt_dataset, DegradeSpec, SceneSpec,
};
use bmq_core::{blend, formats};

use crate::config::Config;
use crate::{CliError, RankMode, ScoreMode};

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError {
        code: 2,
        message: format!("output directory {}: {e}", dir.display()),
    })
}

fn image_dims(gt: &GtDataset) -> BTreeMap<u64, (usize, usize)> {
    gt.images
        .iter()
        .map(|img| (img.id, (img.width as usize, img.height as usize)))
        .collect()
}

/// Extract a boundary mask per annotation and write one B2M1 file each.
pub fn cmd_boundary(gt_path: &Path, out_dir: &Path, cfg: &Config) -> Result<(), CliError> {
    let gt = read_gt_json(gt_path)?;
    ensure_dir(out_dir)?;
    let dims = image_dims(&gt);
    let lcfg = cfg.laplacian();
    let mut written = 0usize;
    for ann in &gt.annotations {
        let &(w, h) = dims.get(&ann.image_id).ok_or_else(|| CliError {
            code: 3,
            message: format!(
                "annotation {} references unknown image {}",
                ann.id, ann.image_id
            ),
        })?;
        let mask = ann.segmentation.to_mask(w, h).map_err(|e| CliError {
            code: CliError::from(&e).code,
            message: format!("annotation {}: {e}", ann.id),
        })?;
        let boundary = extract_boundary(&mask, &lcfg);
        let path = out_dir.join(format!("boundary_{:06}.b2m1", ann.id));
        let mut file = fs::File::create(&path).map_err(|e| CliError {
            code: 2,
            message: format!("{}: {e}", path.display()),
        })?;
        formats::write_mask(&boundary, &mut file)?;
        written += 1;
    }
    println!("wrote {written} boundary masks to {}", out_dir.display());
    Ok(())
}

/// Augment predictions with quality scores. Oracle mode computes them
/// against matched ground truth; external mode fuses the fields already
/// present. Input order is preserved.
pub fn cmd_score(
    pred_path: &Path,
    gt_path: Option<&Path>,
    mode: ScoreMode,
    out_path: &Path,
    cfg: &Config,
) -> Result<(), CliError> {
    let mut records = read_predictions_json(pred_path)?;
    match mode {
        ScoreMode::External => {
            for (i, rec) in records.iter_mut().enumerate() {
                let s_iou = rec.s_iou.ok_or_else(|| CliError {
                    code: 4,
                    message: format!("prediction {i} is missing s_iou"),
                })?;
                let s_boundary = rec.s_boundary.ok_or_else(|| CliError {
                    code: 4,
                    message: format!("prediction {i} is missing s_boundary"),
                })?;
                rec.s_mask = Some(fused_or_suppressed(rec.score, s_iou, s_boundary)
                    .map_err(|e| CliError {
                        code: 4,
                        message: format!("prediction {i}: {e}"),
                    })?);
            }
        }
        ScoreMode::Oracle => {
            let gt_path = gt_path.ok_or_else(|| CliError {
                code: 4,
                message: "oracle scoring requires --gt".to_string(),
            })?;
            let gt = read_gt_json(gt_path)?;
            score_records_oracle(&mut records, &gt, cfg)?;
        }
    }
    write_json_pretty(&records, out_path)?;
    println!(
        "scored {} predictions ({}) -> {}",
        records.len(),
        match mode {
            ScoreMode::Oracle => "oracle",
            ScoreMode::External => "external",
        },
        out_path.display()
    );
    Ok(())
}

/// Score fusion with the suppressed-prediction convention: exact zeros
/// for both quality scores mean a zero mask score.
fn fused_or_suppressed(s_class: f64, s_iou: f64, s_boundary: f64) -> Result<f64, Error> {
    if s_iou == 0.0 && s_boundary == 0.0 {
        Ok(0.0)
    } else {
        fuse_score(s_class, s_iou, s_boundary)
    }
}

/// Fill s_iou / s_boundary / s_mask on every record from oracle matching,
/// image by image (parallel, merged back in input order).
fn score_records_oracle(
    records: &mut [PredictionRecord],
    gt: &GtDataset,
    cfg: &Config,
) -> Result<(), CliError> {
    use rayon::prelude::*;

    let dims = image_dims(gt);
    let lcfg = cfg.laplacian();
    let dcfg = cfg.dice()?;

    let mut by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        by_image.entry(rec.image_id).or_default().push(i);
    }

    let mut gt_by_image: BTreeMap<u64, Vec<&bmq_core::coco::GtAnnotation>> = BTreeMap::new();
    for ann in &gt.annotations {
        gt_by_image.entry(ann.image_id).or_default().push(ann);
    }

    type ScoredRows = Vec<(Vec<usize>, Vec<(f64, f64, f64)>)>;
    let images: Vec<(u64, Vec<usize>)> = by_image.into_iter().collect();
    let scored: ScoredRows = images
        .par_iter()
        .map(|(image_id, indices)| -> Result<_, CliError> {
            let &(w, h) = dims.get(image_id).ok_or_else(|| CliError {
                code: 3,
                message: format!("prediction references unknown image {image_id}"),
            })?;
            let preds: Vec<InstancePrediction> = indices
                .iter()
                .map(|&i| {
                    records[i].to_instance(w, h).map_err(|e| CliError {
                        code: CliError::from(&e).code,
                        message: format!("prediction {i}: {e}"),
                    })
                })
                .collect::<Result<_, CliError>>()?;
            let gts: Vec<GtInstance> = gt_by_image
                .get(image_id)
                .map(|anns| {
                    anns.iter()
                        .map(|ann| {
                            Ok(GtInstance {
                                category: ann.category_id,
                                mask: ann.segmentation.to_mask(w, h).map_err(|e| CliError {
                                    code: CliError::from(&e).code,
                                    message: format!("annotation {}: {e}", ann.id),
                                })?,
                            })
                        })
                        .collect::<Result<Vec<_>, CliError>>()
                })
                .transpose()?
                .unwrap_or_default();
            let quality = scoring::oracle_quality_scores(
                &preds,
                &gts,
                scoring::ORACLE_MATCH_THRESHOLD,
                &lcfg,
                &dcfg,
            )?;
            let rows = preds
                .iter()
                .zip(&quality)
                .map(|(p, &(s_iou, s_boundary))| {
                    Ok((
                        s_iou,
                        s_boundary,
                        fused_or_suppressed(p.s_class, s_iou, s_boundary)?,
                    ))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            Ok((indices.clone(), rows))
        })
        .collect::<Result<_, CliError>>()?;

    for (indices, rows) in scored {
        for (&i, &(s_iou, s_boundary, s_mask)) in indices.iter().zip(&rows) {
            records[i].s_iou = Some(s_iou);
            records[i].s_boundary = Some(s_boundary);
            records[i].s_mask = Some(s_mask);
        }
    }
    Ok(())
}

/// Score (when needed) and reorder predictions by descending ranking
/// score, stable with the input index as tiebreaker.
pub fn cmd_rerank(
    pred_path: &Path,
    gt_path: Option<&Path>,
    mode: RankMode,
    out_path: &Path,
    cfg: &Config,
) -> Result<(), CliError> {
    let mut records = read_predictions_json(pred_path)?;
    match mode {
        RankMode::ClassOnly => {
            // Pure permutation by classification score.
        }
        RankMode::Oracle => {
            let gt_path = gt_path.ok_or_else(|| CliError {
                code: 4,
                message: "oracle re-ranking requires --gt".to_string(),
            })?;
            let gt = read_gt_json(gt_path)?;
            score_records_oracle(&mut records, &gt, cfg)?;
        }
        RankMode::External => {
            for (i, rec) in records.iter_mut().enumerate() {
                let s_iou = rec.s_iou.ok_or_else(|| CliError {
                    code: 4,
                    message: format!("prediction {i} is missing s_iou"),
                })?;
                let s_boundary = rec.s_boundary.ok_or_else(|| CliError {
                    code: 4,
                    message: format!("prediction {i} is missing s_boundary"),
                })?;
                rec.s_mask = Some(fused_or_suppressed(rec.score, s_iou, s_boundary)
                    .map_err(|e| CliError {
                        code: 4,
                        message: format!("prediction {i}: {e}"),
                    })?);
            }
        }
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    let key = |r: &PredictionRecord| match mode {
        RankMode::ClassOnly => r.score,
        _ => r.s_mask.unwrap_or(r.score),
    };
    order.sort_by(|&a, &b| {
        key(&records[b])
            .partial_cmp(&key(&records[a]))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let ranked: Vec<&PredictionRecord> = order.iter().map(|&i| &records[i]).collect();
    write_json_pretty(&ranked, out_path)?;
    println!(
        "re-ranked {} predictions -> {}",
        records.len(),
        out_path.display()
    );
    Ok(())
}

/// COCO-style AP over a predictions/ground-truth pair.
pub fn cmd_eval(
    pred_path: &Path,
    gt_path: &Path,
    out_path: &Path,
    cfg: &Config,
) -> Result<(), CliError> {
    let gt = read_gt_json(gt_path)?;
    let records = read_predictions_json(pred_path)?;
    let (preds, gts) = eval_inputs_from_coco(&gt, &records)?;
    let result = evaluate_ap(&preds, &gts, &cfg.ap_thresholds)?;
    write_json_pretty(&result, out_path)?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!(
        "AP {:.4}  AP50 {}  AP75 {}  ({} predictions, {} ground-truth instances)",
        result.ap,
        fmt(result.ap50),
        fmt(result.ap75),
        preds.len(),
        gts.len()
    );
    Ok(())
}

/// Assemble and paste instance masks from a basis stack, per-instance
/// attention records, and boxes.
#[allow(clippy::too_many_arguments)]
pub fn cmd_blend(
    stack_path: &Path,
    attention_path: &Path,
    boxes_path: &Path,
    image_w: usize,
    image_h: usize,
    stride: u32,
    threshold: f64,
    out_dir: &Path,
    cfg: &Config,
) -> Result<(), CliError> {
    let mut stack_file = fs::File::open(stack_path).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", stack_path.display()),
    })?;
    let stack = formats::read_stack(&mut stack_file, stride)?;
    let mut att_file = fs::File::open(attention_path).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", attention_path.display()),
    })?;
    let attentions = formats::read_attention_records(&mut att_file)?;
    let text = fs::read_to_string(boxes_path).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", boxes_path.display()),
    })?;
    let boxes_raw: Vec<[f64; 4]> = serde_json::from_str(&text).map_err(|e| CliError {
        code: 3,
        message: format!("boxes json {}: {e}", boxes_path.display()),
    })?;
    if boxes_raw.len() != attentions.len() {
        return Err(CliError {
            code: 4,
            message: format!(
                "{} attention records but {} boxes",
                attentions.len(),
                boxes_raw.len()
            ),
        });
    }
    ensure_dir(out_dir)?;
    for (i, (att, raw)) in attentions.iter().zip(&boxes_raw).enumerate() {
        let bbox = BBox::from_xywh(raw[0], raw[1], raw[2], raw[3])
            .map_err(|e| CliError {
                code: 4,
                message: format!("box {i}: {e}"),
            })?;
        let prob = blend::assemble_instance(&stack, att, &bbox, cfg.assembly_resolution)
            .map_err(|e| CliError {
                code: 4,
                message: format!("instance {i}: {e}"),
            })?;
        let mask = blend::paste_instance(&prob, &bbox, image_w, image_h, threshold);
        let path = out_dir.join(format!("instance_{i:04}.b2m1"));
        let mut file = fs::File::create(&path).map_err(|e| CliError {
            code: 2,
            message: format!("{}: {e}", path.display()),
        })?;
        formats::write_mask(&mask, &mut file)?;
    }
    println!(
        "assembled {} instance masks to {}",
        attentions.len(),
        out_dir.display()
    );
    Ok(())
}

pub struct SynthArgs {
    pub scenes: usize,
    pub scene: SceneSpec,
    pub degrade: Option<DegradeSpec>,
}

/// Generate a deterministic synthetic corpus: ground truth plus,
/// optionally, degraded predictions.
pub fn cmd_synth(args: &SynthArgs, out_dir: &Path) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let scenes = bmq_core::eval::build_corpus(&args.scene, args.scenes)?;
    let gt = scenes_to_gt_dataset(&scenes, args.scene.categories);
    write_json_pretty(&gt, &out_dir.join("gt.json"))?;
    let mut message = format!(
        "generated {} scenes ({} instances) -> {}",
        scenes.len(),
        gt.annotations.len(),
        out_dir.display()
    );
    if let Some(dspec) = &args.degrade {
        let preds = degrade_scenes(&scenes, dspec)?;
        let records = predictions_to_records(&preds)?;
        write_json_pretty(&records, &out_dir.join("predictions.json"))?;
        message.push_str(&format!(" (+{} degraded predictions)", records.len()));
    }
    println!("{message}");
    Ok(())
}

/// Finite-difference verification of every loss gradient. Exit 0 iff all
/// maximum relative errors stay below the tolerance.
pub fn cmd_gradcheck(
    seed: u64,
    trials: usize,
    size: usize,
    out_path: Option<&Path>,
) -> Result<(), CliError> {
    let reports = gradcheck::check_all(seed, trials, size, gradcheck::DEFAULT_STEP);
    if let Some(path) = out_path {
        write_json_pretty(&reports, path)?;
    }
    let mut all_ok = true;
    for r in &reports {
        let ok = r.max_rel_error < gradcheck::DEFAULT_TOLERANCE;
        all_ok &= ok;
        println!(
            "{:<20} max_rel_error {:.3e}  ({} components checked, {} skipped)  {}",
            r.loss,
            r.max_rel_error,
            r.checked_components,
            r.skipped_components,
            if ok { "ok" } else { "FAIL" }
        );
    }
    if all_ok {
        Ok(())
    } else {
        Err(CliError {
            code: 4,
            message: format!(
                "gradient check exceeded tolerance {}",
                gradcheck::DEFAULT_TOLERANCE
            ),
        })
    }
}

pub struct ExperimentArgs {
    pub scenes: usize,
    pub scene: SceneSpec,
    pub degrade: DegradeSpec,
}

/// Evaluate the same degraded corpus under the four ranking policies and
/// write the comparison table.
pub fn cmd_experiment(
    args: &ExperimentArgs,
    out_dir: &Path,
    cfg: &Config,
) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let outcome = experiment_rerank(
        &args.scene,
        args.scenes,
        &args.degrade,
        &ExperimentMode::all(),
        &cfg.laplacian(),
        &cfg.dice()?,
        &cfg.ap_thresholds,
    )?;
    write_json_pretty(&outcome, &out_dir.join("experiment.json"))?;
    let table = outcome.to_text_table();
    fs::write(out_dir.join("experiment.txt"), &table).map_err(|e| CliError {
        code: 2,
        message: format!("{}: {e}", out_dir.join("experiment.txt").display()),
    })?;
    print!("{table}");
    Ok(())
}

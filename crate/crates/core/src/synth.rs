//! Deterministic synthetic scenes and controlled prediction degradation.
//!
//! Scenes are stacks of simple shapes composited in painter's order:
//! later shapes overwrite earlier ones, and an instance's ground-truth
//! mask is its *visible* part. The generator and the degrader draw every
//! random value from seeded splitmix streams, so identical specs produce
//! bit-identical output regardless of platform or parallelism.

use serde::{Deserialize, Serialize};

use crate::boundary::{extract_boundary, LaplacianConfig};
use crate::coco::{GtAnnotation, GtCategory, GtDataset, GtImage, PredictionRecord, Segmentation};
use crate::error::{Error, Result};
use crate::mask::{BBox, BinaryMask};
use crate::rng::{derive_seed, SplitMix64};
use crate::scoring::{InstancePrediction, MaskRep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
    ConvexPolygon,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub min_instances: usize,
    pub max_instances: usize,
    pub shapes: Vec<ShapeKind>,
    pub categories: usize,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(Error::input(format!(
                "scene must be at least 16x16, got {}x{}",
                self.width, self.height
            )));
        }
        if self.min_instances == 0 || self.min_instances > self.max_instances {
            return Err(Error::input(format!(
                "instance range [{}, {}] invalid",
                self.min_instances, self.max_instances
            )));
        }
        if self.shapes.is_empty() {
            return Err(Error::input("shape palette is empty".to_string()));
        }
        if self.categories == 0 {
            return Err(Error::input("category count must be at least 1".to_string()));
        }
        Ok(())
    }
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 42,
            width: 64,
            height: 64,
            min_instances: 2,
            max_instances: 6,
            shapes: vec![
                ShapeKind::Rectangle,
                ShapeKind::Ellipse,
                ShapeKind::ConvexPolygon,
            ],
            categories: 3,
        }
    }
}

/// One ground-truth instance: the visible mask after occlusion and its
/// tight bounding box.
#[derive(Debug, Clone)]
pub struct SceneInstance {
    pub category: u64,
    pub mask: BinaryMask,
    pub bbox: BBox,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub instances: Vec<SceneInstance>,
}

const MIN_VISIBLE_PIXELS: u64 = 16;
const PLACEMENT_ATTEMPTS: usize = 1000;

/// Generate one scene. Every instance keeps at least 16 visible pixels
/// after occlusion; placement failing to reach `min_instances` within the
/// attempt budget is a generation error.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let target = rng.next_in(spec.min_instances as u64, spec.max_instances as u64) as usize;

    // Visible masks of the instances placed so far, updated as later
    // shapes paint over them.
    let mut visible: Vec<BinaryMask> = Vec::with_capacity(target);
    let mut categories: Vec<u64> = Vec::with_capacity(target);

    for _ in 0..target {
        let category = 1 + rng.next_below(spec.categories as u64);
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let Some(shape) = draw_shape(&mut rng, spec) else {
                continue;
            };
            if shape.area() < MIN_VISIBLE_PIXELS {
                continue;
            }
            // Painter's rule: the new shape erases earlier visibility.
            let survives = visible.iter().all(|m| {
                let mut remaining = 0u64;
                for (a, b) in m.data().iter().zip(shape.data()) {
                    remaining += u64::from(*a == 1 && *b == 0);
                }
                remaining >= MIN_VISIBLE_PIXELS
            });
            if !survives {
                continue;
            }
            for m in visible.iter_mut() {
                for r in 0..spec.height {
                    for c in 0..spec.width {
                        if shape.get(r, c) == 1 {
                            m.set(r, c, 0);
                        }
                    }
                }
            }
            visible.push(shape);
            categories.push(category);
            placed = true;
            break;
        }
        if !placed {
            if visible.len() >= spec.min_instances {
                break;
            }
            return Err(Error::generation(format!(
                "could not place instance {} of {} within {} attempts",
                visible.len() + 1,
                target,
                PLACEMENT_ATTEMPTS
            )));
        }
    }

    let instances = visible
        .into_iter()
        .zip(categories)
        .map(|(mask, category)| {
            let bbox = mask.tight_bbox().expect("visibility check keeps instances nonempty");
            SceneInstance {
                category,
                mask,
                bbox,
            }
        })
        .collect();
    Ok(Scene {
        width: spec.width,
        height: spec.height,
        instances,
    })
}

/// Draw one shape mask, or `None` when the draw degenerates (thin hull).
fn draw_shape(rng: &mut SplitMix64, spec: &SceneSpec) -> Option<BinaryMask> {
    let kind = spec.shapes[rng.next_below(spec.shapes.len() as u64) as usize];
    let (w, h) = (spec.width, spec.height);
    match kind {
        ShapeKind::Rectangle => {
            let rw = rng.next_in(4, (w as u64 / 3).max(5)) as usize;
            let rh = rng.next_in(4, (h as u64 / 3).max(5)) as usize;
            let rw = rw.min(w);
            let rh = rh.min(h);
            let x0 = rng.next_below((w - rw + 1) as u64) as usize;
            let y0 = rng.next_below((h - rh + 1) as u64) as usize;
            Some(BinaryMask::from_fn(w, h, |r, c| {
                (y0..y0 + rh).contains(&r) && (x0..x0 + rw).contains(&c)
            }))
        }
        ShapeKind::Ellipse => {
            let a = rng.next_in(3, (w as u64 / 6).max(4)) as i64;
            let b = rng.next_in(3, (h as u64 / 6).max(4)) as i64;
            let cx = rng.next_in(0, w as u64 - 1) as i64;
            let cy = rng.next_in(0, h as u64 - 1) as i64;
            // Membership in pure integers: compare against pixel centers
            // scaled by 2 so no floating point enters the raster.
            Some(BinaryMask::from_fn(w, h, |r, c| {
                let dx = 2 * c as i64 + 1 - 2 * cx;
                let dy = 2 * r as i64 + 1 - 2 * cy;
                let (a2, b2) = (2 * a, 2 * b);
                dx * dx * b2 * b2 + dy * dy * a2 * a2 <= a2 * a2 * b2 * b2
            }))
        }
        ShapeKind::ConvexPolygon => {
            let span = rng.next_in(10, (w.min(h) as u64 / 2).max(11));
            let x0 = rng.next_below(w as u64 - span + 1) as i64;
            let y0 = rng.next_below(h as u64 - span + 1) as i64;
            let n = rng.next_in(5, 8) as usize;
            let points: Vec<(i64, i64)> = (0..n)
                .map(|_| {
                    (
                        x0 + rng.next_below(span + 1) as i64,
                        y0 + rng.next_below(span + 1) as i64,
                    )
                })
                .collect();
            let hull = convex_hull(points);
            if hull.len() < 3 {
                return None;
            }
            let vertices: Vec<(f64, f64)> =
                hull.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
            crate::polygon::rasterize_polygon(&vertices, w, h).ok()
        }
    }
}

/// Andrew's monotone chain on integer points; collinear points dropped.
fn convex_hull(mut points: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    points.sort();
    points.dedup();
    if points.len() < 3 {
        return points;
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| -> i64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &points {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in points.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphKind {
    None,
    Dilate,
    Erode,
    /// Draw the operation and an effective radius per instance.
    Mixed,
}

/// Degradation model: morphology plus random flips, both confined to the
/// 2-pixel band around the mask boundary, and a class score decorrelated
/// from the actual mask damage so quality re-ranking has signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegradeSpec {
    pub seed: u64,
    pub flip_prob: f64,
    pub morph_kind: MorphKind,
    pub morph_radius: u8,
    pub class_noise_sigma: f64,
}

impl DegradeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::input(format!(
                "flip_prob = {} outside [0, 1]",
                self.flip_prob
            )));
        }
        if self.morph_radius > 2 {
            return Err(Error::input(format!(
                "morph_radius = {} outside {{0, 1, 2}}",
                self.morph_radius
            )));
        }
        if self.class_noise_sigma.is_nan() || self.class_noise_sigma < 0.0 || !self.class_noise_sigma.is_finite() {
            return Err(Error::input(format!(
                "class_noise_sigma = {} must be nonnegative",
                self.class_noise_sigma
            )));
        }
        Ok(())
    }

    /// Identity degradation: prediction mask equals the ground truth.
    pub fn identity(seed: u64) -> Self {
        DegradeSpec {
            seed,
            flip_prob: 0.0,
            morph_kind: MorphKind::None,
            morph_radius: 0,
            class_noise_sigma: 0.0,
        }
    }
}

/// One dilation step with the 4-connected cross structuring element.
pub fn dilate_cross(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let mut out = mask.clone();
    let (w, h) = (mask.width(), mask.height());
    for _ in 0..radius {
        let prev = out.clone();
        for r in 0..h {
            for c in 0..w {
                if prev.get(r, c) == 1 {
                    continue;
                }
                let near = (r > 0 && prev.get(r - 1, c) == 1)
                    || (r + 1 < h && prev.get(r + 1, c) == 1)
                    || (c > 0 && prev.get(r, c - 1) == 1)
                    || (c + 1 < w && prev.get(r, c + 1) == 1);
                if near {
                    out.set(r, c, 1);
                }
            }
        }
    }
    out
}

/// One erosion step with the 4-connected cross structuring element;
/// pixels at the image border survive only if their in-image neighbors do.
pub fn erode_cross(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let mut out = mask.clone();
    let (w, h) = (mask.width(), mask.height());
    for _ in 0..radius {
        let prev = out.clone();
        for r in 0..h {
            for c in 0..w {
                if prev.get(r, c) == 0 {
                    continue;
                }
                let keep = (r == 0 || prev.get(r - 1, c) == 1)
                    && (r + 1 == h || prev.get(r + 1, c) == 1)
                    && (c == 0 || prev.get(r, c - 1) == 1)
                    && (c + 1 == w || prev.get(r, c + 1) == 1);
                if !keep {
                    out.set(r, c, 0);
                }
            }
        }
    }
    out
}

/// Degrade one ground-truth instance into a prediction. `stream_tag`
/// isolates this instance's random stream so batch order and parallelism
/// cannot change the result.
pub fn degrade(
    instance: &SceneInstance,
    spec: &DegradeSpec,
    stream_tag: u64,
) -> Result<InstancePrediction> {
    spec.validate()?;
    let mut rng = SplitMix64::new(derive_seed(spec.seed, stream_tag));

    // Fixed draw order keeps the stream stable across configurations.
    let kind_draw = rng.next_below(2);
    let radius_draw = rng.next_below(spec.morph_radius as u64 + 1) as usize;
    let mut mask = match spec.morph_kind {
        MorphKind::None => instance.mask.clone(),
        MorphKind::Dilate => dilate_cross(&instance.mask, spec.morph_radius as usize),
        MorphKind::Erode => erode_cross(&instance.mask, spec.morph_radius as usize),
        MorphKind::Mixed => {
            if kind_draw == 0 {
                dilate_cross(&instance.mask, radius_draw)
            } else {
                erode_cross(&instance.mask, radius_draw)
            }
        }
    };

    // Random flips only inside the 2-pixel band around the GT boundary.
    if spec.flip_prob > 0.0 {
        let boundary = extract_boundary(&instance.mask, &LaplacianConfig::default());
        let band = dilate_cross(&boundary, 2);
        for r in 0..mask.height() {
            for c in 0..mask.width() {
                if band.get(r, c) == 1 && rng.next_f64() < spec.flip_prob {
                    mask.set(r, c, 1 - mask.get(r, c));
                }
            }
        }
    }

    // A fully erased prediction falls back to the clean mask so the
    // prediction always has a valid box.
    if mask.is_empty() {
        mask = instance.mask.clone();
    }

    // Class score: high but offset by a random gap that is independent of
    // the mask damage above, plus optional noise.
    let quality_gap = rng.next_f64() * 0.5;
    let noise = rng.next_gaussian() * spec.class_noise_sigma;
    let s_class = (1.0 - quality_gap + noise).clamp(0.0, 1.0);

    let bbox = mask.tight_bbox().expect("nonempty by fallback");
    InstancePrediction::new(instance.category, bbox, MaskRep::Raster(mask), s_class)
}

/// Package scenes as a ground-truth dataset with compressed-RLE
/// segmentations. Image ids are 1-based scene indices.
pub fn scenes_to_gt_dataset(scenes: &[Scene], category_count: usize) -> GtDataset {
    let images = scenes
        .iter()
        .enumerate()
        .map(|(i, s)| GtImage {
            id: i as u64 + 1,
            width: s.width as u32,
            height: s.height as u32,
        })
        .collect();
    let mut annotations = Vec::new();
    let mut next_id = 1u64;
    for (i, scene) in scenes.iter().enumerate() {
        for inst in &scene.instances {
            annotations.push(GtAnnotation {
                id: next_id,
                image_id: i as u64 + 1,
                category_id: inst.category,
                segmentation: Segmentation::from_mask(&inst.mask),
                bbox: Some([
                    inst.bbox.x as f64,
                    inst.bbox.y as f64,
                    inst.bbox.w as f64,
                    inst.bbox.h as f64,
                ]),
                area: Some(inst.mask.area() as f64),
                iscrowd: 0,
            });
            next_id += 1;
        }
    }
    let categories = (1..=category_count as u64)
        .map(|id| GtCategory {
            id,
            name: format!("category_{id}"),
        })
        .collect();
    GtDataset {
        images,
        annotations,
        categories,
    }
}

/// Degrade every instance of every scene. The per-instance stream tag is
/// derived from (image id, instance index).
pub fn degrade_scenes(
    scenes: &[Scene],
    spec: &DegradeSpec,
) -> Result<Vec<Vec<InstancePrediction>>> {
    use rayon::prelude::*;
    scenes
        .par_iter()
        .enumerate()
        .map(|(i, scene)| {
            scene
                .instances
                .iter()
                .enumerate()
                .map(|(j, inst)| degrade(inst, spec, derive_seed(i as u64 + 1, j as u64)))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Serialize per-scene predictions as prediction records (image ids are
/// 1-based scene indices, matching [`scenes_to_gt_dataset`]).
pub fn predictions_to_records(preds: &[Vec<InstancePrediction>]) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for (i, scene_preds) in preds.iter().enumerate() {
        for p in scene_preds {
            let mask = p.mask.to_mask()?;
            out.push(PredictionRecord {
                image_id: i as u64 + 1,
                category_id: p.category,
                bbox: [
                    p.bbox.x as f64,
                    p.bbox.y as f64,
                    p.bbox.w as f64,
                    p.bbox.h as f64,
                ],
                segmentation: Segmentation::from_mask(&mask),
                score: p.s_class,
                s_iou: p.s_iou,
                s_boundary: p.s_boundary,
                s_mask: None,
            });
        }
    }
    Ok(out)
}

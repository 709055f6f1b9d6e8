//! COCO-style JSON interchange: ground-truth datasets and prediction
//! arrays. Segmentations may be compressed-string RLE, raw-counts RLE, or
//! polygon lists; all decode to image-sized binary masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BBox, BinaryMask};
use crate::polygon::rasterize_polygon;
use crate::rle::{self, RleMask};
use crate::scoring::{InstancePrediction, MaskRep};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtDataset {
    pub images: Vec<GtImage>,
    pub annotations: Vec<GtAnnotation>,
    pub categories: Vec<GtCategory>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtImage {
    pub id: u64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub segmentation: Segmentation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(default)]
    pub iscrowd: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtCategory {
    pub id: u64,
    pub name: String,
}

/// COCO segmentation payload. The untagged order matters: an RLE object
/// is tried first, then a polygon list of flat coordinate arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segmentation {
    Rle {
        /// `[height, width]`.
        size: [u32; 2],
        counts: RleCounts,
    },
    Polygons(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RleCounts {
    Compressed(String),
    Raw(Vec<u64>),
}

impl Segmentation {
    /// Compressed RLE for a mask; the canonical output form.
    pub fn from_mask(mask: &BinaryMask) -> Segmentation {
        let r = rle::encode(mask);
        Segmentation::Rle {
            size: [r.height as u32, r.width as u32],
            counts: RleCounts::Compressed(rle::compress(&r)),
        }
    }

    /// Decode to a mask of exactly `image_w` x `image_h` pixels.
    pub fn to_mask(&self, image_w: usize, image_h: usize) -> Result<BinaryMask> {
        match self {
            Segmentation::Rle { size, counts } => {
                let (h, w) = (size[0] as usize, size[1] as usize);
                if w != image_w || h != image_h {
                    return Err(Error::format(format!(
                        "rle size [{h}, {w}] does not match image {image_h} x {image_w}"
                    )));
                }
                let r = match counts {
                    RleCounts::Compressed(s) => rle::decompress(s, h, w)?,
                    RleCounts::Raw(v) => RleMask {
                        height: h,
                        width: w,
                        counts: v.clone(),
                    },
                };
                rle::decode(&r)
            }
            Segmentation::Polygons(polys) => {
                if polys.is_empty() {
                    return Err(Error::format("empty polygon segmentation".to_string()));
                }
                let mut mask = BinaryMask::zeros(image_w, image_h);
                for flat in polys {
                    if flat.len() < 6 || flat.len() % 2 != 0 {
                        return Err(Error::format(format!(
                            "polygon needs an even coordinate count of at least 6, got {}",
                            flat.len()
                        )));
                    }
                    let vertices: Vec<(f64, f64)> =
                        flat.chunks(2).map(|p| (p[0], p[1])).collect();
                    let part = rasterize_polygon(&vertices, image_w, image_h)?;
                    for r in 0..image_h {
                        for c in 0..image_w {
                            if part.get(r, c) == 1 {
                                mask.set(r, c, 1);
                            }
                        }
                    }
                }
                Ok(mask)
            }
        }
    }
}

/// One prediction row of the predictions JSON; quality fields appear once
/// a scoring pass has filled them in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: [f64; 4],
    pub segmentation: Segmentation,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_iou: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_boundary: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_mask: Option<f64>,
}

impl PredictionRecord {
    /// Build the in-memory prediction for an image of the given size.
    pub fn to_instance(&self, image_w: usize, image_h: usize) -> Result<InstancePrediction> {
        let mask = self.segmentation.to_mask(image_w, image_h)?;
        let bbox = BBox::from_xywh(self.bbox[0], self.bbox[1], self.bbox[2], self.bbox[3])?;
        let mut inst =
            InstancePrediction::new(self.category_id, bbox, MaskRep::Raster(mask), self.score)?;
        match (self.s_iou, self.s_boundary) {
            (Some(i), Some(b)) => {
                inst = inst.with_quality(i, b)?;
            }
            (None, None) => {}
            _ => {
                return Err(Error::input(
                    "s_iou and s_boundary must be present together".to_string(),
                ))
            }
        }
        Ok(inst)
    }
}

fn read_text(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

pub fn read_gt_json(path: &std::path::Path) -> Result<GtDataset> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::format(format!("ground-truth json {}: {e}", path.display())))
}

pub fn read_predictions_json(path: &std::path::Path) -> Result<Vec<PredictionRecord>> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::format(format!("predictions json {}: {e}", path.display())))
}

pub fn write_json_pretty<T: Serialize>(value: &T, path: &std::path::Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(format!("serialize: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

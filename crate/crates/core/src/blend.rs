//! Numeric basis-assembly composition: crop global basis channels, weight
//! them with per-instance spatial attention, and squash into an instance
//! probability map. A holistic boundary map can be appended as one extra
//! basis channel so boundary evidence participates directly in
//! composition.

use crate::error::{Error, Result};
use crate::mask::{BBox, BinaryMask, SoftMap};

/// A set of image-level basis channels at `1/stride` of image resolution.
/// When `has_boundary_channel` is set, the last channel is the holistic
/// boundary basis.
#[derive(Debug, Clone)]
pub struct BasisStack {
    channels: Vec<SoftMap>,
    stride: u32,
    has_boundary_channel: bool,
}

impl BasisStack {
    pub fn new(channels: Vec<SoftMap>, stride: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::input(
                "basis stack needs at least one channel".to_string(),
            ));
        }
        if stride == 0 {
            return Err(Error::input("stride must be at least 1".to_string()));
        }
        let (w, h) = (channels[0].width(), channels[0].height());
        if let Some(bad) = channels.iter().find(|c| c.width() != w || c.height() != h) {
            return Err(Error::input(format!(
                "basis channels must share dimensions: {}x{} vs {}x{}",
                w,
                h,
                bad.width(),
                bad.height()
            )));
        }
        Ok(BasisStack {
            channels,
            stride,
            has_boundary_channel: false,
        })
    }

    pub(crate) fn with_flag(
        channels: Vec<SoftMap>,
        stride: u32,
        has_boundary_channel: bool,
    ) -> Result<Self> {
        let mut stack = BasisStack::new(channels, stride)?;
        stack.has_boundary_channel = has_boundary_channel;
        Ok(stack)
    }

    pub fn channels(&self) -> &[SoftMap] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn width(&self) -> usize {
        self.channels[0].width()
    }

    pub fn height(&self) -> usize {
        self.channels[0].height()
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn has_boundary_channel(&self) -> bool {
        self.has_boundary_channel
    }

    /// Append the holistic boundary map as channel K+1 and set the flag.
    /// Appending twice is a state error; the first K channels are taken
    /// over untouched.
    pub fn append_boundary_basis(mut self, boundary: SoftMap) -> Result<BasisStack> {
        if self.has_boundary_channel {
            return Err(Error::state(
                "basis stack already carries a boundary channel".to_string(),
            ));
        }
        if boundary.width() != self.width() || boundary.height() != self.height() {
            return Err(Error::input(format!(
                "boundary channel {}x{} does not match basis {}x{}",
                boundary.width(),
                boundary.height(),
                self.width(),
                self.height()
            )));
        }
        self.channels.push(boundary);
        self.has_boundary_channel = true;
        Ok(self)
    }
}

/// Per-instance attention logits: `channels` maps of `resolution^2` values
/// each. The channel count must equal the basis stack's.
#[derive(Debug, Clone)]
pub struct AttentionMap {
    channels: usize,
    resolution: usize,
    /// Channel-major, row-major within a channel.
    logits: Vec<f64>,
}

impl AttentionMap {
    pub fn new(channels: usize, resolution: usize, logits: Vec<f64>) -> Result<Self> {
        if channels == 0 || resolution == 0 {
            return Err(Error::input(format!(
                "attention needs at least one channel and 1x1 resolution, got {channels} x {resolution}"
            )));
        }
        if logits.len() != channels * resolution * resolution {
            return Err(Error::input(format!(
                "attention logits length {} does not match {channels} x {resolution}^2",
                logits.len()
            )));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("attention logits must be finite".to_string()));
        }
        Ok(AttentionMap {
            channels,
            resolution,
            logits,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    fn channel_map(&self, k: usize) -> SoftMap {
        let r = self.resolution;
        let start = k * r * r;
        SoftMap::new(r, r, self.logits[start..start + r * r].to_vec())
            .expect("validated at construction")
    }
}

/// Map an image-resolution box to basis resolution: divide by the stride
/// and round outward.
fn box_at_stride(bbox: &BBox, stride: u32) -> BBox {
    let s = stride as i64;
    let x0 = bbox.x.div_euclid(s);
    let y0 = bbox.y.div_euclid(s);
    let ceil_div = |v: i64| -> i64 {
        v.div_euclid(s) + i64::from(v.rem_euclid(s) != 0)
    };
    let x1 = ceil_div(bbox.right());
    let y1 = ceil_div(bbox.bottom());
    BBox {
        x: x0,
        y: y0,
        w: (x1 - x0) as u32,
        h: (y1 - y0) as u32,
    }
}

/// Compose one instance mask from the basis stack:
/// crop every channel to the (stride-mapped, outward-rounded) box and
/// resize to `out_res`, resize the attention logits alongside, softmax
/// across channels per pixel, blend, and squash through the logistic
/// function. Output values are strictly inside (0, 1).
pub fn assemble_instance(
    stack: &BasisStack,
    attention: &AttentionMap,
    bbox: &BBox,
    out_res: u32,
) -> Result<SoftMap> {
    if attention.channels() != stack.channel_count() {
        return Err(Error::input(format!(
            "attention has {} channels but the basis stack has {}",
            attention.channels(),
            stack.channel_count()
        )));
    }
    if out_res == 0 {
        return Err(Error::input("output resolution must be at least 1".to_string()));
    }
    let res = out_res as usize;
    let basis_box = box_at_stride(bbox, stack.stride());

    let crops: Vec<SoftMap> = stack
        .channels()
        .iter()
        .map(|ch| ch.crop(&basis_box).resize_bilinear(res, res))
        .collect();
    let att: Vec<SoftMap> = (0..attention.channels())
        .map(|k| attention.channel_map(k).resize_bilinear(res, res))
        .collect();

    let mut out = SoftMap::zeros(res, res);
    let mut weights = Vec::with_capacity(crops.len());
    for r in 0..res {
        for c in 0..res {
            let mut max_logit = f64::NEG_INFINITY;
            for a in &att {
                max_logit = max_logit.max(a.get(r, c));
            }
            weights.clear();
            let mut denom = 0.0;
            for a in &att {
                let w = (a.get(r, c) - max_logit).exp();
                weights.push(w);
                denom += w;
            }
            let mut blended = 0.0;
            for (w, crop) in weights.iter().zip(&crops) {
                blended += (w / denom) * crop.get(r, c);
            }
            out.set(r, c, crate::loss::sigmoid(blended));
        }
    }
    Ok(out)
}

/// Materialize an instance probability map into an image-sized binary
/// mask: resize to the box, write into a zero canvas, binarize strictly
/// above `threshold`.
pub fn paste_instance(
    prob: &SoftMap,
    bbox: &BBox,
    image_w: usize,
    image_h: usize,
    threshold: f64,
) -> BinaryMask {
    let resized = prob.resize_bilinear(bbox.w as usize, bbox.h as usize);
    let mut mask = BinaryMask::zeros(image_w, image_h);
    for r in 0..bbox.h as usize {
        let rr = bbox.y + r as i64;
        if rr < 0 || rr >= image_h as i64 {
            continue;
        }
        for c in 0..bbox.w as usize {
            let cc = bbox.x + c as i64;
            if cc < 0 || cc >= image_w as i64 {
                continue;
            }
            if resized.get(r, c) > threshold {
                mask.set(rr as usize, cc as usize, 1);
            }
        }
    }
    mask
}

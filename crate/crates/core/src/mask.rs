//! Raster mask types and the geometric operations everything else builds on.
//!
//! `BinaryMask` is a row-major `{0,1}` raster, `SoftMap` a row-major finite
//! `f64` raster. Boxes are integer-aligned; fractional detector boxes are
//! rounded outward (floor the origin, ceil the extent) so cropping never
//! clips foreground. Crops that reach outside the image are zero-filled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major binary raster. Every value is exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input(format!(
                "mask dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::input(format!(
                "mask data length {} does not match {}x{} = {}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::input(format!(
                "mask values must be 0 or 1, found {v}"
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(u8::from(f(r, c)));
            }
        }
        BinaryMask {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        debug_assert!(value <= 1);
        self.data[row * self.width + col] = value;
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Tight bounding box of the foreground, or `None` for an empty mask.
    pub fn tight_bbox(&self) -> Option<BBox> {
        let mut min_r = usize::MAX;
        let mut max_r = 0usize;
        let mut min_c = usize::MAX;
        let mut max_c = 0usize;
        let mut any = false;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) == 1 {
                    any = true;
                    min_r = min_r.min(r);
                    max_r = max_r.max(r);
                    min_c = min_c.min(c);
                    max_c = max_c.max(c);
                }
            }
        }
        if !any {
            return None;
        }
        Some(BBox {
            x: min_c as i64,
            y: min_r as i64,
            w: (max_c - min_c + 1) as u32,
            h: (max_r - min_r + 1) as u32,
        })
    }

    pub fn to_soft(&self) -> SoftMap {
        SoftMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Crop to `bbox`; regions outside the image are filled with 0.
    pub fn crop(&self, bbox: &BBox) -> BinaryMask {
        let data = crop_plane(&self.data, self.width, self.height, 0u8, bbox);
        BinaryMask {
            width: bbox.w as usize,
            height: bbox.h as usize,
            data,
        }
    }

    /// Nearest-neighbor resize with the half-pixel (align-corners-false)
    /// source mapping; source indices round half up and clamp.
    pub fn resize_nearest(&self, out_w: usize, out_h: usize) -> BinaryMask {
        assert!(out_w >= 1 && out_h >= 1);
        let sx = self.width as f64 / out_w as f64;
        let sy = self.height as f64 / out_h as f64;
        let mut data = Vec::with_capacity(out_w * out_h);
        for r in 0..out_h {
            let src_y = ((r as f64 + 0.5) * sy - 0.5 + 0.5).floor();
            let y = (src_y.max(0.0) as usize).min(self.height - 1);
            for c in 0..out_w {
                let src_x = ((c as f64 + 0.5) * sx - 0.5 + 0.5).floor();
                let x = (src_x.max(0.0) as usize).min(self.width - 1);
                data.push(self.get(y, x));
            }
        }
        BinaryMask {
            width: out_w,
            height: out_h,
            data,
        }
    }
}

/// Row-major real-valued raster. All values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl SoftMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input(format!(
                "map dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::input(format!(
                "map data length {} does not match {}x{} = {}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("map values must be finite".to_string()));
        }
        Ok(SoftMap {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        SoftMap {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        SoftMap {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        SoftMap {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    /// Binarize: strictly greater than `threshold` becomes 1.
    pub fn threshold(&self, threshold: f64) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| u8::from(v > threshold)).collect(),
        }
    }

    /// Crop to `bbox`; regions outside the image are filled with 0.
    pub fn crop(&self, bbox: &BBox) -> SoftMap {
        let data = crop_plane(&self.data, self.width, self.height, 0.0f64, bbox);
        SoftMap {
            width: bbox.w as usize,
            height: bbox.h as usize,
            data,
        }
    }

    /// Bilinear resize with the half-pixel (align-corners-false) source
    /// mapping: `src = (dst + 0.5) * scale - 0.5`, clamped to the image.
    /// Output values stay within `[min, max]` of the input.
    pub fn resize_bilinear(&self, out_w: usize, out_h: usize) -> SoftMap {
        assert!(out_w >= 1 && out_h >= 1);
        let sx = self.width as f64 / out_w as f64;
        let sy = self.height as f64 / out_h as f64;
        let mut data = Vec::with_capacity(out_w * out_h);
        for r in 0..out_h {
            let src_y = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = src_y.floor() as usize;
            let fy = src_y - y0 as f64;
            let y1 = (y0 + 1).min(self.height - 1);
            for c in 0..out_w {
                let src_x = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = src_x.floor() as usize;
                let fx = src_x - x0 as f64;
                let x1 = (x0 + 1).min(self.width - 1);
                let top = self.get(y0, x0) * (1.0 - fx) + self.get(y0, x1) * fx;
                let bot = self.get(y1, x0) * (1.0 - fx) + self.get(y1, x1) * fx;
                data.push(top * (1.0 - fy) + bot * fy);
            }
        }
        SoftMap {
            width: out_w,
            height: out_h,
            data,
        }
    }
}

/// Integer-aligned box. The origin may lie outside the image; width and
/// height are at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x: i64,
    pub y: i64,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: i64, y: i64, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::input(format!(
                "box extent must be at least 1x1, got {w}x{h}"
            )));
        }
        Ok(BBox { x, y, w, h })
    }

    /// Round a fractional `[x, y, w, h]` box outward: floor the origin,
    /// ceil the far corner. Never clips foreground.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::input("box coordinates must be finite".to_string()));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::input(format!(
                "box extent must be positive, got w={w}, h={h}"
            )));
        }
        let x0 = x.floor();
        let y0 = y.floor();
        let x1 = (x + w).ceil();
        let y1 = (y + h).ceil();
        Ok(BBox {
            x: x0 as i64,
            y: y0 as i64,
            w: (x1 - x0) as u32,
            h: (y1 - y0) as u32,
        })
    }

    pub fn right(&self) -> i64 {
        self.x + self.w as i64
    }

    pub fn bottom(&self) -> i64 {
        self.y + self.h as i64
    }
}

fn crop_plane<T: Copy>(data: &[T], width: usize, height: usize, fill: T, bbox: &BBox) -> Vec<T> {
    let out_w = bbox.w as usize;
    let out_h = bbox.h as usize;
    let mut out = vec![fill; out_w * out_h];
    for r in 0..out_h {
        let src_r = bbox.y + r as i64;
        if src_r < 0 || src_r >= height as i64 {
            continue;
        }
        for c in 0..out_w {
            let src_c = bbox.x + c as i64;
            if src_c < 0 || src_c >= width as i64 {
                continue;
            }
            out[r * out_w + c] = data[src_r as usize * width + src_c as usize];
        }
    }
    out
}

/// Jaccard index of two equal-sized masks. Both masks empty counts as
/// perfect agreement (1.0), so quality targets stay defined for empty
/// predictions matched to empty crops.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::input(format!(
            "iou dimension mismatch: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let mut inter = 0u64;
    let mut union = 0u64;
    for (&va, &vb) in a.data.iter().zip(&b.data) {
        inter += (va & vb) as u64;
        union += (va | vb) as u64;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

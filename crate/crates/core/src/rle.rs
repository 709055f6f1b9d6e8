//! Run-length mask codec in the de facto COCO convention: column-major
//! runs, background first, plus the compressed counts string (6-bit units
//! in ASCII 48..=111, stride-2 delta coding).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Column-major run lengths, alternating background/foreground, starting
/// with background. `counts` must sum to `height * width`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub height: usize,
    pub width: usize,
    pub counts: Vec<u64>,
}

impl RleMask {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Expand column-major runs into a row-major mask.
pub fn decode(rle: &RleMask) -> Result<BinaryMask> {
    let expected = (rle.height * rle.width) as u64;
    let actual = rle.total();
    if actual != expected {
        return Err(Error::format(format!(
            "rle counts sum to {actual}, expected {expected} for size [{}, {}]",
            rle.height, rle.width
        )));
    }
    let mut mask = BinaryMask::zeros(rle.width, rle.height);
    let mut flat = 0u64;
    let mut value = 0u8;
    for &run in &rle.counts {
        if value == 1 {
            for i in flat..flat + run {
                let col = (i as usize) / rle.height;
                let row = (i as usize) % rle.height;
                mask.set(row, col, 1);
            }
        }
        flat += run;
        value ^= 1;
    }
    Ok(mask)
}

/// Run-length encode a mask in column-major order. `decode(encode(m)) == m`
/// for every mask.
pub fn encode(mask: &BinaryMask) -> RleMask {
    let h = mask.height();
    let w = mask.width();
    let mut counts = Vec::new();
    let mut current = 0u8;
    let mut run = 0u64;
    for col in 0..w {
        for row in 0..h {
            let v = mask.get(row, col);
            if v == current {
                run += 1;
            } else {
                counts.push(run);
                current = v;
                run = 1;
            }
        }
    }
    counts.push(run);
    RleMask {
        height: h,
        width: w,
        counts,
    }
}

/// Compress counts into the COCO string form: each value (stride-2
/// delta-coded from the third element on) is emitted little-endian in
/// 5-bit units, continuation flag in bit 5, each unit stored as the
/// character with code `unit + 48`.
pub fn compress(rle: &RleMask) -> String {
    let mut out = String::new();
    for (i, &count) in rle.counts.iter().enumerate() {
        let mut x = count as i64;
        if i > 2 {
            x -= rle.counts[i - 2] as i64;
        }
        loop {
            let mut unit = (x & 0x1F) as u8;
            x >>= 5;
            let more = if unit & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                unit |= 0x20;
            }
            out.push((unit + 48) as char);
            if !more {
                break;
            }
        }
    }
    out
}

/// Inverse of [`compress`]. Rejects characters outside the 48..=111 code
/// range, truncated continuations, negative reconstructed runs, and counts
/// that do not sum to `height * width`.
pub fn decompress(text: &str, height: usize, width: usize) -> Result<RleMask> {
    let bytes = text.as_bytes();
    let mut counts: Vec<u64> = Vec::new();
    let mut pos = 0usize;
    while pos < bytes.len() {
        let mut x: i64 = 0;
        let mut shift = 0u32;
        loop {
            if pos >= bytes.len() {
                return Err(Error::format(
                    "truncated compressed rle: continuation flag set at end of string".to_string(),
                ));
            }
            let b = bytes[pos];
            if !(48..=111).contains(&b) {
                return Err(Error::format(format!(
                    "compressed rle character code {b} outside range 48..=111 at position {pos}"
                )));
            }
            let unit = b - 48;
            if shift >= 60 {
                return Err(Error::format(
                    "compressed rle value exceeds 64-bit range".to_string(),
                ));
            }
            x |= ((unit & 0x1F) as i64) << shift;
            pos += 1;
            shift += 5;
            if unit & 0x20 == 0 {
                // Sign-extend when the top payload bit of the last unit is set.
                if unit & 0x10 != 0 {
                    x |= -1i64 << shift;
                }
                break;
            }
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2] as i64;
        }
        if x < 0 {
            return Err(Error::format(format!(
                "compressed rle decoded a negative run length {x}"
            )));
        }
        counts.push(x as u64);
    }
    let rle = RleMask {
        height,
        width,
        counts,
    };
    let expected = (height * width) as u64;
    let actual = rle.total();
    if actual != expected {
        return Err(Error::format(format!(
            "rle counts sum to {actual}, expected {expected} for size [{height}, {width}]"
        )));
    }
    Ok(rle)
}

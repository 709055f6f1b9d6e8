//! Polygon rasterization onto a binary raster.

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Rasterize a polygon: pixel (r, c) is foreground iff its center
/// (c + 0.5, r + 0.5) lies inside the polygon under the even-odd rule.
/// Orientation-independent and deterministic. Requires at least 3 vertices.
pub fn rasterize_polygon(vertices: &[(f64, f64)], width: usize, height: usize) -> Result<BinaryMask> {
    if vertices.len() < 3 {
        return Err(Error::input(format!(
            "polygon needs at least 3 vertices, got {}",
            vertices.len()
        )));
    }
    if vertices.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::input("polygon vertices must be finite".to_string()));
    }
    let mut mask = BinaryMask::zeros(width, height);
    for r in 0..height {
        let py = r as f64 + 0.5;
        for c in 0..width {
            let px = c as f64 + 0.5;
            if point_in_polygon(px, py, vertices) {
                mask.set(r, c, 1);
            }
        }
    }
    Ok(mask)
}

/// Even-odd crossing test against a horizontal ray toward +x.
fn point_in_polygon(px: f64, py: f64, vertices: &[(f64, f64)]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = vertices[i];
        let (xj, yj) = vertices[j];
        if (yi > py) != (yj > py) {
            let x_cross = (xj - xi) * (py - yi) / (yj - yi) + xi;
            if px < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Signed shoelace area, used by tests as an independent area oracle.
pub fn shoelace_area(vertices: &[(f64, f64)]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (x0, y0) = vertices[i];
        let (x1, y1) = vertices[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc.abs() / 2.0
}

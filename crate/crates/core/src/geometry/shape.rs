//! Moment statistics of binary masks.

use super::GeometryError;
use crate::imaging::BinaryMask;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeStats {
    /// True-pixel count.
    pub area: f64,
    /// First moments (x, y), sub-pixel.
    pub centroid: (f64, f64),
    /// Major axis of the moment ellipse: 4 * sqrt(lambda_max). Exact for
    /// solid ellipses.
    pub major_axis_len: f64,
}

pub fn shape_stats(mask: &BinaryMask) -> Result<ShapeStats, GeometryError> {
    let (w, h) = (mask.width(), mask.height());
    let mut count = 0usize;
    let mut sx = 0.0f64;
    let mut sy = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                count += 1;
                sx += x as f64;
                sy += y as f64;
            }
        }
    }
    if count == 0 {
        return Err(GeometryError::EmptyMask);
    }
    let n = count as f64;
    let cx = sx / n;
    let cy = sy / n;

    let mut mxx = 0.0;
    let mut myy = 0.0;
    let mut mxy = 0.0;
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                mxx += dx * dx;
                myy += dy * dy;
                mxy += dx * dy;
            }
        }
    }
    mxx /= n;
    myy /= n;
    mxy /= n;

    let trace_half = (mxx + myy) / 2.0;
    let det_part = ((mxx - myy) / 2.0).powi(2) + mxy * mxy;
    let lambda_max = trace_half + det_part.sqrt();
    Ok(ShapeStats {
        area: n,
        centroid: (cx, cy),
        major_axis_len: 4.0 * lambda_max.max(0.0).sqrt(),
    })
}

//! Contrast-limited adaptive histogram equalization.
//!
//! Per-tile histograms are clipped at `clip_limit` times the uniform bin
//! height, the excess is redistributed evenly, and the per-tile mappings are
//! interpolated bilinearly between tile centers. Tiles with a single-bin
//! histogram (constant regions) map to the identity, so a constant image is
//! a fixed point for every parameter setting.

use super::{GrayImage, ImagingError};

const BINS: usize = 256;

pub fn clahe(
    img: &GrayImage,
    clip_limit: f64,
    tiles: (usize, usize),
) -> Result<GrayImage, ImagingError> {
    let (tiles_x, tiles_y) = tiles;
    if tiles_x == 0 || tiles_y == 0 || tiles_x > img.width() || tiles_y > img.height() {
        return Err(ImagingError::InvalidTileGrid);
    }
    if !(clip_limit.is_finite() && clip_limit >= 1.0) {
        return Err(ImagingError::InvalidClipLimit(clip_limit));
    }

    let xs = tile_bounds(img.width(), tiles_x);
    let ys = tile_bounds(img.height(), tiles_y);
    let luts = tile_luts(img, clip_limit, &xs, &ys);

    // tile centers for the interpolation grid
    let cx: Vec<f64> = xs
        .windows(2)
        .map(|b| (b[0] + b[1]) as f64 / 2.0 - 0.5)
        .collect();
    let cy: Vec<f64> = ys
        .windows(2)
        .map(|b| (b[0] + b[1]) as f64 / 2.0 - 0.5)
        .collect();

    let mut out = Vec::with_capacity(img.width() * img.height());
    for y in 0..img.height() {
        let (ty0, ty1, wy) = interp_axis(&cy, y as f64);
        for x in 0..img.width() {
            let (tx0, tx1, wx) = interp_axis(&cx, x as f64);
            let v = img.get(x, y) as usize;
            let top = luts[ty0 * tiles_x + tx0][v] * (1.0 - wx) + luts[ty0 * tiles_x + tx1][v] * wx;
            let bot = luts[ty1 * tiles_x + tx0][v] * (1.0 - wx) + luts[ty1 * tiles_x + tx1][v] * wx;
            let blended = top * (1.0 - wy) + bot * wy;
            out.push(blended.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(img.width(), img.height(), out)
}

/// Tile boundaries `0 = b[0] < b[1] < … < b[tiles] = len`; every tile is
/// non-empty when `tiles <= len`.
fn tile_bounds(len: usize, tiles: usize) -> Vec<usize> {
    (0..=tiles).map(|i| i * len / tiles).collect()
}

/// Locates a coordinate between neighboring tile centers.
fn interp_axis(centers: &[f64], pos: f64) -> (usize, usize, f64) {
    if pos <= centers[0] {
        return (0, 0, 0.0);
    }
    let last = centers.len() - 1;
    if pos >= centers[last] {
        return (last, last, 0.0);
    }
    let hi = centers.partition_point(|&c| c <= pos);
    let lo = hi - 1;
    let w = (pos - centers[lo]) / (centers[hi] - centers[lo]);
    (lo, hi, w)
}

fn tile_luts(img: &GrayImage, clip_limit: f64, xs: &[usize], ys: &[usize]) -> Vec<[f64; BINS]> {
    let mut luts = Vec::with_capacity((xs.len() - 1) * (ys.len() - 1));
    for ty in ys.windows(2) {
        for tx in xs.windows(2) {
            let mut hist = [0.0f64; BINS];
            for y in ty[0]..ty[1] {
                for x in tx[0]..tx[1] {
                    hist[img.get(x, y) as usize] += 1.0;
                }
            }
            let area = ((ty[1] - ty[0]) * (tx[1] - tx[0])) as f64;
            luts.push(equalization_lut(&mut hist, area, clip_limit));
        }
    }
    luts
}

/// Builds one tile's value mapping from its (clipped) histogram.
fn equalization_lut(hist: &mut [f64; BINS], area: f64, clip_limit: f64) -> [f64; BINS] {
    let occupied = hist.iter().filter(|&&h| h > 0.0).count();
    if occupied <= 1 {
        // constant tile: nothing to equalize
        let mut lut = [0.0; BINS];
        for (v, slot) in lut.iter_mut().enumerate() {
            *slot = v as f64;
        }
        return lut;
    }

    let clip = clip_limit * area / BINS as f64;
    let mut excess = 0.0;
    for h in hist.iter_mut() {
        if *h > clip {
            excess += *h - clip;
            *h = clip;
        }
    }
    // spread the excess evenly, re-clipping until it is absorbed
    let mut rounds = 0;
    while excess > 1e-9 && rounds < 64 {
        let share = excess / BINS as f64;
        excess = 0.0;
        for h in hist.iter_mut() {
            *h += share;
            if *h > clip {
                excess += *h - clip;
                *h = clip;
            }
        }
        rounds += 1;
    }

    let total: f64 = hist.iter().sum();
    let mut lut = [0.0; BINS];
    let mut cdf = 0.0;
    for v in 0..BINS {
        // mid-bin CDF keeps a uniform histogram on the identity mapping
        let mid = cdf + hist[v] / 2.0;
        lut[v] = 255.0 * mid / total;
        cdf += hist[v];
    }
    lut
}

/// Plain global histogram equalization with the same mid-bin convention;
/// the oracle the single-tile path is checked against.
#[cfg(test)]
fn global_equalize(img: &GrayImage) -> GrayImage {
    let mut hist = [0.0f64; BINS];
    for &v in img.data() {
        hist[v as usize] += 1.0;
    }
    let total: f64 = hist.iter().sum();
    let mut lut = [0u8; BINS];
    let mut cdf = 0.0;
    for v in 0..BINS {
        let mid = cdf + hist[v] / 2.0;
        lut[v] = (255.0 * mid / total).round().clamp(0.0, 255.0) as u8;
        cdf += hist[v];
    }
    let data = img.data().iter().map(|&v| lut[v as usize]).collect();
    GrayImage::new(img.width(), img.height(), data).expect("same dims")
}

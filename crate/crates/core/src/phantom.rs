//! Synthetic disc/cup phantoms.
//!
//! Rasterized ellipse pairs stand in for fundus ground truth in tests and in
//! the demo dataset generator, so every non-dataset check is self-contained.

use crate::imaging::{BinaryMask, GrayImage, RgbImage};

/// Rasterizes a solid rotated ellipse. `rot_deg` turns the major axis
/// clockwise from the x axis; pixel centers sit on integer coordinates.
pub fn ellipse_mask(
    width: usize,
    height: usize,
    cx: f64,
    cy: f64,
    semi_a: f64,
    semi_b: f64,
    rot_deg: f64,
) -> BinaryMask {
    let rot = rot_deg.to_radians();
    let (sin, cos) = rot.sin_cos();
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let u = (dx * cos + dy * sin) / semi_a;
            let v = (-dx * sin + dy * cos) / semi_b;
            data.push(u * u + v * v <= 1.0);
        }
    }
    BinaryMask::new(width, height, data).expect("positive dims")
}

/// Disc and cup masks for one synthetic eye.
///
/// The cup is the disc ellipse scaled by `cup_scale` and shifted by
/// (`cup_dx`, `cup_dy`); callers model notching by shifting the cup toward a
/// quadrant.
#[allow(clippy::too_many_arguments)]
pub fn phantom_masks(
    width: usize,
    height: usize,
    cx: f64,
    cy: f64,
    disc_a: f64,
    disc_b: f64,
    rot_deg: f64,
    cup_scale: f64,
    cup_dx: f64,
    cup_dy: f64,
) -> (BinaryMask, BinaryMask) {
    let disc = ellipse_mask(width, height, cx, cy, disc_a, disc_b, rot_deg);
    let cup = ellipse_mask(
        width,
        height,
        cx + cup_dx,
        cy + cup_dy,
        disc_a * cup_scale,
        disc_b * cup_scale,
        rot_deg,
    );
    // keep the cup inside the disc so ground truth satisfies containment
    let data = disc
        .data()
        .iter()
        .zip(cup.data())
        .map(|(&d, &c)| d && c)
        .collect();
    let cup = BinaryMask::new(width, height, data).expect("same dims");
    (disc, cup)
}

/// Renders a flat-shaded grayscale image of a phantom eye.
pub fn phantom_image(
    disc: &BinaryMask,
    cup: &BinaryMask,
    background: u8,
    disc_level: u8,
    cup_level: u8,
) -> GrayImage {
    let data = disc
        .data()
        .iter()
        .zip(cup.data())
        .map(|(&d, &c)| {
            if c {
                cup_level
            } else if d {
                disc_level
            } else {
                background
            }
        })
        .collect();
    GrayImage::new(disc.width(), disc.height(), data).expect("same dims")
}

/// Replicates a grayscale image into RGB channels (for dataset generation).
pub fn gray_to_rgb(img: &GrayImage) -> RgbImage {
    let data = img.data().iter().flat_map(|&v| [v, v, v]).collect();
    RgbImage::new(img.width(), img.height(), data).expect("same dims")
}

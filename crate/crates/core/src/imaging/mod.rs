//! Image and mask primitives for the fundus pipeline.
//!
//! Everything in this module is a pure value operation: decoding, contrast
//! enhancement, resizing and augmentation never touch shared state, so all
//! functions are safe to call concurrently.

mod augment;
mod clahe;
mod io;

pub use augment::{
    augment, augment_with_sigma, expand_dataset, expand_dataset_with_sigma, AugmentOp,
    DEFAULT_NOISE_SIGMA,
};
pub use clahe::clahe;
pub use io::{
    load_binary_mask, load_gray_png, load_image, load_label_mask, save_binary_mask, save_gray_png,
    save_image_png, save_image_ppm, save_label_mask,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("truncated image data: {0}")]
    Truncated(String),
    #[error("invalid image geometry: {0}")]
    InvalidGeometry(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },
    #[error("invalid mask label {0} (expected 0, 1 or 2)")]
    InvalidLabel(u8),
    #[error("tile grid must be at least 1x1 and no finer than the image")]
    InvalidTileGrid,
    #[error("clip limit must be >= 1, got {0}")]
    InvalidClipLimit(f64),
    #[error("empty sample list")]
    EmptyDataset,
    #[error("augmentation target {target} is below the {available} available samples")]
    TargetTooSmall { target: usize, available: usize },
}

fn dims_string(w: usize, h: usize) -> String {
    format!("{w}x{h}")
}

/// 8-bit RGB image, row-major interleaved triples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidGeometry(dims_string(width, height)));
        }
        if data.len() != width * height * 3 {
            return Err(ImagingError::InvalidGeometry(format!(
                "rgb buffer has {} bytes, want {}",
                data.len(),
                width * height * 3
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
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

    pub fn pixel(&self, x: usize, y: usize) -> (u8, u8, u8) {
        let i = (y * self.width + x) * 3;
        (self.data[i], self.data[i + 1], self.data[i + 2])
    }
}

/// 8-bit single-channel image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidGeometry(dims_string(width, height)));
        }
        if data.len() != width * height {
            return Err(ImagingError::InvalidGeometry(format!(
                "gray buffer has {} bytes, want {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("positive dims")
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

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// Per-pixel boolean mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidGeometry(dims_string(width, height)));
        }
        if data.len() != width * height {
            return Err(ImagingError::InvalidGeometry(format!(
                "mask buffer has {} entries, want {}",
                data.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height]).expect("positive dims")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    /// Bounds-checked lookup; out-of-image coordinates read as false.
    pub fn contains(&self, x: isize, y: isize) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return false;
        }
        self.data[y as usize * self.width + x as usize]
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Three-class label map: 0 background, 1 disc rim, 2 cup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

pub const N_CLASSES: usize = 3;

impl LabelMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidGeometry(dims_string(width, height)));
        }
        if labels.len() != width * height {
            return Err(ImagingError::InvalidGeometry(format!(
                "label buffer has {} entries, want {}",
                labels.len(),
                width * height
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 2) {
            return Err(ImagingError::InvalidLabel(bad));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0; width * height]).expect("positive dims")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        assert!(label <= 2, "label out of range");
        self.labels[y * self.width + x] = label;
    }
}

/// How an augmented sample was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Original,
    HFlip,
    VFlip,
    Noise,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::HFlip => "hflip",
            Provenance::VFlip => "vflip",
            Provenance::Noise => "noise",
        }
    }
}

/// A training sample: enhanced grayscale image plus its label mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub image: GrayImage,
    pub mask: LabelMask,
    pub provenance: Provenance,
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        image: GrayImage,
        mask: LabelMask,
        provenance: Provenance,
    ) -> Result<Self, ImagingError> {
        if image.width() != mask.width() || image.height() != mask.height() {
            return Err(ImagingError::DimensionMismatch {
                left: dims_string(image.width(), image.height()),
                right: dims_string(mask.width(), mask.height()),
            });
        }
        Ok(Self {
            id: id.into(),
            image,
            mask,
            provenance,
        })
    }
}

/// Which channel mix feeds the single-channel network input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GrayMethod {
    /// Rec. 601 luma weights 0.299/0.587/0.114.
    #[default]
    Luma,
    /// Green channel only, common for fundus imagery.
    Green,
}

/// Luma grayscale conversion: round(0.299 R + 0.587 G + 0.114 B).
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    to_grayscale_with(img, GrayMethod::Luma)
}

pub fn to_grayscale_with(img: &RgbImage, method: GrayMethod) -> GrayImage {
    let mut data = Vec::with_capacity(img.width() * img.height());
    for px in img.data().chunks_exact(3) {
        let v = match method {
            GrayMethod::Luma => {
                let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
                y.round().clamp(0.0, 255.0) as u8
            }
            GrayMethod::Green => px[1],
        };
        data.push(v);
    }
    GrayImage::new(img.width(), img.height(), data).expect("same dims")
}

/// Merges binary disc/cup ground truth into a single three-class map.
///
/// Cup pixels outside the disc are clipped into it (cup := cup ∩ disc); the
/// number of clipped pixels is returned alongside the mask so callers can
/// surface the containment violation.
pub fn merge_masks(
    disc: &BinaryMask,
    cup: &BinaryMask,
) -> Result<(LabelMask, usize), ImagingError> {
    if disc.width() != cup.width() || disc.height() != cup.height() {
        return Err(ImagingError::DimensionMismatch {
            left: dims_string(disc.width(), disc.height()),
            right: dims_string(cup.width(), cup.height()),
        });
    }
    let mut labels = vec![0u8; disc.width() * disc.height()];
    let mut clipped = 0usize;
    for (i, label) in labels.iter_mut().enumerate() {
        let d = disc.data()[i];
        let c = cup.data()[i];
        *label = match (d, c) {
            (true, true) => 2,
            (true, false) => 1,
            (false, true) => {
                clipped += 1;
                0
            }
            (false, false) => 0,
        };
    }
    Ok((
        LabelMask::new(disc.width(), disc.height(), labels)?,
        clipped,
    ))
}

/// Splits a label map into (full disc, cup) binary masks.
///
/// The disc mask covers labels {1, 2} — the cup sits inside the disc.
pub fn split_label_mask(mask: &LabelMask) -> (BinaryMask, BinaryMask) {
    let disc: Vec<bool> = mask.labels().iter().map(|&l| l >= 1).collect();
    let cup: Vec<bool> = mask.labels().iter().map(|&l| l == 2).collect();
    (
        BinaryMask::new(mask.width(), mask.height(), disc).expect("same dims"),
        BinaryMask::new(mask.width(), mask.height(), cup).expect("same dims"),
    )
}

/// Bilinear resize with corner-aligned sampling.
pub fn resize_image(img: &GrayImage, width: usize, height: usize) -> GrayImage {
    assert!(width > 0 && height > 0, "target dims must be positive");
    if width == img.width() && height == img.height() {
        return img.clone();
    }
    let sx = axis_scale(img.width(), width);
    let sy = axis_scale(img.height(), height);
    let mut data = Vec::with_capacity(width * height);
    for oy in 0..height {
        let fy = oy as f64 * sy;
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(img.height() - 1);
        let wy = fy - y0 as f64;
        for ox in 0..width {
            let fx = ox as f64 * sx;
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(img.width() - 1);
            let wx = fx - x0 as f64;
            let top = img.get(x0, y0) as f64 * (1.0 - wx) + img.get(x1, y0) as f64 * wx;
            let bot = img.get(x0, y1) as f64 * (1.0 - wx) + img.get(x1, y1) as f64 * wx;
            let v = top * (1.0 - wy) + bot * wy;
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(width, height, data).expect("positive dims")
}

/// Nearest-neighbor resize; labels stay categorical.
pub fn resize_mask(mask: &LabelMask, width: usize, height: usize) -> LabelMask {
    assert!(width > 0 && height > 0, "target dims must be positive");
    if width == mask.width() && height == mask.height() {
        return mask.clone();
    }
    let sx = axis_scale(mask.width(), width);
    let sy = axis_scale(mask.height(), height);
    let mut labels = Vec::with_capacity(width * height);
    for oy in 0..height {
        let y = (oy as f64 * sy).round() as usize;
        let y = y.min(mask.height() - 1);
        for ox in 0..width {
            let x = (ox as f64 * sx).round() as usize;
            let x = x.min(mask.width() - 1);
            labels.push(mask.get(x, y));
        }
    }
    LabelMask::new(width, height, labels).expect("positive dims")
}

fn axis_scale(input: usize, output: usize) -> f64 {
    if output <= 1 {
        0.0
    } else {
        (input - 1) as f64 / (output - 1) as f64
    }
}

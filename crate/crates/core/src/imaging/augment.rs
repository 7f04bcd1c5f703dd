//! Deterministic data augmentation: flips and Gaussian noise.

use super::{GrayImage, ImagingError, LabelMask, Provenance, Sample};
use crate::rng::SeededRng;

/// Noise amplitude on the 8-bit intensity scale.
pub const DEFAULT_NOISE_SIGMA: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AugmentOp {
    HFlip,
    VFlip,
    Noise,
}

impl AugmentOp {
    pub fn as_str(self) -> &'static str {
        match self {
            AugmentOp::HFlip => "hflip",
            AugmentOp::VFlip => "vflip",
            AugmentOp::Noise => "noise",
        }
    }

    fn provenance(self) -> Provenance {
        match self {
            AugmentOp::HFlip => Provenance::HFlip,
            AugmentOp::VFlip => Provenance::VFlip,
            AugmentOp::Noise => Provenance::Noise,
        }
    }
}

const OPS: [AugmentOp; 3] = [AugmentOp::HFlip, AugmentOp::VFlip, AugmentOp::Noise];

/// Applies one augmentation with the default noise sigma.
///
/// Flips transform image and mask identically; noise perturbs the image only
/// and is deterministic under `seed`.
pub fn augment(sample: &Sample, op: AugmentOp, seed: u64) -> Sample {
    augment_with_sigma(sample, op, seed, DEFAULT_NOISE_SIGMA)
}

pub fn augment_with_sigma(sample: &Sample, op: AugmentOp, seed: u64, sigma: f64) -> Sample {
    let (image, mask) = match op {
        AugmentOp::HFlip => (hflip_image(&sample.image), hflip_mask(&sample.mask)),
        AugmentOp::VFlip => (vflip_image(&sample.image), vflip_mask(&sample.mask)),
        AugmentOp::Noise => (add_noise(&sample.image, seed, sigma), sample.mask.clone()),
    };
    Sample {
        id: sample.id.clone(),
        image,
        mask,
        provenance: op.provenance(),
    }
}

/// Grows a sample list to `target` entries.
///
/// The originals are kept in place; augmented copies are appended by cycling
/// (sample, op) pairs — round `r` applies op `(r + i) % 3` to sample `i`, so
/// all pairs are visited every three rounds regardless of the list length.
pub fn expand_dataset(
    samples: &[Sample],
    target: usize,
    seed: u64,
) -> Result<Vec<Sample>, ImagingError> {
    expand_dataset_with_sigma(samples, target, seed, DEFAULT_NOISE_SIGMA)
}

pub fn expand_dataset_with_sigma(
    samples: &[Sample],
    target: usize,
    seed: u64,
    sigma: f64,
) -> Result<Vec<Sample>, ImagingError> {
    if samples.is_empty() {
        return Err(ImagingError::EmptyDataset);
    }
    if target < samples.len() {
        return Err(ImagingError::TargetTooSmall {
            target,
            available: samples.len(),
        });
    }
    let mut out: Vec<Sample> = samples.to_vec();
    let n = samples.len();
    let mut k = 0usize;
    while out.len() < target {
        let round = k / n;
        let idx = k % n;
        let op = OPS[(round + idx) % OPS.len()];
        let noise_seed = SeededRng::derive(seed, k as u64 + 1).next_u64();
        let mut aug = augment_with_sigma(&samples[idx], op, noise_seed, sigma);
        aug.id = format!("{}-aug{}-{}", samples[idx].id, round, op.as_str());
        out.push(aug);
        k += 1;
    }
    Ok(out)
}

fn hflip_image(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(img.get(w - 1 - x, y));
        }
    }
    GrayImage::new(w, h, data).expect("same dims")
}

fn vflip_image(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        data.extend_from_slice(&img.data()[(h - 1 - y) * w..(h - y) * w]);
    }
    GrayImage::new(w, h, data).expect("same dims")
}

fn hflip_mask(mask: &LabelMask) -> LabelMask {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            labels.push(mask.get(w - 1 - x, y));
        }
    }
    LabelMask::new(w, h, labels).expect("same dims")
}

fn vflip_mask(mask: &LabelMask) -> LabelMask {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = Vec::with_capacity(w * h);
    for y in 0..h {
        labels.extend_from_slice(&mask.labels()[(h - 1 - y) * w..(h - y) * w]);
    }
    LabelMask::new(w, h, labels).expect("same dims")
}

fn add_noise(img: &GrayImage, seed: u64, sigma: f64) -> GrayImage {
    let mut rng = SeededRng::new(seed);
    let data = img
        .data()
        .iter()
        .map(|&v| {
            (v as f64 + sigma * rng.next_normal())
                .round()
                .clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(img.width(), img.height(), data).expect("same dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Provenance;

    fn sample() -> Sample {
        let image = GrayImage::new(4, 3, (0u8..12).map(|v| v * 20).collect()).unwrap();
        let mask = LabelMask::new(4, 3, vec![0, 1, 2, 0, 1, 1, 2, 0, 0, 2, 1, 0]).unwrap();
        Sample::new("s0", image, mask, Provenance::Original).unwrap()
    }

    #[test]
    fn hflip_is_an_involution() {
        let s = sample();
        let once = augment(&s, AugmentOp::HFlip, 1);
        let twice = augment(&once, AugmentOp::HFlip, 99);
        assert_eq!(twice.image, s.image);
        assert_eq!(twice.mask, s.mask);
    }

    #[test]
    fn vflip_is_an_involution_and_swaps_rows() {
        let s = sample();
        let flipped = augment(&s, AugmentOp::VFlip, 0);
        for x in 0..4 {
            assert_eq!(flipped.mask.get(x, 0), s.mask.get(x, 2));
            assert_eq!(flipped.mask.get(x, 2), s.mask.get(x, 0));
        }
        let back = augment(&flipped, AugmentOp::VFlip, 0);
        assert_eq!(back.image, s.image);
        assert_eq!(back.mask, s.mask);
    }

    #[test]
    fn noise_is_deterministic_and_leaves_mask_alone() {
        let s = sample();
        let a = augment(&s, AugmentOp::Noise, 7);
        let b = augment(&s, AugmentOp::Noise, 7);
        assert_eq!(a.image, b.image);
        assert_eq!(a.mask, s.mask);
        assert_ne!(a.image, s.image);

        let c = augment(&s, AugmentOp::Noise, 8);
        assert_ne!(c.image, a.image);
    }

    #[test]
    fn expand_keeps_originals_and_hits_target() {
        let originals: Vec<Sample> = (0..5)
            .map(|i| {
                let mut s = sample();
                s.id = format!("s{i}");
                s
            })
            .collect();
        let out = expand_dataset(&originals, 17, 42).unwrap();
        assert_eq!(out.len(), 17);
        for (i, s) in out.iter().take(5).enumerate() {
            assert_eq!(s.id, format!("s{i}"));
            assert_eq!(s.provenance, Provenance::Original);
        }
        let ids: std::collections::BTreeSet<_> = out.iter().map(|s| s.id.clone()).collect();
        assert_eq!(ids.len(), 17, "augmented ids must be unique");
    }

    #[test]
    fn expand_to_same_count_is_identity() {
        let originals = vec![sample()];
        let out = expand_dataset(&originals, 1, 3).unwrap();
        assert_eq!(out, originals);
    }

    #[test]
    fn expand_is_deterministic() {
        let originals: Vec<Sample> = (0..3)
            .map(|i| {
                let mut s = sample();
                s.id = format!("s{i}");
                s
            })
            .collect();
        let a = expand_dataset(&originals, 11, 5).unwrap();
        let b = expand_dataset(&originals, 11, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seventy_one_originals_expand_to_two_hundred() {
        let originals: Vec<Sample> = (0..71)
            .map(|i| {
                let mut s = sample();
                s.id = format!("img{i:03}");
                s
            })
            .collect();
        let out = expand_dataset(&originals, 200, 13).unwrap();
        assert_eq!(out.len(), 200);
        assert!(out[..71]
            .iter()
            .all(|s| s.provenance == Provenance::Original));
        assert!(out[71..]
            .iter()
            .all(|s| s.provenance != Provenance::Original));
    }

    #[test]
    fn expand_rejects_bad_targets() {
        assert!(matches!(
            expand_dataset(&[], 5, 0),
            Err(ImagingError::EmptyDataset)
        ));
        let originals = vec![sample(), sample()];
        assert!(matches!(
            expand_dataset(&originals, 1, 0),
            Err(ImagingError::TargetTooSmall { .. })
        ));
    }
}

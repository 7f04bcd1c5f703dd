//! Segmenter training loop and mask prediction.

use serde::Serialize;

use super::adam::AdamState;
use super::layers::cross_entropy_loss;
use super::tensor::Tensor4;
use super::unet::{UNetModel, UNET_DEPTH};
use super::SegNetError;
use crate::imaging::{GrayImage, LabelMask, Sample};
use crate::rng::SeededRng;

#[derive(Clone, Debug)]
pub struct SegTrainConfig {
    pub base_channels: usize,
    pub n_classes: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for SegTrainConfig {
    fn default() -> Self {
        Self {
            base_channels: 64,
            n_classes: 3,
            epochs: 100,
            batch_size: 2,
            learning_rate: 0.001,
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_pixel_accuracy: Option<f64>,
}

/// Trains a U-Net on the given samples.
///
/// Deterministic under `seed` (weight init and epoch shuffling). The returned
/// model is the checkpoint with the best validation loss; when `val` is empty
/// the train loss is monitored instead.
pub fn train_segmenter(
    cfg: &SegTrainConfig,
    train: &[Sample],
    val: &[Sample],
    seed: u64,
) -> Result<(UNetModel, Vec<EpochRecord>), SegNetError> {
    if train.is_empty() {
        return Err(SegNetError::InvalidConfig("empty training set".into()));
    }
    if cfg.batch_size == 0 || cfg.batch_size > train.len() {
        return Err(SegNetError::InvalidConfig(format!(
            "batch size {} for {} training samples",
            cfg.batch_size,
            train.len()
        )));
    }
    if cfg.epochs == 0 {
        return Err(SegNetError::InvalidConfig("epochs must be >= 1".into()));
    }
    let (w, h) = (train[0].image.width(), train[0].image.height());
    let div = 1 << UNET_DEPTH;
    if w % div != 0 || h % div != 0 {
        return Err(SegNetError::InvalidConfig(format!(
            "resolution {w}x{h} not divisible by {div}"
        )));
    }
    for s in train.iter().chain(val) {
        if s.image.width() != w || s.image.height() != h {
            return Err(SegNetError::InvalidConfig(format!(
                "sample {} has dims {}x{}, expected {w}x{h}",
                s.id,
                s.image.width(),
                s.image.height()
            )));
        }
    }

    let mut model = UNetModel::new(cfg.base_channels, cfg.n_classes, seed);
    let sizes: Vec<usize> = model.trainable_params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::with_lr(&sizes, cfg.learning_rate);
    let mut rng = SeededRng::derive(seed, 0x5417);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, UNetModel)> = None;

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            let x = images_to_tensor(batch.iter().map(|s| &s.image));
            let y = masks_to_one_hot(batch.iter().map(|s| &s.mask), cfg.n_classes);
            let (probs, cache) = model.forward_train(&x)?;
            let (loss, grad_logits) = cross_entropy_loss(&probs, &y)?;
            let grads = model.backward(&cache, &grad_logits)?;
            let mut params = model.trainable_params();
            adam.apply(&mut params, &grads)?;
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train.len() as f64;

        let (val_loss, val_acc) = if val.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(&model, val, cfg.n_classes)?;
            (Some(l), Some(a))
        };

        let monitored = val_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|(b, _)| monitored < *b) {
            best = Some((monitored, model.clone()));
        }
        log.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_pixel_accuracy: val_acc,
        });
    }

    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, log))
}

/// Mean cross-entropy and pixel accuracy of `model` on `samples` (inference
/// mode, evaluated one sample at a time).
fn evaluate(
    model: &UNetModel,
    samples: &[Sample],
    n_classes: usize,
) -> Result<(f64, f64), SegNetError> {
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut total = 0usize;
    for s in samples {
        let x = images_to_tensor(std::iter::once(&s.image));
        let y = masks_to_one_hot(std::iter::once(&s.mask), n_classes);
        let probs = model.forward_infer(&x)?;
        let (loss, _) = cross_entropy_loss(&probs, &y)?;
        loss_sum += loss;
        let pred = argmax_mask(&probs.into_tensor(), 0);
        correct += pred
            .labels()
            .iter()
            .zip(s.mask.labels())
            .filter(|(a, b)| a == b)
            .count();
        total += pred.labels().len();
    }
    Ok((
        loss_sum / samples.len() as f64,
        correct as f64 / total as f64,
    ))
}

/// Fraction of pixels the model classifies correctly over `samples`.
pub fn pixel_accuracy(model: &UNetModel, samples: &[Sample]) -> Result<f64, SegNetError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for s in samples {
        let pred = predict_mask(model, &s.image)?;
        correct += pred
            .labels()
            .iter()
            .zip(s.mask.labels())
            .filter(|(a, b)| a == b)
            .count();
        total += pred.labels().len();
    }
    Ok(correct as f64 / total as f64)
}

/// Per-pixel argmax segmentation; ties break toward the lower class index.
pub fn predict_mask(model: &UNetModel, img: &GrayImage) -> Result<LabelMask, SegNetError> {
    let div = 1 << UNET_DEPTH;
    if !img.width().is_multiple_of(div) || !img.height().is_multiple_of(div) {
        return Err(SegNetError::IndivisibleDims {
            h: img.height(),
            w: img.width(),
            by: div,
        });
    }
    let x = images_to_tensor(std::iter::once(img));
    let probs = model.forward_infer(&x)?;
    Ok(argmax_mask(&probs.into_tensor(), 0))
}

fn argmax_mask(probs: &Tensor4, batch: usize) -> LabelMask {
    let (_, c, h, w) = probs.dims();
    let mut labels = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let mut best = probs.at(batch, 0, y, x);
            let mut best_c = 0usize;
            for ch in 1..c {
                let v = probs.at(batch, ch, y, x);
                if v > best {
                    best = v;
                    best_c = ch;
                }
            }
            labels.push(best_c as u8);
        }
    }
    LabelMask::new(w, h, labels).expect("positive dims")
}

/// Stacks grayscale images into a (batch, 1, h, w) tensor scaled to [0, 1].
fn images_to_tensor<'a>(images: impl Iterator<Item = &'a GrayImage>) -> Tensor4 {
    let images: Vec<&GrayImage> = images.collect();
    let (w, h) = (images[0].width(), images[0].height());
    let mut data = Vec::with_capacity(images.len() * h * w);
    for img in &images {
        data.extend(img.data().iter().map(|&v| v as f64 / 255.0));
    }
    Tensor4::from_vec(images.len(), 1, h, w, data).expect("consistent dims")
}

/// Stacks label masks into a one-hot (batch, n_classes, h, w) tensor.
fn masks_to_one_hot<'a>(masks: impl Iterator<Item = &'a LabelMask>, n_classes: usize) -> Tensor4 {
    let masks: Vec<&LabelMask> = masks.collect();
    let (w, h) = (masks[0].width(), masks[0].height());
    let mut t = Tensor4::zeros(masks.len(), n_classes, h, w);
    for (b, m) in masks.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                *t.at_mut(b, m.get(x, y) as usize, y, x) = 1.0;
            }
        }
    }
    t
}

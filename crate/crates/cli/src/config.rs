//! Run configuration, loaded from JSON with field-wise defaults.

use std::path::Path;

use fundus_core::imaging::GrayMethod;
use serde::{Deserialize, Serialize};

use crate::PipelineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GrayMethodCfg {
    #[default]
    Luma,
    Green,
}

impl GrayMethodCfg {
    pub fn to_core(self) -> GrayMethod {
        match self {
            GrayMethodCfg::Luma => GrayMethod::Luma,
            GrayMethodCfg::Green => GrayMethod::Green,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Square working resolution; must be divisible by 16.
    pub resolution: usize,
    /// Width of the first encoder stage (64 paper scale, 8 toy scale).
    pub base_channels: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Training-set size after augmentation.
    pub augment_target: usize,
    /// Fraction of prepared training samples held out for validation.
    pub val_fraction: f64,
    /// Grayscale conversion applied before enhancement.
    pub gray_method: GrayMethodCfg,
    /// Preprocessing order is grayscale -> resize -> CLAHE -> augmentation.
    pub clahe_enabled: bool,
    pub clahe_clip_limit: f64,
    pub clahe_tiles: [usize; 2],
    pub noise_sigma: f64,
    pub svm_c_grid: Vec<f64>,
    pub svm_gamma_grid: Vec<f64>,
    pub svm_tolerance: f64,
    pub svm_max_passes: usize,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            resolution: 256,
            base_channels: 64,
            epochs: 100,
            batch_size: 2,
            learning_rate: 0.001,
            augment_target: 200,
            val_fraction: 0.10,
            gray_method: GrayMethodCfg::Luma,
            clahe_enabled: true,
            clahe_clip_limit: 2.0,
            clahe_tiles: [8, 8],
            noise_sigma: 10.0,
            svm_c_grid: vec![0.1, 1.0, 10.0, 100.0],
            svm_gamma_grid: vec![0.01, 0.1, 0.5, 1.0, 2.0],
            svm_tolerance: 1e-3,
            svm_max_passes: 200,
            cv_folds: 5,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Desk-scale preset used by the synthetic-phantom runs.
    pub fn toy() -> Self {
        Self {
            resolution: 64,
            base_channels: 8,
            epochs: 200,
            augment_target: 8,
            val_fraction: 0.0,
            cv_folds: 2,
            ..Self::default()
        }
    }

    /// Loads a config file (or defaults when `path` is None) and applies the
    /// seed override.
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self, PipelineError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |msg: String| Err(PipelineError::Config(msg));
        if self.resolution == 0 || !self.resolution.is_multiple_of(16) {
            return fail(format!(
                "resolution {} must be a positive multiple of 16",
                self.resolution
            ));
        }
        if self.base_channels == 0 {
            return fail("base_channels must be >= 1".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch_size must be >= 1".into());
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return fail("learning_rate must be a positive finite number".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return fail(format!(
                "val_fraction {} must be in [0, 1)",
                self.val_fraction
            ));
        }
        if self.clahe_clip_limit < 1.0 {
            return fail(format!(
                "clahe_clip_limit {} must be >= 1",
                self.clahe_clip_limit
            ));
        }
        if self.clahe_tiles[0] == 0 || self.clahe_tiles[1] == 0 {
            return fail("clahe_tiles must be at least 1x1".into());
        }
        if self.noise_sigma < 0.0 {
            return fail("noise_sigma must be non-negative".into());
        }
        if self.svm_c_grid.is_empty() || self.svm_gamma_grid.is_empty() {
            return fail("svm grids must be non-empty".into());
        }
        if self.svm_c_grid.iter().any(|&c| c <= 0.0)
            || self.svm_gamma_grid.iter().any(|&g| g <= 0.0)
        {
            return fail("svm grid values must be positive".into());
        }
        if !self.svm_tolerance.is_finite() || self.svm_tolerance <= 0.0 {
            return fail("svm_tolerance must be a positive finite number".into());
        }
        if self.cv_folds < 2 {
            return fail("cv_folds must be >= 2".into());
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical JSON serialization; changes iff the
    /// config changes.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

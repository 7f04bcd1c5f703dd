//! RBF-kernel soft-margin SVM for the glaucoma/normal decision.

mod grid;
mod persist;
mod smo;

pub use grid::{grid_search, CvCell, GridSearchResult, SvmTrainConfig};
pub use persist::{load_model, save_model};
pub use smo::{dual_objective, smo_train, SmoParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("empty input")]
    EmptyInput,
    #[error("rows have inconsistent dimensions")]
    DimMismatch,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("need at least {need} samples of class {class}, have {have}")]
    InsufficientClassCount {
        class: &'static str,
        need: usize,
        have: usize,
    },
    #[error("SMO did not converge within {sweeps} sweeps; best iterate attached")]
    NotConverged { sweeps: usize, model: Box<SvmModel> },
    #[error("no support vectors after optimization")]
    NoSupportVectors,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file malformed: {0}")]
    Malformed(String),
    #[error("model file version {0} not supported")]
    VersionMismatch(u32),
}

/// Screening outcome. Glaucoma is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagLabel {
    Glaucoma,
    Normal,
}

impl DiagLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagLabel::Glaucoma => "glaucoma",
            DiagLabel::Normal => "normal",
        }
    }

    /// +1 for glaucoma, -1 for normal.
    pub fn sign(self) -> f64 {
        match self {
            DiagLabel::Glaucoma => 1.0,
            DiagLabel::Normal => -1.0,
        }
    }
}

/// Per-feature z-score standardization fitted on training rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Identity scaler for `dim` features.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fits a z-score scaler (population standard deviation). Constant features
/// keep std 1 so they pass through unchanged.
pub fn fit_scaler(rows: &[Vec<f64>]) -> Result<Scaler, SvmError> {
    if rows.is_empty() {
        return Err(SvmError::EmptyInput);
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(SvmError::DimMismatch);
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in rows {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut std = vec![0.0; dim];
    for row in rows {
        for ((s, &v), &m) in std.iter_mut().zip(row).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    for s in std.iter_mut() {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    Ok(Scaler { mean, std })
}

pub fn apply_scaler(scaler: &Scaler, row: &[f64]) -> Vec<f64> {
    row.iter()
        .zip(&scaler.mean)
        .zip(&scaler.std)
        .map(|((&v, &m), &s)| (v - m) / s)
        .collect()
}

/// k(m, n) = exp(-gamma * ||m - n||^2)
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    debug_assert!(gamma > 0.0);
    debug_assert_eq!(a.len(), b.len());
    let sq: f64 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    (-gamma * sq).exp()
}

/// Trained SVM: support vectors live in scaled feature space.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// Signed dual coefficients alpha_i * y_i.
    pub alpha_y: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub scaler: Scaler,
}

impl SvmModel {
    /// f(x) = sum_i alpha_i y_i k(s_i, x) + b on the scaled row.
    pub fn decision_value(&self, row: &[f64]) -> f64 {
        let scaled = apply_scaler(&self.scaler, row);
        self.decision_value_scaled(&scaled)
    }

    pub(crate) fn decision_value_scaled(&self, scaled: &[f64]) -> f64 {
        let mut f = 0.0;
        for (sv, &ay) in self.support_vectors.iter().zip(&self.alpha_y) {
            f += ay * rbf_kernel(sv, scaled, self.gamma);
        }
        f + self.bias
    }

    /// Glaucoma iff f(x) >= 0; the boundary tie goes to glaucoma, the safe
    /// screening default.
    pub fn predict(&self, row: &[f64]) -> DiagLabel {
        if self.decision_value(row) >= 0.0 {
            DiagLabel::Glaucoma
        } else {
            DiagLabel::Normal
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_scaler_maps_to_plus_minus_one() {
        let rows = vec![vec![0.0, 10.0], vec![2.0, 10.0]];
        let scaler = fit_scaler(&rows).unwrap();
        assert_eq!(apply_scaler(&scaler, &rows[0]), vec![-1.0, 0.0]);
        assert_eq!(apply_scaler(&scaler, &rows[1]), vec![1.0, 0.0]);
    }

    #[test]
    fn scaled_training_rows_have_zero_mean() {
        let rows = vec![
            vec![1.0, 200.0, -3.0],
            vec![4.0, 100.0, 5.0],
            vec![-2.0, 50.0, 1.5],
            vec![0.3, 75.0, 2.0],
        ];
        let scaler = fit_scaler(&rows).unwrap();
        let mut mean = [0.0; 3];
        for row in &rows {
            let s = apply_scaler(&scaler, row);
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        for m in mean {
            assert!((m / rows.len() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_feature_passes_through() {
        let rows = vec![vec![5.0, 1.0], vec![5.0, 3.0]];
        let scaler = fit_scaler(&rows).unwrap();
        let s = apply_scaler(&scaler, &[5.0, 2.0]);
        assert_eq!(s[0], 0.0, "constant column keeps std 1, shifts by its mean");
        let t = apply_scaler(&scaler, &[6.0, 2.0]);
        assert_eq!(t[0], 1.0);
    }

    #[test]
    fn empty_scaler_input_is_an_error() {
        assert!(matches!(fit_scaler(&[]), Err(SvmError::EmptyInput)));
    }

    #[test]
    fn kernel_of_identical_points_is_one() {
        let x = vec![0.3, -1.2, 9.0];
        for gamma in [0.01, 0.5, 10.0] {
            assert_eq!(rbf_kernel(&x, &x, gamma), 1.0);
        }
    }

    #[test]
    fn kernel_unit_distance_gamma_one() {
        let a = vec![0.0, 0.0];
        let b = vec![1.0, 0.0];
        assert!((rbf_kernel(&a, &b, 1.0) - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_symmetric_and_monotone() {
        let mut rng = crate::rng::SeededRng::new(8);
        for _ in 0..50 {
            let a: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
            assert_eq!(rbf_kernel(&a, &b, 0.7), rbf_kernel(&b, &a, 0.7));
        }
        // strictly decreasing in squared distance
        let base = vec![0.0];
        let mut prev = rbf_kernel(&base, &[0.0], 1.0);
        for d in 1..10 {
            let k = rbf_kernel(&base, &[d as f64 / 3.0], 1.0);
            assert!(k < prev);
            prev = k;
        }
    }

    #[test]
    fn decision_value_ignores_support_vector_order() {
        let model = SvmModel {
            support_vectors: vec![vec![0.0], vec![1.0], vec![2.0]],
            alpha_y: vec![0.5, -1.0, 0.5],
            bias: 0.1,
            gamma: 0.5,
            c: 1.0,
            scaler: Scaler::identity(1),
        };
        let mut permuted = model.clone();
        permuted.support_vectors.reverse();
        permuted.alpha_y.reverse();
        for x in [-1.0, 0.0, 0.7, 3.0] {
            let a = model.decision_value(&[x]);
            let b = permuted.decision_value(&[x]);
            assert!((a - b).abs() < 1e-12);
        }
    }
}

//! Stratified k-fold grid search over (C, gamma).

use serde::Serialize;

use super::smo::{smo_train, SmoParams};
use super::{DiagLabel, SvmError};
use crate::rng::SeededRng;

#[derive(Clone, Debug)]
pub struct SvmTrainConfig {
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub tolerance: f64,
    pub max_passes: usize,
    pub cv_folds: usize,
    pub seed: u64,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        Self {
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            gamma_grid: vec![0.01, 0.1, 0.5, 1.0, 2.0],
            tolerance: 1e-3,
            max_passes: 200,
            cv_folds: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CvCell {
    pub c: f64,
    pub gamma: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct GridSearchResult {
    pub best_c: f64,
    pub best_gamma: f64,
    pub table: Vec<CvCell>,
}

/// Stratified fold assignment: within each class, indices are shuffled by the
/// seed and dealt round-robin.
fn fold_assignment(labels: &[DiagLabel], folds: usize, seed: u64) -> Vec<usize> {
    let mut assignment = vec![0usize; labels.len()];
    for class in [DiagLabel::Glaucoma, DiagLabel::Normal] {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        let mut rng = SeededRng::derive(seed, class as u64 + 1);
        rng.shuffle(&mut idx);
        for (k, &i) in idx.iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    assignment
}

/// Cross-validated accuracy over the (c, gamma) grid; ties break toward the
/// smaller c, then the smaller gamma.
pub fn grid_search(
    rows: &[Vec<f64>],
    labels: &[DiagLabel],
    config: &SvmTrainConfig,
) -> Result<GridSearchResult, SvmError> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(SvmError::EmptyInput);
    }
    if config.c_grid.is_empty() || config.gamma_grid.is_empty() {
        return Err(SvmError::InvalidParameter(
            "empty hyperparameter grid".into(),
        ));
    }
    if config.cv_folds < 2 {
        return Err(SvmError::InvalidParameter("cv_folds must be >= 2".into()));
    }
    for (class, name) in [
        (DiagLabel::Glaucoma, "glaucoma"),
        (DiagLabel::Normal, "normal"),
    ] {
        let have = labels.iter().filter(|&&l| l == class).count();
        if have < config.cv_folds {
            return Err(SvmError::InsufficientClassCount {
                class: name,
                need: config.cv_folds,
                have,
            });
        }
    }

    let assignment = fold_assignment(labels, config.cv_folds, config.seed);
    let mut table = Vec::with_capacity(config.c_grid.len() * config.gamma_grid.len());
    let mut best: Option<CvCell> = None;

    for (ci, &c) in config.c_grid.iter().enumerate() {
        for (gi, &gamma) in config.gamma_grid.iter().enumerate() {
            let mut correct = 0usize;
            for fold in 0..config.cv_folds {
                let mut train_rows = Vec::new();
                let mut train_labels = Vec::new();
                let mut test_idx = Vec::new();
                for i in 0..rows.len() {
                    if assignment[i] == fold {
                        test_idx.push(i);
                    } else {
                        train_rows.push(rows[i].clone());
                        train_labels.push(labels[i]);
                    }
                }
                let params = SmoParams {
                    c,
                    gamma,
                    tolerance: config.tolerance,
                    max_passes: config.max_passes,
                    seed: SeededRng::derive(config.seed, ((ci * 31 + gi) * 17 + fold) as u64)
                        .next_u64(),
                };
                // a non-converged iterate is still a usable model for CV
                let model = match smo_train(&train_rows, &train_labels, &params) {
                    Ok(m) => m,
                    Err(SvmError::NotConverged { model, .. }) => *model,
                    Err(e) => return Err(e),
                };
                correct += test_idx
                    .iter()
                    .filter(|&&i| model.predict(&rows[i]) == labels[i])
                    .count();
            }
            let accuracy = correct as f64 / rows.len() as f64;
            table.push(CvCell { c, gamma, accuracy });
            let better = match &best {
                None => true,
                Some(b) => {
                    accuracy > b.accuracy
                        || (accuracy == b.accuracy && (c < b.c || (c == b.c && gamma < b.gamma)))
                }
            };
            if better {
                best = Some(CvCell { c, gamma, accuracy });
            }
        }
    }

    let best = best.expect("non-empty grid");
    Ok(GridSearchResult {
        best_c: best.c,
        best_gamma: best.gamma,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n_per_class: usize, gap: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<DiagLabel>) {
        let mut rng = SeededRng::new(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n_per_class {
            rows.push(vec![gap + rng.next_normal() * 0.3, rng.next_normal() * 0.3]);
            labels.push(DiagLabel::Glaucoma);
            rows.push(vec![
                -gap + rng.next_normal() * 0.3,
                rng.next_normal() * 0.3,
            ]);
            labels.push(DiagLabel::Normal);
        }
        (rows, labels)
    }

    #[test]
    fn single_cell_grid_returns_that_cell() {
        let (rows, labels) = blobs(6, 3.0, 1);
        let config = SvmTrainConfig {
            c_grid: vec![1.0],
            gamma_grid: vec![0.5],
            cv_folds: 3,
            ..Default::default()
        };
        let r = grid_search(&rows, &labels, &config).unwrap();
        assert_eq!(r.best_c, 1.0);
        assert_eq!(r.best_gamma, 0.5);
        assert_eq!(r.table.len(), 1);
    }

    #[test]
    fn separable_blobs_reach_perfect_cv_accuracy() {
        let (rows, labels) = blobs(10, 4.0, 2);
        let config = SvmTrainConfig {
            cv_folds: 5,
            ..Default::default()
        };
        let r = grid_search(&rows, &labels, &config).unwrap();
        assert!(
            r.table.iter().any(|cell| cell.accuracy == 1.0),
            "some grid point must separate the blobs: {:?}",
            r.table
        );
    }

    #[test]
    fn search_is_deterministic() {
        let (rows, labels) = blobs(8, 2.0, 3);
        let config = SvmTrainConfig {
            cv_folds: 4,
            seed: 7,
            ..Default::default()
        };
        let a = grid_search(&rows, &labels, &config).unwrap();
        let b = grid_search(&rows, &labels, &config).unwrap();
        assert_eq!(a.best_c, b.best_c);
        assert_eq!(a.best_gamma, b.best_gamma);
        assert_eq!(
            serde_json::to_string(&a.table).unwrap(),
            serde_json::to_string(&b.table).unwrap()
        );
    }

    #[test]
    fn class_counts_below_fold_count_are_rejected() {
        let (rows, labels) = blobs(3, 2.0, 4);
        let config = SvmTrainConfig {
            cv_folds: 5,
            ..Default::default()
        };
        assert!(matches!(
            grid_search(&rows, &labels, &config),
            Err(SvmError::InsufficientClassCount { .. })
        ));
    }

    #[test]
    fn ties_prefer_smaller_c_then_gamma() {
        let (rows, labels) = blobs(10, 4.0, 5);
        let config = SvmTrainConfig {
            c_grid: vec![100.0, 0.5],
            gamma_grid: vec![2.0, 0.1],
            cv_folds: 4,
            ..Default::default()
        };
        let r = grid_search(&rows, &labels, &config).unwrap();
        let best_acc = r
            .table
            .iter()
            .map(|c| c.accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        let candidates: Vec<&CvCell> = r.table.iter().filter(|c| c.accuracy == best_acc).collect();
        let min_c = candidates.iter().map(|c| c.c).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_c, min_c);
        let min_gamma = candidates
            .iter()
            .filter(|cell| cell.c == min_c)
            .map(|c| c.gamma)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_gamma, min_gamma);
    }

    #[test]
    fn fold_assignment_is_stratified() {
        let labels: Vec<DiagLabel> = (0..20)
            .map(|i| {
                if i % 2 == 0 {
                    DiagLabel::Glaucoma
                } else {
                    DiagLabel::Normal
                }
            })
            .collect();
        let assignment = fold_assignment(&labels, 5, 9);
        for fold in 0..5 {
            let g = labels
                .iter()
                .zip(&assignment)
                .filter(|(&l, &a)| l == DiagLabel::Glaucoma && a == fold)
                .count();
            let n = labels
                .iter()
                .zip(&assignment)
                .filter(|(&l, &a)| l == DiagLabel::Normal && a == fold)
                .count();
            assert_eq!(g, 2);
            assert_eq!(n, 2);
        }
    }
}

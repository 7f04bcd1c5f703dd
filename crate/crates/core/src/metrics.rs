//! Pixel-level segmentation metrics and case-level diagnostic metrics.

use serde::Serialize;
use thiserror::Error;

use crate::imaging::BinaryMask;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("empty score list")]
    EmptyList,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn new(true_pos: u64, false_pos: u64, true_neg: u64, false_neg: u64) -> Self {
        Self {
            true_pos,
            false_pos,
            true_neg,
            false_neg,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Pixel-wise confusion counts of a predicted mask against ground truth.
pub fn confusion_counts(
    pred: &BinaryMask,
    truth: &BinaryMask,
) -> Result<ConfusionCounts, MetricsError> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(MetricsError::DimMismatch(format!(
            "{}x{} vs {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        match (p, t) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
            (false, false) => c.true_neg += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SegScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub jaccard: f64,
}

/// Ratio with the documented 0/0 convention for segmentation scores: an
/// empty prediction of an empty truth is a perfect score.
fn seg_ratio(num: u64, den: u64, both_empty: bool) -> f64 {
    if den == 0 {
        if both_empty {
            1.0
        } else {
            0.0
        }
    } else {
        num as f64 / den as f64
    }
}

pub fn seg_scores(c: &ConfusionCounts) -> SegScores {
    let both_empty = c.true_pos == 0 && c.false_pos == 0 && c.false_neg == 0;
    let accuracy = (c.true_pos + c.true_neg) as f64 / c.total() as f64;
    let precision = seg_ratio(c.true_pos, c.true_pos + c.false_pos, both_empty);
    let recall = seg_ratio(c.true_pos, c.true_pos + c.false_neg, both_empty);
    let f1 = seg_ratio(
        2 * c.true_pos,
        2 * c.true_pos + c.false_pos + c.false_neg,
        both_empty,
    );
    let jaccard = seg_ratio(
        c.true_pos,
        c.true_pos + c.false_pos + c.false_neg,
        both_empty,
    );
    SegScores {
        accuracy,
        precision,
        recall,
        f1,
        jaccard,
    }
}

/// Arithmetic mean of per-image scores.
pub fn mean_seg_scores(scores: &[SegScores]) -> Result<SegScores, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    let n = scores.len() as f64;
    Ok(SegScores {
        accuracy: scores.iter().map(|s| s.accuracy).sum::<f64>() / n,
        precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
        f1: scores.iter().map(|s| s.f1).sum::<f64>() / n,
        jaccard: scores.iter().map(|s| s.jaccard).sum::<f64>() / n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagScores {
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub npv: f64,
    pub accuracy: f64,
    /// True when any denominator was 0 and the score was reported as 0.
    pub degenerate: bool,
}

pub fn diag_scores(c: &ConfusionCounts) -> DiagScores {
    let mut degenerate = false;
    let mut ratio = |num: u64, den: u64| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let sensitivity = ratio(c.true_pos, c.true_pos + c.false_neg);
    let specificity = ratio(c.true_neg, c.true_neg + c.false_pos);
    let precision = ratio(c.true_pos, c.true_pos + c.false_pos);
    let npv = ratio(c.true_neg, c.true_neg + c.false_neg);
    let accuracy = ratio(c.true_pos + c.true_neg, c.total());
    DiagScores {
        sensitivity,
        specificity,
        precision,
        npv,
        accuracy,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn identical_full_masks_count_only_true_positives() {
        let m = BinaryMask::new(10, 10, vec![true; 100]).unwrap();
        let c = confusion_counts(&m, &m).unwrap();
        assert_eq!(c, ConfusionCounts::new(100, 0, 0, 0));
    }

    #[test]
    fn all_true_prediction_of_empty_truth_is_all_false_positive() {
        let pred = BinaryMask::new(4, 4, vec![true; 16]).unwrap();
        let truth = BinaryMask::empty(4, 4);
        let c = confusion_counts(&pred, &truth).unwrap();
        assert_eq!(c.false_pos, 16);
        assert_eq!(c.total(), 16);
    }

    #[test]
    fn counts_sum_to_pixel_count() {
        let mut rng = SeededRng::new(3);
        for _ in 0..10 {
            let pred_data: Vec<bool> = (0..48).map(|_| rng.next_u64().is_multiple_of(2)).collect();
            let truth_data: Vec<bool> = (0..48).map(|_| rng.next_u64().is_multiple_of(2)).collect();
            let pred = BinaryMask::new(8, 6, pred_data).unwrap();
            let truth = BinaryMask::new(8, 6, truth_data).unwrap();
            assert_eq!(confusion_counts(&pred, &truth).unwrap().total(), 48);
        }
    }

    #[test]
    fn dim_mismatch_is_rejected() {
        let a = BinaryMask::empty(3, 3);
        let b = BinaryMask::empty(3, 4);
        assert!(confusion_counts(&a, &b).is_err());
    }

    #[test]
    fn precision_matches_the_table_margin() {
        let s = seg_scores(&ConfusionCounts::new(10, 1, 0, 0));
        assert!((s.precision - 10.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_masks_score_one_everywhere() {
        let s = seg_scores(&ConfusionCounts::new(42, 0, 58, 0));
        assert_eq!(s.accuracy, 1.0);
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.f1, 1.0);
        assert_eq!(s.jaccard, 1.0);
    }

    #[test]
    fn half_precision_half_recall() {
        // precision = recall = 0.5 -> f1 = 0.5, jaccard = 1/3
        let s = seg_scores(&ConfusionCounts::new(5, 5, 0, 5));
        assert!((s.precision - 0.5).abs() < 1e-12);
        assert!((s.recall - 0.5).abs() < 1e-12);
        assert!((s.f1 - 0.5).abs() < 1e-12);
        assert!((s.jaccard - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_prediction_of_empty_truth_is_perfect() {
        let s = seg_scores(&ConfusionCounts::new(0, 0, 64, 0));
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.f1, 1.0);
        assert_eq!(s.jaccard, 1.0);
    }

    #[test]
    fn f1_jaccard_identity_over_random_counts() {
        let mut rng = SeededRng::new(99);
        for _ in 0..1000 {
            let c = ConfusionCounts::new(
                rng.next_u64() % 50,
                rng.next_u64() % 50,
                rng.next_u64() % 50 + 1,
                rng.next_u64() % 50,
            );
            let s = seg_scores(&c);
            let want = 2.0 * s.jaccard / (1.0 + s.jaccard);
            assert!(
                (s.f1 - want).abs() < 1e-12,
                "counts {c:?}: f1 {} vs 2j/(1+j) {want}",
                s.f1
            );
        }
    }

    #[test]
    fn precision_recall_swap_under_argument_exchange() {
        let mut rng = SeededRng::new(123);
        for _ in 0..20 {
            let pred_data: Vec<bool> = (0..64).map(|_| rng.next_u64().is_multiple_of(3)).collect();
            let truth_data: Vec<bool> = (0..64).map(|_| rng.next_u64().is_multiple_of(3)).collect();
            let pred = BinaryMask::new(8, 8, pred_data).unwrap();
            let truth = BinaryMask::new(8, 8, truth_data).unwrap();
            let ab = seg_scores(&confusion_counts(&pred, &truth).unwrap());
            let ba = seg_scores(&confusion_counts(&truth, &pred).unwrap());
            assert!((ab.precision - ba.recall).abs() < 1e-12);
            assert!((ab.recall - ba.precision).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_of_single_image_is_unchanged() {
        let s = seg_scores(&ConfusionCounts::new(3, 1, 10, 2));
        let m = mean_seg_scores(&[s]).unwrap();
        assert_eq!(m, s);
    }

    #[test]
    fn mean_averages_accuracy() {
        let a = SegScores {
            accuracy: 0.9,
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            jaccard: 1.0,
        };
        let b = SegScores {
            accuracy: 1.0,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            jaccard: 0.0,
        };
        let m = mean_seg_scores(&[a, b]).unwrap();
        assert!((m.accuracy - 0.95).abs() < 1e-12);
        assert!((m.f1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mean_of_empty_list_is_an_error() {
        assert!(matches!(mean_seg_scores(&[]), Err(MetricsError::EmptyList)));
    }

    #[test]
    fn paper_confusion_matrix_values() {
        // tp 10, fp 1, fn 1, tn 18
        let d = diag_scores(&ConfusionCounts::new(10, 1, 18, 1));
        assert!((d.sensitivity * 100.0 - 90.9).abs() < 0.05);
        assert!((d.specificity * 100.0 - 94.73).abs() < 0.01);
        assert!((d.precision * 100.0 - 90.9).abs() < 0.05);
        assert!((d.npv * 100.0 - 94.73).abs() < 0.01);
        assert!((d.accuracy * 100.0 - 93.33).abs() < 0.01);
        assert!(!d.degenerate);
    }

    #[test]
    fn perfect_classifier_scores_one() {
        let d = diag_scores(&ConfusionCounts::new(12, 0, 20, 0));
        assert_eq!(d.sensitivity, 1.0);
        assert_eq!(d.specificity, 1.0);
        assert_eq!(d.precision, 1.0);
        assert_eq!(d.npv, 1.0);
        assert_eq!(d.accuracy, 1.0);
    }

    #[test]
    fn all_wrong_classifier_scores_zero() {
        let d = diag_scores(&ConfusionCounts::new(0, 4, 0, 4));
        assert_eq!(d.sensitivity, 0.0);
        assert_eq!(d.specificity, 0.0);
        assert!(!d.degenerate);
    }

    #[test]
    fn degenerate_denominators_are_flagged() {
        let d = diag_scores(&ConfusionCounts::new(0, 0, 5, 0));
        assert!(d.degenerate, "no positives at all: sensitivity is 0/0");
        assert_eq!(d.sensitivity, 0.0);
    }
}

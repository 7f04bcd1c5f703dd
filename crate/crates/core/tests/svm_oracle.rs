//! SMO against an independent projected-gradient solver of the same dual.

use fundus_core::classifier::{
    dual_objective, rbf_kernel, smo_train, DiagLabel, SmoParams, SvmError,
};
use fundus_core::rng::SeededRng;

/// Projects onto { 0 <= a <= c, sum a_i y_i = 0 } by bisection on the
/// multiplier of the equality constraint.
fn project(alpha: &mut [f64], y: &[f64], c: f64) {
    let residual = |lambda: f64| -> f64 {
        alpha
            .iter()
            .zip(y)
            .map(|(&a, &yi)| yi * (a + lambda * yi).clamp(0.0, c))
            .sum()
    };
    let mut lo = -1e9;
    let mut hi = 1e9;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    for (a, &yi) in alpha.iter_mut().zip(y) {
        *a = (*a + lambda * yi).clamp(0.0, c);
    }
}

/// Plain projected-gradient ascent on the dual, started from zero.
fn projected_gradient_dual(kernel: &[Vec<f64>], y: &[f64], c: f64, iterations: usize) -> Vec<f64> {
    let n = y.len();
    let step = 1.0 / n as f64;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![0.0; n];
    for _ in 0..iterations {
        for i in 0..n {
            let mut q = 0.0;
            for j in 0..n {
                q += y[i] * y[j] * kernel[i][j] * alpha[j];
            }
            grad[i] = 1.0 - q;
        }
        for i in 0..n {
            alpha[i] += step * grad[i];
        }
        project(&mut alpha, y, c);
    }
    alpha
}

fn blobs(n_per_class: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<DiagLabel>) {
    let mut rng = SeededRng::new(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n_per_class {
        rows.push(vec![2.0 + rng.next_normal(), 2.0 + rng.next_normal()]);
        labels.push(DiagLabel::Glaucoma);
    }
    for _ in 0..n_per_class {
        rows.push(vec![-2.0 + rng.next_normal(), -2.0 + rng.next_normal()]);
        labels.push(DiagLabel::Normal);
    }
    (rows, labels)
}

#[test]
fn smo_matches_projected_gradient_objective_on_blobs() {
    let (rows, labels) = blobs(20, 2024);
    let (c, gamma) = (10.0, 1.0);
    let params = SmoParams {
        c,
        gamma,
        ..Default::default()
    };
    let model = smo_train(&rows, &labels, &params).unwrap();

    let n = rows.len();
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let mut kernel = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            kernel[i][j] = rbf_kernel(&rows[i], &rows[j], gamma);
        }
    }

    // recover the full alpha vector from the sparse model
    let mut alphas = vec![0.0; n];
    for (sv, &ay) in model.support_vectors.iter().zip(&model.alpha_y) {
        let i = rows
            .iter()
            .position(|r| r == sv)
            .expect("sv is a training row");
        alphas[i] = ay.abs();
    }

    let smo_obj = dual_objective(&kernel, &y, &alphas);
    let oracle_alpha = projected_gradient_dual(&kernel, &y, c, 200_000);
    let oracle_obj = dual_objective(&kernel, &y, &oracle_alpha);
    assert!(
        (smo_obj - oracle_obj).abs() <= 1e-3,
        "smo {smo_obj} vs projected-gradient {oracle_obj}"
    );

    // both solvers respect the constraints
    let sum_ay: f64 = alphas.iter().zip(&y).map(|(&a, &yi)| a * yi).sum();
    assert!(sum_ay.abs() < 1e-9);
    assert!(alphas.iter().all(|&a| (0.0..=c + 1e-12).contains(&a)));

    // training accuracy
    let correct = rows
        .iter()
        .zip(&labels)
        .filter(|(r, &l)| model.predict(r) == l)
        .count();
    assert!(correct as f64 / n as f64 >= 0.95, "{correct}/{n}");
}

#[test]
fn smo_matches_oracle_on_a_harder_overlap() {
    // closer blobs, some points inside the margin, bounded multipliers
    let mut rng = SeededRng::new(7);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..15 {
        rows.push(vec![0.7 + rng.next_normal(), 0.7 + rng.next_normal()]);
        labels.push(DiagLabel::Glaucoma);
        rows.push(vec![-0.7 + rng.next_normal(), -0.7 + rng.next_normal()]);
        labels.push(DiagLabel::Normal);
    }
    let (c, gamma) = (2.0, 0.5);
    let params = SmoParams {
        c,
        gamma,
        max_passes: 500,
        ..Default::default()
    };
    let model = match smo_train(&rows, &labels, &params) {
        Ok(m) => m,
        Err(SvmError::NotConverged { model, .. }) => *model,
        Err(e) => panic!("{e}"),
    };

    let n = rows.len();
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let mut kernel = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            kernel[i][j] = rbf_kernel(&rows[i], &rows[j], gamma);
        }
    }
    let mut alphas = vec![0.0; n];
    for (sv, &ay) in model.support_vectors.iter().zip(&model.alpha_y) {
        let i = rows
            .iter()
            .position(|r| r == sv)
            .expect("sv is a training row");
        alphas[i] = ay.abs();
    }
    let smo_obj = dual_objective(&kernel, &y, &alphas);
    let oracle = projected_gradient_dual(&kernel, &y, c, 300_000);
    let oracle_obj = dual_objective(&kernel, &y, &oracle);
    assert!(
        (smo_obj - oracle_obj).abs() <= 1e-3,
        "smo {smo_obj} vs oracle {oracle_obj}"
    );
}

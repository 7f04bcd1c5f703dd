//! Sequential minimal optimization for the soft-margin dual.
//!
//! Simplified SMO: full sweeps over all points alternate with sweeps over the
//! unbounded (violating) subset until a full sweep makes no progress and the
//! KKT conditions hold within tolerance. Pair partners are chosen by the
//! largest |E_i - E_j| heuristic with seeded-random fallback.

use super::{DiagLabel, Scaler, SvmError, SvmModel};
use crate::rng::SeededRng;

#[derive(Clone, Debug)]
pub struct SmoParams {
    pub c: f64,
    pub gamma: f64,
    /// KKT tolerance.
    pub tolerance: f64,
    /// Sweep budget before reporting non-convergence.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 0.5,
            tolerance: 1e-3,
            max_passes: 200,
            seed: 0,
        }
    }
}

/// Dual objective W(alpha) = sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
pub fn dual_objective(kernel: &[Vec<f64>], y: &[f64], alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let obj: f64 = alphas.iter().sum();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alphas[i] * alphas[j] * y[i] * y[j] * kernel[i][j];
        }
    }
    obj - 0.5 * quad
}

struct SmoState<'a> {
    kernel: &'a [Vec<f64>],
    y: &'a [f64],
    alphas: Vec<f64>,
    bias: f64,
    c: f64,
    tol: f64,
}

impl SmoState<'_> {
    /// f(x_i) = sum_j alpha_j y_j K_ij + b, computed on demand.
    fn f(&self, i: usize) -> f64 {
        let mut u = 0.0;
        for (j, &a) in self.alphas.iter().enumerate() {
            if a != 0.0 {
                u += a * self.y[j] * self.kernel[i][j];
            }
        }
        u + self.bias
    }

    fn error(&self, i: usize) -> f64 {
        self.f(i) - self.y[i]
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.error(i) * self.y[i]; // y_i f_i - 1
        (r < -self.tol && self.alphas[i] < self.c) || (r > self.tol && self.alphas[i] > 0.0)
    }

    fn is_unbounded(&self, i: usize) -> bool {
        self.alphas[i] > 0.0 && self.alphas[i] < self.c
    }

    /// Joint optimization of the pair (i, j). Returns true on real progress.
    fn step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (a1, a2) = (self.alphas[i], self.alphas[j]);
        let (y1, y2) = (self.y[i], self.y[j]);
        let e1 = self.error(i);
        let e2 = self.error(j);
        let (low, high) = if y1 != y2 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if low >= high {
            return false;
        }
        let k11 = self.kernel[i][i];
        let k22 = self.kernel[j][j];
        let k12 = self.kernel[i][j];
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2_new = if eta > 1e-12 {
            (a2 + y2 * (e1 - e2) / eta).clamp(low, high)
        } else {
            // flat direction: pick the better bound by the objective change
            let f1 = y1 * (e1 + self.bias) - a1 * k11 - y1 * y2 * a2 * k12;
            let f2 = y2 * (e2 + self.bias) - y1 * y2 * a1 * k12 - a2 * k22;
            let l1 = a1 + y1 * y2 * (a2 - low);
            let h1 = a1 + y1 * y2 * (a2 - high);
            let obj_low = l1 * f1
                + low * f2
                + 0.5 * l1 * l1 * k11
                + 0.5 * low * low * k22
                + y1 * y2 * low * l1 * k12;
            let obj_high = h1 * f1
                + high * f2
                + 0.5 * h1 * h1 * k11
                + 0.5 * high * high * k22
                + y1 * y2 * high * h1 * k12;
            if obj_low < obj_high - 1e-12 {
                low
            } else if obj_high < obj_low - 1e-12 {
                high
            } else {
                return false;
            }
        };
        // snap to the box to avoid lingering epsilon-bounded multipliers
        if a2_new < 1e-10 {
            a2_new = 0.0;
        } else if a2_new > self.c - 1e-10 {
            a2_new = self.c;
        }
        if (a2_new - a2).abs() < 1e-8 * (a2_new + a2 + 1e-8) {
            return false;
        }
        let a1_new = a1 + y1 * y2 * (a2 - a2_new);

        let b1 = self.bias - e1 - y1 * (a1_new - a1) * k11 - y2 * (a2_new - a2) * k12;
        let b2 = self.bias - e2 - y1 * (a1_new - a1) * k12 - y2 * (a2_new - a2) * k22;
        self.bias = if a1_new > 0.0 && a1_new < self.c {
            b1
        } else if a2_new > 0.0 && a2_new < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        self.alphas[i] = a1_new;
        self.alphas[j] = a2_new;
        true
    }

    /// Tries partners for `i`: best |E_i - E_j| among unbounded points, then
    /// the remaining unbounded points, then everything, both from a seeded
    /// random start.
    fn examine(&mut self, i: usize, rng: &mut SeededRng) -> bool {
        if !self.violates_kkt(i) {
            return false;
        }
        let n = self.alphas.len();
        let e1 = self.error(i);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if j != i && self.is_unbounded(j) {
                let gap = (e1 - self.error(j)).abs();
                if best.is_none_or(|(_, g)| gap > g) {
                    best = Some((j, gap));
                }
            }
        }
        if let Some((j, _)) = best {
            if self.step(i, j) {
                return true;
            }
        }
        let start = rng.next_index(n);
        for off in 0..n {
            let j = (start + off) % n;
            if j != i && self.is_unbounded(j) && self.step(i, j) {
                return true;
            }
        }
        let start = rng.next_index(n);
        for off in 0..n {
            let j = (start + off) % n;
            if j != i && self.step(i, j) {
                return true;
            }
        }
        false
    }

    /// Recomputes the bias from the unbounded support vectors; falls back to
    /// the midpoint over all support vectors.
    fn final_bias(&self) -> f64 {
        let margin = 1e-8 * self.c.max(1.0);
        let mut sum = 0.0;
        let mut count = 0usize;
        let raw = |i: usize| -> f64 {
            let mut u = 0.0;
            for (j, &a) in self.alphas.iter().enumerate() {
                if a != 0.0 {
                    u += a * self.y[j] * self.kernel[i][j];
                }
            }
            self.y[i] - u
        };
        for i in 0..self.alphas.len() {
            if self.alphas[i] > margin && self.alphas[i] < self.c - margin {
                sum += raw(i);
                count += 1;
            }
        }
        if count > 0 {
            return sum / count as f64;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.alphas.len() {
            if self.alphas[i] > 0.0 {
                let b = raw(i);
                lo = lo.min(b);
                hi = hi.max(b);
            }
        }
        if lo.is_finite() {
            (lo + hi) / 2.0
        } else {
            self.bias
        }
    }
}

/// Trains an SVM on pre-scaled rows.
///
/// Every dual coefficient ends in [0, c], sum(alpha_i y_i) = 0 is maintained
/// exactly by the pairwise updates, and the result is deterministic under
/// `params.seed`. Non-convergence within the sweep budget returns
/// [`SvmError::NotConverged`] carrying the best iterate.
pub fn smo_train(
    rows: &[Vec<f64>],
    labels: &[DiagLabel],
    params: &SmoParams,
) -> Result<SvmModel, SvmError> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(SvmError::EmptyInput);
    }
    if rows.len() < 2 {
        return Err(SvmError::SingleClass);
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(SvmError::DimMismatch);
    }
    if !labels.contains(&DiagLabel::Glaucoma) || !labels.contains(&DiagLabel::Normal) {
        return Err(SvmError::SingleClass);
    }
    if params.gamma <= 0.0 {
        return Err(SvmError::InvalidParameter(format!(
            "gamma {}",
            params.gamma
        )));
    }
    if params.c <= 0.0 {
        return Err(SvmError::InvalidParameter(format!("c {}", params.c)));
    }

    let n = rows.len();
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let mut kernel = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let k = super::rbf_kernel(&rows[i], &rows[j], params.gamma);
            kernel[i][j] = k;
            kernel[j][i] = k;
        }
    }

    let mut state = SmoState {
        kernel: &kernel,
        y: &y,
        alphas: vec![0.0; n],
        bias: 0.0,
        c: params.c,
        tol: params.tolerance,
    };
    let mut rng = SeededRng::derive(params.seed, 0x50f7);

    let mut sweeps = 0usize;
    let mut examine_all = true;
    let mut converged = false;
    while sweeps < params.max_passes {
        sweeps += 1;
        let mut changed = 0usize;
        if examine_all {
            for i in 0..n {
                if state.examine(i, &mut rng) {
                    changed += 1;
                }
            }
        } else {
            for i in 0..n {
                if state.is_unbounded(i) && state.examine(i, &mut rng) {
                    changed += 1;
                }
            }
        }
        if examine_all {
            if changed == 0 {
                converged = true;
                break;
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }

    state.bias = state.final_bias();
    let model = build_model(&state, rows, params, &Scaler::identity(dim))?;
    if converged {
        Ok(model)
    } else {
        Err(SvmError::NotConverged {
            sweeps,
            model: Box::new(model),
        })
    }
}

fn build_model(
    state: &SmoState<'_>,
    rows: &[Vec<f64>],
    params: &SmoParams,
    scaler: &Scaler,
) -> Result<SvmModel, SvmError> {
    let mut support_vectors = Vec::new();
    let mut alpha_y = Vec::new();
    for (i, &a) in state.alphas.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(rows[i].clone());
            alpha_y.push(a * state.y[i]);
        }
    }
    if support_vectors.is_empty() {
        return Err(SvmError::NoSupportVectors);
    }
    Ok(SvmModel {
        support_vectors,
        alpha_y,
        bias: state.bias,
        gamma: params.gamma,
        c: params.c,
        scaler: scaler.clone(),
    })
}

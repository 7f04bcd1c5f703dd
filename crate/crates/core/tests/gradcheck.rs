//! Finite-difference verification of every backward pass.
//!
//! Each layer's analytic gradient is compared against central differences of
//! a random linear projection of the layer output (step 1e-5, 64-bit floats).
#![allow(clippy::needless_range_loop)]

use fundus_core::rng::SeededRng;
use fundus_core::segnet::{
    concat_backward, concat_channels, cross_entropy_loss, maxpool2_backward, maxpool2_forward,
    relu_backward, relu_forward, softmax_channels, BatchNormLayer, ConvLayer, Tensor4, UNetModel,
    UpConvLayer,
};

const FD_STEP: f64 = 1e-5;
const LAYER_TOL: f64 = 1e-4;
const E2E_TOL: f64 = 1e-3;

fn random_tensor(n: usize, c: usize, h: usize, w: usize, rng: &mut SeededRng) -> Tensor4 {
    let data = (0..n * c * h * w).map(|_| rng.next_normal()).collect();
    Tensor4::from_vec(n, c, h, w, data).unwrap()
}

/// |a - n| <= atol + rtol * max(|a|, |n|)
fn check_close(analytic: f64, numeric: f64, rtol: f64, what: &str) {
    let tol = 1e-7 + rtol * analytic.abs().max(numeric.abs());
    assert!(
        (analytic - numeric).abs() <= tol,
        "{what}: analytic {analytic} vs numeric {numeric}"
    );
}

/// Central finite difference of `f` under perturbation of one slot.
fn central_diff(mut f: impl FnMut(f64) -> f64, value: f64) -> f64 {
    let hi = f(value + FD_STEP);
    let lo = f(value - FD_STEP);
    (hi - lo) / (2.0 * FD_STEP)
}

fn projection_loss(out: &Tensor4, weights: &[f64]) -> f64 {
    out.data().iter().zip(weights).map(|(&o, &w)| o * w).sum()
}

#[test]
fn conv_backward_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = SeededRng::new(100 + seed);
        let x = random_tensor(2, 3, 6, 5, &mut rng);
        let layer = ConvLayer::new(3, 4, &mut rng);
        let proj: Vec<f64> = (0..2 * 4 * 6 * 5).map(|_| rng.next_normal()).collect();

        let grad_out = Tensor4::from_vec(2, 4, 6, 5, proj.clone()).unwrap();
        let (gx, gw, gb) = layer.backward(&x, &grad_out).unwrap();

        for i in 0..x.numel() {
            let numeric = central_diff(
                |v| {
                    let mut xp = x.clone();
                    xp.data_mut()[i] = v;
                    projection_loss(&layer.forward(&xp).unwrap(), &proj)
                },
                x.data()[i],
            );
            check_close(gx.data()[i], numeric, LAYER_TOL, "conv grad_x");
        }
        for i in 0..layer.weights.len() {
            let numeric = central_diff(
                |v| {
                    let mut lp = layer.clone();
                    lp.weights[i] = v;
                    projection_loss(&lp.forward(&x).unwrap(), &proj)
                },
                layer.weights[i],
            );
            check_close(gw[i], numeric, LAYER_TOL, "conv grad_w");
        }
        for i in 0..layer.bias.len() {
            let numeric = central_diff(
                |v| {
                    let mut lp = layer.clone();
                    lp.bias[i] = v;
                    projection_loss(&lp.forward(&x).unwrap(), &proj)
                },
                layer.bias[i],
            );
            check_close(gb[i], numeric, LAYER_TOL, "conv grad_b");
        }
    }
}

#[test]
fn upconv_backward_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = SeededRng::new(200 + seed);
        let x = random_tensor(2, 3, 3, 4, &mut rng);
        let layer = UpConvLayer::new(3, 2, &mut rng);
        let proj: Vec<f64> = (0..2 * 2 * 6 * 8).map(|_| rng.next_normal()).collect();

        let grad_out = Tensor4::from_vec(2, 2, 6, 8, proj.clone()).unwrap();
        let (gx, gw, gb) = layer.backward(&x, &grad_out).unwrap();

        for i in 0..x.numel() {
            let numeric = central_diff(
                |v| {
                    let mut xp = x.clone();
                    xp.data_mut()[i] = v;
                    projection_loss(&layer.forward(&xp).unwrap(), &proj)
                },
                x.data()[i],
            );
            check_close(gx.data()[i], numeric, LAYER_TOL, "upconv grad_x");
        }
        for i in 0..layer.weights.len() {
            let numeric = central_diff(
                |v| {
                    let mut lp = layer.clone();
                    lp.weights[i] = v;
                    projection_loss(&lp.forward(&x).unwrap(), &proj)
                },
                layer.weights[i],
            );
            check_close(gw[i], numeric, LAYER_TOL, "upconv grad_w");
        }
        for i in 0..layer.bias.len() {
            let numeric = central_diff(
                |v| {
                    let mut lp = layer.clone();
                    lp.bias[i] = v;
                    projection_loss(&lp.forward(&x).unwrap(), &proj)
                },
                layer.bias[i],
            );
            check_close(gb[i], numeric, LAYER_TOL, "upconv grad_b");
        }
    }
}

#[test]
fn batchnorm_backward_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = SeededRng::new(300 + seed);
        let x = random_tensor(2, 3, 4, 4, &mut rng);
        let mut layer = BatchNormLayer::new(3);
        for g in layer.gamma.iter_mut() {
            *g = 1.0 + 0.3 * rng.next_normal();
        }
        for b in layer.beta.iter_mut() {
            *b = 0.3 * rng.next_normal();
        }
        let proj: Vec<f64> = (0..x.numel()).map(|_| rng.next_normal()).collect();

        let (_, cache) = layer.clone().forward_train(&x).unwrap();
        let grad_out = Tensor4::from_vec(2, 3, 4, 4, proj.clone()).unwrap();
        let (gx, dgamma, dbeta) = layer.backward(&cache, &grad_out).unwrap();

        let eval = |xp: &Tensor4, lp: &BatchNormLayer| {
            let (out, _) = lp.clone().forward_train(xp).unwrap();
            projection_loss(&out, &proj)
        };
        for i in 0..x.numel() {
            let numeric = central_diff(
                |v| {
                    let mut xp = x.clone();
                    xp.data_mut()[i] = v;
                    eval(&xp, &layer)
                },
                x.data()[i],
            );
            check_close(gx.data()[i], numeric, LAYER_TOL, "bn grad_x");
        }
        for i in 0..3 {
            let numeric = central_diff(
                |v| {
                    let mut lp = layer.clone();
                    lp.gamma[i] = v;
                    eval(&x, &lp)
                },
                layer.gamma[i],
            );
            check_close(dgamma[i], numeric, LAYER_TOL, "bn grad_gamma");
            let numeric = central_diff(
                |v| {
                    let mut lp = layer.clone();
                    lp.beta[i] = v;
                    eval(&x, &lp)
                },
                layer.beta[i],
            );
            check_close(dbeta[i], numeric, LAYER_TOL, "bn grad_beta");
        }
    }
}

#[test]
fn relu_backward_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = SeededRng::new(400 + seed);
        let x = random_tensor(1, 2, 5, 5, &mut rng);
        let proj: Vec<f64> = (0..x.numel()).map(|_| rng.next_normal()).collect();
        let grad_out = Tensor4::from_vec(1, 2, 5, 5, proj.clone()).unwrap();
        let gx = relu_backward(&x, &grad_out);
        for i in 0..x.numel() {
            if x.data()[i].abs() < 10.0 * FD_STEP {
                continue; // the kink at zero has no two-sided derivative
            }
            let numeric = central_diff(
                |v| {
                    let mut xp = x.clone();
                    xp.data_mut()[i] = v;
                    projection_loss(&relu_forward(&xp), &proj)
                },
                x.data()[i],
            );
            check_close(gx.data()[i], numeric, LAYER_TOL, "relu grad");
        }
    }
}

#[test]
fn maxpool_backward_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = SeededRng::new(500 + seed);
        let x = random_tensor(1, 2, 6, 6, &mut rng);
        let proj: Vec<f64> = (0..2 * 3 * 3).map(|_| rng.next_normal()).collect();
        let (_, idx) = maxpool2_forward(&x).unwrap();
        let grad_out = Tensor4::from_vec(1, 2, 3, 3, proj.clone()).unwrap();
        let gx = maxpool2_backward(&idx, &grad_out).unwrap();
        for i in 0..x.numel() {
            let numeric = central_diff(
                |v| {
                    let mut xp = x.clone();
                    xp.data_mut()[i] = v;
                    let (out, _) = maxpool2_forward(&xp).unwrap();
                    projection_loss(&out, &proj)
                },
                x.data()[i],
            );
            check_close(gx.data()[i], numeric, LAYER_TOL, "maxpool grad");
        }
    }
}

#[test]
fn softmax_cross_entropy_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = SeededRng::new(600 + seed);
        let logits = random_tensor(2, 3, 3, 3, &mut rng);
        let mut target = Tensor4::zeros(2, 3, 3, 3);
        for b in 0..2 {
            for y in 0..3 {
                for x in 0..3 {
                    let cls = rng.next_index(3);
                    *target.at_mut(b, cls, y, x) = 1.0;
                }
            }
        }
        let probs = softmax_channels(&logits);
        let (_, grad_logits) = cross_entropy_loss(&probs, &target).unwrap();
        for i in 0..logits.numel() {
            let numeric = central_diff(
                |v| {
                    let mut lp = logits.clone();
                    lp.data_mut()[i] = v;
                    let p = softmax_channels(&lp);
                    cross_entropy_loss(&p, &target).unwrap().0
                },
                logits.data()[i],
            );
            check_close(grad_logits.data()[i], numeric, LAYER_TOL, "softmax+ce grad");
        }
    }
}

#[test]
fn concat_backward_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = SeededRng::new(700 + seed);
        let a = random_tensor(1, 2, 4, 4, &mut rng);
        let b = random_tensor(1, 3, 4, 4, &mut rng);
        let proj: Vec<f64> = (0..5 * 4 * 4).map(|_| rng.next_normal()).collect();
        let grad_out = Tensor4::from_vec(1, 5, 4, 4, proj.clone()).unwrap();
        let (ga, gb) = concat_backward(&grad_out, 2).unwrap();
        for i in 0..a.numel() {
            let numeric = central_diff(
                |v| {
                    let mut ap = a.clone();
                    ap.data_mut()[i] = v;
                    projection_loss(&concat_channels(&ap, &b).unwrap(), &proj)
                },
                a.data()[i],
            );
            check_close(ga.data()[i], numeric, LAYER_TOL, "concat grad_a");
        }
        for i in 0..b.numel() {
            let numeric = central_diff(
                |v| {
                    let mut bp = b.clone();
                    bp.data_mut()[i] = v;
                    projection_loss(&concat_channels(&a, &bp).unwrap(), &proj)
                },
                b.data()[i],
            );
            check_close(gb.data()[i], numeric, LAYER_TOL, "concat grad_b");
        }
    }
}

/// End-to-end gradient of the tiny network (base 2, 16x16, batch 2) on 20
/// randomly sampled parameters.
#[test]
fn end_to_end_unet_gradient_matches_finite_differences() {
    let mut rng = SeededRng::new(4242);
    let mut model = UNetModel::new(2, 3, 77);
    let x = random_tensor(2, 1, 16, 16, &mut rng);
    let mut target = Tensor4::zeros(2, 3, 16, 16);
    for b in 0..2 {
        for y in 0..16 {
            for xx in 0..16 {
                let cls = rng.next_index(3);
                *target.at_mut(b, cls, y, xx) = 1.0;
            }
        }
    }

    let (probs, cache) = model.forward_train(&x).unwrap();
    let (_, grad_logits) = cross_entropy_loss(&probs, &target).unwrap();
    let grads = model.backward(&cache, &grad_logits).unwrap();

    let n_tensors = grads.tensors.len();
    let loss_of = |m: &UNetModel| {
        let mut m = m.clone();
        let (p, _) = m.forward_train(&x).unwrap();
        cross_entropy_loss(&p, &target).unwrap().0
    };

    for k in 0..20 {
        let t = rng.next_index(n_tensors);
        let i = rng.next_index(grads.tensors[t].len());
        let analytic = grads.tensors[t][i];
        let base = {
            let params = model.trainable_params();
            params[t][i]
        };
        let numeric = {
            let mut plus = model.clone();
            plus.trainable_params()[t][i] = base + FD_STEP;
            let mut minus = model.clone();
            minus.trainable_params()[t][i] = base - FD_STEP;
            (loss_of(&plus) - loss_of(&minus)) / (2.0 * FD_STEP)
        };
        check_close(
            analytic,
            numeric,
            E2E_TOL,
            &format!("e2e sample {k} (tensor {t} slot {i})"),
        );
    }
}

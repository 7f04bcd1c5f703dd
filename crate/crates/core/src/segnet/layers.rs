//! Network layers: convolution, batch norm, ReLU, max pooling, transpose
//! convolution, channel concatenation, softmax and cross-entropy.
//!
//! Forward passes keep whatever the matching backward pass needs; every
//! backward is the exact gradient of its forward map and is covered by
//! finite-difference checks in the integration tests.
//!
//! The kernels use indexed loops over shifted rows on purpose: the inner
//! loops stay contiguous and vectorizable.
#![allow(clippy::needless_range_loop)]

use super::tensor::Tensor4;
use super::SegNetError;
use crate::rng::SeededRng;

/// Direct 2-D correlation with zero padding, shared by the 3x3 conv layers
/// and the 1x1 projection head. Weights are (out_ch, in_ch, kh, kw).
fn conv_forward_impl(
    x: &Tensor4,
    weights: &[f64],
    bias: &[f64],
    out_ch: usize,
    in_ch: usize,
    k: usize,
    pad: usize,
) -> Tensor4 {
    let (n, _, h, w) = x.dims();
    let mut out = Tensor4::zeros(n, out_ch, h, w);
    for b in 0..n {
        for o in 0..out_ch {
            for y in 0..h {
                out.row_mut(b, o, y).fill(bias[o]);
            }
            for i in 0..in_ch {
                for ky in 0..k {
                    let dy = ky as isize - pad as isize;
                    let y0 = (-dy).max(0) as usize;
                    let y1 = ((h as isize - dy).min(h as isize)) as usize;
                    for kx in 0..k {
                        let dx = kx as isize - pad as isize;
                        let x0 = (-dx).max(0) as usize;
                        let x1 = ((w as isize - dx).min(w as isize)) as usize;
                        let wv = weights[((o * in_ch + i) * k + ky) * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        for y in y0..y1 {
                            let iy = (y as isize + dy) as usize;
                            let src = x.row(b, i, iy);
                            let dst = out.row_mut(b, o, y);
                            for xx in x0..x1 {
                                dst[xx] += wv * src[(xx as isize + dx) as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    out.debug_assert_finite();
    out
}

/// Gradients of `conv_forward_impl` w.r.t. input, weights and bias.
fn conv_backward_impl(
    x: &Tensor4,
    weights: &[f64],
    grad_out: &Tensor4,
    out_ch: usize,
    in_ch: usize,
    k: usize,
    pad: usize,
) -> (Tensor4, Vec<f64>, Vec<f64>) {
    let (n, _, h, w) = x.dims();
    let mut grad_x = Tensor4::zeros(n, in_ch, h, w);
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = vec![0.0; out_ch];

    for b in 0..n {
        for o in 0..out_ch {
            for y in 0..h {
                grad_b[o] += grad_out.row(b, o, y).iter().sum::<f64>();
            }
            for i in 0..in_ch {
                for ky in 0..k {
                    let dy = ky as isize - pad as isize;
                    let y0 = (-dy).max(0) as usize;
                    let y1 = ((h as isize - dy).min(h as isize)) as usize;
                    for kx in 0..k {
                        let dx = kx as isize - pad as isize;
                        let x0 = (-dx).max(0) as usize;
                        let x1 = ((w as isize - dx).min(w as isize)) as usize;
                        let widx = ((o * in_ch + i) * k + ky) * k + kx;
                        let wv = weights[widx];
                        let mut wacc = 0.0;
                        for y in y0..y1 {
                            let iy = (y as isize + dy) as usize;
                            let gout = grad_out.row(b, o, y);
                            let src = x.row(b, i, iy);
                            let gin = grad_x.row_mut(b, i, iy);
                            for xx in x0..x1 {
                                let ix = (xx as isize + dx) as usize;
                                let g = gout[xx];
                                wacc += g * src[ix];
                                gin[ix] += wv * g;
                            }
                        }
                        grad_w[widx] += wacc;
                    }
                }
            }
        }
    }
    grad_x.debug_assert_finite();
    (grad_x, grad_w, grad_b)
}

/// 3x3 convolution, stride 1, zero padding 1 (spatial dims preserved).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    /// (out_ch, in_ch, 3, 3)
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub(crate) const CONV_K: usize = 3;

impl ConvLayer {
    /// He-normal fan-in initialization, zero bias.
    pub fn new(in_ch: usize, out_ch: usize, rng: &mut SeededRng) -> Self {
        let fan_in = (in_ch * CONV_K * CONV_K) as f64;
        let std = (2.0 / fan_in).sqrt();
        let weights = (0..out_ch * in_ch * CONV_K * CONV_K)
            .map(|_| std * rng.next_normal())
            .collect();
        Self {
            in_ch,
            out_ch,
            weights,
            bias: vec![0.0; out_ch],
        }
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4, SegNetError> {
        if x.channels() != self.in_ch {
            return Err(SegNetError::ChannelMismatch {
                expected: self.in_ch,
                got: x.channels(),
            });
        }
        Ok(conv_forward_impl(
            x,
            &self.weights,
            &self.bias,
            self.out_ch,
            self.in_ch,
            CONV_K,
            1,
        ))
    }

    /// Returns (grad_input, grad_weights, grad_bias).
    pub fn backward(
        &self,
        x: &Tensor4,
        grad_out: &Tensor4,
    ) -> Result<(Tensor4, Vec<f64>, Vec<f64>), SegNetError> {
        if x.channels() != self.in_ch || grad_out.channels() != self.out_ch {
            return Err(SegNetError::ShapeMismatch(format!(
                "conv backward: x has {} channels, grad has {}",
                x.channels(),
                grad_out.channels()
            )));
        }
        if grad_out.batch() != x.batch()
            || grad_out.rows() != x.rows()
            || grad_out.cols() != x.cols()
        {
            return Err(SegNetError::ShapeMismatch(
                "conv backward: grad spatial dims differ from input".into(),
            ));
        }
        Ok(conv_backward_impl(
            x,
            &self.weights,
            grad_out,
            self.out_ch,
            self.in_ch,
            CONV_K,
            1,
        ))
    }
}

/// 1x1 projection to the class logits.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    /// (out_ch, in_ch)
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ProjLayer {
    pub fn new(in_ch: usize, out_ch: usize, rng: &mut SeededRng) -> Self {
        let std = (2.0 / in_ch as f64).sqrt();
        let weights = (0..out_ch * in_ch)
            .map(|_| std * rng.next_normal())
            .collect();
        Self {
            in_ch,
            out_ch,
            weights,
            bias: vec![0.0; out_ch],
        }
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4, SegNetError> {
        if x.channels() != self.in_ch {
            return Err(SegNetError::ChannelMismatch {
                expected: self.in_ch,
                got: x.channels(),
            });
        }
        Ok(conv_forward_impl(
            x,
            &self.weights,
            &self.bias,
            self.out_ch,
            self.in_ch,
            1,
            0,
        ))
    }

    pub fn backward(
        &self,
        x: &Tensor4,
        grad_out: &Tensor4,
    ) -> Result<(Tensor4, Vec<f64>, Vec<f64>), SegNetError> {
        if x.channels() != self.in_ch || grad_out.channels() != self.out_ch {
            return Err(SegNetError::ShapeMismatch(
                "projection backward shapes".into(),
            ));
        }
        Ok(conv_backward_impl(
            x,
            &self.weights,
            grad_out,
            self.out_ch,
            self.in_ch,
            1,
            0,
        ))
    }
}

/// Elementwise max(0, x).
pub fn relu_forward(x: &Tensor4) -> Tensor4 {
    let (n, c, h, w) = x.dims();
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor4::from_vec(n, c, h, w, data).expect("same dims")
}

/// Masks the gradient where the forward input was <= 0 (subgradient 0 at 0).
pub fn relu_backward(x: &Tensor4, grad_out: &Tensor4) -> Tensor4 {
    debug_assert!(x.same_dims(grad_out));
    let (n, c, h, w) = x.dims();
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor4::from_vec(n, c, h, w, data).expect("same dims")
}

/// Argmax bookkeeping for routing pooled gradients back.
#[derive(Clone, Debug)]
pub struct PoolIndices {
    pub in_dims: (usize, usize, usize, usize),
    /// Flat input index of the max per output element, scan order; ties break
    /// to the first cell visited.
    pub argmax: Vec<usize>,
}

/// 2x2 max pooling with stride 2. Requires even spatial dims.
pub fn maxpool2_forward(x: &Tensor4) -> Result<(Tensor4, PoolIndices), SegNetError> {
    let (n, c, h, w) = x.dims();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(SegNetError::OddDims { h, w });
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor4::zeros(n, c, oh, ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for b in 0..n {
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for ky in 0..2 {
                        for kx in 0..2 {
                            let (y, xx) = (2 * oy + ky, 2 * ox + kx);
                            let v = x.at(b, ch, y, xx);
                            if v > best {
                                best = v;
                                best_idx = x.index(b, ch, y, xx);
                            }
                        }
                    }
                    *out.at_mut(b, ch, oy, ox) = best;
                    argmax.push(best_idx);
                }
            }
        }
    }
    Ok((
        out,
        PoolIndices {
            in_dims: (n, c, h, w),
            argmax,
        },
    ))
}

/// Routes each pooled gradient to its recorded argmax cell.
pub fn maxpool2_backward(idx: &PoolIndices, grad_out: &Tensor4) -> Result<Tensor4, SegNetError> {
    let (n, c, h, w) = idx.in_dims;
    if grad_out.dims() != (n, c, h / 2, w / 2) || idx.argmax.len() != grad_out.numel() {
        return Err(SegNetError::ShapeMismatch("maxpool backward dims".into()));
    }
    let mut grad_x = Tensor4::zeros(n, c, h, w);
    for (&target, &g) in idx.argmax.iter().zip(grad_out.data()) {
        grad_x.data_mut()[target] += g;
    }
    Ok(grad_x)
}

/// Per-channel batch normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

/// Activations retained for the batch-norm backward pass.
#[derive(Clone, Debug)]
pub struct BnCache {
    xhat: Tensor4,
    inv_std: Vec<f64>,
}

impl BatchNormLayer {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.9,
            epsilon: 1e-5,
        }
    }

    fn check_channels(&self, x: &Tensor4) -> Result<(), SegNetError> {
        if x.channels() != self.gamma.len() {
            return Err(SegNetError::ChannelMismatch {
                expected: self.gamma.len(),
                got: x.channels(),
            });
        }
        Ok(())
    }

    /// Normalizes by batch statistics and updates the running estimates.
    pub fn forward_train(&mut self, x: &Tensor4) -> Result<(Tensor4, BnCache), SegNetError> {
        self.check_channels(x)?;
        let (n, c, h, w) = x.dims();
        let m = (n * h * w) as f64;
        if (n * h * w) < 2 {
            return Err(SegNetError::DegenerateBatch);
        }
        let mut out = Tensor4::zeros(n, c, h, w);
        let mut xhat = Tensor4::zeros(n, c, h, w);
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let mut sum = 0.0;
            for b in 0..n {
                for y in 0..h {
                    sum += x.row(b, ch, y).iter().sum::<f64>();
                }
            }
            let mean = sum / m;
            let mut var_sum = 0.0;
            for b in 0..n {
                for y in 0..h {
                    for &v in x.row(b, ch, y) {
                        let d = v - mean;
                        var_sum += d * d;
                    }
                }
            }
            let var = var_sum / m;
            let istd = 1.0 / (var + self.epsilon).sqrt();
            inv_std[ch] = istd;
            let (g, bta) = (self.gamma[ch], self.beta[ch]);
            for b in 0..n {
                for y in 0..h {
                    for xx in 0..w {
                        let xh = (x.at(b, ch, y, xx) - mean) * istd;
                        *xhat.at_mut(b, ch, y, xx) = xh;
                        *out.at_mut(b, ch, y, xx) = g * xh + bta;
                    }
                }
            }
            self.running_mean[ch] =
                self.momentum * self.running_mean[ch] + (1.0 - self.momentum) * mean;
            self.running_var[ch] =
                self.momentum * self.running_var[ch] + (1.0 - self.momentum) * var;
        }
        out.debug_assert_finite();
        Ok((out, BnCache { xhat, inv_std }))
    }

    /// Normalizes by the running statistics; no state is touched.
    pub fn forward_infer(&self, x: &Tensor4) -> Result<Tensor4, SegNetError> {
        self.check_channels(x)?;
        let (n, c, h, w) = x.dims();
        let mut out = Tensor4::zeros(n, c, h, w);
        for ch in 0..c {
            let istd = 1.0 / (self.running_var[ch] + self.epsilon).sqrt();
            let (mean, g, bta) = (self.running_mean[ch], self.gamma[ch], self.beta[ch]);
            for b in 0..n {
                for y in 0..h {
                    let src = x.row(b, ch, y);
                    let dst = out.row_mut(b, ch, y);
                    for xx in 0..w {
                        dst[xx] = g * (src[xx] - mean) * istd + bta;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Returns (grad_input, grad_gamma, grad_beta) for a train-mode forward.
    pub fn backward(
        &self,
        cache: &BnCache,
        grad_out: &Tensor4,
    ) -> Result<(Tensor4, Vec<f64>, Vec<f64>), SegNetError> {
        if !cache.xhat.same_dims(grad_out) {
            return Err(SegNetError::ShapeMismatch("batchnorm backward dims".into()));
        }
        let (n, c, h, w) = grad_out.dims();
        let m = (n * h * w) as f64;
        let mut grad_x = Tensor4::zeros(n, c, h, w);
        let mut grad_gamma = vec![0.0; c];
        let mut grad_beta = vec![0.0; c];
        for ch in 0..c {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for b in 0..n {
                for y in 0..h {
                    let go = grad_out.row(b, ch, y);
                    let xh = cache.xhat.row(b, ch, y);
                    for xx in 0..w {
                        sum_dy += go[xx];
                        sum_dy_xhat += go[xx] * xh[xx];
                    }
                }
            }
            grad_beta[ch] = sum_dy;
            grad_gamma[ch] = sum_dy_xhat;
            // dx = gamma * inv_std / m * (m*dy - sum(dy) - xhat * sum(dy*xhat))
            let scale = self.gamma[ch] * cache.inv_std[ch] / m;
            for b in 0..n {
                for y in 0..h {
                    let go = grad_out.row(b, ch, y);
                    let xh = cache.xhat.row(b, ch, y);
                    let gx = grad_x.row_mut(b, ch, y);
                    for xx in 0..w {
                        gx[xx] = scale * (m * go[xx] - sum_dy - xh[xx] * sum_dy_xhat);
                    }
                }
            }
        }
        grad_x.debug_assert_finite();
        Ok((grad_x, grad_gamma, grad_beta))
    }
}

/// 2x2 transpose convolution with stride 2: doubles the spatial dims.
#[derive(Clone, Debug, PartialEq)]
pub struct UpConvLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    /// (in_ch, out_ch, 2, 2)
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl UpConvLayer {
    pub fn new(in_ch: usize, out_ch: usize, rng: &mut SeededRng) -> Self {
        let fan_in = (in_ch * 4) as f64;
        let std = (2.0 / fan_in).sqrt();
        let weights = (0..in_ch * out_ch * 4)
            .map(|_| std * rng.next_normal())
            .collect();
        Self {
            in_ch,
            out_ch,
            weights,
            bias: vec![0.0; out_ch],
        }
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4, SegNetError> {
        if x.channels() != self.in_ch {
            return Err(SegNetError::ChannelMismatch {
                expected: self.in_ch,
                got: x.channels(),
            });
        }
        let (n, _, h, w) = x.dims();
        let mut out = Tensor4::zeros(n, self.out_ch, 2 * h, 2 * w);
        for b in 0..n {
            for o in 0..self.out_ch {
                for y in 0..2 * h {
                    out.row_mut(b, o, y).fill(self.bias[o]);
                }
                for i in 0..self.in_ch {
                    for ky in 0..2 {
                        for kx in 0..2 {
                            let wv = self.weights[((i * self.out_ch + o) * 2 + ky) * 2 + kx];
                            if wv == 0.0 {
                                continue;
                            }
                            for y in 0..h {
                                let src = x.row(b, i, y);
                                let dst = out.row_mut(b, o, 2 * y + ky);
                                for xx in 0..w {
                                    dst[2 * xx + kx] += wv * src[xx];
                                }
                            }
                        }
                    }
                }
            }
        }
        out.debug_assert_finite();
        Ok(out)
    }

    /// Returns (grad_input, grad_weights, grad_bias).
    pub fn backward(
        &self,
        x: &Tensor4,
        grad_out: &Tensor4,
    ) -> Result<(Tensor4, Vec<f64>, Vec<f64>), SegNetError> {
        let (n, _, h, w) = x.dims();
        if x.channels() != self.in_ch || grad_out.dims() != (n, self.out_ch, 2 * h, 2 * w) {
            return Err(SegNetError::ShapeMismatch("upconv backward dims".into()));
        }
        let mut grad_x = Tensor4::zeros(n, self.in_ch, h, w);
        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_b = vec![0.0; self.out_ch];
        for b in 0..n {
            for o in 0..self.out_ch {
                for y in 0..2 * h {
                    grad_b[o] += grad_out.row(b, o, y).iter().sum::<f64>();
                }
                for i in 0..self.in_ch {
                    for ky in 0..2 {
                        for kx in 0..2 {
                            let widx = ((i * self.out_ch + o) * 2 + ky) * 2 + kx;
                            let wv = self.weights[widx];
                            let mut wacc = 0.0;
                            for y in 0..h {
                                let gout = grad_out.row(b, o, 2 * y + ky);
                                let src = x.row(b, i, y);
                                let gin = grad_x.row_mut(b, i, y);
                                for xx in 0..w {
                                    let g = gout[2 * xx + kx];
                                    wacc += g * src[xx];
                                    gin[xx] += wv * g;
                                }
                            }
                            grad_w[widx] += wacc;
                        }
                    }
                }
            }
        }
        grad_x.debug_assert_finite();
        Ok((grad_x, grad_w, grad_b))
    }
}

/// Concatenates along the channel axis, `a` first.
pub fn concat_channels(a: &Tensor4, b: &Tensor4) -> Result<Tensor4, SegNetError> {
    let (na, ca, ha, wa) = a.dims();
    let (nb, cb, hb, wb) = b.dims();
    if na != nb || ha != hb || wa != wb {
        return Err(SegNetError::ShapeMismatch(
            "concat: batch or spatial dims differ".into(),
        ));
    }
    let mut out = Tensor4::zeros(na, ca + cb, ha, wa);
    for bt in 0..na {
        for c in 0..ca {
            for y in 0..ha {
                out.row_mut(bt, c, y).copy_from_slice(a.row(bt, c, y));
            }
        }
        for c in 0..cb {
            for y in 0..ha {
                out.row_mut(bt, ca + c, y).copy_from_slice(b.row(bt, c, y));
            }
        }
    }
    Ok(out)
}

/// Splits a concat gradient back into the two operand gradients.
pub fn concat_backward(
    grad_out: &Tensor4,
    a_channels: usize,
) -> Result<(Tensor4, Tensor4), SegNetError> {
    let (n, c, h, w) = grad_out.dims();
    if a_channels > c {
        return Err(SegNetError::ShapeMismatch(
            "concat backward split point".into(),
        ));
    }
    let mut ga = Tensor4::zeros(n, a_channels, h, w);
    let mut gb = Tensor4::zeros(n, c - a_channels, h, w);
    for b in 0..n {
        for ch in 0..a_channels {
            for y in 0..h {
                ga.row_mut(b, ch, y).copy_from_slice(grad_out.row(b, ch, y));
            }
        }
        for ch in 0..c - a_channels {
            for y in 0..h {
                gb.row_mut(b, ch, y)
                    .copy_from_slice(grad_out.row(b, a_channels + ch, y));
            }
        }
    }
    Ok((ga, gb))
}

/// Per-pixel class probabilities; channel vectors sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMap(Tensor4);

impl ProbMap {
    /// Wraps an existing tensor, validating the per-pixel normalization.
    pub fn new(t: Tensor4) -> Result<Self, SegNetError> {
        let (n, c, h, w) = t.dims();
        for b in 0..n {
            for y in 0..h {
                for x in 0..w {
                    let mut sum = 0.0;
                    for ch in 0..c {
                        let v = t.at(b, ch, y, x);
                        if !(0.0..=1.0 + 1e-9).contains(&v) {
                            return Err(SegNetError::ShapeMismatch(
                                "probability outside [0, 1]".into(),
                            ));
                        }
                        sum += v;
                    }
                    if (sum - 1.0).abs() > 1e-6 {
                        return Err(SegNetError::ShapeMismatch(format!(
                            "pixel probabilities sum to {sum}"
                        )));
                    }
                }
            }
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor4 {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor4 {
        self.0
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.0.dims()
    }
}

/// Softmax over the channel axis, stabilized by max subtraction.
pub fn softmax_channels(logits: &Tensor4) -> ProbMap {
    let (n, c, h, w) = logits.dims();
    debug_assert!(c >= 2, "softmax needs at least two classes");
    let mut out = Tensor4::zeros(n, c, h, w);
    for b in 0..n {
        for y in 0..h {
            for x in 0..w {
                let mut max = f64::NEG_INFINITY;
                for ch in 0..c {
                    max = max.max(logits.at(b, ch, y, x));
                }
                let mut sum = 0.0;
                for ch in 0..c {
                    let e = (logits.at(b, ch, y, x) - max).exp();
                    *out.at_mut(b, ch, y, x) = e;
                    sum += e;
                }
                for ch in 0..c {
                    *out.at_mut(b, ch, y, x) /= sum;
                }
            }
        }
    }
    out.debug_assert_finite();
    ProbMap(out)
}

/// Mean pixel-wise categorical cross-entropy and its gradient w.r.t. the
/// pre-softmax logits: (p - y) / pixel_count.
pub fn cross_entropy_loss(
    probs: &ProbMap,
    target: &Tensor4,
) -> Result<(f64, Tensor4), SegNetError> {
    let p = probs.tensor();
    if !p.same_dims(target) {
        return Err(SegNetError::ShapeMismatch(
            "loss: prediction vs target dims".into(),
        ));
    }
    let (n, c, h, w) = p.dims();
    // validate the one-hot encoding
    for b in 0..n {
        for y in 0..h {
            for x in 0..w {
                let mut ones = 0usize;
                for ch in 0..c {
                    let v = target.at(b, ch, y, x);
                    if v == 1.0 {
                        ones += 1;
                    } else if v != 0.0 {
                        return Err(SegNetError::NotOneHot(((b * h + y) * w) + x));
                    }
                }
                if ones != 1 {
                    return Err(SegNetError::NotOneHot(((b * h + y) * w) + x));
                }
            }
        }
    }
    let pixels = (n * h * w) as f64;
    let mut loss = 0.0;
    let mut grad = Tensor4::zeros(n, c, h, w);
    for (i, (&pv, &tv)) in p.data().iter().zip(target.data()).enumerate() {
        if tv == 1.0 {
            loss -= pv.clamp(1e-12, 1.0).ln();
        }
        grad.data_mut()[i] = (pv - tv) / pixels;
    }
    Ok((loss / pixels, grad))
}

//! Multi-class U-Net: four encoder stages, a bottleneck, four decoder stages
//! with skip concatenations, and a 1x1 projection to the class logits.
//!
//! Channel widths double down the encoder and halve up the decoder. Every
//! conv is followed by batch norm and ReLU.

use super::layers::{
    concat_backward, concat_channels, maxpool2_backward, maxpool2_forward, relu_backward,
    relu_forward, softmax_channels, BatchNormLayer, BnCache, ConvLayer, PoolIndices, ProbMap,
    ProjLayer, UpConvLayer,
};
use super::tensor::Tensor4;
use super::SegNetError;
use crate::rng::SeededRng;

/// Number of encoder stages (and matching decoder stages).
pub const UNET_DEPTH: usize = 4;

/// Two 3x3 convolutions, each followed by batch norm and ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlock {
    pub conv1: ConvLayer,
    pub bn1: BatchNormLayer,
    pub conv2: ConvLayer,
    pub bn2: BatchNormLayer,
}

impl ConvBlock {
    fn new(in_ch: usize, out_ch: usize, rng: &mut SeededRng) -> Self {
        Self {
            conv1: ConvLayer::new(in_ch, out_ch, rng),
            bn1: BatchNormLayer::new(out_ch),
            conv2: ConvLayer::new(out_ch, out_ch, rng),
            bn2: BatchNormLayer::new(out_ch),
        }
    }

    fn forward_train(&mut self, x: &Tensor4) -> Result<(Tensor4, BlockCache), SegNetError> {
        let c1 = self.conv1.forward(x)?;
        let (a1, bn1) = self.bn1.forward_train(&c1)?;
        let h1 = relu_forward(&a1);
        let c2 = self.conv2.forward(&h1)?;
        let (a2, bn2) = self.bn2.forward_train(&c2)?;
        let out = relu_forward(&a2);
        Ok((
            out,
            BlockCache {
                x0: x.clone(),
                bn1,
                a1,
                h1,
                bn2,
                a2,
            },
        ))
    }

    fn forward_infer(&self, x: &Tensor4) -> Result<Tensor4, SegNetError> {
        let c1 = self.conv1.forward(x)?;
        let a1 = self.bn1.forward_infer(&c1)?;
        let h1 = relu_forward(&a1);
        let c2 = self.conv2.forward(&h1)?;
        let a2 = self.bn2.forward_infer(&c2)?;
        Ok(relu_forward(&a2))
    }

    /// Backward through the block. Pushes its parameter gradients, in
    /// declaration order, onto `grads`.
    fn backward(
        &self,
        cache: &BlockCache,
        grad_out: &Tensor4,
        grads: &mut BlockGrads,
    ) -> Result<Tensor4, SegNetError> {
        let d_a2 = relu_backward(&cache.a2, grad_out);
        let (d_c2, dg2, db2) = self.bn2.backward(&cache.bn2, &d_a2)?;
        let (d_h1, gw2, gb2) = self.conv2.backward(&cache.h1, &d_c2)?;
        let d_a1 = relu_backward(&cache.a1, &d_h1);
        let (d_c1, dg1, db1) = self.bn1.backward(&cache.bn1, &d_a1)?;
        let (d_x0, gw1, gb1) = self.conv1.backward(&cache.x0, &d_c1)?;
        grads.push(gw1);
        grads.push(gb1);
        grads.push(dg1);
        grads.push(db1);
        grads.push(gw2);
        grads.push(gb2);
        grads.push(dg2);
        grads.push(db2);
        Ok(d_x0)
    }
}

#[derive(Clone, Debug)]
struct BlockCache {
    x0: Tensor4,
    bn1: BnCache,
    a1: Tensor4,
    h1: Tensor4,
    bn2: BnCache,
    a2: Tensor4,
}

/// Upsampling stage: transpose conv, skip concat, conv block.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderStage {
    pub up: UpConvLayer,
    pub block: ConvBlock,
}

#[derive(Clone, Debug)]
struct DecoderCache {
    up_in: Tensor4,
    up_out_ch: usize,
    block: BlockCache,
}

/// Gradients for every trainable parameter, in the model's parameter order.
#[derive(Clone, Debug)]
pub struct GradSet {
    pub tensors: Vec<Vec<f64>>,
}

/// Builder that collects block gradients in reverse and fixes the order later.
struct BlockGrads {
    tensors: Vec<Vec<f64>>,
}

impl BlockGrads {
    fn push(&mut self, g: Vec<f64>) {
        self.tensors.push(g);
    }
}

/// Named tensor view used by the weight-file writer: (name, shape, data).
pub type StateTensor<'a> = (String, Vec<usize>, &'a Vec<f64>);
pub type StateTensorMut<'a> = (String, Vec<usize>, &'a mut Vec<f64>);

/// Activations retained by a training forward pass.
pub struct ForwardCache {
    input_dims: (usize, usize, usize, usize),
    enc: Vec<(BlockCache, PoolIndices)>,
    bottleneck: BlockCache,
    dec: Vec<DecoderCache>,
    proj_in: Tensor4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UNetModel {
    base_channels: usize,
    n_classes: usize,
    pub encoders: Vec<ConvBlock>,
    pub bottleneck: ConvBlock,
    pub decoders: Vec<DecoderStage>,
    pub proj: ProjLayer,
}

impl UNetModel {
    /// Builds a freshly initialized model. `base_channels` is the width of the
    /// first encoder stage (64 at paper scale, 8 for the desk-scale preset).
    pub fn new(base_channels: usize, n_classes: usize, seed: u64) -> Self {
        assert!(base_channels >= 1 && n_classes >= 2);
        let mut rng = SeededRng::derive(seed, 0xC0DE);
        let mut encoders = Vec::with_capacity(UNET_DEPTH);
        let mut in_ch = 1;
        let mut ch = base_channels;
        for _ in 0..UNET_DEPTH {
            encoders.push(ConvBlock::new(in_ch, ch, &mut rng));
            in_ch = ch;
            ch *= 2;
        }
        let bottleneck = ConvBlock::new(in_ch, ch, &mut rng);
        let mut decoders = Vec::with_capacity(UNET_DEPTH);
        let mut up_in = ch;
        for _ in 0..UNET_DEPTH {
            let out_ch = up_in / 2;
            decoders.push(DecoderStage {
                up: UpConvLayer::new(up_in, out_ch, &mut rng),
                // concat doubles the channels again
                block: ConvBlock::new(out_ch * 2, out_ch, &mut rng),
            });
            up_in = out_ch;
        }
        let proj = ProjLayer::new(base_channels, n_classes, &mut rng);
        Self {
            base_channels,
            n_classes,
            encoders,
            bottleneck,
            decoders,
            proj,
        }
    }

    pub fn base_channels(&self) -> usize {
        self.base_channels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn check_input(&self, x: &Tensor4) -> Result<(), SegNetError> {
        if x.channels() != 1 {
            return Err(SegNetError::ChannelMismatch {
                expected: 1,
                got: x.channels(),
            });
        }
        let div = 1 << UNET_DEPTH;
        if !x.rows().is_multiple_of(div) || !x.cols().is_multiple_of(div) {
            return Err(SegNetError::IndivisibleDims {
                h: x.rows(),
                w: x.cols(),
                by: div,
            });
        }
        Ok(())
    }

    /// Training-mode forward: batch statistics for batch norm, full cache.
    pub fn forward_train(&mut self, x: &Tensor4) -> Result<(ProbMap, ForwardCache), SegNetError> {
        self.check_input(x)?;
        let mut enc_caches = Vec::with_capacity(UNET_DEPTH);
        let mut skips = Vec::with_capacity(UNET_DEPTH);
        let mut cur = x.clone();
        for stage in self.encoders.iter_mut() {
            let (skip, cache) = stage.forward_train(&cur)?;
            let (pooled, idx) = maxpool2_forward(&skip)?;
            skips.push(skip);
            enc_caches.push((cache, idx));
            cur = pooled;
        }
        let (mut cur, bneck_cache) = self.bottleneck.forward_train(&cur)?;
        let mut dec_caches = Vec::with_capacity(UNET_DEPTH);
        for (i, stage) in self.decoders.iter_mut().enumerate() {
            let up_in = cur;
            let up = stage.up.forward(&up_in)?;
            let skip = &skips[UNET_DEPTH - 1 - i];
            let cat = concat_channels(&up, skip)?;
            let (out, block_cache) = stage.block.forward_train(&cat)?;
            dec_caches.push(DecoderCache {
                up_in,
                up_out_ch: stage.up.out_ch,
                block: block_cache,
            });
            cur = out;
        }
        let logits = self.proj.forward(&cur)?;
        let probs = softmax_channels(&logits);
        Ok((
            probs,
            ForwardCache {
                input_dims: x.dims(),
                enc: enc_caches,
                bottleneck: bneck_cache,
                dec: dec_caches,
                proj_in: cur,
            },
        ))
    }

    /// Inference forward: running statistics, no cache.
    pub fn forward_infer(&self, x: &Tensor4) -> Result<ProbMap, SegNetError> {
        self.check_input(x)?;
        let mut skips = Vec::with_capacity(UNET_DEPTH);
        let mut cur = x.clone();
        for stage in &self.encoders {
            let skip = stage.forward_infer(&cur)?;
            let (pooled, _) = maxpool2_forward(&skip)?;
            skips.push(skip);
            cur = pooled;
        }
        cur = self.bottleneck.forward_infer(&cur)?;
        for (i, stage) in self.decoders.iter().enumerate() {
            let up = stage.up.forward(&cur)?;
            let cat = concat_channels(&up, &skips[UNET_DEPTH - 1 - i])?;
            cur = stage.block.forward_infer(&cat)?;
        }
        let logits = self.proj.forward(&cur)?;
        Ok(softmax_channels(&logits))
    }

    /// Backpropagates `grad_logits` (gradient w.r.t. the pre-softmax logits)
    /// through the whole network, returning gradients in parameter order.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_logits: &Tensor4,
    ) -> Result<GradSet, SegNetError> {
        let (n, _, h, w) = cache.input_dims;
        if grad_logits.dims() != (n, self.n_classes, h, w) {
            return Err(SegNetError::StaleCache(format!(
                "cache is for a ({n},{},{h},{w}) forward, gradient has dims {:?}",
                self.n_classes,
                grad_logits.dims()
            )));
        }
        if cache.enc.len() != UNET_DEPTH || cache.dec.len() != UNET_DEPTH {
            return Err(SegNetError::StaleCache("stage count mismatch".into()));
        }

        let (mut d, gw_proj, gb_proj) = self.proj.backward(&cache.proj_in, grad_logits)?;

        // decoder stages, shallowest first
        let mut dec_grads_rev: Vec<Vec<Vec<f64>>> = Vec::with_capacity(UNET_DEPTH);
        let mut skip_grads: Vec<Option<Tensor4>> = (0..UNET_DEPTH).map(|_| None).collect();
        for i in (0..UNET_DEPTH).rev() {
            let stage = &self.decoders[i];
            let dc = &cache.dec[i];
            let mut block = BlockGrads {
                tensors: Vec::with_capacity(8),
            };
            let d_cat = stage.block.backward(&dc.block, &d, &mut block)?;
            let (d_up_out, d_skip) = concat_backward(&d_cat, dc.up_out_ch)?;
            let (d_up_in, gw_up, gb_up) = stage.up.backward(&dc.up_in, &d_up_out)?;
            skip_grads[UNET_DEPTH - 1 - i] = Some(d_skip);
            let mut tensors = vec![gw_up, gb_up];
            tensors.extend(block.tensors);
            dec_grads_rev.push(tensors);
            d = d_up_in;
        }

        let mut bneck = BlockGrads {
            tensors: Vec::with_capacity(8),
        };
        d = self
            .bottleneck
            .backward(&cache.bottleneck, &d, &mut bneck)?;

        // encoder stages, deepest first
        let mut enc_grads_rev: Vec<Vec<Vec<f64>>> = Vec::with_capacity(UNET_DEPTH);
        for i in (0..UNET_DEPTH).rev() {
            let (block_cache, pool_idx) = &cache.enc[i];
            let mut d_pre_pool = maxpool2_backward(pool_idx, &d)?;
            if let Some(ds) = &skip_grads[i] {
                if !ds.same_dims(&d_pre_pool) {
                    return Err(SegNetError::StaleCache("skip gradient dims".into()));
                }
                for (a, &b) in d_pre_pool.data_mut().iter_mut().zip(ds.data()) {
                    *a += b;
                }
            }
            let mut block = BlockGrads {
                tensors: Vec::with_capacity(8),
            };
            d = self.encoders[i].backward(block_cache, &d_pre_pool, &mut block)?;
            enc_grads_rev.push(block.tensors);
        }

        // assemble in parameter order: enc0..enc3, bottleneck, dec0..dec3, proj
        let mut tensors = Vec::with_capacity(self.trainable_param_count());
        for block in enc_grads_rev.into_iter().rev() {
            tensors.extend(block);
        }
        tensors.extend(bneck.tensors);
        for stage in dec_grads_rev.into_iter().rev() {
            tensors.extend(stage);
        }
        tensors.push(gw_proj);
        tensors.push(gb_proj);
        Ok(GradSet { tensors })
    }

    pub fn trainable_param_count(&self) -> usize {
        UNET_DEPTH * 8 + 8 + UNET_DEPTH * 10 + 2
    }

    /// Mutable references to every trainable parameter tensor, in the fixed
    /// architectural order used by [`GradSet`] and the weight file.
    pub fn trainable_params(&mut self) -> Vec<&mut Vec<f64>> {
        let mut params = Vec::with_capacity(self.trainable_param_count());
        for block in self.encoders.iter_mut() {
            push_block_params(block, &mut params);
        }
        push_block_params(&mut self.bottleneck, &mut params);
        for stage in self.decoders.iter_mut() {
            params.push(&mut stage.up.weights);
            params.push(&mut stage.up.bias);
            push_block_params(&mut stage.block, &mut params);
        }
        params.push(&mut self.proj.weights);
        params.push(&mut self.proj.bias);
        params
    }

    /// Name, shape and data of every state tensor (parameters plus batch-norm
    /// running statistics), in the order they are persisted.
    pub fn state_tensors(&self) -> Vec<StateTensor<'_>> {
        let mut out = Vec::new();
        for (i, block) in self.encoders.iter().enumerate() {
            block_state(&format!("enc{i}"), block, &mut out);
        }
        block_state("bottleneck", &self.bottleneck, &mut out);
        for (i, stage) in self.decoders.iter().enumerate() {
            let p = format!("dec{i}");
            out.push((
                format!("{p}.up.weight"),
                vec![stage.up.in_ch, stage.up.out_ch, 2, 2],
                &stage.up.weights,
            ));
            out.push((
                format!("{p}.up.bias"),
                vec![stage.up.out_ch],
                &stage.up.bias,
            ));
            block_state(&p, &stage.block, &mut out);
        }
        out.push((
            "proj.weight".into(),
            vec![self.proj.out_ch, self.proj.in_ch, 1, 1],
            &self.proj.weights,
        ));
        out.push(("proj.bias".into(), vec![self.proj.out_ch], &self.proj.bias));
        out
    }

    /// Mutable view matching [`Self::state_tensors`] order, used by the loader.
    pub fn state_tensors_mut(&mut self) -> Vec<StateTensorMut<'_>> {
        let mut out = Vec::new();
        for (i, block) in self.encoders.iter_mut().enumerate() {
            block_state_mut(&format!("enc{i}"), block, &mut out);
        }
        block_state_mut("bottleneck", &mut self.bottleneck, &mut out);
        for (i, stage) in self.decoders.iter_mut().enumerate() {
            let p = format!("dec{i}");
            out.push((
                format!("{p}.up.weight"),
                vec![stage.up.in_ch, stage.up.out_ch, 2, 2],
                &mut stage.up.weights,
            ));
            out.push((
                format!("{p}.up.bias"),
                vec![stage.up.out_ch],
                &mut stage.up.bias,
            ));
            block_state_mut(&p, &mut stage.block, &mut out);
        }
        out.push((
            "proj.weight".into(),
            vec![self.proj.out_ch, self.proj.in_ch, 1, 1],
            &mut self.proj.weights,
        ));
        out.push((
            "proj.bias".into(),
            vec![self.proj.out_ch],
            &mut self.proj.bias,
        ));
        out
    }
}

fn push_block_params<'a>(block: &'a mut ConvBlock, params: &mut Vec<&'a mut Vec<f64>>) {
    params.push(&mut block.conv1.weights);
    params.push(&mut block.conv1.bias);
    params.push(&mut block.bn1.gamma);
    params.push(&mut block.bn1.beta);
    params.push(&mut block.conv2.weights);
    params.push(&mut block.conv2.bias);
    params.push(&mut block.bn2.gamma);
    params.push(&mut block.bn2.beta);
}

fn block_state<'a>(prefix: &str, block: &'a ConvBlock, out: &mut Vec<StateTensor<'a>>) {
    let conv_shape = |c: &ConvLayer| vec![c.out_ch, c.in_ch, 3, 3];
    out.push((
        format!("{prefix}.conv1.weight"),
        conv_shape(&block.conv1),
        &block.conv1.weights,
    ));
    out.push((
        format!("{prefix}.conv1.bias"),
        vec![block.conv1.out_ch],
        &block.conv1.bias,
    ));
    bn_state(&format!("{prefix}.bn1"), &block.bn1, out);
    out.push((
        format!("{prefix}.conv2.weight"),
        conv_shape(&block.conv2),
        &block.conv2.weights,
    ));
    out.push((
        format!("{prefix}.conv2.bias"),
        vec![block.conv2.out_ch],
        &block.conv2.bias,
    ));
    bn_state(&format!("{prefix}.bn2"), &block.bn2, out);
}

fn bn_state<'a>(prefix: &str, bn: &'a BatchNormLayer, out: &mut Vec<StateTensor<'a>>) {
    let c = bn.gamma.len();
    out.push((format!("{prefix}.gamma"), vec![c], &bn.gamma));
    out.push((format!("{prefix}.beta"), vec![c], &bn.beta));
    out.push((format!("{prefix}.running_mean"), vec![c], &bn.running_mean));
    out.push((format!("{prefix}.running_var"), vec![c], &bn.running_var));
}

fn block_state_mut<'a>(prefix: &str, block: &'a mut ConvBlock, out: &mut Vec<StateTensorMut<'a>>) {
    out.push((
        format!("{prefix}.conv1.weight"),
        vec![block.conv1.out_ch, block.conv1.in_ch, 3, 3],
        &mut block.conv1.weights,
    ));
    out.push((
        format!("{prefix}.conv1.bias"),
        vec![block.conv1.out_ch],
        &mut block.conv1.bias,
    ));
    let c1 = block.bn1.gamma.len();
    out.push((
        format!("{prefix}.bn1.gamma"),
        vec![c1],
        &mut block.bn1.gamma,
    ));
    out.push((format!("{prefix}.bn1.beta"), vec![c1], &mut block.bn1.beta));
    out.push((
        format!("{prefix}.bn1.running_mean"),
        vec![c1],
        &mut block.bn1.running_mean,
    ));
    out.push((
        format!("{prefix}.bn1.running_var"),
        vec![c1],
        &mut block.bn1.running_var,
    ));
    out.push((
        format!("{prefix}.conv2.weight"),
        vec![block.conv2.out_ch, block.conv2.in_ch, 3, 3],
        &mut block.conv2.weights,
    ));
    out.push((
        format!("{prefix}.conv2.bias"),
        vec![block.conv2.out_ch],
        &mut block.conv2.bias,
    ));
    let c2 = block.bn2.gamma.len();
    out.push((
        format!("{prefix}.bn2.gamma"),
        vec![c2],
        &mut block.bn2.gamma,
    ));
    out.push((format!("{prefix}.bn2.beta"), vec![c2], &mut block.bn2.beta));
    out.push((
        format!("{prefix}.bn2.running_mean"),
        vec![c2],
        &mut block.bn2.running_mean,
    ));
    out.push((
        format!("{prefix}.bn2.running_var"),
        vec![c2],
        &mut block.bn2.running_var,
    ));
}

//! The two-branch gameplay network: a convolutional level branch and a dense
//! class branch, fused by one hidden layer into a linear output.

use serde::{Deserialize, Serialize};

use super::layers::{
    dropout_mask, maxpool2, maxpool2_backward, relu, relu_backward, BatchNorm, BnCache, Conv3x3, Dense, Param,
};
use super::{Batch, ModelConfig, SurrogateError, Target, INPUT_CHANNELS};
use crate::classes::CLASS_PARAMS;
use crate::level::SIZE;
use crate::seed::{self, Rng};

const POOLED1: usize = SIZE / 2;
const POOLED2: usize = SIZE / 4;
const CLASS_INPUTS: usize = 2 * CLASS_PARAMS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub config: ModelConfig,
    pub target: Target,
    conv1: Conv3x3,
    bn1: BatchNorm,
    conv2: Conv3x3,
    bn2: BatchNorm,
    level_dense: Dense,
    bn_level: BatchNorm,
    class_dense: Dense,
    bn_class: BatchNorm,
    fusion: Dense,
    bn_fusion: BatchNorm,
    head: Dense,
}

/// Forward activations kept for back-propagation.
pub struct Cache {
    batch: usize,
    cols1: Vec<f64>,
    bn1: BnCache,
    act1: Vec<f64>,
    arg1: Vec<u32>,
    cols2: Vec<f64>,
    bn2: BnCache,
    act2: Vec<f64>,
    arg2: Vec<u32>,
    flat: Vec<f64>,
    bn_level: BnCache,
    act_level: Vec<f64>,
    mask_level: Option<Vec<f64>>,
    classes: Vec<f64>,
    bn_class: BnCache,
    act_class: Vec<f64>,
    mask_class: Option<Vec<f64>>,
    concat: Vec<f64>,
    bn_fusion: BnCache,
    act_fusion: Vec<f64>,
    mask_fusion: Option<Vec<f64>>,
    hidden: Vec<f64>,
}

/// `[c, b, p]` pooled maps to `[(c, p), b]` dense input.
fn flatten(x: &[f64], channels: usize, batch: usize) -> Vec<f64> {
    let plane = POOLED2 * POOLED2;
    let mut out = vec![0.0; x.len()];
    for c in 0..channels {
        for b in 0..batch {
            for p in 0..plane {
                out[(c * plane + p) * batch + b] = x[(c * batch + b) * plane + p];
            }
        }
    }
    out
}

fn unflatten(x: &[f64], channels: usize, batch: usize) -> Vec<f64> {
    let plane = POOLED2 * POOLED2;
    let mut out = vec![0.0; x.len()];
    for c in 0..channels {
        for b in 0..batch {
            for p in 0..plane {
                out[(c * batch + b) * plane + p] = x[(c * plane + p) * batch + b];
            }
        }
    }
    out
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(mask) = mask {
        for (v, m) in x.iter_mut().zip(mask) {
            *v *= m;
        }
    }
}

impl SurrogateModel {
    pub fn new(config: ModelConfig, target: Target) -> Result<Self, SurrogateError> {
        config.validate()?;
        if config.output_dim != target.output_dim() {
            return Err(SurrogateError::InvalidConfig(format!(
                "{target:?} needs output_dim {}, config has {}",
                target.output_dim(),
                config.output_dim
            )));
        }
        let mut rng = seed::rng(seed::derive(config.seed, &[0x1417]));
        let c = &config;
        let flat = c.conv2 * POOLED2 * POOLED2;
        Ok(Self {
            conv1: Conv3x3::new(INPUT_CHANNELS, c.conv1, &mut rng),
            bn1: BatchNorm::new(c.conv1),
            conv2: Conv3x3::new(c.conv1, c.conv2, &mut rng),
            bn2: BatchNorm::new(c.conv2),
            level_dense: Dense::new(flat, c.level_width, false, &mut rng),
            bn_level: BatchNorm::new(c.level_width),
            class_dense: Dense::new(CLASS_INPUTS, c.class_width, false, &mut rng),
            bn_class: BatchNorm::new(c.class_width),
            fusion: Dense::new(c.level_width + c.class_width, c.fusion_width, false, &mut rng),
            bn_fusion: BatchNorm::new(c.fusion_width),
            head: Dense::linear_head(c.fusion_width, c.output_dim, &mut rng),
            config,
            target,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    /// Every trainable tensor in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![
            &mut self.conv1.weight,
            &mut self.bn1.gamma,
            &mut self.bn1.beta,
            &mut self.conv2.weight,
            &mut self.bn2.gamma,
            &mut self.bn2.beta,
            &mut self.level_dense.weight,
            &mut self.bn_level.gamma,
            &mut self.bn_level.beta,
            &mut self.class_dense.weight,
            &mut self.bn_class.gamma,
            &mut self.bn_class.beta,
            &mut self.fusion.weight,
            &mut self.bn_fusion.gamma,
            &mut self.bn_fusion.beta,
            &mut self.head.weight,
        ];
        if let Some(b) = self.head.bias.as_mut() {
            out.push(b);
        }
        out
    }

    pub fn parameter_count(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Checks stored tensor sizes against the configuration.
    pub(crate) fn check_shapes(&mut self) -> Result<(), SurrogateError> {
        let c = self.config.clone();
        let flat = c.conv2 * POOLED2 * POOLED2;
        let expected = [
            c.conv1 * INPUT_CHANNELS * 9,
            c.conv1,
            c.conv1,
            c.conv2 * c.conv1 * 9,
            c.conv2,
            c.conv2,
            c.level_width * flat,
            c.level_width,
            c.level_width,
            c.class_width * CLASS_INPUTS,
            c.class_width,
            c.class_width,
            c.fusion_width * (c.level_width + c.class_width),
            c.fusion_width,
            c.fusion_width,
            c.output_dim * c.fusion_width,
            c.output_dim,
        ];
        let bns = [
            (&self.bn1, c.conv1),
            (&self.bn2, c.conv2),
            (&self.bn_level, c.level_width),
            (&self.bn_class, c.class_width),
            (&self.bn_fusion, c.fusion_width),
        ];
        for (bn, n) in bns {
            if bn.running_mean.len() != n || bn.running_var.len() != n {
                return Err(SurrogateError::InvalidModel(
                    "batch-norm statistics size mismatch".into(),
                ));
            }
        }
        let got: Vec<usize> = self.params_mut().iter().map(|p| p.value.len()).collect();
        if got != expected {
            return Err(SurrogateError::InvalidModel(format!(
                "tensor sizes {got:?} do not match configuration {expected:?}"
            )));
        }
        self.zero_grad();
        Ok(())
    }

    /// Training-mode forward pass (batch statistics, dropout when `dropout` is given).
    pub fn forward_train(&mut self, batch: &Batch, mut dropout: Option<&mut Rng>) -> (Vec<f64>, Cache) {
        let b = batch.size;
        let rate = self.config.dropout;
        let mut mask = |len: usize| -> Option<Vec<f64>> {
            match dropout.as_deref_mut() {
                Some(rng) if rate > 0.0 => Some(dropout_mask(len, rate, rng)),
                _ => None,
            }
        };

        let (mut z1, cols1) = self.conv1.forward(&batch.level, b, SIZE);
        let bn1 = self.bn1.forward_train(&mut z1, b * SIZE * SIZE, true);
        relu(&mut z1);
        let (p1, arg1) = maxpool2(&z1, self.config.conv1 * b, SIZE);

        let (mut z2, cols2) = self.conv2.forward(&p1, b, POOLED1);
        let bn2 = self.bn2.forward_train(&mut z2, b * POOLED1 * POOLED1, true);
        relu(&mut z2);
        let (p2, arg2) = maxpool2(&z2, self.config.conv2 * b, POOLED1);

        let flat = flatten(&p2, self.config.conv2, b);

        let mut zl = self.level_dense.forward(&flat, b);
        let bn_level = self.bn_level.forward_train(&mut zl, b, true);
        relu(&mut zl);
        let act_level = zl.clone();
        let mask_level = mask(zl.len());
        apply_mask(&mut zl, &mask_level);

        let mut zc = self.class_dense.forward(&batch.classes, b);
        let bn_class = self.bn_class.forward_train(&mut zc, b, true);
        relu(&mut zc);
        let act_class = zc.clone();
        let mask_class = mask(zc.len());
        apply_mask(&mut zc, &mask_class);

        let mut concat = zl;
        concat.extend_from_slice(&zc);

        let mut zf = self.fusion.forward(&concat, b);
        let bn_fusion = self.bn_fusion.forward_train(&mut zf, b, true);
        relu(&mut zf);
        let act_fusion = zf.clone();
        let mask_fusion = mask(zf.len());
        apply_mask(&mut zf, &mask_fusion);

        let out = self.head.forward(&zf, b);
        let cache = Cache {
            batch: b,
            cols1,
            bn1,
            act1: z1,
            arg1,
            cols2,
            bn2,
            act2: z2,
            arg2,
            flat,
            bn_level,
            act_level,
            mask_level,
            classes: batch.classes.clone(),
            bn_class,
            act_class,
            mask_class,
            concat,
            bn_fusion,
            act_fusion,
            mask_fusion,
            hidden: zf,
        };
        (out, cache)
    }

    /// Inference with frozen batch-norm statistics; output is `[n, batch]`.
    pub fn forward(&self, batch: &Batch) -> Vec<f64> {
        let b = batch.size;
        let (mut z1, _) = self.conv1.forward(&batch.level, b, SIZE);
        self.bn1.forward_eval(&mut z1, b * SIZE * SIZE);
        relu(&mut z1);
        let (p1, _) = maxpool2(&z1, self.config.conv1 * b, SIZE);
        let (mut z2, _) = self.conv2.forward(&p1, b, POOLED1);
        self.bn2.forward_eval(&mut z2, b * POOLED1 * POOLED1);
        relu(&mut z2);
        let (p2, _) = maxpool2(&z2, self.config.conv2 * b, POOLED1);
        let flat = flatten(&p2, self.config.conv2, b);
        let mut zl = self.level_dense.forward(&flat, b);
        self.bn_level.forward_eval(&mut zl, b);
        relu(&mut zl);
        let mut zc = self.class_dense.forward(&batch.classes, b);
        self.bn_class.forward_eval(&mut zc, b);
        relu(&mut zc);
        zl.extend_from_slice(&zc);
        let mut zf = self.fusion.forward(&zl, b);
        self.bn_fusion.forward_eval(&mut zf, b);
        relu(&mut zf);
        self.head.forward(&zf, b)
    }

    /// Accumulates parameter gradients for output gradient `dout` (`[n, batch]`).
    pub fn backward(&mut self, cache: &Cache, dout: &[f64]) {
        let b = cache.batch;
        let c = self.config.clone();

        let mut dh = self.head.backward(dout, &cache.hidden, b);
        apply_mask(&mut dh, &cache.mask_fusion);
        relu_backward(&mut dh, &cache.act_fusion);
        self.bn_fusion.backward(&mut dh, &cache.bn_fusion, b);
        let dconcat = self.fusion.backward(&dh, &cache.concat, b);
        let (dl, dc) = dconcat.split_at(c.level_width * b);
        let (mut dl, mut dc) = (dl.to_vec(), dc.to_vec());

        apply_mask(&mut dc, &cache.mask_class);
        relu_backward(&mut dc, &cache.act_class);
        self.bn_class.backward(&mut dc, &cache.bn_class, b);
        self.class_dense.backward(&dc, &cache.classes, b);

        apply_mask(&mut dl, &cache.mask_level);
        relu_backward(&mut dl, &cache.act_level);
        self.bn_level.backward(&mut dl, &cache.bn_level, b);
        let dflat = self.level_dense.backward(&dl, &cache.flat, b);

        let dp2 = unflatten(&dflat, c.conv2, b);
        let mut da2 = maxpool2_backward(&dp2, &cache.arg2, cache.act2.len());
        relu_backward(&mut da2, &cache.act2);
        self.bn2.backward(&mut da2, &cache.bn2, b * POOLED1 * POOLED1);
        let dp1 = self
            .conv2
            .backward(&da2, &cache.cols2, b, POOLED1, true)
            .expect("input gradient requested");
        let mut da1 = maxpool2_backward(&dp1, &cache.arg1, cache.act1.len());
        relu_backward(&mut da1, &cache.act1);
        self.bn1.backward(&mut da1, &cache.bn1, b * SIZE * SIZE);
        self.conv1.backward(&da1, &cache.cols1, b, SIZE, false);
    }

    /// Mean squared error over all outputs of the batch and its gradient,
    /// computed in training mode. Gradients are accumulated into the params.
    pub fn loss_and_backward(&mut self, batch: &Batch, rng: Option<&mut Rng>) -> f64 {
        let (out, cache) = self.forward_train(batch, rng);
        let scale = 1.0 / out.len() as f64;
        let mut dout = vec![0.0; out.len()];
        let mut loss = 0.0;
        for ((d, y), t) in dout.iter_mut().zip(&out).zip(&batch.targets) {
            let e = y - t;
            loss += e * e * scale;
            *d = 2.0 * e * scale;
        }
        self.backward(&cache, &dout);
        loss
    }

    /// Training-mode loss without touching gradients (running statistics
    /// are left as they were).
    pub fn training_loss(&self, batch: &Batch) -> f64 {
        let mut scratch = self.clone();
        let (out, _) = scratch.forward_train(batch, None);
        out.iter()
            .zip(&batch.targets)
            .map(|(y, t)| (y - t) * (y - t))
            .sum::<f64>()
            / out.len() as f64
    }

    /// Relative error between backpropagated gradients and central finite
    /// differences with step `h`, over every parameter. Dropout is not applied.
    pub fn gradient_check(&self, batch: &Batch, h: f64) -> f64 {
        let mut probe = self.clone();
        probe.zero_grad();
        probe.loss_and_backward(batch, None);
        let analytic: Vec<Vec<f64>> = probe.params_mut().iter().map(|p| p.grad.clone()).collect();

        let mut model = self.clone();
        let (mut diff, mut norm) = (0.0f64, 0.0f64);
        for (t, grads) in analytic.iter().enumerate() {
            for (i, &a) in grads.iter().enumerate() {
                let orig = model.params_mut()[t].value[i];
                model.params_mut()[t].value[i] = orig + h;
                let up = model.training_loss(batch);
                model.params_mut()[t].value[i] = orig - h;
                let down = model.training_loss(batch);
                model.params_mut()[t].value[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                diff += (a - numeric).powi(2);
                norm += (a.abs() + numeric.abs()).powi(2);
            }
        }
        diff.sqrt() / norm.sqrt().max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::ClassKind;
    use crate::corpus::{generate_random_level, GeneratorParams};
    use crate::surrogate::{encode_input, ModelInput};

    fn inputs(n: usize) -> Vec<ModelInput> {
        (0..n)
            .map(|i| {
                let level = generate_random_level(40 + i as u64, &GeneratorParams::default()).unwrap();
                let a = ClassKind::ALL[i % 5].preset();
                let b = ClassKind::ALL[(i + 2) % 5].preset();
                encode_input(&level, &a, &b).unwrap()
            })
            .collect()
    }

    fn tiny(output_dim: usize) -> ModelConfig {
        let mut c = ModelConfig::with_widths((2, 2, 4, 4, 4), output_dim);
        c.dropout = 0.0;
        c.seed = 11;
        c
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut model = SurrogateModel::new(tiny(5), Target::DramaticArc).unwrap();
        let data = inputs(3);
        let refs: Vec<&ModelInput> = data.iter().collect();
        let targets: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..5).map(|o| ((i * 5 + o) as f64 * 0.37).fract()).collect())
            .collect();
        let trefs: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();
        let batch = Batch::with_targets(&refs, &trefs);

        let rel = model.gradient_check(&batch, 1e-5);
        assert!(rel < 1e-4, "relative error {rel}");
        assert_eq!(model.params_mut().len(), 17);
    }

    #[test]
    fn batched_inference_matches_single_inference() {
        let mut model = SurrogateModel::new(tiny(16), Target::DeathHeatmap).unwrap();
        // Give batch-norm non-trivial running statistics.
        let data = inputs(6);
        let refs: Vec<&ModelInput> = data.iter().collect();
        model.forward_train(&Batch::from_inputs(&refs), None);
        let batched = model.predict_inputs(&refs);
        for (input, row) in data.iter().zip(&batched) {
            let single = model.predict_inputs(&[input]).pop().unwrap();
            for (a, b) in single.iter().zip(row) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

//! Network building blocks. Activations are stored feature-major:
//! convolutional maps as `[channels, batch, side, side]`, dense activations
//! as `[features, batch]`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::gemm::{gemm, View};
use crate::seed::Rng;

/// A trainable tensor and its gradient accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub value: Vec<f64>,
    #[serde(skip)]
    pub grad: Vec<f64>,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Self { value, grad }
    }

    pub fn uniform(len: usize, bound: f64, rng: &mut Rng) -> Self {
        Self::new((0..len).map(|_| rng.gen_range(-bound..=bound)).collect())
    }

    pub fn zero_grad(&mut self) {
        if self.grad.len() != self.value.len() {
            self.grad = vec![0.0; self.value.len()];
        } else {
            self.grad.fill(0.0);
        }
    }
}

/// 3×3 convolution, stride 1, zero "same" padding, no bias (batch norm follows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv3x3 {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out, in·9]`, inner order (in, ky, kx).
    pub weight: Param,
}

impl Conv3x3 {
    pub fn new(in_channels: usize, out_channels: usize, rng: &mut Rng) -> Self {
        let fan_in = in_channels * 9;
        Self {
            in_channels,
            out_channels,
            weight: Param::uniform(out_channels * fan_in, (6.0 / fan_in as f64).sqrt(), rng),
        }
    }

    /// Unfolds `[in, batch, side, side]` into `[in·9, batch·side·side]`.
    pub fn im2col(&self, x: &[f64], batch: usize, side: usize) -> Vec<f64> {
        let plane = side * side;
        let n = batch * plane;
        let mut cols = vec![0.0; self.in_channels * 9 * n];
        for ci in 0..self.in_channels {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &mut cols[((ci * 9) + ky * 3 + kx) * n..][..n];
                    for b in 0..batch {
                        let src = &x[(ci * batch + b) * plane..][..plane];
                        let dst = &mut row[b * plane..][..plane];
                        for y in 0..side {
                            let sy = y as isize + ky as isize - 1;
                            if sy < 0 || sy >= side as isize {
                                continue;
                            }
                            let sy = sy as usize;
                            for xx in 0..side {
                                let sx = xx as isize + kx as isize - 1;
                                if sx < 0 || sx >= side as isize {
                                    continue;
                                }
                                dst[y * side + xx] = src[sy * side + sx as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    /// Folds column gradients back onto the input layout.
    fn col2im(&self, dcols: &[f64], batch: usize, side: usize) -> Vec<f64> {
        let plane = side * side;
        let n = batch * plane;
        let mut dx = vec![0.0; self.in_channels * n];
        for ci in 0..self.in_channels {
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &dcols[((ci * 9) + ky * 3 + kx) * n..][..n];
                    for b in 0..batch {
                        let dst = &mut dx[(ci * batch + b) * plane..][..plane];
                        let src = &row[b * plane..][..plane];
                        for y in 0..side {
                            let sy = y as isize + ky as isize - 1;
                            if sy < 0 || sy >= side as isize {
                                continue;
                            }
                            let sy = sy as usize;
                            for xx in 0..side {
                                let sx = xx as isize + kx as isize - 1;
                                if sx < 0 || sx >= side as isize {
                                    continue;
                                }
                                dst[sy * side + sx as usize] += src[y * side + xx];
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    /// Returns the output `[out, batch·side·side]` and the unfolded input.
    pub fn forward(&self, x: &[f64], batch: usize, side: usize) -> (Vec<f64>, Vec<f64>) {
        let cols = self.im2col(x, batch, side);
        let n = batch * side * side;
        let k = self.in_channels * 9;
        let mut out = vec![0.0; self.out_channels * n];
        gemm(
            1.0,
            View::new(&self.weight.value, self.out_channels, k),
            View::new(&cols, k, n),
            0.0,
            &mut out,
        );
        (out, cols)
    }

    /// Accumulates the weight gradient; returns the input gradient when asked.
    pub fn backward(
        &mut self,
        dout: &[f64],
        cols: &[f64],
        batch: usize,
        side: usize,
        need_input: bool,
    ) -> Option<Vec<f64>> {
        let n = batch * side * side;
        let k = self.in_channels * 9;
        gemm(
            1.0,
            View::new(dout, self.out_channels, n),
            View::new(cols, k, n).t(),
            1.0,
            &mut self.weight.grad,
        );
        if !need_input {
            return None;
        }
        let mut dcols = vec![0.0; k * n];
        gemm(
            1.0,
            View::new(&self.weight.value, self.out_channels, k).t(),
            View::new(dout, self.out_channels, n),
            0.0,
            &mut dcols,
        );
        Some(self.col2im(&dcols, batch, side))
    }
}

/// Fully connected layer on `[in, batch]` activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[out, in]`.
    pub weight: Param,
    pub bias: Option<Param>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, with_bias: bool, rng: &mut Rng) -> Self {
        Self {
            inputs,
            outputs,
            weight: Param::uniform(outputs * inputs, (6.0 / inputs as f64).sqrt(), rng),
            bias: with_bias.then(|| Param::new(vec![0.0; outputs])),
        }
    }

    /// Linear output layer: smaller initial scale.
    pub fn linear_head(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        Self {
            inputs,
            outputs,
            weight: Param::uniform(outputs * inputs, (1.0 / inputs as f64).sqrt(), rng),
            bias: Some(Param::new(vec![0.0; outputs])),
        }
    }

    pub fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs * batch];
        if let Some(bias) = &self.bias {
            for (o, b) in out.chunks_mut(batch).zip(&bias.value) {
                o.fill(*b);
            }
        }
        gemm(
            1.0,
            View::new(&self.weight.value, self.outputs, self.inputs),
            View::new(x, self.inputs, batch),
            if self.bias.is_some() { 1.0 } else { 0.0 },
            &mut out,
        );
        out
    }

    pub fn backward(&mut self, dout: &[f64], x: &[f64], batch: usize) -> Vec<f64> {
        gemm(
            1.0,
            View::new(dout, self.outputs, batch),
            View::new(x, self.inputs, batch).t(),
            1.0,
            &mut self.weight.grad,
        );
        if let Some(bias) = &mut self.bias {
            for (g, row) in bias.grad.iter_mut().zip(dout.chunks(batch)) {
                *g += row.iter().sum::<f64>();
            }
        }
        let mut dx = vec![0.0; self.inputs * batch];
        gemm(
            1.0,
            View::new(&self.weight.value, self.outputs, self.inputs).t(),
            View::new(dout, self.outputs, batch),
            0.0,
            &mut dx,
        );
        dx
    }
}

/// Batch normalisation over the trailing axis of a `[features, n]` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub features: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

pub struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        Self {
            features,
            gamma: Param::new(vec![1.0; features]),
            beta: Param::new(vec![0.0; features]),
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum: 0.9,
            eps: 1e-5,
        }
    }

    /// Normalises with batch statistics in place and updates running statistics.
    pub fn forward_train(&mut self, x: &mut [f64], n: usize, update_running: bool) -> BnCache {
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; self.features];
        for f in 0..self.features {
            let row = &mut x[f * n..][..n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[f] = is;
            let (g, b) = (self.gamma.value[f], self.beta.value[f]);
            let xh = &mut xhat[f * n..][..n];
            for (v, h) in row.iter_mut().zip(xh.iter_mut()) {
                *h = (*v - mean) * is;
                *v = g * *h + b;
            }
            if update_running {
                let unbiased = if n > 1 { var * n as f64 / (n - 1) as f64 } else { var };
                self.running_mean[f] = self.momentum * self.running_mean[f] + (1.0 - self.momentum) * mean;
                self.running_var[f] = self.momentum * self.running_var[f] + (1.0 - self.momentum) * unbiased;
            }
        }
        BnCache { xhat, inv_std }
    }

    pub fn forward_eval(&self, x: &mut [f64], n: usize) {
        for f in 0..self.features {
            let is = 1.0 / (self.running_var[f] + self.eps).sqrt();
            let (m, g, b) = (self.running_mean[f], self.gamma.value[f], self.beta.value[f]);
            for v in &mut x[f * n..][..n] {
                *v = g * (*v - m) * is + b;
            }
        }
    }

    /// Turns `dy` into `dx` in place and accumulates gamma/beta gradients.
    pub fn backward(&mut self, dy: &mut [f64], cache: &BnCache, n: usize) {
        let nf = n as f64;
        for f in 0..self.features {
            let row = &mut dy[f * n..][..n];
            let xh = &cache.xhat[f * n..][..n];
            let sum_dy: f64 = row.iter().sum();
            let sum_dy_xh: f64 = row.iter().zip(xh).map(|(d, h)| d * h).sum();
            self.gamma.grad[f] += sum_dy_xh;
            self.beta.grad[f] += sum_dy;
            let g = self.gamma.value[f];
            let k = g * cache.inv_std[f] / nf;
            for (d, h) in row.iter_mut().zip(xh) {
                *d = k * (nf * *d - sum_dy - h * sum_dy_xh);
            }
        }
    }
}

pub fn relu(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Masks `grad` where the ReLU output was zero.
pub fn relu_backward(grad: &mut [f64], out: &[f64]) {
    for (g, o) in grad.iter_mut().zip(out) {
        if *o <= 0.0 {
            *g = 0.0;
        }
    }
}

/// 2×2 max pooling on `[channels, batch, side, side]`; returns argmax offsets.
pub fn maxpool2(x: &[f64], planes: usize, side: usize) -> (Vec<f64>, Vec<u32>) {
    let half = side / 2;
    let mut out = vec![0.0; planes * half * half];
    let mut arg = vec![0u32; planes * half * half];
    for p in 0..planes {
        let src = &x[p * side * side..][..side * side];
        for y in 0..half {
            for xx in 0..half {
                let mut best = (2 * y) * side + 2 * xx;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = (2 * y + dy) * side + 2 * xx + dx;
                    if src[i] > src[best] {
                        best = i;
                    }
                }
                let o = p * half * half + y * half + xx;
                out[o] = src[best];
                arg[o] = (p * side * side + best) as u32;
            }
        }
    }
    (out, arg)
}

pub fn maxpool2_backward(dout: &[f64], arg: &[u32], input_len: usize) -> Vec<f64> {
    let mut dx = vec![0.0; input_len];
    for (d, &i) in dout.iter().zip(arg) {
        dx[i as usize] += d;
    }
    dx
}

/// Inverted dropout mask (`0` or `1/(1-rate)`).
pub fn dropout_mask(len: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

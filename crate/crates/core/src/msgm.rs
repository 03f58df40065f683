//! Numeric reference of the multi-scale gated module.
//!
//! Three same-padded convolutions (kernel sizes 1, 3 and 5) see the same BEV
//! feature map. A small gating MLP on the globally pooled input produces one
//! softmax weight per branch, and the output is the weighted sum of the
//! branches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const KERNEL_SIZES: [usize; 3] = [1, 3, 5];

/// `C × H × W` feature map, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "feature map dims must be >= 1, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch(format!(
                "{channels}x{height}x{width} map needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("feature map holds non-finite values".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }
}

/// Convolution weights `out × in × k × k` plus one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub size: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvKernel {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        size: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::ShapeMismatch(format!("kernel size {size} is not odd")));
        }
        if weights.len() != out_channels * in_channels * size * size {
            return Err(Error::ShapeMismatch(format!(
                "kernel {out_channels}x{in_channels}x{size}x{size} needs {} weights, got {}",
                out_channels * in_channels * size * size,
                weights.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::ShapeMismatch(format!(
                "bias needs {out_channels} values, got {}",
                bias.len()
            )));
        }
        Ok(Self {
            out_channels,
            in_channels,
            size,
            weights,
            bias,
        })
    }

    fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * self.size + ky) * self.size + kx]
    }
}

/// A dense layer `y = W x + b` with `W` stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub out_features: usize,
    pub in_features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(out_features: usize, in_features: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != out_features * in_features || bias.len() != out_features {
            return Err(Error::ShapeMismatch(format!(
                "dense {out_features}x{in_features} got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self {
            out_features,
            in_features,
            weights,
            bias,
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_features {
            return Err(Error::ShapeMismatch(format!(
                "dense layer expects {} inputs, got {}",
                self.in_features,
                x.len()
            )));
        }
        Ok((0..self.out_features)
            .map(|o| {
                let row = &self.weights[o * self.in_features..(o + 1) * self.in_features];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[o]
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsgmParams {
    /// Branches with kernel sizes 1, 3 and 5, in that order.
    pub kernels: [ConvKernel; 3],
    pub gate_hidden: Dense,
    pub gate_out: Dense,
}

/// Gating MLP width: `ceil(C / 2)`, at least 4.
pub fn default_hidden_width(channels: usize) -> usize {
    channels.div_ceil(2).max(4)
}

impl MsgmParams {
    pub fn new(kernels: [ConvKernel; 3], gate_hidden: Dense, gate_out: Dense) -> Result<Self> {
        let params = Self {
            kernels,
            gate_hidden,
            gate_out,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, size) in self.kernels.iter().zip(KERNEL_SIZES) {
            if k.size != size {
                return Err(Error::ShapeMismatch(format!(
                    "branch kernels must have sizes {KERNEL_SIZES:?}, found {}",
                    k.size
                )));
            }
        }
        let (c_in, c_out) = (self.kernels[0].in_channels, self.kernels[0].out_channels);
        if self
            .kernels
            .iter()
            .any(|k| k.in_channels != c_in || k.out_channels != c_out)
        {
            return Err(Error::ShapeMismatch("branch kernels disagree on channel counts".into()));
        }
        if self.gate_hidden.in_features != c_in {
            return Err(Error::ShapeMismatch(format!(
                "gate input width {} != feature channels {c_in}",
                self.gate_hidden.in_features
            )));
        }
        if self.gate_out.out_features != 3 || self.gate_out.in_features != self.gate_hidden.out_features {
            return Err(Error::ShapeMismatch(format!(
                "second gate layer must be 3x{}, got {}x{}",
                self.gate_hidden.out_features, self.gate_out.out_features, self.gate_out.in_features
            )));
        }
        Ok(())
    }

    pub fn in_channels(&self) -> usize {
        self.kernels[0].in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.kernels[0].out_channels
    }

    /// Uniform `[-scale, scale]` parameters from a seeded generator.
    pub fn random(in_channels: usize, out_channels: usize, seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-scale..=scale)).collect() };
        let kernels = KERNEL_SIZES.map(|k| ConvKernel {
            out_channels,
            in_channels,
            size: k,
            weights: draw(out_channels * in_channels * k * k),
            bias: draw(out_channels),
        });
        let hidden = default_hidden_width(in_channels);
        let gate_hidden = Dense {
            out_features: hidden,
            in_features: in_channels,
            weights: draw(hidden * in_channels),
            bias: draw(hidden),
        };
        let gate_out = Dense {
            out_features: 3,
            in_features: hidden,
            weights: draw(3 * hidden),
            bias: draw(3),
        };
        Self {
            kernels,
            gate_hidden,
            gate_out,
        }
    }
}

/// Cross-correlation with zero padding `(k - 1) / 2`; output keeps `H × W`.
pub fn conv2d_same(input: &FeatureMap, kernel: &ConvKernel) -> Result<FeatureMap> {
    if kernel.in_channels != input.channels {
        return Err(Error::ShapeMismatch(format!(
            "kernel expects {} input channels, map has {}",
            kernel.in_channels, input.channels
        )));
    }
    if kernel.size.is_multiple_of(2) {
        return Err(Error::ShapeMismatch(format!("kernel size {} is not odd", kernel.size)));
    }
    let (h, w) = (input.height as isize, input.width as isize);
    let pad = (kernel.size / 2) as isize;
    let mut out = FeatureMap::zeros(kernel.out_channels, input.height, input.width);
    for o in 0..kernel.out_channels {
        for y in 0..h {
            for x in 0..w {
                let mut acc = kernel.bias[o];
                for i in 0..input.channels {
                    for ky in 0..kernel.size {
                        let sy = y + ky as isize - pad;
                        if sy < 0 || sy >= h {
                            continue;
                        }
                        for kx in 0..kernel.size {
                            let sx = x + kx as isize - pad;
                            if sx < 0 || sx >= w {
                                continue;
                            }
                            acc += kernel.weight(o, i, ky, kx)
                                * input.get(i, sy as usize, sx as usize);
                        }
                    }
                }
                out.data[((o * input.height) + y as usize) * input.width + x as usize] = acc;
            }
        }
    }
    Ok(out)
}

pub fn global_avg_pool(input: &FeatureMap) -> Vec<f64> {
    let plane = input.height * input.width;
    input
        .data
        .chunks_exact(plane)
        .map(|ch| ch.iter().sum::<f64>() / plane as f64)
        .collect()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Raw gate logits `W2 · ReLU(W1 · GAP(F) + b1) + b2`.
pub fn gate_logits(input: &FeatureMap, params: &MsgmParams) -> Result<[f64; 3]> {
    params.validate()?;
    if input.channels != params.in_channels() {
        return Err(Error::ShapeMismatch(format!(
            "params expect {} channels, map has {}",
            params.in_channels(),
            input.channels
        )));
    }
    let pooled = global_avg_pool(input);
    let hidden: Vec<f64> = params
        .gate_hidden
        .forward(&pooled)?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    let logits = params.gate_out.forward(&hidden)?;
    Ok([logits[0], logits[1], logits[2]])
}

/// One softmax weight per branch; positive and summing to one.
pub fn gate_weights(input: &FeatureMap, params: &MsgmParams) -> Result<[f64; 3]> {
    let w = softmax(&gate_logits(input, params)?);
    Ok([w[0], w[1], w[2]])
}

/// Branch outputs for kernel sizes 1, 3 and 5.
pub fn branch_outputs(input: &FeatureMap, params: &MsgmParams) -> Result<[FeatureMap; 3]> {
    params.validate()?;
    let (f1, (f3, f5)) = rayon::join(
        || conv2d_same(input, &params.kernels[0]),
        || {
            rayon::join(
                || conv2d_same(input, &params.kernels[1]),
                || conv2d_same(input, &params.kernels[2]),
            )
        },
    );
    Ok([f1?, f3?, f5?])
}

/// `Σ w_i · F_i` for precomputed branches and weights.
pub fn fuse(branches: &[FeatureMap; 3], weights: [f64; 3]) -> Result<FeatureMap> {
    let dims = branches[0].dims();
    if branches.iter().any(|b| b.dims() != dims) {
        return Err(Error::ShapeMismatch("branch outputs differ in shape".into()));
    }
    let mut out = FeatureMap::zeros(dims[0], dims[1], dims[2]);
    for (b, w) in branches.iter().zip(weights) {
        for (o, v) in out.data.iter_mut().zip(&b.data) {
            *o += w * v;
        }
    }
    Ok(out)
}

pub fn msgm_forward(input: &FeatureMap, params: &MsgmParams) -> Result<FeatureMap> {
    let weights = gate_weights(input, params)?;
    fuse(&branch_outputs(input, params)?, weights)
}

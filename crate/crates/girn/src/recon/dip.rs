//! Untrained convolutional generator used as an implicit image prior.
//!
//! Each candidate owns a tiny decoder: a frozen 4x4 multi-channel noise
//! latent, three stages of 2x nearest-neighbor upsampling followed by a 3x3
//! convolution and ReLU, and a final 3x3 convolution with a sigmoid that
//! maps into `[0, 1]`. The 32x32 sigmoid output is center-cropped to the
//! model's grid. Only the weights are optimized; the forward and backward
//! passes are written out by hand so the whole gradient path stays
//! auditable.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::image::{Grid, ImageTensor};

/// Latent side length; three 2x upsamplings take it to 32.
const LATENT_SIDE: usize = 4;
const OUTPUT_SIDE: usize = LATENT_SIDE * 8;

/// Generator hyperparameters.
#[derive(Debug, Clone)]
pub struct DipConfig {
    /// Channel width of the latent and the three hidden stages.
    pub channels: usize,
}

impl Default for DipConfig {
    fn default() -> Self {
        DipConfig { channels: 8 }
    }
}

/// Anything that turns a weight vector into a candidate image and can pull
/// an output-space gradient back to weight space.
pub trait Generator {
    fn weights(&self) -> &[f64];
    fn weights_mut(&mut self) -> &mut [f64];
    /// Current output image.
    fn output(&self) -> ImageTensor;
    /// `d L / d weights` given `d L / d output` (length `d`).
    fn vjp(&self, grad_output: &[f64]) -> Vec<f64>;
}

// Channel-major feature maps: value at (ch, r, c) of an s x s map with C
// channels lives at ch*s*s + r*s + c.

fn upsample2(input: &[f64], channels: usize, side: usize, out: &mut Vec<f64>) {
    let os = side * 2;
    out.clear();
    out.resize(channels * os * os, 0.0);
    for ch in 0..channels {
        let src = &input[ch * side * side..(ch + 1) * side * side];
        let dst = &mut out[ch * os * os..(ch + 1) * os * os];
        for r in 0..os {
            for c in 0..os {
                dst[r * os + c] = src[(r / 2) * side + c / 2];
            }
        }
    }
}

fn upsample2_backward(grad_out: &[f64], channels: usize, side: usize, grad_in: &mut Vec<f64>) {
    let os = side * 2;
    grad_in.clear();
    grad_in.resize(channels * side * side, 0.0);
    for ch in 0..channels {
        let dst = &mut grad_in[ch * side * side..(ch + 1) * side * side];
        let src = &grad_out[ch * os * os..(ch + 1) * os * os];
        for r in 0..os {
            for c in 0..os {
                dst[(r / 2) * side + c / 2] += src[r * os + c];
            }
        }
    }
}

/// 3x3 convolution with zero padding 1; weights laid out
/// `[c_out][c_in][3][3]` followed by one bias per output channel.
fn conv3x3(
    input: &[f64],
    c_in: usize,
    c_out: usize,
    side: usize,
    weights: &[f64],
    biases: &[f64],
    out: &mut Vec<f64>,
) {
    out.clear();
    out.resize(c_out * side * side, 0.0);
    for co in 0..c_out {
        let dst = &mut out[co * side * side..(co + 1) * side * side];
        for v in dst.iter_mut() {
            *v = biases[co];
        }
        for ci in 0..c_in {
            let src = &input[ci * side * side..(ci + 1) * side * side];
            let k = &weights[(co * c_in + ci) * 9..(co * c_in + ci + 1) * 9];
            for r in 0..side {
                for c in 0..side {
                    let mut acc = 0.0;
                    for dr in 0..3 {
                        let rr = r + dr;
                        if rr < 1 || rr > side {
                            continue;
                        }
                        for dc in 0..3 {
                            let cc = c + dc;
                            if cc < 1 || cc > side {
                                continue;
                            }
                            acc += k[dr * 3 + dc] * src[(rr - 1) * side + (cc - 1)];
                        }
                    }
                    dst[r * side + c] += acc;
                }
            }
        }
    }
}

/// Backward of [`conv3x3`]: accumulates weight/bias gradients and computes
/// the input gradient.
#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    grad_out: &[f64],
    c_in: usize,
    c_out: usize,
    side: usize,
    weights: &[f64],
    grad_weights: &mut [f64],
    grad_biases: &mut [f64],
    grad_in: &mut Vec<f64>,
) {
    grad_in.clear();
    grad_in.resize(c_in * side * side, 0.0);
    for co in 0..c_out {
        let go = &grad_out[co * side * side..(co + 1) * side * side];
        grad_biases[co] += go.iter().sum::<f64>();
        for ci in 0..c_in {
            let src = &input[ci * side * side..(ci + 1) * side * side];
            let k = &weights[(co * c_in + ci) * 9..(co * c_in + ci + 1) * 9];
            let gk = &mut grad_weights[(co * c_in + ci) * 9..(co * c_in + ci + 1) * 9];
            let gi = &mut grad_in[ci * side * side..(ci + 1) * side * side];
            for r in 0..side {
                for c in 0..side {
                    let g = go[r * side + c];
                    if g == 0.0 {
                        continue;
                    }
                    for dr in 0..3 {
                        let rr = r + dr;
                        if rr < 1 || rr > side {
                            continue;
                        }
                        for dc in 0..3 {
                            let cc = c + dc;
                            if cc < 1 || cc > side {
                                continue;
                            }
                            let idx = (rr - 1) * side + (cc - 1);
                            gk[dr * 3 + dc] += g * src[idx];
                            gi[idx] += g * k[dr * 3 + dc];
                        }
                    }
                }
            }
        }
    }
}

struct Trace {
    /// Input to each of the four convolutions (post-upsample for the
    /// hidden stages).
    conv_inputs: Vec<Vec<f64>>,
    /// Post-ReLU activations of the three hidden stages.
    relu_outputs: Vec<Vec<f64>>,
    /// Sigmoid outputs on the full 32x32 map.
    sigmoid: Vec<f64>,
}

/// Per-candidate convolutional decoder with a frozen latent.
#[derive(Debug, Clone)]
pub struct ConvGenerator {
    channels: usize,
    grid: Grid,
    latent: Vec<f64>,
    weights: Vec<f64>,
    /// Offsets of (weights, biases) per conv layer inside `weights`.
    layout: [(usize, usize); 4],
}

impl ConvGenerator {
    /// Randomly initialize a generator whose output is cropped to `grid`.
    pub fn seeded(config: &DipConfig, grid: Grid, seed: u64) -> Result<Self> {
        if grid.height > OUTPUT_SIDE || grid.width > OUTPUT_SIDE {
            return Err(Error::Unsupported {
                what: "DIP output grid",
                detail: format!(
                    "{}x{} exceeds the generator's {OUTPUT_SIDE}x{OUTPUT_SIDE} canvas",
                    grid.height, grid.width
                ),
            });
        }
        let c = config.channels;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latent: Vec<f64> = (0..c * LATENT_SIDE * LATENT_SIDE)
            .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();

        // three c->c stages plus the final c->1 head
        let mut weights = Vec::new();
        let mut layout = [(0usize, 0usize); 4];
        for (i, (ci, co)) in [(c, c), (c, c), (c, c), (c, 1)].iter().enumerate() {
            let w_off = weights.len();
            let std = 1.0 / ((ci * 9) as f64).sqrt();
            for _ in 0..co * ci * 9 {
                weights.push(std * rng.sample::<f64, _>(StandardNormal));
            }
            let b_off = weights.len();
            for _ in 0..*co {
                weights.push(0.0);
            }
            layout[i] = (w_off, b_off);
        }
        Ok(ConvGenerator {
            channels: c,
            grid,
            latent,
            weights,
            layout,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn forward_trace(&self) -> (ImageTensor, Trace) {
        let c = self.channels;
        let mut conv_inputs = Vec::with_capacity(4);
        let mut relu_outputs = Vec::with_capacity(3);
        let mut current = self.latent.clone();
        let mut side = LATENT_SIDE;
        let mut buf = Vec::new();

        for stage in 0..3 {
            upsample2(&current, c, side, &mut buf);
            side *= 2;
            conv_inputs.push(buf.clone());
            let (w_off, b_off) = self.layout[stage];
            let w = &self.weights[w_off..b_off];
            let b = &self.weights[b_off..b_off + c];
            let mut z = Vec::new();
            conv3x3(&buf, c, c, side, w, b, &mut z);
            for v in &mut z {
                if *v <= 0.0 {
                    *v = 0.0;
                }
            }
            relu_outputs.push(z.clone());
            current = z;
        }

        conv_inputs.push(current.clone());
        let (w_off, b_off) = self.layout[3];
        let w = &self.weights[w_off..b_off];
        let b = &self.weights[b_off..b_off + 1];
        let mut z = Vec::new();
        conv3x3(&current, c, 1, side, w, b, &mut z);
        let sigmoid: Vec<f64> = z.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();

        // center-crop the 32x32 map to the target grid
        let (h, w_out) = (self.grid.height, self.grid.width);
        let r0 = (side - h) / 2;
        let c0 = (side - w_out) / 2;
        let mut data = Vec::with_capacity(h * w_out);
        for r in 0..h {
            for cc in 0..w_out {
                data.push(sigmoid[(r0 + r) * side + (c0 + cc)]);
            }
        }
        (
            ImageTensor {
                data,
                grid: self.grid,
            },
            Trace {
                conv_inputs,
                relu_outputs,
                sigmoid,
            },
        )
    }
}

impl Generator for ConvGenerator {
    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn output(&self) -> ImageTensor {
        self.forward_trace().0
    }

    fn vjp(&self, grad_output: &[f64]) -> Vec<f64> {
        debug_assert_eq!(grad_output.len(), self.grid.len());
        let c = self.channels;
        let (_, trace) = self.forward_trace();
        let mut grad_w = vec![0.0; self.weights.len()];

        // un-crop, then back through the sigmoid
        let side = OUTPUT_SIDE;
        let (h, w_out) = (self.grid.height, self.grid.width);
        let r0 = (side - h) / 2;
        let c0 = (side - w_out) / 2;
        let mut grad_map = vec![0.0; side * side];
        for r in 0..h {
            for cc in 0..w_out {
                let s = trace.sigmoid[(r0 + r) * side + (c0 + cc)];
                grad_map[(r0 + r) * side + (c0 + cc)] = grad_output[r * w_out + cc] * s * (1.0 - s);
            }
        }

        // final conv head
        let (w_off, b_off) = self.layout[3];
        let mut grad_in = Vec::new();
        {
            let (gw_head, gw_rest) = grad_w.split_at_mut(b_off);
            conv3x3_backward(
                &trace.conv_inputs[3],
                &grad_map,
                c,
                1,
                side,
                &self.weights[w_off..b_off],
                &mut gw_head[w_off..],
                &mut gw_rest[..1],
                &mut grad_in,
            );
        }

        // three hidden stages, in reverse
        let mut grad = grad_in;
        let mut stage_side = side;
        for stage in (0..3).rev() {
            // through the ReLU of this stage
            for (g, &a) in grad.iter_mut().zip(&trace.relu_outputs[stage]) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            let (w_off, b_off) = self.layout[stage];
            let mut grad_in = Vec::new();
            {
                let (gw_head, gw_rest) = grad_w.split_at_mut(b_off);
                conv3x3_backward(
                    &trace.conv_inputs[stage],
                    &grad,
                    c,
                    c,
                    stage_side,
                    &self.weights[w_off..b_off],
                    &mut gw_head[w_off..],
                    &mut gw_rest[..c],
                    &mut grad_in,
                );
            }
            // back through the upsampling into the previous resolution
            stage_side /= 2;
            let mut grad_prev = Vec::new();
            upsample2_backward(&grad_in, c, stage_side, &mut grad_prev);
            grad = grad_prev;
        }
        grad_w
    }
}

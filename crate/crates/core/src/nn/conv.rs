//! Valid-padding, stride-1 2-D cross-correlation over `[n, h, w, c]` input.

use rand_chacha::ChaCha8Rng;

use super::{axpy, debug_check_finite, dot, glorot_uniform, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    /// `[out_ch, in_ch, kh, kw]`
    pub weight: Tensor,
    /// `[out_ch]`
    pub bias: Tensor,
    /// Declared `[h, w]` of the input, when the layer fronts a model.
    pub input_hw: Option<[usize; 2]>,
}

impl Conv2d {
    /// Zero-initialized layer with gradient buffers.
    pub fn new(in_ch: usize, out_ch: usize, kh: usize, kw: usize) -> Result<Self> {
        Ok(Self {
            weight: Tensor::parameter(&[out_ch, in_ch, kh, kw])?,
            bias: Tensor::parameter(&[out_ch])?,
            input_hw: None,
        })
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.dims().len() != 4 || bias.dims() != [weight.dims()[0]] {
            return Err(Error::shape(weight.dims(), bias.dims()));
        }
        let mut layer = Self {
            weight,
            bias,
            input_hw: None,
        };
        layer.weight.require_grad();
        layer.bias.require_grad();
        Ok(layer)
    }

    pub fn init(&mut self, rng: &mut ChaCha8Rng) {
        let (out_ch, in_ch, kh, kw) = self.shape();
        let rf = kh * kw;
        glorot_uniform(&mut self.weight, in_ch * rf, out_ch * rf, rng);
        self.bias.data_mut().fill(0.0);
    }

    /// `(out_ch, in_ch, kh, kw)`
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        let d = self.weight.dims();
        (d[0], d[1], d[2], d[3])
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (out_ch, in_ch, kh, kw) = self.shape();
        let declared_ok = match self.input_hw {
            Some([h, w]) => input.len() == 4 && input[1] == h && input[2] == w,
            None => true,
        };
        if input.len() != 4 || input[3] != in_ch || input[1] < kh || input[2] < kw || !declared_ok {
            let dim = |i: usize, min: usize| input.get(i).copied().unwrap_or(min).max(min);
            let (h, w) = match self.input_hw {
                Some([h, w]) => (h, w),
                None => (dim(1, kh), dim(2, kw)),
            };
            return Err(Error::shape(&[dim(0, 1), h, w, in_ch], input));
        }
        Ok(vec![input[0], input[1] - kh + 1, input[2] - kw + 1, out_ch])
    }

    /// Weights reordered to `[out_ch][kh][kw * in_ch]`, the order in which a
    /// channels-last input patch is laid out in memory.
    fn packed_weights(&self) -> Vec<f32> {
        let (out_ch, in_ch, kh, kw) = self.shape();
        let w = self.weight.data();
        let k = kh * kw * in_ch;
        let mut packed = vec![0f32; out_ch * k];
        for o in 0..out_ch {
            for i in 0..in_ch {
                for dy in 0..kh {
                    for dx in 0..kw {
                        packed[o * k + (dy * kw + dx) * in_ch + i] =
                            w[((o * in_ch + i) * kh + dy) * kw + dx];
                    }
                }
            }
        }
        packed
    }
}

/// Copies the `kh × kw × c` patch whose top-left corner is `(y, x)`.
#[inline]
#[allow(clippy::too_many_arguments)]
fn gather_patch(
    input: &[f32],
    w: usize,
    c: usize,
    base: usize,
    y: usize,
    x: usize,
    kh: usize,
    kw: usize,
    patch: &mut [f32],
) {
    let seg = kw * c;
    for dy in 0..kh {
        let start = base + ((y + dy) * w + x) * c;
        patch[dy * seg..(dy + 1) * seg].copy_from_slice(&input[start..start + seg]);
    }
}

pub fn conv2d_forward(input: &Tensor, layer: &Conv2d) -> Result<Tensor> {
    let out_dims = layer.output_dims(input.dims())?;
    let (out_ch, in_ch, kh, kw) = layer.shape();
    let (n, h, w) = (input.dims()[0], input.dims()[1], input.dims()[2]);
    let (oh, ow) = (out_dims[1], out_dims[2]);
    let k = kh * kw * in_ch;
    let packed = layer.packed_weights();
    let bias = layer.bias.data();
    let src = input.data();
    let mut out = vec![0f32; n * oh * ow * out_ch];
    let mut patch = vec![0f32; k];
    for b in 0..n {
        let base = b * h * w * in_ch;
        for y in 0..oh {
            for x in 0..ow {
                gather_patch(src, w, in_ch, base, y, x, kh, kw, &mut patch);
                let dst = ((b * oh + y) * ow + x) * out_ch;
                for o in 0..out_ch {
                    let acc = bias[o] as f64 + dot(&patch, &packed[o * k..(o + 1) * k]);
                    out[dst + o] = acc as f32;
                }
            }
        }
    }
    let out = Tensor::from_vec(&out_dims, out)?;
    debug_check_finite(&out, "conv2d_forward");
    Ok(out)
}

/// Returns the gradient with respect to `input` and adds the weight and bias
/// gradients into the layer's buffers.
pub fn conv2d_backward(grad_out: &Tensor, input: &Tensor, layer: &mut Conv2d) -> Result<Tensor> {
    let out_dims = layer.output_dims(input.dims())?;
    if grad_out.dims() != out_dims.as_slice() {
        return Err(Error::shape(&out_dims, grad_out.dims()));
    }
    let (out_ch, in_ch, kh, kw) = layer.shape();
    let (n, h, w) = (input.dims()[0], input.dims()[1], input.dims()[2]);
    let (oh, ow) = (out_dims[1], out_dims[2]);
    let k = kh * kw * in_ch;
    let seg = kw * in_ch;
    let packed = layer.packed_weights();
    let src = input.data();
    let g = grad_out.data();

    let mut gw = vec![0f64; out_ch * k];
    let mut gb = vec![0f64; out_ch];
    let mut gin = vec![0f64; input.len()];
    let mut patch = vec![0f32; k];
    let mut gpatch = vec![0f64; k];
    for b in 0..n {
        let base = b * h * w * in_ch;
        for y in 0..oh {
            for x in 0..ow {
                let go = &g[((b * oh + y) * ow + x) * out_ch..][..out_ch];
                if go.iter().all(|&v| v == 0.0) {
                    continue;
                }
                gather_patch(src, w, in_ch, base, y, x, kh, kw, &mut patch);
                gpatch.fill(0.0);
                for (o, &gv) in go.iter().enumerate() {
                    if gv == 0.0 {
                        continue;
                    }
                    let gv = gv as f64;
                    gb[o] += gv;
                    axpy(&mut gw[o * k..(o + 1) * k], gv, &patch);
                    axpy(&mut gpatch, gv, &packed[o * k..(o + 1) * k]);
                }
                for dy in 0..kh {
                    let start = base + ((y + dy) * w + x) * in_ch;
                    for (dst, &v) in gin[start..start + seg]
                        .iter_mut()
                        .zip(&gpatch[dy * seg..(dy + 1) * seg])
                    {
                        *dst += v;
                    }
                }
            }
        }
    }

    layer.weight.require_grad();
    layer.bias.require_grad();
    let wg = layer.weight.grad_mut().expect("grad allocated");
    for o in 0..out_ch {
        for i in 0..in_ch {
            for dy in 0..kh {
                for dx in 0..kw {
                    wg[((o * in_ch + i) * kh + dy) * kw + dx] +=
                        gw[o * k + (dy * kw + dx) * in_ch + i] as f32;
                }
            }
        }
    }
    for (dst, v) in layer
        .bias
        .grad_mut()
        .expect("grad allocated")
        .iter_mut()
        .zip(&gb)
    {
        *dst += *v as f32;
    }
    Tensor::from_vec(input.dims(), gin.into_iter().map(|v| v as f32).collect())
}

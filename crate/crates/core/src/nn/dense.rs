use rand_chacha::ChaCha8Rng;

use super::{axpy, debug_check_finite, dot, glorot_uniform, Tensor};
use crate::error::{Error, Result};

/// Fully connected layer: `out = x · Wᵀ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `[out, in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize) -> Result<Self> {
        Ok(Self {
            weight: Tensor::parameter(&[outputs, inputs])?,
            bias: Tensor::parameter(&[outputs])?,
        })
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.dims().len() != 2 || bias.dims() != [weight.dims()[0]] {
            return Err(Error::shape(weight.dims(), bias.dims()));
        }
        let mut layer = Self { weight, bias };
        layer.weight.require_grad();
        layer.bias.require_grad();
        Ok(layer)
    }

    pub fn init(&mut self, rng: &mut ChaCha8Rng) {
        let (outputs, inputs) = (self.outputs(), self.inputs());
        glorot_uniform(&mut self.weight, inputs, outputs, rng);
        self.bias.data_mut().fill(0.0);
    }

    pub fn inputs(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 2 || input[1] != self.inputs() {
            let n = input.first().copied().unwrap_or(1);
            return Err(Error::shape(&[n, self.inputs()], input));
        }
        Ok(vec![input[0], self.outputs()])
    }
}

pub fn dense_forward(input: &Tensor, layer: &Dense) -> Result<Tensor> {
    let dims = layer.output_dims(input.dims())?;
    let (n, d, o) = (input.dims()[0], layer.inputs(), layer.outputs());
    let w = layer.weight.data();
    let b = layer.bias.data();
    let mut out = Vec::with_capacity(n * o);
    for row in input.data().chunks_exact(d) {
        for j in 0..o {
            out.push((b[j] as f64 + dot(row, &w[j * d..(j + 1) * d])) as f32);
        }
    }
    let out = Tensor::from_vec(&dims, out)?;
    debug_check_finite(&out, "dense_forward");
    Ok(out)
}

pub fn dense_backward(grad_out: &Tensor, input: &Tensor, layer: &mut Dense) -> Result<Tensor> {
    let dims = layer.output_dims(input.dims())?;
    if grad_out.dims() != dims.as_slice() {
        return Err(Error::shape(&dims, grad_out.dims()));
    }
    let (d, o) = (layer.inputs(), layer.outputs());
    let w = layer.weight.data();
    let mut gw = vec![0f64; o * d];
    let mut gb = vec![0f64; o];
    let mut gin = vec![0f32; input.len()];
    let mut grow = vec![0f64; d];
    for ((row, g), gin_row) in input
        .data()
        .chunks_exact(d)
        .zip(grad_out.data().chunks_exact(o))
        .zip(gin.chunks_exact_mut(d))
    {
        grow.fill(0.0);
        for (j, &gv) in g.iter().enumerate() {
            if gv == 0.0 {
                continue;
            }
            let gv = gv as f64;
            gb[j] += gv;
            axpy(&mut gw[j * d..(j + 1) * d], gv, row);
            axpy(&mut grow, gv, &w[j * d..(j + 1) * d]);
        }
        for (dst, v) in gin_row.iter_mut().zip(&grow) {
            *dst = *v as f32;
        }
    }
    layer.weight.require_grad();
    layer.bias.require_grad();
    for (dst, v) in layer
        .weight
        .grad_mut()
        .expect("grad allocated")
        .iter_mut()
        .zip(&gw)
    {
        *dst += *v as f32;
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
    Tensor::from_vec(input.dims(), gin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_weights_pass_through() {
        let mut layer = Dense::new(3, 3).unwrap();
        for i in 0..3 {
            layer.weight.data_mut()[i * 3 + i] = 1.0;
        }
        let x = Tensor::from_vec(&[2, 3], vec![1., -2., 3., 0.5, 0., -1.]).unwrap();
        assert_eq!(dense_forward(&x, &layer).unwrap().data(), x.data());
    }

    #[test]
    fn matches_double_loop_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut layer = Dense::new(37, 11).unwrap();
        layer.init(&mut rng);
        for b in layer.bias.data_mut() {
            *b = rng.random_range(-1.0..1.0);
        }
        let x = Tensor::from_vec(
            &[4, 37],
            (0..148).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let y = dense_forward(&x, &layer).unwrap();
        for n in 0..4 {
            for j in 0..11 {
                let mut s = layer.bias.data()[j] as f64;
                for i in 0..37 {
                    s += x.data()[n * 37 + i] as f64 * layer.weight.data()[j * 37 + i] as f64;
                }
                assert!((y.data()[n * 11 + j] as f64 - s).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn flattened_conv_width() {
        let layer = Dense::new(4 * 4 * 64, 64).unwrap();
        assert_eq!(layer.output_dims(&[8, 1024]).unwrap(), vec![8, 64]);
        assert!(matches!(
            layer.output_dims(&[8, 1000]),
            Err(Error::Shape { .. })
        ));
    }
}

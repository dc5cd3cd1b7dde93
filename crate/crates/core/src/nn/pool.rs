use crate::error::{Error, Result};

use super::Tensor;

/// Square max pooling with stride equal to the pool size. Trailing rows and
/// columns that do not fill a window are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool2d {
    pub pool: usize,
}

/// Flat input index of each output's maximum, saved for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolRecord {
    input_dims: Vec<usize>,
    argmax: Vec<usize>,
}

impl MaxPool2d {
    pub fn new(pool: usize) -> Result<Self> {
        if pool == 0 {
            return Err(Error::Argument("pool size must be positive".into()));
        }
        Ok(Self { pool })
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        let p = self.pool;
        if input.len() != 4 || input[1] < p || input[2] < p {
            let c = input.last().copied().unwrap_or(1);
            return Err(Error::shape(
                &[input.first().copied().unwrap_or(1), p, p, c],
                input,
            ));
        }
        Ok(vec![input[0], input[1] / p, input[2] / p, input[3]])
    }
}

pub fn maxpool2d_forward(input: &Tensor, layer: &MaxPool2d) -> Result<(Tensor, PoolRecord)> {
    let out_dims = layer.output_dims(input.dims())?;
    let p = layer.pool;
    let d = input.dims();
    let (h, w, c) = (d[1], d[2], d[3]);
    let (n, oh, ow) = (out_dims[0], out_dims[1], out_dims[2]);
    let x = input.data();
    let mut out = Vec::with_capacity(n * oh * ow * c);
    let mut argmax = Vec::with_capacity(out.capacity());
    for b in 0..n {
        for y in 0..oh {
            for xo in 0..ow {
                for ch in 0..c {
                    // row-major window scan; strict `>` keeps the first maximum
                    let mut best_idx = ((b * h + y * p) * w + xo * p) * c + ch;
                    let mut best = x[best_idx];
                    for dy in 0..p {
                        for dx in 0..p {
                            let idx = ((b * h + y * p + dy) * w + xo * p + dx) * c + ch;
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx);
                }
            }
        }
    }
    Ok((
        Tensor::from_vec(&out_dims, out)?,
        PoolRecord {
            input_dims: d.to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool2d_backward(grad_out: &Tensor, record: &PoolRecord) -> Result<Tensor> {
    if grad_out.len() != record.argmax.len() {
        return Err(Error::Shape {
            expected: vec![record.argmax.len()],
            got: grad_out.dims().to_vec(),
        });
    }
    let mut gin = Tensor::zeros(&record.input_dims)?;
    let dst = gin.data_mut();
    for (&idx, &g) in record.argmax.iter().zip(grad_out.data()) {
        dst[idx] += g;
    }
    Ok(gin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pool2() -> MaxPool2d {
        MaxPool2d::new(2).unwrap()
    }

    #[test]
    fn single_window() {
        let x = Tensor::from_vec(&[1, 2, 2, 1], vec![1., 2., 3., 4.]).unwrap();
        let (y, rec) = maxpool2d_forward(&x, &pool2()).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let g = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(
            maxpool2d_backward(&g, &rec).unwrap().data(),
            &[0., 0., 0., 1.]
        );
    }

    #[test]
    fn ties_route_to_first_element() {
        let x = Tensor::from_vec(&[1, 2, 2, 1], vec![1.0; 4]).unwrap();
        let (_, rec) = maxpool2d_forward(&x, &pool2()).unwrap();
        let g = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(
            maxpool2d_backward(&g, &rec).unwrap().data(),
            &[1., 0., 0., 0.]
        );
    }

    #[test]
    fn odd_sizes_floor() {
        assert_eq!(
            pool2().output_dims(&[1, 15, 15, 32]).unwrap(),
            vec![1, 7, 7, 32]
        );
        assert!(pool2().output_dims(&[1, 1, 4, 1]).is_err());
    }

    #[test]
    fn outputs_dominate_their_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dims = [2, 7, 9, 3];
        let len: usize = dims.iter().product();
        let x = Tensor::from_vec(
            &dims,
            (0..len).map(|_| rng.random_range(-5.0..5.0)).collect(),
        )
        .unwrap();
        let (y, _) = maxpool2d_forward(&x, &pool2()).unwrap();
        let (h, w, c) = (7, 9, 3);
        let (oh, ow) = (3, 4);
        for b in 0..2 {
            for oy in 0..oh {
                for ox in 0..ow {
                    for ch in 0..c {
                        let v = y.data()[((b * oh + oy) * ow + ox) * c + ch];
                        let mut seen = false;
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let e =
                                    x.data()[((b * h + oy * 2 + dy) * w + ox * 2 + dx) * c + ch];
                                assert!(v >= e);
                                seen |= v == e;
                            }
                        }
                        assert!(seen);
                    }
                }
            }
        }
    }

    #[test]
    fn backward_routes_only_to_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut vals: Vec<f32> = (0..16).map(|i| i as f32).collect();
        vals.shuffle(&mut rng);
        let x = Tensor::from_vec(&[1, 4, 4, 1], vals.clone()).unwrap();
        let (_, rec) = maxpool2d_forward(&x, &pool2()).unwrap();
        let g = Tensor::from_vec(&[1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let gin = maxpool2d_backward(&g, &rec).unwrap();
        assert_eq!(gin.data().iter().filter(|&&v| v != 0.0).count(), 4);
        assert_eq!(gin.data().iter().sum::<f32>(), 10.0);
        let bad = Tensor::zeros(&[1, 3, 3, 1]).unwrap();
        assert!(maxpool2d_backward(&bad, &rec).is_err());
    }
}

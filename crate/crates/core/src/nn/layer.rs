use super::conv::{conv2d_backward, conv2d_forward};
use super::dense::{dense_backward, dense_forward};
use super::pool::{maxpool2d_backward, maxpool2d_forward};
use super::relu::{relu_backward, relu_forward};
use super::{Conv2d, Dense, MaxPool2d, PoolRecord, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2D(Conv2d),
    MaxPool2D(MaxPool2d),
    /// Collapses `[n, h, w, c]` to `[n, h·w·c]`; holds the expected `[h, w, c]`.
    Flatten([usize; 3]),
    Dense(Dense),
    ReLU,
}

/// What a layer's forward pass keeps for its backward pass.
#[derive(Debug, Clone)]
pub enum Saved {
    Input(Tensor),
    Pool(PoolRecord),
    Dims(Vec<usize>),
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv2D(_) => "Conv2D",
            Layer::MaxPool2D(_) => "MaxPool2D",
            Layer::Flatten(_) => "Flatten",
            Layer::Dense(_) => "Dense",
            Layer::ReLU => "ReLU",
        }
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Conv2D(l) => l.output_dims(input),
            Layer::MaxPool2D(l) => l.output_dims(input),
            Layer::Flatten(expected) => {
                if input.len() != 4 || input[1..] != expected[..] {
                    let n = input.first().copied().unwrap_or(1);
                    return Err(Error::shape(
                        &[n, expected[0], expected[1], expected[2]],
                        input,
                    ));
                }
                Ok(vec![input[0], expected.iter().product()])
            }
            Layer::Dense(l) => l.output_dims(input),
            Layer::ReLU => Ok(input.to_vec()),
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        Ok(match self {
            Layer::Conv2D(l) => conv2d_forward(input, l)?,
            Layer::MaxPool2D(l) => maxpool2d_forward(input, l)?.0,
            Layer::Flatten(_) => {
                let dims = self.output_dims(input.dims())?;
                input.clone().reshape(&dims)?
            }
            Layer::Dense(l) => dense_forward(input, l)?,
            Layer::ReLU => relu_forward(input),
        })
    }

    /// Forward pass that also returns what [`Layer::backward`] needs.
    pub fn forward_saving(&self, input: Tensor) -> Result<(Tensor, Saved)> {
        Ok(match self {
            Layer::MaxPool2D(l) => {
                let (out, rec) = maxpool2d_forward(&input, l)?;
                (out, Saved::Pool(rec))
            }
            Layer::Flatten(_) => {
                let in_dims = input.dims().to_vec();
                let dims = self.output_dims(&in_dims)?;
                (input.reshape(&dims)?, Saved::Dims(in_dims))
            }
            _ => {
                let out = self.forward(&input)?;
                (out, Saved::Input(input))
            }
        })
    }

    pub fn backward(&mut self, grad_out: &Tensor, saved: &Saved) -> Result<Tensor> {
        match (self, saved) {
            (Layer::Conv2D(l), Saved::Input(x)) => conv2d_backward(grad_out, x, l),
            (Layer::Dense(l), Saved::Input(x)) => dense_backward(grad_out, x, l),
            (Layer::ReLU, Saved::Input(x)) => relu_backward(grad_out, x),
            (Layer::MaxPool2D(_), Saved::Pool(rec)) => maxpool2d_backward(grad_out, rec),
            (Layer::Flatten(_), Saved::Dims(dims)) => grad_out.clone().reshape(dims),
            (layer, _) => Err(Error::TrainingState(format!(
                "saved state does not belong to a {} layer",
                layer.name()
            ))),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv2D(l) => vec![&l.weight, &l.bias],
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv2D(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }
}

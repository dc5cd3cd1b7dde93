use super::Tensor;
use crate::error::{Error, Result};

pub fn relu_forward(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::from_vec(input.dims(), data).expect("same dims")
}

/// Passes `grad_out` where the forward input was strictly positive.
pub fn relu_backward(grad_out: &Tensor, input: &Tensor) -> Result<Tensor> {
    if grad_out.dims() != input.dims() {
        return Err(Error::shape(input.dims(), grad_out.dims()));
    }
    let data = grad_out
        .data()
        .iter()
        .zip(input.data())
        .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(input.dims(), data)
}

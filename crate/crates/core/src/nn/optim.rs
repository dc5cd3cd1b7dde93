use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(Error::Argument(format!("unknown optimizer {other:?}"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        })
    }
}

/// SGD or bias-corrected Adam over an ordered list of parameter tensors.
/// Moment buffers are matched to parameters by position.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        Self::with_betas(kind, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(
        kind: OptimizerKind,
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Result<Self> {
        // lr = 0 is allowed so a run can be replayed without moving the weights
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::Argument(format!("learning rate {learning_rate}")));
        }
        if !(0.0 < beta1 && beta1 < 1.0 && 0.0 < beta2 && beta2 < 1.0 && epsilon > 0.0) {
            return Err(Error::Argument(format!(
                "adam hyperparameters out of range: beta1={beta1} beta2={beta2} eps={epsilon}"
            )));
        }
        Ok(Self {
            kind,
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter and zeroes the gradients.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if let Some(i) = params.iter().position(|p| !p.has_grad()) {
            return Err(Error::TrainingState(format!(
                "parameter {i} has no gradient buffer"
            )));
        }
        if self.m.is_empty() && self.kind == OptimizerKind::Adam {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.kind == OptimizerKind::Adam
            && (self.m.len() != params.len()
                || self
                    .m
                    .iter()
                    .zip(params.iter())
                    .any(|(m, p)| m.len() != p.len()))
        {
            return Err(Error::TrainingState(
                "parameter list changed between optimizer steps".into(),
            ));
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for p in params.iter_mut() {
                    let (value, grad) = p.value_and_grad_mut().expect("checked above");
                    for (w, g) in value.iter_mut().zip(grad.iter_mut()) {
                        *w = (*w as f64 - lr * *g as f64) as f32;
                        *g = 0.0;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
                for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
                    let (value, grad) = p.value_and_grad_mut().expect("checked above");
                    for (((w, g), m), v) in value
                        .iter_mut()
                        .zip(grad.iter_mut())
                        .zip(m.iter_mut())
                        .zip(v.iter_mut())
                    {
                        let gf = *g as f64;
                        *m = b1 * *m + (1.0 - b1) * gf;
                        *v = b2 * *v + (1.0 - b2) * gf * gf;
                        let m_hat = *m / bc1;
                        let v_hat = *v / bc2;
                        *w = (*w as f64 - lr * m_hat / (v_hat.sqrt() + eps)) as f32;
                        *g = 0.0;
                    }
                }
            }
        }
        Ok(())
    }
}

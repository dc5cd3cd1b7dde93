//! The 8-layer heartbeat CNN.
//!
//! ```text
//! Conv2D(32, 3x3) + ReLU -> MaxPool(2x2) -> Conv2D(64, 3x3) + ReLU
//!   -> MaxPool(2x2) -> Conv2D(64, 3x3) + ReLU -> Flatten
//!   -> Dense(dense_units) + ReLU -> Dense(output width, no activation)
//! ```
//!
//! Convolutions are stride 1 with valid padding, pools are stride 2 with
//! floor semantics, so a 32x32x3 input flattens to 4x4x64 = 1024 features.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::checkpoint::{read_layers, write_layers};
use crate::nn::loss::softmax_rows;
use crate::nn::{softmax_cross_entropy, Conv2d, Dense, Layer, MaxPool2d, Optimizer, Saved, Tensor};

const CONV_FILTERS: [usize; 3] = [32, 64, 64];
const KERNEL: usize = 3;
const POOL: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_size: usize,
    pub input_channels: usize,
    /// Number of label classes; predictions are taken over these logits.
    pub num_classes: usize,
    pub dense_units: usize,
    /// Width of the final layer when it should exceed `num_classes`
    /// (e.g. a literal 10-unit head on a 5-class task).
    pub output_units: Option<usize>,
}

impl ModelConfig {
    pub fn new(num_classes: usize) -> Self {
        Self {
            input_size: 32,
            input_channels: 3,
            num_classes,
            dense_units: 64,
            output_units: None,
        }
    }

    pub fn output_width(&self) -> usize {
        self.output_units.unwrap_or(self.num_classes)
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.output_width() < self.num_classes {
            return Err(Error::Config(format!(
                "output width {} is smaller than the class count {}",
                self.output_width(),
                self.num_classes
            )));
        }
        if self.input_channels == 0 || self.dense_units == 0 {
            return Err(Error::Config(
                "channel and unit counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Class ids and per-class probabilities for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub classes: Vec<usize>,
    /// Row-major `[n, num_classes]` softmax probabilities.
    pub probabilities: Vec<f64>,
    pub num_classes: usize,
}

impl Prediction {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.probabilities[i * self.num_classes..(i + 1) * self.num_classes]
    }
}

/// Softmax over the first `num_classes` of `width` logits per row, and the
/// argmax with the lowest index winning exact ties.
pub fn predict_from_logits(logits: &[f32], width: usize, num_classes: usize) -> Prediction {
    let trimmed: Vec<f32> = if width == num_classes {
        logits.to_vec()
    } else {
        logits
            .chunks_exact(width)
            .flat_map(|row| row[..num_classes].iter().copied())
            .collect()
    };
    let probabilities = softmax_rows(&trimmed, num_classes);
    let classes = probabilities
        .chunks_exact(num_classes)
        .map(|row| {
            let mut best = 0;
            for (j, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    Prediction {
        classes,
        probabilities,
        num_classes,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    layers: Vec<Layer>,
    config: ModelConfig,
}

/// Saved activations of one training forward pass.
#[derive(Debug)]
pub struct ForwardTrace {
    saved: Vec<Saved>,
}

impl Model {
    /// Assembles the layer stack and initializes it from `seed`.
    pub fn build(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let size_err = |e: Error| {
            Error::Config(format!(
                "input size {} is too small for the layer stack ({e})",
                cfg.input_size
            ))
        };
        let mut layers = Vec::new();
        let mut dims = vec![1, cfg.input_size, cfg.input_size, cfg.input_channels];
        let mut in_ch = cfg.input_channels;
        for (i, &filters) in CONV_FILTERS.iter().enumerate() {
            let mut conv = Conv2d::new(in_ch, filters, KERNEL, KERNEL)?;
            if i == 0 {
                conv.input_hw = Some([cfg.input_size, cfg.input_size]);
            }
            dims = conv.output_dims(&dims).map_err(size_err)?;
            layers.push(Layer::Conv2D(conv));
            layers.push(Layer::ReLU);
            if i + 1 < CONV_FILTERS.len() {
                let pool = MaxPool2d::new(POOL)?;
                dims = pool.output_dims(&dims).map_err(size_err)?;
                layers.push(Layer::MaxPool2D(pool));
            }
            in_ch = filters;
        }
        let flat = [dims[1], dims[2], dims[3]];
        layers.push(Layer::Flatten(flat));
        layers.push(Layer::Dense(Dense::new(
            flat.iter().product(),
            cfg.dense_units,
        )?));
        layers.push(Layer::ReLU);
        layers.push(Layer::Dense(Dense::new(
            cfg.dense_units,
            cfg.output_width(),
        )?));

        let mut model = Self {
            layers,
            config: cfg,
        };
        model.init(seed);
        Ok(model)
    }

    /// Re-initializes every parameter: Glorot-uniform weights, zero biases.
    pub fn init(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2D(l) => l.init(&mut rng),
                Layer::Dense(l) => l.init(&mut rng),
                _ => {}
            }
            for p in layer.params_mut() {
                p.zero_grad();
            }
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Per-sample shapes: the input, then the output of every layer except the
    /// fused activations.
    pub fn shape_chain(&self) -> Vec<(&'static str, Vec<usize>)> {
        let c = &self.config;
        let mut dims = vec![1, c.input_size, c.input_size, c.input_channels];
        let mut chain = vec![("Input", dims[1..].to_vec())];
        for layer in &self.layers {
            dims = layer
                .output_dims(&dims)
                .expect("build validated the shape chain");
            if !matches!(layer, Layer::ReLU) {
                chain.push((layer.name(), dims[1..].to_vec()));
            }
        }
        chain
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        let c = &self.config;
        let expected = [
            batch.dims().first().copied().unwrap_or(1),
            c.input_size,
            c.input_size,
            c.input_channels,
        ];
        if batch.dims() != expected {
            return Err(Error::shape(&expected, batch.dims()));
        }
        Ok(())
    }

    /// Raw logits `[n, output width]`.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_batch(batch)?;
        let mut x = self.layers[0].forward(batch)?;
        for layer in &self.layers[1..] {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    pub fn forward_saving(&self, batch: &Tensor) -> Result<(Tensor, ForwardTrace)> {
        self.check_batch(batch)?;
        let mut saved = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &self.layers {
            let (out, s) = layer.forward_saving(x)?;
            saved.push(s);
            x = out;
        }
        Ok((x, ForwardTrace { saved }))
    }

    /// Backpropagates `grad_logits`, accumulating into parameter gradients.
    pub fn backward(&mut self, grad_logits: &Tensor, trace: ForwardTrace) -> Result<()> {
        if trace.saved.len() != self.layers.len() {
            return Err(Error::TrainingState(
                "trace does not match the layer stack".into(),
            ));
        }
        let mut g = grad_logits.clone();
        for (layer, saved) in self.layers.iter_mut().zip(trace.saved.iter()).rev() {
            g = layer.backward(&g, saved)?;
        }
        Ok(())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// One forward/backward/update on a batch. Returns the mean loss.
    pub fn train_step(
        &mut self,
        batch: &Tensor,
        labels: &[usize],
        opt: &mut Optimizer,
    ) -> Result<f64> {
        let (logits, trace) = self.forward_saving(batch)?;
        let (loss, grad) = softmax_cross_entropy(&logits, labels)?;
        self.backward(&grad, trace)?;
        opt.step(&mut self.params_mut())?;
        Ok(loss)
    }

    pub fn predict(&self, batch: &Tensor) -> Result<Prediction> {
        let logits = self.forward(batch)?;
        Ok(predict_from_logits(
            logits.data(),
            self.config.output_width(),
            self.config.num_classes,
        ))
    }

    /// Restricts predictions to the first `num_classes` logits of a wider head.
    pub fn with_num_classes(mut self, num_classes: usize) -> Result<Self> {
        let width = self.config.output_width();
        let cfg = ModelConfig {
            num_classes,
            output_units: (num_classes != width).then_some(width),
            ..self.config
        };
        cfg.validate()?;
        self.config = cfg;
        Ok(self)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write_layers(&self.layers, w)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        Self::from_layers(read_layers(r)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }

    /// Validates a deserialized stack against the architecture and recovers
    /// its configuration. The class count is the final layer's width and the
    /// input size is the one declared by the first convolution.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("checkpoint is not the heartbeat CNN: {msg}"));
        let expected = [
            "Conv2D",
            "ReLU",
            "MaxPool2D",
            "Conv2D",
            "ReLU",
            "MaxPool2D",
            "Conv2D",
            "ReLU",
            "Flatten",
            "Dense",
            "ReLU",
            "Dense",
        ];
        let names: Vec<&str> = layers.iter().map(Layer::name).collect();
        if names != expected {
            return Err(bad(&format!("layer sequence {names:?}")));
        }
        let (input_channels, dense_units, width) =
            match (&layers[0], &layers[8], &layers[9], &layers[11]) {
                (Layer::Conv2D(c), Layer::Flatten(_), Layer::Dense(d1), Layer::Dense(d2)) => {
                    (c.shape().1, d1.outputs(), d2.outputs())
                }
                _ => unreachable!("names checked above"),
            };
        let input_size = match &layers[0] {
            Layer::Conv2D(c) => match c.input_hw {
                Some([h, w]) if h == w => h,
                other => return Err(bad(&format!("first layer declares input {other:?}"))),
            },
            _ => unreachable!("names checked above"),
        };
        let config = ModelConfig {
            input_size,
            input_channels,
            num_classes: width,
            dense_units,
            output_units: None,
        };
        config.validate()?;
        let model = Self { layers, config };
        // every consecutive pair must agree, including the dense widths
        let mut dims = vec![1, input_size, input_size, input_channels];
        for layer in &model.layers {
            dims = layer.output_dims(&dims).map_err(|e| bad(&e.to_string()))?;
        }
        Ok(model)
    }
}

//! Binary layer-stack checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "CNN1"  u32 layer_count
//! per layer: u8 tag, then
//!   0 Conv2D     u32 in_ch, u32 out_ch, u32 kh, u32 kw, u32 in_h, u32 in_w,
//!                weight, bias      (in_h = in_w = 0: input size not declared)
//!   1 MaxPool2D  u32 pool, u32 stride
//!   2 Flatten    u32 h, u32 w, u32 c
//!   3 Dense      u32 in, u32 out, weight, bias
//!   4 ReLU
//! ```
//!
//! `weight` and `bias` use the `GAF1` raw tensor encoding of
//! [`Tensor::write_raw`], so a save/load round trip is bit-exact.

use std::io::{Read, Write};

use super::tensor::{read_exact, read_u32};
use super::{Conv2d, Dense, Layer, MaxPool2d, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CNN1";

const TAG_CONV: u8 = 0;
const TAG_POOL: u8 = 1;
const TAG_FLATTEN: u8 = 2;
const TAG_DENSE: u8 = 3;
const TAG_RELU: u8 = 4;

fn put_u32s<W: Write>(w: &mut W, values: &[usize]) -> std::io::Result<()> {
    for &v in values {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    Ok(())
}

pub fn write_layers<W: Write>(layers: &[Layer], w: &mut W) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    put_u32s(w, &[layers.len()])?;
    for layer in layers {
        match layer {
            Layer::Conv2D(l) => {
                let (out_ch, in_ch, kh, kw) = l.shape();
                w.write_all(&[TAG_CONV])?;
                let [in_h, in_w] = l.input_hw.unwrap_or([0, 0]);
                put_u32s(w, &[in_ch, out_ch, kh, kw, in_h, in_w])?;
                l.weight.write_raw(w)?;
                l.bias.write_raw(w)?;
            }
            Layer::MaxPool2D(p) => {
                w.write_all(&[TAG_POOL])?;
                put_u32s(w, &[p.pool, p.pool])?;
            }
            Layer::Flatten(dims) => {
                w.write_all(&[TAG_FLATTEN])?;
                put_u32s(w, dims)?;
            }
            Layer::Dense(l) => {
                w.write_all(&[TAG_DENSE])?;
                put_u32s(w, &[l.inputs(), l.outputs()])?;
                l.weight.write_raw(w)?;
                l.bias.write_raw(w)?;
            }
            Layer::ReLU => w.write_all(&[TAG_RELU])?,
        }
    }
    Ok(())
}

fn expect_dims(t: &Tensor, dims: &[usize], what: &str) -> Result<()> {
    if t.dims() != dims {
        return Err(Error::Format(format!(
            "{what} tensor has dims {:?}, header says {dims:?}",
            t.dims()
        )));
    }
    Ok(())
}

pub fn read_layers<R: Read>(r: &mut R) -> Result<Vec<Layer>> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "not a checkpoint: magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let count = read_u32(r)? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for index in 0..count {
        let mut tag = [0u8; 1];
        read_exact(r, &mut tag)?;
        let layer = match tag[0] {
            TAG_CONV => {
                let in_ch = read_u32(r)? as usize;
                let out_ch = read_u32(r)? as usize;
                let kh = read_u32(r)? as usize;
                let kw = read_u32(r)? as usize;
                let in_h = read_u32(r)? as usize;
                let in_w = read_u32(r)? as usize;
                let weight = Tensor::read_raw(r)?;
                let bias = Tensor::read_raw(r)?;
                expect_dims(&weight, &[out_ch, in_ch, kh, kw], "conv weight")?;
                expect_dims(&bias, &[out_ch], "conv bias")?;
                let mut conv = Conv2d::from_parts(weight, bias)?;
                conv.input_hw = match (in_h, in_w) {
                    (0, 0) => None,
                    (h, w) if h > 0 && w > 0 => Some([h, w]),
                    _ => {
                        return Err(Error::Format(format!(
                            "layer {index}: partial input size {in_h}x{in_w}"
                        )))
                    }
                };
                Layer::Conv2D(conv)
            }
            TAG_POOL => {
                let pool = read_u32(r)? as usize;
                let stride = read_u32(r)? as usize;
                if stride != pool {
                    return Err(Error::Format(format!(
                        "layer {index}: pool stride {stride} differs from pool size {pool}"
                    )));
                }
                Layer::MaxPool2D(MaxPool2d::new(pool)?)
            }
            TAG_FLATTEN => {
                let h = read_u32(r)? as usize;
                let w = read_u32(r)? as usize;
                let c = read_u32(r)? as usize;
                Layer::Flatten([h, w, c])
            }
            TAG_DENSE => {
                let inputs = read_u32(r)? as usize;
                let outputs = read_u32(r)? as usize;
                let weight = Tensor::read_raw(r)?;
                let bias = Tensor::read_raw(r)?;
                expect_dims(&weight, &[outputs, inputs], "dense weight")?;
                expect_dims(&bias, &[outputs], "dense bias")?;
                Layer::Dense(Dense::from_parts(weight, bias)?)
            }
            TAG_RELU => Layer::ReLU,
            other => {
                return Err(Error::Format(format!("layer {index}: unknown tag {other}")));
            }
        };
        layers.push(layer);
    }
    Ok(layers)
}

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Magic prefix of the raw tensor encoding.
pub const TENSOR_MAGIC: &[u8; 4] = b"GAF1";
pub const MAX_RANK: usize = 4;

/// Dense row-major `f32` array with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
    grad: Option<Vec<f32>>,
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.len() > MAX_RANK {
        return Err(Error::Argument(format!(
            "tensor rank must be 1..={MAX_RANK}, got {}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Argument(format!("zero-sized dimension in {dims:?}")));
    }
    Ok(dims.iter().product())
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
            grad: None,
        })
    }

    pub fn from_vec(dims: &[usize], data: Vec<f32>) -> Result<Self> {
        let len = check_dims(dims)?;
        if len != data.len() {
            return Err(Error::Argument(format!(
                "dims {dims:?} need {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
            grad: None,
        })
    }

    /// A zero tensor carrying a zeroed gradient buffer.
    pub fn parameter(dims: &[usize]) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        t.grad = Some(vec![0.0; t.data.len()]);
        Ok(t)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn grad(&self) -> Option<&[f32]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [f32]> {
        self.grad.as_deref_mut()
    }

    pub fn has_grad(&self) -> bool {
        self.grad.is_some()
    }

    /// Allocates a zeroed gradient buffer if none exists.
    pub fn require_grad(&mut self) {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
    }

    pub fn drop_grad(&mut self) {
        self.grad = None;
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.fill(0.0);
        }
    }

    /// Value and gradient slices together, for optimizer updates.
    pub fn value_and_grad_mut(&mut self) -> Option<(&mut [f32], &mut [f32])> {
        let grad = self.grad.as_mut()?;
        Some((&mut self.data, grad))
    }

    pub fn reshape(mut self, dims: &[usize]) -> Result<Self> {
        let len = check_dims(dims)?;
        if len != self.data.len() {
            return Err(Error::shape(&self.dims, dims));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Rows `start..start + count` along the leading dimension.
    pub fn slice_outer(&self, start: usize, count: usize) -> Result<Tensor> {
        let outer = self.dims[0];
        if start + count > outer || count == 0 {
            return Err(Error::Argument(format!(
                "slice {start}..{} out of range for leading dim {outer}",
                start + count
            )));
        }
        let stride = self.data.len() / outer;
        let mut dims = self.dims.clone();
        dims[0] = count;
        Tensor::from_vec(
            &dims,
            self.data[start * stride..(start + count) * stride].to_vec(),
        )
    }

    /// Gathers the given rows of the leading dimension.
    pub fn gather_outer(&self, rows: &[usize]) -> Result<Tensor> {
        let outer = self.dims[0];
        let stride = self.data.len() / outer;
        let mut data = Vec::with_capacity(rows.len() * stride);
        for &r in rows {
            if r >= outer {
                return Err(Error::Argument(format!(
                    "row {r} out of range for leading dim {outer}"
                )));
            }
            data.extend_from_slice(&self.data[r * stride..(r + 1) * stride]);
        }
        let mut dims = self.dims.clone();
        dims[0] = rows.len();
        Tensor::from_vec(&dims, data)
    }

    /// Raw encoding: `GAF1`, u32 LE rank, u32 LE dims, f32 LE payload.
    pub fn write_raw<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(TENSOR_MAGIC)?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_raw<R: Read>(r: &mut R) -> Result<Tensor> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != TENSOR_MAGIC {
            return Err(Error::Format(format!(
                "bad tensor magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                std::str::from_utf8(TENSOR_MAGIC).unwrap()
            )));
        }
        let rank = read_u32(r)? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Format(format!("tensor rank {rank} out of range")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u32(r)? as usize);
        }
        let len = check_dims(&dims).map_err(|e| Error::Format(e.to_string()))?;
        let mut bytes = vec![0u8; len * 4];
        read_exact(r, &mut bytes)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Tensor::from_vec(&dims, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_raw(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Tensor> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Tensor::read_raw(&mut BufReader::new(file))
    }
}

pub(crate) fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("unexpected end of data".into()),
        _ => Error::io("<reader>", e),
    })
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_inconsistent_dims() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::zeros(&[1, 2, 3, 4, 5]).is_err());
        assert!(Tensor::zeros(&[0]).is_err());
    }

    #[test]
    fn raw_layout_is_documented_bytes() {
        let t = Tensor::from_vec(&[1, 2], vec![1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        t.write_raw(&mut buf).unwrap();
        let mut expected = b"GAF1".to_vec();
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.0f32).to_le_bytes());
        assert_eq!(buf, expected);
    }

    #[test]
    fn truncated_and_bad_magic_fail() {
        let t = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        t.write_raw(&mut buf).unwrap();
        assert!(Tensor::read_raw(&mut &buf[..buf.len() - 1]).is_err());
        buf[0] = b'X';
        assert!(matches!(
            Tensor::read_raw(&mut &buf[..]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn gather_rows() {
        let t = Tensor::from_vec(&[3, 2], vec![0., 1., 2., 3., 4., 5.]).unwrap();
        let g = t.gather_outer(&[2, 0]).unwrap();
        assert_eq!(g.dims(), &[2, 2]);
        assert_eq!(g.data(), &[4., 5., 0., 1.]);
        assert_eq!(t.slice_outer(1, 1).unwrap().data(), &[2., 3.]);
    }

    proptest! {
        #[test]
        fn raw_round_trip_is_bit_exact(
            dims in prop::collection::vec(1usize..5, 1..=4),
            seed in any::<u32>(),
        ) {
            let len: usize = dims.iter().product();
            let data: Vec<f32> = (0..len)
                .map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32 * 97) & 0x7f7f_ffff))
                .collect();
            let t = Tensor::from_vec(&dims, data).unwrap();
            let mut buf = Vec::new();
            t.write_raw(&mut buf).unwrap();
            let back = Tensor::read_raw(&mut &buf[..]).unwrap();
            prop_assert_eq!(back.dims(), t.dims());
            let a: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}

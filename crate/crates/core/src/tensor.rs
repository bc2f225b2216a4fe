//! Dense row-major `f32` tensors and the `TEN1` container.
//!
//! `TEN1` layout, little-endian: magic `TEN1`, `u8` ndim, `u32` per dim, then
//! the `f32` payload in row-major order.

use std::io::{self, Read, Write};

use thiserror::Error;

pub const TEN1_MAGIC: &[u8; 4] = b"TEN1";

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite entry at flat index {0}")]
    NonFinite(usize),
    #[error("bad magic {0:?}, expected TEN1")]
    BadMagic([u8; 4]),
    #[error("truncated tensor payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("truncated TEN1 header")]
    TruncatedHeader,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A `C x A x B` feature map, indexed `(c, a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    shape: [usize; 3],
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn zeros(c: usize, a: usize, b: usize) -> Self {
        Self {
            shape: [c, a, b],
            data: vec![0.0; c * a * b],
        }
    }

    pub fn from_vec(shape: [usize; 3], data: Vec<f32>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::ShapeMismatch(format!(
                "{} values for shape {:?}",
                data.len(),
                shape
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let [c, a, b] = shape;
        let mut data = Vec::with_capacity(c * a * b);
        for ci in 0..c {
            for ai in 0..a {
                for bi in 0..b {
                    data.push(f(ci, ai, bi));
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape[0]
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

    #[inline]
    pub fn index(&self, c: usize, a: usize, b: usize) -> usize {
        (c * self.shape[1] + a) * self.shape[2] + b
    }

    #[inline]
    pub fn get(&self, c: usize, a: usize, b: usize) -> f32 {
        self.data[self.index(c, a, b)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, a: usize, b: usize, v: f32) {
        let i = self.index(c, a, b);
        self.data[i] = v;
    }

    #[inline]
    pub fn add(&mut self, c: usize, a: usize, b: usize, v: f32) {
        let i = self.index(c, a, b);
        self.data[i] += v;
    }

    /// The `A x B` slice of channel `c`.
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.shape[1] * self.shape[2];
        &self.data[c * n..(c + 1) * n]
    }

    /// Stacks tensors with equal spatial dims along the channel axis.
    pub fn concat_channels(parts: &[&FeatureTensor]) -> Result<Self, TensorError> {
        let Some(first) = parts.first() else {
            return Err(TensorError::ShapeMismatch("no tensors to concatenate".into()));
        };
        let [_, a, b] = first.shape;
        let mut c = 0;
        let mut data = Vec::new();
        for t in parts {
            if t.shape[1] != a || t.shape[2] != b {
                return Err(TensorError::ShapeMismatch(format!(
                    "cannot concatenate {:?} with {:?}",
                    first.shape, t.shape
                )));
            }
            c += t.shape[0];
            data.extend_from_slice(&t.data);
        }
        Ok(Self { shape: [c, a, b], data })
    }

    pub fn to_ten1(&self) -> Ten1 {
        Ten1 {
            dims: self.shape.to_vec(),
            data: self.data.clone(),
        }
    }
}

/// An n-dimensional tensor as stored in a `TEN1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct Ten1 {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Ten1 {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(TensorError::ShapeMismatch(format!(
                "{} values for dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    /// Interprets a rank-3 tensor as a feature map.
    pub fn into_feature(self) -> Result<FeatureTensor, TensorError> {
        match self.dims[..] {
            [c, a, b] => FeatureTensor::from_vec([c, a, b], self.data),
            [a, b] => FeatureTensor::from_vec([1, a, b], self.data),
            _ => Err(TensorError::ShapeMismatch(format!(
                "expected a rank-3 tensor, found dims {:?}",
                self.dims
            ))),
        }
    }

    pub fn encoded_len(&self) -> usize {
        5 + 4 * self.dims.len() + 4 * self.data.len()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        if self.dims.len() > u8::MAX as usize {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "too many dims"));
        }
        let mut buf = Vec::with_capacity(self.encoded_len());
        buf.extend_from_slice(TEN1_MAGIC);
        buf.push(self.dims.len() as u8);
        for &d in &self.dims {
            let d = u32::try_from(d).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dim exceeds u32"))?;
            buf.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, TensorError> {
        let header = |e: io::Error| match e.kind() {
            io::ErrorKind::UnexpectedEof => TensorError::TruncatedHeader,
            _ => TensorError::Io(e),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(header)?;
        if &magic != TEN1_MAGIC {
            return Err(TensorError::BadMagic(magic));
        }
        let mut ndim = [0u8; 1];
        r.read_exact(&mut ndim).map_err(header)?;
        let mut dims = Vec::with_capacity(ndim[0] as usize);
        for _ in 0..ndim[0] {
            let mut d = [0u8; 4];
            r.read_exact(&mut d).map_err(header)?;
            dims.push(u32::from_le_bytes(d) as usize);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|c| c.checked_mul(4).is_some())
            .ok_or_else(|| TensorError::ShapeMismatch(format!("dims {dims:?} overflow")))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != count * 4 {
            return Err(TensorError::Truncated {
                expected: count * 4,
                found: payload.len(),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TensorError> {
        Self::read_from(bytes)
    }
}

impl From<FeatureTensor> for Ten1 {
    fn from(t: FeatureTensor) -> Self {
        Ten1 {
            dims: t.shape.to_vec(),
            data: t.data,
        }
    }
}

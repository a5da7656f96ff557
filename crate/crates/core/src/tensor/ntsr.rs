//! `NTSR` binary tensor files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! 0x4E 0x54 0x53 0x52   magic "NTSR"
//! 0x01                  version
//! dtype                 0x00 = f32, 0x01 = f64
//! ndim                  u8, >= 1
//! 0x00 x 4              reserved
//! ndim x u64            extents
//! elements              row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DenseTensor, Scalar, TensorError};

const MAGIC: [u8; 4] = *b"NTSR";
const VERSION: u8 = 0x01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0x00,
            DType::F64 => 0x01,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    fn from_code(code: u8) -> Result<Self, TensorError> {
        match code {
            0x00 => Ok(DType::F32),
            0x01 => Ok(DType::F64),
            other => Err(TensorError::Format(format!("unknown dtype byte {other:#04x}"))),
        }
    }
}

/// A tensor of either precision, as read from disk.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyTensor {
    F32(DenseTensor<f32>),
    F64(DenseTensor<f64>),
}

impl AnyTensor {
    pub fn dtype(&self) -> DType {
        match self {
            AnyTensor::F32(_) => DType::F32,
            AnyTensor::F64(_) => DType::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::F64(t) => t.shape(),
        }
    }

    pub fn into_f32(self) -> Result<DenseTensor<f32>, TensorError> {
        match self {
            AnyTensor::F32(t) => Ok(t),
            AnyTensor::F64(_) => Err(TensorError::DTypeMismatch {
                expected: DType::F32,
                found: DType::F64,
            }),
        }
    }

    pub fn into_f64(self) -> Result<DenseTensor<f64>, TensorError> {
        match self {
            AnyTensor::F64(t) => Ok(t),
            AnyTensor::F32(_) => Err(TensorError::DTypeMismatch {
                expected: DType::F64,
                found: DType::F32,
            }),
        }
    }
}

impl From<DenseTensor<f32>> for AnyTensor {
    fn from(t: DenseTensor<f32>) -> Self {
        AnyTensor::F32(t)
    }
}

impl From<DenseTensor<f64>> for AnyTensor {
    fn from(t: DenseTensor<f64>) -> Self {
        AnyTensor::F64(t)
    }
}

pub fn write_ntsr<T: Scalar, W: Write>(mut w: W, t: &DenseTensor<T>) -> Result<(), TensorError> {
    let ndim =
        u8::try_from(t.ndim()).map_err(|_| TensorError::Format(format!("{} axes do not fit in a byte", t.ndim())))?;
    let mut buf = Vec::with_capacity(11 + 8 * t.ndim() + t.len() * T::DTYPE.size());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&[VERSION, T::DTYPE.code(), ndim, 0, 0, 0, 0]);
    for &e in t.shape() {
        buf.extend_from_slice(&(e as u64).to_le_bytes());
    }
    for &v in t.as_slice() {
        v.write_le(&mut buf);
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn decode<T: Scalar>(shape: Vec<usize>, bytes: &[u8]) -> Result<DenseTensor<T>, TensorError> {
    let data = bytes.chunks_exact(T::DTYPE.size()).map(T::read_le).collect();
    DenseTensor::new(shape, data)
}

pub fn read_ntsr<R: Read>(mut r: R) -> Result<AnyTensor, TensorError> {
    let mut header = [0u8; 11];
    r.read_exact(&mut header)
        .map_err(|e| TensorError::Format(format!("short header: {e}")))?;
    if header[..4] != MAGIC {
        return Err(TensorError::Format("bad magic".into()));
    }
    if header[4] != VERSION {
        return Err(TensorError::Format(format!("unsupported version {}", header[4])));
    }
    let dtype = DType::from_code(header[5])?;
    let ndim = header[6] as usize;
    if ndim == 0 {
        return Err(TensorError::Format("ndim must be at least 1".into()));
    }
    if header[7..] != [0; 4] {
        return Err(TensorError::Format("reserved bytes must be zero".into()));
    }
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let mut e = [0u8; 8];
        r.read_exact(&mut e)
            .map_err(|e| TensorError::Format(format!("short extents: {e}")))?;
        let extent = usize::try_from(u64::from_le_bytes(e))
            .map_err(|_| TensorError::Format("extent exceeds address space".into()))?;
        shape.push(extent);
    }
    let count = super::check_shape(&shape)?;
    let nbytes = count
        .checked_mul(dtype.size())
        .ok_or_else(|| TensorError::Format("payload size overflows".into()))?;
    let mut payload = Vec::new();
    r.take(nbytes as u64 + 1).read_to_end(&mut payload)?;
    if payload.len() != nbytes {
        return Err(TensorError::Format(format!(
            "expected {nbytes} payload bytes, found {}{}",
            payload.len().min(nbytes),
            if payload.len() > nbytes {
                " plus trailing data"
            } else {
                ""
            }
        )));
    }
    Ok(match dtype {
        DType::F32 => AnyTensor::F32(decode(shape, &payload)?),
        DType::F64 => AnyTensor::F64(decode(shape, &payload)?),
    })
}

pub fn write_ntsr_file<T: Scalar>(path: impl AsRef<Path>, t: &DenseTensor<T>) -> Result<(), TensorError> {
    write_ntsr(BufWriter::new(File::create(path)?), t)
}

pub fn read_ntsr_file(path: impl AsRef<Path>) -> Result<AnyTensor, TensorError> {
    read_ntsr(BufReader::new(File::open(path)?))
}

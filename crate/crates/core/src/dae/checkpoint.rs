//! Versioned binary checkpoint for [`DaeParams`].
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "DPHDAE\0\0"
//! version    u32      1
//! n_dims     u32
//! dims       u32 * n_dims
//! delta      f64
//! corruption f64
//! per layer l = 0 .. n_dims-1:
//!     weights  f64 * (dims[l+1] * dims[l])   row-major, out x in
//!     bias     f64 * dims[l+1]
//! ```

use ndarray::{Array1, Array2};

use super::DaeParams;
use crate::{DphError, Result};

const MAGIC: &[u8; 8] = b"DPHDAE\0\0";
const VERSION: u32 = 1;

impl DaeParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.parameter_count() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layer_dims().len() as u32).to_le_bytes());
        for &d in self.layer_dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.delta.to_le_bytes());
        out.extend_from_slice(&self.corruption.to_le_bytes());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for v in w.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in b.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(DphError::Format("not a DAE checkpoint (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(DphError::Format(format!("unsupported checkpoint version {version}")));
        }
        let n_dims = cur.u32()? as usize;
        if n_dims > 64 {
            return Err(DphError::Format(format!("implausible layer count {n_dims}")));
        }
        let dims = (0..n_dims)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let delta = cur.f64()?;
        let corruption = cur.f64()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let vals = cur.f64s(fan_in * fan_out)?;
            weights.push(
                Array2::from_shape_vec((fan_out, fan_in), vals)
                    .map_err(|e| DphError::Format(e.to_string()))?,
            );
            biases.push(Array1::from(cur.f64s(fan_out)?));
        }
        if cur.pos != bytes.len() {
            return Err(DphError::Format(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - cur.pos
            )));
        }
        DaeParams::from_parts(&dims, weights, biases, delta, corruption)
    }
}

pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| DphError::Format(format!("truncated input at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| DphError::Format("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

//! Versioned binary container for a trained model.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic        8 bytes "DPHMODEL"
//! version      u32     1
//! hyper_len    u64, then that many bytes of hyperparameter JSON
//! digest_len   u64, then the split digest as UTF-8
//! r            u32
//! n_users      u64
//! n_items      u64
//! user codes   u64 * n_users * ceil(r / 64)
//! item codes   u64 * n_items * ceil(r / 64)
//! dae_len      u64, then a DAE checkpoint
//! trace_len    u64, then f64 * trace_len
//! ```
//!
//! Item codes cover every item; cold items carry their content codes.

use crate::dae::{Cursor, DaeParams};
use crate::model::{CodeMatrix, HyperParams};
use crate::{DphError, Result};

const MAGIC: &[u8; 8] = b"DPHMODEL";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub hyper: HyperParams,
    /// Identifies the split the model was trained on.
    pub split_digest: String,
    pub users: CodeMatrix,
    pub items: CodeMatrix,
    pub dae: DaeParams,
    pub loss_trace: Vec<f64>,
}

fn put_blob(out: &mut Vec<u8>, blob: &[u8]) {
    out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
    out.extend_from_slice(blob);
}

fn blob<'a>(cur: &mut Cursor<'a>) -> Result<&'a [u8]> {
    let len = usize::try_from(cur.u64()?).map_err(|_| DphError::Format("blob too large".into()))?;
    cur.take(len)
}

fn count(cur: &mut Cursor<'_>) -> Result<usize> {
    usize::try_from(cur.u64()?).map_err(|_| DphError::Format("count too large".into()))
}

impl ModelArtifact {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let hyper = serde_json::to_vec(&self.hyper)
            .map_err(|e| DphError::Format(format!("encoding hyperparameters: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_blob(&mut out, &hyper);
        put_blob(&mut out, self.split_digest.as_bytes());
        out.extend_from_slice(&(self.users.r() as u32).to_le_bytes());
        out.extend_from_slice(&(self.users.count() as u64).to_le_bytes());
        out.extend_from_slice(&(self.items.count() as u64).to_le_bytes());
        for w in self.users.words().iter().chain(self.items.words()) {
            out.extend_from_slice(&w.to_le_bytes());
        }
        put_blob(&mut out, &self.dae.to_bytes());
        out.extend_from_slice(&(self.loss_trace.len() as u64).to_le_bytes());
        for v in &self.loss_trace {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(DphError::Format("not a model artifact (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(DphError::Format(format!("unsupported artifact version {version}")));
        }
        let hyper: HyperParams = serde_json::from_slice(blob(&mut cur)?)
            .map_err(|e| DphError::Format(format!("hyperparameters: {e}")))?;
        let split_digest = String::from_utf8(blob(&mut cur)?.to_vec())
            .map_err(|_| DphError::Format("split digest is not UTF-8".into()))?;
        let r = cur.u32()? as usize;
        let n_users = count(&mut cur)?;
        let n_items = count(&mut cur)?;
        let words_per_code = r.div_ceil(64);
        let mut words = |n: usize| -> Result<Vec<u64>> {
            let total = n
                .checked_mul(words_per_code)
                .ok_or_else(|| DphError::Format("code size overflow".into()))?;
            (0..total).map(|_| cur.u64()).collect()
        };
        let users = CodeMatrix::from_words(r, n_users, words(n_users)?)?;
        let items = CodeMatrix::from_words(r, n_items, words(n_items)?)?;
        let dae = DaeParams::from_bytes(blob(&mut cur)?)?;
        let trace_len = count(&mut cur)?;
        let loss_trace = cur.f64s(trace_len)?;
        if cur.pos != bytes.len() {
            return Err(DphError::Format(format!(
                "{} trailing bytes after artifact",
                bytes.len() - cur.pos
            )));
        }
        if dae.code_len() != r || hyper.r != r {
            return Err(DphError::Format(format!(
                "code length {r} disagrees with encoder ({}) or hyperparameters ({})",
                dae.code_len(),
                hyper.r
            )));
        }
        Ok(Self {
            hyper,
            split_digest,
            users,
            items,
            dae,
            loss_trace,
        })
    }
}

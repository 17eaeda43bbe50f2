//! `SEMB` embedding container.
//!
//! | offset | size          | field                        |
//! |--------|---------------|------------------------------|
//! | 0      | 4             | magic `b"SEMB"`              |
//! | 4      | 4             | version, u32 LE (= 1)        |
//! | 8      | 4             | rows, u32 LE                 |
//! | 12     | 4             | dim, u32 LE                  |
//! | 16     | rows·dim·4    | f32 LE payload, row-major    |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ndcore::Matrix;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"SEMB";
pub const EMBEDDING_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_embeddings(m: &Matrix) -> Result<Vec<u8>> {
    m.ensure_finite("embeddings")?;
    let rows = u32::try_from(m.rows()).map_err(|_| Error::InvalidArgument("too many rows for u32".into()))?;
    let dim = u32::try_from(m.cols()).map_err(|_| Error::InvalidArgument("dim does not fit u32".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + m.data().len() * 4);
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for &v in m.data() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("embedding value {v} overflows f32")));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

/// Parses a `SEMB` buffer; `path` is only used in error messages.
pub fn decode_embeddings(bytes: &[u8], path: &Path) -> Result<Matrix> {
    if bytes.len() < 4 || &bytes[..4] != EMBEDDING_MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::LengthMismatch {
            path: path.into(),
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != EMBEDDING_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            version,
        });
    }
    let rows = word(8) as usize;
    let dim = word(12) as usize;
    let expected = rows as u64 * dim as u64 * 4;
    let found = (bytes.len() - HEADER_LEN) as u64;
    if expected != found {
        return Err(Error::LengthMismatch {
            path: path.into(),
            expected,
            found,
        });
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{} holds non-finite values", path.display())));
    }
    Matrix::from_vec(rows, dim, data)
}

pub fn write_embeddings(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_embeddings(m)?).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embeddings(&bytes, path)
}

//! Raw matrix files: `TDA1`, rows (u64 LE), cols (u64 LE), then
//! `rows × cols` little-endian f32 values in row-major order.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const RAWMAT_MAGIC: &[u8; 4] = b"TDA1";
const HEADER_LEN: usize = 4 + 8 + 8;

pub fn encode_rawmat(m: &Array2<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.len());
    out.extend_from_slice(RAWMAT_MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_rawmat(bytes: &[u8]) -> Result<Array2<f32>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != RAWMAT_MAGIC {
        return Err(Error::Format("not a raw matrix file (bad magic)".into()));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .filter(|&n| n == payload.len() as u64)
        .ok_or_else(|| {
            Error::Format(format!(
                "size mismatch: header declares {rows}x{cols}, payload has {} bytes",
                payload.len()
            ))
        })?;
    debug_assert_eq!(expected as usize, payload.len());
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(Array2::from_shape_vec((rows as usize, cols as usize), values).expect("checked size"))
}

pub fn load_rawmat(path: impl AsRef<Path>) -> Result<Array2<f32>> {
    decode_rawmat(&fs::read(path)?)
}

pub fn save_rawmat(path: impl AsRef<Path>, m: &Array2<f32>) -> Result<()> {
    fs::write(path, encode_rawmat(m))?;
    Ok(())
}

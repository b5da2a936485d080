//! KFSFEAT: 8-byte magic `KFSFEAT\0`, `n_frames: u32 LE`, `dim: u32 LE`,
//! then `n_frames * dim` little-endian `f32`, row-major.

use std::fs;
use std::path::Path;

use crate::error::{KfsError, Result};
use crate::timeline::FeatureMatrix;

pub const MAGIC: &[u8; 8] = b"KFSFEAT\0";
const HEADER_LEN: usize = 16;

pub fn encode_features(features: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + features.data().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(features.n_frames() as u32).to_le_bytes());
    out.extend_from_slice(&(features.dim() as u32).to_le_bytes());
    for v in features.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a KFSFEAT buffer; `path` only labels errors.
pub fn decode_features(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    let format = |reason: String| KfsError::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= MAGIC.len() && &bytes[..MAGIC.len()] != MAGIC {
            return Err(format("bad magic".into()));
        }
        return Err(KfsError::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(format(format!("bad magic {:?}", &bytes[..8])));
    }
    let n_frames = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as u64;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as u64;
    let expected = HEADER_LEN as u64 + n_frames * dim * 4;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(KfsError::Truncated {
            path: path.to_path_buf(),
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(format(format!("{} trailing bytes after payload", actual - expected)));
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(KfsError::NonFinite {
            path: path.to_path_buf(),
            index,
        });
    }
    FeatureMatrix::new(n_frames as usize, dim as usize, data).map_err(|e| format(e.to_string()))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| KfsError::io(path, e))?;
    decode_features(&bytes, path)
}

pub fn write_features(path: impl AsRef<Path>, features: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_features(features)).map_err(|e| KfsError::io(path, e))
}

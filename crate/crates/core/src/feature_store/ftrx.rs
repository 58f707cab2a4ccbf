//! FTRX binary layout. All integers little-endian, no padding:
//!
//! | offset | size    | field                  |
//! |--------|---------|------------------------|
//! | 0      | 4       | magic `FTRX`           |
//! | 4      | 4       | version (u32 = 1)      |
//! | 8      | 8       | n (u64)                |
//! | 16     | 8       | d (u64)                |
//! | 24     | 4       | num_classes (u32)      |
//! | 28     | 4·n·d   | f32 values, row-major  |
//! | …      | 4·n     | u32 labels             |

use std::fs;
use std::io::Read;
use std::path::Path;

use super::FeatureMatrix;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"FTRX";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

/// Parsed fixed-size header of an FTRX file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FtrxHeader {
    pub n: u64,
    pub d: u64,
    pub num_classes: u32,
}

impl FtrxHeader {
    /// Total file size the header implies, `None` on overflow.
    pub fn file_len(&self) -> Option<u64> {
        let cells = self.n.checked_mul(self.d)?;
        let payload = cells.checked_mul(4)?.checked_add(self.n.checked_mul(4)?)?;
        payload.checked_add(HEADER_LEN as u64)
    }
}

fn parse_header(bytes: &[u8]) -> Result<FtrxHeader> {
    if bytes.len() < HEADER_LEN {
        // Still report a wrong magic if we have one to look at.
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic {
                found: bytes[..4].try_into().unwrap(),
            });
        }
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    Ok(FtrxHeader {
        n: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
        d: u64::from_le_bytes(bytes[16..24].try_into().unwrap()),
        num_classes: u32::from_le_bytes(bytes[24..28].try_into().unwrap()),
    })
}

pub fn encode_ftrx(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.data().len() + 4 * m.n());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.n() as u64).to_le_bytes());
    out.extend_from_slice(&(m.d() as u64).to_le_bytes());
    out.extend_from_slice(&m.num_classes().to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for l in m.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn decode_ftrx(bytes: &[u8]) -> Result<FeatureMatrix> {
    let header = parse_header(bytes)?;
    let expected = header
        .file_len()
        .ok_or_else(|| Error::invalid("FTRX header dimensions overflow"))?;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(Error::TrailingBytes { expected, actual });
    }
    let n = usize::try_from(header.n).map_err(|_| Error::invalid("n too large"))?;
    let d = usize::try_from(header.d).map_err(|_| Error::invalid("d too large"))?;

    let data_end = HEADER_LEN + 4 * n * d;
    let data: Vec<f32> = bytes[HEADER_LEN..data_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels: Vec<u32> = bytes[data_end..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(n, d, header.num_classes, data, labels)
}

/// Writes `m` to `path`. The matrix is validated by construction, so nothing
/// invalid can reach the file.
pub fn write_ftrx(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ftrx(m)).map_err(|e| Error::io(path, e))
}

pub fn read_ftrx(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ftrx(&bytes)
}

/// Reads and checks only the header, plus the file length against it.
pub fn read_ftrx_header(path: impl AsRef<Path>) -> Result<FtrxHeader> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut buf = Vec::with_capacity(HEADER_LEN);
    (&mut file)
        .take(HEADER_LEN as u64)
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(path, e))?;
    let header = parse_header(&buf)?;
    let expected = header
        .file_len()
        .ok_or_else(|| Error::invalid("FTRX header dimensions overflow"))?;
    if len < expected {
        return Err(Error::Truncated {
            expected,
            actual: len,
        });
    }
    if len > expected {
        return Err(Error::TrailingBytes {
            expected,
            actual: len,
        });
    }
    Ok(header)
}

//! The DIPE tensor container.
//!
//! Layout (all integers little-endian):
//!
//! | bytes  | field                         |
//! |--------|-------------------------------|
//! | 0..4   | magic `b"DIPE"`               |
//! | 4..6   | format version (u16) = 1      |
//! | 6..8   | class count C (u16)           |
//! | 8..12  | height H (u32)                |
//! | 12..16 | width W (u32)                 |
//! | 16..   | C·H·W f32 values, class-major |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::tensor::{Dims, ProbabilityMap};

pub const MAGIC: [u8; 4] = *b"DIPE";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

/// Serializes a map into the DIPE container.
pub fn encode_probability_map(map: &ProbabilityMap) -> Vec<u8> {
    let dims = map.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * dims.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.classes as u16).to_le_bytes());
    out.extend_from_slice(&(dims.height as u32).to_le_bytes());
    out.extend_from_slice(&(dims.width as u32).to_le_bytes());
    for v in map.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Dims> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            expected: HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let classes = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    Dims::new(classes, height, width)
}

/// Parses a DIPE container. `path` is only used in error messages.
pub fn decode_probability_map(bytes: &[u8], path: &Path) -> Result<ProbabilityMap> {
    let dims = parse_header(bytes, path)?;
    let expected = HEADER_LEN as u64 + 4 * dims.len() as u64;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset: found,
            expected,
            found,
        });
    }
    if found > expected {
        return Err(Error::TrailingBytes {
            path: path.to_path_buf(),
            offset: expected,
            trailing: found - expected,
        });
    }
    let mut values = Vec::with_capacity(dims.len());
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::ValueOutOfRange {
                path: path.to_path_buf(),
                offset: (HEADER_LEN + 4 * i) as u64,
                value: v,
            });
        }
        values.push(v);
    }
    ProbabilityMap::new(dims, values)
}

pub fn write_probability_map(map: &ProbabilityMap, destination: impl AsRef<Path>) -> Result<()> {
    let path = destination.as_ref();
    let bytes = encode_probability_map(map);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_probability_map(source: impl AsRef<Path>) -> Result<ProbabilityMap> {
    let path = source.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_probability_map(&bytes, path)
}

/// Reads only the 16-byte header, for cheap dimension checks.
pub fn read_dims(source: impl AsRef<Path>) -> Result<Dims> {
    let path = source.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = Vec::with_capacity(HEADER_LEN);
    file.take(HEADER_LEN as u64)
        .read_to_end(&mut header)
        .map_err(|e| Error::io(path, e))?;
    parse_header(&header, path)
}

//! Run-length encoded masks: `start length` pairs over the 1-indexed,
//! row-major flattened plane, and the `id,class,segmentation` CSV that
//! carries them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::tensor::Plane;

pub fn decode_rle(encoding: &str, height: usize, width: usize) -> Result<Plane> {
    let total = height * width;
    let tokens: Vec<&str> = encoding.split_whitespace().collect();
    let mut numbers = Vec::with_capacity(tokens.len());
    for (index, token) in tokens.iter().enumerate() {
        let value: usize = token.parse().map_err(|_| Error::Rle {
            index,
            reason: format!("{token:?} is not a non-negative integer"),
        })?;
        numbers.push(value);
    }
    if numbers.len() % 2 != 0 {
        return Err(Error::Rle {
            index: numbers.len() - 1,
            reason: format!("odd token count {}", numbers.len()),
        });
    }
    let mut bits = vec![0u8; total];
    // one past the last pixel (1-indexed) covered by the previous run
    let mut next_free = 1usize;
    for (pair, run) in numbers.chunks_exact(2).enumerate() {
        let (start, length) = (run[0], run[1]);
        let index = pair * 2;
        if start == 0 {
            return Err(Error::Rle {
                index,
                reason: "run start must be at least 1".into(),
            });
        }
        if length == 0 {
            return Err(Error::Rle {
                index: index + 1,
                reason: "run length must be at least 1".into(),
            });
        }
        if start < next_free {
            return Err(Error::Rle {
                index,
                reason: format!("run starting at {start} overlaps or precedes the previous run"),
            });
        }
        let end = start
            .checked_add(length - 1)
            .filter(|&end| end <= total)
            .ok_or_else(|| Error::Rle {
                index: index + 1,
                reason: format!("run {start}+{length} exceeds {total} pixels"),
            })?;
        bits[start - 1..end].fill(1);
        next_free = end + 1;
    }
    Plane::from_bits(height, width, bits)
}

/// Emits maximal runs in ascending order; an empty plane gives `""`.
pub fn encode_rle(plane: &Plane) -> String {
    encode_bits(plane.bits())
}

pub(crate) fn encode_bits(bits: &[u8]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < bits.len() {
        if bits[i] == 1 {
            let start = i;
            while i < bits.len() && bits[i] == 1 {
                i += 1;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            write!(out, "{} {}", start + 1, i - start).unwrap();
        } else {
            i += 1;
        }
    }
    out
}

/// One `id,class,segmentation` row.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RleRow {
    pub id: String,
    pub class: String,
    #[serde(default)]
    pub segmentation: String,
}

/// Rows keyed by `(id, class)`.
pub type RleTable = HashMap<(String, String), String>;

pub fn read_rle_csv(path: impl AsRef<Path>) -> Result<RleTable> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Csv {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.len() < 3
        || &headers[0] != "id"
        || &headers[1] != "class"
        || &headers[2] != "segmentation"
    {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: format!("expected header id,class,segmentation, found {headers:?}"),
        });
    }
    let mut table = RleTable::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let id = record.get(0).unwrap_or_default().to_string();
        let class = record.get(1).unwrap_or_default().to_string();
        let segmentation = record.get(2).unwrap_or_default().trim().to_string();
        if table
            .insert((id.clone(), class.clone()), segmentation)
            .is_some()
        {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                message: format!("duplicate row ({id}, {class}) at record {}", line + 1),
            });
        }
    }
    Ok(table)
}

pub fn write_rle_csv(path: impl AsRef<Path>, rows: &[RleRow]) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer
        .write_record(["id", "class", "segmentation"])
        .map_err(csv_err)?;
    for row in rows {
        writer
            .write_record([&row.id, &row.class, &row.segmentation])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

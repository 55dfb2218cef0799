//! IDX, CSV and raw binary matrix formats.
//!
//! Binary layout: `N` and `D` as little-endian `u64`, then `N·D` little-endian
//! `f64` values in row-major order.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, ParseErrorKind, Result};
use crate::matrix::DataMatrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Decoded IDX payload: dimension sizes and unsigned bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxData {
    pub magic: u32,
    pub dims: Vec<usize>,
    pub bytes: Vec<u8>,
}

impl IdxData {
    /// `dims[0] × prod(dims[1..])` matrix of raw byte values.
    pub fn to_raw_matrix(&self) -> Array2<f64> {
        let n = self.dims[0];
        let d = self.dims[1..].iter().product::<usize>();
        Array2::from_shape_fn((n, d), |(i, j)| f64::from(self.bytes[i * d + j]))
    }
}

fn parse_err(name: &str, kind: ParseErrorKind, location: String) -> Error {
    Error::Parse {
        path: name.to_string(),
        kind,
        location,
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parses an unsigned-byte IDX file (images `0x803` or labels `0x801`).
pub fn parse_idx(bytes: &[u8], name: &str) -> Result<IdxData> {
    if bytes.len() < 4 {
        return Err(parse_err(name, ParseErrorKind::Truncated, "byte 0".into()));
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let ndims = match magic {
        IDX_IMAGES_MAGIC => 3,
        IDX_LABELS_MAGIC => 1,
        _ => {
            return Err(parse_err(
                name,
                ParseErrorKind::BadMagic,
                format!("byte 0 (found {magic:#010x})"),
            ))
        }
    };
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(parse_err(
            name,
            ParseErrorKind::Truncated,
            format!("byte {} (header needs {header} bytes)", bytes.len()),
        ));
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|k| {
            let o = 4 + 4 * k;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect();
    let payload = dims.iter().product::<usize>();
    if bytes.len() < header + payload {
        return Err(parse_err(
            name,
            ParseErrorKind::Truncated,
            format!("byte {} (payload needs {} bytes)", bytes.len(), header + payload),
        ));
    }
    Ok(IdxData {
        magic,
        dims,
        bytes: bytes[header..header + payload].to_vec(),
    })
}

pub fn encode_idx(data: &IdxData) -> Vec<u8> {
    let mut out = data.magic.to_be_bytes().to_vec();
    for d in &data.dims {
        out.extend_from_slice(&(*d as u32).to_be_bytes());
    }
    out.extend_from_slice(&data.bytes);
    out
}

/// IDX payload flattened row-major and rescaled from bytes to `[0, 1]`.
pub fn load_idx(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let idx = parse_idx(&read(path)?, &path.display().to_string())?;
    DataMatrix::new(idx.to_raw_matrix().mapv(|v| v / 255.0))
}

/// IDX label file as integers.
pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<i64>> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let idx = parse_idx(&read(path)?, &name)?;
    if idx.magic != IDX_LABELS_MAGIC {
        return Err(parse_err(&name, ParseErrorKind::BadMagic, "byte 0 (expected labels)".into()));
    }
    Ok(idx.bytes.iter().map(|b| i64::from(*b)).collect())
}

/// Parses numeric CSV text. A first row with any non-numeric cell is taken
/// as a header.
pub fn parse_csv(text: &str, name: &str) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            parse_err(name, ParseErrorKind::NonNumeric, format!("row {}: {e}", idx + 1))
        })?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if let Some(col) = parsed.iter().position(Option::is_none) {
            if idx == 0 {
                continue; // header
            }
            return Err(parse_err(
                name,
                ParseErrorKind::NonNumeric,
                format!("row {line}, column {}", col + 1),
            ));
        }
        match width {
            None => width = Some(parsed.len()),
            Some(w) if w != parsed.len() => {
                return Err(parse_err(
                    name,
                    ParseErrorKind::Ragged,
                    format!("row {line} ({} cells, expected {w})", parsed.len()),
                ))
            }
            _ => {}
        }
        values.extend(parsed.into_iter().flatten());
        rows += 1;
    }
    let width = width.unwrap_or(0);
    Array2::from_shape_vec((rows, width), values).map_err(|e| Error::Internal(e.to_string()))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let bytes = read(path)?;
    let name = path.display().to_string();
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        parse_err(&name, ParseErrorKind::NonNumeric, format!("byte {}", e.valid_up_to()))
    })?;
    DataMatrix::new(parse_csv(text, &name)?)
}

/// Headerless CSV using shortest round-trip float formatting.
pub fn matrix_to_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.outer_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn save_csv(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    write(path.as_ref(), matrix_to_csv(m).as_bytes())
}

pub fn labels_to_csv(labels: &[i64]) -> String {
    labels.iter().fold(String::new(), |mut s, l| {
        let _ = writeln!(s, "{l}");
        s
    })
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<i64>> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<i64>().map_err(|_| {
                parse_err(&name, ParseErrorKind::NonNumeric, format!("row {}", i + 1))
            })
        })
        .collect()
}

pub fn encode_matrix(m: &Array2<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * m.len());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8], name: &str) -> Result<Array2<f64>> {
    if bytes.len() < 16 {
        return Err(parse_err(
            name,
            ParseErrorKind::Truncated,
            format!("byte {} (header needs 16 bytes)", bytes.len()),
        ));
    }
    let n = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes")) as usize;
    let d = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let need = n
        .checked_mul(d)
        .and_then(|x| x.checked_mul(8))
        .and_then(|x| x.checked_add(16))
        .ok_or_else(|| parse_err(name, ParseErrorKind::Truncated, "byte 0 (size overflow)".into()))?;
    if bytes.len() < need {
        return Err(parse_err(
            name,
            ParseErrorKind::Truncated,
            format!("byte {} (payload needs {need} bytes)", bytes.len()),
        ));
    }
    let values = bytes[16..need]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Array2::from_shape_vec((n, d), values).map_err(|e| Error::Internal(e.to_string()))
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    write(path.as_ref(), &encode_matrix(m))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    decode_matrix(&read(path)?, &path.display().to_string())
}

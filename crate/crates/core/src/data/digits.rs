//! Bundled 8×8 handwritten digits (1,797 images, intensities 0–16).

use rand::seq::index::sample;

use super::io::{parse_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::seed;

const IMAGES: &[u8] = include_bytes!("../../data/digits8x8-images.idx3-ubyte");
const LABELS: &[u8] = include_bytes!("../../data/digits8x8-labels.idx1-ubyte");

pub const DIGITS_COUNT: usize = 1797;

/// All digits as a `1797 × 64` matrix in native 0–16 units, with labels.
pub fn digits() -> Result<(DataMatrix, Vec<i64>)> {
    let images = parse_idx(IMAGES, "bundled digits images")?;
    let labels = parse_idx(LABELS, "bundled digits labels")?;
    if images.magic != IDX_IMAGES_MAGIC || labels.magic != IDX_LABELS_MAGIC {
        return Err(Error::Internal("bundled digits have unexpected magic".into()));
    }
    let x = DataMatrix::new(images.to_raw_matrix())?;
    let y = labels.bytes.iter().map(|b| i64::from(*b)).collect();
    Ok((x, y))
}

/// `n` digits drawn without replacement, in draw order; row ids are the
/// original image indices.
pub fn digits_subset(n: usize, seed_: u64) -> Result<(DataMatrix, Vec<i64>)> {
    let (x, y) = digits()?;
    if n > x.rows() {
        return Err(Error::Size {
            what: "digit subset larger than the bundled set",
            got: n,
            need: x.rows(),
        });
    }
    let mut rng = seed::rng(seed::child(seed_, "digits/subset"));
    let idx = sample(&mut rng, x.rows(), n).into_vec();
    let values = x.values().select(ndarray::Axis(0), &idx);
    let ids = idx.iter().map(|i| *i as u64).collect();
    let labels = idx.iter().map(|i| y[*i]).collect();
    Ok((DataMatrix::with_row_ids(values, ids)?, labels))
}

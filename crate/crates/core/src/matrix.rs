use std::collections::HashSet;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Dense observations × features matrix with a stable identifier per row.
///
/// Values are always finite and row ids are unique. Every transformation that
/// keeps all rows keeps the ids; subsetting keeps the ids of the selected rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    row_ids: Vec<u64>,
}

impl DataMatrix {
    /// Wraps `values`, numbering rows `0..N`.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let ids = (0..values.nrows() as u64).collect();
        Self::with_row_ids(values, ids)
    }

    pub fn with_row_ids(values: Array2<f64>, row_ids: Vec<u64>) -> Result<Self> {
        if row_ids.len() != values.nrows() {
            return Err(Error::Dimension(format!(
                "{} row ids for {} rows",
                row_ids.len(),
                values.nrows()
            )));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let cols = values.ncols().max(1);
            return Err(Error::Validation(format!(
                "non-finite value at row {}, column {}",
                idx / cols,
                idx % cols
            )));
        }
        let mut seen = HashSet::with_capacity(row_ids.len());
        if let Some(dup) = row_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::Validation(format!("duplicate row id {dup}")));
        }
        Ok(Self { values, row_ids })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Same row ids, new values with the same number of rows.
    pub fn with_values(&self, values: Array2<f64>) -> Result<Self> {
        Self::with_row_ids(values, self.row_ids.clone())
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(0), indices),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Errors unless `other` carries the same row ids in the same order.
    pub fn check_aligned(&self, other: &DataMatrix) -> Result<()> {
        if self.rows() != other.rows() {
            return Err(Error::Alignment(format!(
                "{} rows vs {} rows",
                self.rows(),
                other.rows()
            )));
        }
        if let Some(i) = (0..self.rows()).find(|&i| self.row_ids[i] != other.row_ids[i]) {
            return Err(Error::Alignment(format!(
                "row {i}: id {} vs {}",
                self.row_ids[i], other.row_ids[i]
            )));
        }
        Ok(())
    }

    /// Columns standardized to zero mean and unit variance. Constant columns
    /// are centered only.
    pub fn zscored(&self) -> Self {
        let mut v = self.values.clone();
        let n = v.nrows().max(1) as f64;
        for mut col in v.axis_iter_mut(Axis(1)) {
            let mean = col.sum() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let sd = if sd > 0.0 { sd } else { 1.0 };
            col.mapv_inplace(|x| (x - mean) / sd);
        }
        Self {
            values: v,
            row_ids: self.row_ids.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_nan() {
        let err = DataMatrix::new(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_duplicate_ids() {
        assert!(DataMatrix::with_row_ids(array![[1.0], [2.0]], vec![4, 4]).is_err());
    }

    #[test]
    fn select_keeps_ids() {
        let m = DataMatrix::with_row_ids(array![[1.0], [2.0], [3.0]], vec![10, 20, 30]).unwrap();
        let s = m.select_rows(&[2, 0]);
        assert_eq!(s.row_ids(), &[30, 10]);
        assert_eq!(s.values(), &array![[3.0], [1.0]]);
    }

    #[test]
    fn alignment_checks_ids() {
        let a = DataMatrix::with_row_ids(array![[1.0], [2.0]], vec![1, 2]).unwrap();
        let b = DataMatrix::with_row_ids(array![[1.0], [2.0]], vec![2, 1]).unwrap();
        assert!(matches!(a.check_aligned(&b), Err(Error::Alignment(_))));
        assert!(a.check_aligned(&a.clone()).is_ok());
    }
}

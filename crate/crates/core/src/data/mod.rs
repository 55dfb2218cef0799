//! Synthetic multimodal generators and dataset IO.

mod digits;
pub mod io;
mod synth;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

pub use digits::{digits, digits_subset, DIGITS_COUNT};
pub use synth::{
    make_coupled, make_noisy_pair, make_tree, random_orthogonal, CoupledSpec, TreeSpec,
};

/// How a set's modalities were corrupted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Independent Gaussian noise of standard deviation `nu1` / `nu2`.
    Global { nu1: f64, nu2: f64 },
    /// Gaussian noise per tree branch, same levels in both modalities.
    PerBranch { branch_noise: Vec<f64> },
    /// Gaussian observation noise followed by independent entry dropout.
    Dropout { p: f64, noise: f64 },
}

/// Two aligned views of the same points.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalSet {
    pub modality1: DataMatrix,
    pub modality2: DataMatrix,
    pub labels: Vec<i64>,
    /// Noiseless points (first modality's clean features for coupled sets).
    pub ground_truth: Option<DataMatrix>,
    /// Clean second-modality features, when they differ from `ground_truth`.
    pub ground_truth2: Option<DataMatrix>,
    /// Exact geodesic distances of the noiseless points.
    pub geodesics: Option<Array2<f64>>,
    /// Leading columns of each modality that are planted coupled pairs.
    pub planted_pairs: usize,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl MultimodalSet {
    pub fn len(&self) -> usize {
        self.modality1.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.modality1.rows() == 0
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Checks that every component shares N and row ids.
    pub fn validate(&self) -> Result<()> {
        self.modality1.check_aligned(&self.modality2)?;
        if self.labels.len() != self.len() {
            return Err(Error::Alignment(format!(
                "{} labels for {} rows",
                self.labels.len(),
                self.len()
            )));
        }
        for gt in [&self.ground_truth, &self.ground_truth2].into_iter().flatten() {
            self.modality1.check_aligned(gt)?;
        }
        if let Some(g) = &self.geodesics {
            if g.nrows() != self.len() || g.ncols() != self.len() {
                return Err(Error::Alignment(format!(
                    "geodesic matrix is {}x{} for {} rows",
                    g.nrows(),
                    g.ncols(),
                    self.len()
                )));
            }
        }
        Ok(())
    }
}

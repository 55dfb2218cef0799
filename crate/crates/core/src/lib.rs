//! Integrated diffusion for multimodal data.
//!
//! Builds Gaussian-kernel diffusion operators per modality, denoises each
//! modality locally with recursive spectral clustering, picks a per-modality
//! diffusion time from the elbow of its spectral entropy curve, and fuses the
//! modalities into one row-stochastic operator `J = P1^t1 P2^t2`. Baseline
//! fusions, diffusion-map embeddings, synthetic generators and the evaluation
//! protocols live alongside.

// `!(x > 0.0)` style checks are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod denoise;
pub mod embed;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod kmeans;
pub mod linalg;
pub mod matrix;
pub mod operator;
pub mod par;
pub mod plot;
pub mod protocol;
pub mod seed;
pub mod spectral;

pub use error::{Error, Result};
pub use matrix::DataMatrix;
pub use operator::{Bandwidth, DiffusionOperator, Kernel, Markov, StochasticMatrix};

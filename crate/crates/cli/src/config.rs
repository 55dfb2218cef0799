//! Run configuration: a JSON file with every field optional, overlaid by
//! command-line flags, then written back fully resolved next to the outputs.

use std::path::{Path, PathBuf};

use anyhow::Context;
use idiff::data::{CoupledSpec, TreeSpec};
use idiff::fusion::{FusionConfig, FusionStrategy};
use idiff::protocol::BenchmarkConfig;
use idiff::{seed, Error};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Subset of the bundled digits with Gaussian noise on each view.
    Digits { n_points: usize, nu1: f64, nu2: f64 },
    Tree(TreeSpec),
    Coupled(CoupledSpec),
    /// Gaussian noise added to a matrix read from disk.
    NoisyPair { base: PathBuf, nu1: f64, nu2: f64 },
}

impl Default for Generator {
    fn default() -> Self {
        Generator::Digits {
            n_points: 1000,
            nu1: 1.0,
            nu2: 4.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Inputs {
    pub modality1: Option<PathBuf>,
    pub modality2: Option<PathBuf>,
    pub operator: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub geodesics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedSettings {
    pub dims: usize,
    pub t: u32,
}

impl Default for EmbedSettings {
    fn default() -> Self {
        Self { dims: 20, t: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMetric {
    Knn,
    Demap,
    Mi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub metric: EvalMetric,
    pub k: usize,
    pub bins: usize,
    /// Leading column pairs compared by `mi`; `None` means all shared columns.
    pub pairs: Option<usize>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            metric: EvalMetric::Knn,
            k: idiff::eval::DEFAULT_K,
            bins: idiff::eval::DEFAULT_BINS,
            pairs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Root seed. Generators use it directly; MGD uses `child(seed, "mgd")`.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub inputs: Inputs,
    pub generator: Generator,
    pub fusion: FusionConfig,
    pub strategy: FusionStrategy,
    /// Diffusion steps for `denoise`.
    pub denoise_t: u32,
    pub embed: EmbedSettings,
    pub eval: EvalSettings,
    pub benchmark: BenchmarkConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            inputs: Inputs::default(),
            generator: Generator::default(),
            fusion: FusionConfig::default(),
            strategy: FusionStrategy::Integrated,
            denoise_t: 1,
            embed: EmbedSettings::default(),
            eval: EvalSettings::default(),
            benchmark: BenchmarkConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            .context("reading config")
    }

    /// Pushes the root seed into every stage that draws random numbers.
    pub fn apply_seed(&mut self) {
        self.fusion.mgd.seed = seed::child(self.seed, "mgd");
        self.benchmark.fusion.mgd.seed = self.fusion.mgd.seed;
        match &mut self.generator {
            Generator::Tree(t) => t.seed = self.seed,
            Generator::Coupled(c) => c.seed = self.seed,
            Generator::Digits { .. } | Generator::NoisyPair { .. } => {}
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

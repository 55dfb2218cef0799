//! Benchmark sweeps over fusion strategies, noise levels and seeds.
//!
//! Four protocols:
//! - `global_noise_knn`: digit images, fixed noise on one view, growing noise
//!   on the other; kNN accuracy on each fused operator's diffusion map.
//! - `denoised_knn`: same data; the noisier view is smoothed by each fused
//!   operator and kNN runs on the smoothed pixels.
//! - `tree_demap`: branching tree with noise on one branch; DeMAP of each
//!   fused operator's diffusion map against exact tree geodesics.
//! - `mutual_information`: coupled features under dropout; mean MI between
//!   planted pairs after denoising both views.
//!
//! Every sweep cell is independent; cells run on the work pool and the rows
//! come back in cell order, so output is identical across thread counts.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{self, CoupledSpec, TreeSpec};
use crate::denoise;
use crate::embed;
use crate::error::{Error, Result};
use crate::eval::{self, DenoiseMethod};
use crate::fusion::{FusionConfig, FusionContext, FusionStrategy};
use crate::par;
use crate::plot;

pub const CSV_HEADER: &str = "protocol,strategy,noise_level,seed,metric,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    GlobalNoiseKnn,
    TreeDemap,
    DenoisedKnn,
    MutualInformation,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::GlobalNoiseKnn,
        Protocol::TreeDemap,
        Protocol::DenoisedKnn,
        Protocol::MutualInformation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::GlobalNoiseKnn => "global_noise_knn",
            Protocol::TreeDemap => "tree_demap",
            Protocol::DenoisedKnn => "denoised_knn",
            Protocol::MutualInformation => "mutual_information",
        }
    }

    fn metric(self) -> &'static str {
        match self {
            Protocol::GlobalNoiseKnn | Protocol::DenoisedKnn => "knn_accuracy",
            Protocol::TreeDemap => "demap",
            Protocol::MutualInformation => "mutual_information",
        }
    }

    fn x_label(self) -> &'static str {
        match self {
            Protocol::GlobalNoiseKnn | Protocol::DenoisedKnn => "noise on second view",
            Protocol::TreeDemap => "noise on one branch",
            Protocol::MutualInformation => "dropout probability",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown protocol `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DigitsSweep {
    pub n_points: usize,
    pub nu1: f64,
    pub nu2_levels: Vec<f64>,
}

impl Default for DigitsSweep {
    fn default() -> Self {
        Self {
            n_points: 1000,
            nu1: 1.0,
            nu2_levels: (0..=8).map(f64::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeSweep {
    /// Layout; `branch_noise` and `seed` are overwritten per cell.
    pub tree: TreeSpec,
    /// Noise on every branch other than the noisy one.
    pub base_noise: f64,
    pub noisy_branch: usize,
    pub levels: Vec<f64>,
}

impl Default for TreeSweep {
    fn default() -> Self {
        Self {
            tree: TreeSpec::default(),
            base_noise: 0.5,
            noisy_branch: 4,
            levels: (0..=5).map(f64::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiSweep {
    /// `seed` is overwritten per cell.
    pub coupled: CoupledSpec,
    /// Extra methods evaluated alongside the fusion strategies.
    pub extra_methods: Vec<DenoiseMethod>,
    pub bins: usize,
}

impl Default for MiSweep {
    fn default() -> Self {
        Self {
            coupled: CoupledSpec::default(),
            extra_methods: vec![DenoiseMethod::None, DenoiseMethod::ModalitySpecific],
            bins: eval::DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub protocols: Vec<Protocol>,
    pub strategies: Vec<FusionStrategy>,
    pub seeds: Vec<u64>,
    pub fusion: FusionConfig,
    pub embed_dims: usize,
    pub embed_t: u32,
    pub knn_k: usize,
    pub digits: DigitsSweep,
    pub tree: TreeSweep,
    pub mi: MiSweep,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            protocols: Protocol::ALL.to_vec(),
            strategies: FusionStrategy::ALL.to_vec(),
            seeds: (0..5).collect(),
            fusion: FusionConfig::default(),
            embed_dims: 20,
            embed_t: 1,
            knn_k: eval::DEFAULT_K,
            digits: DigitsSweep::default(),
            tree: TreeSweep::default(),
            mi: MiSweep::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("benchmark needs strategies and seeds".into()));
        }
        if self.embed_dims == 0 {
            return Err(Error::Config("embed_dims must be >= 1".into()));
        }
        if self.tree.noisy_branch >= self.tree.tree.branches {
            return Err(Error::Config(format!(
                "noisy branch {} out of {} branches",
                self.tree.noisy_branch, self.tree.tree.branches
            )));
        }
        self.fusion.mgd.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub protocol: Protocol,
    pub strategy: String,
    pub noise_level: f64,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:?},{},{},{:?}",
            r.protocol, r.strategy, r.noise_level, r.seed, r.metric, r.value
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub protocol: Protocol,
    pub strategy: String,
    pub noise_level: f64,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

/// Mean and sample standard deviation over seeds, per protocol, strategy and
/// noise level (in first-appearance order).
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Protocol, String, u64)> = Vec::new();
    let mut groups: BTreeMap<(Protocol, String, u64), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.protocol, r.strategy.clone(), r.noise_level.to_bits());
        if !groups.contains_key(&key) {
            keys.push(key.clone());
        }
        groups.entry(key).or_default().push(r.value);
    }
    keys.into_iter()
        .map(|key| {
            let v = &groups[&key];
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                protocol: key.0,
                strategy: key.1,
                noise_level: f64::from_bits(key.2),
                mean,
                sd,
                n,
            }
        })
        .collect()
}

/// Mean value for one protocol, strategy and noise level.
pub fn mean_of(rows: &[SweepRow], protocol: Protocol, strategy: &str, noise_level: f64) -> Option<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.protocol == protocol && r.strategy == strategy && r.noise_level == noise_level)
        .map(|r| r.value)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Metric-vs-noise line plot with one polyline per strategy.
pub fn plot_protocol(rows: &[SweepRow], protocol: Protocol) -> String {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for s in summarize(rows).into_iter().filter(|s| s.protocol == protocol) {
        match series.iter_mut().find(|(name, _)| *name == s.strategy) {
            Some((_, pts)) => pts.push((s.noise_level, s.mean)),
            None => series.push((s.strategy, vec![(s.noise_level, s.mean)])),
        }
    }
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    plot::line_plot(protocol.name(), protocol.x_label(), protocol.metric(), &series)
}

fn row(protocol: Protocol, strategy: &str, noise_level: f64, seed: u64, value: f64) -> SweepRow {
    SweepRow {
        protocol,
        strategy: strategy.to_string(),
        noise_level,
        seed,
        metric: protocol.metric().to_string(),
        value,
    }
}

fn digits_cell(cfg: &BenchmarkConfig, nu2: f64, seed: u64) -> Result<Vec<SweepRow>> {
    let want_embed = cfg.protocols.contains(&Protocol::GlobalNoiseKnn);
    let want_denoise = cfg.protocols.contains(&Protocol::DenoisedKnn);
    let (x, labels) = data::digits_subset(cfg.digits.n_points, seed)?;
    let set = data::make_noisy_pair(&x, cfg.digits.nu1, nu2, seed)?;
    let ctx = FusionContext::new(set.modality1, set.modality2, cfg.fusion)?;
    let mut embed_rows = Vec::new();
    let mut denoise_rows = Vec::new();
    for s in &cfg.strategies {
        let op = ctx.build(*s)?;
        if want_embed {
            let e = embed::diffusion_map(&op, cfg.embed_dims, cfg.embed_t)?;
            let acc = eval::knn_accuracy(e.coords.view(), &labels, cfg.knn_k, seed)?;
            embed_rows.push(row(Protocol::GlobalNoiseKnn, s.name(), nu2, seed, acc));
        }
        if want_denoise {
            let smoothed = denoise::apply_operator(&op, ctx.data(1), 1)?;
            let acc = eval::knn_accuracy(smoothed.view(), &labels, cfg.knn_k, seed)?;
            denoise_rows.push(row(Protocol::DenoisedKnn, s.name(), nu2, seed, acc));
        }
    }
    embed_rows.extend(denoise_rows);
    Ok(embed_rows)
}

fn tree_cell(cfg: &BenchmarkConfig, nu: f64, seed: u64) -> Result<Vec<SweepRow>> {
    let mut spec = cfg.tree.tree.clone();
    spec.branch_noise = vec![cfg.tree.base_noise; spec.branches];
    spec.branch_noise[cfg.tree.noisy_branch] = nu;
    spec.seed = seed;
    let set = data::make_tree(&spec)?;
    let geo = set.geodesics.as_ref().expect("tree generator emits geodesics");
    let ctx = FusionContext::new(set.modality1.clone(), set.modality2.clone(), cfg.fusion)?;
    cfg.strategies
        .iter()
        .map(|s| {
            let op = ctx.build(*s)?;
            let e = embed::diffusion_map(&op, cfg.embed_dims, cfg.embed_t)?;
            let v = eval::demap(e.coords.view(), geo)?;
            Ok(row(Protocol::TreeDemap, s.name(), nu, seed, v))
        })
        .collect()
}

fn mi_cell(cfg: &BenchmarkConfig, seed: u64) -> Result<Vec<SweepRow>> {
    let mut spec = cfg.mi.coupled.clone();
    spec.seed = seed;
    let set = data::make_coupled(&spec)?;
    let ctx = FusionContext::new(set.modality1.clone(), set.modality2.clone(), cfg.fusion)?;
    let methods: Vec<DenoiseMethod> = cfg
        .mi
        .extra_methods
        .iter()
        .copied()
        .chain(cfg.strategies.iter().map(|s| DenoiseMethod::Fused(*s)))
        .collect();
    let report = eval::mi_recovery_with(&ctx, &set, &methods, cfg.mi.bins)?;
    Ok(report
        .entries
        .iter()
        .map(|e| row(Protocol::MutualInformation, &e.strategy, spec.dropout, seed, e.value))
        .collect())
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    Digits { nu2: f64, seed: u64 },
    Tree { nu: f64, seed: u64 },
    Mi { seed: u64 },
}

/// Runs every requested protocol; rows are ordered by protocol, noise level,
/// seed and strategy.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut cells = Vec::new();
    if cfg.protocols.contains(&Protocol::GlobalNoiseKnn) || cfg.protocols.contains(&Protocol::DenoisedKnn) {
        for nu2 in &cfg.digits.nu2_levels {
            for seed in &cfg.seeds {
                cells.push(Cell::Digits { nu2: *nu2, seed: *seed });
            }
        }
    }
    if cfg.protocols.contains(&Protocol::TreeDemap) {
        for nu in &cfg.tree.levels {
            for seed in &cfg.seeds {
                cells.push(Cell::Tree { nu: *nu, seed: *seed });
            }
        }
    }
    if cfg.protocols.contains(&Protocol::MutualInformation) {
        for seed in &cfg.seeds {
            cells.push(Cell::Mi { seed: *seed });
        }
    }
    let results = par::map_slice(&cells, |cell| {
        log::debug!("benchmark cell {cell:?}");
        match *cell {
            Cell::Digits { nu2, seed } => digits_cell(cfg, nu2, seed),
            Cell::Tree { nu, seed } => tree_cell(cfg, nu, seed),
            Cell::Mi { seed } => mi_cell(cfg, seed),
        }
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    let order = |p: Protocol| cfg.protocols.iter().position(|q| *q == p).unwrap_or(usize::MAX);
    rows.retain(|r| cfg.protocols.contains(&r.protocol));
    // stable: keeps cell and strategy order within a protocol
    rows.sort_by_key(|r| order(r.protocol));
    Ok(rows)
}

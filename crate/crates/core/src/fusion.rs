//! Fusion of two modality-specific walks into one row-stochastic operator.
//!
//! The integrated operator follows four steps per modality pair:
//! multiscale-denoise each modality, build its diffusion operator, take the
//! elbow `k` of its spectral entropy curve, then reduce the elbow pair by its
//! gcd and multiply `J = P1^t1 · P2^t2`. The remaining strategies are the
//! comparison points: plain and ablated alternating diffusion, and four
//! constructions that merge the modalities before any walk is taken.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::denoise::{self, MgdConfig, MgdReport};
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DataMatrix;
use crate::operator::{self, Bandwidth, DiffusionOperator, Kernel, Markov};
use crate::par;
use crate::spectral::{self, EntropyCurve, EntropyOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionStrategy {
    Integrated,
    Alternating,
    /// MGD-denoised modalities, then alternating diffusion.
    AlternatingLocal,
    /// Entropy-elbow exponents without MGD.
    AlternatingPowered,
    Concatenation,
    DistanceSum,
    AffinitySum,
    AffinityProduct,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 8] = [
        FusionStrategy::Integrated,
        FusionStrategy::Alternating,
        FusionStrategy::AlternatingLocal,
        FusionStrategy::AlternatingPowered,
        FusionStrategy::Concatenation,
        FusionStrategy::DistanceSum,
        FusionStrategy::AffinitySum,
        FusionStrategy::AffinityProduct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionStrategy::Integrated => "integrated",
            FusionStrategy::Alternating => "alternating",
            FusionStrategy::AlternatingLocal => "alternating_local",
            FusionStrategy::AlternatingPowered => "alternating_powered",
            FusionStrategy::Concatenation => "concatenation",
            FusionStrategy::DistanceSum => "distance_sum",
            FusionStrategy::AffinitySum => "affinity_sum",
            FusionStrategy::AffinityProduct => "affinity_product",
        }
    }

    pub fn uses_mgd(self) -> bool {
        matches!(
            self,
            FusionStrategy::Integrated | FusionStrategy::AlternatingLocal
        )
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionStrategy::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

/// Which modality's walk is taken first in a product operator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionOrder {
    #[default]
    FirstThenSecond,
    SecondThenFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub bandwidth: Bandwidth,
    pub mgd: MgdConfig,
    pub entropy: EntropyOptions,
    pub order: FusionOrder,
    /// Power applied to the alternating operator `P1 P2`.
    pub alternating_t: u32,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::default(),
            mgd: MgdConfig::default(),
            entropy: EntropyOptions::default(),
            order: FusionOrder::default(),
            alternating_t: 1,
        }
    }
}

/// A fused row-stochastic operator and how it was built.
#[derive(Debug, Clone)]
pub struct IntegratedOperator {
    pub values: Array2<f64>,
    /// Powers applied to modality 1 and modality 2. For alternating
    /// strategies both equal the power of `P1 P2`; merged-data baselines
    /// report `(1, 1)`.
    pub exponents: (u32, u32),
    /// Entropy elbows before gcd reduction, when the strategy uses them.
    pub source_elbows: Option<(u32, u32)>,
    pub strategy: FusionStrategy,
    pub order: FusionOrder,
    /// Kernel bandwidths ε used (one per kernel built).
    pub bandwidths: Vec<f64>,
}

impl Markov for IntegratedOperator {
    fn matrix(&self) -> &Array2<f64> {
        &self.values
    }
}

/// JSON sidecar written next to a serialized operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSidecar {
    pub strategy: FusionStrategy,
    pub order: FusionOrder,
    pub n: usize,
    pub exponents: (u32, u32),
    pub source_elbows: Option<(u32, u32)>,
    pub bandwidths: Vec<f64>,
    pub mgd_seed: u64,
    pub mgd_degenerate_splits: Option<(usize, usize)>,
}

impl IntegratedOperator {
    pub fn sidecar(&self, cfg: &FusionConfig, mgd: Option<(&MgdReport, &MgdReport)>) -> OperatorSidecar {
        OperatorSidecar {
            strategy: self.strategy,
            order: self.order,
            n: self.values.nrows(),
            exponents: self.exponents,
            source_elbows: self.source_elbows,
            bandwidths: self.bandwidths.clone(),
            mgd_seed: cfg.mgd.seed,
            mgd_degenerate_splits: mgd.map(|(a, b)| (a.degenerate_splits, b.degenerate_splits)),
        }
    }
}

pub fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Smallest integer pair with the same ratio as the elbow pair.
pub fn reduce_exponents(k1: u32, k2: u32) -> (u32, u32) {
    let g = gcd(k1, k2);
    match (k1.checked_div(g), k2.checked_div(g)) {
        (Some(a), Some(b)) => (a, b),
        _ => (k1, k2),
    }
}

fn product_normalized(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let mut j = linalg::matmul(a.view(), b.view());
    linalg::normalize_rows(&mut j);
    j
}

fn check_same_size(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.nrows() != b.nrows() {
        return Err(Error::Alignment(format!(
            "operators have {} and {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    Ok(())
}

/// `(P1 P2)^t`.
pub fn alternating<A: Markov, B: Markov>(op1: &A, op2: &B, t: u32) -> Result<IntegratedOperator> {
    if t == 0 {
        return Err(Error::Validation("alternating: t must be positive".into()));
    }
    check_same_size(op1.matrix(), op2.matrix())?;
    let step = product_normalized(op1.matrix(), op2.matrix());
    let mut values = linalg::matrix_power(step.view(), t);
    linalg::normalize_rows(&mut values);
    Ok(IntegratedOperator {
        values,
        exponents: (t, t),
        source_elbows: None,
        strategy: FusionStrategy::Alternating,
        order: FusionOrder::FirstThenSecond,
        bandwidths: Vec::new(),
    })
}

/// `P1^t1 P2^t2` (or the reverse product), rows renormalized.
pub fn powered_product(
    op1: &DiffusionOperator,
    op2: &DiffusionOperator,
    exponents: (u32, u32),
    order: FusionOrder,
) -> Result<Array2<f64>> {
    check_same_size(op1.values(), op2.values())?;
    let (a, b) = par::join(
        || operator::power(op1, exponents.0),
        || operator::power(op2, exponents.1),
    );
    Ok(match order {
        FusionOrder::FirstThenSecond => product_normalized(a.values(), b.values()),
        FusionOrder::SecondThenFirst => product_normalized(b.values(), a.values()),
    })
}

/// Everything derived from one modality that fusion strategies share.
#[derive(Debug)]
pub struct Modality {
    pub data: DataMatrix,
    pub kernel: Kernel,
    pub operator: DiffusionOperator,
    curve: OnceLock<EntropyCurve>,
    entropy: EntropyOptions,
}

impl Modality {
    pub fn build(data: DataMatrix, bandwidth: Bandwidth, entropy: EntropyOptions) -> Result<Self> {
        let kernel = operator::gaussian_kernel(&data, bandwidth)?;
        let operator = operator::diffusion_operator(&kernel)?;
        Ok(Self {
            data,
            kernel,
            operator,
            curve: OnceLock::new(),
            entropy,
        })
    }

    pub fn entropy_curve(&self) -> Result<&EntropyCurve> {
        if let Some(c) = self.curve.get() {
            return Ok(c);
        }
        let c = spectral::select_timescale(self.operator.eigen()?, self.entropy)?;
        Ok(self.curve.get_or_init(|| c))
    }

    pub fn elbow(&self) -> Result<u32> {
        Ok(self.entropy_curve()?.elbow)
    }
}

#[derive(Debug)]
struct Denoised {
    modality: Modality,
    report: MgdReport,
}

/// Lazily computed per-modality artifacts for one aligned modality pair.
/// Safe to share across threads; each piece is computed at most once.
#[derive(Debug)]
pub struct FusionContext {
    data: [DataMatrix; 2],
    cfg: FusionConfig,
    raw: [OnceLock<Modality>; 2],
    denoised: [OnceLock<Denoised>; 2],
}

impl FusionContext {
    pub fn new(data1: DataMatrix, data2: DataMatrix, cfg: FusionConfig) -> Result<Self> {
        data1.check_aligned(&data2)?;
        if data1.rows() < 2 {
            return Err(Error::Size {
                what: "fusion needs at least two points",
                got: data1.rows(),
                need: 2,
            });
        }
        cfg.mgd.validate()?;
        Ok(Self {
            data: [data1, data2],
            cfg,
            raw: [OnceLock::new(), OnceLock::new()],
            denoised: [OnceLock::new(), OnceLock::new()],
        })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.cfg
    }

    pub fn data(&self, which: usize) -> &DataMatrix {
        &self.data[which]
    }

    pub fn raw(&self, which: usize) -> Result<&Modality> {
        if let Some(m) = self.raw[which].get() {
            return Ok(m);
        }
        let m = Modality::build(self.data[which].clone(), self.cfg.bandwidth, self.cfg.entropy)?;
        Ok(self.raw[which].get_or_init(|| m))
    }

    fn denoised_entry(&self, which: usize) -> Result<&Denoised> {
        if let Some(m) = self.denoised[which].get() {
            return Ok(m);
        }
        let out = denoise::mgd(&self.data[which], &self.cfg.mgd)?;
        let modality = Modality::build(out.data, self.cfg.bandwidth, self.cfg.entropy)?;
        let d = Denoised {
            modality,
            report: out.report,
        };
        Ok(self.denoised[which].get_or_init(|| d))
    }

    /// Modality after multiscale graph denoising.
    pub fn denoised(&self, which: usize) -> Result<&Modality> {
        Ok(&self.denoised_entry(which)?.modality)
    }

    pub fn mgd_report(&self, which: usize) -> Result<&MgdReport> {
        Ok(&self.denoised_entry(which)?.report)
    }

    /// Computes both modalities' pieces concurrently.
    fn pair<'a, F>(&'a self, f: F) -> Result<(&'a Modality, &'a Modality)>
    where
        F: Fn(&'a Self, usize) -> Result<&'a Modality> + Sync,
    {
        let (a, b) = par::join(|| f(self, 0), || f(self, 1));
        Ok((a?, b?))
    }

    fn elbow_product(
        &self,
        m1: &Modality,
        m2: &Modality,
        strategy: FusionStrategy,
    ) -> Result<IntegratedOperator> {
        let (k1, k2) = par::join(|| m1.elbow(), || m2.elbow());
        let (k1, k2) = (k1?, k2?);
        let exponents = reduce_exponents(k1, k2);
        let values = powered_product(&m1.operator, &m2.operator, exponents, self.cfg.order)?;
        Ok(IntegratedOperator {
            values,
            exponents,
            source_elbows: Some((k1, k2)),
            strategy,
            order: self.cfg.order,
            bandwidths: vec![m1.kernel.bandwidth(), m2.kernel.bandwidth()],
        })
    }

    fn alternating_of(
        &self,
        m1: &Modality,
        m2: &Modality,
        strategy: FusionStrategy,
    ) -> Result<IntegratedOperator> {
        let (a, b) = match self.cfg.order {
            FusionOrder::FirstThenSecond => (&m1.operator, &m2.operator),
            FusionOrder::SecondThenFirst => (&m2.operator, &m1.operator),
        };
        let mut op = alternating(a, b, self.cfg.alternating_t)?;
        op.strategy = strategy;
        op.order = self.cfg.order;
        op.bandwidths = vec![m1.kernel.bandwidth(), m2.kernel.bandwidth()];
        Ok(op)
    }

    fn single_kernel(&self, kernel: &Kernel, strategy: FusionStrategy, bandwidths: Vec<f64>) -> Result<IntegratedOperator> {
        let op = operator::diffusion_operator(kernel)?;
        Ok(IntegratedOperator {
            values: op.values().clone(),
            exponents: (1, 1),
            source_elbows: None,
            strategy,
            order: self.cfg.order,
            bandwidths,
        })
    }

    pub fn build(&self, strategy: FusionStrategy) -> Result<IntegratedOperator> {
        match strategy {
            FusionStrategy::Integrated => {
                let (m1, m2) = self.pair(|s, w| s.denoised(w))?;
                self.elbow_product(m1, m2, strategy)
            }
            FusionStrategy::AlternatingPowered => {
                let (m1, m2) = self.pair(|s, w| s.raw(w))?;
                self.elbow_product(m1, m2, strategy)
            }
            FusionStrategy::Alternating => {
                let (m1, m2) = self.pair(|s, w| s.raw(w))?;
                self.alternating_of(m1, m2, strategy)
            }
            FusionStrategy::AlternatingLocal => {
                let (m1, m2) = self.pair(|s, w| s.denoised(w))?;
                self.alternating_of(m1, m2, strategy)
            }
            FusionStrategy::Concatenation => {
                let joined = concatenate(
                    Axis(1),
                    &[
                        self.data[0].zscored().values().view(),
                        self.data[1].zscored().values().view(),
                    ],
                )
                .map_err(|e| Error::Internal(e.to_string()))?;
                let joined = self.data[0].with_values(joined)?;
                let k = operator::gaussian_kernel(&joined, self.cfg.bandwidth)?;
                let eps = k.bandwidth();
                self.single_kernel(&k, strategy, vec![eps])
            }
            FusionStrategy::DistanceSum => {
                let (d1, d2) = par::join(
                    || linalg::squared_distances(self.data[0].view()),
                    || linalg::squared_distances(self.data[1].view()),
                );
                let k = operator::kernel_from_sq_distances(&(d1 + d2), self.cfg.bandwidth)?;
                let eps = k.bandwidth();
                self.single_kernel(&k, strategy, vec![eps])
            }
            FusionStrategy::AffinitySum => {
                let (m1, m2) = self.pair(|s, w| s.raw(w))?;
                let k = affinity_sum(&m1.kernel, &m2.kernel)?;
                self.single_kernel(&k, strategy, vec![m1.kernel.bandwidth(), m2.kernel.bandwidth()])
            }
            FusionStrategy::AffinityProduct => {
                let (m1, m2) = self.pair(|s, w| s.raw(w))?;
                let k = affinity_product(&m1.kernel, &m2.kernel)?;
                self.single_kernel(&k, strategy, vec![m1.kernel.bandwidth(), m2.kernel.bandwidth()])
            }
        }
    }
}

/// `(K1 + K2) / 2`.
pub fn affinity_sum(k1: &Kernel, k2: &Kernel) -> Result<Kernel> {
    check_same_size(k1.values(), k2.values())?;
    let v = (k1.values() + k2.values()) * 0.5;
    Kernel::from_values(v, f64::NAN)
}

/// Elementwise `K1 ∘ K2`.
pub fn affinity_product(k1: &Kernel, k2: &Kernel) -> Result<Kernel> {
    check_same_size(k1.values(), k2.values())?;
    let v = k1.values() * k2.values();
    Kernel::from_values(v, f64::NAN)
}

/// The integrated diffusion operator of two aligned modalities.
pub fn integrated(data1: &DataMatrix, data2: &DataMatrix, cfg: &FusionConfig) -> Result<IntegratedOperator> {
    FusionContext::new(data1.clone(), data2.clone(), *cfg)?.build(FusionStrategy::Integrated)
}

/// Any fusion strategy, including the baselines and ablations.
pub fn fuse_baseline(
    data1: &DataMatrix,
    data2: &DataMatrix,
    strategy: FusionStrategy,
    cfg: &FusionConfig,
) -> Result<IntegratedOperator> {
    FusionContext::new(data1.clone(), data2.clone(), *cfg)?.build(strategy)
}

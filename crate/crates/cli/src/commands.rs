use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use idiff::data::{self, io, MultimodalSet};
use idiff::eval::{self, EvalEntry, EvalReport, Metric, SplitSpec};
use idiff::fusion::FusionContext;
use idiff::protocol::{self, Protocol};
use idiff::{denoise, embed, DataMatrix, Error, StochasticMatrix};

use crate::config::{EvalMetric, Generator, RunConfig};

/// Row sums of operators read from disk may drift by accumulated rounding.
const OPERATOR_TOL: f64 = 1e-8;

struct Out {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Out {
    fn new(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        self.written.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        self.bytes(name, text.as_bytes())
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut s = serde_json::to_string_pretty(value).context("serializing output")?;
        s.push('\n');
        self.text(name, &s)
    }

    fn matrix(&mut self, name: &str, m: &ndarray::Array2<f64>) -> anyhow::Result<()> {
        self.bytes(name, &io::encode_matrix(m))
    }

    fn finish(mut self, cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
        self.text("config.json", &cfg.to_json())?;
        for p in &self.written {
            log::info!("wrote {}", p.display());
        }
        Ok(self.written)
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> anyhow::Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("missing input: {what}")).into())
}

/// Reads a matrix by extension: `.csv` (an embedding CSV's `row_id` column
/// becomes the row ids), IDX (`.idx`, `*-ubyte`), anything else as binary.
pub fn load_points(path: &Path) -> anyhow::Result<DataMatrix> {
    let name = path.to_string_lossy();
    if name.ends_with(".csv") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let m = io::parse_csv(&text, &name)?;
        if text.starts_with("row_id") && m.ncols() > 1 {
            let ids: Vec<u64> = m.column(0).iter().map(|v| *v as u64).collect();
            let values = m.slice(ndarray::s![.., 1..]).to_owned();
            return Ok(DataMatrix::with_row_ids(values, ids)?);
        }
        return Ok(DataMatrix::new(m)?);
    }
    if name.ends_with(".idx") || name.ends_with("-ubyte") {
        return Ok(io::load_idx(path)?);
    }
    Ok(DataMatrix::new(io::load_matrix(path)?)?)
}

fn load_operator(path: &Path) -> anyhow::Result<StochasticMatrix> {
    Ok(StochasticMatrix::new(io::load_matrix(path)?, OPERATOR_TOL)?)
}

fn generate_set(cfg: &RunConfig) -> anyhow::Result<MultimodalSet> {
    Ok(match &cfg.generator {
        Generator::Digits { n_points, nu1, nu2 } => {
            let (x, labels) = data::digits_subset(*n_points, cfg.seed)?;
            data::make_noisy_pair(&x, *nu1, *nu2, cfg.seed)?.with_labels(labels)?
        }
        Generator::NoisyPair { base, nu1, nu2 } => {
            let x = load_points(base)?;
            data::make_noisy_pair(&x, *nu1, *nu2, cfg.seed)?
        }
        Generator::Tree(spec) => data::make_tree(spec)?,
        Generator::Coupled(spec) => data::make_coupled(spec)?,
    })
}

pub fn generate(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let set = generate_set(cfg)?;
    let mut out = Out::new(&cfg.out_dir)?;
    out.matrix("modality1.bin", set.modality1.values())?;
    out.matrix("modality2.bin", set.modality2.values())?;
    out.text("labels.csv", &io::labels_to_csv(&set.labels))?;
    if let Some(gt) = &set.ground_truth {
        out.matrix("ground_truth.bin", gt.values())?;
    }
    if let Some(gt) = &set.ground_truth2 {
        out.matrix("ground_truth2.bin", gt.values())?;
    }
    if let Some(g) = &set.geodesics {
        out.matrix("geodesics.bin", g)?;
    }
    out.finish(cfg)
}

pub fn mgd(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let x = load_points(required(&cfg.inputs.modality1, "modality1")?)?;
    let result = denoise::mgd(&x, &cfg.fusion.mgd)?;
    let mut out = Out::new(&cfg.out_dir)?;
    out.matrix("denoised.bin", result.data.values())?;
    out.json("mgd_report.json", &result.report)?;
    out.finish(cfg)
}

pub fn entropy(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let x = load_points(required(&cfg.inputs.modality1, "modality1")?)?;
    let m = idiff::fusion::Modality::build(x, cfg.fusion.bandwidth, cfg.fusion.entropy)?;
    let curve = m.entropy_curve()?;
    let mut out = Out::new(&cfg.out_dir)?;
    out.text("entropy.csv", &curve.to_csv())?;
    out.json(
        "entropy.json",
        &serde_json::json!({ "elbow": curve.elbow, "bandwidth": m.kernel.bandwidth() }),
    )?;
    out.finish(cfg)
}

pub fn fuse(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let a = load_points(required(&cfg.inputs.modality1, "modality1")?)?;
    let b = load_points(required(&cfg.inputs.modality2, "modality2")?)?;
    let ctx = FusionContext::new(a, b, cfg.fusion)?;
    let op = ctx.build(cfg.strategy)?;
    let mgd = if cfg.strategy.uses_mgd() {
        Some((ctx.mgd_report(0)?, ctx.mgd_report(1)?))
    } else {
        None
    };
    let mut out = Out::new(&cfg.out_dir)?;
    out.matrix("operator.bin", &op.values)?;
    out.json("operator.json", &op.sidecar(&cfg.fusion, mgd))?;
    for w in 0..2 {
        let m = if cfg.strategy.uses_mgd() { ctx.denoised(w)? } else { ctx.raw(w)? };
        out.text(&format!("entropy_modality{}.csv", w + 1), &m.entropy_curve()?.to_csv())?;
    }
    out.finish(cfg)
}

pub fn denoise_cmd(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let op = load_operator(required(&cfg.inputs.operator, "operator")?)?;
    let x = load_points(required(&cfg.inputs.modality1, "modality1")?)?;
    let y = denoise::apply_operator(&op, &x, cfg.denoise_t)?;
    let mut out = Out::new(&cfg.out_dir)?;
    out.matrix("denoised.bin", y.values())?;
    out.finish(cfg)
}

fn load_labels(cfg: &RunConfig) -> anyhow::Result<Option<Vec<i64>>> {
    cfg.inputs
        .labels
        .as_deref()
        .map(|p| io::load_labels(p).map_err(anyhow::Error::from))
        .transpose()
}

pub fn embed_cmd(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let op = load_operator(required(&cfg.inputs.operator, "operator")?)?;
    let e = embed::diffusion_map(&op, cfg.embed.dims, cfg.embed.t)?;
    let labels = load_labels(cfg)?;
    let mut out = Out::new(&cfg.out_dir)?;
    out.text("embedding.csv", &e.to_csv())?;
    out.json(
        "embedding.json",
        &serde_json::json!({
            "dims": e.dims(),
            "t": cfg.embed.t,
            "eigenvalues_used": e.eigenvalues_used,
            "trivial_dropped": e.trivial_dropped,
            "complex_pairs": e.complex_pairs,
            "svd_fallback": e.svd_fallback,
        }),
    )?;
    if e.dims() >= 2 {
        out.text("embedding.svg", &embed::scatter_2d(&e, labels.as_deref())?)?;
    }
    out.finish(cfg)
}

pub fn eval_cmd(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let x = load_points(required(&cfg.inputs.modality1, "modality1")?)?;
    let single = |metric: Metric, name: &str, value: f64, split: Option<SplitSpec>, per: Option<Vec<f64>>| EvalReport {
        metric,
        entries: vec![EvalEntry {
            strategy: name.to_string(),
            value,
            per_feature: per,
        }],
        noise: None,
        seeds: vec![cfg.seed],
        split,
        n_points: x.rows(),
    };
    let report = match cfg.eval.metric {
        EvalMetric::Knn => {
            let labels = load_labels(cfg)?
                .ok_or_else(|| Error::Config("missing input: labels".into()))?;
            let v = eval::knn_accuracy(x.view(), &labels, cfg.eval.k, cfg.seed)?;
            let split = SplitSpec {
                k: cfg.eval.k,
                test_fraction: eval::DEFAULT_TEST_FRACTION,
            };
            single(Metric::KnnAccuracy, "input", v, Some(split), None)
        }
        EvalMetric::Demap => {
            let g = io::load_matrix(required(&cfg.inputs.geodesics, "geodesics")?)?;
            let v = eval::demap(x.view(), &g)?;
            single(Metric::Demap, "input", v, None, None)
        }
        EvalMetric::Mi => {
            let y = load_points(required(&cfg.inputs.modality2, "modality2")?)?;
            let pairs = cfg.eval.pairs.unwrap_or(x.cols().min(y.cols()));
            let (mean, per) = eval::paired_mi(&x, &y, pairs, cfg.eval.bins)?;
            single(Metric::MutualInformation, "input", mean, None, Some(per))
        }
    };
    let mut out = Out::new(&cfg.out_dir)?;
    out.text("eval.json", &(report.to_json()? + "\n"))?;
    out.finish(cfg)
}

pub fn benchmark(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let rows = protocol::run_benchmark(&cfg.benchmark)?;
    let mut out = Out::new(&cfg.out_dir)?;
    out.text("benchmark.csv", &protocol::rows_to_csv(&rows))?;
    let mut summary = String::from("protocol,strategy,noise_level,mean,sd,n\n");
    for s in protocol::summarize(&rows) {
        let _ = writeln!(
            summary,
            "{},{},{:?},{:?},{:?},{}",
            s.protocol, s.strategy, s.noise_level, s.mean, s.sd, s.n
        );
    }
    out.text("summary.csv", &summary)?;
    for p in Protocol::ALL {
        if cfg.benchmark.protocols.contains(&p) {
            out.text(&format!("{}.svg", p.name()), &protocol::plot_protocol(&rows, p))?;
        }
    }
    out.finish(cfg)
}

//! `idiff`: integrated diffusion pipeline from the command line.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or configuration
//! error, 3 IO or parse error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use idiff::fusion::{FusionOrder, FusionStrategy};
use idiff::protocol::Protocol;

use crate::config::{EvalMetric, Generator, RunConfig};

#[derive(Parser)]
#[command(name = "idiff", version, about = "Integrated diffusion for multimodal data")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// First (or only) input matrix: .csv, IDX or binary.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Second input matrix.
    #[arg(long, global = true)]
    input2: Option<PathBuf>,
    /// Row-stochastic operator in binary matrix format.
    #[arg(long, global = true)]
    operator: Option<PathBuf>,
    /// One integer label per line.
    #[arg(long, global = true)]
    labels: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic multimodal set.
    Generate {
        /// digits, tree, coupled or noisy_pair.
        #[arg(long)]
        generator: Option<String>,
        #[arg(long)]
        nu1: Option<f64>,
        #[arg(long)]
        nu2: Option<f64>,
        /// Base matrix for noisy_pair.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Multiscale graph denoising of one matrix.
    Mgd {
        #[arg(long)]
        t: Option<u32>,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        max_depth: Option<usize>,
    },
    /// Spectral entropy curve and its elbow.
    Entropy {
        #[arg(long)]
        t_max: Option<u32>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Fuse two modalities into one operator.
    Fuse {
        #[arg(long)]
        strategy: Option<FusionStrategy>,
        #[arg(long, value_parser = parse_order)]
        order: Option<FusionOrder>,
        #[arg(long)]
        alternating_t: Option<u32>,
    },
    /// Apply an operator to a matrix.
    Denoise {
        #[arg(long)]
        t: Option<u32>,
    },
    /// Diffusion-map embedding of an operator.
    Embed {
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long)]
        t: Option<u32>,
    },
    /// kNN accuracy, DeMAP or mutual information.
    Eval {
        #[arg(long, value_parser = parse_metric)]
        metric: Option<EvalMetric>,
        #[arg(long)]
        geodesics: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        pairs: Option<usize>,
    },
    /// Run the benchmark protocols.
    Benchmark {
        /// Comma-separated protocol names.
        #[arg(long, value_delimiter = ',')]
        protocols: Option<Vec<Protocol>>,
        /// Comma-separated strategy names.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<FusionStrategy>>,
        /// Number of replicate seeds (0..n).
        #[arg(long)]
        replicates: Option<u64>,
    },
}

fn parse_order(s: &str) -> Result<FusionOrder, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_metric(s: &str) -> Result<EvalMetric, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn set<T>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

fn resolve(common: Common, command: &Command) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    set(&mut cfg.seed, common.seed);
    set(&mut cfg.out_dir, common.out);
    if common.input.is_some() {
        cfg.inputs.modality1 = common.input;
    }
    if common.input2.is_some() {
        cfg.inputs.modality2 = common.input2;
    }
    if common.operator.is_some() {
        cfg.inputs.operator = common.operator;
    }
    if common.labels.is_some() {
        cfg.inputs.labels = common.labels;
    }
    match command {
        Command::Generate { generator, nu1, nu2, base } => {
            if let Some(g) = generator {
                cfg.generator = match g.as_str() {
                    "digits" => Generator::default(),
                    "tree" => Generator::Tree(Default::default()),
                    "coupled" => Generator::Coupled(Default::default()),
                    "noisy_pair" => Generator::NoisyPair {
                        base: PathBuf::new(),
                        nu1: 0.0,
                        nu2: 0.0,
                    },
                    other => {
                        return Err(idiff::Error::Config(format!("unknown generator `{other}`")).into())
                    }
                };
            }
            match &mut cfg.generator {
                Generator::Digits { nu1: a, nu2: b, .. } | Generator::NoisyPair { nu1: a, nu2: b, .. } => {
                    set(a, *nu1);
                    set(b, *nu2);
                }
                _ => {}
            }
            if let (Generator::NoisyPair { base: b, .. }, Some(p)) = (&mut cfg.generator, base) {
                *b = p.clone();
            }
        }
        Command::Mgd { t, tau, clusters, max_depth } => {
            set(&mut cfg.fusion.mgd.t, *t);
            set(&mut cfg.fusion.mgd.tau, *tau);
            set(&mut cfg.fusion.mgd.c, *clusters);
            set(&mut cfg.fusion.mgd.max_depth, *max_depth);
        }
        Command::Entropy { t_max, top_k } => {
            set(&mut cfg.fusion.entropy.t_max, *t_max);
            if top_k.is_some() {
                cfg.fusion.entropy.top_k = *top_k;
            }
        }
        Command::Fuse { strategy, order, alternating_t } => {
            set(&mut cfg.strategy, *strategy);
            set(&mut cfg.fusion.order, *order);
            set(&mut cfg.fusion.alternating_t, *alternating_t);
        }
        Command::Denoise { t } => set(&mut cfg.denoise_t, *t),
        Command::Embed { dims, t } => {
            set(&mut cfg.embed.dims, *dims);
            set(&mut cfg.embed.t, *t);
        }
        Command::Eval { metric, geodesics, k, pairs } => {
            set(&mut cfg.eval.metric, *metric);
            if geodesics.is_some() {
                cfg.inputs.geodesics = geodesics.clone();
            }
            set(&mut cfg.eval.k, *k);
            if pairs.is_some() {
                cfg.eval.pairs = *pairs;
            }
        }
        Command::Benchmark { protocols, strategies, replicates } => {
            set(&mut cfg.benchmark.protocols, protocols.clone());
            set(&mut cfg.benchmark.strategies, strategies.clone());
            if let Some(n) = replicates {
                cfg.benchmark.seeds = (0..*n).collect();
            }
        }
    }
    cfg.apply_seed();
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<idiff::Error>() {
            return e.exit_code() as u8;
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
        if cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let Cli { common, command } = Cli::parse();
    let run = || -> anyhow::Result<Vec<PathBuf>> {
        let cfg = resolve(common, &command)?;
        match command {
            Command::Generate { .. } => commands::generate(&cfg),
            Command::Mgd { .. } => commands::mgd(&cfg),
            Command::Entropy { .. } => commands::entropy(&cfg),
            Command::Fuse { .. } => commands::fuse(&cfg),
            Command::Denoise { .. } => commands::denoise_cmd(&cfg),
            Command::Embed { .. } => commands::embed_cmd(&cfg),
            Command::Eval { .. } => commands::eval_cmd(&cfg),
            Command::Benchmark { .. } => commands::benchmark(&cfg),
        }
    };
    match run() {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

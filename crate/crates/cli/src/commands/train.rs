use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use ssmrf::engine::{run as run_sampler, write_chain_jsonl, write_summary_csv, Mode, SamplerConfig};
use ssmrf::{compute_stats, ModelSpec};

use crate::io::{load_dataset, load_truth, to_bytes};
use crate::manifest::RunManifest;

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Approximate,
    Exact,
}

#[derive(clap::Args)]
pub struct Args {
    /// Dataset in text or binary matrix format.
    #[arg(long)]
    data: PathBuf,
    /// TOML file with sampler settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict candidates to those of a truth or model file.
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Pin p0 instead of sampling it.
    #[arg(long)]
    fixed_p0: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    thinning: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    n_particles: Option<usize>,
    #[arg(long)]
    n_gibbs: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    momentum_alpha: Option<f64>,
    #[arg(long)]
    jump_coeff: Option<f64>,
    #[arg(long, default_value = "chain")]
    prefix: String,
}

fn build_config(args: &Args, manifest: &mut RunManifest) -> Result<SamplerConfig> {
    let mode = args.mode.map(|m| match m {
        ModeArg::Approximate => Mode::Approximate,
        ModeArg::Exact => Mode::Exact,
    });
    let mut cfg = match &args.config {
        Some(path) => {
            let text = String::from_utf8(manifest.read_input(path)?).context("config file is not UTF-8")?;
            toml::from_str::<SamplerConfig>(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None if mode == Some(Mode::Exact) => SamplerConfig::exact(),
        None => SamplerConfig::default(),
    };
    if let Some(m) = mode {
        cfg.mode = m;
    }
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { cfg.$field = v; })*
        };
    }
    set!(seed, iterations, thinning, n_particles, n_gibbs, step_size, momentum_alpha, jump_coeff);
    if args.burn_in.is_some() {
        cfg.burn_in = args.burn_in;
    }
    if args.fixed_p0.is_some() {
        cfg.fixed_p0 = args.fixed_p0;
    }
    Ok(cfg)
}

pub fn run(args: Args, out_dir: &Path, argv: &[String]) -> Result<()> {
    let mut manifest = RunManifest::start("train", argv);
    let cfg = build_config(&args, &mut manifest)?;
    let data = load_dataset(&mut manifest, &args.data)?;
    let spec = match &args.candidates {
        Some(path) => {
            let truth = load_truth(&mut manifest, path)?;
            if truth.spec.d() != data.cols() {
                bail!("candidate file has {} variables but the data has {}", truth.spec.d(), data.cols());
            }
            truth.spec
        }
        None => ModelSpec::full(data.cols()),
    };
    let stats = compute_stats(&data, &spec)?;
    manifest.config = serde_json::to_value(&cfg)?;
    manifest.seed = Some(cfg.seed);

    let chain = run_sampler(&cfg, &stats, &spec)?;
    let prefix = &args.prefix;
    manifest.write_output(
        out_dir.join(format!("{prefix}.jsonl")),
        &to_bytes(|b| write_chain_jsonl(&chain, b))?,
    )?;
    manifest.write_output(
        out_dir.join(format!("{prefix}_summary.csv")),
        &to_bytes(|b| write_summary_csv(&chain, b))?,
    )?;
    let diverged = chain.divergence.clone();
    manifest.finish(out_dir, &format!("{prefix}_manifest.json"))?;
    if let Some(msg) = diverged {
        return Err(ssmrf::Error::Divergence(msg)).context("the chain was cut short; partial outputs were written");
    }
    Ok(())
}

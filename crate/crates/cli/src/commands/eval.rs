use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::ValueEnum;
use serde_json::json;
use ssmrf::engine::{posterior_mean_model, posterior_models, read_chain_jsonl, PosteriorChain};
use ssmrf::eval::{
    cll_dataset, default_thresholds, density, pr_curve, write_metrics_csv, write_pr_csv, GroupPolicy, MetricsRow,
};
use ssmrf::rng::{substream, Stream};
use ssmrf::ModelSpec;

use crate::io::{load_dataset, load_truth, parse_shape, to_bytes};
use crate::manifest::RunManifest;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scheme {
    /// Equal-weight mixture of posterior samples.
    Bayes,
    /// Thresholded posterior-mean model.
    BayesPm,
}

#[derive(clap::Args)]
pub struct Args {
    /// Chain file written by `train`.
    #[arg(long)]
    chain: PathBuf,
    /// Held-out dataset.
    #[arg(long)]
    data: PathBuf,
    /// Truth file; adds precision/recall output.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Scheme::Bayes)]
    scheme: Scheme,
    /// Mixture size for the bayes scheme.
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Inclusion threshold for the bayes-pm scheme.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Score 3x3 patches on an image of this shape (ROWSxCOLS) instead of
    /// all variables.
    #[arg(long, value_parser = parse_shape)]
    grid: Option<(usize, usize)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "eval")]
    prefix: String,
}

pub fn run(args: Args, out_dir: &Path, argv: &[String]) -> Result<()> {
    let mut manifest = RunManifest::start("eval", argv);
    let chain_bytes = manifest.read_input(&args.chain)?;
    let samples = read_chain_jsonl(BufReader::new(chain_bytes.as_slice()))?;
    let data = load_dataset(&mut manifest, &args.data)?;
    let truth = args.truth.as_deref().map(|p| load_truth(&mut manifest, p)).transpose()?;
    let spec = match &truth {
        Some(t) if t.spec.d() != data.cols() => {
            bail!("truth has {} variables but the data has {}", t.spec.d(), data.cols())
        }
        Some(t) => t.spec.clone(),
        None => ModelSpec::full(data.cols()),
    };
    if let Some(s) = samples.first() {
        if s.biases.len() != data.cols() {
            bail!("chain has {} variables but the data has {}", s.biases.len(), data.cols());
        }
    }
    let chain = PosteriorChain::from_snapshots(&spec, samples)?;
    let policy = match args.grid {
        Some((grid_rows, grid_cols)) => GroupPolicy::Patch {
            grid_rows,
            grid_cols,
            rows: 3,
            cols: 3,
        },
        None => GroupPolicy::Full,
    };
    manifest.config = json!({
        "scheme": match args.scheme { Scheme::Bayes => "bayes", Scheme::BayesPm => "bayes-pm" },
        "k": args.k,
        "threshold": args.threshold,
        "grid": args.grid,
    });
    manifest.seed = Some(args.seed);

    let mut rng = substream(args.seed, Stream::Eval);
    let (models, method) = match args.scheme {
        Scheme::Bayes => (posterior_models(&chain, args.k.min(chain.samples.len()), &mut rng)?, "bayes"),
        Scheme::BayesPm => (vec![posterior_mean_model(&chain, args.threshold)?], "bayes-pm"),
    };
    let cll = cll_dataset(&spec, &models, &data, policy, &mut rng)?;
    let (density_mean, density_std) = density(&chain)?;

    let pr = truth
        .as_ref()
        .map(|t| pr_curve(&spec, &chain.inclusion_freq, &t.true_edges, &default_thresholds(19)))
        .transpose()?;
    let f1_at_0_5 = match &truth {
        Some(t) => Some(pr_curve(&spec, &chain.inclusion_freq, &t.true_edges, &[0.5])?[0].f1),
        None => None,
    };
    let row = MetricsRow {
        method: method.into(),
        density_mean,
        density_std,
        cll_mean: cll.mean,
        cll_std: cll.std,
        f1_at_0_5,
    };
    let prefix = &args.prefix;
    manifest.write_output(
        out_dir.join(format!("{prefix}_metrics.csv")),
        &to_bytes(|b| write_metrics_csv(&[row], b))?,
    )?;
    if let Some(points) = pr {
        manifest.write_output(out_dir.join(format!("{prefix}_pr.csv")), &to_bytes(|b| write_pr_csv(&points, b))?)?;
    }
    manifest.finish(out_dir, &format!("{prefix}_manifest.json"))
}

use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use serde_json::json;
use ssmrf::data::write_bmat;
use ssmrf::engine::{posterior_mean_model, read_chain_jsonl, PosteriorChain};
use ssmrf::rng::{substream, Stream};
use ssmrf::states::{GibbsScan, ParticleSet};
use ssmrf::{BinaryMatrix, ModelSpec};

use crate::io::{load_model, parse_shape, to_bytes};
use crate::manifest::RunManifest;

#[derive(clap::Args)]
pub struct Args {
    /// Model file (JSON).
    #[arg(long, conflicts_with = "chain", required_unless_present = "chain")]
    model: Option<PathBuf>,
    /// Chain file; samples its posterior-mean model.
    #[arg(long)]
    chain: Option<PathBuf>,
    /// Inclusion threshold when sampling from a chain.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 36)]
    count: usize,
    /// Gibbs sweeps from a uniform random start.
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Image shape (ROWSxCOLS) for the contact sheet; defaults to 12x9 for
    /// 108 variables.
    #[arg(long, value_parser = parse_shape)]
    shape: Option<(usize, usize)>,
    #[arg(long, default_value = "samples")]
    prefix: String,
}

/// Binary PGM with the samples tiled on a square-ish grid, one pixel of
/// spacing, on pixels white.
fn contact_sheet(samples: &BinaryMatrix, rows: usize, cols: usize) -> Vec<u8> {
    let n = samples.rows();
    let per_row = (n as f64).sqrt().ceil().max(1.0) as usize;
    let tiles_down = n.div_ceil(per_row).max(1);
    let width = per_row * (cols + 1) + 1;
    let height = tiles_down * (rows + 1) + 1;
    let mut pixels = vec![128u8; width * height];
    for (s, x) in samples.iter_rows().enumerate() {
        let (ty, tx) = (s / per_row, s % per_row);
        for r in 0..rows {
            for c in 0..cols {
                let (py, px) = (1 + ty * (rows + 1) + r, 1 + tx * (cols + 1) + c);
                pixels[py * width + px] = if x[r * cols + c] == 1 { 255 } else { 0 };
            }
        }
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    out
}

pub fn run(args: Args, out_dir: &Path, argv: &[String]) -> Result<()> {
    let mut manifest = RunManifest::start("sample", argv);
    let (spec, params) = match (&args.model, &args.chain) {
        (Some(path), _) => load_model(&mut manifest, path)?,
        (None, Some(path)) => {
            let bytes = manifest.read_input(path)?;
            let samples = read_chain_jsonl(BufReader::new(bytes.as_slice()))?;
            let Some(first) = samples.first() else {
                bail!("chain {} holds no samples", path.display());
            };
            let spec = ModelSpec::full(first.biases.len());
            let chain = PosteriorChain::from_snapshots(&spec, samples)?;
            let params = posterior_mean_model(&chain, args.threshold)?;
            (spec, params)
        }
        (None, None) => bail!("either --model or --chain is required"),
    };
    if args.count == 0 {
        bail!("--count must be positive");
    }
    manifest.config = json!({"count": args.count, "sweeps": args.sweeps, "threshold": args.threshold});
    manifest.seed = Some(args.seed);

    let mut rng = substream(args.seed, Stream::Sample);
    let mut particles = ParticleSet::random(args.count.max(2), spec.d(), &mut rng)?;
    particles.gibbs_sweep(&spec, &params, args.sweeps, GibbsScan::Fixed, &mut rng)?;
    let all = particles.states();
    let samples = BinaryMatrix::from_vec(args.count, spec.d(), all.as_slice()[..args.count * spec.d()].to_vec())?;

    let prefix = &args.prefix;
    manifest.write_output(out_dir.join(format!("{prefix}.bmat")), &to_bytes(|b| write_bmat(&samples, b))?)?;
    let shape = args.shape.or((spec.d() == 108).then_some((12, 9)));
    if let Some((rows, cols)) = shape {
        if rows * cols != spec.d() {
            bail!("shape {rows}x{cols} does not match {} variables", spec.d());
        }
        manifest.write_output(out_dir.join(format!("{prefix}.pgm")), &contact_sheet(&samples, rows, cols))?;
    }
    manifest.finish(out_dir, &format!("{prefix}_manifest.json"))
}

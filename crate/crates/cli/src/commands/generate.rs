use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Subcommand, ValueEnum};
use serde_json::json;
use ssmrf::data::{
    draw_training_data, gen_block, gen_lattice, mnist_ingest, write_bmat, write_text_dataset, GroundTruth, TruthFile,
};
use ssmrf::rng::{substream, Stream};
use ssmrf::BinaryMatrix;

use crate::io::to_bytes;
use crate::manifest::RunManifest;

#[derive(clap::Args)]
pub struct Args {
    #[command(subcommand)]
    kind: Kind,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Bmat,
    Text,
}

#[derive(clap::Args)]
struct Common {
    /// Number of data cases to draw.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Bmat)]
    format: Format,
    /// File name prefix for the outputs.
    #[arg(long)]
    prefix: Option<String>,
}

#[derive(Subcommand)]
enum Kind {
    /// 12-node block model with 3 groups.
    Block {
        #[command(flatten)]
        common: Common,
    },
    /// Grid with four-neighbour edges.
    Lattice {
        #[arg(long, default_value_t = 10)]
        rows: usize,
        #[arg(long, default_value_t = 10)]
        cols: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Binarized 12x9 patches from an IDX image file.
    Mnist {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, value_enum, default_value_t = Format::Bmat)]
        format: Format,
        #[arg(long, default_value = "mnist")]
        prefix: String,
    },
}

fn dataset_bytes(data: &BinaryMatrix, format: Format) -> Result<(Vec<u8>, &'static str)> {
    Ok(match format {
        Format::Bmat => (to_bytes(|b| write_bmat(data, b))?, "bmat"),
        Format::Text => (to_bytes(|b| write_text_dataset(data, b))?, "txt"),
    })
}

fn synthetic(
    truth: GroundTruth,
    common: &Common,
    default_prefix: &str,
    out_dir: &Path,
    mut manifest: RunManifest,
) -> Result<()> {
    let prefix = common.prefix.as_deref().unwrap_or(default_prefix);
    let drawn = draw_training_data(&truth, common.n, &mut substream(common.seed, Stream::Data))?;
    let truth_json = serde_json::to_vec_pretty(&TruthFile::from_truth(&truth))?;
    manifest.write_output(out_dir.join(format!("{prefix}_truth.json")), &truth_json)?;
    let (bytes, ext) = dataset_bytes(&drawn.data, common.format)?;
    manifest.write_output(out_dir.join(format!("{prefix}_data.{ext}")), &bytes)?;
    let meta = json!({
        "n": drawn.data.rows(),
        "d": drawn.data.cols(),
        "true_edges": truth.true_edges.len(),
        "draw": drawn.info,
    });
    manifest.write_output(out_dir.join(format!("{prefix}_data_meta.json")), &serde_json::to_vec_pretty(&meta)?)?;
    manifest.seed = Some(common.seed);
    manifest.finish(out_dir, &format!("{prefix}_manifest.json"))
}

pub fn run(args: Args, out_dir: &Path, argv: &[String]) -> Result<()> {
    let mut manifest = RunManifest::start("generate", argv);
    match args.kind {
        Kind::Block { common } => {
            manifest.config = json!({"kind": "block", "n": common.n});
            let truth = gen_block(&mut substream(common.seed, Stream::Init))?;
            synthetic(truth, &common, "block", out_dir, manifest)
        }
        Kind::Lattice { rows, cols, common } => {
            manifest.config = json!({"kind": "lattice", "rows": rows, "cols": cols, "n": common.n});
            let truth = gen_lattice(rows, cols, &mut substream(common.seed, Stream::Init))?;
            synthetic(truth, &common, "lattice", out_dir, manifest)
        }
        Kind::Mnist {
            images,
            labels,
            count,
            format,
            prefix,
        } => {
            manifest.config = json!({"kind": "mnist", "count": count});
            let image_bytes = manifest.read_input(&images)?;
            let label_bytes = labels.as_deref().map(|p| manifest.read_input(p)).transpose()?;
            let ingested = mnist_ingest(&image_bytes, label_bytes.as_deref(), count)?;
            let (bytes, ext) = dataset_bytes(&ingested.data, format)?;
            manifest.write_output(out_dir.join(format!("{prefix}_data.{ext}")), &bytes)?;
            let report = serde_json::to_vec_pretty(&ingested.report)?;
            manifest.write_output(out_dir.join(format!("{prefix}_pixel_report.json")), &report)?;
            if !ingested.report.violations.is_empty() {
                eprintln!(
                    "warning: {} pixels have a mean outside the allowed range, see the pixel report",
                    ingested.report.violations.len()
                );
            }
            manifest.finish(out_dir, &format!("{prefix}_manifest.json"))
        }
    }
}

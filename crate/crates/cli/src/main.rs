use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod io;
mod manifest;

#[derive(Parser)]
#[command(name = "ssmrf", version, about = "Bayesian structure learning for binary Markov random fields")]
struct Cli {
    /// Directory for every output file.
    #[arg(long, global = true, env = "SSMRF_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth model and data, or ingest MNIST images.
    Generate(commands::generate::Args),
    /// Run the sampler on a dataset.
    Train(commands::train::Args),
    /// Score a chain on held-out data and, optionally, against a truth.
    Eval(commands::eval::Args),
    /// Draw Gibbs samples from a model or a chain's posterior-mean model.
    Sample(commands::sample::Args),
}

const EXIT_FAILURE: u8 = 1;
const EXIT_FORMAT: u8 = 3;
const EXIT_CAPABILITY: u8 = 4;
const EXIT_DIVERGENCE: u8 = 5;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ssmrf::Error>() {
            return match e {
                ssmrf::Error::Format { .. } | ssmrf::Error::Json(_) => EXIT_FORMAT,
                ssmrf::Error::Capability(_) => EXIT_CAPABILITY,
                ssmrf::Error::Divergence(_) => EXIT_DIVERGENCE,
                _ => EXIT_FAILURE,
            };
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return EXIT_FORMAT;
        }
    }
    EXIT_FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let result = std::fs::create_dir_all(&cli.out_dir)
        .map_err(anyhow::Error::from)
        .and_then(|()| match cli.command {
            Command::Generate(a) => commands::generate::run(a, &cli.out_dir, &argv),
            Command::Train(a) => commands::train::run(a, &cli.out_dir, &argv),
            Command::Eval(a) => commands::eval::run(a, &cli.out_dir, &argv),
            Command::Sample(a) => commands::sample::run(a, &cli.out_dir, &argv),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

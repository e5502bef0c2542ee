use std::path::Path;

use anyhow::{Context, Result};
use ssmrf::data::{read_dataset, TruthFile};
use ssmrf::data::synth::GroundTruth;
use ssmrf::model::ModelFile;
use ssmrf::{BinaryMatrix, ModelSpec, Parameters};

use crate::manifest::RunManifest;

pub fn load_dataset(manifest: &mut RunManifest, path: &Path) -> Result<BinaryMatrix> {
    let bytes = manifest.read_input(path)?;
    read_dataset(&bytes).with_context(|| format!("parsing dataset {}", path.display()))
}

pub fn load_truth(manifest: &mut RunManifest, path: &Path) -> Result<GroundTruth> {
    let bytes = manifest.read_input(path)?;
    let file: TruthFile = serde_json::from_slice(&bytes)
        .map_err(ssmrf::Error::from)
        .with_context(|| format!("parsing truth file {}", path.display()))?;
    Ok(file.into_truth()?)
}

pub fn load_model(manifest: &mut RunManifest, path: &Path) -> Result<(ModelSpec, Parameters)> {
    let bytes = manifest.read_input(path)?;
    let file: ModelFile = serde_json::from_slice(&bytes)
        .map_err(ssmrf::Error::from)
        .with_context(|| format!("parsing model file {}", path.display()))?;
    Ok(file.into_parts()?)
}

pub fn to_bytes<F>(write: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> ssmrf::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// Parses `RxC` into `(rows, cols)`.
pub fn parse_shape(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad size {v:?}: {e}"));
    let shape = (parse(r)?, parse(c)?);
    if shape.0 == 0 || shape.1 == 0 {
        return Err("shape dimensions must be positive".into());
    }
    Ok(shape)
}

//! Dataset and ground-truth file formats.
//!
//! Text datasets hold one case per line as whitespace-separated 0/1 tokens.
//! Binary datasets start with the magic `BMAT` and two little-endian `u32`
//! values (rows, columns), followed by the cells row-major, eight per byte,
//! most significant bit first.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::model::{ModelFile, ModelSpec, Parameters};

use super::synth::GroundTruth;

const BMAT_MAGIC: &[u8; 4] = b"BMAT";

pub fn read_text_dataset<R: BufRead>(input: R) -> Result<BinaryMatrix> {
    let mut out: Option<BinaryMatrix> = None;
    let mut row = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let offset = lineno as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        row.clear();
        for tok in line.split_whitespace() {
            match tok {
                "0" => row.push(0),
                "1" => row.push(1),
                _ => return Err(Error::format(offset, format!("expected 0 or 1, found {tok:?}"))),
            }
        }
        let m = out.get_or_insert_with(|| BinaryMatrix::zeros(0, row.len()));
        if row.len() != m.cols() {
            return Err(Error::format(
                offset,
                format!("expected {} values, found {}", m.cols(), row.len()),
            ));
        }
        m.push_row(&row)?;
    }
    out.ok_or_else(|| Error::format(0, "dataset has no cases"))
}

pub fn write_text_dataset<W: Write>(data: &BinaryMatrix, mut out: W) -> Result<()> {
    let mut line = String::with_capacity(2 * data.cols());
    for row in data.iter_rows() {
        line.clear();
        for (c, &v) in row.iter().enumerate() {
            if c > 0 {
                line.push(' ');
            }
            line.push(if v == 1 { '1' } else { '0' });
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn write_bmat<W: Write>(data: &BinaryMatrix, mut out: W) -> Result<()> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::invalid(format!("{what} {v} does not fit the binary header")))
    };
    out.write_all(BMAT_MAGIC)?;
    out.write_all(&to_u32(data.rows(), "row count")?.to_le_bytes())?;
    out.write_all(&to_u32(data.cols(), "column count")?.to_le_bytes())?;
    let mut packed = vec![0u8; data.as_slice().len().div_ceil(8)];
    for (idx, &v) in data.as_slice().iter().enumerate() {
        if v == 1 {
            packed[idx / 8] |= 0x80 >> (idx % 8);
        }
    }
    out.write_all(&packed)?;
    Ok(())
}

pub fn read_bmat(bytes: &[u8]) -> Result<BinaryMatrix> {
    if bytes.len() < 12 {
        return Err(Error::format(bytes.len() as u64, "truncated binary matrix header"));
    }
    if &bytes[..4] != BMAT_MAGIC {
        return Err(Error::format(0, "missing BMAT magic"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let cells = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(4, "matrix dimensions overflow"))?;
    let body = &bytes[12..];
    let need = cells.div_ceil(8);
    if body.len() != need {
        return Err(Error::format(
            12 + body.len().min(need) as u64,
            format!("expected {need} packed bytes, found {}", body.len()),
        ));
    }
    let data = (0..cells).map(|idx| (body[idx / 8] >> (7 - idx % 8)) & 1).collect();
    BinaryMatrix::from_vec(rows, cols, data)
}

/// Reads either format, choosing by the leading magic.
pub fn read_dataset(bytes: &[u8]) -> Result<BinaryMatrix> {
    if bytes.starts_with(BMAT_MAGIC) {
        read_bmat(bytes)
    } else {
        read_text_dataset(bytes)
    }
}

/// A model file with the true edge list appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    #[serde(flatten)]
    pub model: ModelFile,
    pub true_edges: Vec<[usize; 2]>,
}

impl TruthFile {
    pub fn from_truth(truth: &GroundTruth) -> Self {
        TruthFile {
            model: ModelFile::from_parts(&truth.spec, &truth.params),
            true_edges: truth.true_edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }

    pub fn into_truth(self) -> Result<GroundTruth> {
        let (spec, params): (ModelSpec, Parameters) = self.model.into_parts()?;
        let true_edges = self
            .true_edges
            .into_iter()
            .map(|[i, j]| {
                spec.edge_index(i, j)
                    .map(|_| (i.min(j), i.max(j)))
                    .ok_or_else(|| Error::invalid(format!("true edge ({i}, {j}) is not a candidate")))
            })
            .collect::<Result<_>>()?;
        Ok(GroundTruth {
            spec,
            params,
            true_edges,
        })
    }
}

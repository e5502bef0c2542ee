//! Digit images to 108-variable binary patches: threshold at 50, 2×2 majority
//! downscale to 14×14 (ties count as on), then the centred 12-row by 9-column
//! patch starting at row 1, column 2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;

use super::idx::{parse_idx1, parse_idx3};

pub const THRESHOLD: u8 = 50;
pub const SIDE: usize = 28;
pub const HALF: usize = SIDE / 2;
pub const PATCH_ROWS: usize = 12;
pub const PATCH_COLS: usize = 9;
const ROW_OFFSET: usize = 1;
const COL_OFFSET: usize = 2;
pub const MEAN_RANGE: (f64, f64) = (1e-4, 1.0 - 1e-4);

/// One 28×28 image to its 108-value patch, row-major.
pub fn preprocess_image(pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != SIDE * SIDE {
        return Err(Error::Dimension {
            what: "image pixels",
            expected: SIDE * SIDE,
            got: pixels.len(),
        });
    }
    let on = |r: usize, c: usize| (pixels[r * SIDE + c] >= THRESHOLD) as u8;
    let mut out = Vec::with_capacity(PATCH_ROWS * PATCH_COLS);
    for r in ROW_OFFSET..ROW_OFFSET + PATCH_ROWS {
        for c in COL_OFFSET..COL_OFFSET + PATCH_COLS {
            let votes = on(2 * r, 2 * c) + on(2 * r, 2 * c + 1) + on(2 * r + 1, 2 * c) + on(2 * r + 1, 2 * c + 1);
            out.push((votes >= 2) as u8);
        }
    }
    Ok(out)
}

/// Per-pixel means over every image in the file and the pixels outside the
/// allowed range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelReport {
    pub images: usize,
    pub pixel_means: Vec<f64>,
    /// `(patch_row, patch_col, mean)` for each out-of-range pixel.
    pub violations: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnistData {
    pub data: BinaryMatrix,
    pub report: PixelReport,
}

/// Preprocesses the first `count` images. The validation report covers the
/// whole file. A labels file, when given, must hold at least as many entries.
pub fn mnist_ingest(images: &[u8], labels: Option<&[u8]>, count: usize) -> Result<MnistData> {
    let parsed = parse_idx3(images)?;
    if parsed.rows != SIDE || parsed.cols != SIDE {
        return Err(Error::format(
            8,
            format!("expected {SIDE}x{SIDE} images, found {}x{}", parsed.rows, parsed.cols),
        ));
    }
    if count > parsed.count {
        return Err(Error::invalid(format!(
            "requested {count} images but the file holds {}",
            parsed.count
        )));
    }
    if let Some(bytes) = labels {
        let labels = parse_idx1(bytes)?;
        if labels.len() < parsed.count {
            return Err(Error::invalid(format!(
                "{} labels for {} images",
                labels.len(),
                parsed.count
            )));
        }
    }
    let width = PATCH_ROWS * PATCH_COLS;
    let mut all = BinaryMatrix::zeros(0, width);
    for i in 0..parsed.count {
        all.push_row(&preprocess_image(parsed.image(i))?)?;
    }
    let pixel_means = if parsed.count > 0 { all.column_means() } else { vec![0.0; width] };
    let violations = pixel_means
        .iter()
        .enumerate()
        .filter(|(_, &m)| !(MEAN_RANGE.0..=MEAN_RANGE.1).contains(&m))
        .map(|(p, &m)| (p / PATCH_COLS, p % PATCH_COLS, m))
        .collect();
    let data = BinaryMatrix::from_vec(count, width, all.as_slice()[..count * width].to_vec())?;
    Ok(MnistData {
        data,
        report: PixelReport {
            images: parsed.count,
            pixel_means,
            violations,
        },
    })
}

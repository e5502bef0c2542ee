//! Dense binary data matrix used for datasets and sampled states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major N×d matrix of {0,1} entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BinaryMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                what: "binary matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|&v| v > 1) {
            return Err(Error::invalid(format!(
                "entry {} at row {} is not 0/1",
                data[pos],
                pos / cols.max(1)
            )));
        }
        Ok(BinaryMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension {
                    what: "matrix row",
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [u8] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u8]> {
        (0..self.rows).map(move |r| self.row(r))
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[u8]) -> Result<()> {
        if self.rows == 0 && self.cols == 0 {
            self.cols = row.len();
        }
        if row.len() != self.cols {
            return Err(Error::Dimension {
                what: "matrix row",
                expected: self.cols,
                got: row.len(),
            });
        }
        if row.iter().any(|&v| v > 1) {
            return Err(Error::invalid("row contains a non-binary entry"));
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    /// Mean of every column.
    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = vec![0u64; self.cols];
        for row in self.iter_rows() {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v as u64;
            }
        }
        let n = self.rows.max(1) as f64;
        sums.into_iter().map(|s| s as f64 / n).collect()
    }

    /// Column-wise bitsets: bit `r` of column `c` is set when entry (r, c) is 1.
    pub(crate) fn column_bitsets(&self) -> Vec<Vec<u64>> {
        let words = self.rows.div_ceil(64);
        let mut cols = vec![vec![0u64; words]; self.cols];
        for (r, row) in self.iter_rows().enumerate() {
            let (w, b) = (r / 64, r % 64);
            for (c, &v) in row.iter().enumerate() {
                if v == 1 {
                    cols[c][w] |= 1u64 << b;
                }
            }
        }
        cols
    }
}

//! Log-linear pairwise MRF over binary {0,1} variables.
//!
//! The unnormalized log-probability of a state `x` is
//! `Σ_{(i,j)} w_ij x_i x_j + Σ_i b_i x_i`; the partition function is left out.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;

const NO_EDGE: u32 = u32::MAX;

/// Variable count plus the ordered list of candidate pairs `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    d: usize,
    candidates: Vec<(usize, usize)>,
    index: Vec<u32>,
}

impl ModelSpec {
    /// All `d(d-1)/2` pairs in lexicographic order.
    pub fn full(d: usize) -> Self {
        let mut candidates = Vec::with_capacity(d * d.saturating_sub(1) / 2);
        for i in 0..d {
            for j in i + 1..d {
                candidates.push((i, j));
            }
        }
        Self::build(d, candidates)
    }

    pub fn with_candidates(d: usize, candidates: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = vec![false; d * d];
        for &(i, j) in &candidates {
            if !(i < j && j < d) {
                return Err(Error::invalid(format!(
                    "candidate ({i}, {j}) must satisfy i < j < {d}"
                )));
            }
            if std::mem::replace(&mut seen[i * d + j], true) {
                return Err(Error::invalid(format!("duplicate candidate ({i}, {j})")));
            }
        }
        Ok(Self::build(d, candidates))
    }

    fn build(d: usize, candidates: Vec<(usize, usize)>) -> Self {
        let mut index = vec![NO_EDGE; d * d];
        for (k, &(i, j)) in candidates.iter().enumerate() {
            index[i * d + j] = k as u32;
            index[j * d + i] = k as u32;
        }
        ModelSpec {
            d,
            candidates,
            index,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn candidates(&self) -> &[(usize, usize)] {
        &self.candidates
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn pair(&self, k: usize) -> (usize, usize) {
        self.candidates[k]
    }

    /// Candidate index of the unordered pair `{i, j}`, if it is a candidate.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.d || j >= self.d {
            return None;
        }
        match self.index[i * self.d + j] {
            NO_EDGE => None,
            k => Some(k as usize),
        }
    }

    pub(crate) fn check_state(&self, x: &[u8]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Dimension {
                what: "state vector",
                expected: self.d,
                got: x.len(),
            });
        }
        if x.iter().any(|&v| v > 1) {
            return Err(Error::invalid("state entries must be 0 or 1"));
        }
        Ok(())
    }
}

/// Edge weights keyed by candidate index plus one bias per variable.
/// Candidates missing from `edge_weights` have weight zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Parameters {
    pub edge_weights: BTreeMap<usize, f64>,
    pub biases: Vec<f64>,
}

impl Parameters {
    pub fn zeros(d: usize) -> Self {
        Parameters {
            edge_weights: BTreeMap::new(),
            biases: vec![0.0; d],
        }
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.edge_weights.get(&k).copied().unwrap_or(0.0)
    }

    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.biases.len() != spec.d() {
            return Err(Error::Dimension {
                what: "bias vector",
                expected: spec.d(),
                got: self.biases.len(),
            });
        }
        if let Some((&k, _)) = self.edge_weights.range(spec.n_candidates()..).next() {
            return Err(Error::invalid(format!(
                "edge weight keyed by {k} is outside the {} candidates",
                spec.n_candidates()
            )));
        }
        Ok(())
    }

    /// Dense symmetric d×d coupling matrix (zero diagonal).
    pub fn coupling_matrix(&self, spec: &ModelSpec) -> Vec<f64> {
        let d = spec.d();
        let mut w = vec![0.0; d * d];
        for (&k, &v) in &self.edge_weights {
            let (i, j) = spec.pair(k);
            w[i * d + j] = v;
            w[j * d + i] = v;
        }
        w
    }

    pub fn is_finite(&self) -> bool {
        self.edge_weights.values().all(|v| v.is_finite()) && self.biases.iter().all(|v| v.is_finite())
    }
}

/// Sufficient statistics of a training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataStats {
    pub n: usize,
    /// Σ_m x_i x_j per candidate.
    pub pair_counts: Vec<u64>,
    /// Σ_m x_i per variable.
    pub node_counts: Vec<u64>,
}

impl DataStats {
    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        if self.node_counts.len() != spec.d() {
            return Err(Error::Dimension {
                what: "node counts",
                expected: spec.d(),
                got: self.node_counts.len(),
            });
        }
        if self.pair_counts.len() != spec.n_candidates() {
            return Err(Error::Dimension {
                what: "pair counts",
                expected: spec.n_candidates(),
                got: self.pair_counts.len(),
            });
        }
        if self.n == 0 {
            return Err(Error::invalid("data statistics need at least one case"));
        }
        Ok(())
    }
}

/// Exponent of the unnormalized model, `Σ_α θ_α f_α(x)`.
pub fn log_unnormalized(spec: &ModelSpec, params: &Parameters, x: &[u8]) -> Result<f64> {
    spec.check_state(x)?;
    params.check(spec)?;
    let mut e: f64 = params
        .biases
        .iter()
        .zip(x)
        .filter(|(_, &xi)| xi == 1)
        .map(|(b, _)| b)
        .sum();
    for (&k, &w) in &params.edge_weights {
        let (i, j) = spec.pair(k);
        if x[i] == 1 && x[j] == 1 {
            e += w;
        }
    }
    Ok(e)
}

pub fn compute_stats(dataset: &BinaryMatrix, spec: &ModelSpec) -> Result<DataStats> {
    if dataset.rows() == 0 {
        return Err(Error::invalid("dataset must contain at least one case"));
    }
    if dataset.cols() != spec.d() {
        return Err(Error::Dimension {
            what: "dataset columns",
            expected: spec.d(),
            got: dataset.cols(),
        });
    }
    let cols = dataset.column_bitsets();
    let popcount = |a: &[u64]| a.iter().map(|w| w.count_ones() as u64).sum::<u64>();
    let node_counts = cols.iter().map(|c| popcount(c)).collect();
    let pair_counts = spec
        .candidates()
        .iter()
        .map(|&(i, j)| {
            cols[i]
                .iter()
                .zip(&cols[j])
                .map(|(a, b)| (a & b).count_ones() as u64)
                .sum()
        })
        .collect();
    Ok(DataStats {
        n: dataset.rows(),
        pair_counts,
        node_counts,
    })
}

/// Rewrites `Σ J_ij s_i s_j + Σ h_i s_i` over `s ∈ {-1,+1}` as a {0,1}
/// Boltzmann machine via `s = 2x - 1`. `couplings` is aligned to the
/// candidate list. The dropped constant is absorbed by normalization.
pub fn ising_to_boltzmann(spec: &ModelSpec, couplings: &[f64], fields: &[f64]) -> Result<Parameters> {
    if couplings.len() != spec.n_candidates() {
        return Err(Error::Dimension {
            what: "Ising couplings",
            expected: spec.n_candidates(),
            got: couplings.len(),
        });
    }
    if fields.len() != spec.d() {
        return Err(Error::Dimension {
            what: "Ising fields",
            expected: spec.d(),
            got: fields.len(),
        });
    }
    let mut biases: Vec<f64> = fields.iter().map(|h| 2.0 * h).collect();
    let mut edge_weights = BTreeMap::new();
    for (k, &j) in couplings.iter().enumerate() {
        if j == 0.0 {
            continue;
        }
        let (a, b) = spec.pair(k);
        edge_weights.insert(k, 4.0 * j);
        biases[a] -= 2.0 * j;
        biases[b] -= 2.0 * j;
    }
    Ok(Parameters {
        edge_weights,
        biases,
    })
}

/// JSON model file: weights aligned to `candidates`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub d: usize,
    pub candidates: Vec<[usize; 2]>,
    pub edge_weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ModelFile {
    pub fn from_parts(spec: &ModelSpec, params: &Parameters) -> Self {
        ModelFile {
            d: spec.d(),
            candidates: spec.candidates().iter().map(|&(i, j)| [i, j]).collect(),
            edge_weights: (0..spec.n_candidates()).map(|k| params.weight(k)).collect(),
            biases: params.biases.clone(),
        }
    }

    pub fn into_parts(self) -> Result<(ModelSpec, Parameters)> {
        let spec = ModelSpec::with_candidates(
            self.d,
            self.candidates.iter().map(|&[i, j]| (i, j)).collect(),
        )?;
        if self.edge_weights.len() != spec.n_candidates() {
            return Err(Error::Dimension {
                what: "edge_weights",
                expected: spec.n_candidates(),
                got: self.edge_weights.len(),
            });
        }
        let params = Parameters {
            edge_weights: self
                .edge_weights
                .iter()
                .enumerate()
                .filter(|(_, &w)| w != 0.0)
                .map(|(k, &w)| (k, w))
                .collect(),
            biases: self.biases,
        };
        params.check(&spec)?;
        Ok((spec, params))
    }
}

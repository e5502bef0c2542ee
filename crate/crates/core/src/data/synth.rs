use serde::{Deserialize, Serialize};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::model::{ising_to_boltzmann, ModelSpec, Parameters};
use crate::rng::Rng;
use crate::states::{exact_sample, SiteSampler, DEFAULT_ENUM_LIMIT};

const EDGE_SD: f64 = 0.5;
const BIAS_SD: f64 = 0.1;

/// A generated model in {0,1} form together with its true edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub spec: ModelSpec,
    pub params: Parameters,
    pub true_edges: Vec<(usize, usize)>,
}

impl GroundTruth {
    fn from_ising(spec: ModelSpec, couplings: Vec<f64>, fields: Vec<f64>) -> Result<Self> {
        let params = ising_to_boltzmann(&spec, &couplings, &fields)?;
        let true_edges = couplings
            .iter()
            .enumerate()
            .filter(|(_, &j)| j != 0.0)
            .map(|(k, _)| spec.pair(k))
            .collect();
        Ok(GroundTruth {
            spec,
            params,
            true_edges,
        })
    }

    pub fn edge_density(&self) -> f64 {
        self.true_edges.len() as f64 / self.spec.n_candidates().max(1) as f64
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("positive standard deviation")
}

/// Block model on 12 nodes in 3 groups of 4. Within-group pairs are present
/// with probability 0.8 and positively coupled, cross-group pairs with
/// probability 0.1 and either sign. Couplings are N(0, 0.5²) in Ising form
/// (absolute value within groups) and fields N(0, 0.1²).
pub fn gen_block(rng: &mut Rng) -> Result<GroundTruth> {
    let (groups, size) = (3, 4);
    let spec = ModelSpec::full(groups * size);
    let (edge, bias) = (normal(EDGE_SD), normal(BIAS_SD));
    let couplings = spec
        .candidates()
        .iter()
        .map(|&(i, j)| {
            let within = i / size == j / size;
            let p = if within { 0.8 } else { 0.1 };
            if rng.random_bool(p) {
                let w: f64 = edge.sample(rng);
                if within {
                    w.abs()
                } else {
                    w
                }
            } else {
                0.0
            }
        })
        .collect();
    let fields = (0..spec.d()).map(|_| bias.sample(rng)).collect();
    GroundTruth::from_ising(spec, couplings, fields)
}

/// `rows × cols` grid with all pairs as candidates and the four-neighbour
/// edges as the true structure, positively coupled.
pub fn gen_lattice(rows: usize, cols: usize, rng: &mut Rng) -> Result<GroundTruth> {
    if rows < 2 || cols < 2 {
        return Err(Error::invalid(format!("lattice must be at least 2x2, got {rows}x{cols}")));
    }
    let spec = ModelSpec::full(rows * cols);
    let (edge, bias) = (normal(EDGE_SD), normal(BIAS_SD));
    let neighbours = |i: usize, j: usize| {
        let (ri, ci, rj, cj) = (i / cols, i % cols, j / cols, j % cols);
        (ri == rj && cj == ci + 1) || (ci == cj && rj == ri + 1)
    };
    let couplings = spec
        .candidates()
        .iter()
        .map(|&(i, j)| {
            if neighbours(i, j) {
                let w: f64 = edge.sample(rng);
                w.abs()
            } else {
                0.0
            }
        })
        .collect();
    let fields = (0..spec.d()).map(|_| bias.sample(rng)).collect();
    GroundTruth::from_ising(spec, couplings, fields)
}

/// How a training set was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawInfo {
    /// `exact` or `gibbs`.
    pub method: String,
    /// True when the cases are only approximately distributed as the model.
    pub approximate: bool,
    pub burn_in: usize,
    pub thinning: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub data: BinaryMatrix,
    pub info: DrawInfo,
}

pub const GIBBS_BURN_IN: usize = 100_000;
pub const GIBBS_THINNING: usize = 100;

/// Draws `n` cases from the ground truth: exactly when the model can be
/// enumerated, otherwise from one long single-site Gibbs chain.
pub fn draw_training_data(truth: &GroundTruth, n: usize, rng: &mut Rng) -> Result<TrainingData> {
    if n == 0 {
        return Err(Error::invalid("at least one data case is required"));
    }
    if truth.spec.d() <= DEFAULT_ENUM_LIMIT {
        return Ok(TrainingData {
            data: exact_sample(&truth.spec, &truth.params, n, DEFAULT_ENUM_LIMIT, rng)?,
            info: DrawInfo {
                method: "exact".into(),
                approximate: false,
                burn_in: 0,
                thinning: 0,
            },
        });
    }
    Ok(TrainingData {
        data: gibbs_draws(&truth.spec, &truth.params, n, GIBBS_BURN_IN, GIBBS_THINNING, rng)?,
        info: DrawInfo {
            method: "gibbs".into(),
            approximate: true,
            burn_in: GIBBS_BURN_IN,
            thinning: GIBBS_THINNING,
        },
    })
}

/// Thinned draws from a single Gibbs chain started at a uniform random state.
pub fn gibbs_draws(
    spec: &ModelSpec,
    params: &Parameters,
    n: usize,
    burn_in: usize,
    thinning: usize,
    rng: &mut Rng,
) -> Result<BinaryMatrix> {
    params.check(spec)?;
    let d = spec.d();
    let sampler = SiteSampler::new(spec, params);
    let mut row: Vec<f64> = (0..d).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    let sweep = |row: &mut Vec<f64>, rng: &mut Rng| {
        for i in 0..d {
            row[i] = sampler.draw(i, row, rng);
        }
    };
    for _ in 0..burn_in {
        sweep(&mut row, rng);
    }
    let mut out = BinaryMatrix::zeros(0, d);
    for _ in 0..n {
        for _ in 0..thinning.max(1) {
            sweep(&mut row, rng);
        }
        let bits: Vec<u8> = row.iter().map(|&v| v as u8).collect();
        out.push_row(&bits)?;
    }
    Ok(out)
}

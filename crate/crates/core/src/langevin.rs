//! One-leapfrog-step Langevin dynamics with a diagonal preconditioner and
//! partial momentum refreshment.
//!
//! Each step runs
//!
//! ```text
//! p ← α p + β n,            n ~ N(0, I), α² + β² = 1
//! p ← p + (ε/2) C g(θ)
//! θ ← θ + ε C p
//! p ← p + (ε/2) C g(θ)
//! ```
//!
//! over the active edge weights and all biases. No Metropolis correction is
//! applied here; the exact reference sampler in [`crate::engine`] adds one.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataStats, Parameters};
use crate::rng::Rng;
use crate::states::MomentEstimates;

/// Gradient of the log posterior over the active parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamGradient {
    pub edges: BTreeMap<usize, f64>,
    pub biases: Vec<f64>,
}

impl ParamGradient {
    pub fn is_finite(&self) -> bool {
        self.edges.values().chain(&self.biases).all(|v| v.is_finite())
    }
}

/// `g_α = Σ_m f_α(x^(m)) − N·E f_α − θ_α/σ²` for every active edge and every
/// bias, with `E f_α` taken from `moments`.
pub fn grad_log_posterior(
    params: &Parameters,
    stats: &DataStats,
    moments: &MomentEstimates,
    sigma0: f64,
    sigma_b: f64,
) -> Result<ParamGradient> {
    if moments.pair_mean.len() != stats.pair_counts.len() || moments.node_mean.len() != stats.node_counts.len() {
        return Err(Error::Internal(format!(
            "moments cover {} pairs and {} nodes but the data has {} and {}",
            moments.pair_mean.len(),
            moments.node_mean.len(),
            stats.pair_counts.len(),
            stats.node_counts.len()
        )));
    }
    if params.biases.len() != stats.node_counts.len() {
        return Err(Error::Dimension {
            what: "bias vector",
            expected: stats.node_counts.len(),
            got: params.biases.len(),
        });
    }
    let n = stats.n as f64;
    let (prec0, prec_b) = (sigma0.powi(-2), sigma_b.powi(-2));
    let mut edges = BTreeMap::new();
    for (&k, &w) in &params.edge_weights {
        let (count, mean) = match (stats.pair_counts.get(k), moments.pair_mean.get(k)) {
            (Some(&c), Some(&m)) => (c as f64, m),
            _ => return Err(Error::Internal(format!("no moment for active edge {k}"))),
        };
        edges.insert(k, count - n * mean - w * prec0);
    }
    let biases = params
        .biases
        .iter()
        .zip(stats.node_counts.iter().zip(&moments.node_mean))
        .map(|(&b, (&c, &m))| c as f64 - n * m - b * prec_b)
        .collect();
    Ok(ParamGradient { edges, biases })
}

/// Auxiliary momentum keyed by the active parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub edges: BTreeMap<usize, f64>,
    pub biases: Vec<f64>,
    /// Fraction of the momentum carried across steps.
    pub alpha: f64,
    pub step_size: f64,
}

impl MomentumState {
    pub fn new(d: usize, alpha: f64, step_size: f64, rng: &mut Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("momentum alpha {alpha} is outside [0, 1]")));
        }
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::invalid(format!("step size {step_size} must be positive")));
        }
        Ok(MomentumState {
            edges: BTreeMap::new(),
            biases: (0..d).map(|_| StandardNormal.sample(rng)).collect(),
            alpha,
            step_size,
        })
    }

    pub fn beta(&self) -> f64 {
        (1.0 - self.alpha * self.alpha).max(0.0).sqrt()
    }

    /// Gives a newly activated edge a fresh N(0, 1) momentum.
    pub fn activate(&mut self, k: usize, rng: &mut Rng) {
        self.edges.insert(k, StandardNormal.sample(rng));
    }

    pub fn deactivate(&mut self, k: usize) {
        self.edges.remove(&k);
    }

    /// True when the momentum keys are exactly the active edges of `params`.
    pub fn matches(&self, params: &Parameters) -> bool {
        self.biases.len() == params.biases.len() && self.edges.keys().eq(params.edge_weights.keys())
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.edges.values().chain(&self.biases).map(|p| p * p).sum::<f64>()
    }

    /// Negates every entry (used after a rejected corrected step).
    pub fn flip(&mut self) {
        self.edges.values_mut().chain(self.biases.iter_mut()).for_each(|p| *p = -*p);
    }
}

/// `p ← α p + β n` for every entry.
pub fn refresh_momentum(mom: &mut MomentumState, rng: &mut Rng) {
    let (alpha, beta) = (mom.alpha, mom.beta());
    if beta == 0.0 {
        return;
    }
    for p in mom.edges.values_mut().chain(mom.biases.iter_mut()) {
        let n: f64 = StandardNormal.sample(rng);
        *p = alpha * *p + beta * n;
    }
}

/// How the curvature estimate is scaled with the data size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianScaling {
    /// `H = Var f + σ^-2 / N`: full-data curvature divided by the number of
    /// cases.
    #[default]
    PerDatum,
    /// `H = N Var f + σ^-2`: curvature of the full-data log posterior.
    FullData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondStatus {
    Adapting,
    Frozen,
    /// Frozen before any curvature was accumulated; scales are all one.
    FrozenIdentity,
}

/// Diagonal preconditioner `C = H̄^{-1/2}` where `H̄` is the running mean of
/// diagonal curvature estimates over the burn-in window.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    edge_scale: Vec<f64>,
    bias_scale: Vec<f64>,
    edge_accum: Vec<f64>,
    bias_accum: Vec<f64>,
    count: usize,
    status: PrecondStatus,
}

impl Preconditioner {
    pub fn identity(n_candidates: usize, d: usize) -> Self {
        Preconditioner {
            edge_scale: vec![1.0; n_candidates],
            bias_scale: vec![1.0; d],
            edge_accum: vec![0.0; n_candidates],
            bias_accum: vec![0.0; d],
            count: 0,
            status: PrecondStatus::Adapting,
        }
    }

    pub fn status(&self) -> PrecondStatus {
        self.status
    }

    pub fn is_frozen(&self) -> bool {
        self.status != PrecondStatus::Adapting
    }

    pub fn edge_scale(&self, k: usize) -> f64 {
        self.edge_scale[k]
    }

    pub fn bias_scale(&self, i: usize) -> f64 {
        self.bias_scale[i]
    }

    /// Adds one curvature estimate and refreshes the scales. Under
    /// [`HessianScaling::FullData`] it is `H_αα = N·S_α² + σ^-2`; under
    /// [`HessianScaling::PerDatum`] the same quantity divided by `N`.
    pub fn accumulate(
        &mut self,
        moments: &MomentEstimates,
        sigma0: f64,
        sigma_b: f64,
        n_cases: usize,
        scaling: HessianScaling,
    ) -> Result<()> {
        if self.is_frozen() {
            return Err(Error::Internal("preconditioner is already frozen".into()));
        }
        if moments.pair_var.len() != self.edge_accum.len() || moments.node_var.len() != self.bias_accum.len() {
            return Err(Error::Internal("moment estimates do not match the preconditioner".into()));
        }
        let n = n_cases.max(1) as f64;
        let prior_scale = match scaling {
            HessianScaling::PerDatum => n.recip(),
            HessianScaling::FullData => 1.0,
        };
        let data_scale = prior_scale * n;
        let (p0, pb) = (prior_scale * sigma0.powi(-2), prior_scale * sigma_b.powi(-2));
        for (acc, v) in self.edge_accum.iter_mut().zip(&moments.pair_var) {
            *acc += data_scale * v + p0;
        }
        for (acc, v) in self.bias_accum.iter_mut().zip(&moments.node_var) {
            *acc += data_scale * v + pb;
        }
        self.count += 1;
        let c = self.count as f64;
        let inv_sqrt = |h: f64| {
            let scale = (h / c).max(1e-300).sqrt().recip();
            if scale.is_finite() {
                scale
            } else {
                1.0
            }
        };
        for (sc, &acc) in self.edge_scale.iter_mut().zip(&self.edge_accum) {
            *sc = inv_sqrt(acc);
        }
        for (sc, &acc) in self.bias_scale.iter_mut().zip(&self.bias_accum) {
            *sc = inv_sqrt(acc);
        }
        Ok(())
    }

    /// Mean accumulated curvature for edge `k`, if any was accumulated.
    pub fn mean_edge_curvature(&self, k: usize) -> Option<f64> {
        (self.count > 0).then(|| self.edge_accum[k] / self.count as f64)
    }

    /// Stops adaptation. Freezing with nothing accumulated leaves the identity
    /// and reports [`PrecondStatus::FrozenIdentity`].
    pub fn freeze(&mut self) -> PrecondStatus {
        if !self.is_frozen() {
            self.status = if self.count == 0 {
                PrecondStatus::FrozenIdentity
            } else {
                PrecondStatus::Frozen
            };
        }
        self.status
    }
}

/// One leapfrog step. `grad_fn` is called at the current and at the proposed
/// parameters. A non-finite gradient aborts the step with
/// [`Error::Divergence`] and leaves the inputs untouched.
pub fn lmc_step<G>(
    params: &Parameters,
    mom: &MomentumState,
    precond: &Preconditioner,
    mut grad_fn: G,
) -> Result<(Parameters, MomentumState)>
where
    G: FnMut(&Parameters) -> Result<ParamGradient>,
{
    if !mom.matches(params) {
        return Err(Error::Internal("momentum keys differ from the active parameters".into()));
    }
    let eps = mom.step_size;
    let g0 = checked(grad_fn(params)?)?;
    let mut p = mom.clone();
    kick(&mut p, &g0, precond, 0.5 * eps);

    let mut theta = params.clone();
    for (k, w) in theta.edge_weights.iter_mut() {
        *w += eps * precond.edge_scale(*k) * p.edges[k];
    }
    for (i, b) in theta.biases.iter_mut().enumerate() {
        *b += eps * precond.bias_scale(i) * p.biases[i];
    }
    if !theta.is_finite() {
        return Err(Error::Divergence("parameters became non-finite".into()));
    }

    let g1 = checked(grad_fn(&theta)?)?;
    kick(&mut p, &g1, precond, 0.5 * eps);
    Ok((theta, p))
}

fn checked(g: ParamGradient) -> Result<ParamGradient> {
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::Divergence("non-finite gradient".into()))
    }
}

fn kick(p: &mut MomentumState, g: &ParamGradient, precond: &Preconditioner, half: f64) {
    for (k, pk) in p.edges.iter_mut() {
        *pk += half * precond.edge_scale(*k) * g.edges.get(k).copied().unwrap_or(0.0);
    }
    for (i, pb) in p.biases.iter_mut().enumerate() {
        *pb += half * precond.bias_scale(i) * g.biases[i];
    }
}

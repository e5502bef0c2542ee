//! The full sampler loop: hyper-parameter draws, persistent Gibbs particles,
//! one Langevin step on the continuous parameters and a sweep of edge jumps
//! per iteration.
//!
//! In exact mode the particle moments are replaced by enumeration, every
//! Langevin step gets a Metropolis correction and the edge jumps use exact
//! partition ratios. This is the reference sampler for small models.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypers::{sample_p0, sample_sigma0, HyperPriors};
use crate::langevin::{
    grad_log_posterior, lmc_step, refresh_momentum, HessianScaling, MomentumState, ParamGradient,
    PrecondStatus, Preconditioner,
};
use crate::model::{DataStats, ModelSpec, Parameters};
use crate::rjmcmc::{exact_sweep, parallel_sweep, JumpConfig, SweepCounts};
use crate::rng::{substream, Rng, Stream};
use crate::states::{
    estimate_moments, exact_summary, ExactOptions, ExactSummary, GibbsScan, ParticleSet, DEFAULT_ENUM_LIMIT,
};

/// The sampler state: slab values of the active edges (so `Y_α = 1` exactly
/// for the keys of `slab`), biases and the two hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeSlabState {
    pub slab: BTreeMap<usize, f64>,
    pub biases: Vec<f64>,
    pub p0: f64,
    pub sigma0: f64,
}

impl SpikeSlabState {
    pub fn is_active(&self, k: usize) -> bool {
        self.slab.contains_key(&k)
    }

    pub fn n_active(&self) -> usize {
        self.slab.len()
    }

    pub fn parameters(&self) -> Parameters {
        Parameters {
            edge_weights: self.slab.clone(),
            biases: self.biases.clone(),
        }
    }

    fn set_parameters(&mut self, params: Parameters) {
        self.slab = params.edge_weights;
        self.biases = params.biases;
    }

    pub fn is_finite(&self) -> bool {
        self.slab.values().chain(&self.biases).all(|v| v.is_finite()) && self.p0.is_finite() && self.sigma0.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Approximate,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub thinning: usize,
    /// Defaults to a tenth of `iterations`.
    pub burn_in: Option<usize>,
    pub n_particles: usize,
    pub n_gibbs: usize,
    pub step_size: f64,
    pub momentum_alpha: f64,
    /// Fraction of the run over which the preconditioner is averaged.
    pub precond_burnin_frac: f64,
    pub hessian_scaling: HessianScaling,
    pub jump_coeff: f64,
    pub variance_floor: f64,
    pub beta_a: f64,
    pub beta_b: f64,
    pub gamma_c: f64,
    pub gamma_d: f64,
    pub sigma_b: f64,
    pub mode: Mode,
    pub seed: u64,
    pub gibbs_scan: GibbsScan,
    pub enum_limit: usize,
    pub fixed_p0: Option<f64>,
    /// When false the edge set never changes and only the continuous
    /// parameters are sampled.
    pub structure_moves: bool,
    /// Candidate indices whose weight is recorded every post-burn-in iteration
    /// (0 while inactive).
    pub monitor: Vec<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 200_000,
            thinning: 100,
            burn_in: None,
            n_particles: 100,
            n_gibbs: 1,
            step_size: 1e-3,
            momentum_alpha: 0.9,
            precond_burnin_frac: 0.1,
            hessian_scaling: HessianScaling::default(),
            jump_coeff: 0.01,
            variance_floor: 1e-6,
            beta_a: 5.0,
            beta_b: 5.0,
            gamma_c: 5.0,
            gamma_d: 5.0,
            sigma_b: 10.0,
            mode: Mode::Approximate,
            seed: 0,
            gibbs_scan: GibbsScan::default(),
            enum_limit: DEFAULT_ENUM_LIMIT,
            fixed_p0: None,
            structure_moves: true,
            monitor: Vec::new(),
        }
    }
}

impl SamplerConfig {
    /// Defaults for the exact reference sampler. Its moves are corrected, so
    /// it can afford longer steps and wider jumps than the approximate one.
    pub fn exact() -> Self {
        SamplerConfig {
            mode: Mode::Exact,
            step_size: 1e-2,
            momentum_alpha: 0.95,
            jump_coeff: 1.0,
            ..SamplerConfig::default()
        }
    }

    pub fn priors(&self) -> HyperPriors {
        HyperPriors {
            a: self.beta_a,
            b: self.beta_b,
            c: self.gamma_c,
            d: self.gamma_d,
        }
    }

    pub fn jump(&self) -> JumpConfig {
        JumpConfig {
            jump_coeff: self.jump_coeff,
            variance_floor: self.variance_floor,
        }
    }

    pub fn burn_in_iters(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 10)
    }

    fn precond_iters(&self) -> usize {
        (self.precond_burnin_frac * self.iterations as f64).round() as usize
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        self.priors().validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("step_size", self.step_size)?;
        positive("jump_coeff", self.jump_coeff)?;
        positive("variance_floor", self.variance_floor)?;
        positive("sigma_b", self.sigma_b)?;
        if !(0.0..=1.0).contains(&self.momentum_alpha) {
            return Err(Error::invalid(format!("momentum_alpha {} is outside [0, 1]", self.momentum_alpha)));
        }
        if !(0.0..=1.0).contains(&self.precond_burnin_frac) {
            return Err(Error::invalid("precond_burnin_frac must lie in [0, 1]"));
        }
        if self.thinning == 0 {
            return Err(Error::invalid("thinning must be at least 1"));
        }
        if self.mode == Mode::Approximate && self.n_particles < 2 {
            return Err(Error::invalid("at least two particles are required"));
        }
        if self.burn_in_iters() > self.iterations {
            return Err(Error::invalid("burn-in exceeds the number of iterations"));
        }
        if let Some(p) = self.fixed_p0 {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid(format!("fixed p0 {p} is outside (0, 1)")));
            }
        }
        if let Some(&k) = self.monitor.iter().find(|&&k| k >= spec.n_candidates()) {
            return Err(Error::invalid(format!("monitored edge {k} is not a candidate")));
        }
        if self.mode == Mode::Exact && spec.d() > self.enum_limit {
            return Err(Error::Capability(format!(
                "exact mode needs enumeration over {} variables, above the limit of {}",
                spec.d(),
                self.enum_limit
            )));
        }
        Ok(())
    }
}

/// One stored posterior sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iter: usize,
    pub p0: f64,
    pub sigma0: f64,
    pub active_edges: Vec<(usize, usize, f64)>,
    pub biases: Vec<f64>,
}

impl Snapshot {
    fn capture(iter: usize, state: &SpikeSlabState, spec: &ModelSpec) -> Self {
        Snapshot {
            iter,
            p0: state.p0,
            sigma0: state.sigma0,
            active_edges: state
                .slab
                .iter()
                .map(|(&k, &a)| {
                    let (i, j) = spec.pair(k);
                    (i, j, a)
                })
                .collect(),
            biases: state.biases.clone(),
        }
    }

    pub fn parameters(&self, spec: &ModelSpec) -> Result<Parameters> {
        let mut edge_weights = BTreeMap::new();
        for &(i, j, a) in &self.active_edges {
            let k = spec
                .edge_index(i, j)
                .ok_or_else(|| Error::invalid(format!("snapshot edge ({i}, {j}) is not a candidate")))?;
            edge_weights.insert(k, a);
        }
        let params = Parameters {
            edge_weights,
            biases: self.biases.clone(),
        };
        params.check(spec)?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }
}

/// Running posterior summaries plus the thinned samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    pub d: usize,
    pub candidates: Vec<(usize, usize)>,
    pub samples: Vec<Snapshot>,
    /// Fraction of post-burn-in iterations with the edge active.
    pub inclusion_freq: Vec<f64>,
    /// Mean and variance of the edge weight over the iterations where it is
    /// active; 0 for edges that never were.
    pub cond_mean: Vec<f64>,
    pub cond_var: Vec<f64>,
    pub bias_mean: Vec<f64>,
    /// Active-edge fraction after every iteration, burn-in included.
    pub density_trace: Vec<f64>,
    pub burn_in: usize,
    pub iterations_run: usize,
    pub moves: SweepCounts,
    pub lmc_proposed: u64,
    pub lmc_accepted: u64,
    pub precond_status: Option<PrecondStatus>,
    pub divergence: Option<String>,
    pub monitor: Vec<usize>,
    pub monitor_traces: Vec<Vec<f64>>,
}

struct Accumulator {
    edges: Vec<Welford>,
    biases: Vec<Welford>,
    iterations: u64,
}

impl Accumulator {
    fn new(n_candidates: usize, d: usize) -> Self {
        Accumulator {
            edges: vec![Welford::default(); n_candidates],
            biases: vec![Welford::default(); d],
            iterations: 0,
        }
    }

    fn push<'a>(&mut self, edges: impl IntoIterator<Item = (usize, f64)>, biases: impl IntoIterator<Item = &'a f64>) {
        self.iterations += 1;
        for (k, a) in edges {
            self.edges[k].push(a);
        }
        for (w, &b) in self.biases.iter_mut().zip(biases) {
            w.push(b);
        }
    }

    fn finish(&self, chain: &mut PosteriorChain) {
        let n = self.iterations.max(1) as f64;
        chain.inclusion_freq = self.edges.iter().map(|w| w.count as f64 / n).collect();
        chain.cond_mean = self.edges.iter().map(|w| w.mean).collect();
        chain.cond_var = self.edges.iter().map(Welford::variance).collect();
        chain.bias_mean = self.biases.iter().map(|w| w.mean).collect();
    }
}

impl PosteriorChain {
    fn empty(spec: &ModelSpec, burn_in: usize, monitor: Vec<usize>) -> Self {
        PosteriorChain {
            d: spec.d(),
            candidates: spec.candidates().to_vec(),
            samples: Vec::new(),
            inclusion_freq: vec![0.0; spec.n_candidates()],
            cond_mean: vec![0.0; spec.n_candidates()],
            cond_var: vec![0.0; spec.n_candidates()],
            bias_mean: vec![0.0; spec.d()],
            density_trace: Vec::new(),
            burn_in,
            iterations_run: 0,
            moves: SweepCounts::default(),
            lmc_proposed: 0,
            lmc_accepted: 0,
            precond_status: None,
            divergence: None,
            monitor_traces: vec![Vec::new(); monitor.len()],
            monitor,
        }
    }

    /// Rebuilds the summaries from stored snapshots alone, treating every
    /// snapshot as post-burn-in.
    pub fn from_snapshots(spec: &ModelSpec, samples: Vec<Snapshot>) -> Result<Self> {
        let mut chain = PosteriorChain::empty(spec, 0, Vec::new());
        let mut acc = Accumulator::new(spec.n_candidates(), spec.d());
        let n_cand = spec.n_candidates().max(1) as f64;
        for s in &samples {
            let params = s.parameters(spec)?;
            acc.push(params.edge_weights.iter().map(|(&k, &a)| (k, a)), &params.biases);
            chain.density_trace.push(params.edge_weights.len() as f64 / n_cand);
        }
        acc.finish(&mut chain);
        chain.iterations_run = samples.len();
        chain.samples = samples;
        Ok(chain)
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::with_candidates(self.d, self.candidates.clone())
    }

    pub fn cond_std(&self) -> Vec<f64> {
        self.cond_var.iter().map(|v| v.sqrt()).collect()
    }

    /// Density trace after burn-in.
    pub fn post_burn_in_density(&self) -> &[f64] {
        &self.density_trace[self.burn_in.min(self.density_trace.len())..]
    }

    pub fn is_diverged(&self) -> bool {
        self.divergence.is_some()
    }
}

/// Draws `k` stored samples without replacement as concrete models.
pub fn posterior_models(chain: &PosteriorChain, k: usize, rng: &mut Rng) -> Result<Vec<Parameters>> {
    if k > chain.samples.len() {
        return Err(Error::invalid(format!(
            "requested {k} models but the chain stores only {} samples",
            chain.samples.len()
        )));
    }
    let spec = chain.spec()?;
    index::sample(rng, chain.samples.len(), k)
        .into_iter()
        .map(|i| chain.samples[i].parameters(&spec))
        .collect()
}

/// Edges whose inclusion frequency exceeds `threshold`, each at its
/// conditional posterior mean, with the posterior-mean biases.
pub fn posterior_mean_model(chain: &PosteriorChain, threshold: f64) -> Result<Parameters> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold {threshold} is outside (0, 1)")));
    }
    Ok(Parameters {
        edge_weights: chain
            .inclusion_freq
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f > threshold)
            .map(|(k, _)| (k, chain.cond_mean[k]))
            .collect(),
        biases: chain.bias_mean.clone(),
    })
}

pub fn run(config: &SamplerConfig, stats: &DataStats, spec: &ModelSpec) -> Result<PosteriorChain> {
    Sampler::new(config, stats, spec, None)?.run()
}

/// As [`run`] with `p0` pinned; `σ0` is still resampled.
pub fn run_fixed_p0(config: &SamplerConfig, stats: &DataStats, spec: &ModelSpec, p0: f64) -> Result<PosteriorChain> {
    let config = SamplerConfig {
        fixed_p0: Some(p0),
        ..config.clone()
    };
    run(&config, stats, spec)
}

/// As [`run`] but starting from `initial` instead of the empty graph.
pub fn run_from(
    config: &SamplerConfig,
    stats: &DataStats,
    spec: &ModelSpec,
    initial: &Parameters,
) -> Result<PosteriorChain> {
    Sampler::new(config, stats, spec, Some(initial))?.run()
}

struct Streams {
    particles: Rng,
    lmc: Rng,
    rjmcmc: Rng,
    hypers: Rng,
}

struct Sampler<'a> {
    config: &'a SamplerConfig,
    stats: &'a DataStats,
    spec: &'a ModelSpec,
    state: SpikeSlabState,
    momentum: MomentumState,
    precond: Preconditioner,
    particles: Option<ParticleSet>,
    summary: Option<ExactSummary>,
    rng: Streams,
}

impl<'a> Sampler<'a> {
    fn new(
        config: &'a SamplerConfig,
        stats: &'a DataStats,
        spec: &'a ModelSpec,
        initial: Option<&Parameters>,
    ) -> Result<Self> {
        config.validate(spec)?;
        stats.check(spec)?;
        let priors = config.priors();
        let mut init = substream(config.seed, Stream::Init);
        let mut hypers = substream(config.seed, Stream::Hypers);
        let mut particle_rng = substream(config.seed, Stream::Particles);

        let (slab, biases) = match initial {
            Some(p) => {
                p.check(spec)?;
                (p.edge_weights.clone(), p.biases.clone())
            }
            None => (BTreeMap::new(), vec![0.0; spec.d()]),
        };
        let p0 = match config.fixed_p0 {
            Some(p) => p,
            None => sample_p0(&priors, 0, 0, &mut hypers),
        };
        let sigma0 = sample_sigma0(&priors, std::iter::empty(), &mut hypers);
        let state = SpikeSlabState { slab, biases, p0, sigma0 };

        let mut momentum = MomentumState::new(spec.d(), config.momentum_alpha, config.step_size, &mut init)?;
        for &k in state.slab.keys() {
            momentum.activate(k, &mut init);
        }
        let (particles, summary) = match config.mode {
            Mode::Approximate => (
                Some(ParticleSet::random(config.n_particles, spec.d(), &mut particle_rng)?),
                None,
            ),
            Mode::Exact => (None, Some(exact_summary(spec, &state.parameters(), exact_opts(config))?)),
        };
        Ok(Sampler {
            config,
            stats,
            spec,
            state,
            momentum,
            precond: Preconditioner::identity(spec.n_candidates(), spec.d()),
            particles,
            summary,
            rng: Streams {
                particles: particle_rng,
                lmc: substream(config.seed, Stream::Lmc),
                rjmcmc: substream(config.seed, Stream::Rjmcmc),
                hypers,
            },
        })
    }

    fn run(mut self) -> Result<PosteriorChain> {
        let cfg = self.config;
        let burn_in = cfg.burn_in_iters();
        let precond_iters = cfg.precond_iters();
        let mut chain = PosteriorChain::empty(self.spec, burn_in, cfg.monitor.clone());
        let mut acc = Accumulator::new(self.spec.n_candidates(), self.spec.d());
        let n_cand = self.spec.n_candidates().max(1) as f64;

        for t in 0..cfg.iterations {
            if t == precond_iters {
                self.precond.freeze();
            }
            let step = match cfg.mode {
                Mode::Approximate => self.approximate_iteration(&mut chain),
                Mode::Exact => self.exact_iteration(&mut chain),
            };
            match step {
                Ok(()) => {}
                Err(Error::Divergence(msg)) => {
                    chain.divergence = Some(format!("iteration {t}: {msg}"));
                    break;
                }
                Err(e) => return Err(e),
            }
            if !self.state.is_finite() {
                chain.divergence = Some(format!("iteration {t}: non-finite state"));
                break;
            }
            debug_assert!(self.momentum.matches(&self.state.parameters()));

            chain.iterations_run = t + 1;
            chain.density_trace.push(self.state.n_active() as f64 / n_cand);
            if t >= burn_in {
                acc.push(self.state.slab.iter().map(|(&k, &a)| (k, a)), &self.state.biases);
                for (trace, &k) in chain.monitor_traces.iter_mut().zip(&cfg.monitor) {
                    trace.push(self.state.slab.get(&k).copied().unwrap_or(0.0));
                }
                if (t + 1 - burn_in).is_multiple_of(cfg.thinning) {
                    chain.samples.push(Snapshot::capture(t + 1, &self.state, self.spec));
                }
            }
        }
        if !self.precond.is_frozen() {
            self.precond.freeze();
        }
        chain.precond_status = Some(self.precond.status());
        acc.finish(&mut chain);
        Ok(chain)
    }

    fn update_hypers(&mut self) {
        let priors = self.config.priors();
        let active = self.state.n_active();
        if self.config.fixed_p0.is_none() {
            let inactive = self.spec.n_candidates() - active;
            self.state.p0 = sample_p0(&priors, active, inactive, &mut self.rng.hypers);
        }
        self.state.sigma0 = sample_sigma0(&priors, self.state.slab.values(), &mut self.rng.hypers);
    }

    fn approximate_iteration(&mut self, chain: &mut PosteriorChain) -> Result<()> {
        let cfg = self.config;
        self.update_hypers();
        let params = self.state.parameters();
        let particles = self.particles.as_mut().expect("approximate mode keeps particles");
        particles.gibbs_sweep(self.spec, &params, cfg.n_gibbs, cfg.gibbs_scan, &mut self.rng.particles)?;
        let moments = estimate_moments(particles, self.spec)?;
        if !self.precond.is_frozen() {
            self.precond
                .accumulate(&moments, self.state.sigma0, cfg.sigma_b, self.stats.n, cfg.hessian_scaling)?;
        }

        refresh_momentum(&mut self.momentum, &mut self.rng.lmc);
        let (sigma0, sigma_b, stats) = (self.state.sigma0, cfg.sigma_b, self.stats);
        let (theta, mom) = lmc_step(&params, &self.momentum, &self.precond, |p| {
            grad_log_posterior(p, stats, &moments, sigma0, sigma_b)
        })?;
        chain.lmc_proposed += 1;
        chain.lmc_accepted += 1;
        self.state.set_parameters(theta);
        self.momentum = mom;

        if cfg.structure_moves {
            let counts = parallel_sweep(
                &mut self.state,
                &mut self.momentum,
                self.stats,
                &moments,
                particles.n(),
                &cfg.jump(),
                &mut self.rng.rjmcmc,
            );
            chain.moves.merge(&counts);
        }
        Ok(())
    }

    fn exact_iteration(&mut self, chain: &mut PosteriorChain) -> Result<()> {
        let cfg = self.config;
        self.update_hypers();
        let params = self.state.parameters();
        let current = self.summary.take().expect("exact mode keeps a summary");
        if !self.precond.is_frozen() {
            self.precond
                .accumulate(&current.moments, self.state.sigma0, cfg.sigma_b, self.stats.n, cfg.hessian_scaling)?;
        }

        refresh_momentum(&mut self.momentum, &mut self.rng.lmc);
        let (sigma0, sigma_b, stats, spec) = (self.state.sigma0, cfg.sigma_b, self.stats, self.spec);
        let opts = exact_opts(cfg);
        let mut proposed: Option<ExactSummary> = None;
        let mut first = true;
        let step = lmc_step(&params, &self.momentum, &self.precond, |p| -> Result<ParamGradient> {
            if first {
                first = false;
                return grad_log_posterior(p, stats, &current.moments, sigma0, sigma_b);
            }
            let s = exact_summary(spec, p, opts)?;
            let g = grad_log_posterior(p, stats, &s.moments, sigma0, sigma_b);
            proposed = Some(s);
            g
        });
        let (theta, mom) = step?;
        let proposed = proposed.expect("second gradient evaluation");
        chain.lmc_proposed += 1;

        let h_old = -log_posterior(&params, stats, current.log_z, sigma0, sigma_b) + self.momentum.kinetic_energy();
        let h_new = -log_posterior(&theta, stats, proposed.log_z, sigma0, sigma_b) + mom.kinetic_energy();
        let log_accept = h_old - h_new;
        let mut summary = if log_accept.is_finite() && (log_accept >= 0.0 || self.rng.lmc.random::<f64>().ln() < log_accept)
        {
            chain.lmc_accepted += 1;
            self.state.set_parameters(theta);
            self.momentum = mom;
            proposed
        } else {
            self.momentum.flip();
            current
        };

        if cfg.structure_moves {
            let counts = exact_sweep(
                &mut self.state,
                &mut self.momentum,
                self.spec,
                self.stats,
                &mut summary,
                &cfg.jump(),
                cfg.enum_limit,
                &mut self.rng.rjmcmc,
            )?;
            chain.moves.merge(&counts);
        }
        self.summary = Some(summary);
        Ok(())
    }
}

fn exact_opts(config: &SamplerConfig) -> ExactOptions {
    ExactOptions {
        limit: config.enum_limit,
        state_probs: false,
    }
}

/// Log posterior density of the continuous parameters for a fixed edge set,
/// up to a constant.
pub fn log_posterior(params: &Parameters, stats: &DataStats, log_z: f64, sigma0: f64, sigma_b: f64) -> f64 {
    let data: f64 = params
        .edge_weights
        .iter()
        .map(|(&k, &w)| w * stats.pair_counts[k] as f64)
        .chain(params.biases.iter().zip(&stats.node_counts).map(|(&b, &c)| b * c as f64))
        .sum();
    let slab: f64 = params.edge_weights.values().map(|w| w * w).sum::<f64>() / (2.0 * sigma0 * sigma0);
    let bias: f64 = params.biases.iter().map(|b| b * b).sum::<f64>() / (2.0 * sigma_b * sigma_b);
    data - stats.n as f64 * log_z - slab - bias
}

/// Writes one JSON object per stored sample.
pub fn write_chain_jsonl<W: Write>(chain: &PosteriorChain, mut out: W) -> Result<()> {
    for s in &chain.samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_chain_jsonl<R: BufRead>(input: R) -> Result<Vec<Snapshot>> {
    let mut samples = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Snapshot = serde_json::from_str(&line)
            .map_err(|e| Error::format(lineno as u64 + 1, format!("bad chain record: {e}")))?;
        samples.push(s);
    }
    Ok(samples)
}

/// `edge_i,edge_j,inclusion_freq,cond_mean,cond_std`, one row per candidate.
pub fn write_summary_csv<W: Write>(chain: &PosteriorChain, mut out: W) -> Result<()> {
    writeln!(out, "edge_i,edge_j,inclusion_freq,cond_mean,cond_std")?;
    for (k, &(i, j)) in chain.candidates.iter().enumerate() {
        writeln!(
            out,
            "{i},{j},{},{},{}",
            chain.inclusion_freq[k],
            chain.cond_mean[k],
            chain.cond_var[k].sqrt()
        )?;
    }
    Ok(())
}

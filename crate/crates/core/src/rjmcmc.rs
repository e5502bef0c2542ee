//! Reversible-jump edge moves.
//!
//! An inactive edge proposes `A = a` from a truncated Gaussian on `[−Δ, Δ]`
//! and an active edge with `|A| < Δ` proposes its removal. The partition
//! function ratio in the acceptance probability is replaced by a second-order
//! Taylor expansion in `a` whose coefficients are the particle mean and
//! variance of the edge feature, with a multiplicative bias correction:
//!
//! ```text
//! R̃(a) = exp(−N a f̄ − N a² S² / 2) · (1 + N² a² S² / (2n))^-1
//! ```
//!
//! [`parallel_sweep`] evaluates every eligible edge against one frozen set of
//! moments. [`exact_sweep`] is the reference kernel: exact moments, exact
//! ratios, one edge at a time.

use std::f64::consts::PI;

use rand::{Rng as _, RngCore};
use serde::{Deserialize, Serialize};

use crate::engine::SpikeSlabState;
use crate::error::Result;
use crate::langevin::MomentumState;
use crate::model::{DataStats, ModelSpec};
use crate::rng::{item_stream, Rng};
use crate::states::{exact_summary, ExactOptions, ExactSummary, MomentEstimates};
use crate::truncnorm::TruncatedNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Add,
    Delete,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpProposal {
    pub edge: usize,
    pub direction: Direction,
    pub a: f64,
    pub delta: f64,
    pub proposal_mu: f64,
    pub proposal_var: f64,
    pub log_q: f64,
    /// The truncated normal had negligible mass; `a` and `log_q` come from the
    /// uniform density on `[−Δ, Δ]`.
    pub uniform_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub log_r_tilde: f64,
    pub r_tilde: f64,
    /// `N² a² S² / n`, the leading term of `Var(R̃ / R)`.
    pub rel_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpConfig {
    pub jump_coeff: f64,
    pub variance_floor: f64,
}

impl Default for JumpConfig {
    fn default() -> Self {
        JumpConfig {
            jump_coeff: 0.01,
            variance_floor: 1e-6,
        }
    }
}

/// `Δ = c / sqrt(N · Var f)`, with the variance floored.
pub fn jump_width(n_cases: usize, feat_var: f64, c_jump: f64, variance_floor: f64) -> f64 {
    c_jump / (n_cases as f64 * feat_var.max(variance_floor)).sqrt()
}

/// Log of the Taylor estimate before bias correction: `−N a f̄ − N a² S²/2`.
pub fn log_r_uncorrected(a: f64, f_mean: f64, f_var: f64, n_cases: usize) -> f64 {
    let n = n_cases as f64;
    -n * a * f_mean - 0.5 * n * a * a * f_var
}

/// Bias-corrected estimate of `(Z(without edge) / Z(with edge at a))^N` from
/// `n_particles` samples of the model without the edge. For a deletion pass
/// `−a` and the moments of the model that contains the edge.
pub fn r_tilde(a: f64, f_mean: f64, f_var: f64, n_cases: usize, n_particles: usize) -> RatioEstimate {
    let n = n_cases as f64;
    let rel_variance = n * n * a * a * f_var / n_particles as f64;
    let correction = (0.5 * rel_variance).ln_1p().max(0.0);
    let log_r_tilde = log_r_uncorrected(a, f_mean, f_var, n_cases) - correction;
    RatioEstimate {
        log_r_tilde,
        r_tilde: log_r_tilde.exp(),
        rel_variance,
    }
}

/// Truncated Gaussian proposal `q ∝ exp(−a² P / 2 + a L)` on `[−Δ, Δ]`, with
/// `P = σ0^-2 + N Var f` and `L = Σ_m f − N E f` (the gradient at zero weight).
pub fn proposal_density(
    data_count: f64,
    n_cases: usize,
    model_mean: f64,
    model_var: f64,
    sigma0: f64,
    delta: f64,
) -> (TruncatedNormal, f64, f64) {
    let n = n_cases as f64;
    let precision = sigma0.powi(-2) + n * model_var;
    let mu = (data_count - n * model_mean) / precision;
    let var = precision.recip();
    (TruncatedNormal::new(mu, var, -delta, delta), mu, var)
}

/// Builds the optimal proposal for `edge` from particle moments. Without
/// `current_a` this is an add move and `a` is drawn; with `current_a` it is a
/// delete move and the density of the reverse add is evaluated at the current
/// weight, using `E f ≈ f̄ − a S²` and `Var f ≈ S²`.
#[allow(clippy::too_many_arguments)]
pub fn optimal_proposal(
    edge: usize,
    stats: &DataStats,
    moments: &MomentEstimates,
    sigma0: f64,
    delta: f64,
    current_a: Option<f64>,
    variance_floor: f64,
    rng: &mut Rng,
) -> JumpProposal {
    let s2 = moments.pair_var[edge].max(variance_floor);
    let count = stats.pair_counts[edge] as f64;
    match current_a {
        None => {
            let (q, mu, var) = proposal_density(count, stats.n, moments.pair_mean[edge], s2, sigma0, delta);
            let a = q.sample(rng);
            JumpProposal {
                edge,
                direction: Direction::Add,
                a,
                delta,
                proposal_mu: mu,
                proposal_var: var,
                log_q: q.log_density(a),
                uniform_fallback: q.is_uniform_fallback(),
            }
        }
        Some(a) => {
            let mean = moments.pair_mean[edge] - a * s2;
            let (q, mu, var) = proposal_density(count, stats.n, mean, s2, sigma0, delta);
            JumpProposal {
                edge,
                direction: Direction::Delete,
                a,
                delta,
                proposal_mu: mu,
                proposal_var: var,
                log_q: q.log_density(a),
                uniform_fallback: q.is_uniform_fallback(),
            }
        }
    }
}

/// `ln p0 + ln N(a; 0, σ0²) − ln(1 − p0)`.
fn log_prior_odds(a: f64, p0: f64, sigma0: f64) -> f64 {
    p0.ln() - (1.0 - p0).ln() - 0.5 * (2.0 * PI).ln() - sigma0.ln() - 0.5 * (a / sigma0).powi(2)
}

/// Log of the Metropolis–Hastings ratio for a jump. For `Add`, `log_ratio`
/// estimates `N ln(Z_without / Z_with(a))` and the result is `ln Q*(a)`. For
/// `Delete`, `log_ratio` estimates `N ln(Z_with(a) / Z_without)` and the result
/// is `ln(1/Q*(a))`. `log_q` is the add-proposal density at `a` in both cases.
pub fn log_acceptance_ratio(
    direction: Direction,
    a: f64,
    log_ratio: f64,
    data_count: f64,
    p0: f64,
    sigma0: f64,
    log_q: f64,
) -> f64 {
    let forward = a * data_count + log_prior_odds(a, p0, sigma0) - log_q;
    match direction {
        Direction::Add => forward + log_ratio,
        Direction::Delete => -forward + log_ratio,
    }
}

/// Acceptance probability `min(1, ·)` of [`log_acceptance_ratio`]; non-finite
/// terms reject the move.
pub fn acceptance(
    direction: Direction,
    a: f64,
    log_ratio: f64,
    data_count: f64,
    p0: f64,
    sigma0: f64,
    log_q: f64,
) -> f64 {
    let lr = log_acceptance_ratio(direction, a, log_ratio, data_count, p0, sigma0, log_q);
    if lr.is_nan() {
        0.0
    } else {
        lr.min(0.0).exp()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepCounts {
    pub add_proposed: u64,
    pub add_accepted: u64,
    pub delete_proposed: u64,
    pub delete_accepted: u64,
    /// Moves rejected because a term of the acceptance ratio was not finite.
    pub rejected_nonfinite: u64,
}

impl SweepCounts {
    pub fn merge(&mut self, other: &SweepCounts) {
        self.add_proposed += other.add_proposed;
        self.add_accepted += other.add_accepted;
        self.delete_proposed += other.delete_proposed;
        self.delete_accepted += other.delete_accepted;
        self.rejected_nonfinite += other.rejected_nonfinite;
    }
}

enum Decision {
    Keep,
    Add { a: f64, momentum: f64 },
    Delete,
}

/// Proposes a jump for every eligible edge against one frozen set of particle
/// moments and applies the accepted ones. Each edge draws from its own
/// substream so the outcome does not depend on evaluation order.
#[allow(clippy::too_many_arguments)]
pub fn parallel_sweep(
    state: &mut SpikeSlabState,
    momentum: &mut MomentumState,
    stats: &DataStats,
    moments: &MomentEstimates,
    n_particles: usize,
    config: &JumpConfig,
    rng: &mut Rng,
) -> SweepCounts {
    let sweep_seed = rng.next_u64();
    let mut counts = SweepCounts::default();
    let decisions: Vec<(usize, Decision)> = (0..stats.pair_counts.len())
        .map(|k| {
            let mut r = item_stream(sweep_seed, k);
            let d = decide_approx(k, state, stats, moments, n_particles, config, &mut r, &mut counts);
            (k, d)
        })
        .collect();
    for (k, d) in decisions {
        match d {
            Decision::Keep => {}
            Decision::Add { a, momentum: p } => {
                state.slab.insert(k, a);
                momentum.edges.insert(k, p);
            }
            Decision::Delete => {
                state.slab.remove(&k);
                momentum.deactivate(k);
            }
        }
    }
    counts
}

#[allow(clippy::too_many_arguments)]
fn decide_approx(
    k: usize,
    state: &SpikeSlabState,
    stats: &DataStats,
    moments: &MomentEstimates,
    n_particles: usize,
    config: &JumpConfig,
    rng: &mut Rng,
    counts: &mut SweepCounts,
) -> Decision {
    let s2 = moments.pair_var[k].max(config.variance_floor);
    let delta = jump_width(stats.n, s2, config.jump_coeff, config.variance_floor);
    let count = stats.pair_counts[k] as f64;
    match state.slab.get(&k) {
        None => {
            counts.add_proposed += 1;
            let prop = optimal_proposal(k, stats, moments, state.sigma0, delta, None, config.variance_floor, rng);
            let ratio = r_tilde(prop.a, moments.pair_mean[k], s2, stats.n, n_particles);
            let lr = log_acceptance_ratio(Direction::Add, prop.a, ratio.log_r_tilde, count, state.p0, state.sigma0, prop.log_q);
            if lr.is_nan() {
                counts.rejected_nonfinite += 1;
                return Decision::Keep;
            }
            if accept(lr, rng) {
                counts.add_accepted += 1;
                Decision::Add {
                    a: prop.a,
                    momentum: rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng),
                }
            } else {
                Decision::Keep
            }
        }
        Some(&a) if a.abs() < delta => {
            counts.delete_proposed += 1;
            let prop = optimal_proposal(k, stats, moments, state.sigma0, delta, Some(a), config.variance_floor, rng);
            let ratio = r_tilde(-a, moments.pair_mean[k], s2, stats.n, n_particles);
            let lr = log_acceptance_ratio(Direction::Delete, a, ratio.log_r_tilde, count, state.p0, state.sigma0, prop.log_q);
            if lr.is_nan() {
                counts.rejected_nonfinite += 1;
                return Decision::Keep;
            }
            if accept(lr, rng) {
                counts.delete_accepted += 1;
                Decision::Delete
            } else {
                Decision::Keep
            }
        }
        Some(_) => Decision::Keep,
    }
}

fn accept(log_ratio: f64, rng: &mut Rng) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// `E f` of a 0/1 feature after removing weight `a` from it, by exact
/// reweighting of `P(f = 1)` under the model that contains the edge.
pub fn reduced_mean(mean_with_edge: f64, a: f64) -> f64 {
    let p = mean_with_edge;
    if p <= 0.0 {
        return 0.0;
    }
    p / (p + (1.0 - p) * a.exp())
}

/// `N ln(Z_with(a) / Z_without)` given `P(f = 1)` under the model without the
/// edge; exact because the feature is 0/1.
pub fn exact_log_ratio_with(n_cases: usize, mean_without: f64, a: f64) -> f64 {
    n_cases as f64 * (mean_without * a.exp_m1()).ln_1p()
}

/// Sequential exact reference kernel: every candidate in turn, exact reduced
/// moments for the proposal, exact partition ratios in the acceptance, and a
/// fresh enumeration after each accepted move. `summary` must describe the
/// current parameters and is kept in sync.
#[allow(clippy::too_many_arguments)]
pub fn exact_sweep(
    state: &mut SpikeSlabState,
    momentum: &mut MomentumState,
    spec: &ModelSpec,
    stats: &DataStats,
    summary: &mut ExactSummary,
    config: &JumpConfig,
    enum_limit: usize,
    rng: &mut Rng,
) -> Result<SweepCounts> {
    let mut counts = SweepCounts::default();
    let n = stats.n;
    for k in 0..spec.n_candidates() {
        let count = stats.pair_counts[k] as f64;
        let p_model = summary.moments.pair_mean[k];
        let moved = match state.slab.get(&k).copied() {
            None => {
                let var = (p_model * (1.0 - p_model)).max(config.variance_floor);
                let delta = jump_width(n, var, config.jump_coeff, config.variance_floor);
                let (q, _, _) = proposal_density(count, n, p_model, var, state.sigma0, delta);
                counts.add_proposed += 1;
                let a = q.sample(rng);
                let log_ratio = -exact_log_ratio_with(n, p_model, a);
                let lr = log_acceptance_ratio(Direction::Add, a, log_ratio, count, state.p0, state.sigma0, q.log_density(a));
                if lr.is_nan() {
                    counts.rejected_nonfinite += 1;
                    false
                } else if accept(lr, rng) {
                    counts.add_accepted += 1;
                    state.slab.insert(k, a);
                    momentum.activate(k, rng);
                    true
                } else {
                    false
                }
            }
            Some(a) => {
                let p0m = reduced_mean(p_model, a);
                let var = (p0m * (1.0 - p0m)).max(config.variance_floor);
                let delta = jump_width(n, var, config.jump_coeff, config.variance_floor);
                if a.abs() >= delta {
                    false
                } else {
                    counts.delete_proposed += 1;
                    let (q, _, _) = proposal_density(count, n, p0m, var, state.sigma0, delta);
                    let log_ratio = exact_log_ratio_with(n, p0m, a);
                    let lr = log_acceptance_ratio(Direction::Delete, a, log_ratio, count, state.p0, state.sigma0, q.log_density(a));
                    if lr.is_nan() {
                        counts.rejected_nonfinite += 1;
                        false
                    } else if accept(lr, rng) {
                        counts.delete_accepted += 1;
                        state.slab.remove(&k);
                        momentum.deactivate(k);
                        true
                    } else {
                        false
                    }
                }
            }
        };
        if moved {
            *summary = exact_summary(spec, &state.parameters(), ExactOptions { limit: enum_limit, state_probs: false })?;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn jump_width_examples() {
        assert!((jump_width(100, 0.25, 0.01, 1e-6) - 0.002).abs() < 1e-15);
        assert!((jump_width(1, 1.0, 0.01, 1e-6) - 0.01).abs() < 1e-15);
        let r = jump_width(200, 0.3, 0.01, 1e-6) / jump_width(100, 0.3, 0.01, 1e-6);
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(jump_width(100, 0.0, 0.01, 1e-6).is_finite());
    }

    #[test]
    fn r_tilde_examples() {
        let r = r_tilde(0.0, 0.4, 0.24, 100, 100);
        assert_eq!(r.r_tilde, 1.0);
        assert_eq!(r.rel_variance, 0.0);

        let r = r_tilde(0.01, 0.4, 0.24, 100, 100);
        // N a² S² / 2 = N² a² S² / (2n) = 0.0012
        let expected = (-0.4f64 - 0.0012).exp() / (1.0 + 0.0012);
        assert!((r.r_tilde - expected).abs() < 1e-12 * expected);
        assert!((r.r_tilde - 0.668714).abs() < 1e-6);
        assert!((r.rel_variance - 0.0024).abs() < 1e-15);
    }

    #[test]
    fn uncorrected_log_estimator_is_quadratic() {
        for &a in &[-0.3, 0.0, 0.002, 0.1] {
            let v = log_r_uncorrected(a, 0.3, 0.21, 50);
            assert!((v - (-50.0 * a * 0.3 - 25.0 * a * a * 0.21)).abs() < 1e-12);
        }
    }

    fn moments(mean: f64, var: f64) -> MomentEstimates {
        MomentEstimates {
            pair_mean: vec![mean],
            pair_var: vec![var],
            node_mean: vec![0.5; 2],
            node_var: vec![0.25; 2],
        }
    }

    #[test]
    fn proposal_examples() {
        let mut rng = Rng::seed_from_u64(0);
        // data matches model: centred proposal
        let stats = DataStats { n: 100, pair_counts: vec![25], node_counts: vec![50, 50] };
        let p = optimal_proposal(0, &stats, &moments(0.25, 0.1875), 1.0, 0.01, None, 1e-6, &mut rng);
        assert_eq!(p.proposal_mu, 0.0);
        assert_eq!(p.direction, Direction::Add);

        // σ0 → ∞, N = 100, S² = 0.25, L = 5
        let stats = DataStats { n: 100, pair_counts: vec![30], node_counts: vec![50, 50] };
        let p = optimal_proposal(0, &stats, &moments(0.25, 0.25), 1e12, 0.01, None, 1e-6, &mut rng);
        assert!((p.proposal_mu - 0.2).abs() < 1e-12);
        assert!((p.proposal_var - 0.04).abs() < 1e-12);

        for _ in 0..100_000 {
            let p = optimal_proposal(0, &stats, &moments(0.25, 0.25), 1.0, 0.002, None, 1e-6, &mut rng);
            assert!(p.a.abs() <= 0.002 && p.log_q.is_finite());
        }
    }

    #[test]
    fn zero_weight_add_has_prior_and_proposal_terms_only() {
        let (p0, s0) = (0.3, 1.5);
        let log_q = 4.0;
        let lr = log_acceptance_ratio(Direction::Add, 0.0, 0.0, 17.0, p0, s0, log_q);
        let expected = (p0 / (1.0 - p0)).ln() - 0.5 * (2.0 * PI).ln() - s0.ln() - log_q;
        assert!((lr - expected).abs() < 1e-12);
    }

    #[test]
    fn add_delete_reciprocity() {
        // Uniform data, L = 0, p0 = 0.5.
        let mut rng = Rng::seed_from_u64(8);
        let stats = DataStats { n: 100, pair_counts: vec![25], node_counts: vec![50, 50] };
        let m = moments(0.25, 0.1875);
        for _ in 0..100 {
            let prop = optimal_proposal(0, &stats, &m, 1.0, 0.003, None, 1e-6, &mut rng);
            let ratio = r_tilde(prop.a, 0.25, 0.1875, 100, 100);
            let add = log_acceptance_ratio(Direction::Add, prop.a, ratio.log_r_tilde, 25.0, 0.5, 1.0, prop.log_q);
            let del = log_acceptance_ratio(Direction::Delete, prop.a, -ratio.log_r_tilde, 25.0, 0.5, 1.0, prop.log_q);
            assert!((add + del).abs() < 1e-12);
        }
    }

    #[test]
    fn nonfinite_terms_reject() {
        assert_eq!(acceptance(Direction::Add, 0.0, f64::NAN, 1.0, 0.5, 1.0, 0.0), 0.0);
        let p = acceptance(Direction::Add, 0.0, 0.0, 1.0, 0.5, 1.0, 0.0);
        assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn reduced_mean_matches_reweighting() {
        // two-variable model with a single edge of weight a and zero biases
        let a: f64 = 0.7;
        let with = a.exp() / (3.0 + a.exp());
        assert!((reduced_mean(with, a) - 0.25).abs() < 1e-14);
        // Z(a)/Z(0) = (3 + e^a)/4
        let lr = exact_log_ratio_with(5, 0.25, a);
        assert!((lr - 5.0 * ((3.0 + a.exp()) / 4.0).ln()).abs() < 1e-12);
    }
}

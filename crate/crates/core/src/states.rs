//! Persistent Gibbs particles, moment estimates, and the exact enumeration
//! oracle for small models.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::model::{ModelSpec, Parameters};
use crate::rng::Rng;

/// Largest variable count the exact oracle will enumerate by default.
pub const DEFAULT_ENUM_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GibbsScan {
    /// Ascending site index within every sweep.
    #[default]
    Fixed,
    /// A fresh random permutation of the sites for every sweep.
    Random,
}

/// `n` persistent Gibbs chains over `d` binary variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    states: BinaryMatrix,
}

impl ParticleSet {
    pub fn new(states: BinaryMatrix) -> Result<Self> {
        if states.rows() < 2 {
            return Err(Error::invalid("a particle set needs at least two particles"));
        }
        Ok(ParticleSet { states })
    }

    /// Independent Bernoulli(0.5) sites.
    pub fn random(n: usize, d: usize, rng: &mut Rng) -> Result<Self> {
        let data = (0..n * d).map(|_| rng.random_bool(0.5) as u8).collect();
        Self::new(BinaryMatrix::from_vec(n, d, data)?)
    }

    pub fn n(&self) -> usize {
        self.states.rows()
    }

    pub fn d(&self) -> usize {
        self.states.cols()
    }

    pub fn states(&self) -> &BinaryMatrix {
        &self.states
    }

    /// Advances every particle by `steps` full single-site Gibbs sweeps under
    /// `params`, starting from its current state.
    pub fn gibbs_sweep(
        &mut self,
        spec: &ModelSpec,
        params: &Parameters,
        steps: usize,
        scan: GibbsScan,
        rng: &mut Rng,
    ) -> Result<()> {
        if self.d() != spec.d() {
            return Err(Error::Dimension {
                what: "particle width",
                expected: spec.d(),
                got: self.d(),
            });
        }
        params.check(spec)?;
        let sampler = SiteSampler::new(spec, params);
        let mut order: Vec<usize> = (0..spec.d()).collect();
        let mut row = vec![0.0; spec.d()];
        for p in 0..self.n() {
            let x = self.states.row_mut(p);
            for (r, &v) in row.iter_mut().zip(x.iter()) {
                *r = v as f64;
            }
            for _ in 0..steps {
                if scan == GibbsScan::Random {
                    shuffle(&mut order, rng);
                }
                for &i in &order {
                    row[i] = sampler.draw(i, &row, rng);
                }
            }
            for (v, &r) in x.iter_mut().zip(&row) {
                *v = r as u8;
            }
        }
        Ok(())
    }
}

fn shuffle(order: &mut [usize], rng: &mut Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

/// Single-site conditional `P(x_i = 1 | x_-i) = sigmoid(b_i + Σ_j w_ij x_j)`.
pub(crate) struct SiteSampler<'a> {
    d: usize,
    couplings: Vec<f64>,
    biases: &'a [f64],
}

impl<'a> SiteSampler<'a> {
    pub(crate) fn new(spec: &ModelSpec, params: &'a Parameters) -> Self {
        SiteSampler {
            d: spec.d(),
            couplings: params.coupling_matrix(spec),
            biases: &params.biases,
        }
    }

    #[inline]
    pub(crate) fn draw(&self, i: usize, row: &[f64], rng: &mut Rng) -> f64 {
        let w = &self.couplings[i * self.d..(i + 1) * self.d];
        let field = self.biases[i] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        let p = 1.0 / (1.0 + (-field).exp());
        if rng.random::<f64>() < p {
            1.0
        } else {
            0.0
        }
    }
}

/// Means and variances of every pair feature (aligned to the candidate list)
/// and every bias feature.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub pair_mean: Vec<f64>,
    pub pair_var: Vec<f64>,
    pub node_mean: Vec<f64>,
    pub node_var: Vec<f64>,
}

impl MomentEstimates {
    /// Moments of 0/1 features from exact probabilities: `var = m (1 - m)`.
    fn from_exact_means(pair_mean: Vec<f64>, node_mean: Vec<f64>) -> Self {
        let bern = |m: &f64| (m * (1.0 - m)).max(0.0);
        MomentEstimates {
            pair_var: pair_mean.iter().map(bern).collect(),
            node_var: node_mean.iter().map(bern).collect(),
            pair_mean,
            node_mean,
        }
    }
}

/// Sample means and unbiased (n−1 denominator) sample variances over the
/// particles. For a 0/1 feature with `c` ones out of `n`, the variance is
/// `(c − c²/n)/(n − 1)`.
pub fn estimate_moments(particles: &ParticleSet, spec: &ModelSpec) -> Result<MomentEstimates> {
    if particles.d() != spec.d() {
        return Err(Error::Dimension {
            what: "particle width",
            expected: spec.d(),
            got: particles.d(),
        });
    }
    let n = particles.n() as f64;
    let cols = particles.states().column_bitsets();
    let mean_var = |c: u64| {
        let c = c as f64;
        (c / n, ((c - c * c / n) / (n - 1.0)).max(0.0))
    };
    let (node_mean, node_var) = cols
        .iter()
        .map(|col| mean_var(col.iter().map(|w| w.count_ones() as u64).sum()))
        .unzip();
    let (pair_mean, pair_var) = spec
        .candidates()
        .iter()
        .map(|&(i, j)| {
            mean_var(
                cols[i]
                    .iter()
                    .zip(&cols[j])
                    .map(|(a, b)| (a & b).count_ones() as u64)
                    .sum(),
            )
        })
        .unzip();
    Ok(MomentEstimates {
        pair_mean,
        pair_var,
        node_mean,
        node_var,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    pub limit: usize,
    /// Materialize the 2^d state probabilities.
    pub state_probs: bool,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            limit: DEFAULT_ENUM_LIMIT,
            state_probs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSummary {
    pub log_z: f64,
    pub moments: MomentEstimates,
    /// Indexed by state bit pattern: bit `i` of the index is `x_i`.
    pub state_probs: Option<Vec<f64>>,
}

fn check_enumerable(spec: &ModelSpec, limit: usize) -> Result<()> {
    if spec.d() > limit {
        return Err(Error::Capability(format!(
            "exact enumeration over {} variables exceeds the limit of {limit}",
            spec.d()
        )));
    }
    Ok(())
}

/// Unnormalized log-probabilities of all 2^d states, built incrementally by
/// peeling off the lowest set bit.
pub(crate) fn state_energies(spec: &ModelSpec, params: &Parameters) -> Vec<f64> {
    let d = spec.d();
    let w = params.coupling_matrix(spec);
    let n_states = 1usize << d;
    let mut energy = vec![0.0; n_states];
    for s in 1..n_states {
        let i = s.trailing_zeros() as usize;
        let mut rest = s & (s - 1);
        let row = &w[i * d..(i + 1) * d];
        let mut e = energy[rest] + params.biases[i];
        while rest != 0 {
            e += row[rest.trailing_zeros() as usize];
            rest &= rest - 1;
        }
        energy[s] = e;
    }
    energy
}

fn log_sum_exp(values: &[f64]) -> (f64, f64) {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|e| (e - max).exp()).sum();
    (max + sum.ln(), max)
}

/// Log partition function only.
pub fn log_partition(spec: &ModelSpec, params: &Parameters, limit: usize) -> Result<f64> {
    check_enumerable(spec, limit)?;
    params.check(spec)?;
    Ok(log_sum_exp(&state_energies(spec, params)).0)
}

/// Exact log Z and feature moments by full enumeration.
pub fn exact_summary(spec: &ModelSpec, params: &Parameters, opts: ExactOptions) -> Result<ExactSummary> {
    check_enumerable(spec, opts.limit)?;
    params.check(spec)?;
    let d = spec.d();
    let mut probs = state_energies(spec, params);
    let (log_z, _) = log_sum_exp(&probs);
    for p in probs.iter_mut() {
        *p = (*p - log_z).exp();
    }

    let mut node = vec![0.0; d];
    let mut pair = vec![0.0; d * d];
    for (s, &p) in probs.iter().enumerate() {
        let mut bits = s;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            node[i] += p;
            let row = &mut pair[i * d..(i + 1) * d];
            let mut higher = bits;
            while higher != 0 {
                row[higher.trailing_zeros() as usize] += p;
                higher &= higher - 1;
            }
        }
    }
    let total: f64 = probs.iter().sum();
    let clamp = |m: f64| (m / total).clamp(0.0, 1.0);
    let pair_mean = spec
        .candidates()
        .iter()
        .map(|&(i, j)| clamp(pair[i * d + j]))
        .collect();
    let node_mean = node.into_iter().map(clamp).collect();
    Ok(ExactSummary {
        log_z,
        moments: MomentEstimates::from_exact_means(pair_mean, node_mean),
        state_probs: opts.state_probs.then_some(probs),
    })
}

/// I.i.d. draws from the enumerated distribution.
pub fn exact_sample(
    spec: &ModelSpec,
    params: &Parameters,
    count: usize,
    limit: usize,
    rng: &mut Rng,
) -> Result<BinaryMatrix> {
    check_enumerable(spec, limit)?;
    params.check(spec)?;
    let d = spec.d();
    let energies = state_energies(spec, params);
    let (log_z, _) = log_sum_exp(&energies);
    let mut cdf = Vec::with_capacity(energies.len());
    let mut acc = 0.0;
    for e in &energies {
        acc += (e - log_z).exp();
        cdf.push(acc);
    }
    let total = acc;
    let mut out = BinaryMatrix::zeros(count, d);
    for r in 0..count {
        let u = rng.random::<f64>() * total;
        let s = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        for (i, v) in out.row_mut(r).iter_mut().enumerate() {
            *v = ((s >> i) & 1) as u8;
        }
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::log_unnormalized;
    use crate::rng::{substream, Stream};
    use rand::SeedableRng;

    fn rng(seed: u64) -> Rng {
        Rng::seed_from_u64(seed)
    }

    fn one_edge(weight: f64) -> (ModelSpec, Parameters) {
        let spec = ModelSpec::full(2);
        let mut p = Parameters::zeros(2);
        p.edge_weights.insert(0, weight);
        (spec, p)
    }

    /// Brute-force oracle written directly from the model definition.
    fn brute_force(spec: &ModelSpec, params: &Parameters) -> (f64, Vec<f64>, Vec<f64>) {
        let d = spec.d();
        let mut z = 0.0;
        let mut pair = vec![0.0; spec.n_candidates()];
        let mut node = vec![0.0; d];
        for s in 0..1usize << d {
            let x: Vec<u8> = (0..d).map(|i| ((s >> i) & 1) as u8).collect();
            let w = log_unnormalized(spec, params, &x).unwrap().exp();
            z += w;
            for (k, &(i, j)) in spec.candidates().iter().enumerate() {
                pair[k] += w * (x[i] * x[j]) as f64;
            }
            for i in 0..d {
                node[i] += w * x[i] as f64;
            }
        }
        (
            z.ln(),
            pair.into_iter().map(|v| v / z).collect(),
            node.into_iter().map(|v| v / z).collect(),
        )
    }

    pub(crate) fn random_params(spec: &ModelSpec, rng: &mut Rng, scale: f64) -> Parameters {
        let mut p = Parameters::zeros(spec.d());
        for k in 0..spec.n_candidates() {
            p.edge_weights.insert(k, rng.random_range(-scale..scale));
        }
        for b in p.biases.iter_mut() {
            *b = rng.random_range(-scale..scale);
        }
        p
    }

    #[test]
    fn exact_uniform_model() {
        let spec = ModelSpec::full(12);
        let s = exact_summary(&spec, &Parameters::zeros(12), ExactOptions::default()).unwrap();
        assert!((s.log_z - 12.0 * 2f64.ln()).abs() < 1e-12);
        for (m, v) in s.moments.pair_mean.iter().zip(&s.moments.pair_var) {
            assert!((m - 0.25).abs() < 1e-12);
            assert!((v - 0.1875).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_single_edge() {
        let (spec, p) = one_edge(2f64.ln());
        let s = exact_summary(&spec, &p, ExactOptions { state_probs: true, ..Default::default() }).unwrap();
        assert!((s.log_z - 5f64.ln()).abs() < 1e-14);
        assert!((s.moments.pair_mean[0] - 0.4).abs() < 1e-14);
        assert!((s.moments.pair_var[0] - 0.24).abs() < 1e-14);
        let probs = s.state_probs.unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((probs[3] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn exact_matches_brute_force() {
        let mut r = rng(3);
        for _ in 0..10 {
            let spec = ModelSpec::full(5);
            let p = random_params(&spec, &mut r, 1.5);
            let s = exact_summary(&spec, &p, ExactOptions::default()).unwrap();
            let (lz, pair, node) = brute_force(&spec, &p);
            assert!((s.log_z - lz).abs() < 1e-10);
            for (a, b) in s.moments.pair_mean.iter().zip(&pair) {
                assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in s.moments.node_mean.iter().zip(&node) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn exact_over_limit_is_capability_error() {
        let spec = ModelSpec::full(21);
        let p = Parameters::zeros(21);
        assert!(matches!(
            exact_summary(&spec, &p, ExactOptions::default()),
            Err(Error::Capability(_))
        ));
        assert!(matches!(
            exact_sample(&spec, &p, 3, DEFAULT_ENUM_LIMIT, &mut rng(0)),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn log_z_gradient_is_mean() {
        let mut r = rng(11);
        let spec = ModelSpec::full(5);
        let p = random_params(&spec, &mut r, 1.0);
        let s = exact_summary(&spec, &p, ExactOptions::default()).unwrap();
        let h = 1e-5;
        for k in 0..spec.n_candidates() {
            let mut up = p.clone();
            *up.edge_weights.get_mut(&k).unwrap() += h;
            let mut dn = p.clone();
            *dn.edge_weights.get_mut(&k).unwrap() -= h;
            let fd = (log_partition(&spec, &up, 20).unwrap() - log_partition(&spec, &dn, 20).unwrap()) / (2.0 * h);
            assert!((fd - s.moments.pair_mean[k]).abs() <= 1e-6 * fd.abs().max(1e-3));
        }
    }

    #[test]
    fn gibbs_uniform_sites() {
        let spec = ModelSpec::full(4);
        let mut r = rng(5);
        let mut ps = ParticleSet::random(100, 4, &mut r).unwrap();
        let p = Parameters::zeros(4);
        let mut ones = 0usize;
        let mut total = 0usize;
        for _ in 0..100 {
            ps.gibbs_sweep(&spec, &p, 1, GibbsScan::Fixed, &mut r).unwrap();
            ones += ps.states().as_slice().iter().filter(|&&v| v == 1).count();
            total += ps.states().as_slice().len();
        }
        assert!(total >= 10_000);
        assert!((ones as f64 / total as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn gibbs_single_edge_long_run() {
        let (spec, p) = one_edge(2f64.ln());
        let mut r = rng(9);
        let mut ps = ParticleSet::random(200, 2, &mut r).unwrap();
        ps.gibbs_sweep(&spec, &p, 20, GibbsScan::Fixed, &mut r).unwrap();
        let mut both = 0usize;
        let mut total = 0usize;
        for _ in 0..500 {
            ps.gibbs_sweep(&spec, &p, 1, GibbsScan::Random, &mut r).unwrap();
            both += ps.states().iter_rows().filter(|x| x == &[1, 1]).count();
            total += ps.n();
        }
        assert!((both as f64 / total as f64 - 0.4).abs() < 0.02);
    }

    #[test]
    fn gibbs_negative_bias() {
        let spec = ModelSpec::full(3);
        let mut p = Parameters::zeros(3);
        p.biases[1] = -10.0;
        let mut r = rng(1);
        let mut ps = ParticleSet::random(100, 3, &mut r).unwrap();
        let mut ones = 0usize;
        for _ in 0..100 {
            ps.gibbs_sweep(&spec, &p, 1, GibbsScan::Fixed, &mut r).unwrap();
            ones += ps.states().iter_rows().filter(|x| x[1] == 1).count();
        }
        assert!((ones as f64 / 10_000.0) < 0.001);
    }

    #[test]
    fn gibbs_is_persistent() {
        // One sweep from a fixed start under a deterministic field must keep
        // the particles' prior values where the conditional is degenerate.
        let spec = ModelSpec::full(2);
        let mut p = Parameters::zeros(2);
        p.biases = vec![40.0, -40.0];
        let mut r = rng(2);
        let start = BinaryMatrix::from_rows(&[vec![0, 1], vec![1, 0]]).unwrap();
        let mut ps = ParticleSet::new(start).unwrap();
        ps.gibbs_sweep(&spec, &p, 1, GibbsScan::Fixed, &mut r).unwrap();
        assert!(ps.states().iter_rows().all(|x| x == [1, 0]));
    }

    #[test]
    fn moment_examples() {
        let spec = ModelSpec::full(2);
        let same = ParticleSet::new(BinaryMatrix::from_rows(&[vec![1, 0], vec![1, 0], vec![1, 0]]).unwrap()).unwrap();
        let m = estimate_moments(&same, &spec).unwrap();
        assert!(m.pair_var.iter().chain(&m.node_var).all(|&v| v == 0.0));

        let two = ParticleSet::new(BinaryMatrix::from_rows(&[vec![1, 1], vec![0, 0]]).unwrap()).unwrap();
        let m = estimate_moments(&two, &spec).unwrap();
        assert_eq!(m.pair_mean[0], 0.5);
        assert_eq!(m.pair_var[0], 0.5);

        let spec6 = ModelSpec::full(6);
        let uni = ParticleSet::random(1000, 6, &mut rng(4)).unwrap();
        let m = estimate_moments(&uni, &spec6).unwrap();
        for (mean, var) in m.pair_mean.iter().zip(&m.pair_var) {
            assert!((mean - 0.25).abs() < 0.1);
            assert!((var - 0.1875).abs() < 0.1);
            assert!(*var <= 0.25 * 1000.0 / 999.0 + 1e-12);
        }
    }

    #[test]
    fn particle_set_requires_two() {
        assert!(ParticleSet::new(BinaryMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn exact_sample_examples() {
        let (spec, p) = one_edge(2f64.ln());
        let mut r = substream(1, Stream::Data);
        let x = exact_sample(&spec, &p, 100_000, 20, &mut r).unwrap();
        let both = x.iter_rows().filter(|row| row == &[1, 1]).count();
        assert!((both as f64 / 1e5 - 0.4).abs() < 0.01);

        let empty = exact_sample(&spec, &p, 0, 20, &mut r).unwrap();
        assert_eq!(empty.rows(), 0);
    }

    #[test]
    fn exact_sample_uniform_chi_square() {
        let spec = ModelSpec::full(4);
        let x = exact_sample(&spec, &Parameters::zeros(4), 16_000, 20, &mut rng(17)).unwrap();
        let mut counts = [0f64; 16];
        for row in x.iter_rows() {
            let s: usize = row.iter().enumerate().map(|(i, &v)| (v as usize) << i).sum();
            counts[s] += 1.0;
        }
        let chi2: f64 = counts.iter().map(|c| (c - 1000.0).powi(2) / 1000.0).sum();
        // chi-square(15) upper 0.001 quantile
        assert!(chi2 < 37.697, "chi2 = {chi2}");
    }

    #[test]
    fn moments_unbiased_under_exact_sampling() {
        let mut r = rng(23);
        let spec = ModelSpec::full(4);
        let p = random_params(&spec, &mut r, 1.0);
        let exact = exact_summary(&spec, &p, ExactOptions::default()).unwrap();
        let sets = 1000;
        let mut sum = vec![0.0; spec.n_candidates()];
        let mut sum_var = vec![0.0; spec.n_candidates()];
        for _ in 0..sets {
            let x = exact_sample(&spec, &p, 100, 20, &mut r).unwrap();
            let m = estimate_moments(&ParticleSet::new(x).unwrap(), &spec).unwrap();
            for k in 0..spec.n_candidates() {
                sum[k] += m.pair_mean[k];
                sum_var[k] += m.pair_var[k];
            }
        }
        for k in 0..spec.n_candidates() {
            let mean = sum[k] / sets as f64;
            let se = (exact.moments.pair_var[k] / 100.0 / sets as f64).sqrt();
            assert!((mean - exact.moments.pair_mean[k]).abs() < 3.0 * se);
            // the n−1 variance is unbiased as well
            let mean_var = sum_var[k] / sets as f64;
            assert!((mean_var - exact.moments.pair_var[k]).abs() < 0.01);
        }
    }
}

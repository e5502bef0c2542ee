//! Held-out conditional log-likelihood, structure-recovery curves, edge
//! density and autocorrelation diagnostics.

use std::io::Write;

use rand::Rng as _;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::engine::PosteriorChain;
use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::model::{ModelSpec, Parameters};
use crate::rng::Rng;

/// Largest group whose conditional is computed by enumeration.
pub const MAX_GROUP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    Full,
    GridPatch {
        rows: usize,
        cols: usize,
        anchor: (usize, usize),
    },
}

/// The variables whose joint conditional is scored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    pub members: Vec<usize>,
    pub kind: GroupKind,
}

impl GroupSpec {
    pub fn full(d: usize) -> Self {
        GroupSpec {
            members: (0..d).collect(),
            kind: GroupKind::Full,
        }
    }

    /// A `rows × cols` patch with top-left corner `anchor` on a row-major
    /// grid that is `grid_cols` wide and `grid_rows` tall.
    pub fn grid_patch(grid_rows: usize, grid_cols: usize, rows: usize, cols: usize, anchor: (usize, usize)) -> Result<Self> {
        let (r0, c0) = anchor;
        if rows == 0 || cols == 0 || r0 + rows > grid_rows || c0 + cols > grid_cols {
            return Err(Error::invalid(format!(
                "{rows}x{cols} patch at {anchor:?} does not fit a {grid_rows}x{grid_cols} grid"
            )));
        }
        let members = (r0..r0 + rows)
            .flat_map(|r| (c0..c0 + cols).map(move |c| r * grid_cols + c))
            .collect();
        Ok(GroupSpec {
            members,
            kind: GroupKind::GridPatch { rows, cols, anchor },
        })
    }

    fn check(&self, d: usize) -> Result<()> {
        if self.members.len() > MAX_GROUP {
            return Err(Error::Capability(format!(
                "group of {} variables exceeds the enumeration bound of {MAX_GROUP}",
                self.members.len()
            )));
        }
        let mut seen = vec![false; d];
        for &m in &self.members {
            if m >= d || std::mem::replace(&mut seen[m], true) {
                return Err(Error::invalid(format!("group member {m} is out of range or repeated")));
            }
        }
        Ok(())
    }
}

/// Dense form of one model for repeated conditional evaluation.
struct DenseModel {
    d: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl DenseModel {
    fn new(spec: &ModelSpec, params: &Parameters) -> Result<Self> {
        params.check(spec)?;
        Ok(DenseModel {
            d: spec.d(),
            w: params.coupling_matrix(spec),
            b: params.biases.clone(),
        })
    }

    /// `log P(x_G | x_rest)` by enumerating the group with the rest clamped.
    fn log_conditional(&self, x: &[u8], group: &[usize], in_group: &[bool], energies: &mut Vec<f64>) -> f64 {
        let g = group.len();
        let d = self.d;
        let fields: Vec<f64> = group
            .iter()
            .map(|&i| {
                let row = &self.w[i * d..(i + 1) * d];
                self.b[i]
                    + (0..d)
                        .filter(|&j| !in_group[j] && x[j] == 1)
                        .map(|j| row[j])
                        .sum::<f64>()
            })
            .collect();
        energies.clear();
        energies.resize(1 << g, 0.0);
        for s in 1usize..(1 << g) {
            let t = s.trailing_zeros() as usize;
            let rest = s & (s - 1);
            let row = &self.w[group[t] * d..(group[t] + 1) * d];
            let mut e = energies[rest] + fields[t];
            let mut r = rest;
            while r != 0 {
                let m = r.trailing_zeros() as usize;
                e += row[group[m]];
                r &= r - 1;
            }
            energies[s] = e;
        }
        let observed = group
            .iter()
            .enumerate()
            .fold(0usize, |s, (bit, &i)| s | ((x[i] as usize) << bit));
        energies[observed] - log_sum_exp(energies)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|e| (e - m).exp()).sum::<f64>().ln()
}

fn mixture_log(lps: &[f64]) -> f64 {
    log_sum_exp(lps) - (lps.len() as f64).ln()
}

fn group_mask(d: usize, group: &GroupSpec) -> Vec<bool> {
    let mut mask = vec![false; d];
    for &m in &group.members {
        mask[m] = true;
    }
    mask
}

/// `log (1/K Σ_k P_k(x_G | x_rest))` over the models.
pub fn cll(spec: &ModelSpec, models: &[Parameters], x: &[u8], group: &GroupSpec) -> Result<f64> {
    if models.is_empty() {
        return Err(Error::invalid("at least one model is required"));
    }
    if x.len() != spec.d() {
        return Err(Error::Dimension {
            what: "data case",
            expected: spec.d(),
            got: x.len(),
        });
    }
    group.check(spec.d())?;
    let mask = group_mask(spec.d(), group);
    let mut buf = Vec::new();
    let lps = models
        .iter()
        .map(|m| Ok(DenseModel::new(spec, m)?.log_conditional(x, &group.members, &mask, &mut buf)))
        .collect::<Result<Vec<_>>>()?;
    Ok(mixture_log(&lps))
}

/// How groups are chosen per case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupPolicy {
    /// Every variable.
    Full,
    /// A uniformly placed `rows × cols` patch on a `grid_rows × grid_cols`
    /// image.
    Patch {
        grid_rows: usize,
        grid_cols: usize,
        rows: usize,
        cols: usize,
    },
}

impl GroupPolicy {
    pub fn draw(&self, d: usize, rng: &mut Rng) -> Result<GroupSpec> {
        match *self {
            GroupPolicy::Full => Ok(GroupSpec::full(d)),
            GroupPolicy::Patch {
                grid_rows,
                grid_cols,
                rows,
                cols,
            } => {
                if grid_rows * grid_cols != d || rows > grid_rows || cols > grid_cols {
                    return Err(Error::invalid(format!(
                        "{rows}x{cols} patches on a {grid_rows}x{grid_cols} grid do not fit {d} variables"
                    )));
                }
                let anchor = (
                    rng.random_range(0..=grid_rows - rows),
                    rng.random_range(0..=grid_cols - cols),
                );
                GroupSpec::grid_patch(grid_rows, grid_cols, rows, cols, anchor)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CllSummary {
    pub mean: f64,
    pub std: f64,
    pub cases: usize,
}

/// Mean and standard deviation of the per-case CLL, with one group drawn per
/// case from `policy`.
pub fn cll_dataset(
    spec: &ModelSpec,
    models: &[Parameters],
    data: &BinaryMatrix,
    policy: GroupPolicy,
    rng: &mut Rng,
) -> Result<CllSummary> {
    if models.is_empty() {
        return Err(Error::invalid("at least one model is required"));
    }
    if data.cols() != spec.d() {
        return Err(Error::Dimension {
            what: "dataset width",
            expected: spec.d(),
            got: data.cols(),
        });
    }
    if data.rows() == 0 {
        return Err(Error::invalid("empty evaluation set"));
    }
    let dense = models
        .iter()
        .map(|m| DenseModel::new(spec, m))
        .collect::<Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    let mut lps = vec![0.0; dense.len()];
    let mut scores = Vec::with_capacity(data.rows());
    for x in data.iter_rows() {
        let group = policy.draw(spec.d(), rng)?;
        group.check(spec.d())?;
        let mask = group_mask(spec.d(), &group);
        for (lp, m) in lps.iter_mut().zip(&dense) {
            *lp = m.log_conditional(x, &group.members, &mask, &mut buf);
        }
        scores.push(mixture_log(&lps));
    }
    let (mean, std) = mean_std(&scores);
    Ok(CllSummary {
        mean,
        std,
        cases: scores.len(),
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of `{α : freq_α > t}` against the true edges at
/// each threshold. Precision is 1 when nothing is predicted.
pub fn pr_curve(
    spec: &ModelSpec,
    inclusion_freq: &[f64],
    truth: &[(usize, usize)],
    thresholds: &[f64],
) -> Result<Vec<PrPoint>> {
    if inclusion_freq.len() != spec.n_candidates() {
        return Err(Error::Dimension {
            what: "inclusion frequencies",
            expected: spec.n_candidates(),
            got: inclusion_freq.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::invalid("recall is undefined for an empty true edge set"));
    }
    let mut is_true = vec![false; spec.n_candidates()];
    for &(i, j) in truth {
        let k = spec
            .edge_index(i, j)
            .ok_or_else(|| Error::invalid(format!("true edge ({i}, {j}) is not a candidate")))?;
        is_true[k] = true;
    }
    let n_true = is_true.iter().filter(|&&t| t).count() as f64;
    thresholds
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::invalid(format!("threshold {t} is outside (0, 1)")));
            }
            let (mut tp, mut predicted) = (0usize, 0usize);
            for (&f, &truth) in inclusion_freq.iter().zip(&is_true) {
                if f > t {
                    predicted += 1;
                    tp += truth as usize;
                }
            }
            let precision = if predicted == 0 { 1.0 } else { tp as f64 / predicted as f64 };
            let recall = tp as f64 / n_true;
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            Ok(PrPoint {
                threshold: t,
                precision,
                recall,
                f1,
            })
        })
        .collect()
}

/// Evenly spaced thresholds strictly inside (0, 1).
pub fn default_thresholds(count: usize) -> Vec<f64> {
    (1..=count).map(|i| i as f64 / (count + 1) as f64).collect()
}

/// Mean and standard deviation of the post-burn-in density trace.
pub fn density(chain: &PosteriorChain) -> Result<(f64, f64)> {
    let trace = chain.post_burn_in_density();
    if trace.is_empty() {
        return Err(Error::invalid("chain has no post-burn-in iterations"));
    }
    Ok(mean_std(trace))
}

/// Sample autocorrelation `ρ(0..=max_lag)` with the biased (1/n)
/// normalization, computed by FFT.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(Error::invalid(format!(
            "series of length {n} is too short for lag {max_lag}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    let direct_c0: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
    if direct_c0 <= f64::EPSILON * n as f64 * mean.abs().max(1.0).powi(2) * 1e-6 || c0 <= 0.0 {
        return Err(Error::invalid("series has zero variance"));
    }
    Ok(buf[..=max_lag].iter().map(|c| c.re / c0).collect())
}

/// Integrated autocorrelation time `1 + 2 Σ_{k≤M} ρ(k)` with Sokal's
/// self-consistent window: the smallest `M ≥ c·τ(M)`, `c = 5`.
pub fn integrated_autocorr_time(series: &[f64]) -> Result<f64> {
    let max_lag = (series.len() / 2).max(1).min(series.len().saturating_sub(1));
    let rho = autocorrelation(series, max_lag)?;
    let mut tau = 1.0;
    for (m, r) in rho.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        if m as f64 >= 5.0 * tau {
            return Ok(tau);
        }
    }
    Ok(tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub density_mean: f64,
    pub density_std: f64,
    pub cll_mean: f64,
    pub cll_std: f64,
    /// Present when a ground truth was supplied.
    pub f1_at_0_5: Option<f64>,
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], mut out: W) -> Result<()> {
    writeln!(out, "method,density_mean,density_std,cll_mean,cll_std,f1_at_0.5")?;
    for r in rows {
        let f1 = r.f1_at_0_5.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{f1}",
            r.method, r.density_mean, r.density_std, r.cll_mean, r.cll_std
        )?;
    }
    Ok(())
}

pub fn write_pr_csv<W: Write>(points: &[PrPoint], mut out: W) -> Result<()> {
    writeln!(out, "threshold,precision,recall,f1")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.threshold, p.precision, p.recall, p.f1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::log_unnormalized;
    use crate::rng::Rng;
    use crate::states::{exact_sample, tests::random_params};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::LN_2;

    fn rng(seed: u64) -> Rng {
        Rng::seed_from_u64(seed)
    }

    /// Conditional by brute force over all 2^d states.
    fn brute_cll(spec: &ModelSpec, p: &Parameters, x: &[u8], group: &[usize]) -> f64 {
        let d = spec.d();
        let mut num = f64::NEG_INFINITY;
        let mut terms = Vec::new();
        for s in 0..1usize << d {
            let y: Vec<u8> = (0..d).map(|i| ((s >> i) & 1) as u8).collect();
            if (0..d).any(|i| !group.contains(&i) && y[i] != x[i]) {
                continue;
            }
            let e = log_unnormalized(spec, p, &y).unwrap();
            terms.push(e);
            if y == x {
                num = e;
            }
        }
        num - log_sum_exp(&terms)
    }

    #[test]
    fn uniform_model_examples() {
        let spec = ModelSpec::full(12);
        let zero = Parameters::zeros(12);
        let g = GroupSpec::grid_patch(3, 4, 3, 3, (0, 1)).unwrap();
        let v = cll(&spec, std::slice::from_ref(&zero), &[1; 12], &g).unwrap();
        assert!((v + 9.0 * LN_2).abs() < 1e-12);

        let data = BinaryMatrix::from_vec(5, 12, (0..60).map(|i| (i % 3 == 0) as u8).collect()).unwrap();
        let policy = GroupPolicy::Patch { grid_rows: 3, grid_cols: 4, rows: 3, cols: 3 };
        let s = cll_dataset(&spec, &[zero], &data, policy, &mut rng(0)).unwrap();
        assert!((s.mean + 9.0 * LN_2).abs() < 1e-12 && s.std < 1e-12);
    }

    #[test]
    fn single_edge_example() {
        let spec = ModelSpec::full(2);
        let mut p = Parameters::zeros(2);
        p.edge_weights.insert(0, LN_2);
        let v = cll(&spec, &[p], &[1, 1], &GroupSpec::full(2)).unwrap();
        assert!((v - (2.0f64 / 5.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn mixture_of_identical_models() {
        let spec = ModelSpec::full(6);
        let p = random_params(&spec, &mut rng(3), 1.0);
        let g = GroupSpec { members: vec![0, 2, 5], kind: GroupKind::Full };
        let x = [1, 0, 1, 1, 0, 1];
        let one = cll(&spec, std::slice::from_ref(&p), &x, &g).unwrap();
        let many = cll(&spec, &vec![p; 7], &x, &g).unwrap();
        assert!((one - many).abs() < 1e-12);
    }

    #[test]
    fn oversize_group_is_a_capability_error() {
        let spec = ModelSpec::full(21);
        let err = cll(&spec, &[Parameters::zeros(21)], &[0; 21], &GroupSpec::full(21)).unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }

    #[test]
    fn true_model_beats_uniform() {
        let spec = ModelSpec::full(6);
        let truth = random_params(&spec, &mut rng(10), 1.5);
        let data = exact_sample(&spec, &truth, 500, 20, &mut rng(11)).unwrap();
        let a = cll_dataset(&spec, &[truth], &data, GroupPolicy::Full, &mut rng(1)).unwrap();
        let b = cll_dataset(&spec, &[Parameters::zeros(6)], &data, GroupPolicy::Full, &mut rng(1)).unwrap();
        let se = (a.std.powi(2) / 500.0 + b.std.powi(2) / 500.0).sqrt();
        assert!(a.mean - b.mean > 3.0 * se, "{} {} {se}", a.mean, b.mean);
    }

    #[test]
    fn group_placement_is_seeded() {
        let policy = GroupPolicy::Patch { grid_rows: 6, grid_cols: 6, rows: 3, cols: 3 };
        let a: Vec<_> = { let mut r = rng(4); (0..20).map(|_| policy.draw(36, &mut r).unwrap()).collect() };
        let b: Vec<_> = { let mut r = rng(4); (0..20).map(|_| policy.draw(36, &mut r).unwrap()).collect() };
        assert_eq!(a, b);
        assert!(a.iter().all(|g| g.members.len() == 9 && g.members.iter().all(|&m| m < 36)));
    }

    #[test]
    fn pr_examples() {
        let spec = ModelSpec::with_candidates(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let truth = [(0, 1), (2, 3)];
        let pts = pr_curve(&spec, &[1.0, 0.0, 1.0], &truth, &[0.1, 0.5, 0.9]).unwrap();
        assert!(pts.iter().all(|p| p.precision == 1.0 && p.recall == 1.0 && p.f1 == 1.0));

        let none = pr_curve(&spec, &[0.0; 3], &truth, &[0.5]).unwrap()[0];
        assert_eq!((none.precision, none.recall, none.f1), (1.0, 0.0, 0.0));

        let p = pr_curve(&spec, &[0.9, 0.6, 0.2], &truth, &[0.5]).unwrap()[0];
        assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));

        assert!(pr_curve(&spec, &[0.0; 3], &[], &[0.5]).is_err());
    }

    #[test]
    fn density_examples() {
        let spec = ModelSpec::full(3);
        let empty = PosteriorChain::from_snapshots(&spec, Vec::new()).unwrap();
        assert!(density(&empty).is_err());
        let mut chain = empty;
        chain.density_trace = vec![0.0; 10];
        assert_eq!(density(&chain).unwrap(), (0.0, 0.0));
        chain.density_trace = (0..10).map(|i| (i % 2) as f64).collect();
        assert_eq!(density(&chain).unwrap().0, 0.5);
    }

    #[test]
    fn autocorrelation_examples() {
        let mut r = rng(7);
        let noise: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut r)).collect();
        let rho = autocorrelation(&noise, 20).unwrap();
        assert_eq!(rho[0], 1.0);
        assert!(rho[1..].iter().all(|v| v.abs() < 0.02));

        let mut x = 0.0;
        let ar: Vec<f64> = (0..200_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut r);
                x = 0.9 * x + e;
                x
            })
            .collect();
        let rho = autocorrelation(&ar, 10).unwrap();
        for (k, v) in rho.iter().enumerate() {
            assert!((v - 0.9f64.powi(k as i32)).abs() < 0.05);
        }
        // τ = (1 + φ)/(1 − φ) = 19
        let tau = integrated_autocorr_time(&ar).unwrap();
        assert!((tau - 19.0).abs() < 2.0, "{tau}");

        assert!(autocorrelation(&[2.0; 50], 5).is_err());
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn autocorrelation_matches_direct_sum() {
        let series: Vec<f64> = (0..57).map(|i| ((i * 31) % 17) as f64).collect();
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let c = |k: usize| series.iter().zip(&series[k..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>();
        let rho = autocorrelation(&series, 10).unwrap();
        for (k, v) in rho.iter().enumerate() {
            assert!((v - c(k) / c(0)).abs() < 1e-10);
        }
    }

    #[test]
    fn metrics_csv_layout() {
        let mut out = Vec::new();
        let row = MetricsRow {
            method: "bayes".into(),
            density_mean: 0.3,
            density_std: 0.01,
            cll_mean: -4.0,
            cll_std: 1.0,
            f1_at_0_5: Some(0.8),
        };
        write_metrics_csv(&[row], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "method,density_mean,density_std,cll_mean,cll_std,f1_at_0.5\nbayes,0.3,0.01,-4,1,0.8\n"
        );
    }

    proptest! {
        #[test]
        fn conditional_matches_brute_force(seed in any::<u64>(), mask in 1u32..64, xbits in 0u32..64) {
            let spec = ModelSpec::full(6);
            let p = random_params(&spec, &mut rng(seed), 1.0);
            let group: Vec<usize> = (0..6).filter(|i| mask >> i & 1 == 1).collect();
            let x: Vec<u8> = (0..6).map(|i| (xbits >> i & 1) as u8).collect();
            let g = GroupSpec { members: group.clone(), kind: GroupKind::Full };
            let v = cll(&spec, std::slice::from_ref(&p), &x, &g).unwrap();
            prop_assert!((v - brute_cll(&spec, &p, &x, &group)).abs() < 1e-9);
            prop_assert!(v <= 1e-12 && v.is_finite());
        }

        #[test]
        fn duplicate_component_is_neutral(seed in any::<u64>()) {
            let spec = ModelSpec::full(5);
            let mut r = rng(seed);
            let models = vec![random_params(&spec, &mut r, 1.0), random_params(&spec, &mut r, 1.0)];
            let g = GroupSpec::full(5);
            let x = [1, 0, 0, 1, 1];
            let base = cll(&spec, &models, &x, &g).unwrap();
            let mut dup = models.clone();
            dup.extend(models);
            prop_assert!((base - cll(&spec, &dup, &x, &g).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn recall_never_increases_with_threshold(freqs in prop::collection::vec(0.0f64..=1.0, 10)) {
            let spec = ModelSpec::full(5);
            let truth = [(0, 1), (1, 2), (3, 4)];
            let pts = pr_curve(&spec, &freqs, &truth, &default_thresholds(19)).unwrap();
            for w in pts.windows(2) {
                prop_assert!(w[1].recall <= w[0].recall);
            }
        }
    }
}

//! Normal distribution truncated to a finite interval.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::Rng;

/// Below this total mass the normal shape is abandoned for a uniform density.
const MIN_MASS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    mu: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    log_mass: f64,
    uniform: bool,
}

fn ln_phi(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * (2.0 * PI).ln()
}

/// `ln(Φ(b) − Φ(a))` for standardized bounds `a < b`.
fn ln_std_mass(a: f64, b: f64) -> f64 {
    let w = b - a;
    if w * a.abs().max(b.abs()).max(1.0) < 0.05 {
        // Simpson's rule in the log domain; stays accurate where the erfc
        // difference would cancel or underflow.
        let m = 0.5 * (a + b);
        let terms = [ln_phi(a), 4f64.ln() + ln_phi(m), ln_phi(b)];
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        return (w / 6.0).ln() + top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    }
    let mass = if a >= 0.0 {
        0.5 * (libm::erfc(a / SQRT_2) - libm::erfc(b / SQRT_2))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b / SQRT_2) - libm::erfc(-a / SQRT_2))
    } else {
        1.0 - 0.5 * libm::erfc(b / SQRT_2) - 0.5 * libm::erfc(-a / SQRT_2)
    };
    mass.ln()
}

impl TruncatedNormal {
    /// `N(mu, var)` restricted to `[lo, hi]`. Falls back to the uniform
    /// density on `[lo, hi]` when the normal mass there is negligible or the
    /// inputs are degenerate.
    pub fn new(mu: f64, var: f64, lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "empty truncation interval [{lo}, {hi}]");
        let sd = var.sqrt();
        let mut t = TruncatedNormal {
            mu,
            sd,
            lo,
            hi,
            log_mass: (hi - lo).ln(),
            uniform: true,
        };
        if mu.is_finite() && sd.is_finite() && sd > 0.0 {
            let lm = ln_std_mass((lo - mu) / sd, (hi - mu) / sd);
            if lm.is_finite() && lm > MIN_MASS.ln() {
                t.log_mass = lm;
                t.uniform = false;
            }
        }
        t
    }

    pub fn is_uniform_fallback(&self) -> bool {
        self.uniform
    }

    pub fn log_density(&self, x: f64) -> f64 {
        if !(self.lo..=self.hi).contains(&x) {
            return f64::NEG_INFINITY;
        }
        if self.uniform {
            return -self.log_mass;
        }
        let z = (x - self.mu) / self.sd;
        ln_phi(z) - self.sd.ln() - self.log_mass
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        if self.uniform {
            return rng.random_range(self.lo..=self.hi);
        }
        let a = (self.lo - self.mu) / self.sd;
        let b = (self.hi - self.mu) / self.sd;
        let z = if a >= 0.0 {
            sample_right(a, b, rng)
        } else if b <= 0.0 {
            -sample_right(-b, -a, rng)
        } else if b - a >= (2.0 * PI).sqrt() {
            loop {
                let z: f64 = StandardNormal.sample(rng);
                if (a..=b).contains(&z) {
                    break z;
                }
            }
        } else {
            loop {
                let z = rng.random_range(a..=b);
                if rng.random::<f64>() <= (-0.5 * z * z).exp() {
                    break z;
                }
            }
        };
        (self.mu + self.sd * z).clamp(self.lo, self.hi)
    }
}

/// Standard normal restricted to `[a, b]` with `0 <= a < b`.
fn sample_right(a: f64, b: f64, rng: &mut Rng) -> f64 {
    if a * (b - a) <= 2.0 {
        loop {
            let z = rng.random_range(a..=b);
            if rng.random::<f64>() <= (0.5 * (a * a - z * z)).exp() {
                return z;
            }
        }
    }
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let u: f64 = rng.random();
        let z = a - (1.0 - u).ln() / rate;
        if z > b {
            continue;
        }
        if rng.random::<f64>() <= (-0.5 * (z - rate).powi(2)).exp() {
            return z;
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Trapezoid quadrature oracle for the truncated mass.
    fn quad_mass(mu: f64, sd: f64, lo: f64, hi: f64) -> f64 {
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let f = |x: f64| (ln_phi((x - mu) / sd) - sd.ln()).exp();
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * f(lo + i as f64 * h)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn density_integrates_to_one() {
        for &(mu, var, lo, hi) in &[
            (0.0, 1.0, -1.0, 1.0),
            (0.2, 0.04, -0.002, 0.002),
            (3.0, 0.01, -0.5, 0.5),
            (-2.0, 0.3, -0.1, 0.4),
            (0.0, 4.0, -10.0, 10.0),
        ] {
            let t = TruncatedNormal::new(mu, var, lo, hi);
            assert!(!t.is_uniform_fallback());
            let m = quad_mass(mu, var.sqrt(), lo, hi);
            assert!((t.log_mass - m.ln()).abs() < 1e-6, "{mu} {var} {lo} {hi}: {} vs {}", t.log_mass, m.ln());
        }
    }

    #[test]
    fn degenerate_mass_falls_back_to_uniform() {
        let t = TruncatedNormal::new(100.0, 1e-4, -0.01, 0.01);
        assert!(t.is_uniform_fallback());
        assert!((t.log_density(0.0) + 0.02f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn samples_respect_support_and_mean() {
        let mut rng = Rng::seed_from_u64(4);
        for &(mu, var, lo, hi) in &[(0.2, 0.04, -0.3, 0.3), (5.0, 1.0, -1.0, 1.0), (-0.5, 0.01, -0.2, 0.2), (0.0, 1.0, -4.0, 4.0)] {
            let t = TruncatedNormal::new(mu, var, lo, hi);
            let n = 100_000;
            let mut sum = 0.0;
            for _ in 0..n {
                let x = t.sample(&mut rng);
                assert!(x >= lo && x <= hi);
                sum += x;
            }
            // mean from the density on a fine grid
            let grid = 20_000;
            let h = (hi - lo) / grid as f64;
            let mean: f64 = (0..grid)
                .map(|i| {
                    let x = lo + (i as f64 + 0.5) * h;
                    x * t.log_density(x).exp() * h
                })
                .sum();
            assert!((sum / n as f64 - mean).abs() < 0.01 * (hi - lo), "{mu} {var}");
        }
    }
}

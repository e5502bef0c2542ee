//! Conjugate updates for the inclusion probability `p0` and the slab
//! precision `σ0^-2`.

use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// `p0 ~ Beta(a, b)` and `σ0^-2 ~ Gamma(shape = c, rate = d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPriors {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for HyperPriors {
    fn default() -> Self {
        HyperPriors {
            a: 5.0,
            b: 5.0,
            c: 5.0,
            d: 5.0,
        }
    }
}

impl HyperPriors {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.a) && ok(self.b) && ok(self.c) && ok(self.d) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "hyper-prior parameters must be positive, got {self:?}"
            )))
        }
    }

    /// Beta parameters of `p0 | Y`.
    pub fn p0_posterior(&self, active: usize, inactive: usize) -> (f64, f64) {
        (self.a + active as f64, self.b + inactive as f64)
    }

    /// Gamma (shape, rate) of `σ0^-2 | Y, A`.
    pub fn precision_posterior<'a>(&self, active_slabs: impl IntoIterator<Item = &'a f64>) -> (f64, f64) {
        let (k, ss) = active_slabs
            .into_iter()
            .fold((0usize, 0.0), |(k, ss), a| (k + 1, ss + a * a));
        (self.c + 0.5 * k as f64, self.d + 0.5 * ss)
    }
}

/// Draws `p0 | Y ~ Beta(a + #active, b + #inactive)`, kept strictly inside (0, 1).
pub fn sample_p0(priors: &HyperPriors, active: usize, inactive: usize, rng: &mut Rng) -> f64 {
    let (alpha, beta) = priors.p0_posterior(active, inactive);
    let p = Beta::new(alpha, beta)
        .expect("positive Beta parameters")
        .sample(rng);
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// Draws the slab precision from its Gamma conditional and returns the
/// standard deviation `σ0`.
pub fn sample_sigma0<'a>(
    priors: &HyperPriors,
    active_slabs: impl IntoIterator<Item = &'a f64>,
    rng: &mut Rng,
) -> f64 {
    let (shape, rate) = priors.precision_posterior(active_slabs);
    let precision = Gamma::new(shape, 1.0 / rate)
        .expect("positive Gamma parameters")
        .sample(rng)
        .max(f64::MIN_POSITIVE);
    let sigma = precision.sqrt().recip();
    if sigma.is_finite() {
        sigma
    } else {
        f64::MAX.sqrt()
    }
}

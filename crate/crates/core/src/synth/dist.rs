//! Truncated normal and lognormal marginals, solved so the truncated mean
//! hits a target, and their stratified discretisation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Standard-normal quantile of 0.999: the spec max sits here before truncation.
pub const Z999: f64 = 3.09;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Lognormal,
}

/// Target statistics of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureDistributionSpec {
    pub family: Family,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl FeatureDistributionSpec {
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.min < self.mean && self.mean < self.max) {
            return Err(Error::Config(format!(
                "{name}: need min < mean < max, got {} / {} / {}",
                self.min, self.mean, self.max
            )));
        }
        if self.family == Family::Lognormal && self.min < 0.0 {
            return Err(Error::Config(format!("{name}: lognormal feature with negative min")));
        }
        Ok(())
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

fn cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        0.0
    } else {
        std_normal().cdf(x)
    }
}

fn sf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        1.0
    } else {
        std_normal().sf(x)
    }
}

fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        std_normal().pdf(x)
    }
}

/// `Φ(y) − Φ(x)` for `x ≤ y`, evaluated in whichever tail avoids cancellation.
fn mass(x: f64, y: f64) -> f64 {
    if x > 0.0 {
        sf(x) - sf(y)
    } else {
        cdf(y) - cdf(x)
    }
}

/// `y` with `Φ(y) = Φ(α) + t·(Φ(β) − Φ(α))`.
fn quantile_between(alpha: f64, beta: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return alpha;
    }
    if t >= 1.0 {
        return beta;
    }
    if alpha > 0.0 {
        let s = sf(alpha) - t * (sf(alpha) - sf(beta));
        -std_normal().inverse_cdf(s)
    } else {
        let p = cdf(alpha) + t * (cdf(beta) - cdf(alpha));
        std_normal().inverse_cdf(p)
    }
}

/// A normal or lognormal law truncated to `[min, max]`. For the lognormal,
/// `mu` and `sigma` refer to `ln X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedLaw {
    pub family: Family,
    pub mu: f64,
    pub sigma: f64,
    pub min: f64,
    pub max: f64,
}

impl TruncatedLaw {
    /// Standardized truncation bounds.
    fn bounds(&self) -> (f64, f64) {
        let (a, b) = match self.family {
            Family::Normal => (self.min, self.max),
            Family::Lognormal => (
                if self.min > 0.0 { self.min.ln() } else { f64::NEG_INFINITY },
                self.max.ln(),
            ),
        };
        ((a - self.mu) / self.sigma, (b - self.mu) / self.sigma)
    }

    /// Mean of `X` restricted to standardized band `[lo, hi]`, given the
    /// band's probability mass under the untruncated law.
    fn band_mean(&self, lo: f64, hi: f64, band_mass: f64) -> f64 {
        let v = match self.family {
            Family::Normal => self.mu + self.sigma * (pdf(lo) - pdf(hi)) / band_mass,
            Family::Lognormal => {
                let s = self.sigma;
                (self.mu + 0.5 * s * s).exp() * mass(lo - s, hi - s) / band_mass
            }
        };
        v.clamp(self.min, self.max)
    }

    pub fn mean(&self) -> f64 {
        let (a, b) = self.bounds();
        let z = mass(a, b);
        if z <= 0.0 {
            return if b <= 0.0 { self.max } else { self.min };
        }
        self.band_mean(a, b, z)
    }

    /// Conditional means of `n` equal-probability strata, ascending. Their
    /// average is the truncated mean.
    pub fn strata_means(&self, n: usize) -> Vec<f64> {
        let (a, b) = self.bounds();
        let z = mass(a, b);
        let edges: Vec<f64> = (0..=n).map(|i| quantile_between(a, b, i as f64 / n as f64)).collect();
        (0..n)
            .map(|i| self.band_mean(edges[i], edges[i + 1], z / n as f64))
            .collect()
    }

    /// Spread from the 99.9th-percentile rule, then `mu` solved by
    /// bisection so the truncated mean equals `spec.mean`.
    pub fn fit(spec: &FeatureDistributionSpec) -> Result<Self> {
        let sigma = match spec.family {
            Family::Normal => (spec.max - spec.mean) / Z999,
            Family::Lognormal => {
                // max = exp(mu + z·s) and mean = exp(mu + s²/2) give
                // s² − 2z·s + 2 ln(max/mean) = 0. Heavier tails than the
                // rule allows are capped at s = z.
                let r = (spec.max / spec.mean).ln();
                let disc = Z999 * Z999 - 2.0 * r;
                if disc > 0.0 { Z999 - disc.sqrt() } else { Z999 }
            }
        };
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("degenerate spread for {spec:?}")));
        }
        let (mut lo, mut hi) = match spec.family {
            Family::Normal => (spec.min - 20.0 * sigma, spec.max + 20.0 * sigma),
            Family::Lognormal => (
                spec.mean.ln() - 6.0 * sigma - sigma * sigma,
                spec.max.ln() + sigma,
            ),
        };
        let law = |mu| TruncatedLaw {
            family: spec.family,
            mu,
            sigma,
            min: spec.min,
            max: spec.max,
        };
        if !(law(lo).mean() < spec.mean && law(hi).mean() > spec.mean) {
            return Err(Error::Config(format!("cannot bracket the mean of {spec:?}")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if law(mid).mean() < spec.mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(law(0.5 * (lo + hi)))
    }
}

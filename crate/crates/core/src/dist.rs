//! Prior specifications for exogenous variables.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{LcfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistSpec {
    Uniform { lo: f64, hi: f64 },
    Normal { mu: f64, sigma: f64 },
}

impl Default for DistSpec {
    fn default() -> Self {
        DistSpec::Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl DistSpec {
    pub fn standard_normal() -> Self {
        DistSpec::Normal {
            mu: 0.0,
            sigma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistSpec::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(()),
            DistSpec::Normal { mu, sigma }
                if mu.is_finite() && sigma.is_finite() && sigma >= 0.0 =>
            {
                Ok(())
            }
            other => Err(LcfError::InvalidModel(format!(
                "invalid distribution {other:?}"
            ))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DistSpec::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            }
            DistSpec::Normal { mu, sigma } => {
                if sigma == 0.0 {
                    mu
                } else {
                    Normal::new(mu, sigma).expect("validated sigma").sample(rng)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DistSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            DistSpec::Normal { mu, .. } => mu,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DistSpec::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            DistSpec::Normal { sigma, .. } => sigma * sigma,
        }
    }

    /// Interval holding (practically) all the mass: the support for a
    /// uniform, mu +/- 6 sigma for a normal.
    pub fn effective_support(&self) -> (f64, f64) {
        match *self {
            DistSpec::Uniform { lo, hi } => (lo, hi),
            DistSpec::Normal { mu, sigma } => (mu - 6.0 * sigma, mu + 6.0 * sigma),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_moments() {
        let d = DistSpec::default();
        assert_eq!(d.mean(), 0.5);
        assert!((d.variance() - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_uniform_is_point_mass() {
        let d = DistSpec::Uniform { lo: 0.3, hi: 0.3 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(d.sample(&mut rng), 0.3);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(DistSpec::Uniform { lo: 1.0, hi: 0.0 }.validate().is_err());
        assert!(DistSpec::Normal {
            mu: 0.0,
            sigma: -1.0
        }
        .validate()
        .is_err());
    }
}

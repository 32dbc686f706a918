//! The law-school model: latent knowledge `K ~ N(0, 1)` drives UGPA (`G`,
//! Gaussian), LSAT (`L`, Poisson with log link) and first-year average
//! (`F`, unit-variance Gaussian), each also depending on race `R` and
//! sex `S` (the sensitive attribute).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Attribute, Outcome};
use crate::error::{LcfError, Result};

/// Upper clamp on the Poisson log-rate.
pub const MAX_LOG_RATE: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawSchoolScm {
    pub w_g_k: f64,
    pub w_g_r: f64,
    pub w_g_s: f64,
    pub b_g: f64,
    pub sigma_g: f64,
    pub w_l_k: f64,
    pub w_l_r: f64,
    pub w_l_s: f64,
    pub b_l: f64,
    pub w_f_k: f64,
    pub w_f_r: f64,
    pub w_f_s: f64,
    pub attr_domain: Vec<Attribute>,
}

impl LawSchoolScm {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.w_g_k,
            self.w_g_r,
            self.w_g_s,
            self.b_g,
            self.sigma_g,
            self.w_l_k,
            self.w_l_r,
            self.w_l_s,
            self.b_l,
            self.w_f_k,
            self.w_f_r,
            self.w_f_s,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(LcfError::InvalidModel(
                "non-finite law-school weight".into(),
            ));
        }
        if self.sigma_g <= 0.0 {
            return Err(LcfError::InvalidModel("sigma_g must be positive".into()));
        }
        if self.w_f_k == 0.0 {
            return Err(LcfError::InvalidModel(
                "w_f_k must be nonzero (the response constant divides by it)".into(),
            ));
        }
        if self.attr_domain.len() < 2 {
            return Err(LcfError::InvalidModel(
                "attribute domain needs two values".into(),
            ));
        }
        Ok(())
    }

    pub fn g_mean(&self, k: f64, r: f64, s: f64) -> f64 {
        self.w_g_k * k + self.w_g_r * r + self.w_g_s * s + self.b_g
    }

    /// Clamped log-rate and whether the clamp was active.
    pub fn l_log_rate(&self, k: f64, r: f64, s: f64) -> (f64, bool) {
        let eta = self.w_l_k * k + self.w_l_r * r + self.w_l_s * s + self.b_l;
        if eta > MAX_LOG_RATE {
            (MAX_LOG_RATE, true)
        } else {
            (eta, false)
        }
    }

    pub fn l_rate(&self, k: f64, r: f64, s: f64) -> f64 {
        self.l_log_rate(k, r, s).0.exp()
    }

    pub fn f_mean(&self, k: f64, r: f64, s: f64) -> f64 {
        self.w_f_k * k + self.w_f_r * r + self.w_f_s * s
    }

    /// Noise is drawn in the fixed order F, G, L so that reusing a seed
    /// reproduces the same F and G noise at any `k`.
    pub(crate) fn eval(&self, k: f64, r: f64, s: f64, rng: Option<&mut dyn RngCore>) -> Outcome {
        let (log_rate, clamped) = self.l_log_rate(k, r, s);
        if clamped {
            log::warn!("Poisson log-rate clamped to {MAX_LOG_RATE} at k = {k}");
        }
        let rate = log_rate.exp();
        let (g, l, f) = match rng {
            Some(rng) => {
                let eps_f: f64 = rng.sample(StandardNormal);
                let eps_g: f64 = rng.sample(StandardNormal);
                let l = Poisson::new(rate).map(|p| p.sample(rng)).unwrap_or(rate);
                (
                    self.g_mean(k, r, s) + self.sigma_g * eps_g,
                    l,
                    self.f_mean(k, r, s) + eps_f,
                )
            }
            None => (self.g_mean(k, r, s), rate, self.f_mean(k, r, s)),
        };
        Outcome {
            x: vec![r, g, l],
            y: f,
        }
    }

    /// Unnormalised log posterior of `K` given one record, and whether
    /// the Poisson clamp fired.
    pub fn log_posterior(&self, k: f64, rec: &LawRecord) -> (f64, bool) {
        let resid = rec.g - self.g_mean(k, rec.r, rec.s);
        let (eta, clamped) = self.l_log_rate(k, rec.r, rec.s);
        let lp = -0.5 * k * k - 0.5 * resid * resid / (self.sigma_g * self.sigma_g) + rec.l * eta
            - eta.exp();
        (lp, clamped)
    }

    /// Mode of the Gaussian part (prior times UGPA likelihood); used to
    /// start chains near the posterior bulk.
    pub fn gaussian_mode(&self, rec: &LawRecord) -> f64 {
        let prec = self.w_g_k * self.w_g_k / (self.sigma_g * self.sigma_g);
        let target = rec.g - self.w_g_r * rec.r - self.w_g_s * rec.s - self.b_g;
        self.w_g_k * target / (self.sigma_g * self.sigma_g) / (1.0 + prec)
    }
}

/// One observed law-school applicant: race, sex, UGPA, LSAT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawRecord {
    pub r: f64,
    pub s: f64,
    pub g: f64,
    pub l: f64,
}

impl LawRecord {
    /// Features are laid out as `(r, g, l)`; the attribute is `s`.
    pub fn from_features(x: &[f64], s: Attribute) -> Result<Self> {
        crate::error::check_len("law-school features", 3, x.len())?;
        Ok(Self {
            r: x[0],
            s,
            g: x[1],
            l: x[2],
        })
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.r, self.s, self.g, self.l]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(LcfError::NonFinite("law-school record"));
        }
        if self.l < 0.0 || self.l.fract() != 0.0 {
            return Err(LcfError::InvalidConfig(format!(
                "LSAT count must be a nonnegative integer, got {}",
                self.l
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Post-burn-in samples returned.
    pub samples: usize,
    pub burn_in: usize,
    pub proposal_scale: f64,
    pub thin: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            burn_in: 200,
            proposal_scale: 0.5,
            thin: 1,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.thin == 0 {
            return Err(LcfError::InvalidConfig(
                "MCMC samples and thinning must be at least 1".into(),
            ));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return Err(LcfError::InvalidConfig(
                "proposal scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub samples: Vec<f64>,
    pub acceptance_rate: f64,
    /// Log-posterior evaluations where the Poisson log-rate clamp fired.
    pub clamped_evaluations: usize,
}

impl PosteriorDraws {
    pub fn mean(&self) -> f64 {
        crate::numeric::mean_std(&self.samples).0
    }
}

/// Random-walk Metropolis over `K | R, S, G, L` with a Gaussian proposal.
/// Deterministic given `seed`.
pub fn posterior_sample_k(
    scm: &LawSchoolScm,
    record: &LawRecord,
    cfg: &McmcConfig,
    seed: u64,
) -> Result<PosteriorDraws> {
    record.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = scm.gaussian_mode(record);
    let (mut lp, c0) = scm.log_posterior(k, record);
    let mut clamped = usize::from(c0);
    if !lp.is_finite() {
        return Err(LcfError::NonFinite("law-school log-likelihood"));
    }
    let total = cfg.burn_in + cfg.samples * cfg.thin;
    let mut samples = Vec::with_capacity(cfg.samples);
    let mut accepted = 0usize;
    for step in 0..total {
        let z: f64 = rng.sample(StandardNormal);
        let proposal = k + cfg.proposal_scale * z;
        let (lp_new, c) = scm.log_posterior(proposal, record);
        clamped += usize::from(c);
        if lp_new.is_nan() {
            return Err(LcfError::NonFinite("law-school log-likelihood"));
        }
        let log_u: f64 = rng.random::<f64>().ln();
        if log_u < lp_new - lp {
            k = proposal;
            lp = lp_new;
            accepted += 1;
        }
        if step >= cfg.burn_in && (step - cfg.burn_in) % cfg.thin == cfg.thin - 1 {
            samples.push(k);
        }
    }
    if clamped > 0 {
        log::warn!("Poisson log-rate clamped in {clamped} posterior evaluations");
    }
    Ok(PosteriorDraws {
        samples,
        acceptance_rate: accepted as f64 / total as f64,
        clamped_evaluations: clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn informative() -> LawSchoolScm {
        LawSchoolScm {
            w_g_k: 1.0,
            w_g_r: 0.3,
            w_g_s: 0.2,
            b_g: 3.0,
            sigma_g: 0.4,
            w_l_k: 0.3,
            w_l_r: 0.1,
            w_l_s: 0.05,
            b_l: 3.0,
            w_f_k: 0.8,
            w_f_r: 0.2,
            w_f_s: 0.3,
            attr_domain: vec![0.0, 1.0],
        }
    }

    #[test]
    fn concentrates_when_ugpa_is_exact() {
        let scm = LawSchoolScm {
            sigma_g: 1e-3,
            w_l_k: 0.0,
            ..informative()
        };
        let rec = LawRecord {
            r: 1.0,
            s: 0.0,
            g: 3.9,
            l: 20.0,
        };
        let k_star = (rec.g - scm.w_g_r * rec.r - scm.w_g_s * rec.s - scm.b_g) / scm.w_g_k;
        let draws = posterior_sample_k(&scm, &rec, &McmcConfig::default(), 11).unwrap();
        assert_eq!(draws.samples.len(), 100);
        assert!(
            (draws.mean() - k_star).abs() < 0.01,
            "{} vs {k_star}",
            draws.mean()
        );
    }

    #[test]
    fn uninformative_likelihood_returns_prior() {
        let scm = LawSchoolScm {
            w_g_k: 0.0,
            w_l_k: 0.0,
            ..informative()
        };
        let rec = LawRecord {
            r: 0.0,
            s: 1.0,
            g: 3.1,
            l: 25.0,
        };
        let cfg = McmcConfig {
            samples: 2000,
            proposal_scale: 2.4,
            thin: 5,
            ..McmcConfig::default()
        };
        let draws = posterior_sample_k(&scm, &rec, &cfg, 5).unwrap();
        let (mean, sd) = crate::numeric::mean_std(&draws.samples);
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((sd * sd - 1.0).abs() < 0.1, "var {}", sd * sd);
    }

    #[test]
    fn recovers_generating_knowledge() {
        let scm = informative();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o = scm.eval(1.2, 1.0, 0.0, Some(&mut rng));
        let rec = LawRecord::from_features(&o.x, 0.0).unwrap();
        let cfg = McmcConfig {
            samples: 2000,
            ..McmcConfig::default()
        };
        let draws = posterior_sample_k(&scm, &rec, &cfg, 9).unwrap();
        let (mean, sd) = crate::numeric::mean_std(&draws.samples);
        assert!((mean - 1.2).abs() < 3.0 * sd, "mean {mean} sd {sd}");
        assert!(
            (0.1..=0.7).contains(&draws.acceptance_rate),
            "{}",
            draws.acceptance_rate
        );
    }

    #[test]
    fn rejects_fractional_lsat() {
        let rec = LawRecord {
            r: 0.0,
            s: 0.0,
            g: 3.0,
            l: 20.5,
        };
        assert!(posterior_sample_k(&informative(), &rec, &McmcConfig::default(), 1).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let rec = LawRecord {
            r: 1.0,
            s: 1.0,
            g: 3.4,
            l: 18.0,
        };
        let a = posterior_sample_k(&informative(), &rec, &McmcConfig::default(), 77).unwrap();
        let b = posterior_sample_k(&informative(), &rec, &McmcConfig::default(), 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_rate_clamp_is_counted() {
        let scm = LawSchoolScm {
            b_l: 40.0,
            ..informative()
        };
        let rec = LawRecord {
            r: 0.0,
            s: 0.0,
            g: 3.0,
            l: 10.0,
        };
        let draws = posterior_sample_k(&scm, &rec, &McmcConfig::default(), 1).unwrap();
        assert!(draws.clamped_evaluations > 0);
    }

    #[test]
    fn validate_rejects_degenerate_weights() {
        assert!(LawSchoolScm {
            sigma_g: 0.0,
            ..informative()
        }
        .validate()
        .is_err());
        assert!(LawSchoolScm {
            w_f_k: 0.0,
            ..informative()
        }
        .validate()
        .is_err());
        assert!(informative().validate().is_ok());
    }
}

//! Structural causal models: forward evaluation, abduction and
//! counterfactual generation for the four supported families.
//!
//! Every family exposes its exogenous state as an [`ExogenousSample`]
//! whose flattened coordinates (`u_X` followed by `u_Y` when present) are
//! what strategic agents move along the predictor gradient.

mod config;
mod law;
mod linear;
mod scalar;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::dist::DistSpec;
use crate::error::{check_len, LcfError, Result};

pub use config::{PriorsConfig, ScmConfig};
pub use law::{
    posterior_sample_k, LawRecord, LawSchoolScm, McmcConfig, PosteriorDraws, MAX_LOG_RATE,
};
pub use linear::{LinearAdditiveScm, MultiplicativeBinaryScm};
pub use scalar::{LipschitzCheck, OffsetFn, ScalarFn, ScalarMonotoneScm};

/// A value of the sensitive attribute.
pub type Attribute = f64;

/// One draw of every exogenous variable of a model.
///
/// For the law-school family `ux = [k, r]`: knowledge plus the race code,
/// which is a parentless observed root and therefore abducted exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSample {
    pub ux: Vec<f64>,
    pub uy: Option<f64>,
}

impl ExogenousSample {
    pub fn new(ux: Vec<f64>, uy: Option<f64>) -> Self {
        Self { ux, uy }
    }

    pub fn scalar(u: f64) -> Self {
        Self {
            ux: vec![u],
            uy: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.ux.len() + usize::from(self.uy.is_some())
    }

    /// Flattened coordinates `(u_X..., u_Y)`.
    pub fn coords(&self) -> Vec<f64> {
        let mut c = self.ux.clone();
        c.extend(self.uy);
        c
    }

    /// Rebuild a sample with the same layout as `self` from flat coordinates.
    pub fn with_coords(&self, coords: &[f64]) -> Result<Self> {
        check_len("exogenous coordinates", self.dim(), coords.len())?;
        let d = self.ux.len();
        Ok(Self {
            ux: coords[..d].to_vec(),
            uy: self.uy.map(|_| coords[d]),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.ux.iter().all(|v| v.is_finite()) && self.uy.is_none_or(f64::is_finite)
    }
}

/// Features lying on an unfair attribute-to-outcome path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathMask {
    pub unfair: Vec<bool>,
}

impl PathMask {
    pub fn all(d: usize, unfair: bool) -> Self {
        Self {
            unfair: vec![unfair; d],
        }
    }

    pub fn len(&self) -> usize {
        self.unfair.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unfair.is_empty()
    }
}

/// Observable output of one structural evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StructuralModel {
    Linear(LinearAdditiveScm),
    Multiplicative(MultiplicativeBinaryScm),
    Scalar(ScalarMonotoneScm),
    Law(LawSchoolScm),
}

impl From<LinearAdditiveScm> for StructuralModel {
    fn from(m: LinearAdditiveScm) -> Self {
        StructuralModel::Linear(m)
    }
}

impl From<MultiplicativeBinaryScm> for StructuralModel {
    fn from(m: MultiplicativeBinaryScm) -> Self {
        StructuralModel::Multiplicative(m)
    }
}

impl From<ScalarMonotoneScm> for StructuralModel {
    fn from(m: ScalarMonotoneScm) -> Self {
        StructuralModel::Scalar(m)
    }
}

impl From<LawSchoolScm> for StructuralModel {
    fn from(m: LawSchoolScm) -> Self {
        StructuralModel::Law(m)
    }
}

impl StructuralModel {
    pub fn family_name(&self) -> &'static str {
        match self {
            StructuralModel::Linear(_) => "linear-additive",
            StructuralModel::Multiplicative(_) => "multiplicative-binary",
            StructuralModel::Scalar(_) => "scalar-monotone",
            StructuralModel::Law(_) => "law-school",
        }
    }

    pub fn attr_domain(&self) -> &[Attribute] {
        match self {
            StructuralModel::Linear(m) => &m.attr_domain,
            StructuralModel::Multiplicative(m) => &m.attr_domain,
            StructuralModel::Scalar(m) => &m.attr_domain,
            StructuralModel::Law(m) => &m.attr_domain,
        }
    }

    /// Number of observable features.
    pub fn feature_dim(&self) -> usize {
        match self {
            StructuralModel::Linear(m) => m.d(),
            StructuralModel::Multiplicative(m) => m.d(),
            StructuralModel::Scalar(_) => 1,
            StructuralModel::Law(_) => 3,
        }
    }

    /// Number of flattened exogenous coordinates.
    pub fn u_dim(&self) -> usize {
        match self {
            StructuralModel::Linear(m) => m.d() + 1,
            StructuralModel::Multiplicative(m) => m.d() + 1,
            StructuralModel::Scalar(_) => 1,
            StructuralModel::Law(_) => 2,
        }
    }

    /// Which exogenous coordinates respond to the predictor. Only `K`
    /// moves in the law-school model; race is immutable.
    pub fn responsive(&self) -> Vec<bool> {
        match self {
            StructuralModel::Law(_) => vec![true, false],
            other => vec![true; other.u_dim()],
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, StructuralModel::Law(_))
    }

    pub fn check_attr(&self, a: Attribute) -> Result<()> {
        if self.attr_domain().contains(&a) {
            Ok(())
        } else {
            Err(LcfError::AttributeOutOfDomain(a))
        }
    }

    /// Attribute values other than `a`, in domain order.
    pub fn alternates(&self, a: Attribute) -> Vec<Attribute> {
        self.attr_domain()
            .iter()
            .copied()
            .filter(|&v| v != a)
            .collect()
    }

    pub(crate) fn check_sample(&self, u: &ExogenousSample) -> Result<()> {
        let (nx, has_uy) = match self {
            StructuralModel::Linear(m) => (m.d(), true),
            StructuralModel::Multiplicative(m) => (m.d(), true),
            StructuralModel::Scalar(_) => (1, false),
            StructuralModel::Law(_) => (2, false),
        };
        check_len("exogenous u_X", nx, u.ux.len())?;
        if u.uy.is_some() != has_uy {
            return Err(LcfError::DimensionMismatch {
                context: "exogenous u_Y",
                expected: usize::from(has_uy),
                got: usize::from(u.uy.is_some()),
            });
        }
        if !u.is_finite() {
            return Err(LcfError::NonFinite("exogenous sample"));
        }
        Ok(())
    }

    /// Evaluate the structural equations at `u` with attribute `a`.
    ///
    /// The law-school equations are stochastic: with an RNG the Gaussian
    /// and Poisson noise is drawn from it, without one the conditional
    /// means are returned.
    pub fn forward(
        &self,
        u: &ExogenousSample,
        a: Attribute,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Outcome> {
        self.check_attr(a)?;
        self.check_sample(u)?;
        match self {
            StructuralModel::Linear(m) => Ok(m.eval(u, a)),
            StructuralModel::Multiplicative(m) => Ok(m.eval(u, a)),
            StructuralModel::Scalar(m) => m.eval(u.ux[0], a),
            StructuralModel::Law(m) => Ok(m.eval(u.ux[0], u.ux[1], a, rng)),
        }
    }

    /// Same contract as [`forward`](Self::forward); named for intent.
    pub fn counterfactual(
        &self,
        u: &ExogenousSample,
        a_check: Attribute,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Outcome> {
        self.forward(u, a_check, rng)
    }

    /// Posterior over the exogenous variables given `X = x, A = a`.
    /// The label is never conditioned on.
    pub fn abduct(&self, x: &[f64], a: Attribute) -> Result<PosteriorSampler> {
        self.check_attr(a)?;
        check_len("observed features", self.feature_dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LcfError::NonFinite("observed features"));
        }
        match self {
            StructuralModel::Linear(m) => Ok(PosteriorSampler::Deterministic {
                ux: m.invert(x, a),
                uy_prior: Some(m.prior_uy),
            }),
            StructuralModel::Multiplicative(m) => Ok(PosteriorSampler::Deterministic {
                ux: m.invert(x, a)?,
                uy_prior: Some(m.prior_uy),
            }),
            StructuralModel::Scalar(m) => Ok(PosteriorSampler::Deterministic {
                ux: vec![m.invert(x[0], a)?],
                uy_prior: None,
            }),
            StructuralModel::Law(m) => Ok(PosteriorSampler::Law {
                scm: m.clone(),
                record: LawRecord::from_features(x, a)?,
            }),
        }
    }

    /// Gradient of the outcome `y(u)` under attribute `a` with respect to
    /// the flattened exogenous coordinates. Stochastic families use the
    /// conditional-mean equations.
    pub fn outcome_gradient(&self, u: &ExogenousSample, a: Attribute) -> Result<Vec<f64>> {
        self.check_attr(a)?;
        self.check_sample(u)?;
        Ok(match self {
            StructuralModel::Linear(m) => {
                let mut g: Vec<f64> = m.w.iter().zip(&m.alpha).map(|(w, al)| w * al).collect();
                g.push(m.gamma);
                g
            }
            StructuralModel::Multiplicative(m) => {
                let mut g: Vec<f64> = m.w.iter().zip(&m.alpha).map(|(w, al)| a * w * al).collect();
                g.push(m.gamma);
                g
            }
            StructuralModel::Scalar(m) => vec![m.outcome_derivative(u.ux[0], a)?],
            StructuralModel::Law(m) => vec![m.w_f_k, 0.0],
        })
    }

    /// `sum_i theta_i * d x_i / d u`: the chain term for predictors that
    /// read the observable features directly.
    pub fn features_vjp(
        &self,
        u: &ExogenousSample,
        a: Attribute,
        theta: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_attr(a)?;
        self.check_sample(u)?;
        check_len("feature weights", self.feature_dim(), theta.len())?;
        Ok(match self {
            StructuralModel::Linear(m) => {
                let mut g: Vec<f64> = theta.iter().zip(&m.alpha).map(|(t, al)| t * al).collect();
                g.push(0.0);
                g
            }
            StructuralModel::Multiplicative(m) => {
                let mut g: Vec<f64> = theta
                    .iter()
                    .zip(&m.alpha)
                    .map(|(t, al)| a * t * al)
                    .collect();
                g.push(0.0);
                g
            }
            StructuralModel::Scalar(m) => vec![theta[0] * m.alpha],
            StructuralModel::Law(m) => {
                // x = (r, g, l); L enters through its Poisson mean
                let rate = m.l_rate(u.ux[0], u.ux[1], a);
                vec![theta[1] * m.w_g_k + theta[2] * m.w_l_k * rate, 0.0]
            }
        })
    }
}

/// Conditional distribution of the exogenous variables given `(x, a)`.
#[derive(Debug, Clone)]
pub enum PosteriorSampler {
    /// `u_X` is pinned by inverting the feature equations; `u_Y` (when the
    /// family has one) is independent of `X` and drawn from its prior.
    Deterministic {
        ux: Vec<f64>,
        uy_prior: Option<DistSpec>,
    },
    /// Random-walk Metropolis over `K` for the law-school model.
    Law {
        scm: LawSchoolScm,
        record: LawRecord,
    },
}

impl PosteriorSampler {
    pub fn deterministic_ux(&self) -> Option<&[f64]> {
        match self {
            PosteriorSampler::Deterministic { ux, .. } => Some(ux),
            PosteriorSampler::Law { .. } => None,
        }
    }

    /// Draw `m` samples; a pure function of `seed`.
    pub fn draws(&self, m: usize, seed: u64, mcmc: &McmcConfig) -> Result<Vec<ExogenousSample>> {
        use rand::SeedableRng;
        match self {
            PosteriorSampler::Deterministic { ux, uy_prior } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                Ok((0..m)
                    .map(|_| ExogenousSample {
                        ux: ux.clone(),
                        uy: uy_prior.map(|p| p.sample(&mut rng)),
                    })
                    .collect())
            }
            PosteriorSampler::Law { scm, record } => {
                let cfg = McmcConfig {
                    samples: m,
                    ..mcmc.clone()
                };
                let draws = posterior_sample_k(scm, record, &cfg, seed)?;
                Ok(draws
                    .samples
                    .into_iter()
                    .map(|k| ExogenousSample::new(vec![k, record.r], None))
                    .collect())
            }
        }
    }
}

/// Path-dependent counterfactual outcome for the linear-additive family:
/// features on unfair paths are recomputed under `a_check`, the rest are
/// held at their observed values `x`.
pub fn path_dependent_counterfactual(
    scm: &LinearAdditiveScm,
    x: &[f64],
    a: Attribute,
    a_check: Attribute,
    mask: &PathMask,
    u: &ExogenousSample,
) -> Result<f64> {
    let d = scm.d();
    check_len("observed features", d, x.len())?;
    check_len("path mask", d, mask.len())?;
    scm.check_attr(a)?;
    scm.check_attr(a_check)?;
    check_len("exogenous u_X", d, u.ux.len())?;
    let uy = u.uy.ok_or(LcfError::MissingInput("u_Y"))?;
    let mixed: Vec<f64> = (0..d)
        .map(|i| {
            if mask.unfair[i] {
                scm.alpha[i] * u.ux[i] + scm.beta[i] * a_check
            } else {
                x[i]
            }
        })
        .collect();
    Ok(crate::numeric::dot(&scm.w, &mixed) + scm.gamma * uy)
}

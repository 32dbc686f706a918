//! Text (TOML) representation of model parameters.

use serde::{Deserialize, Serialize};

use super::{
    LawSchoolScm, LinearAdditiveScm, MultiplicativeBinaryScm, OffsetFn, PathMask, ScalarFn,
    ScalarMonotoneScm, StructuralModel,
};
use crate::dist::DistSpec;
use crate::error::{LcfError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorsConfig {
    /// One entry per coordinate, or a single entry applied to all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ux: Option<Vec<DistSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uy: Option<DistSpec>,
    /// Scalar family prior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<DistSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FTildeConfig {
    Power { q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawWeights {
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
}

/// Serialized form of a [`StructuralModel`] (plus an optional path mask).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmConfig {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub attr_domain: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_tilde: Option<FTildeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<PriorsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<LawWeights>,
}

fn required<T>(v: Option<T>, field: &str, family: &str) -> Result<T> {
    v.ok_or_else(|| LcfError::InvalidConfig(format!("family {family} requires field `{field}`")))
}

fn expand_ux(priors: &Option<PriorsConfig>, d: usize) -> Result<Vec<DistSpec>> {
    match priors.as_ref().and_then(|p| p.ux.clone()) {
        None => Ok(vec![DistSpec::default(); d]),
        Some(v) if v.len() == 1 => Ok(vec![v[0]; d]),
        Some(v) if v.len() == d => Ok(v),
        Some(v) => Err(LcfError::InvalidConfig(format!(
            "priors.ux has {} entries, expected 1 or {d}",
            v.len()
        ))),
    }
}

impl ScmConfig {
    pub fn from_model(model: &StructuralModel, mask: Option<&PathMask>) -> Result<Self> {
        let base = |family: &str| ScmConfig {
            family: family.to_string(),
            d: None,
            alpha: None,
            beta: None,
            w: None,
            gamma: None,
            attr_domain: model.attr_domain().to_vec(),
            mask: mask.map(|m| m.unfair.clone()),
            u0: None,
            lipschitz_m: None,
            f_tilde: None,
            priors: None,
            weights: None,
        };
        Ok(match model {
            StructuralModel::Linear(m) => ScmConfig {
                d: Some(m.d()),
                alpha: Some(m.alpha.clone()),
                beta: Some(m.beta.clone()),
                w: Some(m.w.clone()),
                gamma: Some(m.gamma),
                priors: Some(PriorsConfig {
                    ux: Some(m.prior_ux.clone()),
                    uy: Some(m.prior_uy),
                    u: None,
                }),
                ..base(model.family_name())
            },
            StructuralModel::Multiplicative(m) => ScmConfig {
                d: Some(m.d()),
                alpha: Some(m.alpha.clone()),
                beta: Some(m.beta.clone()),
                w: Some(m.w.clone()),
                gamma: Some(m.gamma),
                priors: Some(PriorsConfig {
                    ux: Some(m.prior_ux.clone()),
                    uy: Some(m.prior_uy),
                    u: None,
                }),
                ..base(model.family_name())
            },
            StructuralModel::Scalar(m) => {
                let f_tilde = match &m.f_tilde {
                    ScalarFn::Power { q } => FTildeConfig::Power { q: *q },
                    ScalarFn::Custom { name, .. } => {
                        return Err(LcfError::Unsupported(format!(
                            "custom f_tilde `{name}` cannot be serialized"
                        )))
                    }
                };
                if let OffsetFn::Custom { name, .. } = &m.u0 {
                    return Err(LcfError::Unsupported(format!(
                        "custom u0 `{name}` cannot be serialized"
                    )));
                }
                ScmConfig {
                    d: Some(1),
                    alpha: Some(vec![m.alpha]),
                    u0: Some(m.u0.name().to_string()),
                    lipschitz_m: Some(m.lipschitz_m),
                    f_tilde: Some(f_tilde),
                    priors: Some(PriorsConfig {
                        u: Some(m.prior_u),
                        ..PriorsConfig::default()
                    }),
                    ..base(model.family_name())
                }
            }
            StructuralModel::Law(m) => ScmConfig {
                weights: Some(LawWeights {
                    w_g_k: m.w_g_k,
                    w_g_r: m.w_g_r,
                    w_g_s: m.w_g_s,
                    b_g: m.b_g,
                    sigma_g: m.sigma_g,
                    w_l_k: m.w_l_k,
                    w_l_r: m.w_l_r,
                    w_l_s: m.w_l_s,
                    b_l: m.b_l,
                    w_f_k: m.w_f_k,
                    w_f_r: m.w_f_r,
                    w_f_s: m.w_f_s,
                }),
                ..base(model.family_name())
            },
        })
    }

    pub fn to_model(&self) -> Result<(StructuralModel, Option<PathMask>)> {
        let fam = self.family.as_str();
        let model: StructuralModel = match fam {
            "linear-additive" | "multiplicative-binary" => {
                let alpha = required(self.alpha.clone(), "alpha", fam)?;
                let d = self.d.unwrap_or(alpha.len());
                if d != alpha.len() {
                    return Err(LcfError::InvalidConfig(format!(
                        "d = {d} but alpha has {} entries",
                        alpha.len()
                    )));
                }
                let beta = required(self.beta.clone(), "beta", fam)?;
                let w = required(self.w.clone(), "w", fam)?;
                let gamma = required(self.gamma, "gamma", fam)?;
                let ux = expand_ux(&self.priors, d)?;
                let uy = self.priors.as_ref().and_then(|p| p.uy).unwrap_or_default();
                if fam == "linear-additive" {
                    LinearAdditiveScm::with_priors(
                        alpha,
                        beta,
                        w,
                        gamma,
                        ux,
                        uy,
                        self.attr_domain.clone(),
                    )?
                    .into()
                } else {
                    let [a1, a2] =
                        <[f64; 2]>::try_from(self.attr_domain.as_slice()).map_err(|_| {
                            LcfError::InvalidConfig(
                                "multiplicative-binary needs exactly two attribute values".into(),
                            )
                        })?;
                    MultiplicativeBinaryScm::with_priors(alpha, beta, w, gamma, ux, uy, [a1, a2])?
                        .into()
                }
            }
            "scalar-monotone" => {
                let alpha = required(self.alpha.clone(), "alpha", fam)?;
                if alpha.len() != 1 {
                    return Err(LcfError::InvalidConfig(
                        "scalar-monotone alpha must have one entry".into(),
                    ));
                }
                let f = match required(self.f_tilde.clone(), "f_tilde", fam)? {
                    FTildeConfig::Power { q } => ScalarFn::power(q)?,
                };
                let u0 = match self.u0.as_deref().unwrap_or("exp") {
                    "exp" => OffsetFn::Exp,
                    "identity" => OffsetFn::Identity,
                    other => {
                        return Err(LcfError::InvalidConfig(format!("unknown u0 map `{other}`")))
                    }
                };
                let m = required(self.lipschitz_m, "lipschitz_m", fam)?;
                let prior = self.priors.as_ref().and_then(|p| p.u).unwrap_or_default();
                ScalarMonotoneScm::new(f, alpha[0], u0, m, prior, self.attr_domain.clone())?.into()
            }
            "law-school" => {
                let wt = required(self.weights.clone(), "weights", fam)?;
                let scm = LawSchoolScm {
                    w_g_k: wt.w_g_k,
                    w_g_r: wt.w_g_r,
                    w_g_s: wt.w_g_s,
                    b_g: wt.b_g,
                    sigma_g: wt.sigma_g,
                    w_l_k: wt.w_l_k,
                    w_l_r: wt.w_l_r,
                    w_l_s: wt.w_l_s,
                    b_l: wt.b_l,
                    w_f_k: wt.w_f_k,
                    w_f_r: wt.w_f_r,
                    w_f_s: wt.w_f_s,
                    attr_domain: self.attr_domain.clone(),
                };
                scm.validate()?;
                scm.into()
            }
            other => return Err(LcfError::InvalidConfig(format!("unknown family `{other}`"))),
        };
        let mask = match &self.mask {
            None => None,
            Some(m) => {
                if m.len() != model.feature_dim() {
                    return Err(LcfError::InvalidConfig(format!(
                        "mask has {} entries, model has {} features",
                        m.len(),
                        model.feature_dim()
                    )));
                }
                Some(PathMask { unfair: m.clone() })
            }
        };
        Ok((model, mask))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LcfError::InvalidConfig(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LcfError::InvalidConfig(e.to_string()))
    }
}

use serde::{Deserialize, Serialize};

use super::{Attribute, ExogenousSample, Outcome};
use crate::dist::DistSpec;
use crate::error::{check_len, LcfError, Result};
use crate::numeric::dot;

/// `X = alpha ⊙ U_X + beta * A`, `Y = wᵀX + gamma * U_Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearAdditiveScm {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub w: Vec<f64>,
    pub gamma: f64,
    pub prior_ux: Vec<DistSpec>,
    pub prior_uy: DistSpec,
    pub attr_domain: Vec<Attribute>,
}

fn validate_common(alpha: &[f64], beta: &[f64], w: &[f64], gamma: f64) -> Result<()> {
    let d = alpha.len();
    if d == 0 {
        return Err(LcfError::InvalidModel(
            "feature count d must be positive".into(),
        ));
    }
    check_len("beta", d, beta.len())?;
    check_len("w", d, w.len())?;
    if alpha
        .iter()
        .chain(beta)
        .chain(w)
        .chain(std::iter::once(&gamma))
        .any(|v| !v.is_finite())
    {
        return Err(LcfError::InvalidModel(
            "non-finite structural parameter".into(),
        ));
    }
    if let Some(i) = alpha.iter().position(|&v| v == 0.0) {
        return Err(LcfError::InvalidModel(format!(
            "alpha[{i}] must be nonzero"
        )));
    }
    if gamma == 0.0 {
        return Err(LcfError::InvalidModel("gamma must be nonzero".into()));
    }
    Ok(())
}

fn validate_domain(domain: &[Attribute]) -> Result<()> {
    if domain.iter().any(|v| !v.is_finite()) {
        return Err(LcfError::InvalidModel("non-finite attribute value".into()));
    }
    let mut sorted = domain.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 || sorted.len() != domain.len() {
        return Err(LcfError::InvalidModel(
            "attribute domain needs at least two distinct values and no duplicates".into(),
        ));
    }
    Ok(())
}

impl LinearAdditiveScm {
    /// Build with Uniform(0, 1) priors on every exogenous variable.
    pub fn new(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        w: Vec<f64>,
        gamma: f64,
        attr_domain: Vec<Attribute>,
    ) -> Result<Self> {
        let d = alpha.len();
        Self::with_priors(
            alpha,
            beta,
            w,
            gamma,
            vec![DistSpec::default(); d],
            DistSpec::default(),
            attr_domain,
        )
    }

    pub fn with_priors(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        w: Vec<f64>,
        gamma: f64,
        prior_ux: Vec<DistSpec>,
        prior_uy: DistSpec,
        attr_domain: Vec<Attribute>,
    ) -> Result<Self> {
        validate_common(&alpha, &beta, &w, gamma)?;
        check_len("prior_ux", alpha.len(), prior_ux.len())?;
        for p in prior_ux.iter().chain(std::iter::once(&prior_uy)) {
            p.validate()?;
        }
        validate_domain(&attr_domain)?;
        Ok(Self {
            alpha,
            beta,
            w,
            gamma,
            prior_ux,
            prior_uy,
            attr_domain,
        })
    }

    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    pub(crate) fn check_attr(&self, a: Attribute) -> Result<()> {
        if self.attr_domain.contains(&a) {
            Ok(())
        } else {
            Err(LcfError::AttributeOutOfDomain(a))
        }
    }

    /// `‖w ⊙ alpha‖²`
    pub fn weighted_alpha_norm_sq(&self) -> f64 {
        self.w
            .iter()
            .zip(&self.alpha)
            .map(|(w, a)| (w * a) * (w * a))
            .collect::<crate::numeric::KahanSum>()
            .total()
    }

    pub fn features(&self, ux: &[f64], a: Attribute) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.beta)
            .zip(ux)
            .map(|((al, be), u)| al * u + be * a)
            .collect()
    }

    pub(crate) fn eval(&self, u: &ExogenousSample, a: Attribute) -> Outcome {
        let x = self.features(&u.ux, a);
        let y = dot(&self.w, &x) + self.gamma * u.uy.unwrap_or(0.0);
        Outcome { x, y }
    }

    pub(crate) fn invert(&self, x: &[f64], a: Attribute) -> Vec<f64> {
        x.iter()
            .zip(&self.alpha)
            .zip(&self.beta)
            .map(|((x, al), be)| (x - be * a) / al)
            .collect()
    }
}

/// `X = A * (alpha ⊙ U_X + beta)`, `Y = wᵀX + gamma * U_Y`, `A ∈ {a1, a2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicativeBinaryScm {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub w: Vec<f64>,
    pub gamma: f64,
    pub prior_ux: Vec<DistSpec>,
    pub prior_uy: DistSpec,
    pub attr_domain: Vec<Attribute>,
}

impl MultiplicativeBinaryScm {
    pub fn new(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        w: Vec<f64>,
        gamma: f64,
        attrs: [Attribute; 2],
    ) -> Result<Self> {
        let d = alpha.len();
        Self::with_priors(
            alpha,
            beta,
            w,
            gamma,
            vec![DistSpec::default(); d],
            DistSpec::default(),
            attrs,
        )
    }

    pub fn with_priors(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        w: Vec<f64>,
        gamma: f64,
        prior_ux: Vec<DistSpec>,
        prior_uy: DistSpec,
        attrs: [Attribute; 2],
    ) -> Result<Self> {
        validate_common(&alpha, &beta, &w, gamma)?;
        check_len("prior_ux", alpha.len(), prior_ux.len())?;
        for p in prior_ux.iter().chain(std::iter::once(&prior_uy)) {
            p.validate()?;
        }
        validate_domain(&attrs)?;
        let [a1, a2] = attrs;
        if a1 == 0.0 || a2 == 0.0 {
            return Err(LcfError::InvalidModel(
                "attribute values must be nonzero".into(),
            ));
        }
        if a1 * a2 <= 0.0 {
            return Err(LcfError::InvalidModel(
                "attribute values must share a sign (a1 * a2 > 0)".into(),
            ));
        }
        Ok(Self {
            alpha,
            beta,
            w,
            gamma,
            prior_ux,
            prior_uy,
            attr_domain: attrs.to_vec(),
        })
    }

    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    pub fn a1a2(&self) -> f64 {
        self.attr_domain[0] * self.attr_domain[1]
    }

    pub fn weighted_alpha_norm_sq(&self) -> f64 {
        self.w
            .iter()
            .zip(&self.alpha)
            .map(|(w, a)| (w * a) * (w * a))
            .collect::<crate::numeric::KahanSum>()
            .total()
    }

    pub(crate) fn eval(&self, u: &ExogenousSample, a: Attribute) -> Outcome {
        let x: Vec<f64> = self
            .alpha
            .iter()
            .zip(&self.beta)
            .zip(&u.ux)
            .map(|((al, be), u)| a * (al * u + be))
            .collect();
        let y = dot(&self.w, &x) + self.gamma * u.uy.unwrap_or(0.0);
        Outcome { x, y }
    }

    pub(crate) fn invert(&self, x: &[f64], a: Attribute) -> Result<Vec<f64>> {
        if a == 0.0 {
            return Err(LcfError::InvalidModel("cannot abduct with a = 0".into()));
        }
        Ok(x.iter()
            .zip(&self.alpha)
            .zip(&self.beta)
            .map(|((x, al), be)| (x / a - be) / al)
            .collect())
    }
}

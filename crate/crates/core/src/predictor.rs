//! Predictor families, the response constant `T`, prediction gradients with
//! respect to the exogenous state, and sufficient-condition checks.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, LcfError, Result};
use crate::numeric::{dot, KahanSum};
use crate::scm::{Attribute, ExogenousSample, LinearAdditiveScm, PathMask, StructuralModel};

/// A fitted predictor. Exogenous-coordinate weights (`theta`, `phi`) always
/// span the flattened coordinates `(u_X..., u_Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PredictorSpec {
    /// `θᵀx + c`
    Unfair {
        theta: Vec<f64>,
        #[serde(rename = "p3")]
        c: f64,
    },
    /// `φᵀu + c`
    CfBaseline {
        #[serde(rename = "theta")]
        phi: Vec<f64>,
        #[serde(rename = "p3")]
        c: f64,
    },
    /// `p1·y̌² + p2·y̌ + p3 + θᵀu`
    LcfQuadratic {
        p1: f64,
        p2: f64,
        p3: f64,
        theta: Vec<f64>,
    },
    /// `p1·y̌^e + p2·y̌ + p3 + θᵀu`, defined for `y̌ ≥ 0`
    PowerG {
        p1: f64,
        p2: f64,
        p3: f64,
        #[serde(default = "default_exponent")]
        exponent: f64,
        theta: Vec<f64>,
    },
    /// `p1·y̌² + p2 + θ·u` for a scalar exogenous variable
    ScalarQuadratic { p1: f64, p2: f64, theta: f64 },
    /// `p1·y̌² + p2·y̌ + p3`
    MultiplicativeConvex { p1: f64, p2: f64, p3: f64 },
}

fn default_exponent() -> f64 {
    1.5
}

/// Values a predictor may read. `y_check` is the counterfactual outcome (or
/// its mean over all alternate attribute values); `u` holds flattened
/// exogenous coordinates.
#[derive(Debug, Clone, Copy, Default)]
pub struct PredictorInput<'a> {
    pub y_check: Option<f64>,
    pub u: Option<&'a [f64]>,
    pub x: Option<&'a [f64]>,
}

/// Outcome of [`check_relaxed_conditions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub convex_ok: bool,
    pub additive_ok: bool,
    pub lipschitz_k: f64,
    pub lipschitz_bound: f64,
    pub satisfied: bool,
}

impl PredictorSpec {
    pub fn variant_name(&self) -> &'static str {
        match self {
            PredictorSpec::Unfair { .. } => "unfair",
            PredictorSpec::CfBaseline { .. } => "cf-baseline",
            PredictorSpec::LcfQuadratic { .. } => "lcf-quadratic",
            PredictorSpec::PowerG { .. } => "power-g",
            PredictorSpec::ScalarQuadratic { .. } => "scalar-quadratic",
            PredictorSpec::MultiplicativeConvex { .. } => "multiplicative-convex",
        }
    }

    /// Leading coefficient, when the family has one.
    pub fn p1(&self) -> Option<f64> {
        match self {
            PredictorSpec::LcfQuadratic { p1, .. }
            | PredictorSpec::PowerG { p1, .. }
            | PredictorSpec::ScalarQuadratic { p1, .. }
            | PredictorSpec::MultiplicativeConvex { p1, .. } => Some(*p1),
            _ => None,
        }
    }

    pub fn uses_y_check(&self) -> bool {
        !matches!(
            self,
            PredictorSpec::Unfair { .. } | PredictorSpec::CfBaseline { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        let ok = match self {
            PredictorSpec::Unfair { theta, c } => finite(theta) && c.is_finite(),
            PredictorSpec::CfBaseline { phi, c } => finite(phi) && c.is_finite(),
            PredictorSpec::LcfQuadratic { p1, p2, p3, theta } => {
                if *p1 <= 0.0 {
                    return Err(LcfError::InvalidModel(format!(
                        "p1 = {p1} must be positive"
                    )));
                }
                finite(&[*p1, *p2, *p3]) && finite(theta)
            }
            PredictorSpec::PowerG {
                p1,
                p2,
                p3,
                exponent,
                theta,
            } => {
                if *exponent <= 1.0 {
                    return Err(LcfError::InvalidModel(format!(
                        "exponent = {exponent} must exceed 1"
                    )));
                }
                finite(&[*p1, *p2, *p3, *exponent]) && finite(theta)
            }
            PredictorSpec::ScalarQuadratic { p1, p2, theta } => finite(&[*p1, *p2, *theta]),
            PredictorSpec::MultiplicativeConvex { p1, p2, p3 } => {
                if *p1 <= 0.0 {
                    return Err(LcfError::InvalidModel(format!(
                        "p1 = {p1} must be positive"
                    )));
                }
                finite(&[*p1, *p2, *p3])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(LcfError::NonFinite("predictor parameter"))
        }
    }

    /// `∂g/∂y̌` at `y_check`.
    fn outer_derivative(&self, y_check: f64) -> Result<f64> {
        Ok(match self {
            PredictorSpec::Unfair { .. } | PredictorSpec::CfBaseline { .. } => 0.0,
            PredictorSpec::LcfQuadratic { p1, p2, .. }
            | PredictorSpec::MultiplicativeConvex { p1, p2, .. } => 2.0 * p1 * y_check + p2,
            PredictorSpec::PowerG {
                p1, p2, exponent, ..
            } => {
                check_power_domain(y_check)?;
                p1 * exponent * y_check.powf(exponent - 1.0) + p2
            }
            PredictorSpec::ScalarQuadratic { p1, .. } => 2.0 * p1 * y_check,
        })
    }

    /// Weights of the explicit (additive) exogenous term.
    fn explicit_u_weights(&self) -> Option<Vec<f64>> {
        match self {
            PredictorSpec::CfBaseline { phi, .. } => Some(phi.clone()),
            PredictorSpec::LcfQuadratic { theta, .. } | PredictorSpec::PowerG { theta, .. } => {
                Some(theta.clone())
            }
            PredictorSpec::ScalarQuadratic { theta, .. } => Some(vec![*theta]),
            _ => None,
        }
    }
}

fn check_power_domain(y_check: f64) -> Result<()> {
    if y_check < 0.0 {
        Err(LcfError::OutsideDomain {
            what: "power predictor input y_check",
            value: y_check,
        })
    } else {
        Ok(())
    }
}

fn need<T>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(LcfError::MissingInput(name))
}

/// Evaluate a predictor. Pure: identical inputs give identical outputs.
pub fn predict(spec: &PredictorSpec, input: &PredictorInput<'_>) -> Result<f64> {
    let y_hat = match spec {
        PredictorSpec::Unfair { theta, c } => {
            let x = need(input.x, "x")?;
            check_len("unfair weights", theta.len(), x.len())?;
            dot(theta, x) + c
        }
        PredictorSpec::CfBaseline { phi, c } => {
            let u = need(input.u, "u")?;
            check_len("baseline weights", phi.len(), u.len())?;
            dot(phi, u) + c
        }
        PredictorSpec::LcfQuadratic { p1, p2, p3, theta } => {
            let yc = need(input.y_check, "y_check")?;
            let u = need(input.u, "u")?;
            check_len("theta", theta.len(), u.len())?;
            p1 * yc * yc + p2 * yc + p3 + dot(theta, u)
        }
        PredictorSpec::PowerG {
            p1,
            p2,
            p3,
            exponent,
            theta,
        } => {
            let yc = need(input.y_check, "y_check")?;
            check_power_domain(yc)?;
            let u = need(input.u, "u")?;
            check_len("theta", theta.len(), u.len())?;
            p1 * yc.powf(*exponent) + p2 * yc + p3 + dot(theta, u)
        }
        PredictorSpec::ScalarQuadratic { p1, p2, theta } => {
            let yc = need(input.y_check, "y_check")?;
            let u = need(input.u, "u")?;
            check_len("scalar exogenous input", 1, u.len())?;
            p1 * yc * yc + p2 + theta * u[0]
        }
        PredictorSpec::MultiplicativeConvex { p1, p2, p3 } => {
            let yc = need(input.y_check, "y_check")?;
            p1 * yc * yc + p2 * yc + p3
        }
    };
    if y_hat.is_finite() {
        Ok(y_hat)
    } else {
        Err(LcfError::NonFinite("prediction"))
    }
}

/// Mean of a set of counterfactual outcomes (one per alternate attribute).
pub fn y_check_mean(values: &[f64]) -> Result<f64> {
    values
        .iter()
        .copied()
        .collect::<KahanSum>()
        .mean()
        .ok_or(LcfError::Empty("counterfactual outcomes"))
}

/// `T = 1 / (η (‖w ⊙ α‖² + γ²))` and its family-specific analogues.
pub fn compute_t(scm: &StructuralModel, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let denom = match scm {
        StructuralModel::Linear(m) => m.weighted_alpha_norm_sq() + m.gamma * m.gamma,
        StructuralModel::Multiplicative(m) => {
            m.a1a2() * m.weighted_alpha_norm_sq() + m.gamma * m.gamma
        }
        StructuralModel::Law(m) => m.w_f_k * m.w_f_k,
        StructuralModel::Scalar(_) => {
            return Err(LcfError::Unsupported(
                "the scalar-monotone family has no closed-form T; use 1/(eta*M)".into(),
            ))
        }
    };
    Ok(1.0 / (eta * denom))
}

/// `T` from the split norms `‖w_P ⊙ α_P‖² + ‖w_Pᶜ ⊙ α_Pᶜ‖² + γ²`.
pub fn compute_t_split(scm: &LinearAdditiveScm, mask: &PathMask, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    check_len("path mask", scm.d(), mask.len())?;
    let mut on_path = KahanSum::new();
    let mut off_path = KahanSum::new();
    for i in 0..scm.d() {
        let v = (scm.w[i] * scm.alpha[i]).powi(2);
        if mask.unfair[i] {
            on_path.add(v);
        } else {
            off_path.add(v);
        }
    }
    Ok(1.0 / (eta * (on_path.total() + off_path.total() + scm.gamma * scm.gamma)))
}

/// Coefficient giving an exact zero future gap (`T/2`), or `1/(2ηM)` with
/// the declared constant for the scalar family.
pub fn perfect_p1(scm: &StructuralModel, eta: f64) -> Result<f64> {
    match scm {
        StructuralModel::Scalar(m) => {
            check_eta(eta)?;
            Ok(1.0 / (2.0 * eta * m.lipschitz_m))
        }
        other => Ok(compute_t(other, eta)? / 2.0),
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(LcfError::InvalidConfig(format!(
            "eta = {eta} must be positive"
        )))
    }
}

/// `∂y̌/∂u` where `y̌` averages the outcome over `chain` attributes.
fn chain_factor(
    scm: &StructuralModel,
    u: &ExogenousSample,
    chain: &[Attribute],
) -> Result<Vec<f64>> {
    if chain.is_empty() {
        return Err(LcfError::Empty("counterfactual attribute set"));
    }
    let mut acc = vec![KahanSum::new(); scm.u_dim()];
    for &b in chain {
        for (s, g) in acc.iter_mut().zip(scm.outcome_gradient(u, b)?) {
            s.add(g);
        }
    }
    let n = chain.len() as f64;
    Ok(acc.iter().map(|s| s.total() / n).collect())
}

/// Analytic gradient of `ŷ = g(y̌(u), u)` with respect to the flattened
/// exogenous coordinates.
///
/// `own` is the attribute of the world the agent lives in (it fixes the
/// observable features read by [`PredictorSpec::Unfair`]); `chain` lists the
/// attributes whose outcomes are averaged into the `y̌` input, which is
/// supplied by value in `y_check_input`. Immutable coordinates get zero.
pub fn grad_wrt_u(
    spec: &PredictorSpec,
    scm: &StructuralModel,
    u: &ExogenousSample,
    y_check_input: f64,
    own: Attribute,
    chain: &[Attribute],
) -> Result<Vec<f64>> {
    spec.validate()?;
    scm.check_attr(own)?;
    let n = scm.u_dim();
    check_len("exogenous sample", n, u.dim())?;
    let mut grad = match spec {
        PredictorSpec::Unfair { theta, .. } => scm.features_vjp(u, own, theta)?,
        _ => vec![0.0; n],
    };
    if spec.uses_y_check() {
        let outer = spec.outer_derivative(y_check_input)?;
        for (g, c) in grad.iter_mut().zip(chain_factor(scm, u, chain)?) {
            *g += outer * c;
        }
    }
    if let Some(explicit) = spec.explicit_u_weights() {
        check_len("exogenous weights", n, explicit.len())?;
        for (g, t) in grad.iter_mut().zip(explicit) {
            *g += t;
        }
    }
    for (g, r) in grad.iter_mut().zip(scm.responsive()) {
        if !r {
            *g = 0.0;
        }
    }
    if grad.iter().all(|g| g.is_finite()) {
        Ok(grad)
    } else {
        Err(LcfError::NonFinite("prediction gradient"))
    }
}

/// Evaluate the deployed predictor as a function of `u` alone, recomputing
/// `y̌` (mean over `chain`) and the features under `own`. Stochastic
/// families use their conditional means.
pub fn predict_at(
    spec: &PredictorSpec,
    scm: &StructuralModel,
    u: &ExogenousSample,
    own: Attribute,
    chain: &[Attribute],
) -> Result<f64> {
    let coords = u.coords();
    let x = if matches!(spec, PredictorSpec::Unfair { .. }) {
        Some(scm.forward(u, own, None)?.x)
    } else {
        None
    };
    let y_check = if spec.uses_y_check() {
        if chain.is_empty() {
            return Err(LcfError::Empty("counterfactual attribute set"));
        }
        let ys = chain
            .iter()
            .map(|&b| scm.forward(u, b, None).map(|o| o.y))
            .collect::<Result<Vec<_>>>()?;
        Some(y_check_mean(&ys)?)
    } else {
        None
    };
    predict(
        spec,
        &PredictorInput {
            y_check,
            u: Some(&coords),
            x: x.as_deref(),
        },
    )
}

/// Central-difference gradient of [`predict_at`] with steps
/// `h_i = 1e-6 · max(1, |u_i|)`. Immutable coordinates get zero.
pub fn finite_diff_grad(
    spec: &PredictorSpec,
    scm: &StructuralModel,
    u: &ExogenousSample,
    own: Attribute,
    chain: &[Attribute],
) -> Result<Vec<f64>> {
    let base = u.coords();
    let responsive = scm.responsive();
    let mut grad = vec![0.0; base.len()];
    for i in 0..base.len() {
        if !responsive.get(i).copied().unwrap_or(true) {
            continue;
        }
        let h = 1e-6 * base[i].abs().max(1.0);
        let mut plus = base.clone();
        plus[i] += h;
        let mut minus = base.clone();
        minus[i] -= h;
        let f_plus = predict_at(spec, scm, &u.with_coords(&plus)?, own, chain)?;
        let f_minus = predict_at(spec, scm, &u.with_coords(&minus)?, own, chain)?;
        let g = (f_plus - f_minus) / (2.0 * h);
        if !g.is_finite() {
            return Err(LcfError::NonFinite("finite-difference gradient"));
        }
        grad[i] = g;
    }
    Ok(grad)
}

/// Check the sufficient conditions under which a predictor strictly shrinks
/// the future factual/counterfactual gap.
///
/// `y_domain` bounds the counterfactual outcome and is required for
/// [`PredictorSpec::PowerG`]. For [`PredictorSpec::ScalarQuadratic`] the
/// bound is `1/(η α² M)` with `M` the larger of the declared and the
/// numerically estimated Lipschitz constant of `Γ`, and the bound itself is
/// admissible.
pub fn check_relaxed_conditions(
    spec: &PredictorSpec,
    scm: &StructuralModel,
    eta: f64,
    y_domain: Option<(f64, f64)>,
) -> Result<ConditionReport> {
    check_eta(eta)?;
    spec.validate()?;
    let report = |convex_ok: bool, k: f64, bound: f64, closed: bool| {
        let within = if closed { k <= bound } else { k < bound };
        ConditionReport {
            convex_ok,
            additive_ok: true,
            lipschitz_k: k,
            lipschitz_bound: bound,
            satisfied: convex_ok && within,
        }
    };
    match (spec, scm) {
        (
            PredictorSpec::LcfQuadratic { p1, .. },
            StructuralModel::Linear(_) | StructuralModel::Law(_),
        ) => Ok(report(
            *p1 > 0.0,
            2.0 * p1,
            2.0 * compute_t(scm, eta)?,
            false,
        )),
        (PredictorSpec::MultiplicativeConvex { p1, .. }, StructuralModel::Multiplicative(_)) => Ok(
            report(*p1 > 0.0, 2.0 * p1, 2.0 * compute_t(scm, eta)?, false),
        ),
        (PredictorSpec::PowerG { p1, exponent, .. }, StructuralModel::Linear(_)) => {
            let (lo, hi) = y_domain.ok_or(LcfError::MissingInput("y_check domain"))?;
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(LcfError::InvalidConfig(format!(
                    "y_check domain [{lo}, {hi}] must satisfy 0 < lo <= hi"
                )));
            }
            let second = |y: f64| p1 * exponent * (exponent - 1.0) * y.powf(exponent - 2.0);
            // y^(e-2) is monotone, so the supremum sits at an endpoint
            let k = second(lo).abs().max(second(hi).abs());
            Ok(report(*p1 > 0.0, k, 2.0 * compute_t(scm, eta)?, false))
        }
        (PredictorSpec::ScalarQuadratic { p1, .. }, StructuralModel::Scalar(m)) => {
            let m_eff = m.lipschitz_check().effective();
            let bound = 1.0 / (eta * m.alpha * m.alpha * m_eff);
            Ok(report(*p1 > 0.0, *p1, bound, true))
        }
        (spec, scm) => Err(LcfError::Unsupported(format!(
            "no sufficient-condition check for {} on the {} family",
            spec.variant_name(),
            scm.family_name()
        ))),
    }
}

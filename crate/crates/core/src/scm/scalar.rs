use std::fmt;
use std::sync::Arc;

use super::Attribute;
use crate::dist::DistSpec;
use crate::error::{LcfError, Result};

const VALIDATION_GRID: usize = 10_000;

type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The outcome link `f̃` in `Y = f̃(alpha * U + u0(A))`.
#[derive(Clone)]
pub enum ScalarFn {
    /// `s ↦ s^q` on `s > 0`, `0 < q < 1`.
    Power { q: f64 },
    /// User-supplied function and derivative.
    Custom {
        name: String,
        f: ScalarMap,
        df: ScalarMap,
    },
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Power { q } => write!(f, "Power {{ q: {q} }}"),
            ScalarFn::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl PartialEq for ScalarFn {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ScalarFn::Power { q: a }, ScalarFn::Power { q: b }) => a == b,
            (ScalarFn::Custom { name: a, f: fa, .. }, ScalarFn::Custom { name: b, f: fb, .. }) => {
                a == b && Arc::ptr_eq(fa, fb)
            }
            _ => false,
        }
    }
}

impl ScalarFn {
    pub fn power(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(LcfError::InvalidModel(format!(
                "power exponent must lie in (0, 1), got {q}"
            )));
        }
        Ok(ScalarFn::Power { q })
    }

    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarFn::Custom {
            name: name.into(),
            f: Arc::new(f),
            df: Arc::new(df),
        }
    }

    fn in_domain(&self, s: f64) -> bool {
        match self {
            ScalarFn::Power { .. } => s > 0.0 && s.is_finite(),
            ScalarFn::Custom { .. } => s.is_finite(),
        }
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        if !self.in_domain(s) {
            return Err(LcfError::OutsideDomain {
                what: "f_tilde",
                value: s,
            });
        }
        let v = match self {
            ScalarFn::Power { q } => s.powf(*q),
            ScalarFn::Custom { f, .. } => f(s),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(LcfError::OutsideDomain {
                what: "f_tilde",
                value: s,
            })
        }
    }

    pub fn derivative(&self, s: f64) -> Result<f64> {
        if !self.in_domain(s) {
            return Err(LcfError::OutsideDomain {
                what: "f_tilde'",
                value: s,
            });
        }
        let v = match self {
            ScalarFn::Power { q } => q * s.powf(q - 1.0),
            ScalarFn::Custom { df, .. } => df(s),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(LcfError::OutsideDomain {
                what: "f_tilde'",
                value: s,
            })
        }
    }
}

/// The attribute offset `u0(A)`.
#[derive(Clone)]
pub enum OffsetFn {
    Exp,
    Identity,
    Custom { name: String, f: ScalarMap },
}

impl fmt::Debug for OffsetFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OffsetFn::Exp => write!(f, "Exp"),
            OffsetFn::Identity => write!(f, "Identity"),
            OffsetFn::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl PartialEq for OffsetFn {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (OffsetFn::Exp, OffsetFn::Exp) | (OffsetFn::Identity, OffsetFn::Identity) => true,
            (OffsetFn::Custom { name: a, f: fa }, OffsetFn::Custom { name: b, f: fb }) => {
                a == b && Arc::ptr_eq(fa, fb)
            }
            _ => false,
        }
    }
}

impl OffsetFn {
    pub fn apply(&self, a: Attribute) -> f64 {
        match self {
            OffsetFn::Exp => a.exp(),
            OffsetFn::Identity => a,
            OffsetFn::Custom { f, .. } => f(a),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            OffsetFn::Exp => "exp",
            OffsetFn::Identity => "identity",
            OffsetFn::Custom { name, .. } => name,
        }
    }
}

/// Numerical check of the declared Lipschitz constant of
/// `Γ(s) = f̃(s) f̃'(s)` over the model's argument range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzCheck {
    pub declared: f64,
    pub estimated: f64,
}

impl LipschitzCheck {
    pub fn declared_is_valid(&self) -> bool {
        self.declared >= self.estimated * (1.0 - 1e-6)
    }

    /// The constant actually used by condition checks.
    pub fn effective(&self) -> f64 {
        self.declared.max(self.estimated)
    }
}

/// `X = alpha * U + u0(A)` (a scalar), `Y = f̃(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMonotoneScm {
    pub f_tilde: ScalarFn,
    pub alpha: f64,
    pub u0: OffsetFn,
    pub lipschitz_m: f64,
    pub prior_u: DistSpec,
    pub attr_domain: Vec<Attribute>,
    increasing: bool,
    lipschitz_check: LipschitzCheck,
}

impl ScalarMonotoneScm {
    pub fn new(
        f_tilde: ScalarFn,
        alpha: f64,
        u0: OffsetFn,
        lipschitz_m: f64,
        prior_u: DistSpec,
        attr_domain: Vec<Attribute>,
    ) -> Result<Self> {
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(LcfError::InvalidModel(
                "alpha must be finite and nonzero".into(),
            ));
        }
        if !(lipschitz_m > 0.0 && lipschitz_m.is_finite()) {
            return Err(LcfError::InvalidModel(
                "Lipschitz constant M must be positive".into(),
            ));
        }
        prior_u.validate()?;
        if attr_domain.len() < 2 {
            return Err(LcfError::InvalidModel(
                "attribute domain needs two values".into(),
            ));
        }
        let mut scm = Self {
            f_tilde,
            alpha,
            u0,
            lipschitz_m,
            prior_u,
            attr_domain,
            increasing: true,
            lipschitz_check: LipschitzCheck {
                declared: lipschitz_m,
                estimated: 0.0,
            },
        };
        scm.validate_shape()?;
        Ok(scm)
    }

    /// Range of the argument `s = alpha * u + u0(a)` implied by the prior
    /// support and the attribute domain.
    pub fn argument_range(&self) -> (f64, f64) {
        let (lo, hi) = self.prior_u.effective_support();
        let (ulo, uhi) = if self.alpha > 0.0 {
            (self.alpha * lo, self.alpha * hi)
        } else {
            (self.alpha * hi, self.alpha * lo)
        };
        let offsets = self.attr_domain.iter().map(|&a| self.u0.apply(a));
        let omin = offsets.clone().fold(f64::INFINITY, f64::min);
        let omax = offsets.fold(f64::NEG_INFINITY, f64::max);
        (ulo + omin, uhi + omax)
    }

    fn validate_shape(&mut self) -> Result<()> {
        let (lo, hi) = self.argument_range();
        let n = VALIDATION_GRID;
        let step = (hi - lo) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
        let mut f = Vec::with_capacity(n);
        let mut df = Vec::with_capacity(n);
        for &s in &grid {
            f.push(self.f_tilde.value(s)?);
            df.push(self.f_tilde.derivative(s)?);
        }
        let increasing = df.iter().all(|&d| d > 0.0);
        let decreasing = df.iter().all(|&d| d < 0.0);
        if !(increasing || decreasing) {
            return Err(LcfError::InvalidModel(format!(
                "f_tilde is not strictly monotone on [{lo}, {hi}]"
            )));
        }
        if !df.windows(2).all(|p| p[1] < p[0]) {
            return Err(LcfError::InvalidModel(format!(
                "f_tilde is not strictly concave on [{lo}, {hi}]"
            )));
        }
        let gamma: Vec<f64> = f.iter().zip(&df).map(|(a, b)| a * b).collect();
        if gamma.iter().any(|&g| g < 0.0) {
            return Err(LcfError::InvalidModel(
                "Γ(s) = f̃(s) f̃'(s) must be nonnegative".into(),
            ));
        }
        // Γ must be ordered like f̃ (f̃(s) >= f̃(s') implies Γ(s) >= Γ(s'))
        let tol = 1e-12 * gamma.iter().fold(1.0_f64, |m, g| m.max(g.abs()));
        let ordered = gamma.windows(2).all(|p| {
            if increasing {
                p[1] >= p[0] - tol
            } else {
                p[1] <= p[0] + tol
            }
        });
        if !ordered {
            return Err(LcfError::InvalidModel(
                "Γ(s) is not ordered consistently with f̃".into(),
            ));
        }
        let estimated = if step > 0.0 {
            gamma
                .windows(2)
                .map(|p| (p[1] - p[0]).abs() / step)
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        self.increasing = increasing;
        self.lipschitz_check = LipschitzCheck {
            declared: self.lipschitz_m,
            estimated,
        };
        if !self.lipschitz_check.declared_is_valid() {
            log::warn!(
                "declared Lipschitz constant M = {} is below the grid estimate {} of Γ on [{lo}, {hi}]; condition checks use the larger value",
                self.lipschitz_m,
                estimated
            );
        }
        Ok(())
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    pub fn lipschitz_check(&self) -> LipschitzCheck {
        self.lipschitz_check
    }

    pub fn argument(&self, u: f64, a: Attribute) -> f64 {
        self.alpha * u + self.u0.apply(a)
    }

    pub(crate) fn eval(&self, u: f64, a: Attribute) -> Result<super::Outcome> {
        let s = self.argument(u, a);
        Ok(super::Outcome {
            x: vec![s],
            y: self.f_tilde.value(s)?,
        })
    }

    pub(crate) fn invert(&self, x: f64, a: Attribute) -> Result<f64> {
        // the feature is the argument itself; reject values f̃ cannot take
        self.f_tilde.value(x)?;
        Ok((x - self.u0.apply(a)) / self.alpha)
    }

    pub(crate) fn outcome_derivative(&self, u: f64, a: Attribute) -> Result<f64> {
        Ok(self.alpha * self.f_tilde.derivative(self.argument(u, a))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_model(domain: Vec<f64>) -> ScalarMonotoneScm {
        ScalarMonotoneScm::new(
            ScalarFn::power(2.0 / 3.0).unwrap(),
            0.5987,
            OffsetFn::Exp,
            (-2.0_f64 / 3.0).exp() / 9.0,
            DistSpec::default(),
            domain,
        )
        .unwrap()
    }

    #[test]
    fn forward_matches_closed_form() {
        let scm = power_model(vec![0.0, 1.0]);
        let o = scm.eval(1.0, 0.0).unwrap();
        // (0.5987 + 1)^(2/3)
        let expected = 1.5987_f64.powf(2.0 / 3.0);
        assert!((o.y - expected).abs() < 1e-15);
        assert!((o.y - 1.3673).abs() < 1e-4);
    }

    #[test]
    fn power_is_increasing_concave() {
        let scm = power_model(vec![0.0, 1.0]);
        assert!(scm.is_increasing());
        // Γ(s) = (2/3) s^(1/3), Γ'(s) = (2/9) s^(-2/3): max at s = 1
        let est = scm.lipschitz_check().estimated;
        assert!((est - 2.0 / 9.0).abs() < 1e-3, "{est}");
        assert!(!scm.lipschitz_check().declared_is_valid());
    }

    #[test]
    fn rejects_non_concave() {
        let convex = ScalarFn::custom("square", |s| s * s, |s| 2.0 * s);
        let r = ScalarMonotoneScm::new(
            convex,
            1.0,
            OffsetFn::Exp,
            1.0,
            DistSpec::default(),
            vec![0.0, 1.0],
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_domain_violation() {
        // log-offset pushes the argument below zero where s^q is undefined
        let r = ScalarMonotoneScm::new(
            ScalarFn::power(0.5).unwrap(),
            1.0,
            OffsetFn::Identity,
            1.0,
            DistSpec::default(),
            vec![-2.0, 1.0],
        );
        assert!(matches!(r, Err(LcfError::OutsideDomain { .. })));
        let scm = power_model(vec![0.0, 1.0]);
        assert!(scm.eval(-5.0, 0.0).is_err());
    }

    #[test]
    fn invert_round_trip() {
        let scm = power_model(vec![0.0, 1.0]);
        let o = scm.eval(0.37, 1.0).unwrap();
        let u = scm.invert(o.x[0], 1.0).unwrap();
        assert!((u - 0.37).abs() < 1e-14);
    }
}

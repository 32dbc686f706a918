//! Learning predictors from data: posterior/counterfactual batches,
//! empirical-risk minimization for every predictor family, and estimation
//! of structural parameters.

mod estimate;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Record};
use crate::error::{LcfError, Result};
use crate::linalg::{AdamState, Gram, LsSolution};
use crate::numeric::{mix_seed, sigmoid};
use crate::predictor::{compute_t, compute_t_split, perfect_p1, y_check_mean, PredictorSpec};
use crate::scm::{
    path_dependent_counterfactual, Attribute, ExogenousSample, McmcConfig, PathMask,
    StructuralModel,
};

pub use estimate::{estimate_law_params, estimate_linear_scm, LawEmConfig, LawEmDiagnostics};

/// Bound on the logit of `p1 / T` in trainable mode.
pub const P1_LOGIT_BOUND: f64 = 12.0;

/// How the leading coefficient `p1` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum P1Mode {
    /// The value giving an exact zero future gap.
    Perfect,
    /// A fixed value, which must lie in `(0, T)`.
    Relaxed { p1: f64 },
    /// Learned as `p1 = T · sigmoid(s)` with `|s| ≤ 12`.
    Trainable,
}

impl P1Mode {
    /// Parse `perfect`, `relaxed:<value>` or `train`.
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "perfect" => Ok(P1Mode::Perfect),
            "train" | "trainable" => Ok(P1Mode::Trainable),
            other => match other.strip_prefix("relaxed:") {
                Some(v) => v
                    .parse::<f64>()
                    .map(|p1| P1Mode::Relaxed { p1 })
                    .map_err(|_| LcfError::InvalidConfig(format!("bad p1 value `{v}`"))),
                None => Err(LcfError::InvalidConfig(format!(
                    "p1 mode `{other}` is not one of perfect, relaxed:<value>, train"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    NormalEquations,
    /// Full-batch Adam.
    GradientDescent {
        lr: f64,
        epochs: usize,
    },
}

/// Exogenous coordinates read by the additive term `h(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HInputs {
    /// Only `u_X`.
    ExogenousX,
    /// Every exogenous coordinate.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub m: usize,
    pub eta: f64,
    pub p1_mode: P1Mode,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub h_inputs: HInputs,
    pub mcmc: McmcConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            m: 100,
            eta: 10.0,
            p1_mode: P1Mode::Perfect,
            optimizer: Optimizer::NormalEquations,
            seed: 0,
            h_inputs: HInputs::ExogenousX,
            mcmc: McmcConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(LcfError::InvalidConfig("m must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(LcfError::InvalidConfig(format!(
                "eta = {} must be positive",
                self.eta
            )));
        }
        if let Optimizer::GradientDescent { lr, epochs } = self.optimizer {
            if !(lr > 0.0 && lr.is_finite()) || epochs == 0 {
                return Err(LcfError::InvalidConfig(
                    "gradient descent needs lr > 0 and epochs >= 1".into(),
                ));
            }
        }
        self.mcmc.validate()
    }
}

/// One posterior draw for one record with its factual and counterfactual
/// outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualBundle {
    pub draw: usize,
    pub u: ExogenousSample,
    pub x: Vec<f64>,
    pub y: f64,
    /// `(ǎ, y̌)` per alternate attribute value.
    pub y_checks: Vec<(Attribute, f64)>,
    pub y_check_mean: f64,
    pub y_check_pd: Option<f64>,
}

/// Draw `m` exogenous samples for one record and evaluate both worlds.
/// Stochastic families use conditional means. Deterministic given `seed`.
pub fn sample_posterior_batch(
    scm: &StructuralModel,
    record: &Record,
    m: usize,
    seed: u64,
    mcmc: &McmcConfig,
    mask: Option<&PathMask>,
) -> Result<Vec<CounterfactualBundle>> {
    if m == 0 {
        return Err(LcfError::InvalidConfig("m must be at least 1".into()));
    }
    let sampler = scm.abduct(&record.x, record.a)?;
    let alternates = scm.alternates(record.a);
    sampler
        .draws(m, seed, mcmc)?
        .into_iter()
        .enumerate()
        .map(|(draw, u)| {
            let factual = scm.forward(&u, record.a, None)?;
            let y_checks = alternates
                .iter()
                .map(|&b| Ok((b, scm.forward(&u, b, None)?.y)))
                .collect::<Result<Vec<_>>>()?;
            let ys: Vec<f64> = y_checks.iter().map(|(_, y)| *y).collect();
            let y_check_pd = match (mask, scm) {
                (Some(mask), StructuralModel::Linear(lin)) => {
                    let vals = alternates
                        .iter()
                        .map(|&b| {
                            path_dependent_counterfactual(lin, &record.x, record.a, b, mask, &u)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Some(y_check_mean(&vals)?)
                }
                (Some(_), other) => {
                    return Err(LcfError::Unsupported(format!(
                        "path-dependent counterfactuals for the {} family",
                        other.family_name()
                    )))
                }
                (None, _) => None,
            };
            Ok(CounterfactualBundle {
                draw,
                x: factual.x,
                y: factual.y,
                y_check_mean: y_check_mean(&ys)?,
                y_checks,
                y_check_pd,
                u,
            })
        })
        .collect()
}

/// Posterior batches for every record of a dataset (record `i` uses seed
/// `mix_seed(seed, i)`).
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    pub records: Vec<Record>,
    pub bundles: Vec<Vec<CounterfactualBundle>>,
}

impl TrainingBatch {
    pub fn new(
        data: &Dataset,
        scm: &StructuralModel,
        m: usize,
        seed: u64,
        mcmc: &McmcConfig,
        mask: Option<&PathMask>,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(LcfError::Empty("training data"));
        }
        let bundles = data
            .records
            .par_iter()
            .enumerate()
            .map(|(i, r)| sample_posterior_batch(scm, r, m, mix_seed(seed, i as u64), mcmc, mask))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            records: data.records.clone(),
            bundles,
        })
    }

    pub fn from_config(data: &Dataset, scm: &StructuralModel, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Self::new(data, scm, cfg.m, cfg.seed, &cfg.mcmc, None)
    }

    /// Accumulate `(row, target)` pairs over every (record, draw), in
    /// record order.
    fn gram<F>(&self, cols: usize, row: F) -> Result<Gram>
    where
        F: Fn(&Record, &CounterfactualBundle) -> Result<(Vec<f64>, f64)> + Sync,
    {
        let parts = self
            .records
            .par_iter()
            .zip(&self.bundles)
            .map(|(r, bs)| {
                let mut g = Gram::new(cols);
                for b in bs {
                    let (x, y) = row(r, b)?;
                    g.add_row(&x, y);
                }
                Ok(g)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = Gram::new(cols);
        for p in &parts {
            total.merge(p);
        }
        Ok(total)
    }
}

/// A fitted predictor and its training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: PredictorSpec,
    /// Mean squared training error over all (record, draw) rows.
    pub train_loss: f64,
    /// Condition number of the equilibrated design (NaN for Adam fits).
    pub condition: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

fn solve(gram: &Gram, optimizer: &Optimizer) -> Result<LsSolution> {
    match optimizer {
        Optimizer::NormalEquations => gram.solve(),
        Optimizer::GradientDescent { lr, epochs } => {
            let p = gram.cols();
            if gram.rows() < p {
                return gram.solve();
            }
            Ok(gram.adam(&vec![0.0; p], &vec![false; p], *lr, *epochs))
        }
    }
}

fn h_mask(scm: &StructuralModel, h: HInputs) -> Vec<bool> {
    let n = scm.u_dim();
    match (h, scm) {
        (HInputs::All, _) => vec![true; n],
        (HInputs::ExogenousX, StructuralModel::Linear(m)) => (0..n).map(|i| i < m.d()).collect(),
        (HInputs::ExogenousX, StructuralModel::Multiplicative(m)) => {
            (0..n).map(|i| i < m.d()).collect()
        }
        (HInputs::ExogenousX, _) => vec![true; n],
    }
}

fn h_values(u: &ExogenousSample, mask: &[bool]) -> Vec<f64> {
    let coords = u.coords();
    mask.iter()
        .zip(coords.iter())
        .filter(|(on, _)| **on)
        .map(|(_, v)| *v)
        .collect()
}

fn expand_theta(coefs: &[f64], mask: &[bool]) -> Vec<f64> {
    let mut it = coefs.iter();
    mask.iter()
        .map(|&on| if on { *it.next().unwrap_or(&0.0) } else { 0.0 })
        .collect()
}

/// Resolve the fixed leading coefficient for modes other than trainable.
fn resolve_p1(mode: &P1Mode, perfect: f64, upper: f64, closed: bool) -> Result<f64> {
    match *mode {
        P1Mode::Perfect => Ok(perfect),
        P1Mode::Relaxed { p1 } => {
            let inside = p1 > 0.0 && if closed { p1 <= upper } else { p1 < upper };
            if inside {
                Ok(p1)
            } else {
                Err(LcfError::InvalidConfig(format!(
                    "relaxed p1 = {p1} is outside (0, {upper}{}",
                    if closed { "]" } else { ")" }
                )))
            }
        }
        P1Mode::Trainable => Err(LcfError::Unsupported(
            "trainable p1 for this predictor family".into(),
        )),
    }
}

/// Which counterfactual input feeds the quadratic family.
#[derive(Clone, Copy)]
enum CheckInput {
    Mean,
    PathDependent,
}

fn y_check_of(b: &CounterfactualBundle, which: CheckInput) -> Result<f64> {
    match which {
        CheckInput::Mean => Ok(b.y_check_mean),
        CheckInput::PathDependent => b
            .y_check_pd
            .ok_or(LcfError::MissingInput("path-dependent counterfactual")),
    }
}

fn fit_quadratic_with(
    batch: &TrainingBatch,
    scm: &StructuralModel,
    cfg: &TrainConfig,
    t: f64,
    which: CheckInput,
) -> Result<FitResult> {
    let mask = h_mask(scm, cfg.h_inputs);
    let nh = mask.iter().filter(|&&b| b).count();
    let build = |p1: f64, coefs: &[f64], loss: f64, condition: f64| FitResult {
        spec: PredictorSpec::LcfQuadratic {
            p1,
            p2: coefs[0],
            p3: coefs[1],
            theta: expand_theta(&coefs[2..], &mask),
        },
        train_loss: loss,
        condition,
        t: Some(t),
    };
    let fixed_fit = |p1: f64| -> Result<FitResult> {
        let gram = batch.gram(2 + nh, |r, b| {
            let yc = y_check_of(b, which)?;
            let mut row = vec![yc, 1.0];
            row.extend(h_values(&b.u, &mask));
            Ok((row, r.y - p1 * yc * yc))
        })?;
        let sol = solve(&gram, &cfg.optimizer)?;
        Ok(build(p1, &sol.coef, sol.loss, sol.condition))
    };
    match cfg.p1_mode {
        P1Mode::Trainable => {
            let lo = t * sigmoid(-P1_LOGIT_BOUND);
            let hi = t * sigmoid(P1_LOGIT_BOUND);
            let gram = batch.gram(3 + nh, |r, b| {
                let yc = y_check_of(b, which)?;
                let mut row = vec![yc * yc, yc, 1.0];
                row.extend(h_values(&b.u, &mask));
                Ok((row, r.y))
            })?;
            match cfg.optimizer {
                Optimizer::NormalEquations => {
                    // the profile loss is a convex quadratic in p1
                    let free = gram.solve()?;
                    let p1 = free.coef[0].clamp(lo, hi);
                    if p1 == free.coef[0] {
                        Ok(build(p1, &free.coef[1..], free.loss, free.condition))
                    } else {
                        fixed_fit(p1)
                    }
                }
                Optimizer::GradientDescent { lr, epochs } => {
                    let p = gram.cols();
                    let mut params = vec![0.0; p];
                    let mut state = AdamState::new(p);
                    let full = |params: &[f64]| -> Vec<f64> {
                        let s = params[0].clamp(-P1_LOGIT_BOUND, P1_LOGIT_BOUND);
                        let mut c = params.to_vec();
                        c[0] = t * sigmoid(s);
                        c
                    };
                    for _ in 0..epochs {
                        let coef = full(&params);
                        let mut g = gram.loss_gradient(&coef);
                        let sg = sigmoid(params[0]);
                        g[0] *= t * sg * (1.0 - sg);
                        state.step(&mut params, &g, lr);
                        params[0] = params[0].clamp(-P1_LOGIT_BOUND, P1_LOGIT_BOUND);
                    }
                    let coef = full(&params);
                    let loss = gram.loss(&coef);
                    Ok(build(coef[0], &coef[1..], loss, f64::NAN))
                }
            }
        }
        mode => fixed_fit(resolve_p1(&mode, t / 2.0, t, false)?),
    }
}

/// Quadratic-in-`y̌` predictor `p1·y̌² + p2·y̌ + p3 + θᵀu` with `p1` set by
/// the configured mode and the rest fitted by least squares.
pub fn fit_lcf_quadratic(
    batch: &TrainingBatch,
    scm: &StructuralModel,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let t = compute_t(scm, cfg.eta)?;
    fit_quadratic_with(batch, scm, cfg, t, CheckInput::Mean)
}

/// As [`fit_lcf_quadratic`] with the path-dependent counterfactual as
/// input; the batch must have been built with the same mask.
pub fn fit_path_dependent(
    batch: &TrainingBatch,
    scm: &StructuralModel,
    mask: &PathMask,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let StructuralModel::Linear(lin) = scm else {
        return Err(LcfError::Unsupported(format!(
            "path-dependent training for the {} family",
            scm.family_name()
        )));
    };
    let t = compute_t_split(lin, mask, cfg.eta)?;
    fit_quadratic_with(batch, scm, cfg, t, CheckInput::PathDependent)
}

/// `θᵀx + c` by least squares on the observed features.
pub fn fit_unfair(data: &Dataset, optimizer: &Optimizer) -> Result<FitResult> {
    if data.is_empty() {
        return Err(LcfError::Empty("training data"));
    }
    let d = data.d();
    let mut gram = Gram::new(d + 1);
    for r in &data.records {
        let mut row = r.x.clone();
        row.push(1.0);
        gram.add_row(&row, r.y);
    }
    let sol = solve(&gram, optimizer)?;
    Ok(FitResult {
        spec: PredictorSpec::Unfair {
            theta: sol.coef[..d].to_vec(),
            c: sol.coef[d],
        },
        train_loss: sol.loss,
        condition: sol.condition,
        t: None,
    })
}

/// `φᵀu + c` by least squares over every (record, draw) pair.
pub fn fit_cf(
    batch: &TrainingBatch,
    scm: &StructuralModel,
    optimizer: &Optimizer,
) -> Result<FitResult> {
    let n = scm.u_dim();
    let gram = batch.gram(n + 1, |r, b| {
        let mut row = b.u.coords();
        row.push(1.0);
        Ok((row, r.y))
    })?;
    let sol = solve(&gram, optimizer)?;
    Ok(FitResult {
        spec: PredictorSpec::CfBaseline {
            phi: sol.coef[..n].to_vec(),
            c: sol.coef[n],
        },
        train_loss: sol.loss,
        condition: sol.condition,
        t: None,
    })
}

/// `p1·y̌^e + p2·y̌ + p3 + θᵀu` with `p1` from the configured mode.
pub fn fit_power_g(
    batch: &TrainingBatch,
    scm: &StructuralModel,
    cfg: &TrainConfig,
    exponent: f64,
) -> Result<FitResult> {
    cfg.validate()?;
    if exponent <= 1.0 {
        return Err(LcfError::InvalidConfig(format!(
            "exponent = {exponent} must exceed 1"
        )));
    }
    let t = compute_t(scm, cfg.eta)?;
    let p1 = resolve_p1(&cfg.p1_mode, t / 2.0, t, false)?;
    let mask = h_mask(scm, cfg.h_inputs);
    let nh = mask.iter().filter(|&&b| b).count();
    let gram = batch.gram(2 + nh, |r, b| {
        let yc = b.y_check_mean;
        if yc < 0.0 {
            return Err(LcfError::OutsideDomain {
                what: "power predictor input y_check",
                value: yc,
            });
        }
        let mut row = vec![yc, 1.0];
        row.extend(h_values(&b.u, &mask));
        Ok((row, r.y - p1 * yc.powf(exponent)))
    })?;
    let sol = solve(&gram, &cfg.optimizer)?;
    Ok(FitResult {
        spec: PredictorSpec::PowerG {
            p1,
            p2: sol.coef[0],
            p3: sol.coef[1],
            exponent,
            theta: expand_theta(&sol.coef[2..], &mask),
        },
        train_loss: sol.loss,
        condition: sol.condition,
        t: Some(t),
    })
}

/// `p1·y̌² + p2 + θ·u` for the scalar family, with `p1 = 1/(2ηM)` in
/// perfect mode. `θ` is constrained to share the monotonicity direction of
/// `f̃`; a fit with the opposite sign is replaced by `θ = 0`.
pub fn fit_scalar_quadratic(
    batch: &TrainingBatch,
    scm: &StructuralModel,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let StructuralModel::Scalar(m) = scm else {
        return Err(LcfError::Unsupported(format!(
            "scalar quadratic predictor on the {} family",
            scm.family_name()
        )));
    };
    let upper = 1.0 / (cfg.eta * m.lipschitz_m);
    let p1 = resolve_p1(&cfg.p1_mode, perfect_p1(scm, cfg.eta)?, upper, true)?;
    let full = batch.gram(2, |r, b| {
        Ok((
            vec![1.0, b.u.ux[0]],
            r.y - p1 * b.y_check_mean * b.y_check_mean,
        ))
    })?;
    let sol = solve(&full, &cfg.optimizer)?;
    let direction = if m.is_increasing() { 1.0 } else { -1.0 };
    let (p2, theta, loss, condition) = if sol.coef[1] * direction >= 0.0 {
        (sol.coef[0], sol.coef[1], sol.loss, sol.condition)
    } else {
        let reduced = batch.gram(1, |r, b| {
            Ok((vec![1.0], r.y - p1 * b.y_check_mean * b.y_check_mean))
        })?;
        let s = solve(&reduced, &cfg.optimizer)?;
        (s.coef[0], 0.0, s.loss, s.condition)
    };
    Ok(FitResult {
        spec: PredictorSpec::ScalarQuadratic { p1, p2, theta },
        train_loss: loss,
        condition,
        t: None,
    })
}

/// `p1·y̌² + p2·y̌ + p3` for the multiplicative family.
pub fn fit_multiplicative_convex(
    batch: &TrainingBatch,
    scm: &StructuralModel,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if !matches!(scm, StructuralModel::Multiplicative(_)) {
        return Err(LcfError::Unsupported(format!(
            "multiplicative convex predictor on the {} family",
            scm.family_name()
        )));
    }
    let t = compute_t(scm, cfg.eta)?;
    let p1 = resolve_p1(&cfg.p1_mode, t / 2.0, t, false)?;
    let gram = batch.gram(2, |r, b| {
        let yc = b.y_check_mean;
        Ok((vec![yc, 1.0], r.y - p1 * yc * yc))
    })?;
    let sol = solve(&gram, &cfg.optimizer)?;
    Ok(FitResult {
        spec: PredictorSpec::MultiplicativeConvex {
            p1,
            p2: sol.coef[0],
            p3: sol.coef[1],
        },
        train_loss: sol.loss,
        condition: sol.condition,
        t: Some(t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, DatasetMeta, GenSpec, Preset};
    use crate::scm::LinearAdditiveScm;

    fn toy_scm() -> StructuralModel {
        LinearAdditiveScm::new(vec![1.0], vec![1.0], vec![1.0], 1.0, vec![0.0, 1.0])
            .unwrap()
            .into()
    }

    fn toy_record() -> Record {
        Record {
            x: vec![0.5],
            a: 0.0,
            y: 0.7,
        }
    }

    #[test]
    fn p1_mode_parsing() {
        assert_eq!(P1Mode::parse("perfect").unwrap(), P1Mode::Perfect);
        assert_eq!(P1Mode::parse("train").unwrap(), P1Mode::Trainable);
        assert_eq!(
            P1Mode::parse("relaxed:0.25").unwrap(),
            P1Mode::Relaxed { p1: 0.25 }
        );
        assert!(P1Mode::parse("relaxed:x").is_err());
        assert!(P1Mode::parse("half").is_err());
    }

    #[test]
    fn posterior_batch_properties() {
        let b = sample_posterior_batch(
            &toy_scm(),
            &toy_record(),
            100,
            1,
            &McmcConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(b.len(), 100);
        assert!(b
            .iter()
            .all(|x| x.u.ux == vec![0.5] && x.y_checks.len() == 1));
        let mean_uy: f64 = b.iter().map(|x| x.u.uy.unwrap()).sum::<f64>() / 100.0;
        assert!((mean_uy - 0.5).abs() < 0.1);
        let again = sample_posterior_batch(
            &toy_scm(),
            &toy_record(),
            100,
            1,
            &McmcConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(b, again);
    }

    #[test]
    fn relaxed_p1_must_lie_below_t() {
        let data = gen_synthetic(&GenSpec::preset(Preset::LinearD10, 200, 1)).unwrap();
        let scm = Preset::LinearD10.model().unwrap();
        let t = compute_t(&scm, 10.0).unwrap();
        let cfg = TrainConfig {
            m: 5,
            p1_mode: P1Mode::Relaxed { p1: 1.5 * t },
            ..TrainConfig::default()
        };
        let batch = TrainingBatch::from_config(&data, &scm, &cfg).unwrap();
        assert!(matches!(
            fit_lcf_quadratic(&batch, &scm, &cfg),
            Err(LcfError::InvalidConfig(_))
        ));
    }

    #[test]
    fn duplicated_record_is_singular() {
        let meta = DatasetMeta {
            feature_names: vec!["x1".into()],
            attr_domain: vec![0.0, 1.0],
            ..DatasetMeta::default()
        };
        let data = Dataset::new(vec![toy_record(); 1], meta).unwrap();
        let scm = toy_scm();
        let cfg = TrainConfig {
            m: 1,
            ..TrainConfig::default()
        };
        let batch = TrainingBatch::from_config(&data, &scm, &cfg).unwrap();
        assert!(matches!(
            fit_lcf_quadratic(&batch, &scm, &cfg),
            Err(LcfError::SingularDesign { .. })
        ));
        assert!(matches!(
            fit_unfair(&data, &Optimizer::NormalEquations),
            Err(LcfError::SingularDesign { .. })
        ));
    }

    #[test]
    fn trainable_mode_never_loses_to_perfect() {
        let data = gen_synthetic(&GenSpec::preset(Preset::LinearD10, 300, 2)).unwrap();
        let scm = Preset::LinearD10.model().unwrap();
        let cfg = TrainConfig {
            m: 10,
            ..TrainConfig::default()
        };
        let batch = TrainingBatch::from_config(&data, &scm, &cfg).unwrap();
        let perfect = fit_lcf_quadratic(&batch, &scm, &cfg).unwrap();
        let trained = fit_lcf_quadratic(
            &batch,
            &scm,
            &TrainConfig {
                p1_mode: P1Mode::Trainable,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert!(perfect.train_loss >= trained.train_loss - 1e-9);
        let t = perfect.t.unwrap();
        let p1 = trained.spec.p1().unwrap();
        assert!(p1 > 0.0 && p1 < t);
    }
}

//! Strategic response `u' = u + η ∇_u ŷ` and the factual/counterfactual
//! future outcomes it induces.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, LcfError, Result};
use crate::predictor::{grad_wrt_u, y_check_mean, PredictorSpec};
use crate::scm::{
    path_dependent_counterfactual, Attribute, ExogenousSample, LinearAdditiveScm, Outcome,
    PathMask, StructuralModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseConfig {
    pub eta: f64,
    /// Noise seed for stochastic families. The same stream is replayed for
    /// every structural evaluation of one simulated pair, so factual and
    /// counterfactual worlds share their noise. Without it the conditional
    /// means are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,
}

impl ResponseConfig {
    pub fn new(eta: f64) -> Result<Self> {
        let cfg = Self {
            eta,
            noise_seed: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta > 0.0 && self.eta.is_finite() {
            Ok(())
        } else {
            Err(LcfError::InvalidConfig(format!(
                "eta = {} must be positive",
                self.eta
            )))
        }
    }
}

/// One simulated factual/counterfactual pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub y: f64,
    pub y_check: f64,
    pub y_prime: f64,
    pub y_check_prime: f64,
    pub grad_factual: Vec<f64>,
    pub grad_counterfactual: Vec<f64>,
}

impl SimulationResult {
    pub fn gap_before(&self) -> f64 {
        (self.y - self.y_check).abs()
    }

    pub fn gap_after(&self) -> f64 {
        (self.y_prime - self.y_check_prime).abs()
    }
}

/// `u' = u + η · grad`.
pub fn respond(u: &ExogenousSample, grad: &[f64], eta: f64) -> Result<ExogenousSample> {
    check_len("response gradient", u.dim(), grad.len())?;
    let moved: Vec<f64> = u
        .coords()
        .iter()
        .zip(grad)
        .map(|(c, g)| c + eta * g)
        .collect();
    u.with_coords(&moved)
}

/// Structural outcome after the response; same contract as `forward`.
pub fn future_outcome(
    scm: &StructuralModel,
    u_prime: &ExogenousSample,
    a: Attribute,
    noise_seed: Option<u64>,
) -> Result<Outcome> {
    eval(scm, u_prime, a, noise_seed)
}

fn eval(
    scm: &StructuralModel,
    u: &ExogenousSample,
    a: Attribute,
    noise_seed: Option<u64>,
) -> Result<Outcome> {
    match (scm.is_deterministic(), noise_seed) {
        (false, Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            scm.forward(u, a, Some(&mut rng))
        }
        _ => scm.forward(u, a, None),
    }
}

/// Attributes whose outcomes form the counterfactual input of a predictor
/// deployed in the world with attribute `own` (all alternates, or `own`
/// itself in the degenerate same-attribute case).
fn chain_for(scm: &StructuralModel, own: Attribute, other: Attribute) -> Vec<Attribute> {
    if own == other {
        vec![own]
    } else {
        scm.alternates(own)
    }
}

fn mean_outcome(
    scm: &StructuralModel,
    u: &ExogenousSample,
    attrs: &[Attribute],
    noise_seed: Option<u64>,
) -> Result<f64> {
    let ys = attrs
        .iter()
        .map(|&b| eval(scm, u, b, noise_seed).map(|o| o.y))
        .collect::<Result<Vec<_>>>()?;
    y_check_mean(&ys)
}

/// Simulate one exogenous draw in both worlds.
///
/// The factual agent (attribute `a`) faces a predictor fed with the
/// counterfactual outcome; the counterfactual agent (attribute `a_check`)
/// faces the same predictor fed with the factual outcome. Each responds
/// along its own gradient and the future outcomes are evaluated in its own
/// world.
pub fn simulate_pair(
    scm: &StructuralModel,
    spec: &PredictorSpec,
    u: &ExogenousSample,
    a: Attribute,
    a_check: Attribute,
    cfg: &ResponseConfig,
) -> Result<SimulationResult> {
    cfg.validate()?;
    scm.check_attr(a)?;
    scm.check_attr(a_check)?;
    let seed = cfg.noise_seed;
    let y = eval(scm, u, a, seed)?.y;
    let y_check = eval(scm, u, a_check, seed)?.y;

    let chain_f = chain_for(scm, a, a_check);
    let input_f = mean_outcome(scm, u, &chain_f, seed)?;
    let grad_factual = grad_wrt_u(spec, scm, u, input_f, a, &chain_f)?;

    let chain_c = chain_for(scm, a_check, a);
    let input_c = mean_outcome(scm, u, &chain_c, seed)?;
    let grad_counterfactual = grad_wrt_u(spec, scm, u, input_c, a_check, &chain_c)?;

    let u_f = respond(u, &grad_factual, cfg.eta)?;
    let u_c = respond(u, &grad_counterfactual, cfg.eta)?;
    let y_prime = future_outcome(scm, &u_f, a, seed)?.y;
    let y_check_prime = future_outcome(scm, &u_c, a_check, seed)?.y;
    finish(
        y,
        y_check,
        y_prime,
        y_check_prime,
        grad_factual,
        grad_counterfactual,
    )
}

fn finish(
    y: f64,
    y_check: f64,
    y_prime: f64,
    y_check_prime: f64,
    grad_factual: Vec<f64>,
    grad_counterfactual: Vec<f64>,
) -> Result<SimulationResult> {
    if [y, y_check, y_prime, y_check_prime]
        .iter()
        .any(|v| !v.is_finite())
    {
        return Err(LcfError::NonFinite("simulated outcome"));
    }
    Ok(SimulationResult {
        y,
        y_check,
        y_prime,
        y_check_prime,
        grad_factual,
        grad_counterfactual,
    })
}

/// Path-dependent variant of [`simulate_pair`]: the counterfactual outcome
/// recomputes only the masked features under `a_check`, holding the rest at
/// their factual values for the same exogenous state.
pub fn simulate_pair_path_dependent(
    scm: &LinearAdditiveScm,
    spec: &PredictorSpec,
    u: &ExogenousSample,
    a: Attribute,
    a_check: Attribute,
    mask: &PathMask,
    cfg: &ResponseConfig,
) -> Result<SimulationResult> {
    cfg.validate()?;
    let model = StructuralModel::Linear(scm.clone());
    let pd = |u: &ExogenousSample| -> Result<f64> {
        let x = model.forward(u, a, None)?.x;
        path_dependent_counterfactual(scm, &x, a, a_check, mask, u)
    };
    let y = model.forward(u, a, None)?.y;
    let y_check = pd(u)?;
    // the linear outcome gradient does not depend on the attribute
    let grad_factual = grad_wrt_u(spec, &model, u, y_check, a, &[a])?;
    let grad_counterfactual = grad_wrt_u(spec, &model, u, y, a, &[a])?;
    let u_f = respond(u, &grad_factual, cfg.eta)?;
    let u_c = respond(u, &grad_counterfactual, cfg.eta)?;
    let y_prime = model.forward(&u_f, a, None)?.y;
    let y_check_prime = pd(&u_c)?;
    finish(
        y,
        y_check,
        y_prime,
        y_check_prime,
        grad_factual,
        grad_counterfactual,
    )
}

/// `|1 − 2 p1 / T| · |y − y̌|`
pub fn closed_form_gap(p1: f64, t: f64, y: f64, y_check: f64) -> f64 {
    (1.0 - 2.0 * p1 / t).abs() * (y - y_check).abs()
}

/// One row of a batch simulation stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub record_id: usize,
    pub draw_id: usize,
    pub y: f64,
    pub y_check: f64,
    pub y_prime: f64,
    pub y_check_prime: f64,
}

impl SimulationRow {
    pub fn new(record_id: usize, draw_id: usize, r: &SimulationResult) -> Self {
        Self {
            record_id,
            draw_id,
            y: r.y,
            y_check: r.y_check,
            y_prime: r.y_prime,
            y_check_prime: r.y_check_prime,
        }
    }

    pub fn gap_before(&self) -> f64 {
        (self.y - self.y_check).abs()
    }

    pub fn gap_after(&self) -> f64 {
        (self.y_prime - self.y_check_prime).abs()
    }
}

/// Write rows as CSV with columns
/// `record_id, draw_id, y, y_check, y_prime, y_check_prime`.
pub fn write_simulation_csv(rows: &[SimulationRow], path: &Path) -> Result<()> {
    let csv_err = |e: csv::Error| LcfError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record([
        "record_id",
        "draw_id",
        "y",
        "y_check",
        "y_prime",
        "y_check_prime",
    ])
    .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.record_id.to_string(),
            r.draw_id.to_string(),
            format!("{:.17e}", r.y),
            format!("{:.17e}", r.y_check),
            format!("{:.17e}", r.y_prime),
            format!("{:.17e}", r.y_check_prime),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| LcfError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::MultiplicativeBinaryScm;

    fn toy() -> StructuralModel {
        LinearAdditiveScm::new(vec![1.0], vec![1.0], vec![1.0], 1.0, vec![0.0, 1.0])
            .unwrap()
            .into()
    }

    fn quad(p1: f64) -> PredictorSpec {
        PredictorSpec::LcfQuadratic {
            p1,
            p2: 0.0,
            p3: 0.0,
            theta: vec![0.0, 0.0],
        }
    }

    fn u0() -> ExogenousSample {
        ExogenousSample::new(vec![0.5], Some(0.2))
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn respond_examples() {
        assert_eq!(respond(&u0(), &[0.0, 0.0], 1.0).unwrap(), u0());
        let moved = respond(&u0(), &[0.85, 0.85], 1.0).unwrap();
        assert!(close(moved.ux[0], 1.35) && close(moved.uy.unwrap(), 1.05));
        let moved = respond(&u0(), &[0.1, 0.0], 10.0).unwrap();
        assert!(close(moved.ux[0], 1.5) && moved.uy == Some(0.2));
        assert!(respond(&u0(), &[0.1], 1.0).is_err());
    }

    #[test]
    fn future_outcome_examples() {
        let scm = toy();
        let out = future_outcome(
            &scm,
            &ExogenousSample::new(vec![1.35], Some(1.05)),
            0.0,
            None,
        )
        .unwrap();
        assert!(close(out.x[0], 1.35) && close(out.y, 2.4));
        let m: StructuralModel =
            MultiplicativeBinaryScm::new(vec![1.0], vec![0.0], vec![1.0], 1.0, [1.0, 2.0])
                .unwrap()
                .into();
        let out =
            future_outcome(&m, &ExogenousSample::new(vec![1.0], Some(0.2)), 2.0, None).unwrap();
        assert!(close(out.x[0], 2.0) && close(out.y, 2.2));
    }

    #[test]
    fn perfect_pair_on_toy() {
        let cfg = ResponseConfig::new(1.0).unwrap();
        let r = simulate_pair(&toy(), &quad(0.25), &u0(), 0.0, 1.0, &cfg).unwrap();
        assert!(close(r.y, 0.7) && close(r.y_check, 1.7));
        assert!(close(r.y_prime, 2.4) && close(r.y_check_prime, 2.4));
        assert!(r.gap_after() < 1e-12);
    }

    #[test]
    fn relaxed_pair_on_toy_halves_the_gap() {
        let cfg = ResponseConfig::new(1.0).unwrap();
        let r = simulate_pair(&toy(), &quad(0.125), &u0(), 0.0, 1.0, &cfg).unwrap();
        assert!(close(r.y_prime, 1.55) && close(r.y_check_prime, 2.05));
        assert!(close(r.gap_after(), 0.5) && close(r.gap_after(), r.gap_before() / 2.0));
        assert!(close(
            closed_form_gap(0.125, 0.5, r.y, r.y_check),
            r.gap_after()
        ));
    }

    #[test]
    fn baseline_preserves_the_gap() {
        let cfg = ResponseConfig::new(1.0).unwrap();
        let cf = PredictorSpec::CfBaseline {
            phi: vec![1.0, 1.0],
            c: 0.0,
        };
        let r = simulate_pair(&toy(), &cf, &u0(), 0.0, 1.0, &cfg).unwrap();
        assert!(close(r.gap_before(), 1.0) && close(r.gap_after(), 1.0));
    }

    #[test]
    fn degenerate_pair_has_no_gap() {
        let cfg = ResponseConfig::new(1.0).unwrap();
        let r = simulate_pair(&toy(), &quad(0.1), &u0(), 1.0, 1.0, &cfg).unwrap();
        assert_eq!(r.gap_before(), 0.0);
        assert_eq!(r.gap_after(), 0.0);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_gap(0.25, 0.5, 3.0, -1.0), 0.0);
        assert!(close(closed_form_gap(0.125, 0.5, 0.0, 1.0), 0.5));
        assert!(close(closed_form_gap(0.5, 0.5, 0.0, 0.3), 0.3));
    }

    #[test]
    fn path_dependent_pair_is_perfect_at_half_t() {
        let scm = LinearAdditiveScm::new(
            vec![1.0, 1.0],
            vec![1.0, 2.0],
            vec![1.0, 1.0],
            1.0,
            vec![0.0, 1.0],
        )
        .unwrap();
        let model = StructuralModel::Linear(scm.clone());
        let t = crate::predictor::compute_t(&model, 1.0).unwrap();
        let spec = PredictorSpec::LcfQuadratic {
            p1: t / 2.0,
            p2: 0.3,
            p3: 0.0,
            theta: vec![0.1, 0.2, 0.3],
        };
        let u = ExogenousSample::new(vec![0.1, 0.2], Some(0.3));
        let mask = PathMask {
            unfair: vec![true, false],
        };
        let cfg = ResponseConfig::new(1.0).unwrap();
        let r = simulate_pair_path_dependent(&scm, &spec, &u, 0.0, 1.0, &mask, &cfg).unwrap();
        assert!(close(r.y_check, 1.6));
        assert!(r.gap_before() > 0.5);
        assert!(r.gap_after() <= 1e-9);
    }

    #[test]
    fn rows_written_with_fixed_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.csv");
        let cfg = ResponseConfig::new(1.0).unwrap();
        let r = simulate_pair(&toy(), &quad(0.25), &u0(), 0.0, 1.0, &cfg).unwrap();
        write_simulation_csv(&[SimulationRow::new(3, 7, &r)], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "record_id,draw_id,y,y_check,y_prime,y_check_prime"
        );
        assert!(lines.next().unwrap().starts_with("3,7,"));
    }
}

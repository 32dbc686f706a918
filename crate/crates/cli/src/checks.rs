//! Guarantees each experiment must uphold whatever the seed; a failed
//! check makes `lcf-lab run` exit nonzero.

use lcf_core::experiment::{Experiment, RunConfig, SeedRun, METHOD_CF, METHOD_OURS, METHOD_UNFAIR};
use lcf_core::metrics::EvalReport;
use lcf_core::training::P1Mode;

/// Absolute bound on a future gap that should vanish.
pub const ZERO_GAP_TOL: f64 = 1e-6;
/// Relative tolerance of the sweep proportionality law.
pub const SWEEP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn report<'a>(run: &'a SeedRun, method: &str) -> Option<&'a EvalReport> {
    run.reports.iter().find(|r| r.method == method)
}

fn zero_gap(run: &SeedRun) -> Check {
    let name = format!(
        "seed {}: perfect predictor removes every future gap",
        run.seed
    );
    match report(run, METHOD_OURS) {
        Some(r) => Check::new(
            name,
            r.max_gap_after <= ZERO_GAP_TOL,
            format!("max gap after = {:.3e}", r.max_gap_after),
        ),
        None => Check::new(name, false, "no report"),
    }
}

fn strict_decrease(run: &SeedRun) -> Check {
    let name = format!("seed {}: every gap strictly decreases", run.seed);
    match report(run, METHOD_OURS) {
        Some(r) => Check::new(
            name,
            r.strict_decrease_fraction == 1.0,
            format!("fraction = {}", r.strict_decrease_fraction),
        ),
        None => Check::new(name, false, "no report"),
    }
}

fn sweep_law(run: &SeedRun) -> Vec<Check> {
    let mut etas: Vec<f64> = Vec::new();
    for p in &run.sweep {
        if !etas.contains(&p.eta) {
            etas.push(p.eta);
        }
    }
    etas.into_iter()
        .map(|eta| {
            let pts: Vec<_> = run.sweep.iter().filter(|p| p.eta == eta).collect();
            let base = pts[0];
            let scale = base.afce / (1.0 - 2.0 * base.p1_over_t);
            let mut worst: f64 = 0.0;
            let mut decreasing = true;
            for w in pts.windows(2) {
                decreasing &= w[1].afce < w[0].afce;
            }
            for p in &pts {
                let expected = (1.0 - 2.0 * p.p1_over_t) * scale;
                let err = (p.afce - expected).abs() / scale.abs().max(f64::MIN_POSITIVE);
                worst = worst.max(err);
            }
            Check::new(
                format!("seed {}, eta {eta}: AFCE follows (1 - 2 p1/T)", run.seed),
                decreasing && worst <= SWEEP_TOL,
                format!("strictly decreasing = {decreasing}, max relative error = {worst:.3e}"),
            )
        })
        .collect()
}

/// Checks implied by the configuration: exact-zero gaps for perfect
/// predictors with a closed-form `T`, strict decrease for the relaxed
/// families, and the sweep and audit laws.
pub fn run_checks(cfg: &RunConfig, runs: &[SeedRun]) -> Vec<Check> {
    let perfect = matches!(cfg.p1_mode(), Ok(P1Mode::Perfect));
    let mut out = Vec::new();
    for run in runs {
        match cfg.experiment {
            Experiment::Table1 | Experiment::Table6 | Experiment::LawSemisynthetic if perfect => {
                out.push(zero_gap(run))
            }
            Experiment::Table4 | Experiment::Table5 => out.push(strict_decrease(run)),
            Experiment::Sweep => out.extend(sweep_law(run)),
            Experiment::Density if perfect => {
                if let Some((_, t)) = run.density.iter().find(|(n, _)| n == METHOD_OURS) {
                    let same = t
                        .bins
                        .iter()
                        .all(|b| b.factual_count == b.counterfactual_count);
                    out.push(Check::new(
                        format!("seed {}: perfect predictor histograms coincide", run.seed),
                        same,
                        format!("earth-mover distance = {:.3e}", t.emd),
                    ));
                }
            }
            Experiment::Audit => {
                if let Some(a) = &run.audit {
                    for (name, v) in [(METHOD_UNFAIR, &a.unfair), (METHOD_CF, &a.cf)] {
                        out.push(Check::new(
                            format!("seed {}: {name} preserves every gap", run.seed),
                            v.gaps_preserved(),
                            format!("max relative deviation = {:.3e}", v.max_rel_deviation),
                        ));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

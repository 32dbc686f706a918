//! Accuracy and lookahead-fairness metrics.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Record;
use crate::error::{LcfError, Result};
use crate::numeric::KahanSum;
use crate::predictor::PredictorSpec;
use crate::response::{simulate_pair, ResponseConfig, SimulationResult, SimulationRow};
use crate::scm::{Attribute, ExogenousSample, McmcConfig, StructuralModel};

/// Anything carrying a factual/counterfactual outcome pair before and
/// after the response.
pub trait GapPair {
    fn gap_before(&self) -> f64;
    fn gap_after(&self) -> f64;
}

impl GapPair for SimulationResult {
    fn gap_before(&self) -> f64 {
        SimulationResult::gap_before(self)
    }
    fn gap_after(&self) -> f64 {
        SimulationResult::gap_after(self)
    }
}

impl GapPair for SimulationRow {
    fn gap_before(&self) -> f64 {
        SimulationRow::gap_before(self)
    }
    fn gap_after(&self) -> f64 {
        SimulationRow::gap_after(self)
    }
}

/// Streaming accumulator for every metric; partial accumulators merge
/// exactly in the order they are combined.
#[derive(Debug, Clone, Default)]
pub struct MetricAccumulator {
    sq_err: KahanSum,
    before: KahanSum,
    after: KahanSum,
    strict: usize,
    max_after: f64,
}

impl MetricAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_prediction(&mut self, prediction: f64, y: f64) {
        let e = y - prediction;
        self.sq_err.add(e * e);
    }

    pub fn add_gap(&mut self, g: &impl GapPair) {
        let (b, a) = (g.gap_before(), g.gap_after());
        self.before.add(b);
        self.after.add(a);
        if a < b {
            self.strict += 1;
        }
        self.max_after = self.max_after.max(a);
    }

    pub fn merge(&mut self, other: &MetricAccumulator) {
        self.sq_err.merge(&other.sq_err);
        self.before.merge(&other.before);
        self.after.merge(&other.after);
        self.strict += other.strict;
        self.max_after = self.max_after.max(other.max_after);
    }

    pub fn mse(&self) -> Result<f64> {
        self.sq_err
            .mean()
            .ok_or(LcfError::Empty("prediction stream"))
    }

    pub fn afce(&self) -> Result<f64> {
        self.after
            .mean()
            .ok_or(LcfError::Empty("simulation stream"))
    }

    /// `None` when every original gap is zero.
    pub fn uir(&self) -> Result<Option<f64>> {
        if self.before.count() == 0 {
            return Err(LcfError::Empty("simulation stream"));
        }
        let b = self.before.total();
        if b <= 0.0 {
            return Ok(None);
        }
        Ok(Some((1.0 - self.after.total() / b) * 100.0))
    }

    /// Fraction of pairs whose gap strictly decreased.
    pub fn strict_decrease_fraction(&self) -> Option<f64> {
        let n = self.before.count();
        (n > 0).then(|| self.strict as f64 / n as f64)
    }

    pub fn max_gap_after(&self) -> f64 {
        self.max_after
    }

    pub fn gap_count(&self) -> usize {
        self.before.count()
    }
}

/// Mean squared error over `(prediction, y)` pairs.
pub fn mse(pairs: &[(f64, f64)]) -> Result<f64> {
    let mut acc = MetricAccumulator::new();
    for &(p, y) in pairs {
        acc.add_prediction(p, y);
    }
    acc.mse()
}

/// Mean post-response gap.
pub fn afce<G: GapPair>(results: &[G]) -> Result<f64> {
    let mut acc = MetricAccumulator::new();
    results.iter().for_each(|r| acc.add_gap(r));
    acc.afce()
}

/// Percentage reduction of the summed gap; `None` when undefined.
pub fn uir<G: GapPair>(results: &[G]) -> Result<Option<f64>> {
    let mut acc = MetricAccumulator::new();
    results.iter().for_each(|r| acc.add_gap(r));
    acc.uir()
}

/// Metrics of one evaluated predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub mse: f64,
    pub afce: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uir_percent: Option<f64>,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    pub strict_decrease_fraction: f64,
    pub max_gap_after: f64,
}

/// Column order of the one-row report CSV.
pub const REPORT_CSV_HEADER: &str = "method,mse,afce,uir,n,m,seed,eta,p1";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

impl EvalReport {
    pub fn from_accumulator(
        method: impl Into<String>,
        acc: &MetricAccumulator,
        m: usize,
        seed: u64,
        eta: f64,
        p1: Option<f64>,
        n: usize,
    ) -> Result<Self> {
        let report = Self {
            method: method.into(),
            mse: acc.mse()?,
            afce: acc.afce()?,
            uir_percent: acc.uir()?,
            n,
            m,
            seed,
            eta,
            p1,
            strict_decrease_fraction: acc.strict_decrease_fraction().unwrap_or(f64::NAN),
            max_gap_after: acc.max_gap_after(),
        };
        report.validate()?;
        Ok(report)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.afce >= 0.0) || !(self.mse >= 0.0) {
            return Err(LcfError::NonFinite("evaluation metrics"));
        }
        if let Some(u) = self.uir_percent {
            if !(u <= 100.0 + 1e-9) {
                return Err(LcfError::NonFinite("unfairness improvement ratio"));
            }
        }
        if self.method.contains(',') || self.method.contains('"') {
            return Err(LcfError::InvalidConfig(format!(
                "method name `{}` cannot be written to CSV",
                self.method
            )));
        }
        Ok(())
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{},{},{},{},{:.17e},{}",
            self.method,
            self.mse,
            self.afce,
            opt(self.uir_percent),
            self.n,
            self.m,
            self.seed,
            self.eta,
            opt(self.p1)
        )
    }

    /// Inverse of [`to_csv_row`](Self::to_csv_row) for the CSV fields;
    /// diagnostics absent from the CSV come back as NaN.
    pub fn from_csv_row(line: &str) -> Result<Self> {
        let bad = |what: &str| LcfError::Parse {
            path: "<report row>".into(),
            message: format!("{what} in `{line}`"),
        };
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 9 {
            return Err(bad("expected 9 fields"));
        }
        let real = |s: &str| s.parse::<f64>().map_err(|_| bad("unparseable real"));
        let int = |s: &str| s.parse::<u64>().map_err(|_| bad("unparseable integer"));
        let opt_real = |s: &str| {
            if s.is_empty() {
                Ok(None)
            } else {
                real(s).map(Some)
            }
        };
        Ok(Self {
            method: f[0].to_string(),
            mse: real(f[1])?,
            afce: real(f[2])?,
            uir_percent: opt_real(f[3])?,
            n: int(f[4])? as usize,
            m: int(f[5])? as usize,
            seed: int(f[6])?,
            eta: real(f[7])?,
            p1: opt_real(f[8])?,
            strict_decrease_fraction: f64::NAN,
            max_gap_after: f64::NAN,
        })
    }

    /// Header plus one row per report.
    pub fn write_csv(reports: &[EvalReport], path: &Path) -> Result<()> {
        let mut text = String::from(REPORT_CSV_HEADER);
        text.push('\n');
        for r in reports {
            r.validate()?;
            text.push_str(&r.to_csv_row());
            text.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| LcfError::io(path, e))?;
        f.write_all(text.as_bytes())
            .map_err(|e| LcfError::io(path, e))
    }
}

/// One histogram bin shared by both series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBin {
    pub lo: f64,
    pub hi: f64,
    pub factual_count: usize,
    pub counterfactual_count: usize,
}

/// Post-response outcome densities for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub bins: Vec<DensityBin>,
    pub y_prime: Vec<f64>,
    pub y_check_prime: Vec<f64>,
    pub mean_gap_before: f64,
    /// Earth-mover distance between the two empirical distributions.
    pub emd: f64,
}

impl DensityTable {
    /// CSV with columns `lo,hi,value,factual_count,counterfactual_count`
    /// where `value` is the bin midpoint.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("lo,hi,value,factual_count,counterfactual_count\n");
        for b in &self.bins {
            text.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{},{}\n",
                b.lo,
                b.hi,
                0.5 * (b.lo + b.hi),
                b.factual_count,
                b.counterfactual_count
            ));
        }
        std::fs::write(path, text).map_err(|e| LcfError::io(path, e))
    }
}

/// Shared-edge histogram of two samples.
pub fn histogram_pair(a: &[f64], b: &[f64], bins: usize) -> Result<Vec<DensityBin>> {
    if bins == 0 {
        return Err(LcfError::InvalidConfig("bins must be at least 1".into()));
    }
    let all = a.iter().chain(b);
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
        (l.min(v), h.max(v))
    });
    if !lo.is_finite() || !hi.is_finite() {
        return Err(LcfError::NonFinite("histogram input"));
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let index = |v: f64| (((v - lo) / width) as usize).min(bins - 1);
    let mut out: Vec<DensityBin> = (0..bins)
        .map(|i| DensityBin {
            lo: lo + i as f64 * width,
            hi: if i + 1 == bins {
                hi
            } else {
                lo + (i + 1) as f64 * width
            },
            factual_count: 0,
            counterfactual_count: 0,
        })
        .collect();
    for &v in a {
        out[index(v)].factual_count += 1;
    }
    for &v in b {
        out[index(v)].counterfactual_count += 1;
    }
    Ok(out)
}

/// Earth-mover distance between two equally sized empirical samples.
pub fn earth_movers_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(LcfError::DimensionMismatch {
            context: "earth-mover samples",
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let mut acc = KahanSum::new();
    for (x, y) in sa.iter().zip(&sb) {
        acc.add((x - y).abs());
    }
    acc.mean().ok_or(LcfError::Empty("earth-mover samples"))
}

/// Simulate `m` posterior draws for one record against its first
/// alternate attribute and histogram `Y'` against `Y̌'`.
#[allow(clippy::too_many_arguments)]
pub fn density_export(
    scm: &StructuralModel,
    spec: &PredictorSpec,
    record: &Record,
    m: usize,
    bins: usize,
    seed: u64,
    cfg: &ResponseConfig,
    mcmc: &McmcConfig,
) -> Result<DensityTable> {
    if m < 100 {
        return Err(LcfError::InvalidConfig(format!(
            "density export needs at least 100 draws, got {m}"
        )));
    }
    let a_check = *scm
        .alternates(record.a)
        .first()
        .ok_or_else(|| LcfError::InvalidModel("attribute domain has one value".into()))?;
    let draws = scm.abduct(&record.x, record.a)?.draws(m, seed, mcmc)?;
    let results = draws
        .iter()
        .map(|u| simulate_pair(scm, spec, u, record.a, a_check, cfg))
        .collect::<Result<Vec<_>>>()?;
    let y_prime: Vec<f64> = results.iter().map(|r| r.y_prime).collect();
    let y_check_prime: Vec<f64> = results.iter().map(|r| r.y_check_prime).collect();
    let mut before = KahanSum::new();
    results.iter().for_each(|r| before.add(r.gap_before()));
    Ok(DensityTable {
        bins: histogram_pair(&y_prime, &y_check_prime, bins)?,
        emd: earth_movers_distance(&y_prime, &y_check_prime)?,
        mean_gap_before: before.mean().unwrap_or(f64::NAN),
        y_prime,
        y_check_prime,
    })
}

/// Outcome of checking that a counterfactually fair or unaware predictor
/// leaves every gap unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub samples: usize,
    pub max_abs_deviation: f64,
    pub max_rel_deviation: f64,
    pub precondition_met: bool,
    pub note: String,
}

/// Tolerance on the relative gap deviation.
pub const GAP_PRESERVATION_TOL: f64 = 1e-9;

impl ViolationReport {
    /// Gaps are preserved (so lookahead fairness is violated whenever any
    /// gap was nonzero).
    pub fn gaps_preserved(&self) -> bool {
        self.max_rel_deviation <= GAP_PRESERVATION_TOL
    }
}

/// Simulate every `(u, a, ǎ)` triple and report how far the post-response
/// gap moves from the original one.
pub fn lcf_violation_check(
    scm: &StructuralModel,
    spec: &PredictorSpec,
    samples: &[(ExogenousSample, Attribute, Attribute)],
    cfg: &ResponseConfig,
) -> Result<ViolationReport> {
    match spec {
        PredictorSpec::Unfair { .. } | PredictorSpec::CfBaseline { .. } => {}
        other => {
            return Err(LcfError::Unsupported(format!(
                "violation check applies to unfair and counterfactually fair predictors, not {}",
                other.variant_name()
            )))
        }
    }
    if !matches!(scm, StructuralModel::Linear(_)) {
        return Err(LcfError::Unsupported(format!(
            "violation check for the {} family",
            scm.family_name()
        )));
    }
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut any_gap = false;
    for (u, a, a_check) in samples {
        let r = simulate_pair(scm, spec, u, *a, *a_check, cfg)?;
        let (b, after) = (r.gap_before(), r.gap_after());
        let dev = (after - b).abs();
        max_abs = max_abs.max(dev);
        max_rel = max_rel.max(dev / b.abs().max(1.0));
        any_gap |= b > 0.0;
    }
    let note = if samples.is_empty() {
        "no samples".to_string()
    } else if !any_gap {
        "precondition unmet: every original gap is zero".to_string()
    } else if max_rel <= GAP_PRESERVATION_TOL {
        "gaps preserved: lookahead fairness is violated".to_string()
    } else {
        "gaps changed".to_string()
    };
    Ok(ViolationReport {
        samples: samples.len(),
        max_abs_deviation: max_abs,
        max_rel_deviation: max_rel,
        precondition_met: any_gap,
        note,
    })
}

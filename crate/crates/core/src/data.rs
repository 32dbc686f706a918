//! Datasets: synthetic generation from built-in or explicit models, CSV
//! loading for the generic, law-school and loan schemas, and persistence.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::DistSpec;
use crate::error::{LcfError, Result};
use crate::numeric::mix_seed;
use crate::scm::{
    Attribute, ExogenousSample, LawSchoolScm, LinearAdditiveScm, MultiplicativeBinaryScm, OffsetFn,
    ScalarFn, ScalarMonotoneScm, ScmConfig, StructuralModel,
};

/// One observed `(x, a, y)` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub x: Vec<f64>,
    pub a: Attribute,
    pub y: f64,
}

/// Descriptive metadata stored next to a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub feature_names: Vec<String>,
    pub attr_domain: Vec<Attribute>,
    /// Numeric codes assigned to categorical columns, by column name.
    #[serde(default)]
    pub codes: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub skipped_rows: usize,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(records: Vec<Record>, meta: DatasetMeta) -> Result<Self> {
        let ds = Self { records, meta };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.meta.feature_names.len();
        for (i, r) in self.records.iter().enumerate() {
            if r.x.len() != d {
                return Err(LcfError::DegenerateData(format!(
                    "record {i} has {} features, expected {d}",
                    r.x.len()
                )));
            }
            if !self.meta.attr_domain.contains(&r.a) {
                return Err(LcfError::AttributeOutOfDomain(r.a));
            }
            if r.x.iter().any(|v| !v.is_finite()) || !r.y.is_finite() {
                return Err(LcfError::NonFinite("dataset record"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn d(&self) -> usize {
        self.meta.feature_names.len()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            meta: self.meta.clone(),
        }
    }
}

/// Train/validation/test indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded 60/20/20 shuffle split.
pub fn split_indices(n: usize, seed: u64) -> SplitIndices {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 3 / 5;
    let n_val = n / 5;
    SplitIndices {
        train: idx[..n_train].to_vec(),
        validation: idx[n_train..n_train + n_val].to_vec(),
        test: idx[n_train + n_val..].to_vec(),
    }
}

/// Structural coefficients of the reference ten-feature synthetic model.
pub mod reference {
    pub const ALPHA: [f64; 10] = [
        0.37454012, 0.95071431, 0.73199394, 0.59865848, 0.15601864, 0.15599452, 0.05808361,
        0.86617615, 0.60111501, 0.70807258,
    ];
    pub const BETA: [f64; 10] = [
        0.02058449, 0.96990985, 0.83244264, 0.21233911, 0.18182497, 0.18340451, 0.30424224,
        0.52475643, 0.43194502, 0.29122914,
    ];
    pub const W: [f64; 10] = [
        0.61185289, 0.13949386, 0.29214465, 0.36636184, 0.45606998, 0.78517596, 0.19967378,
        0.51423444, 0.59241457, 0.04645041,
    ];
    pub const GAMMA: f64 = 0.60754485;
    pub const SCALAR_ALPHA: f64 = 0.5987;
}

/// Built-in generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Linear-additive, d = 10, reference coefficients, A ∈ {0, 1}.
    LinearD10,
    /// Multiplicative, d = 10, reference coefficients, A ∈ {1, 2}.
    MultiplicativeD10,
    /// Scalar `Y = (0.5987 U + e^A)^(2/3)`, A ∈ {0, 1}.
    ScalarPower,
    /// Law-school model with informative weights.
    LawSemisynthetic,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "linear-d10" => Ok(Preset::LinearD10),
            "multiplicative-d10" => Ok(Preset::MultiplicativeD10),
            "scalar-power" => Ok(Preset::ScalarPower),
            "law-semisynthetic" => Ok(Preset::LawSemisynthetic),
            other => Err(LcfError::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::LinearD10 => "linear-d10",
            Preset::MultiplicativeD10 => "multiplicative-d10",
            Preset::ScalarPower => "scalar-power",
            Preset::LawSemisynthetic => "law-semisynthetic",
        }
    }

    pub fn model(&self) -> Result<StructuralModel> {
        use reference::*;
        Ok(match self {
            Preset::LinearD10 => LinearAdditiveScm::new(
                ALPHA.to_vec(),
                BETA.to_vec(),
                W.to_vec(),
                GAMMA,
                vec![0.0, 1.0],
            )?
            .into(),
            Preset::MultiplicativeD10 => MultiplicativeBinaryScm::new(
                ALPHA.to_vec(),
                BETA.to_vec(),
                W.to_vec(),
                GAMMA,
                [1.0, 2.0],
            )?
            .into(),
            Preset::ScalarPower => ScalarMonotoneScm::new(
                ScalarFn::power(2.0 / 3.0)?,
                SCALAR_ALPHA,
                OffsetFn::Exp,
                (-2.0f64 / 3.0).exp() / 9.0,
                DistSpec::default(),
                vec![0.0, 1.0],
            )?
            .into(),
            Preset::LawSemisynthetic => law_semisynthetic_scm().into(),
        })
    }
}

/// Law-school weights used for semi-synthetic data.
pub fn law_semisynthetic_scm() -> LawSchoolScm {
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

/// Probability that a semi-synthetic law record has race code 1.
pub const LAW_RACE_P: f64 = 0.3;

/// Generation request: a preset or an explicit model, record count,
/// attribute probabilities over the model's domain (uniform when absent)
/// and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scm: Option<ScmConfig>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attr_probs: Option<Vec<f64>>,
    pub seed: u64,
}

impl GenSpec {
    pub fn preset(preset: Preset, n: usize, seed: u64) -> Self {
        Self {
            preset: Some(preset),
            scm: None,
            n,
            attr_probs: None,
            seed,
        }
    }

    pub fn model(&self) -> Result<StructuralModel> {
        match (&self.preset, &self.scm) {
            (Some(p), None) => p.model(),
            (None, Some(cfg)) => Ok(cfg.to_model()?.0),
            _ => Err(LcfError::InvalidConfig(
                "exactly one of `preset` and `scm` must be given".into(),
            )),
        }
    }

    fn attr_probs(&self, domain: &[Attribute]) -> Result<Vec<f64>> {
        match &self.attr_probs {
            None => Ok(vec![1.0 / domain.len() as f64; domain.len()]),
            Some(p) => {
                if p.len() != domain.len()
                    || p.iter().any(|v| !(*v >= 0.0))
                    || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Err(LcfError::InvalidConfig(
                        "attr_probs must be a probability vector over the attribute domain".into(),
                    ));
                }
                Ok(p.clone())
            }
        }
    }
}

fn priors_of(model: &StructuralModel) -> (Vec<DistSpec>, Option<DistSpec>) {
    match model {
        StructuralModel::Linear(m) => (m.prior_ux.clone(), Some(m.prior_uy)),
        StructuralModel::Multiplicative(m) => (m.prior_ux.clone(), Some(m.prior_uy)),
        StructuralModel::Scalar(m) => (vec![m.prior_u], None),
        StructuralModel::Law(_) => (Vec::new(), None),
    }
}

fn feature_names(model: &StructuralModel) -> Vec<String> {
    match model {
        StructuralModel::Law(_) => vec!["race".into(), "ugpa".into(), "lsat".into()],
        other => (1..=other.feature_dim()).map(|i| format!("x{i}")).collect(),
    }
}

/// Generate records together with the exogenous state behind each.
pub fn gen_synthetic_with_truth(spec: &GenSpec) -> Result<(Dataset, Vec<ExogenousSample>)> {
    if spec.n == 0 {
        return Err(LcfError::InvalidConfig("n must be at least 1".into()));
    }
    let model = spec.model()?;
    let domain = model.attr_domain().to_vec();
    let probs = spec.attr_probs(&domain)?;
    let (prior_ux, prior_uy) = priors_of(&model);
    let rows: Vec<(Record, ExogenousSample)> = (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, i as u64));
            let draw: f64 = rng.random();
            let mut acc = 0.0;
            let mut a = domain[domain.len() - 1];
            for (v, p) in domain.iter().zip(&probs) {
                acc += p;
                if draw < acc {
                    a = *v;
                    break;
                }
            }
            let u = match &model {
                StructuralModel::Law(_) => {
                    let k: f64 = rng.sample(StandardNormal);
                    let r = f64::from(u8::from(rng.random::<f64>() < LAW_RACE_P));
                    ExogenousSample::new(vec![k, r], None)
                }
                _ => ExogenousSample::new(
                    prior_ux.iter().map(|p| p.sample(&mut rng)).collect(),
                    prior_uy.map(|p| p.sample(&mut rng)),
                ),
            };
            let out = model.forward(&u, a, Some(&mut rng))?;
            Ok((
                Record {
                    x: out.x,
                    a,
                    y: out.y,
                },
                u,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (records, truth): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let mut meta = DatasetMeta {
        feature_names: feature_names(&model),
        attr_domain: domain,
        source: format!(
            "synthetic {} n={} seed={}",
            spec.preset.map_or(model.family_name(), |p| p.name()),
            spec.n,
            spec.seed
        ),
        ..DatasetMeta::default()
    };
    if matches!(model, StructuralModel::Law(_)) {
        meta.codes.insert(
            "race".into(),
            BTreeMap::from([("0".to_string(), 0.0), ("1".to_string(), 1.0)]),
        );
    }
    Ok((Dataset::new(records, meta)?, truth))
}

/// Generate a dataset; a pure function of `spec`.
pub fn gen_synthetic(spec: &GenSpec) -> Result<Dataset> {
    Ok(gen_synthetic_with_truth(spec)?.0)
}

/// Supported CSV layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsvSchema {
    /// Feature columns (any names), plus `a` and `y`.
    GenericXay,
    /// `sex, race, ugpa, lsat, fya`; sex is the attribute.
    Law,
    /// `gender, income, coapp_income, married, area, amount`; gender is
    /// the attribute and the loan amount the outcome.
    Loan,
}

impl CsvSchema {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "generic-xay" | "generic" => Ok(CsvSchema::GenericXay),
            "law" => Ok(CsvSchema::Law),
            "loan" => Ok(CsvSchema::Loan),
            other => Err(LcfError::InvalidConfig(format!(
                "unknown CSV schema `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy)]
enum ColKind {
    Numeric,
    Integer,
    Categorical,
}

struct SchemaLayout {
    attr: (&'static str, ColKind),
    features: Vec<(String, ColKind)>,
    outcome: &'static str,
}

fn layout(schema: CsvSchema, headers: &[String]) -> SchemaLayout {
    match schema {
        CsvSchema::GenericXay => SchemaLayout {
            attr: ("a", ColKind::Numeric),
            features: headers
                .iter()
                .filter(|h| h.as_str() != "a" && h.as_str() != "y")
                .map(|h| (h.clone(), ColKind::Numeric))
                .collect(),
            outcome: "y",
        },
        CsvSchema::Law => SchemaLayout {
            attr: ("sex", ColKind::Categorical),
            features: vec![
                ("race".into(), ColKind::Categorical),
                ("ugpa".into(), ColKind::Numeric),
                ("lsat".into(), ColKind::Integer),
            ],
            outcome: "fya",
        },
        CsvSchema::Loan => SchemaLayout {
            attr: ("gender", ColKind::Categorical),
            features: vec![
                ("income".into(), ColKind::Numeric),
                ("coapp_income".into(), ColKind::Numeric),
                ("married".into(), ColKind::Categorical),
                ("area".into(), ColKind::Categorical),
            ],
            outcome: "amount",
        },
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Load a CSV file by header name. Rows with missing or unparseable fields
/// are skipped and counted; more than half skipped aborts the load.
/// Categorical columns holding numbers keep their values; otherwise
/// distinct labels are coded `0, 1, ...` in sorted order and the code map
/// is stored in the metadata. Integer columns are rounded.
pub fn load_csv(path: &Path, schema: CsvSchema) -> Result<Dataset> {
    let csv_err = |message: String| LcfError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => LcfError::io(path, io),
            other => csv_err(format!("{other:?}")),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let lay = layout(schema, &headers);
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_err(format!("missing column `{name}`")))
    };
    let attr_col = col(lay.attr.0)?;
    let y_col = col(lay.outcome)?;
    let feature_cols = lay
        .features
        .iter()
        .map(|(n, _)| col(n))
        .collect::<Result<Vec<_>>>()?;
    if feature_cols.is_empty() {
        return Err(csv_err("no feature columns".into()));
    }

    let mut raw: Vec<Vec<String>> = Vec::new();
    let mut total = 0usize;
    let mut skipped = 0usize;
    for row in reader.records() {
        total += 1;
        match row {
            Ok(r) if r.len() == headers.len() => {
                raw.push(r.iter().map(|s| s.to_string()).collect())
            }
            _ => skipped += 1,
        }
    }
    if total == 0 {
        return Err(LcfError::Empty("CSV data rows"));
    }

    // categorical code maps over rows that are otherwise complete
    let mut cats: Vec<(usize, &str)> = Vec::new();
    if matches!(lay.attr.1, ColKind::Categorical) {
        cats.push((attr_col, lay.attr.0));
    }
    for ((name, kind), &c) in lay.features.iter().zip(&feature_cols) {
        if matches!(kind, ColKind::Categorical) {
            cats.push((c, name.as_str()));
        }
    }
    let mut codes: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for &(c, name) in &cats {
        let labels: BTreeSet<&str> = raw
            .iter()
            .map(|r| r[c].as_str())
            .filter(|s| !s.is_empty())
            .collect();
        if labels.iter().all(|s| parse_number(s).is_some()) {
            continue;
        }
        let map = labels
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s.to_string(), i as f64))
            .collect();
        codes.insert(name.to_string(), map);
    }
    let value = |name: &str, kind: ColKind, s: &str| -> Option<f64> {
        if s.is_empty() {
            return None;
        }
        match kind {
            ColKind::Categorical => match codes.get(name) {
                Some(map) => map.get(s).copied(),
                None => parse_number(s),
            },
            ColKind::Integer => parse_number(s).map(f64::round),
            ColKind::Numeric => parse_number(s),
        }
    };

    let mut records = Vec::with_capacity(raw.len());
    for r in &raw {
        let a = value(lay.attr.0, lay.attr.1, &r[attr_col]);
        let y = value(lay.outcome, ColKind::Numeric, &r[y_col]);
        let x: Option<Vec<f64>> = lay
            .features
            .iter()
            .zip(&feature_cols)
            .map(|((n, k), &c)| value(n, *k, &r[c]))
            .collect();
        match (a, x, y) {
            (Some(a), Some(x), Some(y)) => records.push(Record { x, a, y }),
            _ => skipped += 1,
        }
    }
    if skipped * 2 > total {
        return Err(LcfError::DegenerateData(format!(
            "{}: {skipped} of {total} rows skipped",
            path.display()
        )));
    }
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} of {total} rows", path.display());
    }
    let attr_domain: Vec<f64> = {
        let mut v: Vec<f64> = records.iter().map(|r| r.a).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let meta = DatasetMeta {
        feature_names: lay.features.iter().map(|(n, _)| n.clone()).collect(),
        attr_domain,
        codes,
        skipped_rows: skipped,
        source: path.display().to_string(),
    };
    Dataset::new(records, meta)
}

fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta.toml");
    PathBuf::from(p)
}

/// Write a dataset as CSV (`x1..xd, a, y`, 17 significant digits) plus a
/// `.meta.toml` sidecar.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let mut header: Vec<String> = ds.meta.feature_names.clone();
    header.push("a".into());
    header.push("y".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for r in &ds.records {
        let mut fields: Vec<String> = r.x.iter().map(|v| format!("{v:.16e}")).collect();
        fields.push(format!("{:.16e}", r.a));
        fields.push(format!("{:.16e}", r.y));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| LcfError::io(path, e))?;
    save_report(&ds.meta, &meta_path(path))
}

/// Read a dataset written by [`save_dataset`]. Without a sidecar the
/// attribute domain is inferred from the data.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut ds = load_csv(path, CsvSchema::GenericXay)?;
    let mp = meta_path(path);
    if mp.exists() {
        let text = fs::read_to_string(&mp).map_err(|e| LcfError::io(&mp, e))?;
        let meta: DatasetMeta = toml::from_str(&text).map_err(|e| LcfError::Parse {
            path: mp.clone(),
            message: e.to_string(),
        })?;
        if meta.feature_names.len() != ds.d() {
            return Err(LcfError::Parse {
                path: mp,
                message: "feature count disagrees with the data file".into(),
            });
        }
        ds.meta = meta;
        ds.validate()?;
    }
    Ok(ds)
}

/// Serialize any report as TOML.
pub fn save_report<T: Serialize + ?Sized>(obj: &T, path: &Path) -> Result<()> {
    let text = toml::to_string(obj).map_err(|e| LcfError::InvalidConfig(e.to_string()))?;
    fs::write(path, text).map_err(|e| LcfError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_constants_are_verbatim() {
        assert_eq!(reference::ALPHA[0], 0.37454012);
        assert_eq!(reference::GAMMA, 0.60754485);
        let m = Preset::LinearD10.model().unwrap();
        assert_eq!(m.feature_dim(), 10);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GenSpec::preset(Preset::LinearD10, 50, 9);
        assert_eq!(gen_synthetic(&spec).unwrap(), gen_synthetic(&spec).unwrap());
        let one = GenSpec::preset(Preset::LinearD10, 1, 9);
        let d1 = gen_synthetic(&one).unwrap();
        assert_eq!(d1.len(), 1);
        assert_eq!(d1.records[0], gen_synthetic(&spec).unwrap().records[0]);
        assert!(gen_synthetic(&GenSpec::preset(Preset::LinearD10, 0, 9)).is_err());
    }

    #[test]
    fn scalar_preset_outcomes_are_positive() {
        let ds = gen_synthetic(&GenSpec::preset(Preset::ScalarPower, 500, 1)).unwrap();
        assert!(ds.records.iter().all(|r| r.y > 0.0));
    }

    #[test]
    fn split_is_a_partition() {
        let s = split_indices(1000, 3);
        assert_eq!(
            (s.train.len(), s.validation.len(), s.test.len()),
            (600, 200, 200)
        );
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert_eq!(s, split_indices(1000, 3));
    }

    #[test]
    fn generic_csv_loads_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "x1,x2,a,y\n0.5,1.25,0,2\n-1,3,1,0.125\n7,8,1,9\n").unwrap();
        let ds = load_csv(&p, CsvSchema::GenericXay).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(
            ds.records[1],
            Record {
                x: vec![-1.0, 3.0],
                a: 1.0,
                y: 0.125
            }
        );
        assert_eq!(ds.meta.attr_domain, vec![0.0, 1.0]);
    }

    #[test]
    fn law_csv_skips_bad_rows_and_codes_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("law.csv");
        fs::write(
            &p,
            "race,sex,ugpa,lsat,fya\nWhite,1,3.1,39,0.2\nBlack,2,2.9,abc,0.1\nAsian,2,3.5,41.0,-0.3\n",
        )
        .unwrap();
        let ds = load_csv(&p, CsvSchema::Law).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.meta.skipped_rows, 1);
        assert_eq!(ds.meta.codes["race"]["Asian"], 0.0);
        assert_eq!(ds.records[1].x, vec![0.0, 3.5, 41.0]);
        assert_eq!(ds.meta.attr_domain, vec![1.0, 2.0]);
    }

    #[test]
    fn loan_columns_are_found_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loan.csv");
        fs::write(
            &p,
            "amount,area,married,coapp_income,income,gender\n120,Urban,Yes,0,5000,Male\n90,Rural,No,1500,3000,Female\n",
        )
        .unwrap();
        let ds = load_csv(&p, CsvSchema::Loan).unwrap();
        assert_eq!(ds.records[0].x, vec![5000.0, 0.0, 1.0, 1.0]);
        assert_eq!(ds.records[0].y, 120.0);
        assert_eq!(ds.records[1].a, 0.0);
        assert_eq!(ds.meta.codes["gender"]["Male"], 1.0);
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "race,sex,ugpa,fya\n1,1,3,0\n").unwrap();
        assert!(matches!(
            load_csv(&p, CsvSchema::Law),
            Err(LcfError::Csv { .. })
        ));
        fs::write(&p, "x1,a,y\n").unwrap();
        assert!(matches!(
            load_csv(&p, CsvSchema::GenericXay),
            Err(LcfError::Empty(_))
        ));
        fs::write(&p, "x1,a,y\nq,0,1\nr,1,1\n1,0,1\n").unwrap();
        assert!(matches!(
            load_csv(&p, CsvSchema::GenericXay),
            Err(LcfError::DegenerateData(_))
        ));
    }

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ds.csv");
        let ds = gen_synthetic(&GenSpec::preset(Preset::LinearD10, 100, 4)).unwrap();
        save_dataset(&ds, &p).unwrap();
        let back = load_dataset(&p).unwrap();
        assert_eq!(back.records, ds.records);
        assert_eq!(back.meta, ds.meta);
        let err = save_dataset(&ds, &dir.path().join("missing/ds.csv")).unwrap_err();
        assert!(err.to_string().contains("missing"));
    }

    #[test]
    fn law_generation_returns_truth() {
        let (ds, truth) =
            gen_synthetic_with_truth(&GenSpec::preset(Preset::LawSemisynthetic, 200, 2)).unwrap();
        assert_eq!(truth.len(), 200);
        for (r, u) in ds.records.iter().zip(&truth) {
            assert_eq!(r.x[0], u.ux[1]);
            assert!(r.x[2] >= 0.0 && r.x[2].fract() == 0.0);
        }
    }
}

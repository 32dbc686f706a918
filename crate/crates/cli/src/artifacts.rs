//! On-disk layout of experiment runs.
//!
//! ```text
//! <out>/config.toml          canonical run configuration
//! <out>/manifest.toml        config hash, seeds, split indices, metrics
//! <out>/aggregate.csv        mean and sample std per method over seeds
//! <out>/checks.txt           one PASS/FAIL line per run-level check
//! <out>/seed_<s>/reports.csv one row per method
//! <out>/seed_<s>/model_<method>.toml
//! <out>/seed_<s>/scm.toml
//! <out>/seed_<s>/sweep.csv | density_<method>.csv | audit.toml | law.toml
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lcf_core::data::{save_report, SplitIndices};
use lcf_core::experiment::{
    aggregate, AggregateRow, RunConfig, ScmSource, SeedRun, AGGREGATE_CSV_HEADER,
};
use lcf_core::metrics::EvalReport;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::checks::Check;

/// SHA-256 of the canonical TOML form of a configuration.
pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let text = cfg.to_toml()?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedManifest {
    pub seed: u64,
    pub split: SplitIndices,
    pub reports: Vec<EvalReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scm_source: Option<ScmSource>,
    pub aggregate: Vec<AggregateRow>,
    pub runs: Vec<SeedManifest>,
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut text = format!("{AGGREGATE_CSV_HEADER}\n");
    for r in rows {
        text.push_str(&r.to_csv_row());
        text.push('\n');
    }
    write_text(path, &text)
}

fn write_seed(run: &SeedRun, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    EvalReport::write_csv(&run.reports, &dir.join("reports.csv"))?;
    save_report(&run.scm, &dir.join("scm.toml"))?;
    for (name, fit) in &run.fits {
        save_report(fit, &dir.join(format!("model_{name}.toml")))?;
    }
    if !run.sweep.is_empty() {
        let mut text = String::from("eta,t,p1,p1_over_t,mse,afce,uir\n");
        for p in &run.sweep {
            text.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                p.eta,
                p.t,
                p.p1,
                p.p1_over_t,
                p.mse,
                p.afce,
                p.uir.map(|u| format!("{u:.17e}")).unwrap_or_default()
            ));
        }
        write_text(&dir.join("sweep.csv"), &text)?;
    }
    for (name, table) in &run.density {
        table.write_csv(&dir.join(format!("density_{name}.csv")))?;
    }
    if let Some(audit) = &run.audit {
        save_report(audit, &dir.join("audit.toml"))?;
    }
    if let Some(law) = &run.law {
        save_report(law, &dir.join("law.toml"))?;
    }
    Ok(())
}

/// Write every artifact of a finished run. Output depends only on the
/// configuration and the results, so identical runs give identical bytes.
pub fn write_run(
    cfg: &RunConfig,
    runs: &[SeedRun],
    checks: &[Check],
    out: &Path,
) -> Result<RunManifest> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join("config.toml"), &cfg.to_toml()?)?;
    for run in runs {
        write_seed(run, &seed_dir(out, run.seed))?;
    }
    let agg = aggregate(runs);
    write_aggregate_csv(&agg, &out.join("aggregate.csv"))?;
    let manifest = RunManifest {
        experiment: cfg.experiment.name().to_string(),
        config_hash: config_hash(cfg)?,
        seeds: cfg.seeds.clone(),
        scm_source: runs.first().map(|r| r.scm_source),
        aggregate: agg,
        runs: runs
            .iter()
            .map(|r| SeedManifest {
                seed: r.seed,
                split: r.split.clone(),
                reports: r.reports.clone(),
            })
            .collect(),
    };
    save_report(&manifest, &out.join("manifest.toml"))?;
    let mut text = String::new();
    for c in checks {
        text.push_str(&c.line());
        text.push('\n');
    }
    write_text(&out.join("checks.txt"), &text)?;
    Ok(manifest)
}

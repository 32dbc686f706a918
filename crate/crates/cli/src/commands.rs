//! Subcommands of `lcf-lab`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lcf_core::data::{
    gen_synthetic, load_csv, load_dataset, save_dataset, save_report, split_indices, CsvSchema,
    Dataset, GenSpec, Preset, SplitIndices,
};
use lcf_core::dist::DistSpec;
use lcf_core::experiment::{
    aggregate, evaluate, evaluate_path_dependent, run_experiment, EvalOptions, Evaluation,
    Experiment, RunConfig,
};
use lcf_core::metrics::EvalReport;
use lcf_core::response::write_simulation_csv;
use lcf_core::scm::{McmcConfig, ScmConfig};
use lcf_core::training::{
    estimate_law_params, estimate_linear_scm, fit_cf, fit_lcf_quadratic, fit_multiplicative_convex,
    fit_path_dependent, fit_power_g, fit_scalar_quadratic, fit_unfair, FitResult, HInputs,
    LawEmConfig, LawEmDiagnostics, Optimizer, P1Mode, TrainConfig, TrainingBatch,
};
use lcf_core::{PathMask, StructuralModel};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::artifacts::{config_hash, write_run};
use crate::checks::run_checks;

#[derive(Debug, Parser)]
#[command(
    name = "lcf-lab",
    version,
    about = "Lookahead counterfactual fairness experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides shared by the experiment-level subcommands.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run configuration (TOML); defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// `perfect`, `relaxed:<value>` or `train`.
    #[arg(long)]
    pub p1: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Run seeds concurrently (each seed writes its own directory).
    #[arg(long)]
    pub parallel_seeds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Least squares on the observed features.
    Unfair,
    /// Least squares on the exogenous state.
    Cf,
    /// The model family's LCF predictor (path-dependent when the model
    /// file carries a mask).
    Lcf,
    /// Power-convex LCF predictor (linear family).
    Power,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen {
        /// Built-in model: linear-d10, multiplicative-d10, scalar-power,
        /// law-semisynthetic.
        #[arg(long, conflicts_with = "scm")]
        preset: Option<String>,
        /// Model file (TOML) instead of a preset.
        #[arg(long)]
        scm: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset CSV to write (a `.meta.toml` sidecar is written next to it).
        #[arg(long)]
        out: PathBuf,
        /// Also write the generating model (TOML).
        #[arg(long)]
        scm_out: Option<PathBuf>,
    },
    /// Estimate structural parameters from data.
    FitScm {
        #[arg(long)]
        data: PathBuf,
        /// CSV layout: generic-xay (dataset files), law or loan.
        #[arg(long, default_value = "generic-xay")]
        schema: String,
        /// linear-additive or law-school.
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model file (TOML) to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a predictor on the training split and report validation metrics.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        scm: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Lcf)]
        method: Method,
        #[arg(long, default_value_t = 10.0)]
        eta: f64,
        #[arg(long, default_value = "perfect")]
        p1: String,
        #[arg(long, default_value_t = 100)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Include `u_Y` in the additive term.
        #[arg(long)]
        h_all: bool,
        /// Output directory (model.toml, manifest.toml).
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the per-draw simulation stream of a fitted predictor.
    Simulate {
        #[command(flatten)]
        eval: EvalArgs,
        /// Simulation CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a fitted predictor (report.toml, report.csv).
    Evaluate {
        #[command(flatten)]
        eval: EvalArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// `p1` sweep over a doubling grid.
    Sweep(RunArgs),
    /// Post-response outcome histograms for one record.
    Density(RunArgs),
    /// Run the experiment named in the configuration.
    Run(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub scm: PathBuf,
    /// Fitted predictor (model.toml from `train`).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 10.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Method label written to the report.
    #[arg(long, default_value = "model")]
    pub label: String,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn hash_of<T: Serialize>(value: &T) -> Result<String> {
    let text = toml::to_string(value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

pub fn load_scm(path: &Path) -> Result<(StructuralModel, Option<PathMask>)> {
    let cfg = ScmConfig::from_toml(&read(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(cfg.to_model()?)
}

pub fn load_model(path: &Path) -> Result<FitResult> {
    toml::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_run_config(args: &RunArgs, experiment: Option<Experiment>) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            RunConfig::from_toml(&read(p)?).with_context(|| format!("parsing {}", p.display()))?
        }
        None => RunConfig::new(experiment.unwrap_or(Experiment::Table1)),
    };
    if let Some(e) = experiment {
        cfg.experiment = e;
    }
    if let Some(s) = args.seed {
        cfg.seeds = vec![s];
    }
    if let Some(eta) = args.eta {
        cfg.eta = eta;
        if cfg.experiment == Experiment::Sweep {
            cfg.etas = vec![eta];
        }
    }
    if let Some(p1) = &args.p1 {
        cfg.p1 = p1.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Run an experiment and write its artifacts. Returns whether every
/// check passed.
pub fn cmd_run(args: &RunArgs, experiment: Option<Experiment>) -> Result<bool> {
    let cfg = load_run_config(args, experiment)?;
    log::info!(
        "running {} over {} seed(s), config hash {}",
        cfg.experiment.name(),
        cfg.seeds.len(),
        config_hash(&cfg)?
    );
    let runs = run_experiment(&cfg, args.parallel_seeds)?;
    let checks = run_checks(&cfg, &runs);
    write_run(&cfg, &runs, &checks, &args.out)?;
    for row in aggregate(&runs) {
        let uir = match (row.uir_mean, row.uir_std) {
            (Some(m), Some(s)) => format!("{m:.1}% ± {s:.2}"),
            _ => "undefined".into(),
        };
        println!(
            "{:<6} MSE {:.3} ± {:.3}  AFCE {:.3} ± {:.3}  UIR {uir}",
            row.method, row.mse_mean, row.mse_std, row.afce_mean, row.afce_std
        );
    }
    for c in &checks {
        if c.passed {
            log::info!("{}", c.line());
        } else {
            eprintln!("{}", c.line());
        }
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn cmd_gen(
    preset: Option<&str>,
    scm: Option<&Path>,
    n: usize,
    seed: u64,
    out: &Path,
    scm_out: Option<&Path>,
) -> Result<()> {
    let spec = match (preset, scm) {
        (Some(p), None) => GenSpec::preset(Preset::parse(p)?, n, seed),
        (None, Some(path)) => GenSpec {
            preset: None,
            scm: Some(ScmConfig::from_toml(&read(path)?)?),
            n,
            attr_probs: None,
            seed,
        },
        _ => bail!("give exactly one of --preset and --scm"),
    };
    let ds = gen_synthetic(&spec)?;
    save_dataset(&ds, out)?;
    if let Some(path) = scm_out {
        let mask = match &spec.scm {
            Some(cfg) => cfg.to_model()?.1,
            None => None,
        };
        let text = ScmConfig::from_model(&spec.model()?, mask.as_ref())?.to_toml()?;
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {} records to {}", ds.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct EmReport<'a> {
    rounds: usize,
    converged: bool,
    changes: &'a [f64],
    acceptance_rate: f64,
}

fn cmd_fit_scm(data: &Path, schema: &str, family: &str, seed: u64, out: &Path) -> Result<()> {
    let schema = CsvSchema::parse(schema)?;
    let ds = match schema {
        CsvSchema::GenericXay => load_dataset(data)?,
        other => load_csv(data, other)?,
    };
    let model: StructuralModel = match family {
        "linear-additive" => {
            estimate_linear_scm(&ds, &vec![DistSpec::default(); ds.d()], DistSpec::default())?
                .into()
        }
        "law-school" => {
            let (scm, diag): (_, LawEmDiagnostics) =
                estimate_law_params(&ds, &McmcConfig::default(), &LawEmConfig::default(), seed)?;
            let mut em_path = out.as_os_str().to_owned();
            em_path.push(".em.toml");
            save_report(
                &EmReport {
                    rounds: diag.rounds,
                    converged: diag.converged,
                    changes: &diag.changes,
                    acceptance_rate: diag.acceptance_rate,
                },
                Path::new(&em_path),
            )?;
            if !diag.converged {
                log::warn!(
                    "EM did not reach its tolerance; see {}",
                    PathBuf::from(&em_path).display()
                );
            }
            scm.into()
        }
        other => bail!("cannot estimate family `{other}` (linear-additive or law-school)"),
    };
    fs::write(out, ScmConfig::from_model(&model, None)?.to_toml()?)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} model to {}", model.family_name(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct HashedTrain<'a> {
    method: Method,
    config: &'a TrainConfig,
}

#[derive(Serialize)]
struct TrainManifest {
    data: String,
    scm: String,
    method: Method,
    config: TrainConfig,
    config_hash: String,
    split: SplitIndices,
    train_loss: f64,
    validation: EvalReport,
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    data: &Path,
    scm_path: &Path,
    method: Method,
    eta: f64,
    p1: &str,
    m: usize,
    seed: u64,
    h_all: bool,
    out: &Path,
) -> Result<()> {
    let ds = load_dataset(data)?;
    let (scm, mask) = load_scm(scm_path)?;
    let cfg = TrainConfig {
        m,
        eta,
        p1_mode: P1Mode::parse(p1)?,
        optimizer: Optimizer::NormalEquations,
        seed,
        h_inputs: if h_all {
            HInputs::All
        } else {
            HInputs::ExogenousX
        },
        mcmc: McmcConfig::default(),
    };
    cfg.validate()?;
    let split = split_indices(ds.len(), seed);
    let train = ds.subset(&split.train);
    let validation = ds.subset(&split.validation);
    let path_dependent = method == Method::Lcf && mask.is_some();
    let batch = TrainingBatch::new(
        &train,
        &scm,
        m,
        seed,
        &cfg.mcmc,
        mask.as_ref().filter(|_| path_dependent),
    )?;
    let fit = match (method, &scm) {
        (Method::Unfair, _) => fit_unfair(&train, &cfg.optimizer)?,
        (Method::Cf, _) => fit_cf(&batch, &scm, &cfg.optimizer)?,
        (Method::Power, _) => fit_power_g(&batch, &scm, &cfg, 1.5)?,
        (Method::Lcf, _) if path_dependent => {
            fit_path_dependent(&batch, &scm, mask.as_ref().expect("mask"), &cfg)?
        }
        (Method::Lcf, StructuralModel::Scalar(_)) => fit_scalar_quadratic(&batch, &scm, &cfg)?,
        (Method::Lcf, StructuralModel::Multiplicative(_)) => {
            fit_multiplicative_convex(&batch, &scm, &cfg)?
        }
        (Method::Lcf, _) => fit_lcf_quadratic(&batch, &scm, &cfg)?,
    };
    let eval_args = EvalOptions {
        m,
        seed,
        eta,
        mcmc: cfg.mcmc.clone(),
    };
    let label = format!("{method:?}").to_lowercase();
    let report = run_eval(
        &label,
        &fit,
        &scm,
        mask.as_ref().filter(|_| path_dependent),
        &validation,
        &eval_args,
    )?
    .report;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save_report(&fit, &out.join("model.toml"))?;
    let manifest = TrainManifest {
        data: data.display().to_string(),
        scm: scm_path.display().to_string(),
        method,
        config_hash: hash_of(&HashedTrain {
            method,
            config: &cfg,
        })?,
        config: cfg,
        split,
        train_loss: fit.train_loss,
        validation: report,
    };
    save_report(&manifest, &out.join("manifest.toml"))?;
    println!(
        "trained {} (train MSE {:.4}, validation MSE {:.4}, AFCE {:.4})",
        fit.spec.variant_name(),
        fit.train_loss,
        manifest.validation.mse,
        manifest.validation.afce
    );
    Ok(())
}

fn run_eval(
    label: &str,
    fit: &FitResult,
    scm: &StructuralModel,
    mask: Option<&PathMask>,
    data: &Dataset,
    opts: &EvalOptions,
) -> Result<Evaluation> {
    Ok(match (mask, scm) {
        (Some(mask), StructuralModel::Linear(lin)) => {
            evaluate_path_dependent(label, &fit.spec, lin, mask, data, opts)?
        }
        (Some(_), other) => {
            return Err(anyhow!(
                "path masks apply to the linear-additive family, not {}",
                other.family_name()
            ))
        }
        (None, _) => evaluate(label, &fit.spec, scm, data, opts)?,
    })
}

fn eval_from_args(a: &EvalArgs) -> Result<Evaluation> {
    let ds = load_dataset(&a.data)?;
    let (scm, mask) = load_scm(&a.scm)?;
    let fit = load_model(&a.model)?;
    let uses_pd =
        mask.is_some() && matches!(fit.spec, lcf_core::PredictorSpec::LcfQuadratic { .. });
    let opts = EvalOptions {
        m: a.m,
        seed: a.seed,
        eta: a.eta,
        mcmc: McmcConfig::default(),
    };
    run_eval(
        &a.label,
        &fit,
        &scm,
        mask.as_ref().filter(|_| uses_pd),
        &ds,
        &opts,
    )
}

fn print_report(r: &EvalReport) {
    println!(
        "{}: MSE {:.4}  AFCE {:.4}  UIR {}",
        r.method,
        r.mse,
        r.afce,
        r.uir_percent
            .map(|u| format!("{u:.2}%"))
            .unwrap_or_else(|| "undefined".into())
    );
}

/// Dispatch a parsed command line. Returns whether every check passed.
pub fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen {
            preset,
            scm,
            n,
            seed,
            out,
            scm_out,
        } => cmd_gen(
            preset.as_deref(),
            scm.as_deref(),
            n,
            seed,
            &out,
            scm_out.as_deref(),
        )
        .map(|_| true),
        Command::FitScm {
            data,
            schema,
            family,
            seed,
            out,
        } => cmd_fit_scm(&data, &schema, &family, seed, &out).map(|_| true),
        Command::Train {
            data,
            scm,
            method,
            eta,
            p1,
            m,
            seed,
            h_all,
            out,
        } => cmd_train(&data, &scm, method, eta, &p1, m, seed, h_all, &out).map(|_| true),
        Command::Simulate { eval, out } => {
            let e = eval_from_args(&eval)?;
            write_simulation_csv(&e.rows, &out)?;
            print_report(&e.report);
            Ok(true)
        }
        Command::Evaluate { eval, out } => {
            let e = eval_from_args(&eval)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            save_report(&e.report, &out.join("report.toml"))?;
            EvalReport::write_csv(std::slice::from_ref(&e.report), &out.join("report.csv"))?;
            print_report(&e.report);
            Ok(true)
        }
        Command::Sweep(args) => cmd_run(&args, Some(Experiment::Sweep)),
        Command::Density(args) => cmd_run(&args, Some(Experiment::Density)),
        Command::Run(args) => cmd_run(&args, None),
    }
}

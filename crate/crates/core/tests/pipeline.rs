use lcf_core::data::{
    gen_synthetic, gen_synthetic_with_truth, load_dataset, save_dataset, GenSpec, Preset,
};
use lcf_core::metrics::{density_export, lcf_violation_check};
use lcf_core::predictor::compute_t;
use lcf_core::scm::{posterior_sample_k, LawRecord, McmcConfig, ScmConfig};
use lcf_core::training::{
    fit_cf, fit_lcf_quadratic, fit_unfair, FitResult, Optimizer, P1Mode, TrainConfig, TrainingBatch,
};
use lcf_core::{
    DistSpec, ExogenousSample, LcfError, LinearAdditiveScm, PredictorSpec, ResponseConfig,
    StructuralModel,
};

fn linear(beta: Vec<f64>, gamma: f64) -> StructuralModel {
    let d = beta.len();
    let alpha = (0..d).map(|i| 0.5 + 0.25 * i as f64).collect();
    let w = (0..d).map(|i| 0.6 - 0.3 * i as f64).collect();
    LinearAdditiveScm::with_priors(
        alpha,
        beta,
        w,
        gamma,
        vec![DistSpec::default(); d],
        DistSpec::default(),
        vec![0.0, 1.0],
    )
    .unwrap()
    .into()
}

fn generate(model: &StructuralModel, n: usize, seed: u64) -> lcf_core::data::Dataset {
    let spec = GenSpec {
        preset: None,
        scm: Some(ScmConfig::from_model(model, None).unwrap()),
        n,
        attr_probs: None,
        seed,
    };
    gen_synthetic(&spec).unwrap()
}

fn cfg(p1_mode: P1Mode, optimizer: Optimizer) -> TrainConfig {
    TrainConfig {
        m: 20,
        p1_mode,
        optimizer,
        seed: 7,
        ..TrainConfig::default()
    }
}

#[test]
fn lookahead_model_nests_the_unfair_model_when_the_attribute_is_inert() {
    let model = linear(vec![0.0; 3], 0.5);
    let data = generate(&model, 400, 1);
    let uf = fit_unfair(&data, &Optimizer::NormalEquations).unwrap();
    let c = cfg(P1Mode::Trainable, Optimizer::NormalEquations);
    let batch = TrainingBatch::from_config(&data, &model, &c).unwrap();
    let ours = fit_lcf_quadratic(&batch, &model, &c).unwrap();
    assert!(
        ours.train_loss <= uf.train_loss + 1e-6,
        "ours {} vs unfair {}",
        ours.train_loss,
        uf.train_loss
    );
}

#[test]
fn counterfactual_baseline_is_exact_when_u_determines_the_outcome() {
    let model = linear(vec![0.0; 3], 1e-6);
    let data = generate(&model, 300, 2);
    let c = cfg(P1Mode::Perfect, Optimizer::NormalEquations);
    let batch = TrainingBatch::from_config(&data, &model, &c).unwrap();
    let fit = fit_cf(&batch, &model, &c.optimizer).unwrap();
    assert!(fit.train_loss <= 1e-10, "loss {}", fit.train_loss);
}

fn predictions_close(a: &FitResult, b: &FitResult) {
    assert!(
        (a.train_loss - b.train_loss).abs() <= 1e-4 * a.train_loss.max(1.0),
        "{} vs {}",
        a.train_loss,
        b.train_loss
    );
}

#[test]
fn gradient_descent_agrees_with_normal_equations() {
    let model = Preset::LinearD10.model().unwrap();
    let data = gen_synthetic(&GenSpec::preset(Preset::LinearD10, 300, 3)).unwrap();
    let gd = Optimizer::GradientDescent {
        lr: 0.01,
        epochs: 20000,
    };
    let ne = Optimizer::NormalEquations;
    predictions_close(
        &fit_unfair(&data, &ne).unwrap(),
        &fit_unfair(&data, &gd).unwrap(),
    );
    let c = cfg(P1Mode::Perfect, ne);
    let batch = TrainingBatch::from_config(&data, &model, &c).unwrap();
    predictions_close(
        &fit_cf(&batch, &model, &ne).unwrap(),
        &fit_cf(&batch, &model, &gd).unwrap(),
    );
    let exact = fit_lcf_quadratic(&batch, &model, &c).unwrap();
    let adam = fit_lcf_quadratic(&batch, &model, &cfg(P1Mode::Perfect, gd)).unwrap();
    predictions_close(&exact, &adam);
}

#[test]
fn training_is_bit_reproducible() {
    let model = Preset::LinearD10.model().unwrap();
    let data = gen_synthetic(&GenSpec::preset(Preset::LinearD10, 200, 4)).unwrap();
    let fit = || {
        let c = cfg(P1Mode::Trainable, Optimizer::NormalEquations);
        let batch = TrainingBatch::from_config(&data, &model, &c).unwrap();
        fit_lcf_quadratic(&batch, &model, &c).unwrap()
    };
    assert_eq!(fit(), fit());
}

#[test]
fn density_export_separates_unfair_and_merges_perfect() {
    let model = Preset::LinearD10.model().unwrap();
    let data = gen_synthetic(&GenSpec::preset(Preset::LinearD10, 1, 5)).unwrap();
    let rec = &data.records[0];
    let rcfg = ResponseConfig::new(10.0).unwrap();
    let mcmc = McmcConfig::default();
    let theta = vec![0.1; 10];
    let unfair = PredictorSpec::Unfair { theta, c: 0.0 };
    let table = density_export(&model, &unfair, rec, 500, 20, 9, &rcfg, &mcmc).unwrap();
    assert!((table.emd - table.mean_gap_before).abs() <= 1e-9 * table.mean_gap_before.max(1.0));
    assert!(table.mean_gap_before > 0.0);

    let t = compute_t(&model, 10.0).unwrap();
    let perfect = PredictorSpec::LcfQuadratic {
        p1: t / 2.0,
        p2: 0.3,
        p3: 0.0,
        theta: vec![0.0; 11],
    };
    let table = density_export(&model, &perfect, rec, 500, 20, 9, &rcfg, &mcmc).unwrap();
    assert!(table.emd <= 1e-9, "emd {}", table.emd);
    assert!(table
        .bins
        .iter()
        .all(|b| b.factual_count == b.counterfactual_count));
    assert!(density_export(&model, &perfect, rec, 50, 20, 9, &rcfg, &mcmc).is_err());
}

#[test]
fn violation_check_reports_preserved_gaps_and_unmet_preconditions() {
    let rcfg = ResponseConfig::new(2.0).unwrap();
    let samples: Vec<_> = (0..20)
        .map(|i| {
            (
                ExogenousSample::new(vec![0.1 * i as f64, 0.3, 0.7], Some(0.4)),
                0.0,
                1.0,
            )
        })
        .collect();
    let cf = PredictorSpec::CfBaseline {
        phi: vec![0.5, -0.2, 0.3, 1.0],
        c: 0.1,
    };

    let model = linear(vec![0.4, -0.2, 0.1], 0.5);
    let report = lcf_violation_check(&model, &cf, &samples, &rcfg).unwrap();
    assert!(
        report.precondition_met && report.gaps_preserved(),
        "{report:?}"
    );

    let inert = linear(vec![0.0; 3], 0.5);
    let report = lcf_violation_check(&inert, &cf, &samples, &rcfg).unwrap();
    assert!(!report.precondition_met);

    let lcf = PredictorSpec::LcfQuadratic {
        p1: 0.01,
        p2: 0.0,
        p3: 0.0,
        theta: vec![0.0; 4],
    };
    assert!(matches!(
        lcf_violation_check(&model, &lcf, &samples, &rcfg),
        Err(LcfError::Unsupported(_))
    ));
}

#[test]
fn datasets_survive_a_disk_round_trip() {
    let data = gen_synthetic(&GenSpec::preset(Preset::LinearD10, 50, 6)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    save_dataset(&data, &path).unwrap();
    assert_eq!(load_dataset(&path).unwrap(), data);
    assert!(save_dataset(&data, &dir.path().join("missing").join("data.csv")).is_err());
}

#[test]
fn law_sampler_mixes_at_the_default_scale() {
    let spec = GenSpec::preset(Preset::LawSemisynthetic, 40, 8);
    let (data, _) = gen_synthetic_with_truth(&spec).unwrap();
    let StructuralModel::Law(scm) = Preset::LawSemisynthetic.model().unwrap() else {
        panic!("law preset");
    };
    for (i, r) in data.records.iter().enumerate() {
        let rec = LawRecord::from_features(&r.x, r.a).unwrap();
        let draws = posterior_sample_k(&scm, &rec, &McmcConfig::default(), i as u64).unwrap();
        assert!(
            (0.1..=0.7).contains(&draws.acceptance_rate),
            "record {i}: acceptance {}",
            draws.acceptance_rate
        );
    }
}

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lcf_bench::Fixture;
use lcf_core::data::Preset;
use lcf_core::experiment::{evaluate, EvalOptions};
use lcf_core::response::simulate_pair;
use lcf_core::scm::{posterior_sample_k, LawRecord, McmcConfig};
use lcf_core::training::{fit_lcf_quadratic, TrainingBatch};
use lcf_core::{ExogenousSample, ResponseConfig, StructuralModel};

fn simulate(c: &mut Criterion) {
    let fx = Fixture::new(Preset::LinearD10, 100, 10).unwrap();
    let u = ExogenousSample::new(vec![0.5; 10], Some(0.5));
    let cfg = ResponseConfig::new(fx.cfg.eta).unwrap();
    c.bench_function("simulate_pair linear d10", |b| {
        b.iter(|| simulate_pair(&fx.model, &fx.spec, black_box(&u), 0.0, 1.0, &cfg).unwrap())
    });
}

fn train(c: &mut Criterion) {
    let fx = Fixture::new(Preset::LinearD10, 600, 100).unwrap();
    c.bench_function("posterior batch + fit, n=600 m=100", |b| {
        b.iter(|| {
            let batch = TrainingBatch::from_config(&fx.data, &fx.model, &fx.cfg).unwrap();
            fit_lcf_quadratic(&batch, &fx.model, &fx.cfg).unwrap()
        })
    });
}

fn eval(c: &mut Criterion) {
    let fx = Fixture::new(Preset::LinearD10, 200, 100).unwrap();
    let opts = EvalOptions {
        m: 100,
        seed: 1,
        eta: fx.cfg.eta,
        mcmc: McmcConfig::default(),
    };
    c.bench_function("evaluate n=200 m=100", |b| {
        b.iter(|| evaluate("Ours", &fx.spec, &fx.model, &fx.data, &opts).unwrap())
    });
}

fn law_posterior(c: &mut Criterion) {
    let fx = Fixture::new(Preset::LawSemisynthetic, 50, 10).unwrap();
    let StructuralModel::Law(scm) = &fx.model else {
        unreachable!()
    };
    let r = &fx.data.records[0];
    let rec = LawRecord::from_features(&r.x, r.a).unwrap();
    let mcmc = McmcConfig::default();
    c.bench_function("law posterior 100 samples", |b| {
        b.iter(|| posterior_sample_k(scm, black_box(&rec), &mcmc, 3).unwrap())
    });
}

criterion_group!(benches, simulate, train, eval, law_posterior);
criterion_main!(benches);

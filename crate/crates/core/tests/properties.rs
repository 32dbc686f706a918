use lcf_core::data::{gen_synthetic, GenSpec, Preset};
use lcf_core::metrics::{afce, mse, uir, MetricAccumulator};
use lcf_core::predictor::{
    check_relaxed_conditions, compute_t, compute_t_split, finite_diff_grad, grad_wrt_u, predict,
};
use lcf_core::response::{closed_form_gap, simulate_pair, simulate_pair_path_dependent};
use lcf_core::scm::path_dependent_counterfactual;
use lcf_core::{
    ExogenousSample, LinearAdditiveScm, MultiplicativeBinaryScm, PathMask, PredictorInput,
    PredictorSpec, ResponseConfig, SimulationResult, StructuralModel,
};
use proptest::prelude::*;

fn nonzero(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi, any::<bool>()).prop_map(|(v, neg)| if neg { -v } else { v })
}

fn linear_scm() -> impl Strategy<Value = LinearAdditiveScm> {
    (1usize..=6).prop_flat_map(|d| {
        (
            prop::collection::vec(nonzero(0.1, 2.0), d),
            prop::collection::vec(-2.0..2.0f64, d),
            prop::collection::vec(-2.0..2.0f64, d),
            0.1..2.0f64,
            -2.0..2.0f64,
            0.5..3.0f64,
        )
            .prop_map(|(alpha, beta, w, gamma, a0, gap)| {
                LinearAdditiveScm::new(alpha, beta, w, gamma, vec![a0, a0 + gap]).unwrap()
            })
    })
}

fn sample_for(d: usize) -> impl Strategy<Value = ExogenousSample> {
    (prop::collection::vec(-3.0..3.0f64, d), -3.0..3.0f64)
        .prop_map(|(ux, uy)| ExogenousSample::new(ux, Some(uy)))
}

fn scm_and_sample() -> impl Strategy<Value = (LinearAdditiveScm, ExogenousSample)> {
    linear_scm().prop_flat_map(|m| {
        let d = m.d();
        (Just(m), sample_for(d))
    })
}

fn lcf(p1: f64, p2: f64, p3: f64, theta: Vec<f64>) -> PredictorSpec {
    PredictorSpec::LcfQuadratic { p1, p2, p3, theta }
}

fn within(actual: f64, expected: f64, scale: f64, tol: f64) -> bool {
    (actual - expected).abs() <= tol * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn abduction_round_trips_linear((m, u) in scm_and_sample()) {
        let a = m.attr_domain[1];
        let model = StructuralModel::Linear(m);
        let x = model.forward(&u, a, None).unwrap().x;
        let post = model.abduct(&x, a).unwrap();
        let ux = post.deterministic_ux().unwrap();
        for (got, want) in ux.iter().zip(&u.ux) {
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn abduction_round_trips_multiplicative(
        alpha in prop::collection::vec(nonzero(0.1, 2.0), 3),
        beta in prop::collection::vec(-1.0..1.0f64, 3),
        w in prop::collection::vec(-1.0..1.0f64, 3),
        a1 in 0.5..2.0f64,
        ratio in 1.1..3.0f64,
        ux in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let m = MultiplicativeBinaryScm::new(alpha, beta, w, 0.5, [a1, a1 * ratio]).unwrap();
        let model = StructuralModel::Multiplicative(m);
        let u = ExogenousSample::new(ux.clone(), Some(0.3));
        let a = a1 * ratio;
        let x = model.forward(&u, a, None).unwrap().x;
        let post = model.abduct(&x, a).unwrap();
        for (got, want) in post.deterministic_ux().unwrap().iter().zip(&ux) {
            prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn abduction_round_trips_scalar(u in 0.0..1.0f64, pick in 0usize..2) {
        let model = Preset::ScalarPower.model().unwrap();
        let a = model.attr_domain()[pick];
        let u = ExogenousSample::scalar(u);
        let x = model.forward(&u, a, None).unwrap().x;
        let post = model.abduct(&x, a).unwrap();
        let got = post.deterministic_ux().unwrap()[0];
        prop_assert!((got - u.ux[0]).abs() <= 1e-9);
    }

    #[test]
    fn counterfactual_at_the_factual_attribute_is_identity((m, u) in scm_and_sample()) {
        let a = m.attr_domain[0];
        let model = StructuralModel::Linear(m);
        let f = model.forward(&u, a, None).unwrap();
        let c = model.counterfactual(&u, a, None).unwrap();
        prop_assert_eq!(f, c);
    }

    #[test]
    fn path_dependent_masks_bracket_the_full_counterfactual((m, u) in scm_and_sample()) {
        let (a, b) = (m.attr_domain[0], m.attr_domain[1]);
        let d = m.d();
        let model = StructuralModel::Linear(m.clone());
        let x = model.forward(&u, a, None).unwrap().x;
        let all = path_dependent_counterfactual(&m, &x, a, b, &PathMask::all(d, true), &u).unwrap();
        let none = path_dependent_counterfactual(&m, &x, a, b, &PathMask::all(d, false), &u).unwrap();
        let full = model.counterfactual(&u, b, None).unwrap().y;
        let y = model.forward(&u, a, None).unwrap().y;
        prop_assert!(within(all, full, full.abs(), 1e-12));
        prop_assert!(within(none, y, y.abs(), 1e-12));
    }

    #[test]
    fn baseline_gradients_ignore_the_attribute(
        (m, u) in scm_and_sample(),
        c in -1.0..1.0f64,
    ) {
        let (a, b) = (m.attr_domain[0], m.attr_domain[1]);
        let phi: Vec<f64> = (0..=m.d()).map(|i| 0.1 * i as f64 - 0.2).collect();
        let model = StructuralModel::Linear(m);
        let spec = PredictorSpec::CfBaseline { phi, c };
        let ga = grad_wrt_u(&spec, &model, &u, 0.0, a, &[b]).unwrap();
        let gb = grad_wrt_u(&spec, &model, &u, 0.0, b, &[a]).unwrap();
        prop_assert_eq!(ga, gb);
    }

    #[test]
    fn predict_is_pure(
        p1 in 0.0..1.0f64,
        p2 in -1.0..1.0f64,
        yc in -5.0..5.0f64,
        u in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let spec = lcf(p1, p2, 0.1, vec![0.5, -0.5, 1.0]);
        let input = PredictorInput { y_check: Some(yc), u: Some(&u), x: None };
        let first = predict(&spec, &input).unwrap();
        let second = predict(&spec, &input).unwrap();
        prop_assert_eq!(first.to_bits(), second.to_bits());
    }

    #[test]
    fn quadratic_condition_matches_the_open_interval(m in linear_scm(), eta in 0.1..20.0f64, r in 0.001..2.0f64) {
        let model = StructuralModel::Linear(m);
        let t = compute_t(&model, eta).unwrap();
        let p1 = r * t;
        let report = check_relaxed_conditions(&lcf(p1, 0.0, 0.0, vec![]), &model, eta, None).unwrap();
        prop_assert_eq!(report.satisfied, p1 > 0.0 && p1 < t);
    }

    #[test]
    fn gap_follows_the_closed_form(
        (m, u) in scm_and_sample(),
        eta in 0.1..10.0f64,
        ratio in 0.0..1.0f64,
        p2 in -1.0..1.0f64,
    ) {
        let (a, b) = (m.attr_domain[0], m.attr_domain[1]);
        let d = m.d();
        let model = StructuralModel::Linear(m);
        let t = compute_t(&model, eta).unwrap();
        let p1 = (ratio * t).max(1e-3 * t);
        let theta: Vec<f64> = (0..=d).map(|i| 0.3 - 0.1 * i as f64).collect();
        let spec = lcf(p1, p2, 0.2, theta);
        let cfg = ResponseConfig::new(eta).unwrap();
        let r = simulate_pair(&model, &spec, &u, a, b, &cfg).unwrap();
        let expected = closed_form_gap(p1, t, r.y, r.y_check);
        prop_assert!(within(r.gap_after(), expected, r.gap_before(), 1e-9));
        if r.gap_before() > 1e-9 {
            prop_assert!(r.gap_after() < r.gap_before());
        }
    }

    #[test]
    fn half_t_removes_the_gap((m, u) in scm_and_sample(), eta in 0.1..10.0f64) {
        let (a, b) = (m.attr_domain[0], m.attr_domain[1]);
        let theta = vec![0.1; m.d() + 1];
        let model = StructuralModel::Linear(m);
        let t = compute_t(&model, eta).unwrap();
        let r = simulate_pair(&model, &lcf(t / 2.0, 0.4, 0.0, theta), &u, a, b, &ResponseConfig::new(eta).unwrap()).unwrap();
        prop_assert!(r.gap_after() <= 1e-9 * r.gap_before().max(1.0));
    }

    #[test]
    fn path_dependent_half_split_t_removes_the_gap(
        (m, u) in scm_and_sample(),
        bits in prop::collection::vec(any::<bool>(), 6),
        eta in 0.1..10.0f64,
    ) {
        let (a, b) = (m.attr_domain[0], m.attr_domain[1]);
        let mask = PathMask { unfair: bits[..m.d()].to_vec() };
        let t = compute_t_split(&m, &mask, eta).unwrap();
        let spec = lcf(t / 2.0, -0.3, 0.1, vec![-0.2; m.d() + 1]);
        let r = simulate_pair_path_dependent(&m, &spec, &u, a, b, &mask, &ResponseConfig::new(eta).unwrap()).unwrap();
        prop_assert!(r.gap_after() <= 1e-9 * r.gap_before().max(1.0));
    }

    #[test]
    fn analytic_gradient_matches_finite_differences(
        (m, u) in scm_and_sample(),
        p1 in 0.01..1.0f64,
        p2 in -1.0..1.0f64,
    ) {
        let (a, b) = (m.attr_domain[0], m.attr_domain[1]);
        let d = m.d();
        let model = StructuralModel::Linear(m);
        let theta: Vec<f64> = (0..=d).map(|i| 0.2 * i as f64 - 0.3).collect();
        let spec = lcf(p1, p2, 0.0, theta);
        let y_check = model.forward(&u, b, None).unwrap().y;
        let g = grad_wrt_u(&spec, &model, &u, y_check, a, &[b]).unwrap();
        let fd = finite_diff_grad(&spec, &model, &u, a, &[b]).unwrap();
        let scale = g.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        for (x, y) in g.iter().zip(&fd) {
            prop_assert!((x - y).abs() <= 1e-5 * scale);
        }
    }

    #[test]
    fn uir_is_scale_invariant(
        gaps in prop::collection::vec((0.1..5.0f64, 0.0..1.0f64), 1..30),
        k in 0.01..100.0f64,
    ) {
        let pairs = |s: f64| -> Vec<SimulationResult> {
            gaps.iter()
                .map(|(g, f)| SimulationResult {
                    y: s * g,
                    y_check: 0.0,
                    y_prime: s * g * f,
                    y_check_prime: 0.0,
                    grad_factual: vec![],
                    grad_counterfactual: vec![],
                })
                .collect()
        };
        let base = uir(&pairs(1.0)).unwrap().unwrap();
        let scaled = uir(&pairs(k)).unwrap().unwrap();
        prop_assert!((base - scaled).abs() <= 1e-9 * base.abs().max(1.0));
        let (a1, a2) = (afce(&pairs(1.0)).unwrap(), afce(&pairs(k)).unwrap());
        prop_assert!((a2 - k * a1).abs() <= 1e-9 * a2.abs().max(1.0));
    }

    #[test]
    fn streaming_mse_equals_one_pass(
        pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..200),
        cut in 0usize..200,
    ) {
        let cut = cut.min(pairs.len());
        let mut left = MetricAccumulator::default();
        let mut right = MetricAccumulator::default();
        for (i, (p, y)) in pairs.iter().enumerate() {
            if i < cut { left.add_prediction(*p, *y) } else { right.add_prediction(*p, *y) }
        }
        left.merge(&right);
        let streamed = left.mse().unwrap();
        let direct = mse(&pairs).unwrap();
        prop_assert!((streamed - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn generation_is_a_function_of_the_seed(seed in any::<u64>(), n in 1usize..50) {
        let spec = GenSpec::preset(Preset::LinearD10, n, seed);
        prop_assert_eq!(gen_synthetic(&spec).unwrap(), gen_synthetic(&spec).unwrap());
    }
}

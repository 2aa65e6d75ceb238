use fex_sde::eval::*;
use fex_sde::expr::{ExpressionInstance, Operator, OperatorSequence, TreeTemplate};
use fex_sde::noise::{train_decoder, DecoderConfig, DecoderModel, LabeledPairs, PairMeta};
use fex_sde::rng::stream;
use fex_sde::sde::benchmark;

fn expr(ops: [&str; 4], params: Vec<f64>) -> ExpressionInstance {
    let t = TreeTemplate::new(3).unwrap();
    let ops: Vec<Operator> = ops.iter().map(|s| s.parse().unwrap()).collect();
    let seq = OperatorSequence::new(&t, ops).unwrap();
    ExpressionInstance::new(t, seq, params, 1).unwrap()
}

/// `a x + b`
fn affine(a: f64, b: f64) -> ExpressionInstance {
    expr(
        ["Id", "zero", "Id", "add"],
        vec![1., 1., 0., 1., 1., 0., 1., 1., 0., a, b],
    )
}

/// Decoder fit to `y = scale * z`.
fn linear_decoder(scale: f64) -> DecoderModel {
    let n = 2000;
    let mut rng = stream(11, 0);
    let inputs: Vec<f64> = (0..n)
        .map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
        .collect();
    let targets = inputs.iter().map(|z| scale * z).collect();
    let pairs = LabeledPairs {
        dim: 1,
        inputs,
        targets,
        meta: PairMeta {
            n,
            d: 1,
            steps: 0,
            delta: 0.0,
            seed: 11,
            minibatch: 0,
            tail_steps: 0,
        },
    };
    train_decoder(&pairs, &DecoderConfig::default()).unwrap()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = fex_sde::stats::mean(v, 1)[0];
    (m, fex_sde::stats::std(v, 1)[0])
}

#[test]
fn deterministic_zero_model_leaves_the_state_unchanged() {
    let model = LearnedSde::new(vec![affine(0.0, 0.0)], None, 0.01).unwrap();
    let mut rng = stream(0, 0);
    assert_eq!(predict_step(&model, &[0.7], &mut rng).unwrap(), vec![0.7]);
    let eff = effective_diffusion(&model, &[0.7], 100, 1).unwrap();
    assert!(eff[0] < 1e-12);
}

#[test]
fn drift_term_is_scaled_by_the_time_step() {
    let model = LearnedSde::new(vec![affine(0.0, 3.0)], None, 0.01).unwrap();
    let mut rng = stream(0, 0);
    let y = predict_step(&model, &[1.0], &mut rng).unwrap();
    assert!((y[0] - 1.03).abs() < 1e-12);
    assert!(predict_step(&model, &[f64::NAN], &mut rng).is_err());
}

#[test]
fn ou_model_statistics() {
    let model = LearnedSde::new(vec![affine(-1.0, 1.2)], Some(linear_decoder(0.03)), 0.01).unwrap();

    // stationary point: one-step mean from the fixed point of the drift
    let samples = one_step_samples(&model, &[1.2], 100_000, 4).unwrap();
    let (m, s) = mean_sd(&samples);
    assert!((m - 1.2).abs() < 3.0 * s / (1e5f64).sqrt(), "mean {m}");

    let eff = effective_coefficients(&model, &[0.0], 100_000, 5).unwrap();
    assert!(
        (eff.drift[0] - 1.2).abs() < 3.0 * eff.drift_se[0] + 0.02,
        "{:?}",
        eff
    );
    assert!((eff.diffusion[0] - 0.3).abs() < 0.02 * 0.3, "{:?}", eff);

    // exact OU mean 1.2 + (x0 - 1.2) e^{-t}
    let n = 10_000;
    let stats = rollout(&model, &[1.5], 100, n, 6).unwrap();
    assert_eq!(stats.len(), 101);
    for s in [10, 50, 100] {
        let t = s as f64 * 0.01;
        let exact = 1.2 + 0.3 * (-t as f64).exp();
        let se = stats.std_at(s)[0] / (n as f64).sqrt();
        assert!(
            (stats.mean_at(s)[0] - exact).abs() < 3.0 * se + 1e-3,
            "t = {t}"
        );
    }
    assert_eq!(stats, rollout(&model, &[1.5], 100, n, 6).unwrap());
}

#[test]
fn single_realization_has_zero_spread() {
    let model = LearnedSde::new(vec![affine(-1.0, 1.2)], Some(linear_decoder(0.03)), 0.01).unwrap();
    let stats = rollout(&model, &[1.5], 5, 1, 0).unwrap();
    assert!(stats.std.iter().all(|s| *s == 0.0));
}

#[test]
fn double_well_ensemble_splits_into_two_wells() {
    // x - x^3 with noise 0.5 sqrt(dt)
    let drift = expr(
        ["cube", "Id", "Id", "add"],
        vec![-1., 1., 0., 1., 1., 0., 1., 1., 0., 1., 0.],
    );
    let model = LearnedSde::new(vec![drift], Some(linear_decoder(0.05)), 0.01).unwrap();
    let ends = rollout_endpoints(&model, &[1.5], 3000, 2000, 9).unwrap();
    let left = ends.iter().filter(|x| **x < 0.0).count();
    assert!(left > 200 && left < 1800, "{left} of 2000 in the left well");
    let grid = linspace(-2.5, 2.5, 201);
    let dens = conditional_density(&ends, &grid, None).unwrap();
    let at = |x: f64| dens.values[((x + 2.5) / 0.025).round() as usize];
    assert!(at(-1.0) > at(0.0) && at(1.0) > at(0.0));
}

#[test]
fn kernel_density_of_normal_samples() {
    let mut rng = stream(2, 0);
    let samples: Vec<f64> = (0..100_000)
        .map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng))
        .collect();
    let grid = linspace(-5.0, 5.0, 401);
    let d = conditional_density(&samples, &grid, None).unwrap();
    assert!((d.integral() - 1.0).abs() < 1e-6);
    let worst = grid
        .iter()
        .zip(&d.values)
        .map(|(x, p)| (p - (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.02, "{worst}");
}

#[test]
fn kernel_density_edge_cases() {
    let two: Vec<f64> = (0..200)
        .map(|i| if i % 2 == 0 { -1.0 } else { 1.0 })
        .collect();
    let grid = linspace(-3.0, 3.0, 121);
    let d = conditional_density(&two, &grid, None).unwrap();
    for i in 0..grid.len() {
        assert!((d.values[i] - d.values[grid.len() - 1 - i]).abs() < 1e-9);
    }
    assert!(d.values[40] > d.values[60]);

    let flat = vec![0.5; 150];
    let d = conditional_density(&flat, &grid, None).unwrap();
    assert!((d.integral() - 1.0).abs() < 1e-6);
    assert!(d.values.iter().all(|v| *v >= 0.0));
    assert!(conditional_density(&flat[..50], &grid, None).is_err());
}

#[test]
fn exponential_noise_one_step_density_is_right_skewed() {
    let b = benchmark("exp_noise").unwrap();
    let traj = fex_sde::sde::euler_maruyama(
        &b.spec,
        &fex_sde::sde::InitialCondition::Fixed(vec![1.0]),
        0.01,
        1,
        20_000,
        3,
    )
    .unwrap();
    let ends: Vec<f64> = (0..traj.n_traj()).map(|j| traj.state(j, 1)[0]).collect();
    let d = conditional_density(&ends, &linspace(0.9, 1.1, 401), None).unwrap();
    let peak = d.grid[d
        .values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0];
    let mean = ends.iter().sum::<f64>() / ends.len() as f64;
    assert!(peak < mean, "mode {peak} mean {mean}");
    assert!(fex_sde::stats::skewness(&ends, 1)[0] > 1.0);
}

#[test]
fn function_comparisons() {
    let grid = linspace(-6.0, 6.0, 121);
    let same = compare_functions(|x| x.sin(), |x| x.sin(), &grid, (0.0, 2.5)).unwrap();
    assert_eq!(same.max_error, 0.0);
    assert_eq!(same.l2_error, 0.0);
    assert_eq!(
        same.rows.iter().filter(|r| r.in_training_domain).count(),
        26
    );

    let table = compare_functions(|x| 1.1989 - 0.9953 * x, |x| 1.2 - x, &grid, (0.0, 2.5)).unwrap();
    assert!(table.max_error < 0.1);
    assert!((table.max_error - (0.0011 + 0.0047 * 6.0)).abs() < 1e-9);

    let one = compare_functions(|x| x, |_| 0.0, &[2.0], (0.0, 1.0)).unwrap();
    assert_eq!(one.rows.len(), 1);
    let mut csv = Vec::new();
    one.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2);
    assert!(compare_functions(|x| x, |x| x, &[], (0.0, 1.0)).is_err());
}

#[test]
fn drift_checks_read_coefficients() {
    assert!(
        drift_check("ou", &[affine(-0.9953, 1.1989)])
            .unwrap()
            .passed
    );
    assert!(!drift_check("ou", &[affine(-0.9, 1.2)]).unwrap().passed);
    let quad = expr(
        ["square", "Id", "Id", "add"],
        vec![0.2, 1., 0., 1., 1., 0., 1., 1., 0., -1., 1.2],
    );
    assert!(!drift_check("ou", &[quad]).unwrap().passed);

    let dw = expr(
        ["cube", "Id", "Id", "add"],
        vec![-0.9922, 1., 0., 0.9709, 1., 0., 1., 1., 0., 1., 0.],
    );
    assert!(drift_check("double_well", &[dw]).unwrap().passed);

    // 0.98 cos(6.2476 x - 4.6837), written through the template
    let wave = expr(
        ["Id", "zero", "cos", "add"],
        vec![1., 6.2476, -4.6837, 1., 1., 0., 0.98, 1., 0., 1., 0.],
    );
    assert_eq!(
        dominant_wave(&wave.symbolic()).map(|(f, _)| (f * 1e4).round()),
        Some(62476.0)
    );
    assert!(drift_check("trig", &[wave]).unwrap().passed);

    assert!(
        drift_check("exp_noise", &[affine(-1.975, 0.0)])
            .unwrap()
            .passed
    );
    assert!(drift_check("nonexistent", &[affine(1.0, 0.0)]).is_none());
}

#[test]
fn coefficient_error_bound_at_the_published_ou_fit() {
    let errors = coefficient_errors("ou", &affine(-0.9953, 1.1989)).unwrap();
    let b = coefficient_bound(&errors, 6.0);
    assert!((b - (0.0047 * 6.0 + 0.0011)).abs() < 1e-9, "{b}");
    let dw = expr(
        ["cube", "Id", "Id", "add"],
        vec![-0.9922, 1., 0., 0.9709, 1., 0., 1., 1., 0., 1., 0.0019],
    );
    let errors = coefficient_errors("double_well", &dw).unwrap();
    let want = 0.0078 * 125.0 + 0.0291 * 5.0 + 0.0019;
    assert!((coefficient_bound(&errors, -5.0) - want).abs() < 1e-9);
    assert!(coefficient_errors("trig", &affine(1.0, 0.0)).is_none());
}

#[test]
fn reference_rollout_matches_the_exact_ou_mean() {
    let b = benchmark("ou").unwrap();
    let stats = reference_rollout(&b.spec, &[1.5], 0.01, 100, 4000, 1).unwrap();
    let exact = 1.2 + 0.3 * (-1.0f64).exp();
    let se = stats.std_at(100)[0] / (4000f64).sqrt();
    assert!((stats.mean_at(100)[0] - exact).abs() < 3.0 * se);
}

#[test]
fn svg_plot_contains_each_series() {
    let s = Series {
        label: "a<b".into(),
        x: vec![0.0, 1.0],
        y: vec![1.0, 2.0],
    };
    let svg = line_plot("t", &[s.clone(), s]);
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("a&lt;b"));
}

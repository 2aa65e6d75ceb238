use std::sync::Arc;

use fex_sde::sde::{
    benchmark, drift_targets, euler_maruyama, forcing_center, make_pairs, InitialCondition,
    NoiseKind, SdeSpec,
};

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

#[test]
fn ou_ensemble_matches_exact_transition_law() {
    let b = benchmark("ou").unwrap();
    let traj = euler_maruyama(
        &b.spec,
        &InitialCondition::Fixed(vec![1.5]),
        0.01,
        100,
        15_000,
        3,
    )
    .unwrap();
    let finals: Vec<f64> = (0..traj.n_traj()).map(|j| traj.state(j, 100)[0]).collect();
    let (m, s) = mean_std(&finals);
    let se = s / (finals.len() as f64).sqrt();
    let exact_mean = 1.2 + 0.3 * (-1f64).exp();
    assert!(
        (m - exact_mean).abs() < 3.0 * se,
        "mean {m} vs {exact_mean}, se {se}"
    );

    let exact_var = 0.09 * (1.0 - (-2f64).exp()) / 2.0;
    // Standard error of the sample variance for a Gaussian: var * sqrt(2 / (n - 1)).
    let var_se = exact_var * (2.0 / (finals.len() as f64 - 1.0)).sqrt();
    assert!(
        (s * s - exact_var).abs() < 4.0 * var_se,
        "var {} vs {exact_var}",
        s * s
    );
}

#[test]
fn noiseless_double_well_settles_at_plus_one() {
    let spec = SdeSpec::with_diagonal_noise(
        Arc::new(|x, out| out[0] = x[0] - x[0].powi(3)),
        vec![0.0],
        NoiseKind::Gaussian,
    )
    .unwrap();
    let traj =
        euler_maruyama(&spec, &InitialCondition::Fixed(vec![0.5]), 0.01, 2000, 1, 0).unwrap();
    let path: Vec<f64> = (0..=2000).map(|s| traj.state(0, s)[0]).collect();
    assert!(path.windows(2).all(|w| w[1] >= w[0]));
    assert!((path[2000] - 1.0).abs() < 1e-6);
}

#[test]
fn noiseless_ou_targets_equal_the_drift() {
    let spec = SdeSpec::with_diagonal_noise(
        Arc::new(|x, out| out[0] = 1.2 - x[0]),
        vec![0.0],
        NoiseKind::Gaussian,
    )
    .unwrap();
    let init = InitialCondition::Uniform {
        low: vec![0.0],
        high: vec![2.5],
    };
    let pairs = make_pairs(&euler_maruyama(&spec, &init, 0.01, 100, 20, 1).unwrap());
    let set = drift_targets(&pairs, 0, 0.0).unwrap();
    for j in 0..set.len() {
        assert!((set.targets[j] - (1.2 - set.inputs[j])).abs() < 1e-9);
    }
}

#[test]
fn ou_binned_targets_track_the_drift() {
    let b = benchmark("ou").unwrap();
    let pairs = make_pairs(&euler_maruyama(&b.spec, &b.init, 0.01, 100, 4000, 5).unwrap());
    assert_eq!(pairs.len(), 400_000);
    let set = drift_targets(&pairs, 0, 0.0).unwrap();
    let mut sums = [0.0; 10];
    let mut counts = [0usize; 10];
    for j in 0..set.len() {
        let x = set.inputs[j];
        if (0.0..2.5).contains(&x) {
            let k = (x / 0.25) as usize;
            sums[k] += set.targets[j] - (1.2 - x);
            counts[k] += 1;
        }
    }
    for k in 0..10 {
        if counts[k] > 2000 {
            // Per-target noise std is 0.3 / sqrt(0.01) = 3.
            let se = 3.0 / (counts[k] as f64).sqrt();
            assert!((sums[k] / counts[k] as f64).abs() < 4.0 * se, "bin {k}");
        }
    }
}

#[test]
fn exponential_centering_recovers_the_linear_drift_mean() {
    let b = benchmark("exp_noise").unwrap();
    let pairs = make_pairs(&euler_maruyama(&b.spec, &b.init, 0.01, 100, 2000, 9).unwrap());
    let raw = drift_targets(&pairs, 0, 0.0).unwrap();
    let residual: Vec<f64> = raw
        .targets
        .iter()
        .zip(&raw.inputs)
        .map(|(y, x)| y + 2.0 * x)
        .collect();
    let center = forcing_center(&residual, NoiseKind::Exponential);
    assert!((center - 1.0).abs() < 0.02, "center {center}");

    let centered = drift_targets(&pairs, 0, center).unwrap();
    let (ty, _) = mean_std(&centered.targets);
    let (tx, _) = mean_std(&centered.inputs);
    let se = 1.0 / (centered.len() as f64).sqrt();
    assert!(
        (ty + 2.0 * tx).abs() < 4.0 * se + 0.02,
        "{ty} vs {}",
        -2.0 * tx
    );
}

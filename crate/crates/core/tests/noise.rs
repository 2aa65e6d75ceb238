use fex_sde::noise::*;
use fex_sde::rng::stream;
use fex_sde::stats;
use rand_distr::{Distribution, Normal};

fn gaussian_residuals(n: usize, mean: f64, sd: f64, seed: u64) -> ResidualSet {
    let mut rng = stream(seed, 0);
    let law = Normal::new(mean, sd).unwrap();
    ResidualSet::new(1, (0..n).map(|_| law.sample(&mut rng)).collect()).unwrap()
}

/// Score of `N(alpha m, alpha^2 s^2 + tau)`.
fn analytic_score(z: f64, tau: f64, m: f64, s: f64) -> f64 {
    let a = 1.0 - tau;
    -(z - a * m) / (a * a * s * s + tau)
}

#[test]
fn monte_carlo_score_matches_the_convolved_gaussian() {
    let (m, s) = (0.5, 0.2);
    let res = gaussian_residuals(10_000, m, s, 1);
    let schedule = DiffusionSchedule::for_steps(2000).unwrap();
    for tau in [0.05, 0.3, 0.7, 0.95] {
        let a = 1.0 - tau;
        let sd = (a * a * s * s + tau).sqrt();
        let (mut err, mut norm) = (0.0, 0.0);
        for i in 0..41 {
            let z = a * m + sd * (-2.0 + 0.1 * i as f64);
            let v = mc_score(&[z], tau, &res.samples, &schedule).unwrap()[0];
            let exact = analytic_score(z, tau, m, s);
            err += (v - exact).powi(2);
            norm += exact * exact;
        }
        let rel = (err / norm).sqrt();
        assert!(rel < 0.02, "tau {tau}: relative rms {rel}");
    }
}

#[test]
fn pushforward_reproduces_gaussian_residuals() {
    let res = gaussian_residuals(20_000, 0.5, 0.2, 2);
    let cfg = PairConfig {
        n_pairs: 1000,
        steps: 500,
        seed: 3,
        ..PairConfig::default()
    };
    let pairs = build_pairs(&res, &cfg).unwrap();
    let m = stats::mean(&pairs.targets, 1)[0];
    let s = stats::std(&pairs.targets, 1)[0];
    // 1000 samples: standard errors about 0.0063 for the mean and 2.2% for the std
    assert!((m - 0.5).abs() < 0.02, "mean {m}");
    assert!((s / 0.2 - 1.0).abs() < 0.07, "std {s}");
    // each solve uses its own minibatch, so the map is monotone only on average
    let mz = stats::mean(&pairs.inputs, 1)[0];
    let cov: f64 = pairs
        .inputs
        .iter()
        .zip(&pairs.targets)
        .map(|(z, y)| (z - mz) * (y - m))
        .sum::<f64>()
        / (pairs.len() - 1) as f64;
    let corr = cov / (s * stats::std(&pairs.inputs, 1)[0]);
    assert!(corr > 0.95, "correlation {corr}");
}

#[test]
fn pushforward_keeps_exponential_skew() {
    let mut rng = stream(5, 0);
    let law = rand_distr::Exp1;
    let samples: Vec<f64> = (0..20_000)
        .map(|_| 0.01 * Distribution::<f64>::sample(&law, &mut rng))
        .collect();
    let res = ResidualSet::new(1, samples).unwrap();
    let cfg = PairConfig {
        n_pairs: 1000,
        steps: 1000,
        seed: 6,
        ..PairConfig::default()
    };
    let pairs = build_pairs(&res, &cfg).unwrap();
    let skew = stats::skewness(&pairs.targets, 1)[0];
    let s = stats::std(&pairs.targets, 1)[0];
    assert!(skew > 1.2 && skew < 2.8, "skew {skew}");
    assert!((s / 0.01 - 1.0).abs() < 0.15, "std {s}");
}

#[test]
fn decoder_learns_the_pair_map_and_round_trips() {
    let res = gaussian_residuals(5000, 0.0, 0.03, 8);
    let cfg = PairConfig {
        n_pairs: 500,
        steps: 500,
        seed: 9,
        ..PairConfig::default()
    };
    let pairs = build_pairs(&res, &cfg).unwrap();
    let model = train_decoder(&pairs, &DecoderConfig::default()).unwrap();
    let out = sample_noise(&model, 50_000, 1).unwrap();
    let s = stats::std(&out, 1)[0];
    assert!(stats::mean(&out, 1)[0].abs() < 0.005);
    assert!((s / 0.03 - 1.0).abs() < 0.1, "std {s}");

    let back = DecoderModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(
        back.decode(&[0.3], 1).unwrap(),
        model.decode(&[0.3], 1).unwrap()
    );

    let mut bin = Vec::new();
    pairs.write_binary(&mut bin).unwrap();
    let reread = LabeledPairs::read(bin.as_slice(), &pairs.sidecar_json().unwrap()).unwrap();
    assert_eq!(reread, pairs);
}

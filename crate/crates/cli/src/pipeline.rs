use std::path::Path;
use std::time::Instant;

use fex_sde::eval::{
    coefficient_bound, coefficient_errors, compare_functions, conditional_density, drift_check,
    effective_coefficients, line_plot, linspace, noise_checks, rollout, rollout_endpoints,
    sweep_check, trajectory_stats, Check, EnsembleStats, LearnedSde, Series,
};
use fex_sde::expr::ExpressionInstance;
use fex_sde::noise::{build_pairs, residuals, sample_noise, train_decoder, DecoderModel};
use fex_sde::sde::io::{
    pairs_from_bytes, pairs_to_bytes, trajectories_to_bytes, write_pairs_csv,
    write_trajectories_csv,
};
use fex_sde::sde::{euler_maruyama, make_pairs, simulate, InitialCondition};
use fex_sde::search::{fit_drift, write_search_log};
use serde::Serialize;

use crate::config::{
    RunConfig, System, SEED_DATA, SEED_DECODER, SEED_EVAL, SEED_PAIRS, SEED_SEARCH,
};
use crate::error::CliError;
use crate::manifest::{read_artifact, Manifest, StageRecord, StageWriter};

const RUN_GENERATE: &str = "run `fex-sde generate` with the same config first";
const RUN_FIT: &str = "run `fex-sde fit` with the same config first";

fn record(
    manifest: &mut Manifest,
    dir: &Path,
    stage: &str,
    hash: String,
    w: StageWriter,
    start: Instant,
) -> Result<(), CliError> {
    manifest.stages.insert(
        stage.into(),
        StageRecord {
            hash,
            files: w.files,
            seconds: start.elapsed().as_secs_f64(),
        },
    );
    manifest.save(dir)
}

fn open_manifest(cfg: &RunConfig, dir: &Path) -> Result<Manifest, CliError> {
    let mut m = Manifest::load(dir)?;
    m.config_hash = cfg.config_hash();
    m.config_file = "config.toml".into();
    m.seeds = [
        ("data", SEED_DATA),
        ("search", SEED_SEARCH),
        ("pairs", SEED_PAIRS),
        ("decoder", SEED_DECODER),
        ("eval", SEED_EVAL),
    ]
    .into_iter()
    .map(|(k, s)| (k.to_string(), cfg.stage_seed(s)))
    .collect();
    Ok(m)
}

pub fn write_config(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    crate::manifest::write_atomic(&dir.join("config.toml"), cfg.to_toml()?.as_bytes())
}

pub fn generate(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let sys = cfg.system()?;
    let d = &cfg.data;
    log::info!("simulating {} trajectories of {}", d.n_traj, sys.name);
    let traj = euler_maruyama(
        &sys.spec,
        &sys.init,
        d.dt,
        d.n_steps,
        d.n_traj,
        cfg.stage_seed(SEED_DATA),
    )?;
    let pairs = make_pairs(&traj);
    let mut manifest = open_manifest(cfg, dir)?;
    let mut w = StageWriter::new(dir);
    w.write("data/trajectories.bin", &trajectories_to_bytes(&traj))?;
    w.write("data/pairs.bin", &pairs_to_bytes(&pairs))?;
    if d.write_csv {
        w.write_with("data/trajectories.csv", |b| {
            write_trajectories_csv(&traj, b)
        })?;
        w.write_with("data/pairs.csv", |b| write_pairs_csv(&pairs, b))?;
    }
    record(&mut manifest, dir, "generate", cfg.data_hash(), w, start)
}

pub fn fit(cfg: &RunConfig, dir: &Path, drift_only: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let sys = cfg.system()?;
    let mut manifest = open_manifest(cfg, dir)?;
    manifest.require(dir, "generate", &cfg.data_hash(), RUN_GENERATE)?;
    let pairs = pairs_from_bytes(&read_artifact(dir, "data/pairs.bin", RUN_GENERATE)?)?;

    let mut search = cfg.search.clone();
    search.seed = cfg.stage_seed(SEED_SEARCH);
    log::info!(
        "searching drift for {} coordinates over {} pairs",
        pairs.dim,
        pairs.len()
    );
    let fitted = fit_drift(&pairs, sys.spec.noise(), &search)?;
    let exprs = fitted.expressions();
    let mut w = StageWriter::new(dir);
    for (k, (e, outcome)) in exprs.iter().zip(&fitted.outcomes).enumerate() {
        log::info!("x{}: {}", k + 1, e.pretty_print(4));
        w.write(
            &format!("fit/drift_x{}.json", k + 1),
            e.to_json()?.as_bytes(),
        )?;
        w.write_with(&format!("fit/search_log_x{}.csv", k + 1), |b| {
            write_search_log(&outcome.log, b)
        })?;
    }

    if !drift_only {
        let res = residuals(&pairs, &exprs)?;
        let mut pc = cfg.noise.pairs.clone();
        pc.seed = cfg.stage_seed(SEED_PAIRS);
        log::info!("building {} noise pairs", pc.n_pairs);
        let labeled = build_pairs(&res, &pc)?;
        let mut bin = Vec::new();
        labeled.write_binary(&mut bin)?;
        w.write("fit/noise_pairs.bin", &bin)?;
        w.write("fit/noise_pairs.json", labeled.sidecar_json()?.as_bytes())?;
        let mut dc = cfg.noise.decoder.clone();
        dc.seed = cfg.stage_seed(SEED_DECODER);
        let model = train_decoder(&labeled, &dc)?;
        w.write("fit/decoder.json", model.to_json()?.as_bytes())?;
    }
    record(
        &mut manifest,
        dir,
        "fit",
        cfg.fit_hash(drift_only),
        w,
        start,
    )
}

/// Reads the fitted drift and, when present, the decoder.
pub fn load_fit(
    cfg: &RunConfig,
    dir: &Path,
) -> Result<(Vec<ExpressionInstance>, Option<DecoderModel>, String), CliError> {
    let manifest = Manifest::load(dir)?;
    let full = cfg.fit_hash(false);
    let drift_only = cfg.fit_hash(true);
    let hash = match manifest.stages.get("fit") {
        Some(rec) if rec.hash == drift_only => drift_only,
        _ => full,
    };
    manifest.require(dir, "fit", &hash, RUN_FIT)?;
    let dim = cfg.system()?.dim();
    let exprs = (1..=dim)
        .map(|k| {
            let bytes = read_artifact(dir, &format!("fit/drift_x{k}.json"), RUN_FIT)?;
            Ok(ExpressionInstance::from_json(&String::from_utf8_lossy(
                &bytes,
            ))?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let decoder = if hash == cfg.fit_hash(false) {
        let bytes = read_artifact(dir, "fit/decoder.json", RUN_FIT)?;
        Some(DecoderModel::from_json(&String::from_utf8_lossy(&bytes))?)
    } else {
        None
    };
    Ok((exprs, decoder, hash))
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub system: String,
    pub drift_only: bool,
    pub expressions: Vec<String>,
    pub reference_fit: Vec<String>,
    pub checks: Vec<Check>,
    pub drift_errors: Vec<SweepSummary>,
    pub rollouts: Vec<RolloutSummary>,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub coordinate: usize,
    pub l2_error: f64,
    pub max_error: f64,
    pub max_error_in_training_domain: f64,
}

#[derive(Debug, Serialize)]
pub struct RolloutSummary {
    pub x0: Vec<f64>,
    pub final_mean: Vec<f64>,
    pub final_std: Vec<f64>,
    pub reference_mean: Vec<f64>,
    pub reference_std: Vec<f64>,
}

fn tag(x: &[f64]) -> String {
    x.iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join("_")
}

fn band_series(label: &str, stats: &EnsembleStats, k: usize) -> Vec<Series> {
    let t = stats.times();
    let pick = |sign: f64| {
        (0..stats.len())
            .map(|s| stats.mean_at(s)[k] + sign * stats.std_at(s)[k])
            .collect()
    };
    vec![
        Series {
            label: format!("{label} mean"),
            x: t.clone(),
            y: pick(0.0),
        },
        Series {
            label: format!("{label} mean+std"),
            x: t.clone(),
            y: pick(1.0),
        },
        Series {
            label: format!("{label} mean-std"),
            x: t,
            y: pick(-1.0),
        },
    ]
}

/// Mean of the true one-step increment per unit time at `x`.
fn true_effective_drift(sys: &System, dt: f64, x: &[f64]) -> Vec<f64> {
    let mu = sys.spec.drift(x);
    let shift = sys.spec.noise().mean() / dt.sqrt();
    mu.iter()
        .zip(&sys.noise_scale)
        .map(|(m, s)| m + s * shift)
        .collect()
}

pub fn evaluate(cfg: &RunConfig, dir: &Path) -> Result<Summary, CliError> {
    let start = Instant::now();
    let sys = cfg.system()?;
    let (exprs, decoder, fit_hash) = load_fit(cfg, dir)?;
    let drift_only = decoder.is_none();
    let dt = cfg.data.dt;
    let model = LearnedSde::new(exprs.clone(), decoder.clone(), dt)?;
    let e = &cfg.eval;
    let seed = cfg.stage_seed(SEED_EVAL);
    let name = cfg.name();
    let dim = sys.dim();
    let mut manifest = open_manifest(cfg, dir)?;
    let mut w = StageWriter::new(dir);
    let mut checks: Vec<Check> = Vec::new();
    if let Some(c) = drift_check(&name, &exprs) {
        checks.push(c);
    }

    // rollouts against the true system
    let horizon = e.horizon;
    let steps = ((horizon / dt).round() as usize).max(1);
    let mut rollouts = Vec::new();
    for (i, x0) in e.x0.iter().enumerate() {
        log::info!("rollout from {x0:?}");
        let s = seed.wrapping_add(100 * i as u64);
        let learned = rollout(&model, x0, steps, e.ensemble, s)?;
        let truth = simulate(
            &sys.spec,
            &InitialCondition::Fixed(x0.clone()),
            dt,
            steps,
            e.ensemble,
            s + 1,
            10,
        )?;
        let reference = trajectory_stats(&truth);
        let t = tag(x0);
        w.write_with(&format!("eval/{name}_rollout_{t}.csv"), |b| {
            learned.write_csv(b)
        })?;
        w.write_with(&format!("eval/{name}_reference_{t}.csv"), |b| {
            reference.write_csv(b)
        })?;
        let last = steps;
        rollouts.push(RolloutSummary {
            x0: x0.clone(),
            final_mean: learned.mean_at(last).to_vec(),
            final_std: learned.std_at(last).to_vec(),
            reference_mean: reference.mean_at(last).to_vec(),
            reference_std: reference.std_at(last).to_vec(),
        });

        let ends = rollout_endpoints(&model, x0, steps, e.density_samples, s + 2)?;
        let n_ref = truth.n_traj().min(e.density_samples);
        let mut density_csv = String::from("coordinate,x,learned,truth\n");
        for k in 0..dim {
            let ls: Vec<f64> = ends.iter().skip(k).step_by(dim).copied().collect();
            let ts: Vec<f64> = (0..n_ref).map(|j| truth.state(j, steps)[k]).collect();
            let (lo, hi) = ls
                .iter()
                .chain(&ts)
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            let pad = 0.05 * (hi - lo) + 1e-6 * (1.0 + lo.abs().max(hi.abs()));
            let grid = linspace(lo - pad, hi + pad, e.density_points);
            let dl = conditional_density(&ls, &grid, None)?;
            let dtr = conditional_density(&ts, &grid, None)?;
            for (j, x) in grid.iter().enumerate() {
                density_csv.push_str(&format!(
                    "{},{x},{},{}\n",
                    k + 1,
                    dl.values[j],
                    dtr.values[j]
                ));
            }
            if e.svg {
                let svg = line_plot(
                    &format!("{name}: density of x{} at t = {horizon} from {x0:?}", k + 1),
                    &[
                        Series {
                            label: "learned".into(),
                            x: grid.clone(),
                            y: dl.values.clone(),
                        },
                        Series {
                            label: "truth".into(),
                            x: grid.clone(),
                            y: dtr.values.clone(),
                        },
                    ],
                );
                w.write(
                    &format!("eval/{name}_density_x{}_{t}.svg", k + 1),
                    svg.as_bytes(),
                )?;
            }
        }
        w.write(
            &format!("eval/{name}_density_{t}.csv"),
            density_csv.as_bytes(),
        )?;
        if e.svg {
            for k in 0..dim {
                let mut series = band_series("learned", &learned, k);
                series.extend(band_series("truth", &reference, k));
                let svg = line_plot(&format!("{name}: x{} from {x0:?}", k + 1), &series);
                w.write(
                    &format!("eval/{name}_rollout_x{}_{t}.svg", k + 1),
                    svg.as_bytes(),
                )?;
            }
        }
    }

    // drift and diffusion sweeps, one coordinate at a time with the others at zero
    let grid = linspace(sys.sweep_domain.0, sys.sweep_domain.1, e.sweep_points);
    let point = |k: usize, v: f64| {
        let mut x = vec![0.0; dim];
        x[k] = v;
        x
    };
    let mut drift_errors = Vec::new();
    for k in 0..dim {
        let cmp = compare_functions(
            |v| exprs[k].value(&point(k, v)),
            |v| sys.spec.drift(&point(k, v))[k],
            &grid,
            sys.training_domain[k],
        )?;
        w.write_with(&format!("eval/{name}_drift_x{}.csv", k + 1), |b| {
            cmp.write_csv(b)
        })?;
        drift_errors.push(SweepSummary {
            coordinate: k + 1,
            l2_error: cmp.l2_error,
            max_error: cmp.max_error,
            max_error_in_training_domain: cmp
                .rows
                .iter()
                .filter(|r| r.in_training_domain)
                .map(|r| r.error())
                .fold(0.0, f64::max),
        });
        if e.svg {
            let svg = line_plot(
                &format!("{name}: drift of x{}", k + 1),
                &[
                    Series {
                        label: "learned".into(),
                        x: grid.clone(),
                        y: cmp.rows.iter().map(|r| r.learned).collect(),
                    },
                    Series {
                        label: "truth".into(),
                        x: grid.clone(),
                        y: cmp.rows.iter().map(|r| r.truth).collect(),
                    },
                ],
            );
            w.write(&format!("eval/{name}_drift_x{}.svg", k + 1), svg.as_bytes())?;
        }
    }

    if let Some(dec) = &decoder {
        let mut csv = String::from(
            "coordinate,x,effective_drift,true_drift,drift_se,effective_diffusion,true_diffusion\n",
        );
        let mut per_coord = vec![(Vec::new(), Vec::new(), Vec::new()); dim];
        for (i, &v) in grid.iter().enumerate() {
            for k in 0..dim {
                let x = point(k, v);
                let c = effective_coefficients(
                    &model,
                    &x,
                    e.sweep_samples,
                    seed.wrapping_add(10_000 + (i * dim + k) as u64),
                )?;
                let truth = true_effective_drift(&sys, dt, &x)[k];
                csv.push_str(&format!(
                    "{},{v},{},{truth},{},{},{}\n",
                    k + 1,
                    c.drift[k],
                    c.drift_se[k],
                    c.diffusion[k],
                    sys.noise_scale[k]
                ));
                per_coord[k].0.push(c.drift[k] - truth);
                per_coord[k].1.push(c.drift_se[k]);
                per_coord[k].2.push(c.diffusion[k]);
            }
        }
        w.write(&format!("eval/{name}_effective.csv"), csv.as_bytes())?;
        if let Some(errors) = coefficient_errors(&name, &exprs[0]) {
            let (err, se, diff) = &per_coord[0];
            let bound = |x: f64| coefficient_bound(&errors, x);
            checks.push(sweep_check(
                &format!("{name}_effective_sweep"),
                &grid,
                err,
                se,
                diff,
                bound,
            ));
        }
        let samples = sample_noise(dec, e.noise_samples, seed.wrapping_add(1))?;
        checks.extend(noise_checks(&name, &samples, dim));
    }

    let summary = Summary {
        system: sys.name.clone(),
        drift_only,
        expressions: exprs.iter().map(|x| x.pretty_print(4)).collect(),
        reference_fit: sys.reference_fit.clone(),
        checks,
        drift_errors,
        rollouts,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    w.write("eval/summary.json", text.as_bytes())?;
    record(
        &mut manifest,
        dir,
        "evaluate",
        cfg.eval_hash(&fit_hash),
        w,
        start,
    )?;
    Ok(summary)
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
benchmark = "ou"
[data]
n_traj = 60
[search]
iterations = 2
pool_size = 2
[search.operators]
unary = ["zero", "Id", "square"]
binary = ["add"]
[search.score]
iterations = 60
minibatch = 128
[search.refine]
iterations = 60
minibatch = 128
lbfgs_iterations = 3
[noise.pairs]
n_pairs = 100
steps = 60
minibatch = 100
[noise.decoder]
iterations = 50
[eval]
ensemble = 200
sweep_points = 3
sweep_samples = 100
density_samples = 200
density_points = 21
noise_samples = 500
"#;

fn fex(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fex-sde"))
        .args(args)
        .current_dir(dir)
        .env_remove("FEX_SDE_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn with_seed(args: &[&str], dir: &Path, seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fex-sde"))
        .args(args)
        .current_dir(dir)
        .env("FEX_SDE_SEED", seed)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

#[test]
fn staged_run_writes_the_artifacts() {
    let dir = setup();
    let p = dir.path();
    let common = ["--config", "tiny.toml", "--out", "run", "--threads", "1"];
    let step = |cmd: &str| {
        let mut args = vec![cmd];
        args.extend(common);
        let o = fex(&args, p);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    step("generate");
    step("fit");
    let out = step("evaluate");
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("learned   x1:") && text.contains("reference x1: 1.1989 - 0.9953*x1"),
        "{text}"
    );

    let run = p.join("run");
    for f in [
        "config.toml",
        "manifest.json",
        "data/trajectories.bin",
        "data/pairs.bin",
        "fit/drift_x1.json",
        "fit/search_log_x1.csv",
        "fit/noise_pairs.bin",
        "fit/noise_pairs.json",
        "fit/decoder.json",
        "eval/summary.json",
        "eval/ou_rollout_1.5.csv",
        "eval/ou_reference_1.5.csv",
        "eval/ou_density_1.5.csv",
        "eval/ou_drift_x1.csv",
        "eval/ou_effective.csv",
        "eval/ou_rollout_x1_1.5.svg",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_file"], "config.toml");
    assert_eq!(manifest["seeds"].as_object().unwrap().len(), 5);
    for stage in ["generate", "fit", "evaluate"] {
        assert!(manifest["stages"][stage]["hash"].as_str().unwrap().len() == 64);
    }
    let rollout = fs::read_to_string(run.join("eval/ou_rollout_1.5.csv")).unwrap();
    assert!(rollout.starts_with("t,mean_1,std_1"));
    assert_eq!(rollout.lines().count(), 102);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("eval/summary.json")).unwrap()).unwrap();
    let ids: Vec<&str> = summary["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["id"].as_str().unwrap())
        .collect();
    assert_eq!(
        ids,
        ["ou_affine_drift", "ou_effective_sweep", "ou_noise_moments"]
    );
}

#[test]
fn reruns_with_the_same_seed_are_identical() {
    let dir = setup();
    let p = dir.path();
    let run = |out: &str, seed: &str| {
        let o = with_seed(
            &["reproduce", "ou", "--config", "tiny.toml", "--out", out],
            p,
            seed,
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(p.join(out).join("ou/eval/summary.json")).unwrap()
    };
    let a = run("a", "11");
    let b = run("b", "11");
    let c = run("c", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let cfg = fs::read_to_string(p.join("a/ou/config.toml")).unwrap();
    assert!(cfg.contains("seed = 11"));
}

#[test]
fn drift_only_fit_evaluates_a_deterministic_model() {
    let dir = setup();
    let p = dir.path();
    let o = fex(
        &[
            "reproduce",
            "ou",
            "--config",
            "tiny.toml",
            "--out",
            "d",
            "--stage",
            "drift-only",
        ],
        p,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!p.join("d/ou/fit/decoder.json").exists());
    let summary = fs::read_to_string(p.join("d/ou/eval/summary.json")).unwrap();
    assert!(summary.contains("\"drift_only\": true"));
    let rollout = fs::read_to_string(p.join("d/ou/eval/ou_rollout_1.5.csv")).unwrap();
    let last = rollout.lines().last().unwrap();
    assert_eq!(last.split(',').nth(2).unwrap().parse::<f64>().unwrap(), 0.0);
}

#[test]
fn missing_artifacts_exit_with_three() {
    let dir = setup();
    let p = dir.path();
    let o = fex(&["evaluate", "--config", "tiny.toml", "--out", "m"], p);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fex-sde fit"));
    let o = fex(&["fit", "--config", "tiny.toml", "--out", "m"], p);
    assert_eq!(code(&o), 3);

    assert_eq!(
        code(&fex(
            &["generate", "--config", "tiny.toml", "--out", "m"],
            p
        )),
        0
    );
    // changed data settings make the generated data stale
    let o = with_seed(&["fit", "--config", "tiny.toml", "--out", "m"], p, "5");
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("different settings"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = setup();
    let p = dir.path();
    fs::write(
        p.join("bad.toml"),
        "benchmark = \"ou\"\n[data]\nn_trajs = 3\n",
    )
    .unwrap();
    let o = fex(&["print-config", "--config", "bad.toml"], p);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_trajs"));
    assert_eq!(code(&fex(&["print-config", "--benchmark", "nope"], p)), 2);
    assert_eq!(code(&fex(&["print-config"], p)), 2);
    assert_eq!(
        code(&fex(
            &["print-config", "--benchmark", "ou", "--scale", "huge"],
            p
        )),
        2
    );
    assert_eq!(
        code(&fex(&["print-config", "--config", "absent.toml"], p)),
        2
    );
    assert_eq!(
        code(&with_seed(&["print-config", "--benchmark", "ou"], p, "-1")),
        2
    );
    assert_eq!(code(&fex(&["frobnicate"], p)), 2);
    fs::write(p.join("nox0.toml"), format!("{TINY}x0 = []\n")).unwrap();
    let o = fex(&["generate", "--config", "nox0.toml", "--out", "n"], p);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("eval.x0"));
}

#[test]
fn print_config_reflects_scale_and_seed() {
    let dir = setup();
    let p = dir.path();
    let desk = fex(&["print-config", "--benchmark", "ol2d"], p);
    let paper = with_seed(
        &["print-config", "--benchmark", "ol2d", "--scale", "paper"],
        p,
        "9",
    );
    let desk = String::from_utf8_lossy(&desk.stdout).to_string();
    let paper = String::from_utf8_lossy(&paper.stdout).to_string();
    assert!(desk.contains("n_traj = 5000"), "{desk}");
    assert!(paper.contains("n_traj = 35000"));
    assert!(paper.contains("seed = 9"));
    let reparsed = p.join("paper.toml");
    fs::write(&reparsed, &paper).unwrap();
    let again = with_seed(
        &["print-config", "--config", "paper.toml", "--scale", "paper"],
        p,
        "9",
    );
    assert_eq!(String::from_utf8_lossy(&again.stdout), paper);
}

#[test]
fn numerical_failures_exit_with_four() {
    let dir = setup();
    let p = dir.path();
    fs::write(
        p.join("blowup.toml"),
        r#"
[custom]
name = "blowup"
drift = [[{ coef = 1.0e10, powers = [5] }]]
sigma = [0.1]
init_low = [1.0]
init_high = [2.0]
sweep_domain = [-1.0, 1.0]
[eval]
x0 = [[1.0]]
"#,
    )
    .unwrap();
    let o = fex(&["generate", "--config", "blowup.toml", "--out", "b"], p);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fex_sde::preset::Scale;
use fex_sde::sde::BENCHMARK_NAMES;

mod config;
mod error;
mod manifest;
mod pipeline;

use config::RunConfig;
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "fex-sde",
    version,
    about = "Learn SDE drift and noise from trajectory data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Data sizes and iteration counts to start from.
    #[arg(long, global = true, value_enum, default_value_t = ScaleArg::Desk)]
    scale: ScaleArg,
    /// TOML file overriding the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in system; overrides the config file's choice.
    #[arg(long, global = true)]
    benchmark: Option<String>,
    /// Master seed.
    #[arg(long, global = true, env = "FEX_SDE_SEED")]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Stage {
    /// Skip the noise model.
    DriftOnly,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate training trajectories.
    Generate,
    /// Search the drift and build the noise model.
    Fit {
        #[arg(long, value_enum)]
        stage: Option<Stage>,
    },
    /// Roll out the fitted model and compare it with the true system.
    Evaluate,
    /// Run every stage for one benchmark, or for all of them.
    Reproduce {
        /// A benchmark name or `all`.
        name: String,
        #[arg(long, value_enum)]
        stage: Option<Stage>,
    },
    /// Print the effective configuration as TOML.
    PrintConfig,
}

fn scale(c: &Common) -> Scale {
    match c.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Paper => Scale::Paper,
    }
}

fn load_config(c: &Common, benchmark: Option<&str>) -> Result<RunConfig, CliError> {
    let benchmark = benchmark.or(c.benchmark.as_deref());
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            RunConfig::from_toml(&text, scale(c), benchmark)?
        }
        None => match benchmark {
            Some(name) => RunConfig::for_benchmark(name, scale(c))?,
            None => return Err(CliError::config("pass --benchmark or --config")),
        },
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    pipeline::write_config(cfg, dir)
}

fn report(summary: &pipeline::Summary) {
    println!("== {}", summary.system);
    for (k, e) in summary.expressions.iter().enumerate() {
        println!("  learned   x{}: {e}", k + 1);
        if let Some(r) = summary.reference_fit.get(k) {
            println!("  reference x{}: {r}", k + 1);
        }
    }
    for c in &summary.checks {
        println!(
            "  [{}] {}: {}",
            if c.passed { "pass" } else { "FAIL" },
            c.id,
            c.detail
        );
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot size thread pool: {e}")))?;
    }
    let c = &cli.common;
    match cli.command {
        Command::PrintConfig => {
            print!("{}", load_config(c, None)?.to_toml()?);
        }
        Command::Generate => {
            let cfg = load_config(c, None)?;
            prepare(&cfg, &c.out)?;
            pipeline::generate(&cfg, &c.out)?;
        }
        Command::Fit { stage } => {
            let cfg = load_config(c, None)?;
            prepare(&cfg, &c.out)?;
            pipeline::fit(&cfg, &c.out, stage == Some(Stage::DriftOnly))?;
        }
        Command::Evaluate => {
            let cfg = load_config(c, None)?;
            prepare(&cfg, &c.out)?;
            report(&pipeline::evaluate(&cfg, &c.out)?);
        }
        Command::Reproduce { name, stage } => {
            let names: Vec<&str> = if name == "all" {
                BENCHMARK_NAMES.to_vec()
            } else {
                vec![name.as_str()]
            };
            for n in names {
                let cfg = load_config(c, Some(n))?;
                let dir = c.out.join(n);
                prepare(&cfg, &dir)?;
                pipeline::generate(&cfg, &dir)?;
                pipeline::fit(&cfg, &dir, stage == Some(Stage::DriftOnly))?;
                report(&pipeline::evaluate(&cfg, &dir)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                error::EXIT_CONFIG as u8
            } else {
                0
            });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

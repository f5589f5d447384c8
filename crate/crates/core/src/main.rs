use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use resgld::config::ScenarioConfig;
use resgld::diagnostics::{discretization_sweep, SweepSettings};
use resgld::presets::{preset, PRESET_NAMES};
use resgld::run::run_scenario;
use resgld::verify::{run_suite, Suite};

#[derive(Parser)]
#[command(name = "resgld", version, about = "Adaptive replica-exchange SGLD on Gaussian-mixture targets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write samples, metrics, swaps and summary files.
    Run(RunArgs),
    /// Discretisation-error sweep over step sizes and gradient-noise levels.
    Sweep(SweepArgs),
    /// Built-in statistical self-checks.
    Verify {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List preset names.
    Presets,
}

#[derive(Args)]
struct Source {
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path assignment, e.g. `estimator.correction_factor=2`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    dump_config: bool,
}

impl Source {
    fn resolve(&self) -> anyhow::Result<ScenarioConfig> {
        let base = match (&self.preset, &self.config) {
            (Some(name), None) => preset(name)?,
            (None, Some(path)) => ScenarioConfig::load(path)?,
            _ => bail!("pass exactly one of --preset or --config"),
        };
        let mut cfg = base.with_overrides(&self.overrides)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value_t = 200)]
    n_runs: usize,
    #[arg(long, default_value_t = 8)]
    n_repeats: usize,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
        }
        Command::Run(args) => {
            let mut cfg = args.source.resolve()?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if args.source.dump_config {
                println!("{}", cfg.to_json()?);
                return Ok(ExitCode::SUCCESS);
            }
            let artifacts = run_scenario(&cfg).with_context(|| format!("running into {}", cfg.output_dir.display()))?;
            let s = &artifacts.summary;
            println!(
                "{} samples, {} / {} swaps accepted, final W2 {}",
                s.samples,
                s.swap_accepts,
                s.swap_attempts,
                s.final_w2.map_or("n/a".to_string(), |w| format!("{w:.5}"))
            );
            println!("wrote {}", cfg.output_dir.display());
        }
        Command::Sweep(args) => {
            let cfg = args.source.resolve()?;
            if args.source.dump_config {
                println!("{}", cfg.to_json()?);
                return Ok(ExitCode::SUCCESS);
            }
            let settings = SweepSettings {
                n_runs: args.n_runs,
                n_repeats: args.n_repeats,
                ..Default::default()
            };
            let table = discretization_sweep(&cfg, &settings)?;
            std::fs::create_dir_all(&cfg.output_dir)
                .with_context(|| format!("creating {}", cfg.output_dir.display()))?;
            let path = cfg.output_dir.join("sweep.csv");
            table.write_csv(&path)?;
            println!("eta      noise  w2_mean    w2_stderr");
            for r in std::iter::once(&table.floor).chain(&table.rows) {
                println!("{:<8} {:<6} {:.6}  {:.6}", r.eta, r.grad_noise_std, r.w2_mean, r.w2_stderr);
            }
            println!("wrote {}", path.display());
        }
        Command::Verify { suite, seed } => {
            let checks = run_suite(suite, seed)?;
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

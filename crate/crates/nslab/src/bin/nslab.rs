use clap::{Args, Parser, Subcommand};
use nslab::cli::{self, CliError, Report};
use nslab::config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nslab", version, about = "Periodic-box Navier-Stokes laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML); built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for within-stage parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Budget override, repeatable.
    #[arg(long = "budget", value_name = "KEY=VALUE")]
    budgets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Norm reports for the configured data.
    Norm(Common),
    /// Evolve the data and write a ledger directory.
    Simulate(Common),
    /// Diagnostics of an existing ledger directory.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ledger: PathBuf,
    },
    /// Data, simulation, diagnostics and summary in one run.
    Pipeline(Common),
    /// Check the DSS scaling of the configured profile.
    VerifyDss(Common),
    /// μ-selection for the configured profile.
    ComputeMu(Common),
    /// Bogovskii localization of the configured field.
    Bogovskii(Common),
    /// Small-data Picard iteration on the configured field.
    Picard(Common),
}

fn load(c: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let tag = |error| CliError { stage: cli::Stage::Config, module: "config", error };
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).map_err(tag)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    for b in &c.budgets {
        cfg.budgets.set(b).map_err(tag)?;
    }
    cfg.validate_values().map_err(tag)?;
    if let Some(n) = c.threads {
        // a pool may already exist in-process; ignore in that case
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = c.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn report(r: &Report) {
    print!("{}", r.summary_text());
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Norm(c) => {
            let (cfg, out) = load(&c)?;
            for f in cli::cmd_norm(&cfg, &out)? {
                println!("{}", f.display());
            }
        }
        Command::Simulate(c) => {
            let (cfg, out) = load(&c)?;
            let led = cli::cmd_simulate(&cfg, &out)?;
            println!("{} snapshots to t = {} in {}", led.snapshots.len(), led.t_end(), out.join("ledger").display());
        }
        Command::Diagnose { common, ledger } => {
            let (cfg, out) = load(&common)?;
            report(&cli::cmd_diagnose(&cfg, &ledger, &out)?);
        }
        Command::Pipeline(c) => {
            let (cfg, out) = load(&c)?;
            report(&cli::cmd_pipeline(&cfg, &out)?);
        }
        Command::VerifyDss(c) => {
            let (cfg, out) = load(&c)?;
            report(&cli::cmd_verify_dss(&cfg, &out)?);
        }
        Command::ComputeMu(c) => {
            let (cfg, out) = load(&c)?;
            report(&cli::cmd_compute_mu(&cfg, &out)?);
        }
        Command::Bogovskii(c) => {
            let (cfg, out) = load(&c)?;
            report(&cli::cmd_bogovskii(&cfg, &out)?);
        }
        Command::Picard(c) => {
            let (cfg, out) = load(&c)?;
            report(&cli::cmd_picard(&cfg, &out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nslab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use popinfer_core::harness::{self, ExperimentConfig};
use popinfer_core::PopInferError;

/// Population-informed Bayesian inference experiments.
#[derive(Parser)]
#[command(name = "popinfer", version)]
struct Cli {
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment and write report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run many data realizations and write sweep.csv and sweep_summary.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        realizations: usize,
    },
    /// Print the predictability spectrum or the mean-ratio diagnostic.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the dog-bone surrogate study with its default settings.
    Dogbone {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20240101)]
        seed: u64,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, PopInferError> {
    ExperimentConfig::load(path)
}

/// Exit code 3 when the run finished but predictability was not supported.
fn finish_report(report: &harness::InferenceReport) -> u8 {
    if report.predictability_violated() {
        eprintln!("warning: predictability diagnostic failed; see report.json");
        3
    } else {
        0
    }
}

fn execute(cli: Cli) -> Result<u8, PopInferError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = harness::run_single(&cfg, &out)?;
            eprintln!(
                "wrote {} ({} realizations, {} failed)",
                out.join("report.json").display(),
                report.realizations.len(),
                report.failures.len()
            );
            Ok(finish_report(&report))
        }
        Command::Sweep {
            config,
            out,
            realizations,
        } => {
            let cfg = load(&config)?;
            let report = harness::run_sweep(&cfg, &out, Some(realizations))?;
            let s = &report.summary;
            eprintln!(
                "{} realizations ({} failed): mean relative gain {:.4}, fraction negative {:.4}",
                s.n_realizations, s.n_failed, s.mean_relative_gain, s.fraction_negative
            );
            Ok(if s.diagnostic.is_some_and(|d| !d.pass) { 3 } else { 0 })
        }
        Command::Diagnose { config } => {
            let cfg = load(&config)?;
            let report = harness::diagnose(&cfg)?;
            print!("{}", harness::to_json_string(&report)?);
            Ok(if report.passed() { 0 } else { 3 })
        }
        Command::Dogbone { out, seed } => {
            let report = harness::run_dogbone_study(&harness::dogbone_config(seed), &out)?;
            if let Some(r) = report.realizations.first() {
                eprintln!(
                    "KL standard {:.4}, KL population-informed {:.4}, relative gain {:?}",
                    r.kl_standard, r.kl_pop, r.relative_gain
                );
            }
            Ok(finish_report(&report))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

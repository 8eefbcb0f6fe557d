use clap::{Parser, Subcommand};
use etuq_cli::{read_manifest, render_report, run_campaign, write_trace, CampaignConfig, CliError, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

/// Uncertainty quantification of the peak bondwire temperature.
#[derive(Debug, Parser)]
#[command(name = "etuq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an estimator campaign and write `manifest.csv` plus `runs/*.json`.
    Run {
        /// Campaign configuration (JSON); defaults apply to missing fields.
        #[arg(long, env = "ETUQ_CONFIG")]
        config: Option<PathBuf>,
        /// Model definition (JSON); the built-in desk model when absent.
        #[arg(long, env = "ETUQ_MODEL")]
        model: Option<PathBuf>,
        /// mc, sg, tt or compare.
        #[arg(long, env = "ETUQ_METHOD")]
        method: Option<String>,
        /// Output directory.
        #[arg(long, env = "ETUQ_OUT")]
        out: Option<PathBuf>,
        /// Monte Carlo seed.
        #[arg(long, env = "ETUQ_SEED")]
        seed: Option<u64>,
        /// Monte Carlo sample count.
        #[arg(long, env = "ETUQ_SAMPLES")]
        samples: Option<usize>,
        /// Worker threads for model evaluations.
        #[arg(long, env = "ETUQ_THREADS")]
        threads: Option<usize>,
    },
    /// Print a manifest as an aligned table.
    Report { manifest: PathBuf },
    /// Run one transient and write the wire temperature trace as CSV.
    Trace {
        #[arg(long, env = "ETUQ_MODEL")]
        model: Option<PathBuf>,
        /// One elongation for all wires, or a comma-separated list with one per wire.
        #[arg(long, value_delimiter = ',', default_value = "0.17")]
        delta: Vec<f64>,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, model, method, out, seed, samples, threads } => {
            let mut cfg = match &config {
                Some(p) => CampaignConfig::load(p)?,
                None => CampaignConfig::default(),
            };
            cfg.apply(&Overrides { model, method, out, seed, threads, samples })?;
            let summary = run_campaign(&cfg)?;
            print!("{}", render_report(&summary.rows));
            eprintln!("manifest written to {}", summary.manifest.display());
        }
        Command::Report { manifest } => {
            print!("{}", render_report(&read_manifest(&manifest)?));
        }
        Command::Trace { model, delta, out } => {
            let cfg = CampaignConfig { model, ..CampaignConfig::default() };
            let t_max = write_trace(&cfg, &delta, &out)?;
            println!("T_max = {t_max} K; trace written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { etuq_cli::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use chancert_cli::sweep::{load_or_build_mstm, write_mstm_cache, write_outputs};
use chancert_cli::{emit_plots, exit, run_sweep, CliError, RunConfig, SweepOptions};
use chancert_core::choi_oracle::{run_oracle_battery, OracleOptions};
use chancert_core::tm_estimation::spectral_mean_tm;
use chancert_core::witness::certify;
use chancert_core::{CorrelationTensor, WitnessKind};
use clap::{Parser, Subcommand};
use log::info;

#[derive(Parser)]
#[command(name = "chancert", version, about = "Schmidt-number certification of multi-mode fiber channels")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Skip SVG rendering.
    #[arg(long, global = true)]
    no_plots: bool,
    /// Record per-task wall time in the CSV (makes output non-reproducible).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the fiber's multi-spectral transmission matrix and cache it.
    Simulate,
    /// Full pipeline: CSV, manifest and plots.
    Sweep,
    /// Certify an external correlation table (columns x,a,b,value).
    Certify {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the Choi-state validation battery.
    OracleCheck {
        /// Fewer randomized trials.
        #[arg(long)]
        quick: bool,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Simulate => {
            let config = load_config(cli)?;
            let cache = config.output_dir.join("cache");
            let mstm = load_or_build_mstm(&config.fiber, None)?;
            let path = write_mstm_cache(&mstm, &cache)?;
            let approx = spectral_mean_tm(&mstm)?;
            let s = approx.singular_values();
            writeln!(out, "modes: {}", mstm.dim())?;
            writeln!(out, "wavelengths: {}", mstm.len())?;
            writeln!(out, "largest singular value: {:.6}", s.first().copied().unwrap_or(0.0))?;
            writeln!(out, "smallest singular value: {:.6}", s.last().copied().unwrap_or(0.0))?;
            writeln!(out, "cache: {}", path.display())?;
            Ok(exit::OK)
        }
        Command::Sweep => {
            let config = load_config(cli)?;
            let options = SweepOptions { timing: cli.timing, cache_dir: Some(config.output_dir.join("cache")) };
            let rows = run_sweep(&config, &options)?;
            let plots = if cli.no_plots || rows.is_empty() {
                Vec::new()
            } else {
                emit_plots(&rows, &config.output_dir.join("plots"))?
            };
            let csv = write_outputs(&rows, &config, &config.output_dir, &plots)?;
            info!("wrote {} rows to {}", rows.len(), csv.display());
            writeln!(out, "{:>5} {:<13} {:>4} {:>8} {:>12} {:>4}", "d", "witness", "m", "p", "lhs", "n")?;
            for r in &rows {
                writeln!(
                    out,
                    "{:>5} {:<13} {:>4} {:>8.5} {:>12.6} {:>4}",
                    r.d, r.witness, r.m, r.p_used, r.lhs, r.certified_n
                )?;
            }
            Ok(exit::OK)
        }
        Command::Certify { input } => {
            let file = File::open(input).map_err(|e| CliError::InvalidArgument(format!("{}: {e}", input.display())))?;
            let c = CorrelationTensor::read_csv(BufReader::new(file))?;
            let d = c.dim();
            let mut kinds = Vec::new();
            if c.num_bases() >= 2 {
                kinds.extend([WitnessKind::FtBavaresco, WitnessKind::PtSteering]);
            }
            kinds.extend((2..=c.num_bases()).map(WitnessKind::FtMorelli));
            if kinds.is_empty() {
                return Err(CliError::InvalidArgument("correlation table needs at least two bases".into()));
            }
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["d", "witness", "m", "lhs", "certified_n"])?;
            for kind in kinds {
                let r = certify(&c.truncated(kind.num_bases())?, kind)?;
                w.write_record([
                    d.to_string(),
                    kind.name().to_string(),
                    kind.num_bases().to_string(),
                    format!("{}", r.lhs),
                    r.certified_n.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(exit::OK)
        }
        Command::OracleCheck { quick } => {
            let mut options = OracleOptions { seed: cli.seed.unwrap_or(0), ..OracleOptions::default() };
            if *quick {
                options.equivalence_channels = 10;
                options.soundness_dressings = 20;
                options.pt_channels = 2;
            }
            let checks = run_oracle_battery(&options)?;
            let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
            for c in &checks {
                writeln!(out, "{}  {:<width$}  {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
            }
            Ok(if checks.iter().all(|c| c.passed) { exit::OK } else { exit::NUMERIC })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

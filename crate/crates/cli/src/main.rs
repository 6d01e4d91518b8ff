use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use slicelab_cli::experiments::{check_lambda, gap_table, iat_sweep, write_iat_csv, SweepMeta};
use slicelab_cli::verify::{all_passed, run_verify};
use slicelab_cli::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(
    name = "slicelab",
    version,
    about = "Slice-sampling experiments on radial targets"
)]
struct Cli {
    /// JSON experiment config; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dimensions up to 100, 10^5 iterations, 10 replications.
    #[arg(long = "paper-scale", global = true)]
    full_scale: bool,
    /// Override the level-grid size.
    #[arg(long, global = true)]
    grid_size: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// IAT of ‖X‖ for USS and PSS chains across dimensions (CSV).
    IatSweep,
    /// Spectral-gap certificates of the discretized level chain (JSON).
    GapTable,
    /// Λ_k membership reports (JSON).
    CheckLambda,
    /// Run the verification suite; nonzero exit if any check fails.
    Verify,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    if cli.full_scale {
        cfg = cfg.full_scale();
    }
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    if let Some(n) = cli.grid_size {
        cfg.grid.size = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = open_out(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::IatSweep => {
            let rows = iat_sweep(&cfg)?;
            write_iat_csv(&rows, open_out(out)?)?;
            if let Some(p) = out {
                let mut side = p.as_os_str().to_owned();
                side.push(".meta.json");
                write_json(&SweepMeta::new(&cfg), Some(Path::new(&side)))?;
            }
        }
        Command::GapTable => {
            let rows = gap_table(&cfg)?;
            for r in rows.iter().filter(|r| r.converged == Some(false)) {
                log::warn!(
                    "d = {}: refinement delta {:?} exceeds tolerance",
                    r.d,
                    r.refinement_delta
                );
            }
            write_json(&rows, out)?;
        }
        Command::CheckLambda => write_json(&check_lambda(&cfg)?, out)?,
        Command::Verify => {
            let results = run_verify(&cfg);
            for r in &results {
                println!("{r}");
            }
            if let Some(p) = out {
                write_json(&results, Some(p))?;
            }
            return Ok(all_passed(&results));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rislens::{output, run_peb_sweep, run_rmse_sweep, run_snr_map, RunConfig};

#[derive(Parser)]
#[command(version, about = "Localization bounds and estimator sweeps for a lens-operated surface")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Position error bound versus distance.
    Peb(Common),
    /// Localization RMSE versus distance.
    Rmse(Common),
    /// SNR over the X = Y plane.
    SnrMap(Common),
}

fn load(common: &Common) -> anyhow::Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn create(path: Option<PathBuf>, default: &str) -> anyhow::Result<BufWriter<File>> {
    let path = path.unwrap_or_else(|| PathBuf::from(default));
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Peb(c) => {
            let rows = run_peb_sweep(&load(&c)?)?;
            output::write_peb(create(c.out, "peb.csv")?, &rows)?;
        }
        Command::Rmse(c) => {
            let rows = run_rmse_sweep(&load(&c)?)?;
            output::write_rmse(create(c.out, "rmse.csv")?, &rows)?;
        }
        Command::SnrMap(c) => {
            let rows = run_snr_map(&load(&c)?)?;
            output::write_snr_map(create(c.out, "snr_map.csv")?, &rows)?;
        }
    }
    Ok(())
}

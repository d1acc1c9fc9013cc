//! Batch experiment driver. All substance lives in the library; this
//! binary parses a config file, runs one of four actions, and writes CSV.
//!
//! Exit codes: 0 success, 2 configuration or i/o problem, 3 search space
//! over the sizing guard, 4 selftest failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use afdmcim::sim::{ber_csv, bound_csv};
use afdmcim::{
    compare_schemes, run_ber_sweep, selftest, DetectorKind, EqualizerKind, Error, SimConfig,
};

#[derive(Parser)]
#[command(name = "afdmcim", version, about = "Chirp-multicarrier link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Experiment config file (key = value lines)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master_seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DetectorOpts {
    /// Override the config's detector (ml, mrc)
    #[arg(long)]
    detector: Option<DetectorKind>,
    /// Override the config's equalizer (mmse, mf)
    #[arg(long)]
    equalizer: Option<EqualizerKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo BER sweep over the config's SNR grid
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        detector: DetectorOpts,
        /// Output CSV path (snr_db,trials,bit_errors,ber,ci)
        #[arg(long)]
        out: PathBuf,
    },
    /// Analytical BER upper bound over the config's SNR grid
    Bound {
        #[command(flatten)]
        common: CommonOpts,
        /// Override the config's bound_profiles
        #[arg(long)]
        profiles: Option<usize>,
        /// Output CSV path (snr_db,abep)
        #[arg(long)]
        out: PathBuf,
    },
    /// BER sweeps for the configured scheme and its matched-rate baselines
    Compare {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        detector: DetectorOpts,
        /// Output directory; one <scheme>.csv per scheme
        #[arg(long)]
        out: PathBuf,
    },
    /// Built-in consistency checks (runs in seconds)
    Selftest,
}

fn load_config(common: &CommonOpts, detector: Option<&DetectorOpts>) -> Result<SimConfig, Error> {
    let text = std::fs::read_to_string(&common.config)?;
    let mut cfg = SimConfig::parse(&text)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(d) = detector {
        if let Some(kind) = d.detector {
            cfg.detector = kind;
        }
        if let Some(eq) = d.equalizer {
            cfg.equalizer = eq;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { common, detector, out } => {
            let cfg = load_config(&common, Some(&detector))?;
            let points = run_ber_sweep(&cfg)?;
            std::fs::write(&out, ber_csv(&points))?;
            eprintln!("wrote {} points to {}", points.len(), out.display());
        }
        Command::Bound { common, profiles, out } => {
            let mut cfg = load_config(&common, None)?;
            if let Some(p) = profiles {
                cfg.bound_profiles = p;
            }
            let curve = cfg.bound_curve()?;
            std::fs::write(&out, bound_csv(&cfg.snr_grid_db, &curve))?;
            eprintln!("wrote {} points to {}", curve.len(), out.display());
        }
        Command::Compare { common, detector, out } => {
            let cfg = load_config(&common, Some(&detector))?;
            let results = compare_schemes(&cfg)?;
            std::fs::create_dir_all(&out)?;
            for (scheme, points) in &results {
                let path = out.join(format!("{scheme}.csv"));
                std::fs::write(&path, ber_csv(points))?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Selftest => {
            selftest()?;
            eprintln!("all checks passed");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Dimension(_) | Error::Io(_) => ExitCode::from(2),
                Error::TooLarge(_) => ExitCode::from(3),
                Error::Selftest(_) => ExitCode::from(4),
            }
        }
    }
}

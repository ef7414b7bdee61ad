//! `cfmm`: seeded simulations, θ*(v) curves, oracle suites and the classification pipeline.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 usage or input error.

mod commands;
mod config;
mod csv_io;
mod error;
mod verify;

use clap::{Parser, Subcommand};
use config::ScenarioConfig;
use error::CliResult;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cfmm", version, about = "Constant-product AMM laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the market and LP wealth paths; writes trades.csv, market.csv, wealth.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides run.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal liquidity share across the configured variance grid; writes theta_curve.csv.
    ThetaCurve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an oracle suite.
    Verify {
        #[arg(long)]
        suite: String,
    },
    /// Classify trades and run window, asymmetry and Granger reports.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trades: PathBuf,
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            let dir = commands::output_dir(&cfg, out);
            commands::simulate(&cfg, &dir)
        }
        Command::ThetaCurve { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            commands::theta_curve(&cfg, &commands::output_dir(&cfg, out))
        }
        Command::Verify { suite } => commands::verify(&suite),
        Command::Classify { config, trades, prices, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            commands::classify(&cfg, &trades, &prices, &commands::output_dir(&cfg, out))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CliError;
    use std::path::Path;

    const GOLDEN: &str = include_str!("../configs/golden_hump.json");

    #[test]
    fn golden_config_round_trips() {
        let path = Path::new("golden_hump.json");
        let a = ScenarioConfig::parse(GOLDEN, path).unwrap();
        let b = ScenarioConfig::parse(&a.to_json(), path).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.model_params(), b.model_params());
    }

    #[test]
    fn golden_config_matches_library_scenario() {
        let cfg = ScenarioConfig::parse(GOLDEN, Path::new("golden_hump.json")).unwrap();
        assert_eq!(cfg.model_params(), cfmm_lab::lp_objective::golden_hump_params());
        assert_eq!(cfg.run.v_grid.values(), cfmm_lab::lp_objective::golden_hump_grid());
    }

    #[test]
    fn validation_names_the_field_and_line() {
        let bad = GOLDEN.replace("\"risk_aversion\": 2.0", "\"risk_aversion\": 1.0");
        let err = ScenarioConfig::parse(&bad, Path::new("x.json")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("model.risk_aversion") && msg.contains("line "), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = GOLDEN.replace("\"risk_aversion\"", "\"risk_aversion_typo\"");
        let err = ScenarioConfig::parse(&bad, Path::new("x.json")).unwrap_err();
        assert!(err.to_string().contains("risk_aversion_typo"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::ChecksFailed(1).exit_code(), 1);
        assert_eq!(CliError::Model(cfmm_lab::Error::RankDeficient).exit_code(), 1);
    }
}

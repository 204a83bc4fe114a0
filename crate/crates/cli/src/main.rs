use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ratelessnc::harness::{
    emit_outputs, load_config, load_config_with, run_experiment, HarnessError, Overrides,
    SchemeKind,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CORRUPTION: u8 = 3;

#[derive(Parser)]
#[command(name = "ratelessnc", version, about = "Monte Carlo driver for rateless network error correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write trials.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// sc or rs
        #[arg(long)]
        scheme: Option<SchemeKind>,
    },
    /// Check a config against the parameter rules without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(err: HarnessError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(if err.is_config() { EXIT_CONFIG } else { EXIT_FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                print!("ok: scheme {}, field {}, b {}, n {}", cfg.scheme.name(), cfg.field.name(), cfg.b, cfg.n);
                if let Some(rs) = &cfg.rs {
                    print!(", sigma {}, m {}, c_bar {}", rs.sigma, rs.m, rs.c_bar);
                }
                println!();
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Run { config, out, trials, seed, scheme } => {
            let overrides = Overrides { trials, seed, scheme };
            let cfg = match load_config_with(&config, &overrides) {
                Ok(cfg) => cfg,
                Err(e) => return fail(e),
            };
            let result = match run_experiment(&cfg) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            if let Err(e) = emit_outputs(&result.records, &result.summary, &out) {
                return fail(e);
            }
            let s = &result.summary;
            println!(
                "{} trials: {} decoded ({} correct), {} failed, {} exhausted; mean rate {:.4}, bound {:.4}",
                s.trials, s.decoded, s.correct, s.failures, s.exhausted, s.mean_rate, s.theoretical_bound
            );
            for flag in &s.flags {
                eprintln!("flag: {flag}");
            }
            if s.silent_corruption_flag {
                eprintln!("silent corruption in {} trial(s)", s.silent_corruptions);
                return ExitCode::from(EXIT_CORRUPTION);
            }
            ExitCode::SUCCESS
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use kinshock_cli::config::{load_config, Scenario};
use kinshock_cli::run::{resolve_out_dir, run};
use kinshock_cli::scenarios::Status;

/// Runs one kinshock scenario and writes CSV artifacts with a JSON manifest.
#[derive(Debug, Parser)]
#[command(name = "kinshock", version)]
struct Cli {
    /// One of: check-hypotheses, chapman-enskog, reduce, resolvent-probe,
    /// stable-manifold, center-taylor, profile, sweep.
    scenario: String,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed`), at most 2^63 - 1.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let scenario: Scenario = match cli.scenario.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut cfg = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(expected) = cfg.scenario {
        if expected != scenario {
            eprintln!("error: config is for scenario '{expected}', not '{scenario}'");
            return ExitCode::from(2);
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out_dir = resolve_out_dir(&cfg, cli.out);
    let manifest = match run(scenario, &cfg, &out_dir) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for v in &manifest.verdicts {
        let tag = match v.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        println!("{tag} {}: {}", v.check, v.detail);
    }
    println!(
        "{} {} in {:.2}s, {} files in {}",
        scenario,
        if manifest.pass { "passed" } else { "failed" },
        manifest.wall_clock_seconds,
        manifest.files.len(),
        out_dir.display()
    );
    if manifest.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

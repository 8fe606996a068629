mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::Config;
use error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flowhunter: {e}");
            ExitCode::from(e.exit as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let g = commands::Globals {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        jobs: cli.jobs.or(cfg.jobs).unwrap_or(1).max(1),
    };
    match cli.command {
        Command::Extract(a) => commands::extract::run(&a, &cfg),
        Command::Train(a) => commands::train::run(&a, &cfg, &g),
        Command::Crossval(a) => commands::train::crossval(&a, &cfg, &g),
        Command::Select(a) => commands::train::select(&a, &cfg, &g),
        Command::Optimize(a) => commands::optimize::run(&a, &cfg, &g),
        Command::Detect(a) => commands::detect::run(&a, &cfg, &g),
        Command::Report(a) => commands::report::run(&a),
    }
}

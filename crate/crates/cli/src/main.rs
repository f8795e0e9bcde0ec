mod args;
mod commands;
mod config;
mod plot;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, COMMANDS};

fn save_config(cli: &Cli) -> Result<()> {
    let Some(path) = &cli.save_config else {
        return Ok(());
    };
    let text = match &cli.command {
        Command::Simulate(a) => config::render(a)?,
        Command::Fit(a) => config::render(a)?,
        Command::Predict(a) => config::render(a)?,
        Command::Bench(a) => config::render(a)?,
        Command::Plot(a) => config::render(a)?,
    };
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: &Cli) -> Result<()> {
    save_config(cli)?;
    let written = match &cli.command {
        Command::Simulate(a) => commands::simulate(a)?,
        Command::Fit(a) => commands::fit(a)?,
        Command::Predict(a) => commands::predict(a)?,
        Command::Bench(a) => commands::bench(a)?,
        Command::Plot(a) => commands::plot(a)?,
    };
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let raw: Vec<_> = std::env::args_os().collect();
    let expanded = match config::expand(raw, &COMMANDS) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(expanded) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")
            .and_then(|pool| pool.install(|| run(&cli))),
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

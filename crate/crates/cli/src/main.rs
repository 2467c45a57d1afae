mod args;
mod commands;
mod csvio;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::Cli;
use crate::error::{CliError, CliResult};

fn parse(argv: &[String]) -> CliResult<Option<Cli>> {
    match Cli::try_parse_from(argv) {
        Ok(cli) => Ok(Some(cli)),
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            Ok(None)
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            Err(CliError::Usage(
                first.trim_start_matches("error: ").to_string(),
            ))
        }
    }
}

pub(crate) fn run(argv: Vec<String>) -> CliResult<()> {
    let Some(cli) = parse(&argv)? else {
        return Ok(());
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::flag("--threads", "must be at least 1"));
        }
        // a rerun arrives here a second time with the pool already built
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    commands::execute(cli.command, &argv[1..])
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", e.category());
            ExitCode::from(if matches!(e, CliError::Usage(_)) {
                2
            } else {
                1
            })
        }
    }
}

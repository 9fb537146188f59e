mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(commands::EXIT_ERROR),
            };
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

    if cli.version {
        println!("{}", commands::version_text());
        return ExitCode::SUCCESS;
    }
    let result = match cli.command {
        Some(Command::Annotate(a)) => commands::annotate(a),
        Some(Command::Split(a)) => commands::split(a),
        Some(Command::Cost(a)) => commands::cost(a),
        Some(Command::Evaluate(a)) => commands::evaluate(a),
        Some(Command::Validate(a)) => commands::validate(a),
        None => Err(commands::CliError::Usage("a subcommand is required".into())),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            if let commands::CliError::Usage(_) = e {
                eprintln!("\nRun `annolingo --help` or `annolingo <command> --help` for usage.");
            }
            ExitCode::from(commands::EXIT_ERROR)
        }
    }
}

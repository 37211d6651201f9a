mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use commands::Violation;
use config::UsageError;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Violation>().is_some() {
        EXIT_VIOLATION
    } else if err.downcast_ref::<UsageError>().is_some() {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}

fn run() -> Result<(), anyhow::Error> {
    let cmd = Cli::command();
    let argv = config::preprocess(&cmd, std::env::args_os().collect())?;
    let matches = match cmd.clone().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind::*;
            let _ = e.print();
            return match e.kind() {
                DisplayHelp | DisplayVersion => Ok(()),
                _ => Err(UsageError(String::new()).into()),
            };
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| UsageError(e.to_string()))?;
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let manifest = config::manifest(&cmd, &matches);
    match cli.command {
        Command::Gen(a) => commands::gen(a, &manifest),
        Command::Train(a) => commands::train_cmd(a, &manifest),
        Command::Select(a) => commands::select_cmd(a, &manifest),
        Command::Eval(a) => commands::eval_cmd(a, &manifest),
        Command::VerifyTheory(a) => commands::theory_cmd(a, &manifest),
        Command::Mask(a) => commands::mask_cmd(a, &manifest),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

mod args;
mod commands;
mod config;
mod error;
mod io;

use args::{Cli, Command};
use clap::{CommandFactory, Parser};
use std::ffi::OsString;

fn main() {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.code());
        }
    };
    let cli = Cli::try_parse_from(&argv).unwrap_or_else(|e| parse_failure(e, &argv));
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Detect(a) => commands::detect(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Denoise(a) => commands::denoise_cmd(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}

/// Exits like clap does, adding the subcommand's usage line to errors that
/// clap reports without one (invalid values, for instance).
fn parse_failure(e: clap::Error, argv: &[OsString]) -> ! {
    let text = e.render().to_string();
    if !e.use_stderr() || text.contains("Usage:") {
        e.exit();
    }
    let mut cmd = Cli::command();
    cmd.build();
    let name = argv
        .iter()
        .skip(1)
        .filter_map(|a| a.to_str())
        .find(|a| cmd.find_subcommand(a).is_some())
        .map(str::to_owned);
    let usage = match name.and_then(|n| cmd.find_subcommand_mut(&n)) {
        Some(sub) => sub.render_usage(),
        None => cmd.render_usage(),
    };
    eprint!("{text}");
    eprintln!("\n{usage}");
    std::process::exit(2);
}

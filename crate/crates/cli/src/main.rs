mod args;
mod commands;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::RunConfig;
use config::resolve;
use error::CliResult;

fn resolve_command(command: Command) -> CliResult<Result<RunConfig, args::ReplayArgs>> {
    Ok(Ok(match command {
        Command::Synth(a) => RunConfig::Synth(resolve(a.common.config.as_deref(), &a)?),
        Command::Qrm(a) => RunConfig::Qrm(resolve(a.common.config.as_deref(), &a)?),
        Command::Train(a) => RunConfig::Train(resolve(a.common.config.as_deref(), &a)?),
        Command::Backtest(a) => RunConfig::Backtest(resolve(a.common.config.as_deref(), &a)?),
        Command::Fuse(a) => RunConfig::Fuse(resolve(a.common.config.as_deref(), &a)?),
        Command::Binomial(a) => RunConfig::Binomial(resolve(a.common.config.as_deref(), &a)?),
        Command::Replay(a) => return Ok(Err(a)),
    }))
}

fn main_inner() -> CliResult<()> {
    let cli = Cli::parse();
    match resolve_command(cli.command)? {
        Ok(config) => {
            let (outcome, _) = commands::run(&config)?;
            println!("{}", commands::render(&outcome.summary, config.format()));
        }
        Err(replay) => {
            let report = commands::replay(&replay.manifest, replay.out_dir)?;
            println!("{}", commands::render(&report, config::Format::Json));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

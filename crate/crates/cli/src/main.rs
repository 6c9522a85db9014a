mod args;
mod commands;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::{CliError, CliResult, ExitCategory};
use manifest::RunManifest;

fn dispatch(cli: &Cli, argv: &[String], nested: bool) -> CliResult<()> {
    match &cli.command {
        Command::Compress(a) => commands::cmd_compress(a, argv),
        Command::Decompress(a) => commands::cmd_decompress(a, argv),
        Command::Evaluate(a) => commands::cmd_evaluate(a, argv),
        Command::Sweep(a) => commands::cmd_sweep(a, argv),
        Command::Compare(a) => commands::cmd_compare(a, argv),
        Command::Info(a) => commands::cmd_info(a),
        Command::Replay(a) => {
            if nested {
                return Err(CliError::Usage("a manifest cannot replay another replay".into()));
            }
            let manifest = RunManifest::read(&a.manifest)?;
            let mut replay_argv = vec!["mpmqir".to_string()];
            replay_argv.extend(manifest.args.iter().cloned());
            let inner = Cli::try_parse_from(&replay_argv)
                .map_err(|e| CliError::Usage(format!("manifest arguments rejected: {e}")))?;
            dispatch(&inner, &manifest.args, true)
        }
    }
}

fn run() -> Result<(), (ExitCategory, String)> {
    let raw: Vec<String> = std::env::args().collect();
    let argv = config::expand_config(raw).map_err(|e| (e.category(), e.to_string()))?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err((ExitCategory::Usage, e.to_string().trim_end().to_string()));
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err((ExitCategory::Usage, "usage error: --jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| (ExitCategory::Usage, format!("usage error: {e}")))?;
    }
    dispatch(&cli, &argv[1..], false).map_err(|e| (e.category(), e.to_string()))
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((category, message)) => {
            eprintln!("mpmqir: {message}");
            category.into()
        }
    }
}

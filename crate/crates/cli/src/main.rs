use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use routebargain_cli::{execute, Cli, CliError};

fn emit(cli: &Cli, output: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, output).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(output.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROUTEBARGAIN_LOG", "error")).init();
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|report| {
        emit(&cli, &report.output)?;
        report.failure.map_or(Ok(()), Err)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use gasketlab::cli::{run, serve, Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve { port, host, catalog } => tokio::runtime::Runtime::new()
            .map_err(|e| gasketlab::ServiceError::Internal(e.to_string()))
            .and_then(|rt| rt.block_on(serve(&host, port, &catalog))),
        command => run(command, &mut std::io::stdout().lock()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::process::ExitCode;

use clap::Parser;

use ewcell_server::cli::{self, Cli, CliError, Command};

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate(args) => cli::simulate(&args),
        Command::Trace(args) => cli::trace(&args),
        Command::Slice(args) => cli::slice(&args),
        Command::Probe(args) => cli::probe(&args),
        Command::Serve(args) => {
            let shared = ewcell_server::open_session(args.cell.as_deref()).map_err(|e| CliError::Server(e.to_string()))?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Server(e.to_string()))?;
            runtime
                .block_on(ewcell_server::serve(shared, &args.host, args.port))
                .map_err(|e| CliError::Server(e.to_string()))?;
            Ok(String::new())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(out) => {
            if !out.is_empty() {
                println!("{out}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

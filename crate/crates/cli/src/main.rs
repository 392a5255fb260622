use std::process::ExitCode;

use clickspace_cli::{parse_args, run_and_write, CliError, Invocation};

fn main() -> ExitCode {
    match parse_args(std::env::args_os()).and_then(dispatch) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string();
            let category = e.category();
            let message = message
                .strip_prefix(&format!("{category} error: "))
                .or_else(|| message.strip_prefix("error: "))
                .unwrap_or(&message);
            eprintln!("error[{category}]: {}", message.trim_end());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(invocation: Invocation) -> Result<(), CliError> {
    match invocation {
        Invocation::Run(config) => run_and_write(&config),
        Invocation::PrintConfig(config) => {
            println!("{}", serde_json::to_string_pretty(&config)?);
            Ok(())
        }
        Invocation::Info(text) => {
            print!("{text}");
            Ok(())
        }
    }
}

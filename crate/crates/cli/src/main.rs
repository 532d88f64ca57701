use std::panic;
use std::process::ExitCode;

use clap::Parser;
use shadowfreq_cli::{run, Cli, EXIT_INTERNAL, EXIT_OK, EXIT_VALIDATION};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = panic::catch_unwind(|| run(&cli));
    let code = match result {
        Ok(Ok(outcome)) => {
            if cli.json {
                print!("{}", outcome.json);
            } else {
                print!("{}", outcome.summary);
            }
            outcome.code
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.code
        }
        Err(_) => EXIT_INTERNAL,
    };
    ExitCode::from(code as u8)
}

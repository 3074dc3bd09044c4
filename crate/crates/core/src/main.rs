use std::process::ExitCode;

use clap::Parser;
use crystal_spectra::cli::{configure_threads, exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not failures
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads().and_then(|()| run(&cli)) {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e) as u8);
    }
    ExitCode::SUCCESS
}

use std::process::ExitCode;

use amemnet_cli::{configure_threads, run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    // Bad flags: clap prints usage and exits with status 2.
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use hetnet_lab::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(out) => {
            eprintln!("wrote {} and {}", out.csv.display(), out.meta.display());
            for f in out.extra {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

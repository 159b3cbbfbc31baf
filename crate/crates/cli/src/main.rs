mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use run::Outcome;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run::run(cli) {
        Ok(Outcome::Complete(paths)) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Ok(Outcome::Partial(paths, msg)) => {
            for p in paths {
                println!("{}", p.display());
            }
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

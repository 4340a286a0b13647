use std::process::ExitCode;

use clap::Parser;
use dqm_cli::{run, Cli, RunConfig};

fn main() -> ExitCode {
    let outcome = RunConfig::from_cli(Cli::parse()).and_then(|cfg| run(&cfg));
    let verdict = outcome.and_then(|o| {
        for m in &o.messages {
            println!("{m}");
        }
        println!("wrote {}", o.path.display());
        o.verdict()
    });
    match verdict {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use gfm_cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}

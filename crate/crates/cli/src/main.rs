//! `cutcd`: synthetic data, fitting, benchmark sweeps and evaluation.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.

mod args;
mod bench;
mod eval;
mod fail;
mod fit;
mod synth;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CUTCD_LOG", "error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth::run(&a),
        Command::Fit(a) => fit::run(&a),
        Command::Bench(a) => bench::run(&a),
        Command::Eval(a) => eval::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

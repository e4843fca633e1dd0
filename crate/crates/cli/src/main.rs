use std::process::ExitCode;

use clap::Parser;
use uncq_cli::args::{Cli, Sub};
use uncq_cli::{rerun, run, CliError, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Sub::Rerun { manifest, out, jobs } => rerun(&manifest, out, jobs),
        other => {
            let (command, args) = match other {
                Sub::PiEval(a) => (Command::PiEval, a),
                Sub::OodEval(a) => (Command::OodEval, a),
                Sub::VerifyTheorem1(a) => (Command::VerifyTheorem1, a),
                Sub::Causal(a) => (Command::Causal, a),
                Sub::Synth(a) => (Command::Synth, a),
                Sub::Classify(a) => (Command::Classify, a),
                Sub::Rerun { .. } => unreachable!(),
            };
            args.into_config(command).and_then(|cfg| run(&cfg))
        }
    };
    match outcome {
        Ok(manifest) => {
            log::info!("done in {:.1}s", manifest.wall_time_secs);
            ExitCode::SUCCESS
        }
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

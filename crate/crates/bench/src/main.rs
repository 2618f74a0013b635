use std::process::ExitCode;

use bads_bench::{run_benchmark, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.into_config().and_then(|config| run_benchmark(&config).map(|r| (config, r))) {
        Ok((config, results)) => {
            eprintln!("{} runs written to {}", results.len(), config.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bads-bench: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

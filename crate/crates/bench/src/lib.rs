//! Benchmark harness for the `bads` optimizer: test problems, seeded batch
//! runs with an optional poll-only ablation, and CSV/JSONL output.

pub mod config;
pub mod functions;
pub mod runner;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{Ablation, BenchConfig, Cli};
pub use functions::{ProblemKind, TestProblem};
pub use runner::{run_benchmark, run_cell, run_cells, Cell, CellResult};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("run failed for {problem} seed {seed}: {message}")]
    Run { problem: &'static str, seed: u64, message: String },
}

impl BenchError {
    /// Process exit code: 2 for configuration, 3 for I/O, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Io { .. } => 3,
            BenchError::Run { .. } => 1,
        }
    }
}

//! Cell execution and output files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use bads::{optimize, OptimizationResult, OptimizeError, Options, ProblemSpec, Stage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Ablation, BenchConfig};
use crate::functions::TestProblem;
use crate::BenchError;

/// One (problem, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub problem: TestProblem,
    pub seed: u64,
    pub max_evals: Option<usize>,
    pub ablation: Ablation,
    pub kappa: f64,
}

impl Cell {
    pub fn new(problem: TestProblem, seed: u64) -> Self {
        Self { problem, seed, max_evals: None, ablation: Ablation::None, kappa: 2.0 }
    }

    pub fn options(&self) -> Options {
        let mut o = Options { kappa: self.kappa, max_evaluations: self.max_evals, ..Options::default() }.with_seed(self.seed);
        if self.ablation == Ablation::PollOnly {
            o = o.poll_only();
        }
        o
    }

    pub fn trace_file_name(&self) -> String {
        let suffix = match self.ablation {
            Ablation::None => "",
            Ablation::PollOnly => "_poll-only",
        };
        format!("{}_d{}_seed{}{suffix}.csv", self.problem.kind, self.problem.dim, self.seed)
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub result: OptimizationResult,
    pub wall: Duration,
}

/// Runs one cell. Observation noise comes from its own stream of the
/// cell seed, separate from the optimizer's.
pub fn run_cell(cell: &Cell) -> Result<CellResult, BenchError> {
    let problem = &cell.problem;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cell.seed);
    noise_rng.set_stream(1);
    let objective = |x: &[f64]| problem.observe(x, &mut noise_rng);
    let run_error = |e: String| BenchError::Run { problem: problem.kind.name(), seed: cell.seed, message: e };
    let mut spec = ProblemSpec::new(objective, problem.x0.clone(), problem.lower_bounds.clone(), problem.upper_bounds.clone());
    if problem.is_noisy() {
        spec = spec.with_noise(Some(problem.noise_sd));
    }
    let mut validated = spec.validate().map_err(|e| run_error(e.to_string()))?;
    let start = Instant::now();
    let result = optimize(&mut validated, &cell.options()).map_err(|e| match e {
        OptimizeError::InvalidOptions(e) => BenchError::Config(e.to_string()),
        other => run_error(other.to_string()),
    })?;
    Ok(CellResult { cell: cell.clone(), result, wall: start.elapsed() })
}

/// Runs the cells in order, on the rayon pool when `parallel` is enabled.
/// Results come back in cell order either way.
pub fn run_cells(cells: &[Cell]) -> Vec<Result<CellResult, BenchError>> {
    #[cfg(feature = "parallel")]
    {
        run_cells_parallel(cells)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_cells_sequential(cells)
    }
}

pub fn run_cells_sequential(cells: &[Cell]) -> Vec<Result<CellResult, BenchError>> {
    cells.iter().map(run_cell).collect()
}

#[cfg(feature = "parallel")]
pub fn run_cells_parallel(cells: &[Cell]) -> Vec<Result<CellResult, BenchError>> {
    use rayon::prelude::*;
    cells.par_iter().map(run_cell).collect()
}

/// Shortest text that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Trace CSV: one row per iteration.
pub fn trace_csv(result: &OptimizationResult, dim: usize) -> String {
    let mut out = String::from("iteration,evals,stage,poll_size,f_best");
    for d in 1..=dim {
        let _ = write!(out, ",x_{d}");
    }
    out.push('\n');
    for row in &result.trace {
        let stage = if row.stage == Stage::Search { "search" } else { "poll" };
        let _ = write!(out, "{},{},{stage},{},{}", row.iteration, row.evaluations, fmt_f64(row.poll_size), fmt_f64(row.f_best));
        for x in &row.x_best {
            let _ = write!(out, ",{}", fmt_f64(*x));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    problem: &'a str,
    dim: usize,
    seed: u64,
    f_best: f64,
    f_sd: f64,
    evals: usize,
    iters: usize,
    reason: &'a str,
    wall_ms: Option<f64>,
}

/// One JSON object, no trailing newline.
pub fn summary_line(cell: &CellResult, timing: bool) -> String {
    let r = &cell.result;
    let row = SummaryRow {
        problem: cell.cell.problem.kind.name(),
        dim: cell.cell.problem.dim,
        seed: cell.cell.seed,
        f_best: r.f_best,
        f_sd: r.f_sd,
        evals: r.total_evaluations,
        iters: r.total_iterations,
        reason: r.termination_reason.as_str(),
        wall_ms: timing.then_some(cell.wall.as_secs_f64() * 1e3),
    };
    serde_json::to_string(&row).expect("summary rows serialize")
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

pub fn cells_for(config: &BenchConfig) -> Result<Vec<Cell>, BenchError> {
    let mut cells = Vec::new();
    for &kind in &config.problems {
        let problem = TestProblem::new(kind, config.dim, config.noise_sd).map_err(BenchError::Config)?;
        for &seed in &config.seeds {
            cells.push(Cell {
                problem: problem.clone(),
                seed,
                max_evals: config.max_evals,
                ablation: config.ablation,
                kappa: config.kappa,
            });
        }
    }
    Ok(cells)
}

pub const SUMMARY_FILE: &str = "summary.jsonl";

/// Runs every cell, writes one trace per cell and the summary, and returns
/// the results in (problem, seed) order.
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<CellResult>, BenchError> {
    config.validate().map_err(BenchError::Config)?;
    let cells = cells_for(config)?;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BenchError::Io { path, source }
    };
    fs::create_dir_all(&config.out_dir).map_err(io_err(&config.out_dir))?;
    let results = run_cells(&cells).into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut summary = String::new();
    for r in &results {
        let path = config.out_dir.join(r.cell.trace_file_name());
        write_atomic(&path, &trace_csv(&r.result, r.cell.problem.dim)).map_err(io_err(&path))?;
        summary.push_str(&summary_line(r, config.timing));
        summary.push('\n');
    }
    let path = config.out_dir.join(SUMMARY_FILE);
    write_atomic(&path, &summary).map_err(io_err(&path))?;
    Ok(results)
}

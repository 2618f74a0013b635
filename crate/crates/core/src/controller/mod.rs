//! The optimization loop: search/poll alternation, evaluation log,
//! incumbent management, noisy-target reassessment, and termination.

mod context;
mod options;

pub use context::RunContext;
pub use options::{Options, OptionsError, Settings};

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mesh::run_poll;
use crate::mesh::StepOutcome;
use crate::problem::{Objective, ObjectiveError, SearchSpace, ValidatedProblem};
use crate::search::run_search;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Initial,
    Poll,
    Search,
    Reassess,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Initial => "initial",
            Stage::Poll => "poll",
            Stage::Search => "search",
            Stage::Reassess => "reassess",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One call of the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub index: usize,
    pub unit_point: Vec<f64>,
    pub original_point: Vec<f64>,
    /// Raw returned value, possibly non-finite.
    pub value: f64,
    /// Set when `value` is NaN or infinite.
    pub failed: bool,
    pub noise_sd: Option<f64>,
    pub stage: Stage,
    pub iteration: usize,
}

impl EvaluationRecord {
    /// Value used in comparisons: failed evaluations rank as `+inf`.
    pub fn effective_value(&self) -> f64 {
        if self.failed {
            f64::INFINITY
        } else {
            self.value
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    /// History index of the record at the incumbent point.
    pub record: usize,
    pub unit_point: Vec<f64>,
    pub observed_value: f64,
    /// Posterior mean for noisy targets, the observed value otherwise.
    pub estimated_value: f64,
    pub estimated_sd: f64,
}

impl Incumbent {
    fn placeholder(dim: usize) -> Self {
        Self {
            record: usize::MAX,
            unit_point: vec![f64::NAN; dim],
            observed_value: f64::INFINITY,
            estimated_value: f64::INFINITY,
            estimated_sd: 0.0,
        }
    }

    pub fn unit_point(&self) -> &[f64] {
        &self.unit_point
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminationReason {
    MeshTolerance,
    MaxEvaluations,
    MaxIterations,
    Stalled,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::MeshTolerance => "MeshTolerance",
            TerminationReason::MaxEvaluations => "MaxEvaluations",
            TerminationReason::MaxIterations => "MaxIterations",
            TerminationReason::Stalled => "Stalled",
        }
    }
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// State at the end of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSummary {
    pub iteration: usize,
    pub evaluations: usize,
    /// `Search` when a search step moved the incumbent, `Poll` otherwise.
    pub stage: Stage,
    pub poll_size: f64,
    pub f_best: f64,
    pub x_best: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub f_sd: f64,
    pub total_evaluations: usize,
    pub total_iterations: usize,
    pub termination_reason: TerminationReason,
    pub trace: Vec<IterationSummary>,
    pub history: Vec<EvaluationRecord>,
    pub seed: u64,
}

/// Evaluations and trace gathered before a run was aborted.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialRun {
    pub trace: Vec<IterationSummary>,
    pub history: Vec<EvaluationRecord>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("evaluation budget exhausted")]
    BudgetExhausted,
    #[error("objective failed: {0}")]
    ObjectiveRaised(ObjectiveError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    InvalidOptions(#[from] OptionsError),
    #[error("objective failed after {} evaluations: {error}", partial.history.len())]
    ObjectiveRaised { error: ObjectiveError, partial: Box<PartialRun> },
}

/// Termination test, in priority order: evaluation budget, iteration
/// budget, poll size below tolerance, stall.
pub fn check_termination(
    settings: &Settings,
    evaluations: usize,
    iterations: usize,
    poll_size: f64,
    stall_count: usize,
) -> Option<TerminationReason> {
    if evaluations >= settings.max_evaluations {
        Some(TerminationReason::MaxEvaluations)
    } else if iterations >= settings.max_iterations {
        Some(TerminationReason::MaxIterations)
    } else if poll_size < settings.poll_size_min {
        Some(TerminationReason::MeshTolerance)
    } else if stall_count >= settings.stall_iterations {
        Some(TerminationReason::Stalled)
    } else {
        None
    }
}

/// True when `new` is better than `old` by more than `tol` relative.
pub(crate) fn meaningful_improvement(old: f64, new: f64, tol: f64) -> bool {
    if old == f64::INFINITY {
        return new < f64::INFINITY;
    }
    old - new > tol * old.abs().max(f64::MIN_POSITIVE)
}

/// Among `(index, posterior mean, posterior sd)` candidates, the one with the
/// lowest mean whose gap below the incumbent exceeds `threshold` combined sds.
pub fn relocation_target(
    incumbent_mean: f64,
    incumbent_sd: f64,
    candidates: impl IntoIterator<Item = (usize, f64, f64)>,
    threshold: f64,
) -> Option<(usize, f64, f64)> {
    candidates
        .into_iter()
        .filter(|&(_, mean, sd)| incumbent_mean - mean > threshold * (sd * sd + incumbent_sd * incumbent_sd).sqrt())
        .fold(None, |best: Option<(usize, f64, f64)>, c| match best {
            Some(b) if b.1 <= c.1 => Some(b),
            _ => Some(c),
        })
}

/// Runs the optimizer on a validated problem.
pub fn optimize<F: Objective>(
    problem: &mut ValidatedProblem<F>,
    options: &Options,
) -> Result<OptimizationResult, OptimizeError> {
    let settings = options.resolve(problem.dim())?;
    let space = problem.space().clone();
    let x0 = problem.x0().to_vec();
    let noisy = problem.is_noisy();
    let hint = problem.noise_scale_hint();
    let mut run = Run {
        ctx: RunContext::new(
            &space,
            &mut problem.objective,
            &settings,
            noisy,
            hint,
            ChaCha8Rng::seed_from_u64(settings.seed),
        ),
        trace: Vec::new(),
        stall_count: 0,
        last_reassess: 0,
        x0: x0.clone(),
    };
    match run.execute(&space, &x0) {
        Ok(reason) => Ok(run.finish(reason)),
        Err(error) => Err(OptimizeError::ObjectiveRaised {
            error,
            partial: Box::new(PartialRun { trace: run.trace, history: run.ctx.history }),
        }),
    }
}

struct Run<'a, F> {
    ctx: RunContext<'a, F>,
    trace: Vec<IterationSummary>,
    stall_count: usize,
    /// Iteration of the last incumbent re-measurement (noisy targets).
    last_reassess: usize,
    x0: Vec<f64>,
}

/// Turns budget exhaustion into a termination and keeps objective failures.
fn budget_stop<T>(r: Result<T, EvalError>) -> Result<Option<T>, ObjectiveError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(EvalError::BudgetExhausted) => Ok(None),
        Err(EvalError::ObjectiveRaised(e)) => Err(e),
    }
}

impl<'a, F: Objective> Run<'a, F> {
    fn uses_model(&self) -> bool {
        self.ctx.settings.search_enabled || self.ctx.noisy
    }

    fn execute(&mut self, space: &SearchSpace, x0: &[f64]) -> Result<TerminationReason, ObjectiveError> {
        let start = space.to_unit(x0).expect("validated start point").0;
        if let Some(index) = budget_stop(self.ctx.evaluate(start, Stage::Initial))? {
            self.ctx.accept(index);
        }

        loop {
            if let Some(reason) = self.termination() {
                return Ok(reason);
            }
            self.ctx.iteration += 1;
            let best_before = self.ctx.incumbent.estimated_value;
            let poll_before = self.ctx.mesh.poll_size();
            let completed = self.iterate()?;
            self.record_iteration(best_before, poll_before, completed.unwrap_or(false));
            if completed.is_none() {
                return Ok(TerminationReason::MaxEvaluations);
            }
        }
    }

    fn termination(&self) -> Option<TerminationReason> {
        check_termination(
            self.ctx.settings,
            self.ctx.history.len(),
            self.ctx.iteration,
            self.ctx.mesh.poll_size(),
            self.stall_count,
        )
    }

    /// One search series, one poll pass, refit, reassessment. Returns
    /// whether the search moved the incumbent, or `None` if the budget ran
    /// out mid-iteration.
    fn iterate(&mut self) -> Result<Option<bool>, ObjectiveError> {
        let mut search_improved = false;
        if self.ctx.settings.search_enabled {
            // The failure streak carries over between iterations, so after a
            // failed series the search stays idle until a poll success.
            while self.ctx.search.consecutive_failures < self.ctx.settings.search_fail_switch {
                let Some(outcome) = budget_stop(run_search(&mut self.ctx))? else {
                    return Ok(None);
                };
                if outcome.evals_used == 0 {
                    break;
                }
                if outcome.improved {
                    search_improved = true;
                    self.ctx.mesh.update(StepOutcome::Success);
                }
                self.ctx.refresh_model();
            }
        }

        match budget_stop(run_poll(&mut self.ctx))? {
            None => return Ok(None),
            Some(poll) if poll.improved => self.ctx.search.consecutive_failures = 0,
            Some(_) => {}
        }

        if self.uses_model() {
            let full = self.ctx.iteration.is_multiple_of(self.ctx.settings.full_refit_interval);
            self.ctx.refit_model(full);
        }
        if self.ctx.noisy && budget_stop(self.reassess())?.is_none() {
            return Ok(None);
        }
        Ok(Some(search_improved))
    }

    /// Noisy targets: refresh the incumbent estimate, periodically
    /// re-measure it, and relocate if another point is clearly better.
    fn reassess(&mut self) -> Result<(), EvalError> {
        if self.ctx.model.is_none() {
            return Ok(());
        }
        self.ctx.estimate_incumbent();
        if self.ctx.iteration - self.last_reassess >= self.ctx.settings.reassess_interval {
            self.remeasure()?;
        }
        self.relocate();
        Ok(())
    }

    fn remeasure(&mut self) -> Result<(), EvalError> {
        self.last_reassess = self.ctx.iteration;
        let point = self.ctx.incumbent.unit_point.clone();
        self.ctx.evaluate(point, Stage::Reassess)?;
        self.ctx.refresh_model();
        self.ctx.estimate_incumbent();
        Ok(())
    }

    fn relocate(&mut self) {
        let Some(model) = &self.ctx.model else { return };
        let inc = &self.ctx.incumbent;
        let others = self
            .ctx
            .model_subset
            .iter()
            .filter(|&&i| self.ctx.history[i].unit_point != inc.unit_point)
            .map(|&i| {
                let (mean, sd) = model.predict(&self.ctx.history[i].unit_point);
                (i, mean, sd)
            });
        let target = relocation_target(
            inc.estimated_value,
            inc.estimated_sd,
            others,
            self.ctx.settings.relocation_threshold,
        );
        if let Some((i, mean, sd)) = target {
            let record = &self.ctx.history[i];
            self.ctx.incumbent = Incumbent {
                record: i,
                unit_point: record.unit_point.clone(),
                observed_value: record.value,
                estimated_value: mean,
                estimated_sd: sd,
            };
        }
    }

    fn record_iteration(&mut self, best_before: f64, poll_before: f64, search_improved: bool) {
        let best_after = self.ctx.incumbent.estimated_value;
        let refined = self.ctx.mesh.poll_size() < poll_before;
        if meaningful_improvement(best_before, best_after, self.ctx.settings.stall_tolerance) || refined {
            self.stall_count = 0;
        } else {
            self.stall_count += 1;
        }
        self.trace.push(IterationSummary {
            iteration: self.ctx.iteration,
            evaluations: self.ctx.history.len(),
            stage: if search_improved { Stage::Search } else { Stage::Poll },
            poll_size: self.ctx.mesh.poll_size(),
            f_best: best_after,
            x_best: self.ctx.space.from_unit(&self.ctx.incumbent.unit_point),
        });
    }

    /// Noisy targets: re-measure a stale incumbent if budget allows, then
    /// report the posterior-mean minimizer over the local training set.
    fn finalize_noisy(&mut self) {
        if self.ctx.history.is_empty() {
            return;
        }
        let stale = self.ctx.iteration - self.last_reassess >= self.ctx.settings.reassess_interval;
        if stale && self.ctx.budget_left() > 0 {
            let point = self.ctx.incumbent.unit_point.clone();
            // The objective already succeeded at this point; a late failure is dropped.
            let _ = self.ctx.evaluate(point, Stage::Reassess);
        }
        self.ctx.refit_model(false);
        if self.ctx.model.is_none() {
            return;
        }
        self.ctx.estimate_incumbent();
        let Some(model) = &self.ctx.model else { return };
        let mut best = (self.ctx.incumbent.record, self.ctx.incumbent.estimated_value, self.ctx.incumbent.estimated_sd);
        for &i in &self.ctx.model_subset {
            let (mean, sd) = model.predict(&self.ctx.history[i].unit_point);
            if mean < best.1 {
                best = (i, mean, sd);
            }
        }
        let record = &self.ctx.history[best.0];
        self.ctx.incumbent = Incumbent {
            record: best.0,
            unit_point: record.unit_point.clone(),
            observed_value: record.value,
            estimated_value: best.1,
            estimated_sd: best.2,
        };
    }

    fn finish(mut self, reason: TerminationReason) -> OptimizationResult {
        if self.ctx.noisy {
            self.finalize_noisy();
        }
        let inc = &self.ctx.incumbent;
        let x_best = if inc.record == usize::MAX {
            self.x0.clone()
        } else {
            self.ctx.history[inc.record].original_point.clone()
        };
        OptimizationResult {
            x_best,
            f_best: inc.estimated_value,
            f_sd: if self.ctx.noisy { inc.estimated_sd } else { 0.0 },
            total_evaluations: self.ctx.history.len(),
            total_iterations: self.trace.len(),
            termination_reason: reason,
            trace: self.trace,
            history: self.ctx.history,
            seed: self.ctx.settings.seed,
        }
    }
}

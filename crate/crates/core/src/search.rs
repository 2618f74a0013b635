//! Surrogate search stage: a Gaussian cloud of mesh points around the
//! incumbent, scored by the lower confidence bound of the GP.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::controller::{meaningful_improvement, EvalError, RunContext, Stage};
use crate::gp::GpModel;
use crate::mesh::{snap_to_mesh, MeshState};
use crate::points::PointSet;
use crate::problem::{Objective, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchState {
    pub consecutive_failures: u32,
    /// Cloud sd in multiples of the poll size.
    pub radius_scale: f64,
    pub candidates_per_proposal: usize,
}

impl Default for SearchState {
    fn default() -> Self {
        Self { consecutive_failures: 0, radius_scale: 1.0, candidates_per_proposal: 512 }
    }
}

/// Lower confidence bound `mean − κ·sd`.
#[inline]
pub fn lcb(mean: f64, sd: f64, kappa: f64) -> f64 {
    mean - kappa * sd
}

/// Draws `candidates_per_proposal` points from `N(incumbent, (r·poll_size)² I)`,
/// snaps them to the mesh, clamps them to the bounds, and drops points
/// already evaluated or repeated within the batch.
pub fn propose_candidates<R: Rng + ?Sized>(
    incumbent: &[f64],
    mesh: &MeshState,
    state: &SearchState,
    space: &SearchSpace,
    evaluated: &PointSet,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let sd = state.radius_scale * mesh.poll_size();
    let mut fresh = PointSet::new();
    let mut out = Vec::new();
    let mut step = vec![0.0; incumbent.len()];
    for _ in 0..state.candidates_per_proposal {
        for s in step.iter_mut() {
            *s = sd * rng.sample::<f64, _>(StandardNormal);
        }
        let mut c = snap_to_mesh(incumbent, &step, mesh.mesh_size());
        space.clamp_unit(&mut c);
        if evaluated.contains(&c) || fresh.contains(&c) {
            continue;
        }
        fresh.insert(&c);
        out.push(c);
    }
    out
}

pub fn score_candidates_sequential(model: &GpModel, candidates: &[Vec<f64>], kappa: f64) -> Vec<f64> {
    candidates
        .iter()
        .map(|c| {
            let (m, s) = model.predict(c);
            lcb(m, s, kappa)
        })
        .collect()
}

#[cfg(feature = "parallel")]
pub fn score_candidates_parallel(model: &GpModel, candidates: &[Vec<f64>], kappa: f64) -> Vec<f64> {
    use rayon::prelude::*;
    candidates
        .par_iter()
        .map(|c| {
            let (m, s) = model.predict(c);
            lcb(m, s, kappa)
        })
        .collect()
}

/// LCB score of every candidate, in candidate order. Uses rayon when the
/// `parallel` feature is on; results are identical either way.
pub fn score_candidates(model: &GpModel, candidates: &[Vec<f64>], kappa: f64) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    {
        score_candidates_parallel(model, candidates, kappa)
    }
    #[cfg(not(feature = "parallel"))]
    {
        score_candidates_sequential(model, candidates, kappa)
    }
}

/// Index of the smallest score, lowest index on ties. NaN scores lose.
pub fn argmin(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOutcome {
    pub improved: bool,
    pub evals_used: usize,
}

/// One search step: evaluate the LCB minimizer of a fresh proposal.
/// `improved` is set only for a gain above the stall tolerance.
/// Skipped without a surrogate or when every proposal was a duplicate.
pub fn run_search<F: Objective>(ctx: &mut RunContext<'_, F>) -> Result<SearchOutcome, EvalError> {
    let skipped = SearchOutcome { improved: false, evals_used: 0 };
    let Some(model) = ctx.model.as_ref() else {
        return Ok(skipped);
    };
    let candidates = propose_candidates(
        ctx.incumbent.unit_point(),
        &ctx.mesh,
        &ctx.search,
        ctx.space,
        &ctx.seen,
        &mut ctx.rng,
    );
    let scores = score_candidates(model, &candidates, ctx.settings.kappa);
    let Some(best) = argmin(&scores) else {
        return Ok(skipped);
    };
    let chosen = candidates.into_iter().nth(best).expect("argmin in range");
    let before = ctx.incumbent.estimated_value;
    let record = ctx.evaluate(chosen, Stage::Search)?;
    let mut improved = false;
    if ctx.is_improvement(record) {
        ctx.accept(record);
        // A negligible gain still moves the incumbent but counts as a failure,
        // so a flat-but-tilted target cannot keep the search going forever.
        improved = meaningful_improvement(before, ctx.incumbent.estimated_value, ctx.settings.stall_tolerance);
    }
    if improved {
        ctx.search.consecutive_failures = 0;
    } else {
        ctx.search.consecutive_failures += 1;
    }
    Ok(SearchOutcome { improved, evals_used: 1 })
}

//! Mesh state, poll directions, and the opportunistic poll stage.

use rand::Rng;

use crate::controller::{EvalError, RunContext, Stage};
use crate::gp::GpModel;
use crate::linalg::random_orthonormal_basis;
use crate::points::PointSet;
use crate::problem::{Objective, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Success,
    Failure,
}

/// Poll and mesh sizes in unit space, with success/failure streaks.
///
/// `mesh_size = min(poll_size, poll_size²)` always holds. Successes double
/// the poll size up to `poll_size_max`; failures halve it without a floor,
/// so the controller can observe it dropping below its tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshState {
    poll_size: f64,
    mesh_size: f64,
    poll_size_max: f64,
    pub consecutive_successes: u32,
    pub consecutive_failures: u32,
}

pub fn mesh_size_for(poll_size: f64) -> f64 {
    poll_size.min(poll_size * poll_size)
}

impl MeshState {
    pub fn new(poll_size: f64, poll_size_max: f64) -> Self {
        assert!(poll_size > 0.0 && poll_size <= poll_size_max, "poll size {poll_size} outside (0, {poll_size_max}]");
        Self {
            poll_size,
            mesh_size: mesh_size_for(poll_size),
            poll_size_max,
            consecutive_successes: 0,
            consecutive_failures: 0,
        }
    }

    pub fn poll_size(&self) -> f64 {
        self.poll_size
    }

    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn poll_size_max(&self) -> f64 {
        self.poll_size_max
    }

    pub fn update(&mut self, outcome: StepOutcome) {
        *self = update_poll_size(*self, outcome);
    }
}

pub fn update_poll_size(state: MeshState, outcome: StepOutcome) -> MeshState {
    let mut next = state;
    match outcome {
        StepOutcome::Success => {
            next.poll_size = (2.0 * state.poll_size).min(state.poll_size_max);
            next.consecutive_successes += 1;
            next.consecutive_failures = 0;
        }
        StepOutcome::Failure => {
            next.poll_size = state.poll_size / 2.0;
            next.consecutive_failures += 1;
            next.consecutive_successes = 0;
        }
    }
    next.mesh_size = mesh_size_for(next.poll_size);
    next
}

/// Unit-norm poll directions: an orthonormal basis followed by its negation.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    pub directions: Vec<Vec<f64>>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// `{q₁..q_D, −q₁..−q_D}` for a uniformly random rotation `Q`.
pub fn generate_directions<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DirectionSet {
    let basis = random_orthonormal_basis(dim, rng);
    let negated: Vec<Vec<f64>> = basis.iter().map(|q| q.iter().map(|v| -v).collect()).collect();
    DirectionSet { directions: basis.into_iter().chain(negated).collect() }
}

/// Rounds the step onto the lattice of spacing `mesh_size` anchored at `origin`.
pub fn snap_to_mesh(origin: &[f64], step: &[f64], mesh_size: f64) -> Vec<f64> {
    origin
        .iter()
        .zip(step)
        .map(|(o, s)| o + (s / mesh_size).round() * mesh_size)
        .collect()
}

/// Poll points `incumbent + poll_size·d`, snapped, clamped, and with
/// already-evaluated points (and repeats within the set) removed. Returned
/// in direction order.
pub fn poll_candidates(
    incumbent: &[f64],
    state: &MeshState,
    dirs: &DirectionSet,
    space: &SearchSpace,
    evaluated: &PointSet,
) -> Vec<Vec<f64>> {
    let mut fresh = PointSet::new();
    let mut out = Vec::with_capacity(dirs.len());
    for d in &dirs.directions {
        let step: Vec<f64> = d.iter().map(|v| v * state.poll_size).collect();
        let mut c = snap_to_mesh(incumbent, &step, state.mesh_size);
        space.clamp_unit(&mut c);
        if evaluated.contains(&c) || fresh.contains(&c) {
            continue;
        }
        fresh.insert(&c);
        out.push(c);
    }
    out
}

/// Stable sort by lower confidence bound under the surrogate.
pub fn rank_by_surrogate(candidates: &mut Vec<Vec<f64>>, model: &GpModel, kappa: f64) {
    let scores = crate::search::score_candidates(model, candidates, kappa);
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut taken: Vec<Option<Vec<f64>>> = candidates.drain(..).map(Some).collect();
    candidates.extend(order.into_iter().map(|i| taken[i].take().expect("each index once")));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PollOutcome {
    pub improved: bool,
    pub evals_used: usize,
}

/// One opportunistic poll pass. Stops at the first improving candidate;
/// the mesh is updated with the pass outcome.
pub fn run_poll<F: Objective>(ctx: &mut RunContext<'_, F>) -> Result<PollOutcome, EvalError> {
    let dirs = generate_directions(ctx.space.dim(), &mut ctx.rng);
    let mut candidates = poll_candidates(ctx.incumbent.unit_point(), &ctx.mesh, &dirs, ctx.space, &ctx.seen);
    if let Some(model) = ctx.model.as_ref() {
        rank_by_surrogate(&mut candidates, model, ctx.settings.kappa);
    }
    let mut evals_used = 0;
    for c in candidates {
        let record = ctx.evaluate(c, Stage::Poll)?;
        evals_used += 1;
        if ctx.is_improvement(record) {
            ctx.accept(record);
            ctx.mesh.update(StepOutcome::Success);
            return Ok(PollOutcome { improved: true, evals_used });
        }
    }
    ctx.mesh.update(StepOutcome::Failure);
    Ok(PollOutcome { improved: false, evals_used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> SearchSpace {
        ProblemSpec::new(|_: &[f64]| 0.0, vec![0.5, 0.5], vec![0.0, 0.0], vec![1.0, 1.0])
            .validate()
            .unwrap()
            .space()
            .clone()
    }

    fn axes() -> DirectionSet {
        DirectionSet {
            directions: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
        }
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn poll_size_update_examples() {
        let s = MeshState::new(0.1, 1.0);
        let up = update_poll_size(s, StepOutcome::Success);
        assert_eq!(up.poll_size(), 0.2);
        let down = update_poll_size(s, StepOutcome::Failure);
        assert_eq!(down.poll_size(), 0.05);
        assert!((down.mesh_size() - 0.0025).abs() < 1e-15);
        assert_eq!(down.consecutive_failures, 1);
        assert_eq!(update_poll_size(MeshState::new(0.8, 1.0), StepOutcome::Success).poll_size(), 1.0);
        let again = update_poll_size(down, StepOutcome::Success);
        assert_eq!((again.consecutive_successes, again.consecutive_failures), (1, 0));
    }

    #[test]
    fn one_dimensional_directions_are_plus_minus_one() {
        let d = generate_directions(1, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(d.len(), 2);
        assert!((d.directions[0][0].abs() - 1.0).abs() < 1e-15);
        assert_eq!(d.directions[1][0], -d.directions[0][0]);
    }

    #[test]
    fn axis_poll_and_clamp() {
        let space = unit_square();
        let state = MeshState::new(0.1, 1.0);
        let c = poll_candidates(&[0.5, 0.5], &state, &axes(), &space, &PointSet::new());
        assert_eq!(c.len(), 4);
        assert!(close(&c[0], &[0.6, 0.5]));

        let c = poll_candidates(&[0.95, 0.5], &state, &axes(), &space, &PointSet::new());
        assert!(close(&c[0], &[1.0, 0.5]));
    }

    #[test]
    fn evaluated_points_are_skipped() {
        let space = unit_square();
        let state = MeshState::new(0.1, 1.0);
        let mut seen = PointSet::new();
        let first = poll_candidates(&[0.5, 0.5], &state, &axes(), &space, &seen)[0].clone();
        seen.insert(&first);
        let c = poll_candidates(&[0.5, 0.5], &state, &axes(), &space, &seen);
        assert_eq!(c.len(), 3);
        assert!(c.iter().all(|p| !close(p, &[0.6, 0.5])));
    }

    #[test]
    fn candidates_lie_on_the_mesh() {
        let space = unit_square();
        let state = MeshState::new(0.25, 1.0);
        let dirs = generate_directions(2, &mut ChaCha8Rng::seed_from_u64(11));
        let inc = [0.4, 0.55];
        for c in poll_candidates(&inc, &state, &dirs, &space, &PointSet::new()) {
            for (ci, oi) in c.iter().zip(&inc) {
                let k = (ci - oi) / state.mesh_size();
                assert!((k - k.round()).abs() < 1e-9);
            }
        }
    }
}

//! Problem definition, validation, and the affine map between original
//! coordinates and the normalized unit space used by the optimizer.

use std::fmt;
use std::ops::Deref;

use thiserror::Error;

/// Absolute slack (scaled by the bound magnitude) within which a start
/// point outside the hard bounds is clamped instead of rejected.
const START_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("start point outside hard bounds at coordinate {index} (value {value})")]
    StartOutOfBounds { index: usize, value: f64 },
    #[error("point outside hard bounds at coordinate {index} (value {value})")]
    OutOfBounds { index: usize, value: f64 },
    #[error("invalid noise scale hint {0}")]
    InvalidNoiseHint(f64),
}

/// One objective evaluation as returned by user code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    /// Per-evaluation observation noise standard deviation, if the objective
    /// can estimate it.
    pub noise_sd: Option<f64>,
}

impl From<f64> for ObjectiveValue {
    fn from(value: f64) -> Self {
        Self { value, noise_sd: None }
    }
}

impl From<(f64, f64)> for ObjectiveValue {
    fn from((value, sd): (f64, f64)) -> Self {
        Self { value, noise_sd: Some(sd) }
    }
}

/// A failure raised by the user objective. Aborts the run.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct ObjectiveError(pub String);

/// Conversion from whatever a user closure returns into an evaluation result.
pub trait IntoObjectiveResult {
    fn into_objective_result(self) -> Result<ObjectiveValue, ObjectiveError>;
}

impl IntoObjectiveResult for f64 {
    fn into_objective_result(self) -> Result<ObjectiveValue, ObjectiveError> {
        Ok(self.into())
    }
}

impl IntoObjectiveResult for (f64, f64) {
    fn into_objective_result(self) -> Result<ObjectiveValue, ObjectiveError> {
        Ok(self.into())
    }
}

impl IntoObjectiveResult for ObjectiveValue {
    fn into_objective_result(self) -> Result<ObjectiveValue, ObjectiveError> {
        Ok(self)
    }
}

impl<T: Into<ObjectiveValue>, E: fmt::Display> IntoObjectiveResult for Result<T, E> {
    fn into_objective_result(self) -> Result<ObjectiveValue, ObjectiveError> {
        self.map(Into::into).map_err(|e| ObjectiveError(e.to_string()))
    }
}

/// Black-box objective, always called with a point in original units.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<ObjectiveValue, ObjectiveError>;
}

impl<F, O> Objective for F
where
    F: FnMut(&[f64]) -> O,
    O: IntoObjectiveResult,
{
    fn evaluate(&mut self, x: &[f64]) -> Result<ObjectiveValue, ObjectiveError> {
        self(x).into_objective_result()
    }
}

/// User-facing problem description. Unbounded coordinates use
/// `f64::NEG_INFINITY` / `f64::INFINITY` as hard bounds.
#[derive(Debug, Clone)]
pub struct ProblemSpec<F> {
    pub objective: F,
    pub dim: usize,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
    pub plausible_lower: Option<Vec<f64>>,
    pub plausible_upper: Option<Vec<f64>>,
    pub x0: Vec<f64>,
    pub noisy: bool,
    pub noise_scale_hint: Option<f64>,
}

impl<F> ProblemSpec<F> {
    /// Deterministic problem with hard bounds and no explicit plausible box.
    pub fn new(objective: F, x0: Vec<f64>, lower_bounds: Vec<f64>, upper_bounds: Vec<f64>) -> Self {
        Self {
            objective,
            dim: x0.len(),
            lower_bounds,
            upper_bounds,
            plausible_lower: None,
            plausible_upper: None,
            x0,
            noisy: false,
            noise_scale_hint: None,
        }
    }

    pub fn with_plausible_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.plausible_lower = Some(lower);
        self.plausible_upper = Some(upper);
        self
    }

    /// Marks the objective as noisy, optionally with a typical noise sd.
    pub fn with_noise(mut self, noise_scale_hint: Option<f64>) -> Self {
        self.noisy = true;
        self.noise_scale_hint = noise_scale_hint;
        self
    }

    pub fn validate(self) -> Result<ValidatedProblem<F>, ProblemError> {
        validate_spec(self)
    }
}

/// Normalized coordinates. Entries lie in `[0, 1]` on hard-bounded
/// dimensions; on unbounded ones the plausible interval maps to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPoint(pub Vec<f64>);

impl Deref for UnitPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for UnitPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Validated geometry of the problem: bounds and the unit-space transform.
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
    plausible_lower: Vec<f64>,
    plausible_upper: Vec<f64>,
    offset: Vec<f64>,
    scale: Vec<f64>,
    unit_lower: Vec<f64>,
    unit_upper: Vec<f64>,
}

impl SearchSpace {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    pub fn plausible_lower(&self) -> &[f64] {
        &self.plausible_lower
    }

    pub fn plausible_upper(&self) -> &[f64] {
        &self.plausible_upper
    }

    /// Unit-space lower limits (`0` on bounded dims, possibly `-inf`).
    pub fn unit_lower(&self) -> &[f64] {
        &self.unit_lower
    }

    pub fn unit_upper(&self) -> &[f64] {
        &self.unit_upper
    }

    pub fn to_unit(&self, x: &[f64]) -> Result<UnitPoint, ProblemError> {
        if x.len() != self.dim() {
            return Err(ProblemError::DimensionMismatch(format!(
                "point has {} coordinates, problem has {}",
                x.len(),
                self.dim()
            )));
        }
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                if xi.is_nan() || xi < self.lower[i] || xi > self.upper[i] {
                    Err(ProblemError::OutOfBounds { index: i, value: xi })
                } else {
                    Ok((xi - self.offset[i]) / self.scale[i])
                }
            })
            .collect::<Result<Vec<_>, _>>()
            .map(UnitPoint)
    }

    /// Inverse map. Unit coordinates beyond the hard bounds are clamped first.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.dim());
        u.iter()
            .enumerate()
            .map(|(i, &ui)| {
                let ui = ui.clamp(self.unit_lower[i], self.unit_upper[i]);
                (self.offset[i] + ui * self.scale[i]).clamp(self.lower[i], self.upper[i])
            })
            .collect()
    }

    /// Clamps a unit-space point onto the hard-bound box.
    pub fn clamp_unit(&self, u: &mut [f64]) {
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = ui.clamp(self.unit_lower[i], self.unit_upper[i]);
        }
    }

    /// True when the original-space point satisfies every hard bound.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(i, &xi)| xi >= self.lower[i] && xi <= self.upper[i])
    }
}

/// A problem that passed validation.
#[derive(Debug, Clone)]
pub struct ValidatedProblem<F> {
    pub objective: F,
    space: SearchSpace,
    x0: Vec<f64>,
    noisy: bool,
    noise_scale_hint: Option<f64>,
}

impl<F> ValidatedProblem<F> {
    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn is_noisy(&self) -> bool {
        self.noisy
    }

    pub fn noise_scale_hint(&self) -> Option<f64> {
        self.noise_scale_hint
    }

    pub fn to_unit(&self, x: &[f64]) -> Result<UnitPoint, ProblemError> {
        self.space.to_unit(x)
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.space.from_unit(u)
    }

    /// Replaces the objective while keeping the validated geometry.
    pub fn with_objective<G>(self, objective: G) -> ValidatedProblem<G> {
        ValidatedProblem {
            objective,
            space: self.space,
            x0: self.x0,
            noisy: self.noisy,
            noise_scale_hint: self.noise_scale_hint,
        }
    }
}

fn check_len(name: &str, v: &[f64], dim: usize) -> Result<(), ProblemError> {
    if v.len() == dim {
        Ok(())
    } else {
        Err(ProblemError::DimensionMismatch(format!(
            "{name} has {} entries, expected {dim}",
            v.len()
        )))
    }
}

pub fn validate_spec<F>(spec: ProblemSpec<F>) -> Result<ValidatedProblem<F>, ProblemError> {
    let dim = spec.dim;
    if dim == 0 {
        return Err(ProblemError::DimensionMismatch("dimension must be at least 1".into()));
    }
    check_len("lower_bounds", &spec.lower_bounds, dim)?;
    check_len("upper_bounds", &spec.upper_bounds, dim)?;
    check_len("x0", &spec.x0, dim)?;

    for i in 0..dim {
        let (lb, ub) = (spec.lower_bounds[i], spec.upper_bounds[i]);
        if lb.is_nan() || ub.is_nan() || lb == f64::INFINITY || ub == f64::NEG_INFINITY {
            return Err(ProblemError::InvalidBounds(format!("coordinate {i}: [{lb}, {ub}]")));
        }
        if lb >= ub {
            return Err(ProblemError::InvalidBounds(format!(
                "coordinate {i}: lower {lb} must be below upper {ub}"
            )));
        }
    }

    let (plausible_lower, plausible_upper) = match (spec.plausible_lower, spec.plausible_upper) {
        (Some(pl), Some(pu)) => {
            check_len("plausible_lower", &pl, dim)?;
            check_len("plausible_upper", &pu, dim)?;
            (pl, pu)
        }
        (None, None) => {
            if let Some(i) = (0..dim)
                .find(|&i| !spec.lower_bounds[i].is_finite() || !spec.upper_bounds[i].is_finite())
            {
                return Err(ProblemError::InvalidBounds(format!(
                    "coordinate {i} is unbounded and no plausible bounds were given"
                )));
            }
            (spec.lower_bounds.clone(), spec.upper_bounds.clone())
        }
        _ => {
            return Err(ProblemError::InvalidBounds(
                "plausible lower and upper bounds must be given together".into(),
            ))
        }
    };
    for i in 0..dim {
        let (lb, ub) = (spec.lower_bounds[i], spec.upper_bounds[i]);
        let (pl, pu) = (plausible_lower[i], plausible_upper[i]);
        let ordered = pl.is_finite() && pu.is_finite() && lb <= pl && pl < pu && pu <= ub;
        if !ordered {
            return Err(ProblemError::InvalidBounds(format!(
                "coordinate {i}: plausible [{pl}, {pu}] not inside hard [{lb}, {ub}]"
            )));
        }
    }

    let mut x0 = spec.x0;
    for (i, xi) in x0.iter_mut().enumerate() {
        let (lb, ub) = (spec.lower_bounds[i], spec.upper_bounds[i]);
        if xi.is_nan() {
            return Err(ProblemError::StartOutOfBounds { index: i, value: *xi });
        }
        if *xi < lb {
            if lb - *xi <= START_CLAMP_TOL * lb.abs().max(1.0) {
                *xi = lb;
            } else {
                return Err(ProblemError::StartOutOfBounds { index: i, value: *xi });
            }
        } else if *xi > ub {
            if *xi - ub <= START_CLAMP_TOL * ub.abs().max(1.0) {
                *xi = ub;
            } else {
                return Err(ProblemError::StartOutOfBounds { index: i, value: *xi });
            }
        }
    }

    if let Some(h) = spec.noise_scale_hint {
        if !(h >= 0.0) || !h.is_finite() {
            return Err(ProblemError::InvalidNoiseHint(h));
        }
    }

    let mut offset = Vec::with_capacity(dim);
    let mut scale = Vec::with_capacity(dim);
    let mut unit_lower = Vec::with_capacity(dim);
    let mut unit_upper = Vec::with_capacity(dim);
    for i in 0..dim {
        let (lb, ub) = (spec.lower_bounds[i], spec.upper_bounds[i]);
        if lb.is_finite() && ub.is_finite() {
            offset.push(lb);
            scale.push(ub - lb);
            unit_lower.push(0.0);
            unit_upper.push(1.0);
        } else {
            let (o, s) = (plausible_lower[i], plausible_upper[i] - plausible_lower[i]);
            offset.push(o);
            scale.push(s);
            unit_lower.push(if lb.is_finite() { (lb - o) / s } else { f64::NEG_INFINITY });
            unit_upper.push(if ub.is_finite() { (ub - o) / s } else { f64::INFINITY });
        }
    }

    Ok(ValidatedProblem {
        objective: spec.objective,
        space: SearchSpace {
            lower: spec.lower_bounds,
            upper: spec.upper_bounds,
            plausible_lower,
            plausible_upper,
            offset,
            scale,
            unit_lower,
            unit_upper,
        },
        x0,
        noisy: spec.noisy,
        noise_scale_hint: spec.noise_scale_hint,
    })
}

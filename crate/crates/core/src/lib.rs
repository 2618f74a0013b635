//! Bayesian adaptive direct search.
//!
//! A derivative-free optimizer for rough, possibly noisy objectives of up to
//! about twenty continuous parameters. Each iteration runs a short series of
//! surrogate search steps (a local Gaussian process scored with a lower
//! confidence bound) and then one mesh-adaptive poll pass, which doubles the
//! step size on success and halves it on failure. When the surrogate is
//! wrong, the search simply fails and the poll keeps making progress.
//!
//! ```
//! use bads::{optimize, Options, ProblemSpec};
//!
//! let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
//! let mut problem = ProblemSpec::new(sphere, vec![3.0, 4.0], vec![-5.0; 2], vec![5.0; 2])
//!     .validate()
//!     .unwrap();
//! let result = optimize(&mut problem, &Options::default().with_seed(1)).unwrap();
//! assert!(result.f_best < 1e-6);
//! ```

pub mod controller;
pub mod gp;
pub mod linalg;
pub mod mesh;
pub mod points;
pub mod problem;
pub mod search;

pub use controller::{
    check_termination, optimize, EvaluationRecord, Incumbent, IterationSummary, OptimizationResult, OptimizeError,
    Options, OptionsError, Stage, TerminationReason,
};
pub use problem::{
    validate_spec, Objective, ObjectiveError, ObjectiveValue, ProblemError, ProblemSpec, SearchSpace, UnitPoint,
    ValidatedProblem,
};

//! Closed-form test objectives and the problem registry.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Axis-aligned quadratic with condition number 10⁶.
pub fn ellipsoid(x: &[f64]) -> f64 {
    let d = x.len();
    if d == 1 {
        return x[0] * x[0];
    }
    x.iter()
        .enumerate()
        .map(|(i, v)| 10f64.powf(6.0 * i as f64 / (d - 1) as f64) * v * v)
        .sum()
}

/// Sphere plus a unit-amplitude square wave in the first coordinate with
/// period 0.02, so a smooth surrogate is wrong almost everywhere.
pub fn adversarial(x: &[f64]) -> f64 {
    let flip = if (x[0] * 100.0 * std::f64::consts::PI).sin() >= 0.0 { 1.0 } else { -1.0 };
    sphere(x) + flip
}

/// Sphere plus `N(0, σ²)` noise; returns the value together with `σ`.
pub fn noisy_sphere<R: Rng + ?Sized>(x: &[f64], rng: &mut R, sigma: f64) -> (f64, f64) {
    let noise = if sigma > 0.0 { Normal::new(0.0, sigma).expect("finite sigma").sample(rng) } else { 0.0 };
    (sphere(x) + noise, sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemKind {
    Rosenbrock,
    Sphere,
    Ellipsoid,
    Adversarial,
    NoisySphere,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 5] = [
        ProblemKind::Rosenbrock,
        ProblemKind::Sphere,
        ProblemKind::Ellipsoid,
        ProblemKind::Adversarial,
        ProblemKind::NoisySphere,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Rosenbrock => "rosenbrock",
            ProblemKind::Sphere => "sphere",
            ProblemKind::Ellipsoid => "ellipsoid",
            ProblemKind::Adversarial => "adversarial",
            ProblemKind::NoisySphere => "noisy_sphere",
        }
    }

    pub fn min_dim(self) -> usize {
        match self {
            ProblemKind::Rosenbrock => 2,
            _ => 1,
        }
    }

    /// Noiseless value.
    pub fn evaluate(self, x: &[f64]) -> f64 {
        match self {
            ProblemKind::Rosenbrock => rosenbrock(x),
            ProblemKind::Sphere | ProblemKind::NoisySphere => sphere(x),
            ProblemKind::Ellipsoid => ellipsoid(x),
            ProblemKind::Adversarial => adversarial(x),
        }
    }

    /// Noise sd used when the configuration gives none.
    pub fn default_noise_sd(self) -> f64 {
        match self {
            ProblemKind::NoisySphere => 1.0,
            _ => 0.0,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| {
                let names: Vec<&str> = ProblemKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown problem `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// A benchmark problem instance: objective, box, start, known optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct TestProblem {
    pub kind: ProblemKind,
    pub dim: usize,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
    pub x0: Vec<f64>,
    /// Minimizer and minimum, when attained.
    pub known_optimum: Option<(Vec<f64>, f64)>,
    /// Additive Gaussian noise sd; zero means deterministic.
    pub noise_sd: f64,
}

impl TestProblem {
    /// Box `[−5, 5]^D`. Rosenbrock starts at `(−1, 2, −1, 2, …)`, the others
    /// at `(3, …, 3)`.
    pub fn new(kind: ProblemKind, dim: usize, noise_sd: Option<f64>) -> Result<Self, String> {
        if dim < kind.min_dim() {
            return Err(format!("{kind} needs dim >= {}, got {dim}", kind.min_dim()));
        }
        let noise_sd = noise_sd.unwrap_or(kind.default_noise_sd());
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(format!("noise sd must be nonnegative and finite, got {noise_sd}"));
        }
        let (x0, known_optimum) = match kind {
            ProblemKind::Rosenbrock => (
                (0..dim).map(|i| if i % 2 == 0 { -1.0 } else { 2.0 }).collect(),
                Some((vec![1.0; dim], 0.0)),
            ),
            // The infimum −1 is approached just left of the origin but not attained.
            ProblemKind::Adversarial => (vec![3.0; dim], None),
            _ => (vec![3.0; dim], Some((vec![0.0; dim], 0.0))),
        };
        Ok(Self {
            kind,
            dim,
            lower_bounds: vec![-5.0; dim],
            upper_bounds: vec![5.0; dim],
            x0,
            known_optimum,
            noise_sd,
        })
    }

    pub fn is_noisy(&self) -> bool {
        self.noise_sd > 0.0
    }

    /// Noiseless objective value.
    pub fn true_value(&self, x: &[f64]) -> f64 {
        self.kind.evaluate(x)
    }

    /// One observation: the true value plus noise, and the noise sd.
    pub fn observe<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> (f64, f64) {
        match self.kind {
            ProblemKind::NoisySphere => noisy_sphere(x, rng, self.noise_sd),
            _ if self.is_noisy() => {
                let n = Normal::new(0.0, self.noise_sd).expect("finite sigma").sample(rng);
                (self.true_value(x) + n, self.noise_sd)
            }
            _ => (self.true_value(x), 0.0),
        }
    }
}

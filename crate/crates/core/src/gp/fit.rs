//! Hyperparameter fitting by marginal-likelihood maximization.
//!
//! Box constraints are handled by a logistic reparameterization of every
//! free parameter, after which an unconstrained BFGS with backtracking line
//! search runs on the negative log marginal likelihood.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{log_marginal_likelihood, GpError, GpHyperparams, GpModel, MAX_LENGTH_SCALE, MIN_LENGTH_SCALE};

/// Deterministic targets get a fixed tiny noise for conditioning; noisy
/// targets fit `σ_n` with a lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    Deterministic,
    Noisy { floor: f64 },
}

/// Fixed noise of deterministic models, relative to the value scale.
const DETERMINISTIC_NOISE_REL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub noise: NoiseMode,
    /// BFGS iterations per start.
    pub max_iterations: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { noise: NoiseMode::Deterministic, max_iterations: 40 }
    }
}

impl FitSettings {
    pub fn deterministic() -> Self {
        Self::default()
    }

    pub fn noisy(floor: f64) -> Self {
        Self { noise: NoiseMode::Noisy { floor }, ..Self::default() }
    }
}

/// Per-fit constants derived from the training values.
struct Scaling {
    value_scale: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Parameters held fixed at their start value.
    fixed: Vec<bool>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

fn scaling(values: &[f64], dim: usize, noise: NoiseMode) -> Scaling {
    let mut sorted = values.to_vec();
    let med = median(&mut sorted);
    let sd = std_dev(values);
    let value_scale = if sd > 1e-12 * med.abs().max(1.0) { sd } else { 1e-6 * med.abs().max(1.0) };
    let (ymin, ymax) = (sorted[0], sorted[sorted.len() - 1]);

    let mut lower = vec![MIN_LENGTH_SCALE.ln(); dim];
    let mut upper = vec![MAX_LENGTH_SCALE.ln(); dim];
    lower.push((1e-3 * value_scale).ln());
    upper.push((1e3 * value_scale).ln());
    let mut fixed = vec![false; dim + 3];
    match noise {
        NoiseMode::Deterministic => {
            let ln = (DETERMINISTIC_NOISE_REL * value_scale).ln();
            lower.push(ln);
            upper.push(ln);
            fixed[dim + 1] = true;
        }
        NoiseMode::Noisy { floor } => {
            let floor = floor.max(DETERMINISTIC_NOISE_REL * value_scale);
            lower.push(floor.ln());
            upper.push((10.0 * value_scale).max(10.0 * floor).ln());
        }
    }
    lower.push(ymin - 10.0 * value_scale);
    upper.push(ymax + 10.0 * value_scale);
    Scaling { value_scale, lower, upper, fixed }
}

fn heuristic_start(inputs: &[Vec<f64>], values: &[f64], scale: &Scaling, noise: NoiseMode) -> GpHyperparams {
    let dim = inputs[0].len();
    let log_length_scales = (0..dim)
        .map(|d| {
            let mut col: Vec<f64> = inputs.iter().map(|x| x[d]).collect();
            col.sort_by(f64::total_cmp);
            let iqr = quantile(&col, 0.75) - quantile(&col, 0.25);
            let range = col[col.len() - 1] - col[0];
            let ls = if iqr > 0.0 {
                iqr
            } else if range > 0.0 {
                range
            } else {
                0.1
            };
            ls.clamp(MIN_LENGTH_SCALE, MAX_LENGTH_SCALE).ln()
        })
        .collect();
    let mut sorted = values.to_vec();
    let log_noise_sd = match noise {
        NoiseMode::Deterministic => (DETERMINISTIC_NOISE_REL * scale.value_scale).ln(),
        NoiseMode::Noisy { floor } => floor.max(0.1 * scale.value_scale).ln(),
    };
    GpHyperparams {
        log_length_scales,
        log_signal_sd: scale.value_scale.ln(),
        log_noise_sd,
        constant_mean: median(&mut sorted),
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Maps the free parameters between box space and the unconstrained space
/// used by BFGS.
struct BoxMap<'a> {
    scale: &'a Scaling,
    template: Vec<f64>,
    free: Vec<usize>,
}

impl<'a> BoxMap<'a> {
    fn new(scale: &'a Scaling, start: &GpHyperparams) -> Self {
        let mut template = start.to_vec();
        for (k, t) in template.iter_mut().enumerate() {
            *t = t.clamp(scale.lower[k], scale.upper[k]);
        }
        let free = (0..template.len())
            .filter(|&k| !scale.fixed[k] && scale.upper[k] > scale.lower[k])
            .collect();
        Self { scale, template, free }
    }

    fn to_free(&self) -> Vec<f64> {
        self.free
            .iter()
            .map(|&k| {
                let (lo, hi) = (self.scale.lower[k], self.scale.upper[k]);
                let t = ((self.template[k] - lo) / (hi - lo)).clamp(1e-6, 1.0 - 1e-6);
                (t / (1.0 - t)).ln()
            })
            .collect()
    }

    /// Returns the full parameter vector and `dθ/dz` for each free entry.
    fn to_params(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut theta = self.template.clone();
        let mut jac = Vec::with_capacity(z.len());
        for (&k, &zk) in self.free.iter().zip(z) {
            let (lo, hi) = (self.scale.lower[k], self.scale.upper[k]);
            let s = sigmoid(zk);
            theta[k] = lo + (hi - lo) * s;
            jac.push((hi - lo) * s * (1.0 - s));
        }
        (theta, jac)
    }
}

/// Unconstrained BFGS minimization with Armijo backtracking. `f` returns
/// `None` where the objective is undefined; the line search backs off.
fn bfgs<F>(mut f: F, x0: Vec<f64>, max_iterations: usize) -> Option<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    const MAX_STEP: f64 = 3.0;
    let n = x0.len();
    let (mut fx, mut g) = f(&x0)?;
    let mut x = x0;
    if n == 0 {
        return Some((x, fx));
    }
    let mut h = identity(n);
    let mut small_steps = 0;
    for _ in 0..max_iterations {
        if g.iter().all(|gi| gi.abs() < 1e-6 * (1.0 + fx.abs())) {
            break;
        }
        let mut p: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let longest = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if longest > MAX_STEP {
            let r = MAX_STEP / longest;
            p.iter_mut().for_each(|v| *v *= r);
            slope *= r;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else { break };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if improvement < 1e-9 * (1.0 + fx.abs()) {
            small_steps += 1;
            if small_steps >= 2 {
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    Some((x, fx))
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// Maximizes the LML from one start. Returns the fitted hyperparameters and
/// their LML.
fn optimize_from(
    inputs: &[Vec<f64>],
    values: &[f64],
    noise_sds: &[f64],
    scale: &Scaling,
    start: &GpHyperparams,
    max_iterations: usize,
) -> Option<(GpHyperparams, f64)> {
    let map = BoxMap::new(scale, start);
    let objective = |z: &[f64]| {
        let (theta, jac) = map.to_params(z);
        let hp = GpHyperparams::from_slice(&theta);
        let lml = log_marginal_likelihood(inputs, values, noise_sds, &hp).ok()?;
        if !lml.value.is_finite() {
            return None;
        }
        let grad: Vec<f64> = map.free.iter().zip(&jac).map(|(&k, j)| -lml.gradient[k] * j).collect();
        Some((-lml.value, grad))
    };
    let (z, neg_lml) = bfgs(objective, map.to_free(), max_iterations)?;
    let (theta, _) = map.to_params(&z);
    Some((GpHyperparams::from_slice(&theta), -neg_lml))
}

fn best_of(
    inputs: &[Vec<f64>],
    values: &[f64],
    noise_sds: &[f64],
    starts: &[GpHyperparams],
    settings: &FitSettings,
    scale: &Scaling,
) -> Result<GpModel, GpError> {
    let mut best: Option<(GpHyperparams, f64)> = None;
    for start in starts {
        if let Some((hp, lml)) = optimize_from(inputs, values, noise_sds, scale, start, settings.max_iterations) {
            if best.as_ref().is_none_or(|(_, b)| lml > *b) {
                best = Some((hp, lml));
            }
        }
    }
    let (hp, _) = best.ok_or(GpError::FitFailed)?;
    GpModel::condition(inputs.to_vec(), values.to_vec(), noise_sds.to_vec(), hp)
}

fn fallback_prior(inputs: &[Vec<f64>], values: &[f64], noise_sds: &[f64], dim: usize, noise: NoiseMode) -> Result<GpModel, GpError> {
    let sf = values.first().map_or(1.0, |y| y.abs().max(1.0));
    let sn = match noise {
        NoiseMode::Deterministic => DETERMINISTIC_NOISE_REL * sf,
        NoiseMode::Noisy { floor } => floor.max(DETERMINISTIC_NOISE_REL * sf),
    };
    let hp = GpHyperparams {
        log_length_scales: vec![0.1f64.ln(); dim],
        log_signal_sd: sf.ln(),
        log_noise_sd: sn.ln(),
        constant_mean: 0.0,
    };
    GpModel::condition(inputs.to_vec(), values.to_vec(), noise_sds.to_vec(), hp)
}

fn training_dim(inputs: &[Vec<f64>], previous: Option<&GpHyperparams>) -> Result<usize, GpError> {
    inputs
        .first()
        .map(Vec::len)
        .or_else(|| previous.map(GpHyperparams::dim))
        .ok_or_else(|| GpError::BadInput("no training points and no hyperparameters".into()))
}

/// Fits hyperparameters by maximizing the log marginal likelihood from two
/// starts: `previous` (when given) and a data-driven heuristic; without
/// `previous`, a random perturbation of the heuristic is the second start.
/// Fewer than two points yields a default-hyperparameter model.
pub fn fit<R: Rng + ?Sized>(
    inputs: &[Vec<f64>],
    values: &[f64],
    noise_sds: &[f64],
    previous: Option<&GpHyperparams>,
    settings: &FitSettings,
    rng: &mut R,
) -> Result<GpModel, GpError> {
    let dim = training_dim(inputs, previous)?;
    if inputs.len() < 2 {
        return fallback_prior(inputs, values, noise_sds, dim, settings.noise);
    }
    let scale = scaling(values, dim, settings.noise);
    let heuristic = heuristic_start(inputs, values, &scale, settings.noise);
    let second = match previous {
        Some(p) => p.clone(),
        None => {
            let mut p = heuristic.clone();
            for l in &mut p.log_length_scales {
                *l += 0.5 * rng.sample::<f64, _>(StandardNormal);
            }
            p.log_signal_sd += 0.5 * rng.sample::<f64, _>(StandardNormal);
            p
        }
    };
    best_of(inputs, values, noise_sds, &[second, heuristic], settings, &scale)
}

/// Single warm-started fit from `previous`. Cheaper than [`fit`]; used
/// between full refits.
pub fn refine(
    inputs: &[Vec<f64>],
    values: &[f64],
    noise_sds: &[f64],
    previous: &GpHyperparams,
    settings: &FitSettings,
) -> Result<GpModel, GpError> {
    let dim = previous.dim();
    if inputs.len() < 2 {
        return fallback_prior(inputs, values, noise_sds, dim, settings.noise);
    }
    let scale = scaling(values, dim, settings.noise);
    best_of(inputs, values, noise_sds, std::slice::from_ref(previous), settings, &scale)
}

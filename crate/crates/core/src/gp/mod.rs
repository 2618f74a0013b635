//! Gaussian-process surrogate: ARD squared-exponential kernel with a
//! constant mean, heteroskedastic observation noise, marginal-likelihood
//! fitting, and posterior prediction.

mod fit;
mod subset;

pub use fit::{fit, refine, FitSettings, NoiseMode};
pub use subset::{select_training_subset, SubsetRule};

use std::f64::consts::PI;

use thiserror::Error;

use crate::linalg::Cholesky;

/// Diagonal jitter levels, as fractions of the signal variance, tried in
/// order before the covariance is declared non positive definite.
pub const JITTER_LEVELS: [f64; 3] = [1e-10, 1e-8, 1e-6];

pub const MIN_LENGTH_SCALE: f64 = 1e-3;
pub const MAX_LENGTH_SCALE: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("covariance matrix is not positive definite after jitter escalation")]
    NonPositiveDefinite,
    #[error("hyperparameter fit failed from every start")]
    FitFailed,
    #[error("training data mismatch: {0}")]
    BadInput(String),
}

/// Kernel and likelihood hyperparameters. Scales are stored as logs.
#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperparams {
    pub log_length_scales: Vec<f64>,
    pub log_signal_sd: f64,
    pub log_noise_sd: f64,
    pub constant_mean: f64,
}

impl GpHyperparams {
    pub fn dim(&self) -> usize {
        self.log_length_scales.len()
    }

    pub fn signal_variance(&self) -> f64 {
        (2.0 * self.log_signal_sd).exp()
    }

    pub fn noise_sd(&self) -> f64 {
        self.log_noise_sd.exp()
    }

    /// Flat parameter vector `[log ℓ₁..log ℓ_D, log σ_f, log σ_n, mean]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.log_length_scales.clone();
        v.extend([self.log_signal_sd, self.log_noise_sd, self.constant_mean]);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let d = v.len() - 3;
        Self {
            log_length_scales: v[..d].to_vec(),
            log_signal_sd: v[d],
            log_noise_sd: v[d + 1],
            constant_mean: v[d + 2],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }
}

/// ARD squared-exponential covariance `σ_f² exp(−½ Σ ((x_d − y_d)/ℓ_d)²)`.
pub fn kernel(x: &[f64], y: &[f64], hp: &GpHyperparams) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let r2: f64 = x
        .iter()
        .zip(y)
        .zip(&hp.log_length_scales)
        .map(|((a, b), ll)| {
            let t = (a - b) * (-ll).exp();
            t * t
        })
        .sum();
    hp.signal_variance() * (-0.5 * r2).exp()
}

fn check_training(inputs: &[Vec<f64>], values: &[f64], noise_sd: &[f64], dim: usize) -> Result<(), GpError> {
    if inputs.len() != values.len() || inputs.len() != noise_sd.len() {
        return Err(GpError::BadInput(format!(
            "{} inputs, {} values, {} noise entries",
            inputs.len(),
            values.len(),
            noise_sd.len()
        )));
    }
    if let Some(x) = inputs.iter().find(|x| x.len() != dim) {
        return Err(GpError::BadInput(format!("input of length {} in dimension {dim}", x.len())));
    }
    if values.iter().chain(noise_sd).any(|v| !v.is_finite()) {
        return Err(GpError::BadInput("non-finite value or noise".into()));
    }
    Ok(())
}

/// Covariance of the training set: squared-exponential part plus the
/// diagonal noise and jitter. Returns `(K, K_se)`.
fn covariance(
    inputs: &[Vec<f64>],
    noise_sd: &[f64],
    hp: &GpHyperparams,
    jitter_rel: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = inputs.len();
    let inv_ls: Vec<f64> = hp.log_length_scales.iter().map(|l| (-l).exp()).collect();
    let sf2 = hp.signal_variance();
    let sn2 = (2.0 * hp.log_noise_sd).exp();
    let mut kse = vec![0.0; n * n];
    for i in 0..n {
        kse[i * n + i] = sf2;
        for j in 0..i {
            let r2: f64 = inputs[i]
                .iter()
                .zip(&inputs[j])
                .zip(&inv_ls)
                .map(|((a, b), il)| {
                    let t = (a - b) * il;
                    t * t
                })
                .sum();
            let k = sf2 * (-0.5 * r2).exp();
            kse[i * n + j] = k;
            kse[j * n + i] = k;
        }
    }
    let mut k = kse.clone();
    for i in 0..n {
        k[i * n + i] += sn2 + noise_sd[i] * noise_sd[i] + jitter_rel * sf2;
    }
    (k, kse)
}

fn factorize(
    inputs: &[Vec<f64>],
    noise_sd: &[f64],
    hp: &GpHyperparams,
) -> Result<(Cholesky, Vec<f64>, f64), GpError> {
    let n = inputs.len();
    for &jitter in &JITTER_LEVELS {
        let (k, kse) = covariance(inputs, noise_sd, hp, jitter);
        if let Some(chol) = Cholesky::new(&k, n) {
            return Ok((chol, kse, jitter));
        }
    }
    Err(GpError::NonPositiveDefinite)
}

/// Log marginal likelihood of the training data together with its gradient
/// with respect to the flat parameter vector (see [`GpHyperparams::to_vec`]).
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalLikelihood {
    pub value: f64,
    pub gradient: Vec<f64>,
}

pub fn log_marginal_likelihood(
    inputs: &[Vec<f64>],
    values: &[f64],
    noise_sd: &[f64],
    hp: &GpHyperparams,
) -> Result<MarginalLikelihood, GpError> {
    let dim = hp.dim();
    check_training(inputs, values, noise_sd, dim)?;
    if inputs.is_empty() {
        return Err(GpError::BadInput("no training points".into()));
    }
    if !hp.is_finite() {
        return Err(GpError::BadInput("non-finite hyperparameters".into()));
    }
    let n = inputs.len();
    let (chol, kse, jitter) = factorize(inputs, noise_sd, hp)?;
    let centered: Vec<f64> = values.iter().map(|y| y - hp.constant_mean).collect();
    let alpha = chol.solve(&centered);
    let fit_term: f64 = centered.iter().zip(&alpha).map(|(r, a)| r * a).sum();
    let value = -0.5 * fit_term - 0.5 * chol.log_det() - 0.5 * n as f64 * (2.0 * PI).ln();

    // dLML/dθ = ½ tr(W ∂K/∂θ) with W = ααᵀ − K⁻¹.
    let kinv = chol.inverse();
    let mut w = kinv;
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = alpha[i] * alpha[j] - w[i * n + j];
        }
    }
    let inv_ls2: Vec<f64> = hp
        .log_length_scales
        .iter()
        .map(|l| (-2.0 * l).exp())
        .collect();
    let mut gradient = vec![0.0; dim + 3];
    let mut signal = 0.0;
    for i in 0..n {
        signal += w[i * n + i] * kse[i * n + i];
        for j in 0..i {
            let wk = w[i * n + j] * kse[i * n + j];
            signal += 2.0 * wk;
            for d in 0..dim {
                let diff = inputs[i][d] - inputs[j][d];
                gradient[d] += wk * diff * diff * inv_ls2[d];
            }
        }
    }
    // Off-diagonal pairs were counted once; the ½ factor cancels the 2.
    let trace_w: f64 = (0..n).map(|i| w[i * n + i]).sum();
    let sf2 = hp.signal_variance();
    let sn2 = (2.0 * hp.log_noise_sd).exp();
    gradient[dim] = signal + jitter * sf2 * trace_w;
    gradient[dim + 1] = sn2 * trace_w;
    gradient[dim + 2] = alpha.iter().sum();
    Ok(MarginalLikelihood { value, gradient })
}

/// GP conditioned on a training set with fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyperparams: GpHyperparams,
    inputs: Vec<Vec<f64>>,
    values: Vec<f64>,
    noise_sd: Vec<f64>,
    chol: Option<Cholesky>,
    alpha: Vec<f64>,
    inv_length_scales: Vec<f64>,
}

impl GpModel {
    /// Model with no data: predictions are the prior `(mean, σ_f)`.
    pub fn prior(hyperparams: GpHyperparams) -> Self {
        let inv_length_scales = hyperparams.log_length_scales.iter().map(|l| (-l).exp()).collect();
        Self {
            hyperparams,
            inputs: Vec::new(),
            values: Vec::new(),
            noise_sd: Vec::new(),
            chol: None,
            alpha: Vec::new(),
            inv_length_scales,
        }
    }

    /// Conditions on `(inputs, values)` where `noise_sd[i]` is the
    /// per-point observation sd added on top of the homoskedastic `σ_n`.
    pub fn condition(
        inputs: Vec<Vec<f64>>,
        values: Vec<f64>,
        noise_sd: Vec<f64>,
        hyperparams: GpHyperparams,
    ) -> Result<Self, GpError> {
        check_training(&inputs, &values, &noise_sd, hyperparams.dim())?;
        if !hyperparams.is_finite() {
            return Err(GpError::BadInput("non-finite hyperparameters".into()));
        }
        if inputs.is_empty() {
            return Ok(Self::prior(hyperparams));
        }
        let (chol, _, _) = factorize(&inputs, &noise_sd, &hyperparams)?;
        let centered: Vec<f64> = values.iter().map(|y| y - hyperparams.constant_mean).collect();
        let alpha = chol.solve(&centered);
        let inv_length_scales = hyperparams.log_length_scales.iter().map(|l| (-l).exp()).collect();
        Ok(Self {
            hyperparams,
            inputs,
            values,
            noise_sd,
            chol: Some(chol),
            alpha,
            inv_length_scales,
        })
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hyperparams
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_sd(&self) -> &[f64] {
        &self.noise_sd
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Posterior mean and latent standard deviation (observation noise
    /// excluded) at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let hp = &self.hyperparams;
        let sf2 = hp.signal_variance();
        let Some(chol) = &self.chol else {
            return (hp.constant_mean, sf2.sqrt());
        };
        let mut kstar: Vec<f64> = self
            .inputs
            .iter()
            .map(|xi| {
                let r2: f64 = xi
                    .iter()
                    .zip(x)
                    .zip(&self.inv_length_scales)
                    .map(|((a, b), il)| {
                        let t = (a - b) * il;
                        t * t
                    })
                    .sum();
                sf2 * (-0.5 * r2).exp()
            })
            .collect();
        let mean = hp.constant_mean + kstar.iter().zip(&self.alpha).map(|(k, a)| k * a).sum::<f64>();
        chol.solve_lower_in_place(&mut kstar);
        let explained: f64 = kstar.iter().map(|v| v * v).sum();
        let var = (sf2 - explained).max(0.0);
        (mean, var.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(ls: &[f64], sf: f64, sn: f64, mean: f64) -> GpHyperparams {
        GpHyperparams {
            log_length_scales: ls.iter().map(|l: &f64| l.ln()).collect(),
            log_signal_sd: sf.ln(),
            log_noise_sd: sn.ln(),
            constant_mean: mean,
        }
    }

    #[test]
    fn kernel_examples() {
        let h = hp(&[0.3, 0.7], 2.0, 1e-3, 0.0);
        assert_eq!(kernel(&[0.1, 0.2], &[0.1, 0.2], &h), 4.0);
        assert!(kernel(&[0.0, 0.0], &[1e3, 1e3], &h) < 1e-300);
        let h1 = hp(&[1.0], 1.0, 1e-3, 0.0);
        let k = kernel(&[0.0], &[1.0], &h1);
        assert!((k - (-0.5f64).exp()).abs() < 1e-15);
        assert!((k - 0.60653).abs() < 1e-5);
        assert_eq!(kernel(&[0.2, 0.9], &[0.5, 0.1], &h), kernel(&[0.5, 0.1], &[0.2, 0.9], &h));
    }

    #[test]
    fn single_point_lml_closed_form() {
        let h = hp(&[0.5], 1.5, 0.2, 3.0);
        let lml = log_marginal_likelihood(&[vec![0.4]], &[3.0], &[0.0], &h).unwrap();
        let total_var = 1.5f64.powi(2) * (1.0 + JITTER_LEVELS[0]) + 0.04;
        let expected = -0.5 * (2.0 * PI * total_var).ln();
        assert!((lml.value - expected).abs() < 1e-12);
        // Without jitter the closed form differs by ~1e-10 relative.
        let bare = -0.5 * (2.0 * PI * (2.25 + 0.04)).ln();
        assert!((lml.value - bare).abs() < 1e-9);
    }

    #[test]
    fn duplicated_noiseless_points_never_nan() {
        let h = hp(&[0.5], 1.0, 1e-12, 0.0);
        let x = vec![vec![0.3], vec![0.3]];
        match log_marginal_likelihood(&x, &[1.0, 1.0], &[0.0, 0.0], &h) {
            Ok(l) => {
                assert!(l.value.is_finite());
                assert!(l.gradient.iter().all(|g| g.is_finite()));
            }
            Err(e) => assert_eq!(e, GpError::NonPositiveDefinite),
        }
    }

    #[test]
    fn empty_model_predicts_prior() {
        let m = GpModel::prior(hp(&[0.5, 0.5], 2.0, 0.1, 7.0));
        assert_eq!(m.predict(&[0.3, 0.3]), (7.0, 2.0));
    }

    #[test]
    fn interpolates_noiseless_training_points() {
        let inputs = vec![vec![0.1, 0.2], vec![0.5, 0.5], vec![0.9, 0.3]];
        let values = vec![1.0, -2.0, 0.5];
        let m = GpModel::condition(inputs.clone(), values.clone(), vec![0.0; 3], hp(&[0.3, 0.3], 1.0, 1e-9, 0.0))
            .unwrap();
        for (x, y) in inputs.iter().zip(&values) {
            let (mean, sd) = m.predict(x);
            assert!((mean - y).abs() <= 1e-8 * y.abs().max(1.0));
            assert!(sd < 1e-4);
        }
    }

    #[test]
    fn rejects_mismatched_training_data() {
        let err = GpModel::condition(vec![vec![0.1]], vec![1.0, 2.0], vec![0.0], hp(&[1.0], 1.0, 0.1, 0.0));
        assert!(matches!(err, Err(GpError::BadInput(_))));
    }
}

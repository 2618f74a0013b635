//! GP posterior and likelihood checked against dense reference computations.

use bads::gp::{log_marginal_likelihood, GpHyperparams, GpModel};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn se(x: &[f64], y: &[f64], ls: &[f64], sf: f64) -> f64 {
    let r2: f64 = x.iter().zip(y).zip(ls).map(|((a, b), l)| ((a - b) / l).powi(2)).sum();
    sf * sf * (-0.5 * r2).exp()
}

/// Posterior by explicit inversion of the training covariance.
fn dense_posterior(
    inputs: &[Vec<f64>],
    values: &[f64],
    noise: &[f64],
    hp: &GpHyperparams,
    x: &[f64],
) -> (f64, f64) {
    let n = inputs.len();
    let ls: Vec<f64> = hp.log_length_scales.iter().map(|l| l.exp()).collect();
    let sf = hp.log_signal_sd.exp();
    let sn = hp.log_noise_sd.exp();
    let k = DMatrix::from_fn(n, n, |i, j| {
        let mut v = se(&inputs[i], &inputs[j], &ls, sf);
        if i == j {
            v += sn * sn + noise[i] * noise[i] + 1e-10 * sf * sf;
        }
        v
    });
    let kinv = k.try_inverse().expect("invertible");
    let ks = DVector::from_fn(n, |i, _| se(&inputs[i], x, &ls, sf));
    let r = DVector::from_fn(n, |i, _| values[i] - hp.constant_mean);
    let mean = hp.constant_mean + (ks.transpose() * &kinv * r)[0];
    let var = sf * sf - (ks.transpose() * &kinv * &ks)[0];
    (mean, var.max(0.0).sqrt())
}

fn random_hp(rng: &mut ChaCha8Rng, dim: usize) -> GpHyperparams {
    GpHyperparams {
        log_length_scales: (0..dim).map(|_| rng.random_range(0.2f64..1.0).ln()).collect(),
        log_signal_sd: rng.random_range(0.5f64..2.0).ln(),
        log_noise_sd: rng.random_range(0.05f64..0.5).ln(),
        constant_mean: rng.random_range(-1.0..1.0),
    }
}

fn random_data(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let values = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let noise = (0..n).map(|_| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.3) }).collect();
    (inputs, values, noise)
}

#[test]
fn posterior_matches_dense_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..200 {
        let dim = rng.random_range(1..=4);
        let n = rng.random_range(1..=6);
        let (inputs, values, noise) = random_data(&mut rng, n, dim);
        let hp = random_hp(&mut rng, dim);
        let model = GpModel::condition(inputs.clone(), values.clone(), noise.clone(), hp.clone()).unwrap();
        for _ in 0..5 {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.2..1.2)).collect();
            let (m, s) = model.predict(&x);
            let (m_ref, s_ref) = dense_posterior(&inputs, &values, &noise, &hp, &x);
            assert!((m - m_ref).abs() < 1e-10, "mean {m} vs {m_ref}");
            assert!((s - s_ref).abs() < 1e-8, "sd {s} vs {s_ref}");
        }
    }
}

#[test]
fn two_point_midpoint_closed_form() {
    // ℓ = 1, σf = 1, σn = 0.1, m = 0, points at 0 and 1 with values 1 and 3.
    let hp = GpHyperparams {
        log_length_scales: vec![0.0],
        log_signal_sd: 0.0,
        log_noise_sd: 0.1f64.ln(),
        constant_mean: 0.0,
    };
    let model = GpModel::condition(vec![vec![0.0], vec![1.0]], vec![1.0, 3.0], vec![0.0; 2], hp).unwrap();
    let c = (-0.5f64).exp();
    let a = 1.0 + 0.01 + 1e-10;
    let det = a * a - c * c;
    let ks = (-0.125f64).exp();
    // K⁻¹ = [[a, −c], [−c, a]] / det, and k* is the same for both points.
    let alpha = [(a * 1.0 - c * 3.0) / det, (a * 3.0 - c * 1.0) / det];
    let mean = ks * (alpha[0] + alpha[1]);
    let var = 1.0 - ks * ks * 2.0 * (a - c) / det;
    let (m, s) = model.predict(&[0.5]);
    assert!((m - mean).abs() < 1e-12);
    assert!((s - var.sqrt()).abs() < 1e-12);
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let h = 1e-5;
    for _ in 0..100 {
        let dim = rng.random_range(1..=3);
        let n = rng.random_range(2..=8);
        let (inputs, values, noise) = random_data(&mut rng, n, dim);
        let hp = random_hp(&mut rng, dim);
        let lml = log_marginal_likelihood(&inputs, &values, &noise, &hp).unwrap();
        let theta = hp.to_vec();
        for k in 0..theta.len() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[k] += h;
            minus[k] -= h;
            let fp = log_marginal_likelihood(&inputs, &values, &noise, &GpHyperparams::from_slice(&plus)).unwrap();
            let fm = log_marginal_likelihood(&inputs, &values, &noise, &GpHyperparams::from_slice(&minus)).unwrap();
            let fd = (fp.value - fm.value) / (2.0 * h);
            let g = lml.gradient[k];
            // Relative error, with an absolute floor of one for near-zero components.
            assert!((g - fd).abs() <= 1e-5 * fd.abs().max(1.0), "component {k}: analytic {g} vs fd {fd}");
        }
    }
}

#[test]
fn marginal_likelihood_matches_dense_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let dim = rng.random_range(1..=3);
        let n = rng.random_range(1..=6);
        let (inputs, values, noise) = random_data(&mut rng, n, dim);
        let hp = random_hp(&mut rng, dim);
        let ls: Vec<f64> = hp.log_length_scales.iter().map(|l| l.exp()).collect();
        let sf = hp.log_signal_sd.exp();
        let sn = hp.log_noise_sd.exp();
        let k = DMatrix::from_fn(n, n, |i, j| {
            se(&inputs[i], &inputs[j], &ls, sf)
                + if i == j { sn * sn + noise[i] * noise[i] + 1e-10 * sf * sf } else { 0.0 }
        });
        let r = DVector::from_fn(n, |i, _| values[i] - hp.constant_mean);
        let quad = (r.transpose() * k.clone().try_inverse().unwrap() * &r)[0];
        let expected = -0.5 * quad - 0.5 * k.determinant().ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        let got = log_marginal_likelihood(&inputs, &values, &noise, &hp).unwrap().value;
        assert!((got - expected).abs() < 1e-9 * expected.abs().max(1.0));
    }
}

#[test]
fn sd_shrinks_as_data_approaches_the_query() {
    let hp = GpHyperparams {
        log_length_scales: vec![0.2f64.ln()],
        log_signal_sd: 0.0,
        log_noise_sd: 1e-3f64.ln(),
        constant_mean: 0.0,
    };
    let mut last = f64::INFINITY;
    for dist in [1.0, 0.5, 0.25, 0.1, 0.05, 0.01] {
        let model = GpModel::condition(vec![vec![dist]], vec![1.0], vec![0.0], hp.clone()).unwrap();
        let (_, s) = model.predict(&[0.0]);
        assert!(s < last);
        last = s;
    }
}

#[test]
fn doubling_point_noise_widens_the_posterior() {
    let hp = GpHyperparams {
        log_length_scales: vec![0.3f64.ln()],
        log_signal_sd: 0.0,
        log_noise_sd: 1e-3f64.ln(),
        constant_mean: 0.0,
    };
    let inputs = vec![vec![0.2], vec![0.5], vec![0.7]];
    let values = vec![0.3, -0.4, 0.1];
    let narrow = GpModel::condition(inputs.clone(), values.clone(), vec![0.1, 0.2, 0.1], hp.clone()).unwrap();
    let wide = GpModel::condition(inputs, values, vec![0.1, 0.4, 0.1], hp).unwrap();
    assert!(wide.predict(&[0.5]).1 >= narrow.predict(&[0.5]).1);
}

#[test]
fn lucky_draw_is_pulled_up_by_neighbours() {
    // Incumbent observed at −3 under unit noise, surrounded by ten
    // neighbours that all read 0.
    let hp = GpHyperparams {
        log_length_scales: vec![0.3f64.ln()],
        log_signal_sd: 0.0,
        log_noise_sd: 1e-6f64.ln(),
        constant_mean: 0.0,
    };
    let mut inputs = vec![vec![0.5]];
    let mut values = vec![-3.0];
    for k in 1..=5 {
        for s in [-1.0, 1.0] {
            inputs.push(vec![0.5 + s * 0.01 * k as f64]);
            values.push(0.0);
        }
    }
    let noise = vec![1.0; inputs.len()];
    let model = GpModel::condition(inputs.clone(), values.clone(), noise.clone(), hp.clone()).unwrap();
    let (m, _) = model.predict(&[0.5]);
    let (m_ref, _) = dense_posterior(&inputs, &values, &noise, &hp, &[0.5]);
    assert!((m - m_ref).abs() < 1e-10);
    assert!(m > -3.0 + 1.0, "posterior mean {m} should sit well above the lucky draw");
}

#[test]
fn two_point_fit_reaches_the_grid_optimum() {
    use bads::gp::{fit, FitSettings};
    let inputs = vec![vec![0.3], vec![0.7]];
    let values = vec![1.0, 3.0];
    let noise = vec![0.0; 2];
    let model = fit(&inputs, &values, &noise, None, &FitSettings::deterministic(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let hp = model.hyperparams().clone();
    // By symmetry the likelihood-optimal constant mean is the midpoint (the median).
    assert!((hp.constant_mean - 2.0).abs() < 1e-3, "mean {}", hp.constant_mean);
    let fitted = log_marginal_likelihood(&inputs, &values, &noise, &hp).unwrap().value;
    let mut grid_best = f64::NEG_INFINITY;
    for i in 0..=40 {
        for j in 0..=40 {
            for k in 0..=20 {
                let cand = GpHyperparams {
                    log_length_scales: vec![(-3.0 + 0.1 * i as f64) * std::f64::consts::LN_10],
                    log_signal_sd: (-1.0 + 0.05 * j as f64) * std::f64::consts::LN_10,
                    log_noise_sd: hp.log_noise_sd,
                    constant_mean: 1.0 + 0.1 * k as f64,
                };
                if let Ok(l) = log_marginal_likelihood(&inputs, &values, &noise, &cand) {
                    grid_best = grid_best.max(l.value);
                }
            }
        }
    }
    assert!(fitted >= grid_best - 1e-3, "fitted {fitted} vs grid {grid_best}");
}

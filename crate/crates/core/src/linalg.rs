//! Small dense linear algebra on row-major `Vec<f64>` storage.
//!
//! The GP matrices never exceed a few hundred rows, so plain loops are
//! enough and keep the numerical path easy to audit.

use rand::Rng;
use rand_distr::StandardNormal;

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factorizes the symmetric matrix `a` (row-major, `n × n`). Only the
    /// lower triangle is read. Returns `None` if a pivot is not strictly
    /// positive and finite.
    pub fn new(a: &[f64], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let row_j = j * n;
            let diag = a[row_j + j] - l[row_j..row_j + j].iter().map(|v| v * v).sum::<f64>();
            if !(diag > 0.0) || !diag.is_finite() {
                return None;
            }
            let d = diag.sqrt();
            l[row_j + j] = d;
            for i in (j + 1)..n {
                let row_i = i * n;
                let s = a[row_i + j] - dot(&l[row_i..row_i + j], &l[row_j..row_j + j]);
                l[row_i + j] = s / d;
            }
        }
        Some(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>() * 2.0
    }

    /// Dense `A⁻¹`, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        // Row j of `mt` holds column j of L⁻¹ (nonzero from index j on), so
        // both passes below read contiguous memory.
        let mut mt = vec![0.0; n * n];
        for j in 0..n {
            let col = &mut mt[j * n..(j + 1) * n];
            col[j] = 1.0 / self.l[j * n + j];
            for i in (j + 1)..n {
                let row = &self.l[i * n..i * n + i];
                let s: f64 = row[j..].iter().zip(&col[j..i]).map(|(a, b)| a * b).sum();
                col[i] = -s / self.l[i * n + i];
            }
        }
        // A⁻¹ = L⁻ᵀ L⁻¹, i.e. A⁻¹_ij = Σ_{k ≥ max(i,j)} mt[i][k]·mt[j][k].
        let mut inv = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = mt[i * n + i..(i + 1) * n]
                    .iter()
                    .zip(&mt[j * n + i..(j + 1) * n])
                    .map(|(a, b)| a * b)
                    .sum();
                inv[i * n + j] = s;
                inv[j * n + i] = s;
            }
        }
        inv
    }
}

/// Random orthonormal basis from the QR (Gram-Schmidt) of a standard-Gaussian
/// `dim × dim` draw. Returned as a list of basis vectors.
pub fn random_orthonormal_basis<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        // Two passes of modified Gram-Schmidt keep orthogonality at machine precision.
        for _ in 0..2 {
            for q in &basis {
                let proj = dot(&v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-8 {
            // Degenerate draw; probability zero in exact arithmetic.
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    basis
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

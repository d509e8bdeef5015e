//! Weighted ridge least squares through the normal equations.
//!
//! Minimizes `Σ_i w_i (y_i − β₀ − βᵀx_i)² + ridge‖β‖²`; the intercept is not
//! penalized.

use crate::error::{Error, Result};

/// Accumulates `XᵀWX` and `XᵀWy` for a design with a leading intercept column.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    dim: usize,
    // row-major (dim + 1) x (dim + 1)
    gram: Vec<f64>,
    rhs: Vec<f64>,
}

impl NormalEquations {
    /// `features` is the number of non-intercept columns.
    pub fn new(features: usize) -> Self {
        let dim = features + 1;
        NormalEquations {
            dim,
            gram: vec![0.0; dim * dim],
            rhs: vec![0.0; dim],
        }
    }

    pub fn features(&self) -> usize {
        self.dim - 1
    }

    /// Adds one observation with binary features.
    pub fn add_binary(&mut self, x: &[bool], y: f64, weight: f64) {
        debug_assert_eq!(x.len() + 1, self.dim);
        let active: Vec<usize> = std::iter::once(0)
            .chain(x.iter().enumerate().filter(|(_, &on)| on).map(|(j, _)| j + 1))
            .collect();
        for &a in &active {
            self.rhs[a] += weight * y;
            for &b in &active {
                self.gram[a * self.dim + b] += weight;
            }
        }
    }

    pub fn add(&mut self, x: &[f64], y: f64, weight: f64) {
        debug_assert_eq!(x.len() + 1, self.dim);
        let row = |i: usize| if i == 0 { 1.0 } else { x[i - 1] };
        for a in 0..self.dim {
            let xa = row(a);
            self.rhs[a] += weight * xa * y;
            for b in 0..self.dim {
                self.gram[a * self.dim + b] += weight * xa * row(b);
            }
        }
    }

    /// The penalized system matrix, row-major.
    pub fn system(&self, ridge: f64) -> Vec<f64> {
        let mut m = self.gram.clone();
        for j in 1..self.dim {
            m[j * self.dim + j] += ridge;
        }
        m
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Solves for `(β₀, β)` by Cholesky factorization.
    pub fn solve(&self, ridge: f64) -> Result<(f64, Vec<f64>)> {
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::InvalidConfig(format!("ridge must be nonnegative, got {ridge}")));
        }
        let n = self.dim;
        let a = self.system(ridge);
        let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::SingularSystem);
        }
        let tol = scale * 1e-14;

        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= tol {
                        return Err(Error::SingularSystem);
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }

        let solve_with = |b: &[f64]| {
            let mut z = vec![0.0; n];
            for i in 0..n {
                let s: f64 = (0..i).map(|k| l[i * n + k] * z[k]).sum();
                z[i] = (b[i] - s) / l[i * n + i];
            }
            let mut x = vec![0.0; n];
            for i in (0..n).rev() {
                let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
                x[i] = (z[i] - s) / l[i * n + i];
            }
            x
        };

        let mut x = solve_with(&self.rhs);
        // one round of iterative refinement
        let residual: Vec<f64> = (0..n)
            .map(|i| self.rhs[i] - (0..n).map(|j| a[i * n + j] * x[j]).sum::<f64>())
            .collect();
        for (xi, ci) in x.iter_mut().zip(solve_with(&residual)) {
            *xi += ci;
        }

        let intercept = x[0];
        x.remove(0);
        Ok((intercept, x))
    }
}

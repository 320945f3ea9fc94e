//! Dense symmetric positive definite solves.

use ndarray::{Array1, Array2, ArrayView1};

use crate::{Error, Result};

/// When to accept a Cholesky factorization of `P + εI`.
///
/// `ε` starts at zero and then runs through the decades
/// `first_rel·τ, 10·first_rel·τ, …, cap_rel·τ` with `τ = trace(P)/n`.
/// A pivot `d_k` counts as positive only if `d_k > pivot_rel·(P_kk + ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgePolicy {
    pub first_rel: f64,
    pub cap_rel: f64,
    pub pivot_rel: f64,
}

impl Default for RidgePolicy {
    fn default() -> Self {
        RidgePolicy {
            first_rel: 1e-12,
            cap_rel: 1e-6,
            pivot_rel: 1e-5,
        }
    }
}

impl RidgePolicy {
    fn ridges(&self, scale: f64) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut rel = self.first_rel;
        while rel <= self.cap_rel * (1.0 + 1e-9) {
            out.push(rel * scale);
            rel *= 10.0;
        }
        out
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = P + ridge·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    pub factor: Array2<f64>,
    pub ridge: f64,
}

/// Plain Cholesky of `a + ridge·I`. On failure returns the 1-based order of
/// the first leading minor whose pivot is rejected.
pub fn cholesky(
    a: &Array2<f64>,
    ridge: f64,
    pivot_rel: f64,
) -> std::result::Result<Array2<f64>, usize> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let diag = a[[j, j]] + ridge;
        let mut d = diag;
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > pivot_rel * diag.abs()) || !(d > 0.0) {
            return Err(j + 1);
        }
        let ljj = d.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// Cholesky with the escalating ridge of `policy`.
pub fn factorize(p: &Array2<f64>, policy: RidgePolicy) -> Result<Cholesky> {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return Err(Error::param(format!(
            "expected a non-empty square matrix, got {:?}",
            p.dim()
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Gram matrix"));
    }
    let scale = p.diag().sum() / n as f64;
    let mut last = (1, 0.0);
    for ridge in policy.ridges(scale) {
        match cholesky(p, ridge, policy.pivot_rel) {
            Ok(factor) => return Ok(Cholesky { factor, ridge }),
            Err(index) => last = (index, ridge),
        }
    }
    Err(Error::Singular {
        index: last.0,
        ridge: last.1,
    })
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Solves `(P + ridge·I) x = b`.
    pub fn solve(&self, b: ArrayView1<f64>) -> Result<Array1<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Mismatch(format!(
                "right-hand side of length {} for a {n}×{n} system",
                b.len()
            )));
        }
        let l = &self.factor;
        let mut y = b.to_owned();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[[i, k]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[[k, i]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        Ok(y)
    }

    /// Smallest and largest pivot `L_kk²`, a cheap conditioning indicator.
    pub fn pivot_range(&self) -> (f64, f64) {
        self.factor
            .diag()
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
                let d = v * v;
                (lo.min(d), hi.max(d))
            })
    }
}

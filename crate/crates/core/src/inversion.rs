//! Universal back-projection in two dimensions.
//!
//! For full boundary data `u` on an ellipse,
//! `f(x0) = (1/π) ∫_{∂Ω} ⟨ν_x, x0 − x⟩ ∫_R^∞ q(x, t) / sqrt(t² − R²) dt ds(x)`
//! with `R = |x0 − x|` and `q = ∂_t(u/t)`. The inner Abel integral is
//! evaluated after `t = sqrt(R² + σ²)`, which removes the singularity at
//! `t = R`, and is truncated at `t_max`.

use std::f64::consts::PI;

use ndarray::{ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::forward::{Part, WaveData};
use crate::geometry::BoundaryGeometry;
use crate::phantoms::{GridSpec, ImageField};
use crate::{Error, Result, Vec2};

/// `(−1)^{(d−2)/2} / π^{d/2}` for even `d`.
pub fn kappa_even(d: u32) -> Result<f64> {
    if d < 2 || d % 2 == 1 {
        return Err(Error::param(format!(
            "back-projection constant needs an even dimension ≥ 2, got {d}"
        )));
    }
    let sign = if (d / 2 - 1) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign / PI.powi(d as i32 / 2))
}

/// `q = ∂_t(u/t)` on the sample grid of the source data.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredData {
    pub q: WaveData,
}

/// Divides by `t` and differentiates: central differences inside, second-order
/// one-sided stencils at the first and last samples.
pub fn ubp_filter(u: &WaveData) -> Result<FilteredData> {
    let n = u.n_time;
    if n < 3 {
        return Err(Error::param(format!(
            "filter needs at least 3 time samples, got {n}"
        )));
    }
    let dt = u.dt;
    let inv = 1.0 / (2.0 * dt);
    let mut q = u.clone();
    for (src, mut dst) in u
        .samples
        .axis_iter(Axis(0))
        .zip(q.samples.axis_iter_mut(Axis(0)))
    {
        let v: Vec<f64> = src
            .iter()
            .enumerate()
            .map(|(k, x)| x / ((k + 1) as f64 * dt))
            .collect();
        dst[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv;
        for k in 1..n - 1 {
            dst[k] = (v[k + 1] - v[k - 1]) * inv;
        }
        dst[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) * inv;
    }
    Ok(FilteredData { q })
}

/// Linear interpolation of a trace sampled at `t_k = (k+1)·dt`, held constant
/// outside the sampled range.
fn sample_at(row: &[f64], dt: f64, t: f64) -> f64 {
    let s = t / dt - 1.0;
    if s <= 0.0 {
        return row[0];
    }
    let k = s as usize;
    if k + 1 >= row.len() {
        return row[row.len() - 1];
    }
    let frac = s - k as f64;
    row[k] + frac * (row[k + 1] - row[k])
}

/// `∫_R^{t_max} q(t) / sqrt(t² − R²) dt` by the composite trapezoid rule in
/// `σ = sqrt(t² − R²)` with step close to `dt`. For `R < 2·dt` the integrand
/// varies on the scale `R` near `σ = 0`, so the first `FINE_SPAN·dt` of the
/// σ-range uses the step `R/2`.
pub fn abel_integral(row: ArrayView1<f64>, dt: f64, r: f64, t_max: f64) -> f64 {
    let row = row.as_slice().expect("contiguous trace");
    abel_slice(row, dt, r, t_max)
}

const FINE_SPAN: f64 = 16.0;

fn abel_slice(row: &[f64], dt: f64, r: f64, t_max: f64) -> f64 {
    if r >= t_max {
        return 0.0;
    }
    let s_max = (t_max * t_max - r * r).sqrt();
    let r2 = r * r;
    let g = |sigma: f64| {
        let t = (r2 + sigma * sigma).sqrt();
        sample_at(row, dt, t) / t
    };
    let trapezoid = |a: f64, b: f64, step: f64| {
        let m = ((b - a) / step).ceil().max(1.0) as usize;
        let h = (b - a) / m as f64;
        let mut sum = 0.5 * (g(a) + g(b));
        for j in 1..m {
            sum += g(a + j as f64 * h);
        }
        sum * h
    };
    if r >= 2.0 * dt {
        return trapezoid(0.0, s_max, dt);
    }
    let split = s_max.min(FINE_SPAN * dt);
    let mut total = trapezoid(0.0, split, 0.5 * r);
    if split < s_max {
        total += trapezoid(split, s_max, dt);
    }
    total
}

fn check_full(q: &WaveData, geom: &BoundaryGeometry) -> Result<()> {
    if q.part != Part::Full || q.n_nodes() != geom.len() {
        return Err(Error::Mismatch(format!(
            "back-projection needs full-boundary data on {} nodes, got {} data on {} nodes; \
             stitch or zero-extend limited data first",
            geom.len(),
            q.part.as_str(),
            q.n_nodes()
        )));
    }
    if q.n_time != geom.n_time || q.dt != geom.dt {
        return Err(Error::Mismatch(
            "time grid of the data differs from the geometry".into(),
        ));
    }
    Ok(())
}

fn backproject_unchecked(q: ArrayView2<f64>, geom: &BoundaryGeometry, x0: Vec2) -> f64 {
    let mut sum = 0.0;
    for (i, node) in geom.nodes.iter().enumerate() {
        let d = x0 - node.position;
        let row = q.row(i);
        let a = abel_slice(
            row.as_slice().expect("standard layout"),
            geom.dt,
            d.norm(),
            geom.t_max,
        );
        sum += node.weight * node.normal.dot(d) * a;
    }
    sum / PI
}

/// Back-projected value at an interior point `x0`.
pub fn backproject_point(q: &FilteredData, geom: &BoundaryGeometry, x0: Vec2) -> Result<f64> {
    check_full(&q.q, geom)?;
    if !geom.domain.contains(x0) {
        return Err(Error::param(format!(
            "back-projection point ({}, {}) is not inside the domain",
            x0.x, x0.y
        )));
    }
    let samples = q.q.samples.as_standard_layout();
    Ok(backproject_unchecked(samples.view(), geom, x0))
}

/// Filters full-boundary data and back-projects it onto every grid node inside
/// the domain. Nodes outside stay zero and are masked out.
pub fn reconstruct(u: &WaveData, geom: &BoundaryGeometry, grid: GridSpec) -> Result<ImageField> {
    check_full(u, geom)?;
    let q = ubp_filter(u)?;
    let samples = q.q.samples.as_standard_layout();
    let samples = samples.view();
    let mut field = ImageField::zeros(grid, &geom.domain);
    let cells: Vec<(usize, usize)> = field
        .mask
        .indexed_iter()
        .filter(|(_, &m)| m)
        .map(|(ij, _)| ij)
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| backproject_unchecked(samples, geom, grid.point(i, j)))
        .collect();
    for (&(i, j), v) in cells.iter().zip(values) {
        field.values[[i, j]] = v;
    }
    if field.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reconstruction"));
    }
    Ok(field)
}

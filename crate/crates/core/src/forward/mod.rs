//! Wave boundary data for the free-space wave equation with initial pressure
//! `f` and zero initial velocity.
//!
//! The solution is `u = ∂_t w` with the Poisson integral
//! `w(x, t) = ∫_0^t r M_r f(x) / sqrt(t² - r²) dr`, where `M_r f(x)` is the mean
//! of `f` over the circle of radius `r` around `x`. For indicator phantoms the
//! circular means are exact arc fractions (see [`arcs`]); the radial integral
//! is split at the radii where the arc fraction is non-smooth and each piece
//! is integrated with adaptive Gauss-Kronrod after a cosine map that absorbs
//! the square-root endpoint behaviour.

pub mod arcs;
pub mod oracle;

use std::f64::consts::{FRAC_PI_2, PI};

use log::warn;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{BoundaryGeometry, BoundarySplit, Fingerprint};
use crate::phantoms::{eval_phantom, Phantom, Shape};
use crate::quadrature::{adaptive_gk, adaptive_gk_rule};
use crate::{Error, Result, Vec2};

pub use arcs::arc_fraction;
pub use oracle::oracle_wave_field;

/// Which boundary nodes a [`WaveData`] covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Full,
    Gamma1,
    Gamma2,
}

impl Part {
    pub fn as_str(self) -> &'static str {
        match self {
            Part::Full => "full",
            Part::Gamma1 => "gamma1",
            Part::Gamma2 => "gamma2",
        }
    }

    pub fn node_indices(self, geom: &BoundaryGeometry, split: &BoundarySplit) -> Vec<usize> {
        match self {
            Part::Full => (0..geom.len()).collect(),
            Part::Gamma1 => split.gamma1_idx.clone(),
            Part::Gamma2 => split.gamma2_idx.clone(),
        }
    }
}

impl std::str::FromStr for Part {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Part::Full),
            "gamma1" => Ok(Part::Gamma1),
            "gamma2" => Ok(Part::Gamma2),
            other => Err(Error::param(format!("unknown boundary part '{other}'"))),
        }
    }
}

/// Sampled `u(x_i, k·dt)`, `k = 1..=n_time`, for the nodes `node_idx`.
/// Row `r` of `samples` belongs to node `node_idx[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveData {
    pub part: Part,
    pub node_idx: Vec<usize>,
    pub dt: f64,
    pub n_time: usize,
    pub samples: Array2<f64>,
    pub fingerprint: Fingerprint,
}

impl WaveData {
    pub fn zeros(part: Part, geom: &BoundaryGeometry, split: &BoundarySplit) -> Self {
        let node_idx = part.node_indices(geom, split);
        WaveData {
            part,
            samples: Array2::zeros((node_idx.len(), geom.n_time)),
            node_idx,
            dt: geom.dt,
            n_time: geom.n_time,
            fingerprint: Fingerprint::of(geom, split),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.node_idx.len()
    }

    /// Same nodes, time grid and geometry.
    pub fn check_same_layout(&self, other: &WaveData) -> Result<()> {
        if self.fingerprint != other.fingerprint {
            return Err(Error::Fingerprint {
                expected: self.fingerprint.to_hex(),
                found: other.fingerprint.to_hex(),
            });
        }
        if self.node_idx != other.node_idx || self.n_time != other.n_time || self.dt != other.dt {
            return Err(Error::Mismatch(format!(
                "{} data on {} nodes × {} samples vs {} data on {} nodes × {} samples",
                self.part.as_str(),
                self.n_nodes(),
                self.n_time,
                other.part.as_str(),
                other.n_nodes(),
                other.n_time
            )));
        }
        Ok(())
    }

    pub fn check_geometry(&self, geom: &BoundaryGeometry, split: &BoundarySplit) -> Result<()> {
        let fp = Fingerprint::of(geom, split);
        if fp != self.fingerprint {
            return Err(Error::Fingerprint {
                expected: fp.to_hex(),
                found: self.fingerprint.to_hex(),
            });
        }
        if self.node_idx != self.part.node_indices(geom, split) {
            return Err(Error::Mismatch(format!(
                "{} node set does not match the split",
                self.part.as_str()
            )));
        }
        Ok(())
    }

    /// Rows of a full-boundary data set belonging to `part`.
    pub fn restrict(&self, split: &BoundarySplit, part: Part) -> Result<WaveData> {
        if self.part != Part::Full {
            return Err(Error::Mismatch(
                "only full-boundary data can be restricted".into(),
            ));
        }
        let idx = match part {
            Part::Full => return Ok(self.clone()),
            Part::Gamma1 => &split.gamma1_idx,
            Part::Gamma2 => &split.gamma2_idx,
        };
        let samples = self.samples.select(ndarray::Axis(0), idx);
        Ok(WaveData {
            part,
            node_idx: idx.clone(),
            samples,
            ..self.clone_header()
        })
    }

    fn clone_header(&self) -> WaveData {
        WaveData {
            part: self.part,
            node_idx: Vec::new(),
            dt: self.dt,
            n_time: self.n_time,
            samples: Array2::zeros((0, 0)),
            fingerprint: self.fingerprint,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }
}

/// Mean of `p` over the circle of radius `radius` about `center`, by the
/// composite trapezoid rule with `quad_order` nodes per unit radius (at least
/// `quad_order`). Converges like `1/quad_order` across indicator edges; see
/// [`arc_mean`] for the exact value.
pub fn circular_mean(p: &Phantom, center: Vec2, radius: f64, quad_order: usize) -> f64 {
    if radius <= 0.0 {
        return eval_phantom(p, center);
    }
    let n = quad_order
        .max(1)
        .max((quad_order as f64 * radius).ceil() as usize);
    let step = 2.0 * PI / n as f64;
    let sum: f64 = (0..n)
        .map(|k| eval_phantom(p, center + Vec2::from_angle(k as f64 * step) * radius))
        .sum();
    sum / n as f64
}

/// Exact circular mean of an indicator phantom.
pub fn arc_mean(p: &Phantom, center: Vec2, radius: f64) -> f64 {
    p.shapes()
        .iter()
        .map(|(c, s)| c * arc_fraction(s, center, radius))
        .sum()
}

/// Absolute tolerance of one Poisson-integral segment, per unit of `t·len`.
const W_TOL: f64 = 1e-12;
const MAX_SPLITS: usize = 400;

/// `u ↦ ((1 - cos πu)/2, d/du)`: square-root behaviour at either end of `[0, 1]`
/// becomes smooth in `u`.
#[inline]
fn cosine_map(u: f64) -> (f64, f64) {
    let theta = PI * u;
    (0.5 * (1.0 - theta.cos()), FRAC_PI_2 * theta.sin())
}

/// Poisson integral `w(x, t)` of one indicator shape, evaluated at many times.
struct ShapePoisson<'a> {
    shape: &'a Shape,
    x: Vec2,
    breaks: Vec<f64>,
    /// `(r_q, W_q)`: once `t` is well past the support the Abel kernel is
    /// smooth and `w(t) = Σ W_q / sqrt(t² - r_q²)`.
    far: Vec<(f64, f64)>,
    far_start: f64,
}

impl<'a> ShapePoisson<'a> {
    fn new(shape: &'a Shape, x: Vec2) -> Self {
        let breaks = arcs::critical_radii(shape, x);
        let lo = breaks[0];
        let hi = *breaks.last().unwrap();
        let far_start = hi + (hi - lo).max(1e-3);
        let mut far = Vec::new();
        for seg in breaks.windows(2) {
            let len = seg[1] - seg[0];
            if len <= 0.0 {
                continue;
            }
            let weight = |u: f64| -> (f64, f64) {
                let (s, ds) = cosine_map(u);
                let r = seg[0] + len * s;
                (r, len * ds * r * arc_fraction(shape, x, r))
            };
            // Refined against the kernel at `far_start`, where it is least smooth.
            let kernel = |r: f64| far_start / (far_start * far_start - r * r).sqrt();
            let rule = adaptive_gk_rule(
                |u| {
                    let (r, g) = weight(u);
                    g * kernel(r)
                },
                0.0,
                1.0,
                W_TOL * hi * len,
                2,
                MAX_SPLITS,
            );
            for (u, wt) in rule {
                let (r, g) = weight(u);
                if g != 0.0 {
                    far.push((r, wt * g));
                }
            }
        }
        ShapePoisson {
            shape,
            x,
            far_start,
            breaks,
            far,
        }
    }

    fn w(&self, t: f64) -> f64 {
        if t <= self.breaks[0] {
            return 0.0;
        }
        if t >= self.far_start {
            let t2 = t * t;
            return self
                .far
                .iter()
                .map(|&(r, wt)| wt / (t2 - r * r).sqrt())
                .sum();
        }
        // r = t sin φ removes the 1/sqrt(t² - r²) singularity.
        let mut acc = 0.0;
        for seg in self.breaks.windows(2) {
            if seg[0] >= t {
                break;
            }
            let phi_lo = (seg[0] / t).asin();
            let phi_hi = if seg[1] >= t {
                FRAC_PI_2
            } else {
                (seg[1] / t).asin()
            };
            let len = phi_hi - phi_lo;
            if len <= 0.0 {
                continue;
            }
            let integrand = |u: f64| {
                let (s, ds) = cosine_map(u);
                let r = t * (phi_lo + len * s).sin();
                len * ds * r * arc_fraction(self.shape, self.x, r)
            };
            acc += adaptive_gk(integrand, 0.0, 1.0, W_TOL * t * len, 2, MAX_SPLITS);
        }
        acc
    }
}

/// `u(x, k·dt)` for `k = 1..=n_time` as the staggered difference
/// `(w((k+½)dt) - w((k-½)dt)) / dt`.
pub fn wave_trace(p: &Phantom, x: Vec2, geom: &BoundaryGeometry) -> Vec<f64> {
    let n = geom.n_time;
    let dt = geom.dt;
    let mut out = vec![0.0; n];
    let mut w = vec![0.0; n + 1];
    for (coef, shape) in p.shapes() {
        if coef == 0.0 {
            continue;
        }
        let sp = ShapePoisson::new(&shape, x);
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = sp.w((j as f64 + 0.5) * dt);
        }
        for k in 0..n {
            out[k] += coef * (w[k + 1] - w[k]) / dt;
        }
    }
    out
}

/// Wave data of `p` on the nodes of `part`.
pub fn simulate_wave_data(
    p: &Phantom,
    geom: &BoundaryGeometry,
    split: &BoundarySplit,
    part: Part,
) -> Result<WaveData> {
    p.validate()?;
    if !p.support_within(|q| geom.domain.contains(q)) {
        return Err(Error::param(
            "phantom support is not contained in the domain",
        ));
    }
    if part != Part::Full && !p.support_within(|q| split.detection_region_contains(q)) {
        warn!("phantom support leaves the detection region of Γ1; limited-view data are unstable");
    }
    let node_idx = part.node_indices(geom, split);
    let rows: Vec<Vec<f64>> = node_idx
        .par_iter()
        .map(|&i| wave_trace(p, geom.nodes[i].position, geom))
        .collect();
    let mut samples = Array2::zeros((node_idx.len(), geom.n_time));
    for (mut row, values) in samples.rows_mut().into_iter().zip(rows) {
        row.assign(&ndarray::ArrayView1::from(&values));
    }
    let data = WaveData {
        part,
        node_idx,
        dt: geom.dt,
        n_time: geom.n_time,
        samples,
        fingerprint: Fingerprint::of(geom, split),
    };
    if !data.is_finite() {
        return Err(Error::NonFinite("simulated wave data"));
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_boundary, split_boundary, EllipseDomain};
    use crate::phantoms::{default_k_box, reference_phantom, training_partition};

    fn geometry(spacing: f64, dt: f64, t_max: f64) -> (BoundaryGeometry, BoundarySplit) {
        let g = build_boundary(EllipseDomain::new(2.0, 1.0).unwrap(), spacing, dt, t_max).unwrap();
        let s = split_boundary(&g, (0.97, 2.17)).unwrap();
        (g, s)
    }

    #[test]
    fn zero_phantom_zero_trace() {
        let (g, _) = geometry(0.1, 0.05, 5.0);
        assert!(wave_trace(&Phantom::zero(), g.nodes[0].position, &g)
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn constant_initial_pressure_stays_constant() {
        // x deep inside a large disc: u = 1 until the edge signal arrives.
        let p = Phantom::ellipse(Vec2::ZERO, 5.0, 5.0, 0.0).unwrap();
        let g = build_boundary(EllipseDomain::new(1.0, 1.0).unwrap(), 0.5, 0.05, 3.0).unwrap();
        let u = wave_trace(&p, Vec2::new(0.3, -0.2), &g);
        for (k, v) in u.iter().enumerate().take(50) {
            assert!((v - 1.0).abs() < 1e-10, "k={k} u={v}");
        }
    }

    #[test]
    fn trapezoid_mean_converges_to_arc_mean() {
        let p = Phantom::square(0.0, 1.0, 0.0, 1.0).unwrap();
        let c = Vec2::new(0.5, 0.5);
        let exact = arc_mean(&p, c, 0.7);
        for order in [512, 4096] {
            let approx = circular_mean(&p, c, 0.7, order);
            assert!(
                (approx - exact).abs() <= 8.0 / order as f64,
                "{order}: {approx} vs {exact}"
            );
        }
        assert_eq!(circular_mean(&p, c, 0.0, 16), 1.0);
        let disc = Phantom::ellipse(Vec2::ZERO, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(circular_mean(&disc, Vec2::ZERO, 0.5, 512), 1.0);
        assert_eq!(circular_mean(&disc, Vec2::ZERO, 2.0, 512), 0.0);
    }

    #[test]
    fn finite_speed_of_propagation() {
        let (g, s) = geometry(0.1, 0.02, 6.0);
        let p = reference_phantom();
        for &i in s.gamma1_idx.iter().step_by(7) {
            let x = g.nodes[i].position;
            let d = p.distance_to_support(x);
            let u = wave_trace(&p, x, &g);
            for (k, v) in u.iter().enumerate() {
                let t = (k + 1) as f64 * g.dt;
                if t < d - g.dt {
                    assert!(v.abs() <= 1e-3, "node {i} t={t} u={v}");
                }
            }
        }
    }

    #[test]
    fn sum_phantom_is_linear() {
        let (g, s) = geometry(0.1, 0.04, 8.0);
        let parts = training_partition(default_k_box(), 8, 4).unwrap();
        let d1 = simulate_wave_data(&parts[0], &g, &s, Part::Gamma1).unwrap();
        let d2 = simulate_wave_data(&parts[1], &g, &s, Part::Gamma1).unwrap();
        let sum = Phantom::sum(vec![(0.5, parts[0].clone()), (0.5, parts[1].clone())]);
        let ds = simulate_wave_data(&sum, &g, &s, Part::Gamma1).unwrap();
        let expected = (&d1.samples + &d2.samples) * 0.5;
        let scale = expected.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = (&ds.samples - &expected)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff <= 1e-10 * scale, "{diff} vs {scale}");
    }

    #[test]
    fn restrict_matches_direct_simulation() {
        let (g, s) = geometry(0.2, 0.05, 4.0);
        let p = reference_phantom();
        let full = simulate_wave_data(&p, &g, &s, Part::Full).unwrap();
        let g2 = simulate_wave_data(&p, &g, &s, Part::Gamma2).unwrap();
        assert_eq!(full.restrict(&s, Part::Gamma2).unwrap(), g2);
    }

    #[test]
    fn support_outside_domain_rejected() {
        let (g, s) = geometry(0.2, 0.05, 4.0);
        let p = Phantom::square(1.5, 2.5, 0.0, 0.5).unwrap();
        assert!(simulate_wave_data(&p, &g, &s, Part::Full).is_err());
    }

    #[test]
    fn late_time_tail_is_small() {
        let (g, s) = geometry(0.25, 0.01, 20.0);
        let p = reference_phantom();
        let i = s.gamma1_idx[0];
        let u = wave_trace(&p, g.nodes[i].position, &g);
        let total: f64 = u.iter().map(|v| v * v).sum();
        let tail: f64 = u[u.len() * 9 / 10..].iter().map(|v| v * v).sum();
        assert!(tail / total < 1e-2, "tail fraction {}", tail / total);
    }
}

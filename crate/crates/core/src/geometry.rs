//! Elliptical domain, boundary discretization and the observed/unobserved
//! boundary split.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::quadrature::{adaptive_gk, GaussLegendre};
use crate::{Error, Result, Vec2};

/// Ellipse `(x/a1)^2 + (y/a2)^2 < 1` centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseDomain {
    pub a1: f64,
    pub a2: f64,
}

impl EllipseDomain {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0 && a1.is_finite() && a2.is_finite()) {
            return Err(Error::param(format!(
                "semi-axes must be positive, got ({a1}, {a2})"
            )));
        }
        Ok(EllipseDomain { a1, a2 })
    }

    /// The quadratic form `g(x) = (x1/a1)^2 + (x2/a2)^2`.
    #[inline]
    pub fn level(&self, p: Vec2) -> f64 {
        (p.x / self.a1).powi(2) + (p.y / self.a2).powi(2)
    }

    #[inline]
    pub fn contains(&self, p: Vec2) -> bool {
        self.level(p) < 1.0
    }

    #[inline]
    pub fn point(&self, theta: f64) -> Vec2 {
        Vec2::new(self.a1 * theta.cos(), self.a2 * theta.sin())
    }

    /// `|d/dθ point(θ)|`
    #[inline]
    pub fn speed(&self, theta: f64) -> f64 {
        (self.a1 * theta.sin()).hypot(self.a2 * theta.cos())
    }

    pub fn outward_normal(&self, p: Vec2) -> Vec2 {
        let g = Vec2::new(p.x / (self.a1 * self.a1), p.y / (self.a2 * self.a2));
        g * (1.0 / g.norm())
    }

    pub fn perimeter(&self) -> f64 {
        adaptive_gk(|t| self.speed(t), -PI, PI, 1e-14, 8, 2000)
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.a1.max(self.a2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNode {
    pub position: Vec2,
    /// Parameter angle in `[-π, π)`.
    pub theta: f64,
    pub normal: Vec2,
    /// Arc-length quadrature weight.
    pub weight: f64,
}

/// Discretized boundary together with the time grid `t_k = k·dt`, `k = 1..=n_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGeometry {
    pub domain: EllipseDomain,
    pub spacing_target: f64,
    pub nodes: Vec<BoundaryNode>,
    pub dt: f64,
    pub n_time: usize,
    pub t_max: f64,
}

impl BoundaryGeometry {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Sample times `dt, 2dt, .., n_time·dt`.
    pub fn times(&self) -> Vec<f64> {
        (1..=self.n_time).map(|k| self.time(k)).collect()
    }
}

/// Place `round(perimeter / spacing)` nodes equidistant in arc length.
pub fn build_boundary(
    domain: EllipseDomain,
    spacing_target: f64,
    dt: f64,
    t_max: f64,
) -> Result<BoundaryGeometry> {
    if !(spacing_target > 0.0) {
        return Err(Error::param(format!(
            "spacing must be positive, got {spacing_target}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::param(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if !(t_max >= dt) || !t_max.is_finite() {
        return Err(Error::param(format!(
            "t_max = {t_max} must be at least dt = {dt}"
        )));
    }
    let perimeter = domain.perimeter();
    let count = (perimeter / spacing_target).round() as usize;
    if count < 3 {
        return Err(Error::param(format!(
            "spacing {spacing_target} leaves only {count} nodes on a boundary of length {perimeter}"
        )));
    }
    let step = perimeter / count as f64;
    let gl = GaussLegendre::new(20);

    let mut thetas = Vec::with_capacity(count);
    let mut theta = -PI;
    thetas.push(theta);
    for _ in 1..count {
        // Newton on the arc length measured from the previous node.
        let start = theta;
        let mut next = start + step / domain.speed(start);
        for _ in 0..50 {
            let arc = gl.integrate(start, next, |t| domain.speed(t));
            let delta = (arc - step) / domain.speed(next);
            next -= delta;
            if delta.abs() < 1e-10 * step {
                break;
            }
        }
        theta = next;
        thetas.push(theta);
    }

    let nodes = thetas
        .into_iter()
        .map(|t| {
            let theta = wrap_angle(t);
            let position = domain.point(theta);
            BoundaryNode {
                position,
                theta,
                normal: domain.outward_normal(position),
                weight: step,
            }
        })
        .collect();

    let n_time = (t_max / dt).round().max(1.0) as usize;
    Ok(BoundaryGeometry {
        domain,
        spacing_target,
        nodes,
        dt,
        n_time,
        t_max: n_time as f64 * dt,
    })
}

/// Wrap into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Partition of the boundary nodes into observed (`Γ1`) and unobserved (`Γ2`)
/// parts; `Γ2` is the half-open parameter interval `gamma2_theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySplit {
    pub gamma2_theta: (f64, f64),
    pub gamma1_idx: Vec<usize>,
    pub gamma2_idx: Vec<usize>,
    hull: Vec<Vec2>,
}

pub fn split_boundary(
    geom: &BoundaryGeometry,
    theta_interval: (f64, f64),
) -> Result<BoundarySplit> {
    let (lo, hi) = theta_interval;
    let len = hi - lo;
    if !(len > 0.0 && len < TAU) {
        return Err(Error::param(format!(
            "Γ2 interval [{lo}, {hi}) must have length in (0, 2π)"
        )));
    }
    let mut gamma1_idx = Vec::new();
    let mut gamma2_idx = Vec::new();
    for (i, node) in geom.nodes.iter().enumerate() {
        let offset = (node.theta - lo).rem_euclid(TAU);
        if offset < len {
            gamma2_idx.push(i);
        } else {
            gamma1_idx.push(i);
        }
    }
    let pts: Vec<Vec2> = gamma1_idx.iter().map(|&i| geom.nodes[i].position).collect();
    Ok(BoundarySplit {
        gamma2_theta: theta_interval,
        gamma1_idx,
        gamma2_idx,
        hull: convex_hull(&pts),
    })
}

impl BoundarySplit {
    pub fn gamma2_fraction(&self) -> f64 {
        let total = self.gamma1_idx.len() + self.gamma2_idx.len();
        self.gamma2_idx.len() as f64 / total as f64
    }

    /// Strict interior of the convex hull of the `Γ1` nodes.
    pub fn detection_region_contains(&self, p: Vec2) -> bool {
        hull_contains(&self.hull, p)
    }

    pub fn detection_hull(&self) -> &[Vec2] {
        &self.hull
    }
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

pub fn hull_contains(hull: &[Vec2], p: Vec2) -> bool {
    if hull.len() < 3 {
        return false;
    }
    (0..hull.len()).all(|i| {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        (b - a).cross(p - a) > 0.0
    })
}

/// SHA-256 over the discretization and split parameters. Traces computed on
/// different grids never share a fingerprint.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn of(geom: &BoundaryGeometry, split: &BoundarySplit) -> Self {
        let mut h = Sha256::new();
        h.update(b"lvpat-geometry-v1");
        for v in [
            geom.domain.a1,
            geom.domain.a2,
            geom.spacing_target,
            geom.dt,
            geom.t_max,
            split.gamma2_theta.0,
            split.gamma2_theta.1,
        ] {
            h.update(v.to_le_bytes());
        }
        h.update((geom.nodes.len() as u64).to_le_bytes());
        h.update((geom.n_time as u64).to_le_bytes());
        let digest = h.finalize();
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        Fingerprint(out)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)
            .map_err(|_| Error::container(format!("bad fingerprint '{s}'")))?;
        Ok(Fingerprint(out))
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({})", &self.to_hex()[..12])
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_geometry(spacing: f64) -> BoundaryGeometry {
        build_boundary(EllipseDomain::new(2.0, 1.0).unwrap(), spacing, 0.01, 20.0).unwrap()
    }

    /// Complete elliptic integral of the second kind by the AGM iteration.
    fn ellipse_perimeter_agm(a: f64, b: f64) -> f64 {
        let (a, b) = if a >= b { (a, b) } else { (b, a) };
        let mut an = 1.0f64;
        let mut bn = b / a;
        let e2 = 1.0 - (b / a).powi(2);
        let mut sum = e2 / 2.0;
        let mut pow = 0.5;
        for _ in 0..40 {
            let a_next = 0.5 * (an + bn);
            let b_next = (an * bn).sqrt();
            let c = 0.5 * (an - bn);
            pow *= 2.0;
            sum += pow * c * c;
            an = a_next;
            bn = b_next;
            if c.abs() < 1e-17 {
                break;
            }
        }
        let k = PI / (2.0 * an);
        4.0 * a * k * (1.0 - sum)
    }

    #[test]
    fn perimeter_matches_elliptic_integral() {
        let d = EllipseDomain::new(2.0, 1.0).unwrap();
        let oracle = ellipse_perimeter_agm(2.0, 1.0);
        assert!(
            (d.perimeter() - oracle).abs() / oracle < 1e-8,
            "{} vs {oracle}",
            d.perimeter()
        );
        let circle = EllipseDomain::new(1.0, 1.0).unwrap();
        assert!((circle.perimeter() - TAU).abs() < 1e-12);
    }

    #[test]
    fn default_spacing_interval() {
        let g = default_geometry(0.01);
        let n = g.len();
        let perimeter = g.domain.perimeter();
        assert_eq!(n, (perimeter / 0.01).round() as usize);
        for i in 0..n {
            let d = g.nodes[i].position.dist(g.nodes[(i + 1) % n].position);
            assert!((0.0099..=0.0101).contains(&d), "spacing {d} at node {i}");
        }
        assert!((g.perimeter() - perimeter).abs() < 1e-6);
        assert_eq!(g.n_time, 2000);
    }

    #[test]
    fn circle_with_four_nodes() {
        let g = build_boundary(EllipseDomain::new(1.0, 1.0).unwrap(), TAU / 4.0, 0.1, 1.0).unwrap();
        assert_eq!(g.len(), 4);
        for e in [0.0, PI / 2.0, PI, 1.5 * PI] {
            let hit = g.nodes.iter().any(|n| wrap_angle(n.theta - e).abs() < 1e-9);
            assert!(hit, "no node at θ = {e}");
        }
        for n in &g.nodes {
            assert!((n.normal - n.position).norm() < 1e-12);
        }
    }

    #[test]
    fn normals_unit_and_outward() {
        let g = default_geometry(0.05);
        for n in &g.nodes {
            assert!((n.normal.norm() - 1.0).abs() < 1e-12);
            let grad = Vec2::new(n.position.x / 4.0, n.position.y);
            assert!(n.normal.dot(grad) > 0.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let d = EllipseDomain::new(2.0, 1.0).unwrap();
        assert!(EllipseDomain::new(0.0, 1.0).is_err());
        assert!(build_boundary(d, 0.0, 0.01, 1.0).is_err());
        assert!(build_boundary(d, 0.01, -1.0, 1.0).is_err());
        assert!(build_boundary(d, 0.01, 0.1, 0.05).is_err());
    }

    #[test]
    fn default_split_fraction() {
        let g = default_geometry(0.01);
        let s = split_boundary(&g, (0.97, 2.17)).unwrap();
        assert_eq!(s.gamma1_idx.len() + s.gamma2_idx.len(), g.len());
        let angular = s.gamma2_idx.len() as f64 / g.len() as f64;
        // Arc-length equidistant nodes: the cap is ~18-20% of nodes, like the
        // 1.2/2π ≈ 19% of parameter angles.
        assert!((0.15..0.25).contains(&angular), "{angular}");
        for &i in &s.gamma2_idx {
            let t = g.nodes[i].theta;
            assert!((0.97..2.17).contains(&t));
        }
        for &i in &s.gamma1_idx {
            let t = g.nodes[i].theta;
            assert!(!(0.97..2.17).contains(&t));
        }
    }

    #[test]
    fn near_full_interval() {
        let g = default_geometry(0.05);
        let eps = 0.2;
        let s = split_boundary(&g, (0.0, TAU - eps)).unwrap();
        for &i in &s.gamma1_idx {
            let t = g.nodes[i].theta.rem_euclid(TAU);
            assert!(t >= TAU - eps - 1e-12);
        }
        assert!(split_boundary(&g, (1.0, 1.0)).is_err());
        assert!(split_boundary(&g, (0.0, TAU)).is_err());
    }

    fn brute_force_hull_contains(points: &[Vec2], p: Vec2) -> bool {
        // p is strictly inside the hull iff no line through two points has all
        // points on one closed side with p strictly on the other or on it.
        let n = points.len();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let a = points[i];
                let b = points[j];
                let d = b - a;
                if d.norm() == 0.0 {
                    continue;
                }
                if points.iter().all(|&q| d.cross(q - a) >= 0.0) && d.cross(p - a) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn detection_region_points() {
        let g = default_geometry(0.05);
        let s = split_boundary(&g, (0.97, 2.17)).unwrap();
        let pts: Vec<Vec2> = s.gamma1_idx.iter().map(|&i| g.nodes[i].position).collect();
        for (p, expected) in [
            (Vec2::new(-0.375, -0.26), true),
            (Vec2::new(0.0, 0.999), false),
            (Vec2::new(10.0, 0.0), false),
        ] {
            assert_eq!(brute_force_hull_contains(&pts, p), expected);
            assert_eq!(s.detection_region_contains(p), expected, "{p:?}");
        }
    }

    #[test]
    fn wrap_angle_range() {
        for t in [-10.0, -PI, 0.0, PI, 3.5, 100.0] {
            let w = wrap_angle(t);
            assert!((-PI..PI).contains(&w));
            assert!(((w - t) / TAU - ((w - t) / TAU).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn fingerprint_hex_roundtrip() {
        let g = default_geometry(0.1);
        let s = split_boundary(&g, (0.97, 2.17)).unwrap();
        let f = Fingerprint::of(&g, &s);
        assert_eq!(Fingerprint::from_hex(&f.to_hex()).unwrap(), f);
        let s2 = split_boundary(&g, (0.9, 2.17)).unwrap();
        assert_ne!(Fingerprint::of(&g, &s2), f);
    }
}

//! Exact circle/shape intersections: the fraction of a circle lying inside a
//! convex indicator, and the radii at which that fraction is non-smooth.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::phantoms::{EllipseShape, Rect, Shape};
use crate::Vec2;

/// Fraction of the circle `|y - center| = radius` inside `shape`.
pub fn arc_fraction(shape: &Shape, center: Vec2, radius: f64) -> f64 {
    if radius <= 0.0 {
        return if shape.contains(center) { 1.0 } else { 0.0 };
    }
    match shape {
        Shape::Rect(r) => rect_arc_fraction(r, center, radius),
        Shape::Ellipse(e) => ellipse_arc_fraction(e, center, radius),
    }
}

fn rect_arc_fraction(rect: &Rect, c: Vec2, r: f64) -> f64 {
    // Quick rejects: circle entirely outside the box, or box inside the disc.
    let dx = (rect.x_lo - c.x).max(0.0).max(c.x - rect.x_hi);
    let dy = (rect.y_lo - c.y).max(0.0).max(c.y - rect.y_hi);
    if dx.hypot(dy) >= r {
        return 0.0;
    }
    let far_x = (c.x - rect.x_lo).abs().max((rect.x_hi - c.x).abs());
    let far_y = (c.y - rect.y_lo).abs().max((rect.y_hi - c.y).abs());
    if far_x.hypot(far_y) <= r {
        return 0.0;
    }

    let mut angles = [0.0f64; 8];
    let mut n = 0;
    for xl in [rect.x_lo, rect.x_hi] {
        let d = (xl - c.x) / r;
        if d.abs() < 1.0 {
            let a = d.acos();
            angles[n] = a;
            angles[n + 1] = TAU - a;
            n += 2;
        }
    }
    for yl in [rect.y_lo, rect.y_hi] {
        let d = (yl - c.y) / r;
        if d.abs() < 1.0 {
            let b = d.asin();
            angles[n] = b.rem_euclid(TAU);
            angles[n + 1] = PI - b;
            n += 2;
        }
    }
    let inside = |phi: f64| rect.contains(c + Vec2::from_angle(phi) * r);
    sum_inside_arcs(&mut angles[..n], inside)
}

fn ellipse_arc_fraction(e: &EllipseShape, c: Vec2, r: f64) -> f64 {
    let p = e.to_local(c);
    let ia = 1.0 / (e.semi_a * e.semi_a);
    let ib = 1.0 / (e.semi_b * e.semi_b);
    let coeffs = [
        p.x * p.x * ia + p.y * p.y * ib + 0.5 * r * r * (ia + ib) - 1.0,
        2.0 * p.x * r * ia,
        2.0 * p.y * r * ib,
        0.5 * r * r * (ia - ib),
        0.0,
    ];
    let mut roots = trig_quadratic_roots(coeffs);
    let inside = |phi: f64| eval_trig_quadratic(&coeffs, phi) < 0.0;
    sum_inside_arcs(&mut roots, inside)
}

/// Sort crossing angles and add up the arcs whose midpoint is inside.
fn sum_inside_arcs(angles: &mut [f64], inside: impl Fn(f64) -> bool) -> f64 {
    if angles.is_empty() {
        return if inside(0.0) { 1.0 } else { 0.0 };
    }
    for a in angles.iter_mut() {
        *a = a.rem_euclid(TAU);
    }
    angles.sort_by(f64::total_cmp);
    let n = angles.len();
    let mut total = 0.0;
    for k in 0..n {
        let lo = angles[k];
        let hi = if k + 1 < n {
            angles[k + 1]
        } else {
            angles[0] + TAU
        };
        let len = hi - lo;
        if len > 0.0 && inside(lo + 0.5 * len) {
            total += len;
        }
    }
    (total / TAU).clamp(0.0, 1.0)
}

/// Radii at which the circle around `x` is tangent to the shape's boundary or
/// passes through a corner; the arc fraction is smooth between them and zero
/// outside `[min, max]`. Includes `0` when `x` lies inside the shape.
pub fn critical_radii(shape: &Shape, x: Vec2) -> Vec<f64> {
    let mut radii = match shape {
        Shape::Rect(r) => rect_critical_radii(r, x),
        Shape::Ellipse(e) => ellipse_critical_radii(e, x),
    };
    if shape.contains(x) {
        radii.push(0.0);
    }
    radii.sort_by(f64::total_cmp);
    radii.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    radii
}

fn rect_critical_radii(r: &Rect, x: Vec2) -> Vec<f64> {
    let mut out: Vec<f64> = r.corners().iter().map(|c| c.dist(x)).collect();
    if r.x_lo < x.x && x.x < r.x_hi {
        out.push((x.y - r.y_lo).abs());
        out.push((x.y - r.y_hi).abs());
    }
    if r.y_lo < x.y && x.y < r.y_hi {
        out.push((x.x - r.x_lo).abs());
        out.push((x.x - r.x_hi).abs());
    }
    out
}

/// Distances from `x` to the critical points of the distance function along
/// the ellipse boundary.
pub fn ellipse_critical_radii(e: &EllipseShape, x: Vec2) -> Vec<f64> {
    let p = e.to_local(x);
    let (a, b) = (e.semi_a, e.semi_b);
    // d/ds |(a cos s, b sin s) - p|^2 / 2
    let coeffs = [0.0, -b * p.y, a * p.x, 0.0, 0.5 * (b * b - a * a)];
    let mut roots = trig_quadratic_roots(coeffs);
    if roots.is_empty() {
        // circle centred on x: every boundary point is critical
        roots.push(0.0);
    }
    roots
        .into_iter()
        .map(|s| Vec2::new(a * s.cos() - p.x, b * s.sin() - p.y).norm())
        .collect()
}

#[inline]
pub(crate) fn eval_trig_quadratic(c: &[f64; 5], phi: f64) -> f64 {
    let (s1, c1) = phi.sin_cos();
    let (s2, c2) = (2.0 * phi).sin_cos();
    c[0] + c[1] * c1 + c[2] * s1 + c[3] * c2 + c[4] * s2
}

#[inline]
fn eval_trig_quadratic_derivative(c: &[f64; 5], phi: f64) -> f64 {
    let (s1, c1) = phi.sin_cos();
    let (s2, c2) = (2.0 * phi).sin_cos();
    -c[1] * s1 + c[2] * c1 - 2.0 * c[3] * s2 + 2.0 * c[4] * c2
}

/// Real roots in `[0, 2π)` of `c0 + c1 cos φ + c2 sin φ + c3 cos 2φ + c4 sin 2φ`.
///
/// With `z = e^{iφ}` the trigonometric polynomial becomes `z^{-2}` times a
/// complex quartic; its unit-modulus roots are the real roots in `φ`.
pub fn trig_quadratic_roots(c: [f64; 5]) -> Vec<f64> {
    let half = |re: f64, im: f64| Complex64::new(0.5 * re, 0.5 * im);
    let poly = [
        half(c[3], c[4]),
        half(c[1], c[2]),
        Complex64::new(c[0], 0.0),
        half(c[1], -c[2]),
        half(c[3], -c[4]),
    ];
    let scale = poly.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let tiny = 1e-14 * scale;
    let lo = poly.iter().position(|p| p.norm() > tiny).unwrap();
    let hi = poly.iter().rposition(|p| p.norm() > tiny).unwrap();
    if hi == lo {
        return Vec::new();
    }
    let zs = polynomial_roots(&poly[lo..=hi]);

    let mut roots: Vec<f64> = Vec::with_capacity(4);
    for z in zs {
        if (z.norm() - 1.0).abs() > 1e-6 {
            continue;
        }
        let mut phi = z.arg();
        for _ in 0..4 {
            let d = eval_trig_quadratic_derivative(&c, phi);
            if d == 0.0 {
                break;
            }
            let step = eval_trig_quadratic(&c, phi) / d;
            if step.abs() > 1e-6 {
                break;
            }
            phi -= step;
        }
        roots.push(phi.rem_euclid(TAU));
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    roots
}

/// All complex roots of `Σ p_k z^k` (ascending coefficients, nonzero leading
/// coefficient) by the Aberth-Ehrlich iteration.
fn polynomial_roots(p: &[Complex64]) -> Vec<Complex64> {
    let deg = p.len() - 1;
    let lead = p[deg];
    let monic: Vec<Complex64> = p.iter().map(|&c| c / lead).collect();
    if deg == 1 {
        return vec![-monic[0]];
    }
    let eval = |z: Complex64| {
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for &coef in monic.iter().rev() {
            d = d * z + v;
            v = v * z + coef;
        }
        (v, d)
    };
    let radius = monic[..deg]
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
        .sqrt()
        .clamp(0.5, 2.0);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| Complex64::from_polar(radius, TAU * k as f64 / deg as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut worst = 0.0f64;
        for k in 0..deg {
            let (v, d) = eval(z[k]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / d;
            let mut repulsion = Complex64::new(0.0, 0.0);
            for j in 0..deg {
                if j != k {
                    let diff = z[k] - z[j];
                    if diff.norm() > 0.0 {
                        repulsion += Complex64::new(1.0, 0.0) / diff;
                    }
                }
            }
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let step = if denom.norm() > 0.0 {
                ratio / denom
            } else {
                ratio
            };
            if step.is_finite() {
                z[k] -= step;
                worst = worst.max(step.norm() / (1.0 + z[k].norm()));
            }
        }
        if worst < 1e-15 {
            break;
        }
    }
    z
}

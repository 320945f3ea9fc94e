//! Symbolic initial pressures and their grid sampling.

use std::f64::consts::PI;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::EllipseDomain;
use crate::{Error, Result, Vec2};

/// Half-open box `[x_lo, x_hi) × [y_lo, y_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        let r = Rect {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.x_lo, self.x_hi, self.y_lo, self.y_hi]
            .iter()
            .all(|v| v.is_finite())
            && self.x_hi > self.x_lo
            && self.y_hi > self.y_lo;
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("degenerate box {self:?}")))
        }
    }

    #[inline]
    pub fn contains(&self, p: Vec2) -> bool {
        self.x_lo <= p.x && p.x < self.x_hi && self.y_lo <= p.y && p.y < self.y_hi
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Counter-clockwise from the lower-left corner.
    pub fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.x_lo, self.y_lo),
            Vec2::new(self.x_hi, self.y_lo),
            Vec2::new(self.x_hi, self.y_hi),
            Vec2::new(self.x_lo, self.y_hi),
        ]
    }
}

/// Ellipse with semi-axis `semi_a` along the direction `rotation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseShape {
    pub center: Vec2,
    pub semi_a: f64,
    pub semi_b: f64,
    #[serde(default)]
    pub rotation: f64,
}

impl EllipseShape {
    pub fn new(center: Vec2, semi_a: f64, semi_b: f64, rotation: f64) -> Result<Self> {
        let e = EllipseShape {
            center,
            semi_a,
            semi_b,
            rotation,
        };
        e.validate()?;
        Ok(e)
    }

    fn validate(&self) -> Result<()> {
        if self.center.is_finite()
            && self.semi_a > 0.0
            && self.semi_b > 0.0
            && self.semi_a.is_finite()
            && self.semi_b.is_finite()
            && self.rotation.is_finite()
        {
            Ok(())
        } else {
            Err(Error::param(format!("degenerate ellipse {self:?}")))
        }
    }

    /// Coordinates of `p` in the ellipse's own frame.
    #[inline]
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotate(-self.rotation)
    }

    /// Strict interior.
    #[inline]
    pub fn contains(&self, p: Vec2) -> bool {
        let q = self.to_local(p);
        (q.x / self.semi_a).powi(2) + (q.y / self.semi_b).powi(2) < 1.0
    }

    pub fn boundary_point(&self, s: f64) -> Vec2 {
        self.center + Vec2::new(self.semi_a * s.cos(), self.semi_b * s.sin()).rotate(self.rotation)
    }

    pub fn area(&self) -> f64 {
        PI * self.semi_a * self.semi_b
    }
}

/// Initial pressure: indicator of a box or an ellipse, or a weighted sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Phantom {
    Square(Rect),
    Ellipse(EllipseShape),
    Sum { terms: Vec<(f64, Phantom)> },
}

/// Indicator of a single convex shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rect(Rect),
    Ellipse(EllipseShape),
}

impl Shape {
    #[inline]
    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Shape::Rect(r) => r.contains(p),
            Shape::Ellipse(e) => e.contains(p),
        }
    }

    /// Points on the boundary, dense enough for containment checks against
    /// convex regions (exact for boxes).
    pub fn outline(&self) -> Vec<Vec2> {
        match self {
            Shape::Rect(r) => r.corners().to_vec(),
            Shape::Ellipse(e) => (0..512)
                .map(|k| e.boundary_point(2.0 * PI * k as f64 / 512.0))
                .collect(),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Rect(r) => r.area(),
            Shape::Ellipse(e) => e.area(),
        }
    }

    /// Centre and radius of a disc containing the shape.
    pub fn bounding_circle(&self) -> (Vec2, f64) {
        match self {
            Shape::Rect(r) => {
                let c = Vec2::new(0.5 * (r.x_lo + r.x_hi), 0.5 * (r.y_lo + r.y_hi));
                (c, 0.5 * r.width().hypot(r.height()))
            }
            Shape::Ellipse(e) => (e.center, e.semi_a.max(e.semi_b)),
        }
    }
}

impl Phantom {
    pub fn square(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        Ok(Phantom::Square(Rect::new(x_lo, x_hi, y_lo, y_hi)?))
    }

    pub fn ellipse(center: Vec2, semi_a: f64, semi_b: f64, rotation: f64) -> Result<Self> {
        Ok(Phantom::Ellipse(EllipseShape::new(
            center, semi_a, semi_b, rotation,
        )?))
    }

    /// Flat weighted sum of the given terms.
    pub fn sum(terms: Vec<(f64, Phantom)>) -> Self {
        Phantom::Sum { terms }.normalized()
    }

    pub fn zero() -> Self {
        Phantom::Sum { terms: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Phantom::Square(r) => r.validate(),
            Phantom::Ellipse(e) => e.validate(),
            Phantom::Sum { terms } => {
                for (c, p) in terms {
                    if !c.is_finite() {
                        return Err(Error::param("non-finite sum coefficient"));
                    }
                    p.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Flatten nested sums; a sum is returned as a sum, a primitive unchanged.
    pub fn normalized(&self) -> Phantom {
        match self {
            Phantom::Sum { .. } => Phantom::Sum {
                terms: self
                    .shapes()
                    .into_iter()
                    .map(|(c, s)| (c, Phantom::from(s)))
                    .collect(),
            },
            other => other.clone(),
        }
    }

    /// The phantom as `Σ c_k · 1_{S_k}` over convex shapes.
    pub fn shapes(&self) -> Vec<(f64, Shape)> {
        let mut out = Vec::new();
        self.collect_shapes(1.0, &mut out);
        out
    }

    fn collect_shapes(&self, scale: f64, out: &mut Vec<(f64, Shape)>) {
        match self {
            Phantom::Square(r) => out.push((scale, Shape::Rect(*r))),
            Phantom::Ellipse(e) => out.push((scale, Shape::Ellipse(*e))),
            Phantom::Sum { terms } => {
                for (c, p) in terms {
                    p.collect_shapes(scale * c, out);
                }
            }
        }
    }

    /// Upper bound on `‖f‖_∞`.
    pub fn sup_bound(&self) -> f64 {
        self.shapes().iter().map(|(c, _)| c.abs()).sum()
    }

    /// Whether every shape's outline satisfies `inside`. For convex regions
    /// this is the support containment test.
    pub fn support_within(&self, inside: impl Fn(Vec2) -> bool) -> bool {
        self.shapes()
            .iter()
            .all(|(_, s)| s.outline().into_iter().all(&inside))
    }

    /// Distance from `x` to the support (a lower bound for ellipses, whose
    /// outline is sampled).
    pub fn distance_to_support(&self, x: Vec2) -> f64 {
        self.shapes()
            .iter()
            .map(|(_, s)| match s {
                Shape::Rect(r) => {
                    let dx = (r.x_lo - x.x).max(0.0).max(x.x - r.x_hi);
                    let dy = (r.y_lo - x.y).max(0.0).max(x.y - r.y_hi);
                    dx.hypot(dy)
                }
                Shape::Ellipse(e) => {
                    if e.contains(x) {
                        0.0
                    } else {
                        crate::forward::arcs::ellipse_critical_radii(e, x)
                            .into_iter()
                            .fold(f64::INFINITY, f64::min)
                    }
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

impl From<Shape> for Phantom {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Rect(r) => Phantom::Square(r),
            Shape::Ellipse(e) => Phantom::Ellipse(e),
        }
    }
}

/// Pointwise value; boxes are half-open, ellipses open.
pub fn eval_phantom(p: &Phantom, point: Vec2) -> f64 {
    match p {
        Phantom::Square(r) => indicator(r.contains(point)),
        Phantom::Ellipse(e) => indicator(e.contains(point)),
        Phantom::Sum { terms } => terms.iter().map(|(c, q)| c * eval_phantom(q, point)).sum(),
    }
}

#[inline]
fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Region `K` containing the support of the test phantom.
pub fn default_k_box() -> Rect {
    Rect {
        x_lo: -1.25,
        x_hi: 0.5,
        y_lo: -0.7,
        y_hi: 0.1752,
    }
}

/// Rotated-ellipse indicator used as the test object in the ellipse experiment.
pub fn reference_phantom() -> Phantom {
    Phantom::Ellipse(EllipseShape {
        center: Vec2::new(-0.59375, -0.2624),
        semi_a: 0.65625,
        semi_b: 0.8752 / 3.0,
        rotation: PI / 8.0,
    })
}

/// Tile `k` by `n_w × n_h` half-open squares. Index `i` (0-based) runs up the
/// columns first: column `i / n_h`, row `i % n_h`, starting bottom-left.
pub fn training_partition(k: Rect, n_w: usize, n_h: usize) -> Result<Vec<Phantom>> {
    k.validate()?;
    if n_w == 0 || n_h == 0 {
        return Err(Error::param(format!(
            "partition counts must be ≥ 1, got {n_w}×{n_h}"
        )));
    }
    let w = k.width();
    let h = k.height();
    // Same expression for shared edges so neighbours meet without gap; nested
    // partitions whose counts differ by powers of two share edges exactly.
    let x_edge = |c: usize| {
        if c == n_w {
            k.x_hi
        } else {
            k.x_lo + w * c as f64 / n_w as f64
        }
    };
    let y_edge = |r: usize| {
        if r == n_h {
            k.y_hi
        } else {
            k.y_lo + h * r as f64 / n_h as f64
        }
    };
    let mut out = Vec::with_capacity(n_w * n_h);
    for col in 0..n_w {
        for row in 0..n_h {
            out.push(Phantom::Square(Rect {
                x_lo: x_edge(col),
                x_hi: x_edge(col + 1),
                y_lo: y_edge(row),
                y_hi: y_edge(row + 1),
            }));
        }
    }
    Ok(out)
}

/// Cartesian sampling grid: node `(i, j)` sits at `origin + (i·h, j·h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Vec2,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(origin: Vec2, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) || nx == 0 || ny == 0 || !origin.is_finite() {
            return Err(Error::param(format!("invalid grid: h={h}, {nx}×{ny}")));
        }
        Ok(GridSpec { origin, h, nx, ny })
    }

    /// The 301×301 grid with `h = 11/750` starting at `(-2.2, -2.2)`.
    pub fn fine() -> Self {
        GridSpec {
            origin: Vec2::new(-2.2, -2.2),
            h: 11.0 / 750.0,
            nx: 301,
            ny: 301,
        }
    }

    /// Same extent as [`GridSpec::fine`] with `n` nodes per axis.
    pub fn default_extent(n: usize) -> Self {
        GridSpec {
            origin: Vec2::new(-2.2, -2.2),
            h: 4.4 / (n as f64 - 1.0),
            nx: n,
            ny: n,
        }
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + i as f64 * self.h,
            self.origin.y + j as f64 * self.h,
        )
    }
}

/// Values on a [`GridSpec`]; `values[[i, j]]` belongs to `grid.point(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageField {
    pub grid: GridSpec,
    pub values: Array2<f64>,
    /// `true` where the node lies in the domain; only those enter metrics.
    pub mask: Array2<bool>,
}

impl ImageField {
    pub fn zeros(grid: GridSpec, domain: &EllipseDomain) -> Self {
        ImageField {
            grid,
            values: Array2::zeros((grid.nx, grid.ny)),
            mask: domain_mask(grid, domain),
        }
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

pub fn domain_mask(grid: GridSpec, domain: &EllipseDomain) -> Array2<bool> {
    Array2::from_shape_fn((grid.nx, grid.ny), |(i, j)| {
        domain.contains(grid.point(i, j))
    })
}

/// Point samples of `p` on the grid; the mask marks nodes inside `domain`.
pub fn rasterize(p: &Phantom, grid: GridSpec, domain: &EllipseDomain) -> ImageField {
    let rows: Vec<Vec<f64>> = (0..grid.nx)
        .into_par_iter()
        .map(|i| {
            (0..grid.ny)
                .map(|j| eval_phantom(p, grid.point(i, j)))
                .collect()
        })
        .collect();
    let values = Array2::from_shape_fn((grid.nx, grid.ny), |(i, j)| rows[i][j]);
    ImageField {
        grid,
        values,
        mask: domain_mask(grid, domain),
    }
}

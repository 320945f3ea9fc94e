//! Discrete norms and error measures.

use std::collections::BTreeMap;

use ndarray::{linalg::general_mat_mul, Array1, Array2};

use crate::forward::WaveData;
use crate::geometry::{BoundaryGeometry, EllipseDomain};
use crate::linalg::{factorize, RidgePolicy};
use crate::phantoms::{rasterize, GridSpec, ImageField, Phantom};
use crate::{Error, Result};

/// `Σ_nodes Σ_k w·dt·u·v` over the common nodes of `u` and `v`.
pub fn boundary_time_inner(u: &WaveData, v: &WaveData, geom: &BoundaryGeometry) -> Result<f64> {
    u.check_same_layout(v)?;
    if u.n_time != geom.n_time || u.node_idx.iter().any(|&i| i >= geom.len()) {
        return Err(Error::Mismatch(
            "wave data does not belong to this geometry".into(),
        ));
    }
    let mut total = 0.0;
    for (r, &node) in u.node_idx.iter().enumerate() {
        let s: f64 = u
            .samples
            .row(r)
            .iter()
            .zip(v.samples.row(r))
            .map(|(a, b)| a * b)
            .sum();
        total += geom.nodes[node].weight * s;
    }
    Ok(total * u.dt)
}

pub fn boundary_time_norm(u: &WaveData, geom: &BoundaryGeometry) -> Result<f64> {
    Ok(boundary_time_inner(u, u, geom)?.sqrt())
}

fn check_same_grid(a: &ImageField, b: &ImageField) -> Result<()> {
    if a.grid != b.grid || a.mask != b.mask {
        return Err(Error::Mismatch(
            "image fields live on different grids or masks".into(),
        ));
    }
    Ok(())
}

/// `(Σ_{masked} |f − f̂|² h²)^{1/2}`.
pub fn e2_error(fhat: &ImageField, f: &ImageField) -> Result<f64> {
    check_same_grid(fhat, f)?;
    Ok(grid_norm_of(fhat, |i, j| {
        fhat.values[[i, j]] - f.values[[i, j]]
    }))
}

/// Masked grid norm `(Σ |f|² h²)^{1/2}`.
pub fn grid_norm(f: &ImageField) -> f64 {
    grid_norm_of(f, |i, j| f.values[[i, j]])
}

fn grid_norm_of(field: &ImageField, value: impl Fn(usize, usize) -> f64) -> f64 {
    let mut sum = 0.0;
    for ((i, j), &m) in field.mask.indexed_iter() {
        if m {
            let d = value(i, j);
            sum += d * d;
        }
    }
    sum.sqrt() * field.grid.h
}

/// Distance in the masked grid norm from `f` to the span of `training`,
/// through the normal equations of the rasterized training functions. An
/// empty training list gives the norm of `f`.
pub fn subspace_distance(
    f: &Phantom,
    training: &[Phantom],
    grid: GridSpec,
    domain: &EllipseDomain,
) -> Result<f64> {
    let target = rasterize(f, grid, domain);
    if training.is_empty() {
        return Ok(grid_norm(&target));
    }
    let cells: Vec<(usize, usize)> = target
        .mask
        .indexed_iter()
        .filter(|(_, &m)| m)
        .map(|(ij, _)| ij)
        .collect();
    let masked =
        |field: &ImageField| -> Array1<f64> { cells.iter().map(|&ij| field.values[ij]).collect() };
    let y = masked(&target);
    let mut basis = Array2::<f64>::zeros((training.len(), cells.len()));
    for (mut row, p) in basis.rows_mut().into_iter().zip(training) {
        row.assign(&masked(&rasterize(p, grid, domain)));
    }
    let mut gram = Array2::<f64>::zeros((training.len(), training.len()));
    general_mat_mul(1.0, &basis, &basis.t(), 0.0, &mut gram);
    let gram = (&gram + &gram.t()) * 0.5;
    let chol = factorize(&gram, RidgePolicy::default())?;
    let c = chol.solve(basis.dot(&y).view())?;
    let residual = &y - &basis.t().dot(&c);
    Ok(residual.dot(&residual).sqrt() * grid.h)
}

/// One reconstruction variant in a report: `n` is the training size, `Some(0)`
/// for the zero extension and `None` for full-view data.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantError {
    pub variant: String,
    pub n: Option<usize>,
    pub e2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub variant: String,
    pub n: Option<usize>,
    pub e2: f64,
    pub e_n: Option<f64>,
}

/// Reconstruction errors per variant plus the approximation factors per
/// training size.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorReport {
    pub variants: Vec<VariantError>,
    pub e_n: BTreeMap<usize, f64>,
    pub metadata: BTreeMap<String, String>,
}

impl ErrorReport {
    pub fn add_variant(&mut self, variant: &str, n: Option<usize>, e2: f64) {
        self.variants.push(VariantError {
            variant: variant.to_string(),
            n,
            e2,
        });
    }

    pub fn e2(&self, variant: &str) -> Option<f64> {
        self.variants
            .iter()
            .find(|v| v.variant == variant)
            .map(|v| v.e2)
    }

    /// Rows ordered by `n` ascending (zero extension first), full-view rows
    /// last, ties broken by name.
    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows: Vec<ReportRow> = self
            .variants
            .iter()
            .map(|v| ReportRow {
                variant: v.variant.clone(),
                n: v.n,
                e2: v.e2,
                e_n: v.n.and_then(|n| self.e_n.get(&n).copied()),
            })
            .collect();
        rows.sort_by(|a, b| {
            let key = |r: &ReportRow| (r.n.is_none(), r.n.unwrap_or(0));
            key(a).cmp(&key(b)).then_with(|| a.variant.cmp(&b.variant))
        });
        rows
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self
            .variants
            .iter()
            .all(|v| v.e2.is_finite() && v.e2 >= 0.0)
            && self.e_n.values().all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::NonFinite("error report"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::Part;
    use crate::geometry::{build_boundary, split_boundary};
    use crate::phantoms::{default_k_box, reference_phantom, training_partition};
    use crate::Vec2;

    #[test]
    fn inner_product_of_constant_data() {
        let g = build_boundary(EllipseDomain::new(2.0, 1.0).unwrap(), 0.05, 0.05, 20.0).unwrap();
        let s = split_boundary(&g, (0.97, 2.17)).unwrap();
        let mut u = WaveData::zeros(Part::Gamma1, &g, &s);
        u.samples.fill(1.0);
        let len: f64 = s.gamma1_idx.iter().map(|&i| g.nodes[i].weight).sum();
        let got = boundary_time_inner(&u, &u, &g).unwrap();
        assert!((got / (len * g.t_max) - 1.0).abs() < 1e-10);
        let v = WaveData::zeros(Part::Gamma2, &g, &s);
        assert!(boundary_time_inner(&u, &v, &g).is_err());
    }

    #[test]
    fn e2_of_uniform_shift() {
        let grid = GridSpec::default_extent(41);
        let domain = EllipseDomain::new(2.0, 1.0).unwrap();
        let f = rasterize(&reference_phantom(), grid, &domain);
        assert_eq!(e2_error(&f, &f).unwrap(), 0.0);
        let mut g = f.clone();
        g.values.mapv_inplace(|v| v + 0.25);
        let n = f.masked_count() as f64;
        let expect = 0.25 * grid.h * n.sqrt();
        assert!((e2_error(&g, &f).unwrap() - expect).abs() < 1e-12);
        let other = ImageField::zeros(GridSpec::default_extent(40), &domain);
        assert!(e2_error(&other, &f).is_err());
    }

    #[test]
    fn distance_to_a_member_is_zero() {
        let grid = GridSpec::default_extent(151);
        let domain = EllipseDomain::new(2.0, 1.0).unwrap();
        let parts = training_partition(default_k_box(), 4, 2).unwrap();
        assert!(subspace_distance(&parts[0], &parts, grid, &domain).unwrap() < 1e-10);
    }

    #[test]
    fn disjoint_support_keeps_full_norm() {
        let grid = GridSpec::default_extent(151);
        let domain = EllipseDomain::new(2.0, 1.0).unwrap();
        let parts = training_partition(default_k_box(), 4, 2).unwrap();
        let far = Phantom::ellipse(Vec2::new(1.2, 0.2), 0.3, 0.2, 0.0).unwrap();
        let norm = subspace_distance(&far, &[], grid, &domain).unwrap();
        let d = subspace_distance(&far, &parts, grid, &domain).unwrap();
        assert!(norm > 0.1);
        assert!((d - norm).abs() < 1e-12 * norm);
    }

    #[test]
    fn report_rows_and_validation() {
        let mut r = ErrorReport::default();
        r.add_variant("full", None, 0.1);
        r.add_variant("zero", Some(0), 0.4);
        r.e_n.insert(0, 2.0);
        let rows = r.rows();
        assert_eq!(rows[0].variant, "zero");
        assert_eq!(rows[0].e_n, Some(2.0));
        assert_eq!(rows[1].e_n, None);
        assert!(r.validate().is_ok());
        r.add_variant("bad", Some(3), f64::NAN);
        assert!(r.validate().is_err());
        assert_eq!(r.e2("zero"), Some(0.4));
    }
}

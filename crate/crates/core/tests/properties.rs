use std::sync::OnceLock;

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use lvpat_core::extension::{
    build_training_set, extend, project_coefficients, train, ExtensionModel,
};
use lvpat_core::forward::{simulate_wave_data, Part, WaveData};
use lvpat_core::geometry::{
    build_boundary, convex_hull, hull_contains, split_boundary, BoundaryGeometry, BoundarySplit,
    EllipseDomain,
};
use lvpat_core::inversion::reconstruct;
use lvpat_core::io::{read_container, write_container, Payload, Section};
use lvpat_core::linalg::RidgePolicy;
use lvpat_core::metrics::{e2_error, subspace_distance};
use lvpat_core::phantoms::{
    default_k_box, eval_phantom, rasterize, training_partition, GridSpec, ImageField, Phantom,
};
use lvpat_core::Vec2;

fn domain() -> EllipseDomain {
    EllipseDomain::new(2.0, 1.0).unwrap()
}

fn coarse() -> &'static (BoundaryGeometry, BoundarySplit) {
    static G: OnceLock<(BoundaryGeometry, BoundarySplit)> = OnceLock::new();
    G.get_or_init(|| {
        let geom = build_boundary(domain(), 0.1, 0.1, 20.0).unwrap();
        let split = split_boundary(&geom, (0.97, 2.17)).unwrap();
        (geom, split)
    })
}

fn model_4x2() -> &'static ExtensionModel {
    static M: OnceLock<ExtensionModel> = OnceLock::new();
    M.get_or_init(|| {
        let (geom, split) = coarse();
        let tiles = training_partition(default_k_box(), 4, 2).unwrap();
        train(
            build_training_set(&tiles, geom, split).unwrap(),
            RidgePolicy::default(),
        )
        .unwrap()
    })
}

fn rel_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let num = (a - b).iter().map(|v| v * v).sum::<f64>().sqrt();
    let den = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn with_samples(template: &WaveData, samples: Array2<f64>) -> WaveData {
    WaveData {
        samples,
        ..template.clone()
    }
}

prop_compose! {
    fn point_in_k()(u in 0.0..1.0f64, v in 0.0..1.0f64) -> Vec2 {
        let k = default_k_box();
        Vec2::new(k.x_lo + u * k.width(), k.y_lo + v * k.height())
    }
}

prop_compose! {
    fn square_in_k()(a in point_in_k(), w in 0.05..0.6f64, h in 0.05..0.4f64) -> Phantom {
        let k = default_k_box();
        let x_hi = (a.x + w).min(k.x_hi);
        let y_hi = (a.y + h).min(k.y_hi);
        let x_lo = a.x.min(x_hi - 0.02);
        let y_lo = a.y.min(y_hi - 0.02);
        Phantom::square(x_lo, x_hi, y_lo, y_hi).unwrap()
    }
}

prop_compose! {
    fn ellipse_in_k()(c in point_in_k(), a in 0.03..0.3f64, b in 0.03..0.3f64, rot in 0.0..std::f64::consts::PI) -> Phantom {
        let k = default_k_box();
        let r = a.max(b);
        let cx = c.x.clamp(k.x_lo + r, k.x_hi - r);
        let cy = c.y.clamp(k.y_lo + r.min(0.4), k.y_hi - r.min(0.4));
        Phantom::ellipse(Vec2::new(cx, cy), a, b.min(0.4), rot).unwrap()
    }
}

fn shape_in_k() -> impl Strategy<Value = Phantom> {
    prop_oneof![square_in_k(), ellipse_in_k()]
}

fn sum_in_k() -> impl Strategy<Value = Phantom> {
    prop::collection::vec((-2.0..2.0f64, shape_in_k()), 1..4).prop_map(Phantom::sum)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn node_spacing_within_one_percent(spacing in 0.005..0.1f64) {
        let geom = build_boundary(domain(), spacing, 0.1, 1.0).unwrap();
        let n = geom.len();
        for i in 0..n {
            let d = geom.nodes[i].position.dist(geom.nodes[(i + 1) % n].position);
            prop_assert!((d - spacing).abs() / spacing <= 0.01, "node {i}: {d} vs {spacing}");
        }
    }

    #[test]
    fn normals_unit_and_outward(a1 in 0.5..3.0f64, a2 in 0.5..3.0f64, spacing in 0.02..0.2f64) {
        let dom = EllipseDomain::new(a1, a2).unwrap();
        let geom = build_boundary(dom, spacing, 0.1, 1.0).unwrap();
        for node in &geom.nodes {
            prop_assert!((node.normal.norm() - 1.0).abs() < 1e-12);
            prop_assert!(!dom.contains(node.position + node.normal * 1e-6));
            prop_assert!(dom.contains(node.position - node.normal * 1e-6));
        }
    }

    #[test]
    fn split_recovers_all_nodes(lo in -3.1..3.1f64, len in 0.05..6.2f64) {
        let (geom, _) = coarse();
        let split = split_boundary(geom, (lo, lo + len)).unwrap();
        let mut all: Vec<usize> = split.gamma1_idx.iter().chain(&split.gamma2_idx).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..geom.len()).collect::<Vec<_>>());
    }

    #[test]
    fn hull_shrinkage_is_monotone(
        keep in prop::collection::vec(any::<bool>(), 200),
        probes in prop::collection::vec((-2.1..2.1f64, -1.1..1.1f64), 40),
    ) {
        let (geom, split) = coarse();
        let subset: Vec<Vec2> = split
            .gamma1_idx
            .iter()
            .zip(keep.iter().cycle())
            .filter(|(_, &k)| k)
            .map(|(&i, _)| geom.nodes[i].position)
            .collect();
        let small = convex_hull(&subset);
        for (x, y) in probes {
            let p = Vec2::new(x, y);
            if hull_contains(&small, p) {
                prop_assert!(split.detection_region_contains(p));
            }
        }
    }

    #[test]
    fn partition_tiles_k(n_w in 1usize..12, n_h in 1usize..12, probes in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 30)) {
        let k = default_k_box();
        let tiles = training_partition(k, n_w, n_h).unwrap();
        // Tile edges are tested alongside interior points.
        let edges = (0..n_w).map(|c| (c as f64 / n_w as f64, 0.5)).chain((0..n_h).map(|r| (0.5, r as f64 / n_h as f64)));
        for (u, v) in probes.into_iter().chain(edges) {
            let p = Vec2::new(k.x_lo + u * k.width(), k.y_lo + v * k.height());
            let hits: f64 = tiles.iter().map(|t| eval_phantom(t, p)).sum();
            prop_assert_eq!(hits, 1.0, "point {:?}", p);
        }
    }

    #[test]
    fn weighted_sum_is_linear(terms in prop::collection::vec((-3.0..3.0f64, shape_in_k()), 1..5), p in point_in_k()) {
        let direct: f64 = terms.iter().map(|(c, f)| c * eval_phantom(f, p)).sum();
        prop_assert_eq!(eval_phantom(&Phantom::sum(terms), p), direct);
    }

    #[test]
    fn rasterize_commutes_with_sums(terms in prop::collection::vec((-3.0..3.0f64, shape_in_k()), 1..4)) {
        let grid = GridSpec::default_extent(41);
        let dom = domain();
        let whole = rasterize(&Phantom::sum(terms.clone()), grid, &dom);
        let mut parts = Array2::<f64>::zeros((grid.nx, grid.ny));
        for (c, f) in &terms {
            parts = parts + rasterize(f, grid, &dom).values * *c;
        }
        let scale = parts.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in whole.values.iter().zip(&parts) {
            prop_assert!((a - b).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn e2_triangle_inequality(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::default_extent(31);
        let dom = domain();
        let mut field = || {
            let mut f = ImageField::zeros(grid, &dom);
            f.values.mapv_inplace(|_| rng.random_range(-1.0..1.0));
            f
        };
        let (a, b, c) = (field(), field(), field());
        let ac = e2_error(&a, &c).unwrap();
        let ab = e2_error(&a, &b).unwrap();
        let bc = e2_error(&b, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn container_round_trip(
        sections in prop::collection::vec(
            prop_oneof![
                ("[a-z_]{1,12}", prop::collection::vec(-1e300..1e300f64, 0..40)).prop_map(|(n, v)| (n, Ok(v))),
                ("[a-z_]{1,12}", "[ -~]{0,60}").prop_map(|(n, t)| (n, Err(t))),
            ],
            0..6,
        )
    ) {
        let built: Vec<Section> = sections
            .iter()
            .map(|(name, body)| match body {
                Ok(v) => Section::tensor(name, vec![v.len()], v.clone()),
                Err(t) => Section::meta(name, t.clone()),
            })
            .collect();
        let bytes = write_container(&built).unwrap();
        let back = read_container(&bytes).unwrap();
        prop_assert_eq!(back.len(), built.len());
        for (a, b) in back.iter().zip(&built) {
            prop_assert_eq!(&a.name, &b.name);
            match (&a.payload, &b.payload) {
                (Payload::Tensor { dims: da, data: xa }, Payload::Tensor { dims: db, data: xb }) => {
                    prop_assert_eq!(da, db);
                    prop_assert!(xa.iter().zip(xb.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
                }
                (Payload::Meta(ta), Payload::Meta(tb)) => prop_assert_eq!(ta, tb),
                _ => prop_assert!(false, "payload kind changed"),
            }
        }
        prop_assert_eq!(write_container(&back).unwrap(), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn forward_is_linear(terms in prop::collection::vec((-2.0..2.0f64, shape_in_k()), 2..4)) {
        let (geom, split) = coarse();
        let whole = simulate_wave_data(&Phantom::sum(terms.clone()), geom, split, Part::Gamma1).unwrap();
        let mut parts = Array2::<f64>::zeros(whole.samples.dim());
        for (c, f) in &terms {
            parts = parts + simulate_wave_data(f, geom, split, Part::Gamma1).unwrap().samples * *c;
        }
        prop_assert!(rel_diff(&whole.samples, &parts) <= 1e-10);
    }

    #[test]
    fn reconstruction_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (geom, split) = coarse();
        let template = WaveData::zeros(Part::Full, geom, split);
        let u = template.samples.mapv(|_| rng.random_range(-1.0..1.0));
        let v = template.samples.mapv(|_| rng.random_range(-1.0..1.0));
        let grid = GridSpec::default_extent(13);
        let ru = reconstruct(&with_samples(&template, u.clone()), geom, grid).unwrap().values;
        let rv = reconstruct(&with_samples(&template, v.clone()), geom, grid).unwrap().values;
        let rw = reconstruct(&with_samples(&template, &u * a + &v * b), geom, grid).unwrap().values;
        prop_assert!(rel_diff(&rw, &(ru * a + rv * b)) <= 1e-10);
    }

    #[test]
    fn extension_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (geom, split) = coarse();
        let model = model_4x2();
        let template = WaveData::zeros(Part::Gamma1, geom, split);
        let u = template.samples.mapv(|_| rng.random_range(-1.0..1.0));
        let v = template.samples.mapv(|_| rng.random_range(-1.0..1.0));
        let eu = extend(model, &with_samples(&template, u.clone())).unwrap().samples;
        let ev = extend(model, &with_samples(&template, v.clone())).unwrap().samples;
        let ew = extend(model, &with_samples(&template, &u * a + &v * b)).unwrap().samples;
        prop_assert!(rel_diff(&ew, &(eu * a + ev * b)) <= 1e-10);
    }

    #[test]
    fn projection_is_idempotent(c in prop::collection::vec(-2.0..2.0f64, 8)) {
        let (geom, split) = coarse();
        let model = model_4x2();
        let c = Array1::from(c);
        let flat = model.training.u1.t().dot(&c);
        let template = WaveData::zeros(Part::Gamma1, geom, split);
        let samples = flat.into_shape_with_order(template.samples.dim()).unwrap();
        let back = project_coefficients(model, &with_samples(&template, samples)).unwrap();
        for (x, y) in back.iter().zip(&c) {
            prop_assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn subspace_distance_nonincreasing_under_refinement(f in sum_in_k()) {
        let grid = GridSpec::default_extent(101);
        let dom = domain();
        let mut last = subspace_distance(&f, &[], grid, &dom).unwrap();
        for (n_w, n_h) in [(2, 1), (4, 2), (8, 4)] {
            let tiles = training_partition(default_k_box(), n_w, n_h).unwrap();
            let e = subspace_distance(&f, &tiles, grid, &dom).unwrap();
            prop_assert!(e <= last + 1e-10, "{n_w}x{n_h}: {e} > {last}");
            last = e;
        }
    }

    #[test]
    fn span_members_have_zero_distance(c in prop::collection::vec(-2.0..2.0f64, 8)) {
        let tiles = training_partition(default_k_box(), 4, 2).unwrap();
        let f = Phantom::sum(c.into_iter().zip(tiles.iter().cloned()).collect());
        let e = subspace_distance(&f, &tiles, GridSpec::default_extent(101), &domain()).unwrap();
        prop_assert!(e <= 1e-10, "{e}");
    }
}

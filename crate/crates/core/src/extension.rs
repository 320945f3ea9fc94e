//! Learned extension of limited-view data.
//!
//! Training functions `f_i` give pairs `(u_{1,i}, u_{2,i})` of traces on the
//! observed part Γ₁ and the unobserved part Γ₂. Data `u₁` is projected onto
//! the span of the `u_{1,i}` by solving the Gram system `P c = b` with
//! `P_ij = ⟨u_{1,i}, u_{1,j}⟩` and `b_i = ⟨u₁, u_{1,i}⟩`; the extension is
//! `Σ c_j u_{2,j}`.
//!
//! Traces are stored stacked: row `i` of [`TrainingSet::u1`] is `u_{1,i}`
//! flattened node-major, so the Gram matrix is one matrix product and the
//! extension one matrix-vector product.

use std::path::Path;

use log::warn;
use ndarray::linalg::{general_mat_mul, general_mat_vec_mul};
use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::forward::{simulate_wave_data, Part, WaveData};
use crate::geometry::{BoundaryGeometry, BoundarySplit, Fingerprint};
use crate::io::{self, Section};
use crate::linalg::{Cholesky, RidgePolicy};
use crate::phantoms::Phantom;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub phantoms: Vec<Phantom>,
    /// `n × (|Γ₁|·n_time)`.
    pub u1: Array2<f64>,
    /// `n × (|Γ₂|·n_time)`.
    pub u2: Array2<f64>,
    pub gamma1_idx: Vec<usize>,
    pub gamma2_idx: Vec<usize>,
    /// Arc-length weights of the Γ₁ nodes, in `gamma1_idx` order.
    pub gamma1_weights: Vec<f64>,
    pub dt: f64,
    pub n_time: usize,
    pub fingerprint: Fingerprint,
    /// Phantoms whose support leaves the detection region.
    pub warnings: Vec<String>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.phantoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phantoms.is_empty()
    }

    fn trace(&self, part: Part, i: usize) -> WaveData {
        let (stack, idx) = match part {
            Part::Gamma2 => (&self.u2, &self.gamma2_idx),
            _ => (&self.u1, &self.gamma1_idx),
        };
        let samples = stack
            .row(i)
            .to_owned()
            .into_shape_with_order((idx.len(), self.n_time))
            .expect("stacked layout");
        WaveData {
            part,
            node_idx: idx.clone(),
            dt: self.dt,
            n_time: self.n_time,
            samples,
            fingerprint: self.fingerprint,
        }
    }

    /// `u_{1,i}`.
    pub fn u1_trace(&self, i: usize) -> WaveData {
        self.trace(Part::Gamma1, i)
    }

    /// `u_{2,i}`.
    pub fn u2_trace(&self, i: usize) -> WaveData {
        self.trace(Part::Gamma2, i)
    }

    fn check(&self, u: &WaveData, part: Part) -> Result<()> {
        if u.fingerprint != self.fingerprint {
            return Err(Error::Fingerprint {
                expected: self.fingerprint.to_hex(),
                found: u.fingerprint.to_hex(),
            });
        }
        let idx = if part == Part::Gamma1 {
            &self.gamma1_idx
        } else {
            &self.gamma2_idx
        };
        if u.part != part || &u.node_idx != idx || u.n_time != self.n_time || u.dt != self.dt {
            return Err(Error::Mismatch(format!(
                "expected {} data on {} nodes × {} samples, got {} data on {} nodes × {} samples",
                part.as_str(),
                idx.len(),
                self.n_time,
                u.part.as_str(),
                u.n_nodes(),
                u.n_time
            )));
        }
        Ok(())
    }

    /// Column ranges of the stacked Γ₁ traces sharing one quadrature weight.
    fn weight_blocks(&self) -> Vec<(usize, usize, f64)> {
        let mut out: Vec<(usize, usize, f64)> = Vec::new();
        for (r, &w) in self.gamma1_weights.iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.2 == w => last.1 = r + 1,
                _ => out.push((r, r + 1, w)),
            }
        }
        out.into_iter()
            .map(|(a, b, w)| (a * self.n_time, b * self.n_time, w * self.dt))
            .collect()
    }
}

/// Simulates the Γ₁ and Γ₂ traces of every training phantom.
pub fn build_training_set(
    phantoms: &[Phantom],
    geom: &BoundaryGeometry,
    split: &BoundarySplit,
) -> Result<TrainingSet> {
    if phantoms.is_empty() {
        return Err(Error::param("training set needs at least one phantom"));
    }
    let n1 = split.gamma1_idx.len();
    let n2 = split.gamma2_idx.len();
    let nt = geom.n_time;
    let mut u1 = Array2::<f64>::zeros((phantoms.len(), n1 * nt));
    let mut u2 = Array2::<f64>::zeros((phantoms.len(), n2 * nt));
    let mut warnings = Vec::new();
    for (i, p) in phantoms.iter().enumerate() {
        if !p.support_within(|x| split.detection_region_contains(x)) {
            let msg = format!("training phantom {i} is not supported inside the detection region");
            warn!("{msg}");
            warnings.push(msg);
        }
        let full = simulate_wave_data(p, geom, split, Part::Full)?;
        let flat = |idx: &[usize]| full.samples.select(Axis(0), idx).into_iter();
        for (dst, v) in u1.row_mut(i).iter_mut().zip(flat(&split.gamma1_idx)) {
            *dst = v;
        }
        for (dst, v) in u2.row_mut(i).iter_mut().zip(flat(&split.gamma2_idx)) {
            *dst = v;
        }
    }
    Ok(TrainingSet {
        phantoms: phantoms.to_vec(),
        u1,
        u2,
        gamma1_idx: split.gamma1_idx.clone(),
        gamma2_idx: split.gamma2_idx.clone(),
        gamma1_weights: split
            .gamma1_idx
            .iter()
            .map(|&i| geom.nodes[i].weight)
            .collect(),
        dt: geom.dt,
        n_time: nt,
        fingerprint: Fingerprint::of(geom, split),
        warnings,
    })
}

/// `P_ij = Σ_{Γ₁} Σ_k w·dt·u_{1,i}·u_{1,j}`, symmetrized.
pub fn gram_matrix(ts: &TrainingSet) -> Array2<f64> {
    let n = ts.len();
    let mut g = Array2::<f64>::zeros((n, n));
    for (a, b, alpha) in ts.weight_blocks() {
        let block = ts.u1.slice(s![.., a..b]);
        general_mat_mul(alpha, &block, &block.t(), 1.0, &mut g);
    }
    let gt = g.t().to_owned();
    (g + gt) * 0.5
}

/// `b_i = ⟨u₁, u_{1,i}⟩`.
fn projection_rhs(ts: &TrainingSet, u1: &WaveData) -> Array1<f64> {
    let flat = u1.samples.as_standard_layout();
    let flat = flat.as_slice().expect("standard layout");
    let x = ArrayView1::from(flat);
    let mut b = Array1::<f64>::zeros(ts.len());
    for (a, e, alpha) in ts.weight_blocks() {
        general_mat_vec_mul(
            alpha,
            &ts.u1.slice(s![.., a..e]),
            &x.slice(s![a..e]),
            1.0,
            &mut b,
        );
    }
    b
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionModel {
    pub training: TrainingSet,
    pub gram: Array2<f64>,
    pub factor: Cholesky,
}

impl ExtensionModel {
    pub fn ridge(&self) -> f64 {
        self.factor.ridge
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.training.fingerprint
    }

    pub fn check_geometry(&self, geom: &BoundaryGeometry, split: &BoundarySplit) -> Result<()> {
        let fp = Fingerprint::of(geom, split);
        if fp != self.training.fingerprint {
            return Err(Error::Fingerprint {
                expected: fp.to_hex(),
                found: self.training.fingerprint.to_hex(),
            });
        }
        Ok(())
    }
}

/// Gram matrix plus its ridge-escalated Cholesky factor.
pub fn train(training: TrainingSet, policy: RidgePolicy) -> Result<ExtensionModel> {
    let gram = gram_matrix(&training);
    let factor = crate::linalg::factorize(&gram, policy)?;
    if factor.ridge > 0.0 {
        warn!(
            "Gram matrix of {} traces needed ridge {:e}",
            training.len(),
            factor.ridge
        );
    }
    Ok(ExtensionModel {
        training,
        gram,
        factor,
    })
}

pub fn factorize(p: &Array2<f64>, policy: RidgePolicy) -> Result<Cholesky> {
    crate::linalg::factorize(p, policy)
}

/// Coefficients of the orthogonal projection of `u1` onto the training span.
pub fn project_coefficients(model: &ExtensionModel, u1: &WaveData) -> Result<Array1<f64>> {
    model.training.check(u1, Part::Gamma1)?;
    let c = model
        .factor
        .solve(projection_rhs(&model.training, u1).view())?;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("projection coefficients"));
    }
    Ok(c)
}

/// `Σ_j c_j u_{2,j}` for given coefficients.
pub fn combine_gamma2(ts: &TrainingSet, c: ArrayView1<f64>) -> Result<WaveData> {
    if c.len() != ts.len() {
        return Err(Error::Mismatch(format!(
            "{} coefficients for {} training traces",
            c.len(),
            ts.len()
        )));
    }
    let mut flat = Array1::<f64>::zeros(ts.u2.ncols());
    general_mat_vec_mul(1.0, &ts.u2.t(), &c, 0.0, &mut flat);
    let samples = flat
        .into_shape_with_order((ts.gamma2_idx.len(), ts.n_time))
        .expect("stacked layout");
    Ok(WaveData {
        part: Part::Gamma2,
        node_idx: ts.gamma2_idx.clone(),
        dt: ts.dt,
        n_time: ts.n_time,
        samples,
        fingerprint: ts.fingerprint,
    })
}

/// Learned extension of Γ₁ data to Γ₂.
pub fn extend(model: &ExtensionModel, u1: &WaveData) -> Result<WaveData> {
    let c = project_coefficients(model, u1)?;
    combine_gamma2(&model.training, c.view())
}

/// Full-boundary data from complementary Γ₁ and Γ₂ parts.
pub fn stitch(
    u1: &WaveData,
    u2hat: &WaveData,
    geom: &BoundaryGeometry,
    split: &BoundarySplit,
) -> Result<WaveData> {
    if u1.part != Part::Gamma1 || u2hat.part != Part::Gamma2 {
        return Err(Error::Mismatch(format!(
            "stitch needs gamma1 and gamma2 data, got {} and {}",
            u1.part.as_str(),
            u2hat.part.as_str()
        )));
    }
    u1.check_geometry(geom, split)?;
    u2hat.check_geometry(geom, split)?;
    let mut full = WaveData::zeros(Part::Full, geom, split);
    for (r, &i) in u1.node_idx.iter().enumerate() {
        full.samples.row_mut(i).assign(&u1.samples.row(r));
    }
    for (r, &i) in u2hat.node_idx.iter().enumerate() {
        full.samples.row_mut(i).assign(&u2hat.samples.row(r));
    }
    Ok(full)
}

/// Γ₁ data padded with zeros on Γ₂.
pub fn zero_extend(
    u1: &WaveData,
    geom: &BoundaryGeometry,
    split: &BoundarySplit,
) -> Result<WaveData> {
    stitch(u1, &WaveData::zeros(Part::Gamma2, geom, split), geom, split)
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    kind: String,
    fingerprint: String,
    dt: f64,
    n_time: usize,
    gamma1_idx: Vec<usize>,
    gamma2_idx: Vec<usize>,
    phantoms: Vec<Phantom>,
    warnings: Vec<String>,
}

pub fn save_model(model: &ExtensionModel, path: impl AsRef<Path>) -> Result<()> {
    let ts = &model.training;
    let meta = ModelMeta {
        kind: "extension-model".into(),
        fingerprint: ts.fingerprint.to_hex(),
        dt: ts.dt,
        n_time: ts.n_time,
        gamma1_idx: ts.gamma1_idx.clone(),
        gamma2_idx: ts.gamma2_idx.clone(),
        phantoms: ts.phantoms.clone(),
        warnings: ts.warnings.clone(),
    };
    io::write_file(
        path,
        &[
            Section::meta("meta", serde_json::to_string(&meta)?),
            Section::tensor("ridge", vec![1], vec![model.factor.ridge]),
            Section::tensor(
                "weights1",
                vec![ts.gamma1_weights.len()],
                ts.gamma1_weights.as_slice(),
            ),
            Section::matrix("gram", model.gram.view()),
            Section::matrix("factor", model.factor.factor.view()),
            Section::matrix("u1", ts.u1.view()),
            Section::matrix("u2", ts.u2.view()),
        ],
    )
}

/// Reads a model and checks it was trained on `geom` and `split`.
pub fn load_model(
    path: impl AsRef<Path>,
    geom: &BoundaryGeometry,
    split: &BoundarySplit,
) -> Result<ExtensionModel> {
    let mut sections = io::read_file(path)?;
    let meta: ModelMeta = serde_json::from_str(io::meta_text(&sections, "meta")?)?;
    if meta.kind != "extension-model" {
        return Err(Error::container(format!(
            "expected an extension model, found '{}'",
            meta.kind
        )));
    }
    let fingerprint = Fingerprint::from_hex(&meta.fingerprint)?;
    let expected = Fingerprint::of(geom, split);
    if fingerprint != expected {
        return Err(Error::Fingerprint {
            expected: expected.to_hex(),
            found: fingerprint.to_hex(),
        });
    }
    let ridge = io::take_vector(&mut sections, "ridge")?;
    let weights = io::take_vector(&mut sections, "weights1")?;
    let gram = io::take_matrix(&mut sections, "gram")?;
    let factor = io::take_matrix(&mut sections, "factor")?;
    let u1 = io::take_matrix(&mut sections, "u1")?;
    let u2 = io::take_matrix(&mut sections, "u2")?;
    let n = meta.phantoms.len();
    let consistent = ridge.len() == 1
        && weights.len() == meta.gamma1_idx.len()
        && gram.dim() == (n, n)
        && factor.dim() == (n, n)
        && u1.dim() == (n, meta.gamma1_idx.len() * meta.n_time)
        && u2.dim() == (n, meta.gamma2_idx.len() * meta.n_time);
    if !consistent {
        return Err(Error::container("model sections have inconsistent sizes"));
    }
    Ok(ExtensionModel {
        training: TrainingSet {
            phantoms: meta.phantoms,
            u1,
            u2,
            gamma1_idx: meta.gamma1_idx,
            gamma2_idx: meta.gamma2_idx,
            gamma1_weights: weights,
            dt: meta.dt,
            n_time: meta.n_time,
            fingerprint,
            warnings: meta.warnings,
        },
        gram,
        factor: Cholesky {
            factor,
            ridge: ridge[0],
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_boundary, split_boundary, EllipseDomain};
    use crate::phantoms::{default_k_box, training_partition};
    use ndarray::array;

    fn setup() -> (BoundaryGeometry, BoundarySplit) {
        let g = build_boundary(EllipseDomain::new(2.0, 1.0).unwrap(), 0.08, 0.08, 20.0).unwrap();
        let s = split_boundary(&g, (0.97, 2.17)).unwrap();
        (g, s)
    }

    /// Two-node Γ₁ with hand-written traces.
    fn tiny(rows: Array2<f64>) -> TrainingSet {
        let n = rows.nrows();
        TrainingSet {
            phantoms: vec![Phantom::zero(); n],
            u2: rows.clone(),
            u1: rows,
            gamma1_idx: vec![0, 1],
            gamma2_idx: vec![0, 1],
            gamma1_weights: vec![0.5, 0.5],
            dt: 0.5,
            n_time: 2,
            fingerprint: Fingerprint([0; 32]),
            warnings: Vec::new(),
        }
    }

    #[test]
    fn gram_of_orthonormal_traces_is_identity() {
        let ts = tiny(array![
            [2.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 2.0, 0.0],
            [0.0, 2.0, 0.0, 0.0]
        ]);
        let g = gram_matrix(&ts);
        assert_eq!(g, Array2::<f64>::eye(3));
    }

    #[test]
    fn gram_with_unequal_weights() {
        let mut ts = tiny(array![[1.0, 2.0, 3.0, 4.0], [0.5, -1.0, 2.0, 0.0]]);
        ts.gamma1_weights = vec![1.0, 3.0];
        let g = gram_matrix(&ts);
        let by_hand = |a: &[f64], b: &[f64]| {
            0.5 * (a[0] * b[0] + a[1] * b[1] + 3.0 * (a[2] * b[2] + a[3] * b[3]))
        };
        let r0 = [1.0, 2.0, 3.0, 4.0];
        let r1 = [0.5, -1.0, 2.0, 0.0];
        assert!((g[[0, 0]] - by_hand(&r0, &r0)).abs() < 1e-14);
        assert!((g[[0, 1]] - by_hand(&r0, &r1)).abs() < 1e-14);
        assert_eq!(g[[0, 1]], g[[1, 0]]);
    }

    #[test]
    fn duplicate_trace_is_singular() {
        let ts = tiny(array![[1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0]]);
        assert!(matches!(
            train(ts, RidgePolicy::default()),
            Err(Error::Singular { index: 2, .. })
        ));
    }

    #[test]
    fn training_trace_extends_to_its_partner() {
        let (g, s) = setup();
        let parts = training_partition(default_k_box(), 4, 2).unwrap();
        let ts = build_training_set(&parts, &g, &s).unwrap();
        assert!(ts.warnings.is_empty());
        let model = train(ts, RidgePolicy::default()).unwrap();
        let u1 = model.training.u1_trace(5);
        let c = project_coefficients(&model, &u1).unwrap();
        for (j, v) in c.iter().enumerate() {
            let e = if j == 5 { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-8, "c[{j}] = {v}");
        }
        let ext = extend(&model, &u1).unwrap();
        let truth = model.training.u2_trace(5);
        let err = (&ext.samples - &truth.samples)
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let scale = truth.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(err <= 1e-8 * scale);
        let zero = WaveData::zeros(Part::Gamma1, &g, &s);
        assert!(project_coefficients(&model, &zero)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn stitch_restores_full_data() {
        let (g, s) = setup();
        let p = training_partition(default_k_box(), 2, 1).unwrap().remove(0);
        let full = simulate_wave_data(&p, &g, &s, Part::Full).unwrap();
        let u1 = full.restrict(&s, Part::Gamma1).unwrap();
        let u2 = full.restrict(&s, Part::Gamma2).unwrap();
        assert_eq!(stitch(&u1, &u2, &g, &s).unwrap(), full);
        let z = zero_extend(&u1, &g, &s).unwrap();
        for &i in &s.gamma2_idx {
            assert!(z.samples.row(i).iter().all(|&v| v == 0.0));
        }
        for &i in &s.gamma1_idx {
            assert_eq!(z.samples.row(i), full.samples.row(i));
        }
        assert!(stitch(&u2, &u1, &g, &s).is_err());
        let other = split_boundary(&g, (1.0, 2.17)).unwrap();
        assert!(stitch(&u1, &WaveData::zeros(Part::Gamma2, &g, &other), &g, &s).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let (g, s) = setup();
        let parts = training_partition(default_k_box(), 2, 1).unwrap();
        let model = train(
            build_training_set(&parts, &g, &s).unwrap(),
            RidgePolicy::default(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.patb");
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path, &g, &s).unwrap(), model);
        let other = split_boundary(&g, (1.0, 2.17)).unwrap();
        assert!(matches!(
            load_model(&path, &g, &other),
            Err(Error::Fingerprint { .. })
        ));
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(load_model(&path, &g, &s).is_err());
    }
}

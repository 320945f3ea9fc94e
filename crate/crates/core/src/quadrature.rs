//! Fixed and adaptive quadrature rules on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (positive half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of `f` on `[a, b]`.
///
/// The interval is first cut into `initial_panels` equal pieces so that narrow
/// features are not stepped over. The panel with the largest error estimate
/// is then bisected until the summed estimate drops below `abs_tol` or
/// `max_splits` bisections have been spent.
pub fn adaptive_gk(
    f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    initial_panels: usize,
    max_splits: usize,
) -> f64 {
    refine(f, a, b, abs_tol, initial_panels, max_splits)
        .iter()
        .map(|p| p.val)
        .sum()
}

/// The Kronrod nodes and weights of the panels [`adaptive_gk`] settles on for
/// `f`, as `(x, w)` pairs. Reusable for integrands `f·g` with smooth `g`.
pub fn adaptive_gk_rule(
    f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    initial_panels: usize,
    max_splits: usize,
) -> Vec<(f64, f64)> {
    let panels = refine(f, a, b, abs_tol, initial_panels, max_splits);
    let mut rule = Vec::with_capacity(15 * panels.len());
    for p in &panels {
        let c = 0.5 * (p.lo + p.hi);
        let h = 0.5 * (p.hi - p.lo);
        rule.push((c, WGK[7] * h));
        for j in 0..7 {
            rule.push((c - h * XGK[j], WGK[j] * h));
            rule.push((c + h * XGK[j], WGK[j] * h));
        }
    }
    rule
}

/// Final panels of the adaptive scheme, ordered by position.
fn refine(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    initial_panels: usize,
    max_splits: usize,
) -> Vec<Panel> {
    if a == b {
        return Vec::new();
    }
    let panels = initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(panels + max_splits);
    let mut err_sum = 0.0;
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { lo + width };
        let panel = Panel::new(&mut f, lo, hi);
        err_sum += panel.err;
        heap.push(panel);
    }
    for _ in 0..max_splits {
        if err_sum <= abs_tol {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.lo + worst.hi);
        if m <= worst.lo || m >= worst.hi {
            // Too narrow to split; keep it and stop refining.
            heap.push(worst);
            break;
        }
        let left = Panel::new(&mut f, worst.lo, m);
        let right = Panel::new(&mut f, m, worst.hi);
        err_sum += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
    }
    let mut parts: Vec<Panel> = heap.into_vec();
    parts.sort_by(|p, q| p.lo.total_cmp(&q.lo));
    parts
}

struct Panel {
    lo: f64,
    hi: f64,
    val: f64,
    err: f64,
}

impl Panel {
    fn new(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64) -> Self {
        let (val, err) = gk15(f, lo, hi);
        Panel { lo, hi, val, err }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then(other.lo.total_cmp(&self.lo))
    }
}

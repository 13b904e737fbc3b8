//! Singular-integral kernels: presets, standard-estimate checks,
//! non-degeneracy witnesses, ball pairs and dense discretizations.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::haar::{SampledFunction, C64};
use crate::linalg::CMatrix;
use crate::martops::{DenseOperator, OperatorKind};

/// Angular profile Ω of a homogeneous kernel Ω(u/|u|)/|u|^n.
#[derive(Clone)]
pub enum Omega {
    /// Ω(u) = u_j
    Coordinate(usize),
    /// Ω(u) = u₁ + i·u₂
    Phase,
    /// User profile with its sup norm and Lipschitz constant on the sphere.
    Custom { f: Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>, sup: f64, lipschitz: f64 },
}

impl fmt::Debug for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Omega::Coordinate(j) => write!(f, "Coordinate({j})"),
            Omega::Phase => write!(f, "Phase"),
            Omega::Custom { sup, lipschitz, .. } => write!(f, "Custom {{ sup: {sup}, lipschitz: {lipschitz} }}"),
        }
    }
}

impl Omega {
    fn eval(&self, u: &[f64]) -> C64 {
        match self {
            Omega::Coordinate(j) => C64::new(u[*j], 0.0),
            Omega::Phase => C64::new(u[0], u[1]),
            Omega::Custom { f, .. } => f(u),
        }
    }

    fn sup(&self) -> f64 {
        match self {
            Omega::Coordinate(_) | Omega::Phase => 1.0,
            Omega::Custom { sup, .. } => *sup,
        }
    }

    fn lipschitz(&self) -> f64 {
        match self {
            Omega::Coordinate(_) | Omega::Phase => 1.0,
            Omega::Custom { lipschitz, .. } => *lipschitz,
        }
    }
}

#[derive(Clone, Debug)]
pub enum KernelRule {
    /// 1/(π(x−y)), n = 1
    Hilbert,
    /// c_n (x_j−y_j)/|x−y|^{n+1}
    Riesz { j: usize },
    Homogeneous { omega: Omega },
    /// 1/|x−y|^s; not a standard kernel unless s = n
    Power { s: f64 },
    Zero,
}

/// A kernel with its declared constants. `c0 = None` marks it degenerate.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    pub dim: usize,
    pub rule: KernelRule,
    pub alpha: f64,
    pub size_c: f64,
    pub c0: Option<f64>,
}

/// c_n = Γ((n+1)/2)/π^{(n+1)/2}
pub fn riesz_constant(n: usize) -> f64 {
    half_gamma(n + 1) / PI.powf((n as f64 + 1.0) / 2.0)
}

/// Γ(k/2)
fn half_gamma(k: usize) -> f64 {
    if k % 2 == 0 {
        (1..k / 2).map(|i| i as f64).product()
    } else {
        // Γ(m + 1/2) = (2m)!/(4^m m!) √π with m = (k−1)/2
        let m = (k - 1) / 2;
        let mut g = PI.sqrt();
        for i in 0..m {
            g *= i as f64 + 0.5;
        }
        g
    }
}

impl KernelSpec {
    pub fn hilbert() -> Self {
        Self { dim: 1, rule: KernelRule::Hilbert, alpha: 1.0, size_c: 4.0 / PI, c0: Some(PI) }
    }

    pub fn riesz(n: usize, j: usize) -> Result<Self> {
        if n == 0 || j >= n {
            return Err(Error::InvalidArgument(format!("riesz index {j} in dimension {n}")));
        }
        let cn = riesz_constant(n);
        let smooth = 2.0 * cn * (n as f64 + 2.0) * 2f64.powi(n as i32 + 1);
        Ok(Self { dim: n, rule: KernelRule::Riesz { j }, alpha: 1.0, size_c: smooth.max(cn), c0: Some(1.0 / cn) })
    }

    pub fn homogeneous(n: usize, omega: Omega) -> Result<Self> {
        if n == 0 || matches!(omega, Omega::Coordinate(j) if j >= n) || matches!(omega, Omega::Phase if n < 2) {
            return Err(Error::InvalidArgument("profile does not fit the dimension".into()));
        }
        let (m, l) = (omega.sup(), omega.lipschitz());
        let smooth = 2.0 * 2f64.powi(n as i32 + 1) * (l + n as f64 * m);
        let c0 = if m > 0.0 { Some(1.0 / m) } else { None };
        Ok(Self { dim: n, rule: KernelRule::Homogeneous { omega }, alpha: 1.0, size_c: smooth.max(m), c0 })
    }

    pub fn power(n: usize, s: f64) -> Self {
        Self { dim: n, rule: KernelRule::Power { s }, alpha: 1.0, size_c: 1.0, c0: None }
    }

    pub fn zero(n: usize) -> Self {
        Self { dim: n, rule: KernelRule::Zero, alpha: 1.0, size_c: 1.0, c0: None }
    }

    /// Preset by name with JSON parameters (`n`, `j`, `s`, `omega`, `c0`, `C`).
    pub fn from_name(name: &str, params: &serde_json::Value) -> Result<Self> {
        let get_u = |k: &str, d: usize| params.get(k).and_then(|v| v.as_u64()).map(|v| v as usize).unwrap_or(d);
        let n = get_u("n", 1);
        let mut spec = match name {
            "hilbert" => Self::hilbert(),
            "riesz" | "riesz_j" => Self::riesz(n, get_u("j", 0))?,
            "homogeneous" => {
                let omega = match params.get("omega").and_then(|v| v.as_str()).unwrap_or("coordinate") {
                    "coordinate" => Omega::Coordinate(get_u("j", 0)),
                    "phase" => Omega::Phase,
                    other => return Err(Error::InvalidArgument(format!("unknown profile {other}"))),
                };
                Self::homogeneous(n, omega)?
            }
            "power" => Self::power(n, params.get("s").and_then(|v| v.as_f64()).unwrap_or(n as f64 / 2.0)),
            "zero" => Self::zero(n),
            other => return Err(Error::InvalidArgument(format!("unknown kernel {other}"))),
        };
        if let Some(c0) = params.get("c0").and_then(|v| v.as_f64()) {
            spec.c0 = Some(c0);
        }
        if let Some(c) = params.get("C").and_then(|v| v.as_f64()) {
            spec.size_c = c;
        }
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        match self.rule {
            KernelRule::Hilbert => "hilbert",
            KernelRule::Riesz { .. } => "riesz",
            KernelRule::Homogeneous { .. } => "homogeneous",
            KernelRule::Power { .. } => "power",
            KernelRule::Zero => "zero",
        }
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.c0.is_some()
    }

    pub fn is_homogeneous(&self) -> bool {
        !matches!(self.rule, KernelRule::Power { .. })
    }

    /// K(x, y); zero on the diagonal.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> C64 {
        let u: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let n = self.dim as i32;
        match &self.rule {
            KernelRule::Hilbert => C64::new(1.0 / (PI * u[0]), 0.0),
            KernelRule::Riesz { j } => C64::new(riesz_constant(self.dim) * u[*j] / r.powi(n + 1), 0.0),
            KernelRule::Homogeneous { omega } => {
                let dir: Vec<f64> = u.iter().map(|v| v / r).collect();
                omega.eval(&dir) / r.powi(n)
            }
            KernelRule::Power { s } => C64::new(r.powf(-s), 0.0),
            KernelRule::Zero => C64::new(0.0, 0.0),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let r = norm(&v);
        if r > 1e-3 && r <= 1.0 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateReport {
    pub samples: usize,
    /// max |K(x,y)|·|x−y|^n over both argument orders
    pub size_ratio: f64,
    /// max (|K(x,y)−K(x',y)| + |K(y,x)−K(y,x')|)·|x−y|^{n+α}/|x−x'|^α
    pub smoothness_ratio: f64,
    pub declared: f64,
    pub pass: bool,
}

/// Monte-Carlo check of the size and Hölder bounds on triples with
/// |x−y| > 2|x−x'| > 0, at distances spread over six decades.
pub fn standard_estimate_check(k: &KernelSpec, samples: usize, seed: u64) -> EstimateReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = k.dim;
    let (mut size, mut smooth) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let dist = 10f64.powf(rng.random::<f64>() * 6.0 - 3.0);
        let dir = random_unit(&mut rng, n);
        let x: Vec<f64> = y.iter().zip(&dir).map(|(a, b)| a + dist * b).collect();
        let step = dist * 0.5 * rng.random::<f64>().max(1e-9) * (1.0 - 1e-12);
        let dir2 = random_unit(&mut rng, n);
        let x2: Vec<f64> = x.iter().zip(&dir2).map(|(a, b)| a + step * b).collect();
        let dxy = norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        let dxx = norm(&x.iter().zip(&x2).map(|(a, b)| a - b).collect::<Vec<_>>());
        if !(dxx > 0.0 && dxy > 2.0 * dxx) {
            continue;
        }
        let s = k.eval(&x, &y).norm().max(k.eval(&y, &x).norm()) * dxy.powi(n as i32);
        let diff = (k.eval(&x, &y) - k.eval(&x2, &y)).norm() + (k.eval(&y, &x) - k.eval(&y, &x2)).norm();
        let h = diff * dxy.powf(n as f64 + k.alpha) / dxx.powf(k.alpha);
        size = size.max(s);
        smooth = smooth.max(h);
    }
    let declared = k.size_c;
    let pass = size.max(smooth) <= declared * (1.0 + 1e-6);
    EstimateReport { samples, size_ratio: size, smoothness_ratio: smooth, declared, pass }
}

/// Directions searched on the sphere, starting with the first axis.
fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut dirs: Vec<Vec<f64>> = Vec::new();
            for axis in 0..n {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; n];
                    v[axis] = s;
                    dirs.push(v);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            dirs.extend((0..count).map(|_| random_unit(&mut rng, n)));
            dirs
        }
    }
}

/// Direction maximizing |K(center + ρe, center)| (or the reversed order),
/// refined by golden-section search in the plane case.
fn best_direction(k: &KernelSpec, center: &[f64], rho: f64, reversed: bool) -> Vec<f64> {
    let value = |e: &[f64]| {
        let p: Vec<f64> = center.iter().zip(e).map(|(c, d)| c + rho * d).collect();
        if reversed {
            k.eval(&p, center).norm()
        } else {
            k.eval(center, &p).norm()
        }
    };
    let dirs = sphere_directions(k.dim, 360);
    let mut best = 0;
    for (i, e) in dirs.iter().enumerate() {
        if value(e) > value(&dirs[best]) * (1.0 + 1e-12) {
            best = i;
        }
    }
    if k.dim != 2 {
        return dirs[best].clone();
    }
    let at = |t: f64| vec![t.cos(), t.sin()];
    let t0 = dirs[best][1].atan2(dirs[best][0]);
    let h = 2.0 * PI / 360.0;
    let (mut a, mut b) = (t0 - h, t0 + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if value(&at(c)) >= value(&at(d)) {
            b = d;
        } else {
            a = c;
        }
    }
    let refined = at((a + b) / 2.0);
    if value(&refined) > value(&dirs[best]) * (1.0 + 1e-12) {
        refined
    } else {
        dirs[best].clone()
    }
}

/// A point x with |x − y| = r and |K(x, y)| ≥ 1/(c₀ rⁿ).
pub fn nondegenerate_witness(k: &KernelSpec, y: &[f64], r: f64) -> Result<Vec<f64>> {
    let c0 = k.c0.ok_or(Error::WitnessNotFound)?;
    if y.len() != k.dim || !(r > 0.0) {
        return Err(Error::InvalidArgument("witness needs a point of the kernel's dimension and r > 0".into()));
    }
    let e = best_direction(k, y, r, true);
    let x: Vec<f64> = y.iter().zip(&e).map(|(a, b)| a + r * b).collect();
    let threshold = 1.0 / (c0 * r.powi(k.dim as i32));
    if k.eval(&x, y).norm() >= threshold * (1.0 - 1e-12) {
        Ok(x)
    } else {
        Err(Error::WitnessNotFound)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallPairDiagnostics {
    pub distance: f64,
    /// |K(y₀,x₀)|·Aⁿrⁿ
    pub normalized_value: f64,
    /// sup |K(y₁,x₁) − K(y₀,x₀)|·A^{n+α}rⁿ over sampled x₁ ∈ B, y₁ ∈ B̃
    pub oscillation: f64,
    /// sup |K(y₁,x₁) − K(y₀,x₀)| / |K(y₀,x₀)|
    pub relative_oscillation: f64,
    /// sup |Im|/Re of the phase-normalized K(y₁,x₁)
    pub phase_ratio: f64,
}

/// Partner ball B(y₀, r) at distance about A·r from B(x₀, r).
pub fn ball_pair(k: &KernelSpec, x0: &[f64], r: f64, a: f64) -> Result<(Vec<f64>, BallPairDiagnostics)> {
    if a < 3.0 {
        return Err(Error::InvalidArgument("ball_pair needs A >= 3".into()));
    }
    let c0 = k.c0.ok_or(Error::PairNotFound)?;
    if x0.len() != k.dim || !(r > 0.0) {
        return Err(Error::InvalidArgument("ball_pair needs a point of the kernel's dimension and r > 0".into()));
    }
    let n = k.dim as i32;
    let base = a * r;
    let target = 1.0 / c0;
    let normalized = |y: &[f64]| k.eval(y, x0).norm() * base.powi(n);
    let e = best_direction(k, x0, base, false);
    let along = |rho: f64| -> Vec<f64> { x0.iter().zip(&e).map(|(c, d)| c + rho * d).collect() };
    let mut y0 = None;
    for step in 0..=64 {
        let rho = base * (1.0 + step as f64 / 64.0);
        let y = along(rho);
        if normalized(&y) >= target * (1.0 - 1e-12) {
            y0 = Some(y);
            break;
        }
    }
    let y0 = y0.ok_or(Error::PairNotFound)?;
    let k0 = k.eval(&y0, x0);
    let phase = if k0.norm() > 0.0 { k0.conj() / k0.norm() } else { C64::new(1.0, 0.0) };
    let ball = |c: &[f64]| -> Vec<Vec<f64>> {
        let mut pts = vec![c.to_vec()];
        for axis in 0..k.dim {
            for s in [1.0, -1.0, 0.5, -0.5] {
                let mut p = c.to_vec();
                p[axis] += s * r * (1.0 - 1e-9);
                pts.push(p);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..16 {
            let u = random_unit(&mut rng, k.dim);
            let t = rng.random::<f64>() * r * (1.0 - 1e-9);
            pts.push(c.iter().zip(&u).map(|(a, b)| a + t * b).collect());
        }
        pts
    };
    let (bx, by) = (ball(x0), ball(&y0));
    let (mut osc, mut ratio) = (0.0f64, 0.0f64);
    for x1 in &bx {
        for y1 in &by {
            let v = k.eval(y1, x1);
            osc = osc.max((v - k0).norm());
            let w = v * phase;
            if w.re > 0.0 {
                ratio = ratio.max(w.im.abs() / w.re);
            } else {
                ratio = f64::INFINITY;
            }
        }
    }
    let distance = norm(&y0.iter().zip(x0).map(|(a, b)| a - b).collect::<Vec<_>>());
    let diag = BallPairDiagnostics {
        distance,
        normalized_value: normalized(&y0),
        oscillation: osc * a.powf(k.dim as f64 + k.alpha) * r.powi(n),
        relative_oscillation: osc / k0.norm(),
        phase_ratio: ratio,
    };
    Ok((y0, diag))
}

/// M[c, c'] = K(center c, center c')·(leaf measure) off the diagonal, zero on it.
pub fn discretize(k: &KernelSpec, g: &GridSpec) -> Result<DenseOperator> {
    if g.dim() != k.dim {
        return Err(Error::DimensionMismatch(format!("kernel in dimension {} on a grid of dimension {}", k.dim, g.dim())));
    }
    let n = g.leaf_count();
    let centers: Vec<Vec<f64>> = (0..n).map(|i| g.leaf_center(i)).collect();
    let h = g.leaf_measure();
    let m = CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(0.0, 0.0) } else { k.eval(&centers[i], &centers[j]) * h });
    DenseOperator::new(g, m, OperatorKind::Kernel(k.name().to_string()))
}

/// [T, M_b] = T·M_b − M_b·T for the discretized kernel, assembled entrywise
/// as K(x, y)·h·(b(y) − b(x)).
pub fn sio_commutator(k: &KernelSpec, b: &SampledFunction) -> Result<DenseOperator> {
    let g = b.grid();
    if g.dim() != k.dim {
        return Err(Error::DimensionMismatch(format!("kernel in dimension {} on a grid of dimension {}", k.dim, g.dim())));
    }
    let n = g.leaf_count();
    let centers: Vec<Vec<f64>> = (0..n).map(|i| g.leaf_center(i)).collect();
    let h = g.leaf_measure();
    let v = b.values();
    let m = CMatrix::from_fn(n, n, |i, j| {
        if i == j || v[i] == v[j] {
            C64::new(0.0, 0.0)
        } else {
            k.eval(&centers[i], &centers[j]) * h * (v[j] - v[i])
        }
    });
    DenseOperator::new(g, m, OperatorKind::Kernel(format!("{}-commutator", k.name())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Rat;
    use crate::linalg::singular_values;
    use crate::martops::{commutator, multiplier};

    #[test]
    fn riesz_constants() {
        assert!((riesz_constant(1) - 1.0 / PI).abs() < 1e-15);
        assert!((riesz_constant(2) - 0.5 / PI).abs() < 1e-15);
        assert!((riesz_constant(3) - 1.0 / (PI * PI)).abs() < 1e-15);
        let r = KernelSpec::riesz(1, 0).unwrap();
        let h = KernelSpec::hilbert();
        assert!((r.eval(&[0.7], &[0.2]) - h.eval(&[0.7], &[0.2])).norm() < 1e-15);
    }

    #[test]
    fn estimate_checks() {
        let h = standard_estimate_check(&KernelSpec::hilbert(), 20000, 1);
        assert!(h.pass, "{h:?}");
        // the smoothness sum approaches 4/π as |x−x'| → |x−y|/2
        assert!(h.smoothness_ratio > 2.0 / PI);
        assert!(standard_estimate_check(&KernelSpec::zero(2), 100, 1).pass);
        assert!(standard_estimate_check(&KernelSpec::riesz(2, 1).unwrap(), 5000, 2).pass);
        assert!(standard_estimate_check(&KernelSpec::homogeneous(2, Omega::Phase).unwrap(), 5000, 3).pass);
        let bad = standard_estimate_check(&KernelSpec::power(2, 1.0), 5000, 4);
        assert!(!bad.pass && bad.size_ratio > 100.0);
    }

    #[test]
    fn witnesses() {
        let h = KernelSpec::hilbert();
        let x = nondegenerate_witness(&h, &[0.0], 2.0).unwrap();
        assert_eq!(x, vec![2.0]);
        assert!((h.eval(&x, &[0.0]).norm() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(matches!(nondegenerate_witness(&KernelSpec::zero(1), &[0.0], 1.0), Err(Error::WitnessNotFound)));
        let r = KernelSpec::riesz(2, 0).unwrap();
        let x = nondegenerate_witness(&r, &[0.0, 0.0], 1.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
        assert!((r.eval(&x, &[0.0, 0.0]).norm() - riesz_constant(2)).abs() < 1e-15);
    }

    #[test]
    fn ball_pairs() {
        let h = KernelSpec::hilbert();
        let (y, d) = ball_pair(&h, &[0.0], 1.0, 10.0).unwrap();
        assert_eq!(y, vec![10.0]);
        assert!((d.normalized_value - 1.0 / PI).abs() < 1e-15);
        assert_eq!(d.phase_ratio, 0.0);
        let r = KernelSpec::riesz(2, 0).unwrap();
        let (y, _) = ball_pair(&r, &[0.0, 0.0], 1.0, 16.0).unwrap();
        assert!((y[0].abs() - 16.0).abs() < 1e-9 && y[1].abs() < 1e-9);
        let (_, d8) = ball_pair(&h, &[0.0], 1.0, 8.0).unwrap();
        let (_, d64) = ball_pair(&h, &[0.0], 1.0, 64.0).unwrap();
        assert!(d64.oscillation <= d8.oscillation);
        assert!(ball_pair(&h, &[0.0], 1.0, 2.0).is_err());
        assert!(matches!(ball_pair(&KernelSpec::zero(1), &[0.0], 1.0, 8.0), Err(Error::PairNotFound)));
    }

    #[test]
    fn discretization_shapes() {
        let g = GridSpec::interval(2, 5).unwrap().with_window(vec![Rat::new(-1, 1)], Rat::from_integer(2)).unwrap();
        let t = discretize(&KernelSpec::hilbert(), &g).unwrap();
        let m = t.matrix();
        assert!((m + m.transpose()).iter().all(|z| z.norm() == 0.0));
        let z = discretize(&KernelSpec::zero(1), &g).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        // odd symmetry: T·1 vanishes at the middle cells
        let one = SampledFunction::constant(&g, C64::new(1.0, 0.0));
        let v = t.apply(&one).unwrap();
        let mid = g.leaf_count() / 2;
        assert!((v.values()[mid] + v.values()[mid - 1]).norm() < 1e-12);
    }

    #[test]
    fn commutator_with_linear_symbol() {
        let g = GridSpec::interval(2, 7).unwrap();
        let b = SampledFunction::from_fn(&g, |x| C64::new(x[0], 0.0));
        let c = sio_commutator(&KernelSpec::hilbert(), &b).unwrap();
        let t = discretize(&KernelSpec::hilbert(), &g).unwrap();
        assert!(c.max_abs_diff(&commutator(&t, &multiplier(&b)).unwrap()) < 1e-15);
        let s = singular_values(c.matrix()).unwrap();
        let h = g.leaf_measure();
        assert!((s[0] - (1.0 - h) / PI).abs() < 1e-9);
        assert!((s[1] - h / PI).abs() < 1e-9);
        let constant = SampledFunction::constant(&g, C64::new(2.0, 1.0));
        assert_eq!(sio_commutator(&KernelSpec::hilbert(), &constant).unwrap().max_abs(), 0.0);
        // [T, M_b]* = −[T*, M_b] entrywise for real b
        let other = commutator(&t.adjoint(), &multiplier(&b)).unwrap();
        assert!(c.adjoint().add(&other).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn from_name_presets() {
        let p = serde_json::json!({"n": 2, "j": 1});
        assert_eq!(KernelSpec::from_name("riesz_j", &p).unwrap().dim, 2);
        let c = KernelSpec::from_name("hilbert", &serde_json::json!({"c0": 4.0})).unwrap();
        assert_eq!(c.c0, Some(4.0));
        assert!(KernelSpec::from_name("nope", &serde_json::json!({})).is_err());
    }
}

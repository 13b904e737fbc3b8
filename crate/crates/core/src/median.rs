//! Complex median: two orthogonal lines whose four closed quadrants each carry
//! at least 1/16 of the mass of a finite weighted point set in the plane.
//!
//! The construction halves by a vertical line, halves each closed side by a
//! horizontal ray, and then sweeps a base point along the vertical line,
//! tracking the angular ranges in which a line through the base point splits
//! the two diagonal regions into quarters. Every f64 is a dyadic rational, so
//! inputs with moderate dynamic range are scaled to integers and all
//! predicates are exact; otherwise the sweep runs in floating point and the
//! result is certified afterwards, retrying in big integers if needed.

use std::cmp::Ordering;
use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Cube;
use crate::haar::SampledFunction;

/// Atoms z_j with positive weights w_j.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPointSet {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl WeightedPointSet {
    pub fn new(points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch("points and weights differ in length".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument("weights must be positive and finite".into()));
        }
        Ok(Self { points, weights })
    }

    /// Leaf values of b on Q, each weighted by the leaf measure.
    pub fn from_function(b: &SampledFunction, q: &Cube) -> Result<Self> {
        let g = b.grid();
        g.check_cube(q)?;
        let mu = g.leaf_measure();
        let leaves = g.cube_leaves(q);
        let points = leaves.iter().map(|&w| [b.values()[w].re, b.values()[w].im]).collect();
        Self::new(points, vec![mu; leaves.len()])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Applies z ↦ e^{iφ}·z + shift to every atom.
    pub fn transformed(&self, phi: f64, shift: [f64; 2]) -> Self {
        let (s, c) = phi.sin_cos();
        let points =
            self.points.iter().map(|p| [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]]).collect();
        Self { points, weights: self.weights.clone() }
    }

    pub fn scaled_weights(&self, lambda: f64) -> Result<Self> {
        Self::new(self.points.clone(), self.weights.iter().map(|w| w * lambda).collect())
    }

    /// CSV rows `re,im,w`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im,w\n");
        for (p, w) in self.points.iter().zip(&self.weights) {
            s.push_str(&format!("{:e},{:e},{:e}\n", p[0], p[1], w));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("re") {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("line {}: bad number", i + 1)))?;
            if cols.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected re,im,w", i + 1)));
            }
            points.push([cols[0], cols[1]]);
            weights.push(cols[2]);
        }
        Self::new(points, weights)
    }
}

/// Numeric type the construction runs in: exact integers or f64.
pub trait Scalar: Signed + Clone + PartialOrd + Debug {
    fn to_rational(&self) -> BigRational;

    /// Float value for sorting when products are inexact.
    fn approx(&self) -> Option<f64> {
        None
    }
}

impl Scalar for i128 {
    fn to_rational(&self) -> BigRational {
        BigRational::from_integer(BigInt::from(*self))
    }
}

impl Scalar for BigInt {
    fn to_rational(&self) -> BigRational {
        BigRational::from_integer(self.clone())
    }
}

impl Scalar for f64 {
    fn to_rational(&self) -> BigRational {
        BigRational::from_float(*self).unwrap_or_else(BigRational::zero)
    }

    fn approx(&self) -> Option<f64> {
        Some(*self)
    }
}

fn ord<T: PartialOrd>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

fn mul<T: Scalar>(a: &T, b: &T) -> T {
    a.clone() * b.clone()
}

/// Smallest key whose closed lower set carries at least half of `total`.
fn inf_halving<T: Scalar>(mut items: Vec<(T, T)>, total: &T) -> Option<T> {
    items.sort_by(|a, b| ord(&a.0, &b.0));
    let two = T::one() + T::one();
    let mut cum = T::zero();
    for i in 0..items.len() {
        cum = cum + items[i].1.clone();
        let group_end = i + 1 == items.len() || ord(&items[i + 1].0, &items[i].0) != Ordering::Equal;
        if group_end && mul(&two, &cum) >= *total {
            return Some(items[i].0.clone());
        }
    }
    None
}

/// Integer image of a point set: value = int · 2^exp.
struct ScaledSet {
    coords: Vec<[BigInt; 2]>,
    weights: Vec<BigInt>,
    coord_exp: i64,
    coord_bits: u64,
    weight_bits: u64,
}

fn decompose(v: f64) -> (BigInt, i64) {
    if v == 0.0 {
        return (BigInt::zero(), i64::MAX);
    }
    let (mut mant, mut exp, sign) = num_traits::float::FloatCore::integer_decode(v);
    let tz = mant.trailing_zeros();
    mant >>= tz;
    exp += tz as i16;
    (BigInt::from(mant) * BigInt::from(sign), exp as i64)
}

fn scale_all(vals: &[f64]) -> (Vec<BigInt>, i64, u64) {
    let parts: Vec<(BigInt, i64)> = vals.iter().map(|&v| decompose(v)).collect();
    let e = parts.iter().map(|p| p.1).min().unwrap_or(0);
    let e = if e == i64::MAX { 0 } else { e };
    let ints: Vec<BigInt> = parts
        .into_iter()
        .map(|(m, x)| if m.is_zero() { m } else { m << ((x - e) as usize) })
        .collect();
    let bits = ints.iter().map(|i| i.bits()).max().unwrap_or(0);
    (ints, e, bits)
}

impl ScaledSet {
    fn new(p: &WeightedPointSet) -> Self {
        let flat: Vec<f64> = p.points.iter().flatten().copied().collect();
        let (ci, coord_exp, coord_bits) = scale_all(&flat);
        let (weights, _, weight_bits) = scale_all(&p.weights);
        let coords = ci.chunks(2).map(|c| [c[0].clone(), c[1].clone()]).collect();
        Self { coords, weights, coord_exp, coord_bits, weight_bits }
    }

    /// Small enough that every predicate of the sweep fits in i128.
    fn fits_i128(&self) -> bool {
        self.coord_bits <= 18 && self.weight_bits <= 100
    }

    fn unit(&self) -> BigRational {
        pow2(self.coord_exp)
    }
}

fn pow2(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::from(1) << e as usize)
    } else {
        BigRational::new(BigInt::from(1), BigInt::from(1) << (-e) as usize)
    }
}

fn big_to_i128(v: &BigInt) -> i128 {
    v.to_i128().expect("bit length checked")
}

/// Offset and closed-side masses of the halving line orthogonal to a direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalvingLine {
    /// Direction angle of the projection axis.
    pub direction: f64,
    /// inf{x : mass of projections ≤ x is at least half}.
    pub offset: f64,
    /// Masses of the closed half-planes {proj ≤ offset} and {proj ≥ offset}.
    pub masses: [f64; 2],
}

pub fn halving_line(p: &WeightedPointSet, direction: f64) -> Result<HalvingLine> {
    if p.is_empty() {
        return Err(Error::EmptySet);
    }
    let (s, c) = direction.sin_cos();
    let (s, c) = (snap(s), snap(c));
    let proj: Vec<f64> = p.points.iter().map(|z| c * z[0] + s * z[1]).collect();
    let total = p.total();
    let offset = inf_halving(proj.iter().copied().zip(p.weights.iter().copied()).collect(), &total)
        .ok_or(Error::EmptySet)?;
    let lo = proj.iter().zip(&p.weights).filter(|(x, _)| **x <= offset).map(|(_, w)| w).sum();
    let hi = proj.iter().zip(&p.weights).filter(|(x, _)| **x >= offset).map(|(_, w)| w).sum();
    Ok(HalvingLine { direction, offset, masses: [lo, hi] })
}

fn snap(x: f64) -> f64 {
    if x.abs() < 1e-15 {
        0.0
    } else if (x.abs() - 1.0).abs() < 1e-15 {
        x.signum()
    } else {
        x
    }
}

/// Halving against an integer direction vector, with exact arithmetic.
/// The offset is in units of the unnormalized projection z·dir.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactHalving {
    pub offset: BigRational,
    pub masses: [BigRational; 2],
    pub total: BigRational,
}

pub fn halving_line_exact(p: &WeightedPointSet, dir: [i64; 2]) -> Result<ExactHalving> {
    if p.is_empty() {
        return Err(Error::EmptySet);
    }
    if dir == [0, 0] {
        return Err(Error::InvalidArgument("zero direction".into()));
    }
    let sc = ScaledSet::new(p);
    let (a, b) = (BigInt::from(dir[0]), BigInt::from(dir[1]));
    let proj: Vec<BigInt> = sc.coords.iter().map(|z| &z[0] * &a + &z[1] * &b).collect();
    let total: BigInt = sc.weights.iter().sum();
    let offset = inf_halving(proj.iter().cloned().zip(sc.weights.iter().cloned()).collect(), &total)
        .ok_or(Error::EmptySet)?;
    let wsum = |keep: &dyn Fn(&BigInt) -> bool| -> BigInt {
        proj.iter().zip(&sc.weights).filter(|(x, _)| keep(x)).map(|(_, w)| w.clone()).sum()
    };
    let lo = wsum(&|x| *x <= offset);
    let hi = wsum(&|x| *x >= offset);
    let wunit = pow2(scale_all(&p.weights).1);
    let unit = sc.unit();
    Ok(ExactHalving {
        offset: BigRational::from_integer(offset) * unit,
        masses: [BigRational::from_integer(lo) * &wunit, BigRational::from_integer(hi) * &wunit],
        total: BigRational::from_integer(total) * wunit,
    })
}

/// Vertical halving line re = α, split by horizontal rays at heights α₁
/// (left closed half) and α₂ (right closed half).
///
/// S₁ = {re ≤ α, im ≤ α₁}, S₂ = {re ≤ α, im ≥ α₁},
/// S₃ = {re ≥ α, im ≤ α₂}, S₄ = {re ≥ α, im ≥ α₂}.
#[derive(Clone, Debug, PartialEq)]
pub struct QuarterSplit {
    pub alpha: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub masses: [f64; 4],
    /// Exact α, α₁, α₂ when the set was scaled to integers.
    pub exact: Option<[BigRational; 3]>,
}

impl QuarterSplit {
    /// Closed-region membership of a point.
    pub fn regions(&self, z: [f64; 2]) -> [bool; 4] {
        let (l, r) = (z[0] <= self.alpha, z[0] >= self.alpha);
        [l && z[1] <= self.alpha1, l && z[1] >= self.alpha1, r && z[1] <= self.alpha2, r && z[1] >= self.alpha2]
    }
}

struct Quarter<T> {
    alpha: T,
    alpha1: T,
    alpha2: T,
    masses: [T; 4],
}

fn quarter_core<T: Scalar>(re: &[T], im: &[T], w: &[T]) -> Option<Quarter<T>> {
    let total = w.iter().fold(T::zero(), |a, b| a + b.clone());
    let alpha = inf_halving(re.iter().cloned().zip(w.iter().cloned()).collect(), &total)?;
    let side = |left: bool| -> Vec<usize> {
        (0..re.len()).filter(|&i| if left { re[i] <= alpha } else { re[i] >= alpha }).collect()
    };
    let (u1, u2) = (side(true), side(false));
    let mass = |idx: &[usize]| idx.iter().fold(T::zero(), |a, &i| a + w[i].clone());
    let halve = |idx: &[usize]| inf_halving(idx.iter().map(|&i| (im[i].clone(), w[i].clone())).collect(), &mass(idx));
    let alpha1 = halve(&u1)?;
    let alpha2 = halve(&u2)?;
    let sel = |idx: &[usize], below: bool, a: &T| -> T {
        idx.iter()
            .filter(|&&i| if below { im[i] <= *a } else { im[i] >= *a })
            .fold(T::zero(), |s, &i| s + w[i].clone())
    };
    let masses = [sel(&u1, true, &alpha1), sel(&u1, false, &alpha1), sel(&u2, true, &alpha2), sel(&u2, false, &alpha2)];
    Some(Quarter { alpha, alpha1, alpha2, masses })
}

pub fn quarter_partition(p: &WeightedPointSet) -> Result<QuarterSplit> {
    if p.is_empty() {
        return Err(Error::EmptySet);
    }
    let sc = ScaledSet::new(p);
    let re: Vec<BigInt> = sc.coords.iter().map(|z| z[0].clone()).collect();
    let im: Vec<BigInt> = sc.coords.iter().map(|z| z[1].clone()).collect();
    let q = quarter_core(&re, &im, &sc.weights).ok_or(Error::EmptySet)?;
    let unit = sc.unit();
    let (wints, wexp, _) = scale_all(&p.weights);
    debug_assert_eq!(wints, sc.weights);
    let wunit = pow2(wexp);
    let f = |v: &BigRational| v.to_f64().unwrap_or(f64::NAN);
    let exact = [
        BigRational::from_integer(q.alpha) * &unit,
        BigRational::from_integer(q.alpha1) * &unit,
        BigRational::from_integer(q.alpha2) * &unit,
    ];
    let masses = q.masses.map(|m| f(&(BigRational::from_integer(m) * &wunit)));
    Ok(QuarterSplit { alpha: f(&exact[0]), alpha1: f(&exact[1]), alpha2: f(&exact[2]), masses, exact: Some(exact) })
}

/// Which branch of the construction produced a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Construction {
    /// The two horizontal rays start at the same point.
    Aligned,
    /// A ray through the sweep point carries half of a diagonal region.
    Ray,
    /// A single line through the sweep point quarters both diagonal regions.
    Overlap,
    /// Candidate search over atom-pair directions (not expected to be used).
    Search,
}

/// Two orthogonal lines through `center`, at angles θ and θ + π/2.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoLinePair {
    pub center: [f64; 2],
    pub theta: f64,
    pub construction: Construction,
    /// Exact center and a direction vector of the first line (angle θ).
    pub exact: Option<([BigRational; 2], [BigRational; 2])>,
}

impl OrthoLinePair {
    pub fn from_angle(center: [f64; 2], theta: f64) -> Self {
        let t = theta.rem_euclid(std::f64::consts::FRAC_PI_2);
        Self { center, theta: t, construction: Construction::Search, exact: None }
    }

    /// Applies z ↦ e^{iφ}·z + shift to the pair.
    pub fn transformed(&self, phi: f64, shift: [f64; 2]) -> Self {
        let (s, c) = phi.sin_cos();
        let z = self.center;
        let center = [c * z[0] - s * z[1] + shift[0], s * z[0] + c * z[1] + shift[1]];
        Self { exact: None, ..Self::from_angle(center, self.theta + phi) }
    }
}

#[derive(Clone, Debug)]
struct Frac<T> {
    num: T,
    den: T,
}

fn frac_cmp<T: Scalar>(a: &Frac<T>, b: &Frac<T>) -> Ordering {
    ord(&mul(&a.num, &b.den), &mul(&b.num, &a.den))
}

/// Order of upper-half directions by the clockwise angle from (−1, 0).
fn dir_cmp<T: Scalar>(a: &[T; 2], b: &[T; 2]) -> Ordering {
    let cross = mul(&a[0], &b[1]) - mul(&a[1], &b[0]);
    if cross.is_negative() {
        Ordering::Less
    } else if cross.is_positive() {
        Ordering::Greater
    } else if a[1].is_zero() && b[1].is_zero() {
        match (a[0].is_negative(), b[0].is_negative()) {
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => Ordering::Equal,
        }
    } else {
        Ordering::Equal
    }
}

fn sort_dirs<T: Scalar>(dirs: &mut [(usize, [T; 2])]) {
    if dirs.first().is_some_and(|d| d.1[0].approx().is_some()) {
        // clockwise angle from (−1, 0) for upper-half directions
        let key = |d: &[T; 2]| {
            let (u, v) = (d[0].approx().unwrap_or(0.0), d[1].approx().unwrap_or(0.0));
            (if v > 0.0 { v } else { 0.0 }).atan2(-u)
        };
        dirs.sort_by(|a, b| key(&a.1).total_cmp(&key(&b.1)));
    } else {
        dirs.sort_by(|a, b| dir_cmp(&a.1, &b.1));
    }
}

/// Local solution: center and first-line direction in (u, v) coordinates.
struct LocalPair {
    center: [BigRational; 2],
    dir: [BigRational; 2],
    construction: Construction,
}

struct Frame<T> {
    alpha: T,
    mirror: bool,
}

struct SweepRegion<T> {
    idx: Vec<usize>,
    mass: T,
    /// S₄ directions are negated so both regions use upper-half angles.
    negate: bool,
}

fn rat<T: Scalar>(v: &T) -> BigRational {
    v.to_rational()
}

fn frac_rat<T: Scalar>(f: &Frac<T>) -> BigRational {
    rat(&f.num) / rat(&f.den)
}

/// The angular quarter range [lo, hi] of one region seen from (x, 0), plus
/// the mass on the ray at `lo` when lo == hi.
struct Range<T> {
    lo: [T; 2],
    hi: [T; 2],
    degenerate: bool,
    /// atoms (index, direction) for the ray construction
    dirs: Vec<(usize, [T; 2])>,
    universal: Vec<usize>,
}

fn angular_range<T: Scalar>(u: &[T], v: &[T], w: &[T], reg: &SweepRegion<T>, x: &Frac<T>) -> Option<Range<T>> {
    let four = T::one() + T::one() + T::one() + T::one();
    let mut univ = T::zero();
    let mut universal = Vec::new();
    let mut dirs: Vec<(usize, [T; 2])> = Vec::with_capacity(reg.idx.len());
    for &i in &reg.idx {
        let du = mul(&u[i], &x.den) - x.num.clone();
        let dv = mul(&v[i], &x.den);
        if du.is_zero() && dv.is_zero() {
            univ = univ + w[i].clone();
            universal.push(i);
            continue;
        }
        let d = if reg.negate { [-du, -dv] } else { [du, dv] };
        dirs.push((i, d));
    }
    sort_dirs(&mut dirs);
    let left = [-T::one(), T::zero()];
    let right = [T::one(), T::zero()];
    let reached = |cum: &T| mul(&four, &(univ.clone() + cum.clone())) >= reg.mass;
    let lo = if reached(&T::zero()) {
        left
    } else {
        let mut cum = T::zero();
        let mut found = None;
        for k in 0..dirs.len() {
            cum = cum + w[dirs[k].0].clone();
            let end = k + 1 == dirs.len() || dir_cmp(&dirs[k + 1].1, &dirs[k].1) != Ordering::Equal;
            if end && reached(&cum) {
                found = Some(dirs[k].1.clone());
                break;
            }
        }
        found?
    };
    let hi = if reached(&T::zero()) {
        right
    } else {
        let mut cum = T::zero();
        let mut found = None;
        for k in (0..dirs.len()).rev() {
            cum = cum + w[dirs[k].0].clone();
            let end = k == 0 || dir_cmp(&dirs[k - 1].1, &dirs[k].1) != Ordering::Equal;
            if end && reached(&cum) {
                found = Some(dirs[k].1.clone());
                break;
            }
        }
        found?
    };
    let degenerate = dir_cmp(&lo, &hi) == Ordering::Equal;
    Some(Range { lo, hi, degenerate, dirs, universal })
}

/// Ray from (x, 0) along `ray_dir` through a region carrying at least half
/// of it: center at the weighted median atom on the ray.
fn ray_pair<T: Scalar>(
    u: &[T],
    v: &[T],
    w: &[T],
    reg: &SweepRegion<T>,
    range: &Range<T>,
    x: &Frac<T>,
) -> Option<LocalPair> {
    let target = &range.lo;
    let mut on_ray: Vec<(T, T, usize)> = range.universal.iter().map(|&i| (T::zero(), w[i].clone(), i)).collect();
    for (i, d) in &range.dirs {
        if dir_cmp(d, target) == Ordering::Equal {
            let s = mul(&d[0], &target[0]) + mul(&d[1], &target[1]);
            on_ray.push((s, w[*i].clone(), *i));
        }
    }
    let ray_mass = on_ray.iter().fold(T::zero(), |a, b| a + b.1.clone());
    let two = T::one() + T::one();
    if mul(&two, &ray_mass) < reg.mass {
        return None;
    }
    let s_star = inf_halving(on_ray.iter().map(|t| (t.0.clone(), t.1.clone())).collect(), &ray_mass)?;
    let atom = on_ray.iter().find(|t| t.0 == s_star)?.2;
    let _ = x;
    let line_dir = if reg.negate { [-target[0].clone(), -target[1].clone()] } else { target.clone() };
    Some(LocalPair {
        center: [rat(&u[atom]), rat(&v[atom])],
        dir: [rat(&line_dir[0]), rat(&line_dir[1])],
        construction: Construction::Ray,
    })
}

fn sweep<T: Scalar>(re: &[T], im: &[T], w: &[T]) -> Option<(Frame<T>, LocalPair)> {
    let q = quarter_core(re, im, w)?;
    let n = re.len();
    let mut u: Vec<T> = im.to_vec();
    let v: Vec<T> = re.iter().map(|x| q.alpha.clone() - x.clone()).collect();
    let (mut a1, mut a2) = (q.alpha1.clone(), q.alpha2.clone());
    if a1 == a2 {
        let pair = LocalPair {
            center: [rat(&a1), BigRational::zero()],
            dir: [BigRational::from_integer(1.into()), BigRational::zero()],
            construction: Construction::Aligned,
        };
        return Some((Frame { alpha: q.alpha, mirror: false }, pair));
    }
    let mirror = a1 > a2;
    if mirror {
        u.iter_mut().for_each(|x| *x = -x.clone());
        a1 = -a1;
        a2 = -a2;
    }
    let frame = Frame { alpha: q.alpha.clone(), mirror };
    let s1: Vec<usize> = (0..n).filter(|&i| !v[i].is_negative() && u[i] <= a1).collect();
    let s4: Vec<usize> = (0..n).filter(|&i| !v[i].is_positive() && u[i] >= a2).collect();
    let mass = |idx: &[usize]| idx.iter().fold(T::zero(), |a, &i| a + w[i].clone());
    let r1 = SweepRegion { mass: mass(&s1), idx: s1, negate: false };
    let r4 = SweepRegion { mass: mass(&s4), idx: s4, negate: true };
    let big_a = inf_halving(r1.idx.iter().map(|&i| (u[i].clone(), w[i].clone())).collect(), &r1.mass)?;
    let big_b = inf_halving(r4.idx.iter().map(|&i| (u[i].clone(), w[i].clone())).collect(), &r4.mass)?;
    let one = T::one();
    let fa = Frac { num: big_a.clone(), den: one.clone() };
    let fb = Frac { num: big_b.clone(), den: one.clone() };
    let inside = |f: &Frac<T>| frac_cmp(f, &fa) != Ordering::Less && frac_cmp(f, &fb) != Ordering::Greater;
    let mut cands = vec![fa.clone(), fb.clone()];
    let both: Vec<usize> = r1.idx.iter().chain(&r4.idx).copied().collect();
    for (k, &a) in both.iter().enumerate() {
        if v[a].is_zero() {
            let f = Frac { num: u[a].clone(), den: one.clone() };
            if inside(&f) {
                cands.push(f);
            }
        }
        for &b in &both[k + 1..] {
            let den = v[b].clone() - v[a].clone();
            if den.is_zero() {
                continue;
            }
            let num = mul(&u[a], &v[b]) - mul(&u[b], &v[a]);
            let f = if den.is_negative() { Frac { num: -num, den: -den } } else { Frac { num, den } };
            if inside(&f) {
                cands.push(f);
            }
        }
    }
    if cands[0].num.approx().is_some() {
        let key = |f: &Frac<T>| f.num.approx().unwrap_or(0.0) / f.den.approx().unwrap_or(1.0);
        cands.sort_by(|a, b| key(a).total_cmp(&key(b)));
    } else {
        cands.sort_by(frac_cmp);
    }
    cands.dedup_by(|a, b| frac_cmp(a, b) == Ordering::Equal);
    let mut all = Vec::with_capacity(2 * cands.len());
    for k in 0..cands.len() {
        all.push(cands[k].clone());
        if k + 1 < cands.len() {
            let (a, b) = (&cands[k], &cands[k + 1]);
            let two = T::one() + T::one();
            all.push(Frac {
                num: mul(&a.num, &b.den) + mul(&b.num, &a.den),
                den: mul(&two, &mul(&a.den, &b.den)),
            });
        }
    }
    let ytilde = (rat(&a1) + rat(&a2)) / BigRational::from_integer(2.into());
    for x in &all {
        let Some(g1) = angular_range(&u, &v, w, &r1, x) else { continue };
        let Some(g4) = angular_range(&u, &v, w, &r4, x) else { continue };
        if dir_cmp(&g1.lo, &g1.hi) == Ordering::Greater || dir_cmp(&g4.lo, &g4.hi) == Ordering::Greater {
            continue;
        }
        if g1.degenerate {
            if let Some(p) = ray_pair(&u, &v, w, &r1, &g1, x) {
                return Some((frame, p));
            }
        }
        if g4.degenerate {
            if let Some(p) = ray_pair(&u, &v, w, &r4, &g4, x) {
                return Some((frame, p));
            }
        }
        let lo = if dir_cmp(&g1.lo, &g4.lo) == Ordering::Less { &g4.lo } else { &g1.lo };
        let hi = if dir_cmp(&g1.hi, &g4.hi) == Ordering::Less { &g1.hi } else { &g4.hi };
        // the separating line needs a first line at most vertical (du ≤ 0)
        if dir_cmp(lo, hi) != Ordering::Greater && !lo[0].is_positive() {
            let d = [rat(&lo[0]), rat(&lo[1])];
            let y = frac_rat(x);
            let norm = &d[0] * &d[0] + &d[1] * &d[1];
            let t = -((&y - &ytilde) * &d[0]) / norm;
            let center = [&y + &t * &d[0], &t * &d[1]];
            return Some((frame, LocalPair { center, dir: d, construction: Construction::Overlap }));
        }
    }
    None
}

/// Rotates a direction by quarter turns into the open-closed first quadrant.
fn normalize_dir(mut d: [BigRational; 2]) -> [BigRational; 2] {
    for _ in 0..4 {
        if d[0].is_positive() && !d[1].is_negative() {
            break;
        }
        d = [-d[1].clone(), d[0].clone()];
    }
    d
}

fn to_global<T: Scalar>(frame: &Frame<T>, lp: LocalPair) -> ([BigRational; 2], [BigRational; 2]) {
    let alpha = rat(&frame.alpha);
    let m = |x: BigRational| if frame.mirror { -x } else { x };
    let [cu, cv] = lp.center;
    let [du, dv] = lp.dir;
    let center = [alpha - cv, m(cu)];
    let dir = normalize_dir([-dv, m(du)]);
    (center, dir)
}

fn pair_from_exact(center: [BigRational; 2], dir: [BigRational; 2], construction: Construction) -> OrthoLinePair {
    let f = |v: &BigRational| v.to_f64().unwrap_or(f64::NAN);
    let theta = f(&dir[1]).atan2(f(&dir[0])).rem_euclid(std::f64::consts::FRAC_PI_2);
    OrthoLinePair { center: [f(&center[0]), f(&center[1])], theta, construction, exact: Some((center, dir)) }
}

/// Runs the construction in integers scaled by 2^exp.
fn solve_scaled<T: Scalar>(sc: &ScaledSet, conv: impl Fn(&BigInt) -> T) -> Option<OrthoLinePair> {
    let re: Vec<T> = sc.coords.iter().map(|z| conv(&z[0])).collect();
    let im: Vec<T> = sc.coords.iter().map(|z| conv(&z[1])).collect();
    let w: Vec<T> = sc.weights.iter().map(&conv).collect();
    let (frame, lp) = sweep(&re, &im, &w)?;
    let construction = lp.construction;
    let (c, d) = to_global(&frame, lp);
    let unit = sc.unit();
    Some(pair_from_exact([&c[0] * &unit, &c[1] * &unit], d, construction))
}

fn solve_float(p: &WeightedPointSet) -> Option<OrthoLinePair> {
    let re: Vec<f64> = p.points.iter().map(|z| z[0]).collect();
    let im: Vec<f64> = p.points.iter().map(|z| z[1]).collect();
    let (frame, lp) = sweep(&re, &im, &p.weights)?;
    let construction = lp.construction;
    let (c, d) = to_global(&frame, lp);
    Some(pair_from_exact(c, d, construction))
}

/// Closed-quadrant masses T₁..T₄, counterclockwise from the direction θ.
/// Uses the exact center and direction when present; otherwise atoms within
/// 1e−12 times the coordinate scale of a line count as on it.
pub fn quadrant_masses(p: &WeightedPointSet, pair: &OrthoLinePair) -> [f64; 4] {
    if let Some((c, d)) = &pair.exact {
        if let Some(m) = exact_masses(p, c, d) {
            return m.map(|x| x.to_f64().unwrap_or(f64::NAN));
        }
    }
    float_masses(p, pair)
}

fn float_masses(p: &WeightedPointSet, pair: &OrthoLinePair) -> [f64; 4] {
    let tol = float_tolerance(p.points.iter().copied(), pair);
    let mut m = [0.0; 4];
    for (z, w) in p.points.iter().zip(&p.weights) {
        for (k, hit) in float_membership(pair, *z, tol).into_iter().enumerate() {
            if hit {
                m[k] += w;
            }
        }
    }
    m
}

fn float_tolerance(points: impl Iterator<Item = [f64; 2]>, pair: &OrthoLinePair) -> f64 {
    let scale = points.flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(pair.center[0].abs()).max(pair.center[1].abs());
    1e-12 * scale.max(f64::MIN_POSITIVE)
}

fn float_membership(pair: &OrthoLinePair, z: [f64; 2], tol: f64) -> [bool; 4] {
    let (s, c) = pair.theta.sin_cos();
    let (x, y) = (z[0] - pair.center[0], z[1] - pair.center[1]);
    let a = c * x + s * y;
    let b = -s * x + c * y;
    let (ap, an) = (a >= -tol, a <= tol);
    let (bp, bn) = (b >= -tol, b <= tol);
    [ap && bp, an && bp, an && bn, ap && bn]
}

fn exact_membership(center: &[BigRational; 2], dir: &[BigRational; 2], z: [f64; 2]) -> Option<[bool; 4]> {
    let x = BigRational::from_float(z[0])? - &center[0];
    let y = BigRational::from_float(z[1])? - &center[1];
    let a = &dir[0] * &x + &dir[1] * &y;
    let b = &dir[0] * &y - &dir[1] * &x;
    let (ap, an) = (!a.is_negative(), !a.is_positive());
    let (bp, bn) = (!b.is_negative(), !b.is_positive());
    Some([ap && bp, an && bp, an && bn, ap && bn])
}

/// Closed quadrants T₁..T₄ containing each point, exact when the pair
/// carries exact data; otherwise the points set the float tolerance.
pub fn quadrant_membership(pair: &OrthoLinePair, points: &[[f64; 2]]) -> Vec<[bool; 4]> {
    if let Some((c, d)) = &pair.exact {
        if let Some(v) = points.iter().map(|z| exact_membership(c, d, *z)).collect::<Option<Vec<_>>>() {
            return v;
        }
    }
    let tol = float_tolerance(points.iter().copied(), pair);
    points.iter().map(|z| float_membership(pair, *z, tol)).collect()
}

/// Exact closed-quadrant masses with rational center and direction.
pub fn exact_masses(
    p: &WeightedPointSet,
    center: &[BigRational; 2],
    dir: &[BigRational; 2],
) -> Option<[BigRational; 4]> {
    let mut m = [BigRational::zero(), BigRational::zero(), BigRational::zero(), BigRational::zero()];
    for (z, w) in p.points.iter().zip(&p.weights) {
        let wr = BigRational::from_float(*w)?;
        for (k, hit) in exact_membership(center, dir, *z)?.into_iter().enumerate() {
            if hit {
                m[k] += &wr;
            }
        }
    }
    Some(m)
}

/// Quadrant masses against the 1/16 threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub masses: [f64; 4],
    pub total: f64,
    pub certified: bool,
    /// Whether the comparison was exact.
    pub exact: bool,
}

pub fn certify(p: &WeightedPointSet, pair: &OrthoLinePair) -> Certificate {
    let total = p.total();
    if let Some((c, d)) = &pair.exact {
        if let Some(m) = exact_masses(p, c, d) {
            let mu: BigRational = p.weights.iter().filter_map(|w| BigRational::from_float(*w)).sum();
            let sixteen = BigRational::from_integer(16.into());
            let certified = m.iter().all(|x| x * &sixteen >= mu);
            return Certificate { masses: m.map(|x| x.to_f64().unwrap_or(f64::NAN)), total, certified, exact: true };
        }
    }
    let m = float_masses(p, pair);
    let tau = 1e-12 * total;
    Certificate { masses: m, total, certified: m.iter().all(|x| *x >= total / 16.0 - tau), exact: false }
}

/// Float sweep only, certified with slack; for speed on large sets.
pub fn complex_median_fast(p: &WeightedPointSet) -> Result<OrthoLinePair> {
    if p.is_empty() {
        return Err(Error::EmptySet);
    }
    if let Some(pair) = solve_float(p) {
        let mut approx = pair.clone();
        approx.exact = None;
        if certify(p, &approx).certified {
            return Ok(approx);
        }
    }
    complex_median(p)
}

pub fn complex_median(p: &WeightedPointSet) -> Result<OrthoLinePair> {
    if p.is_empty() {
        return Err(Error::EmptySet);
    }
    let sc = ScaledSet::new(p);
    if sc.fits_i128() {
        if let Some(pair) = solve_scaled(&sc, big_to_i128) {
            return Ok(pair);
        }
    } else {
        if let Some(pair) = solve_float(p) {
            if certify(p, &pair).certified {
                return Ok(pair);
            }
        }
        if let Some(pair) = solve_scaled(&sc, |b: &BigInt| b.clone()) {
            return Ok(pair);
        }
    }
    oracle::search(p)?.ok_or(Error::InvalidArgument("no quadrant split found".into()))
}

/// JSON result of the solver.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MedianReport {
    pub center: [f64; 2],
    pub theta: f64,
    pub masses: [f64; 4],
    pub total: f64,
    pub certified: bool,
}

pub fn report(p: &WeightedPointSet, pair: &OrthoLinePair) -> MedianReport {
    let c = certify(p, pair);
    MedianReport { center: pair.center, theta: pair.theta, masses: c.masses, total: c.total, certified: c.certified }
}

/// Exhaustive search over candidate directions and centers, exact in
/// integers. Independent of the sweep; used as a test oracle.
pub mod oracle {
    use super::*;

    /// Candidate directions: a 256-point grid of the quarter turn plus every
    /// atom-pair difference and its perpendicular.
    fn directions(coords: &[[i128; 2]]) -> Vec<[i128; 2]> {
        let mut out = Vec::new();
        for k in 0..256 {
            let t = std::f64::consts::FRAC_PI_2 * k as f64 / 256.0;
            let r = (1u64 << 20) as f64;
            out.push([(t.cos() * r).round() as i128, (t.sin() * r).round() as i128]);
        }
        for (i, a) in coords.iter().enumerate() {
            for b in &coords[i + 1..] {
                let d = [b[0] - a[0], b[1] - a[1]];
                if d != [0, 0] {
                    out.push(d);
                    out.push([-d[1], d[0]]);
                }
            }
        }
        out
    }

    /// A center given in rotated coordinates: s0 = c·d, t0 = c·d⊥.
    #[derive(Clone, Debug, PartialEq)]
    pub struct Found {
        pub dir: [i128; 2],
        pub s0: i128,
        pub t0: i128,
        pub masses: [i128; 4],
    }

    pub fn search_scaled(coords: &[[i128; 2]], w: &[i128]) -> Option<Found> {
        let total: i128 = w.iter().sum();
        for d in directions(coords) {
            let s: Vec<i128> = coords.iter().map(|z| z[0] * d[0] + z[1] * d[1]).collect();
            let t: Vec<i128> = coords.iter().map(|z| z[1] * d[0] - z[0] * d[1]).collect();
            let mut s0s = s.clone();
            s0s.sort();
            s0s.dedup();
            let mut t0s = t.clone();
            t0s.sort();
            t0s.dedup();
            for &s0 in &s0s {
                for &t0 in &t0s {
                    let mut m = [0i128; 4];
                    for k in 0..coords.len() {
                        let (a, b) = (s[k] - s0, t[k] - t0);
                        if a >= 0 && b >= 0 {
                            m[0] += w[k];
                        }
                        if a <= 0 && b >= 0 {
                            m[1] += w[k];
                        }
                        if a <= 0 && b <= 0 {
                            m[2] += w[k];
                        }
                        if a >= 0 && b <= 0 {
                            m[3] += w[k];
                        }
                    }
                    if m.iter().all(|&x| 16 * x >= total) {
                        return Some(Found { dir: d, s0, t0, masses: m });
                    }
                }
            }
        }
        None
    }

    /// Oracle on a point set; errors when its integer image is too wide.
    pub fn search(p: &WeightedPointSet) -> Result<Option<OrthoLinePair>> {
        if p.is_empty() {
            return Err(Error::EmptySet);
        }
        let sc = ScaledSet::new(p);
        if sc.coord_bits > 40 || sc.weight_bits > 100 {
            return Err(Error::InvalidArgument("point set too wide for the exhaustive search".into()));
        }
        let coords: Vec<[i128; 2]> = sc.coords.iter().map(|z| [big_to_i128(&z[0]), big_to_i128(&z[1])]).collect();
        let w: Vec<i128> = sc.weights.iter().map(big_to_i128).collect();
        let Some(f) = search_scaled(&coords, &w) else { return Ok(None) };
        // center c solves c·d = s0, c·d⊥ = t0, with d⊥ = (−d1, d0)
        let r = |v: i128| BigRational::from_integer(BigInt::from(v));
        let n2 = r(f.dir[0] * f.dir[0] + f.dir[1] * f.dir[1]);
        let cx = (r(f.s0) * r(f.dir[0]) - r(f.t0) * r(f.dir[1])) / &n2;
        let cy = (r(f.s0) * r(f.dir[1]) + r(f.t0) * r(f.dir[0])) / &n2;
        let unit = sc.unit();
        let dir = normalize_dir([r(f.dir[0]), r(f.dir[1])]);
        Ok(Some(pair_from_exact([cx * &unit, cy * &unit], dir, Construction::Search)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::haar::C64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(pts: &[(f64, f64)], w: &[f64]) -> WeightedPointSet {
        WeightedPointSet::new(pts.iter().map(|p| [p.0, p.1]).collect(), w.to_vec()).unwrap()
    }

    fn dyadic_instance(rng: &mut ChaCha8Rng, n: usize, spread: i64) -> WeightedPointSet {
        let pts = (0..n)
            .map(|_| {
                [rng.random_range(-spread..=spread) as f64 / 8.0, rng.random_range(-spread..=spread) as f64 / 8.0]
            })
            .collect();
        let w = (0..n).map(|_| rng.random_range(1..=8) as f64 / 16.0).collect();
        WeightedPointSet::new(pts, w).unwrap()
    }

    #[test]
    fn halving_examples() {
        let h = halving_line(&set(&[(0.0, 0.0), (1.0, 0.0)], &[0.5, 0.5]), 0.0).unwrap();
        assert_eq!((h.offset, h.masses), (0.0, [0.5, 1.0]));
        let h = halving_line(&set(&[(2.0, 3.0)], &[1.5]), 0.7).unwrap();
        assert_eq!(h.masses, [1.5, 1.5]);
        let four = set(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)], &[0.25; 4]);
        let h = halving_line(&four, 0.0).unwrap();
        assert_eq!((h.offset, h.masses), (1.0, [0.5, 0.75]));
        assert!(matches!(halving_line(&set(&[], &[]), 0.0), Err(Error::EmptySet)));
    }

    #[test]
    fn quarter_examples() {
        let corners = set(&[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)], &[0.25; 4]);
        let q = quarter_partition(&corners).unwrap();
        assert!(q.masses.iter().all(|m| *m >= 0.25));
        let single = quarter_partition(&set(&[(0.5, -2.0)], &[3.0])).unwrap();
        assert_eq!(single.masses, [3.0; 4]);
    }

    #[test]
    fn median_examples() {
        let single = set(&[(0.25, 0.5)], &[2.0]);
        let pair = complex_median(&single).unwrap();
        assert_eq!(pair.center, [0.25, 0.5]);
        assert_eq!(quadrant_masses(&single, &pair), [2.0; 4]);
        let roots = set(&[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)], &[0.25; 4]);
        let axes = OrthoLinePair::from_angle([0.0, 0.0], 0.0);
        assert_eq!(quadrant_masses(&roots, &axes), [0.5; 4]);
        assert!(certify(&roots, &complex_median(&roots).unwrap()).certified);
        let generic = set(&[(0.3, 0.1), (-0.7, 0.2), (0.1, -0.9)], &[1.0, 2.0, 3.0]);
        let off = OrthoLinePair::from_angle([0.05, 0.05], 0.1);
        assert!((quadrant_masses(&generic, &off).iter().sum::<f64>() - 6.0).abs() < 1e-15);
        let at_center = OrthoLinePair::from_angle([0.3, 0.1], 0.4);
        assert_eq!(quadrant_masses(&set(&[(0.3, 0.1)], &[1.0]), &at_center), [1.0; 4]);
    }

    #[test]
    fn oracle_validates_on_small_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(1..12);
            let p = dyadic_instance(&mut rng, n, 6);
            let found = oracle::search(&p).unwrap().expect("oracle finds a split");
            assert!(certify(&p, &found).certified);
        }
    }

    #[test]
    fn solver_certified_on_random_dyadic_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut used = [0usize; 4];
        for _ in 0..300 {
            let n = rng.random_range(1..40);
            let spread = [1, 3, 20, 1000][rng.random_range(0..4)];
            let p = dyadic_instance(&mut rng, n, spread);
            let pair = complex_median(&p).unwrap();
            let c = certify(&p, &pair);
            assert!(c.certified && c.exact, "{p:?} {pair:?} {c:?}");
            used[pair.construction as usize] += 1;
        }
        assert_eq!(used[Construction::Search as usize], 0, "{used:?}");
    }

    #[test]
    fn float_and_bigint_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let n = rng.random_range(2..30);
            // wide dynamic range forces the float path
            let pts: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.random::<f64>() * 1e6 - 5e5, rng.random::<f64>() * 1e-6])
                .collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
            let p = WeightedPointSet::new(pts, w).unwrap();
            let pair = complex_median(&p).unwrap();
            assert!(certify(&p, &pair).certified);
            let fast = complex_median_fast(&p).unwrap();
            assert!(certify(&p, &fast).certified);
            let big = solve_scaled(&ScaledSet::new(&p), |b: &BigInt| b.clone()).unwrap();
            assert!(certify(&p, &big).certified);
        }
    }

    #[test]
    fn from_function_uses_leaf_measures() {
        let g = GridSpec::interval(2, 3).unwrap();
        let f = SampledFunction::from_fn(&g, |x| C64::new(x[0], -x[0]));
        let p = WeightedPointSet::from_function(&f, &Cube { level: 1, q: vec![1] }).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.total(), 0.5);
        assert!(certify(&p, &complex_median(&p).unwrap()).certified);
    }

    #[test]
    fn csv_roundtrip() {
        let p = set(&[(0.5, -1.25), (3.0, 0.0)], &[0.125, 2.0]);
        assert_eq!(WeightedPointSet::from_csv(&p.to_csv()).unwrap(), p);
        assert!(WeightedPointSet::from_csv("re,im,w\n1,2\n").is_err());
        assert!(WeightedPointSet::from_csv("1,2,-1\n").is_err());
    }

    fn instance() -> impl Strategy<Value = WeightedPointSet> {
        proptest::collection::vec(((-16i32..16), (-16i32..16), (1i32..8)), 1..30).prop_map(|v| {
            let pts = v.iter().map(|t| [t.0 as f64 / 4.0, t.1 as f64 / 4.0]).collect();
            let w = v.iter().map(|t| t.2 as f64 / 8.0).collect();
            WeightedPointSet::new(pts, w).unwrap()
        })
    }

    proptest! {
        #[test]
        fn halving_contract(p in instance(), a in -5i64..6, b in -5i64..6) {
            prop_assume!(a != 0 || b != 0);
            let h = halving_line_exact(&p, [a, b]).unwrap();
            let two = BigRational::from_integer(2.into());
            prop_assert!(&h.masses[0] * &two >= h.total && &h.masses[1] * &two >= h.total);
        }

        #[test]
        fn quarter_contract(p in instance()) {
            let q = quarter_partition(&p).unwrap();
            let [al, a1, a2] = q.exact.clone().unwrap();
            let mut m = [BigRational::zero(), BigRational::zero(), BigRational::zero(), BigRational::zero()];
            let mut total = BigRational::zero();
            for (z, w) in p.points().iter().zip(p.weights()) {
                let (x, y) = (BigRational::from_float(z[0]).unwrap(), BigRational::from_float(z[1]).unwrap());
                let w = BigRational::from_float(*w).unwrap();
                total += &w;
                let inside = [x <= al && y <= a1, x <= al && y >= a1, x >= al && y <= a2, x >= al && y >= a2];
                for k in 0..4 { if inside[k] { m[k] += &w; } }
            }
            let four = BigRational::from_integer(4.into());
            for x in &m { prop_assert!(x * &four >= total); }
        }

        #[test]
        fn median_certified_and_equivariant(p in instance(), phi in 0.0f64..6.28, sx in -3.0f64..3.0) {
            let pair = complex_median(&p).unwrap();
            prop_assert!(certify(&p, &pair).certified);
            // weights scaled by λ scale the masses
            let q = p.scaled_weights(0.5).unwrap();
            let m = quadrant_masses(&p, &pair);
            let mq = quadrant_masses(&q, &pair);
            for k in 0..4 { prop_assert!((mq[k] - 0.5 * m[k]).abs() < 1e-12); }
            prop_assert!(m.iter().sum::<f64>() >= p.total() * (1.0 - 1e-12));
            // transported pair on the transported set keeps the masses
            let moved = p.transformed(phi, [sx, 0.5]);
            let moved_pair = pair.transformed(phi, [sx, 0.5]);
            let mut plain = pair.clone();
            plain.exact = None;
            let before = quadrant_masses(&p, &plain);
            let after = quadrant_masses(&moved, &moved_pair);
            let mut b = before; b.sort_by(f64::total_cmp);
            let mut a = after; a.sort_by(f64::total_cmp);
            for k in 0..4 { prop_assert!((a[k] - b[k]).abs() < 1e-9); }
        }
    }
}

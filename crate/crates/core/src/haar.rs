//! Complex Haar systems: roots-of-unity wavelets on d-adic intervals and the
//! tensor sign system on dyadic cubes, with analysis, synthesis, conditional
//! expectations and martingale differences.
//!
//! Internally every grid is traversed in tree order, where the leaves of a
//! cube form one contiguous block. `SampledFunction` stores values in window
//! order (row-major over leaf coordinates), which does not depend on the shift.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Cube, GridSpec};

pub type C64 = Complex64;

/// Piecewise constant function on the leaf cells of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    grid: GridSpec,
    values: Vec<C64>,
}

impl SampledFunction {
    pub fn new(grid: GridSpec, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.leaf_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} leaf cells",
                values.len(),
                grid.leaf_count()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.leaf_count()] }
    }

    pub fn constant(grid: &GridSpec, c: C64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.leaf_count()] }
    }

    /// Samples `f` at leaf cell centers.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&[f64]) -> C64) -> Self {
        let values = (0..grid.leaf_count()).map(|w| f(&grid.leaf_center(w))).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn from_real(grid: &GridSpec, values: &[f64]) -> Result<Self> {
        Self::new(grid.clone(), values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn indicator(grid: &GridSpec, cube: &Cube) -> Self {
        let mut f = Self::zeros(grid);
        for w in grid.cube_leaves(cube) {
            f.values[w] = C64::new(1.0, 0.0);
        }
        f
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// The same samples viewed through another grid on the same leaf partition.
    pub fn on_grid(&self, grid: &GridSpec) -> Result<Self> {
        if grid.unshifted() != self.grid.unshifted() {
            return Err(Error::DimensionMismatch("grids do not share a leaf partition".into()));
        }
        Ok(Self { grid: grid.clone(), values: self.values.clone() })
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.values.len() != other.values.len() || self.grid.unshifted() != other.grid.unshifted()
        {
            return Err(Error::DimensionMismatch("functions live on different grids".into()));
        }
        Ok(())
    }

    /// ⟨self, other⟩ = Σ conj(self)·other·(leaf measure).
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.same_grid(other)?;
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.leaf_measure())
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_lp(2.0)
    }

    pub fn norm_lp(&self, p: f64) -> f64 {
        let mu = self.grid.leaf_measure();
        if p.is_infinite() {
            return self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        (self.values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * mu).powf(1.0 / p)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }
}

/// A wavelet: cube plus branch. Branches run over 1..C where C is the number
/// of children per cube; for dyadic cubes in dimension n the branch bits are
/// the sign pattern η, coordinate 0 in the most significant bit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WaveletIndex {
    pub cube: Cube,
    pub branch: usize,
}

/// Wavelet coefficients per level plus the average over the window.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarCoefficients {
    grid: GridSpec,
    /// levels[k][t·(C−1) + branch − 1], t the tree index of the level-k cube
    levels: Vec<Vec<C64>>,
    averages: Vec<C64>,
}

impl HaarCoefficients {
    pub fn zeros(grid: &GridSpec) -> Self {
        let b = grid.children_per_cube() - 1;
        Self {
            grid: grid.clone(),
            levels: (0..grid.levels())
                .map(|k| vec![C64::new(0.0, 0.0); grid.cube_count(k) * b])
                .collect(),
            averages: vec![C64::new(0.0, 0.0)],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn slot(&self, w: &WaveletIndex) -> Result<(usize, usize)> {
        self.grid.check_cube(&w.cube)?;
        let c = self.grid.children_per_cube();
        if w.cube.level >= self.grid.levels() || w.branch == 0 || w.branch >= c {
            return Err(Error::InvalidArgument(format!("no wavelet {w:?}")));
        }
        Ok((w.cube.level, self.grid.tree_index(&w.cube) * (c - 1) + w.branch - 1))
    }

    pub fn get(&self, w: &WaveletIndex) -> Result<C64> {
        let (k, i) = self.slot(w)?;
        Ok(self.levels[k][i])
    }

    pub fn set(&mut self, w: &WaveletIndex, v: C64) -> Result<()> {
        let (k, i) = self.slot(w)?;
        self.levels[k][i] = v;
        Ok(())
    }

    /// Average of the function over the (single) top cell.
    pub fn average(&self) -> C64 {
        self.averages[0]
    }

    pub fn set_average(&mut self, v: C64) {
        self.averages[0] = v;
    }

    /// Raw coefficients of level k in tree order.
    pub fn level(&self, k: usize) -> &[C64] {
        &self.levels[k]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [C64] {
        &mut self.levels[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = (WaveletIndex, C64)> + '_ {
        let b = self.grid.children_per_cube() - 1;
        self.levels.iter().enumerate().flat_map(move |(k, lv)| {
            lv.iter().enumerate().map(move |(i, &v)| {
                let cube = self.grid.cube_from_tree(k, i / b);
                (WaveletIndex { cube, branch: i % b + 1 }, v)
            })
        })
    }

    /// Σ|coef|² + |window|·|average|².
    pub fn energy(&self) -> f64 {
        let w: f64 = self.levels.iter().flatten().map(|c| c.norm_sqr()).sum();
        w + self.grid.window_measure() * self.averages[0].norm_sqr()
    }
}

/// Character table of the child pattern: row = branch, column = child.
pub fn child_characters(grid: &GridSpec) -> Vec<Vec<C64>> {
    let c = grid.children_per_cube();
    if grid.dim() == 1 {
        let roots = roots_of_unity(c);
        (0..c).map(|i| (0..c).map(|j| roots[(i * (j + 1)) % c]).collect()).collect()
    } else {
        (0..c)
            .map(|eta| {
                (0..c)
                    .map(|j| {
                        let s = if (eta & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                        C64::new(s, 0.0)
                    })
                    .collect()
            })
            .collect()
    }
}

/// e^{2πi m/d} for m < d, with the values on the axes exact.
pub fn roots_of_unity(d: usize) -> Vec<C64> {
    (0..d)
        .map(|m| {
            let (s, c) = (2.0 * PI * m as f64 / d as f64).sin_cos();
            C64::new(snap(c), snap(s))
        })
        .collect()
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

/// Precomputed traversal data for one grid.
#[derive(Clone, Debug)]
pub struct HaarBasis {
    grid: GridSpec,
    chars: Vec<Vec<C64>>,
    tree_to_window: Vec<usize>,
    identity_order: bool,
}

impl HaarBasis {
    pub fn new(grid: &GridSpec) -> Self {
        let tree_to_window = grid.tree_to_window();
        let identity_order = tree_to_window.iter().enumerate().all(|(i, &w)| i == w);
        Self { grid: grid.clone(), chars: child_characters(grid), tree_to_window, identity_order }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn characters(&self) -> &[Vec<C64>] {
        &self.chars
    }

    pub fn tree_to_window(&self) -> &[usize] {
        &self.tree_to_window
    }

    pub fn to_tree(&self, window: &[C64]) -> Vec<C64> {
        if self.identity_order {
            return window.to_vec();
        }
        self.tree_to_window.iter().map(|&w| window[w]).collect()
    }

    pub fn to_window(&self, tree: &[C64]) -> Vec<C64> {
        if self.identity_order {
            return tree.to_vec();
        }
        let mut out = vec![C64::new(0.0, 0.0); tree.len()];
        for (t, &w) in self.tree_to_window.iter().enumerate() {
            out[w] = tree[t];
        }
        out
    }

    /// Coefficients of a tree-ordered leaf vector.
    pub fn analyze_tree(&self, v: &[C64]) -> (Vec<Vec<C64>>, C64) {
        let g = &self.grid;
        let c = g.children_per_cube();
        let mut cur = v.to_vec();
        let mut levels = vec![Vec::new(); g.levels()];
        for k in (0..g.levels()).rev() {
            let count = g.cube_count(k);
            let scale = g.cube_measure(k).sqrt() / c as f64;
            let mut next = Vec::with_capacity(count);
            let mut coefs = Vec::with_capacity(count * (c - 1));
            for t in 0..count {
                let a = &cur[t * c..(t + 1) * c];
                for row in &self.chars[1..] {
                    let s: C64 = row.iter().zip(a).map(|(x, y)| x.conj() * y).sum();
                    coefs.push(s * scale);
                }
                next.push(a.iter().sum::<C64>() / c as f64);
            }
            levels[k] = coefs;
            cur = next;
        }
        (levels, cur[0])
    }

    pub fn synthesize_tree(&self, levels: &[Vec<C64>], average: C64) -> Vec<C64> {
        let g = &self.grid;
        let c = g.children_per_cube();
        let mut cur = vec![average];
        for (k, coefs) in levels.iter().enumerate() {
            let scale = 1.0 / g.cube_measure(k).sqrt();
            let mut next = Vec::with_capacity(cur.len() * c);
            for (t, &avg) in cur.iter().enumerate() {
                let cf = &coefs[t * (c - 1)..(t + 1) * (c - 1)];
                for j in 0..c {
                    let mut v = avg;
                    for (b, &x) in cf.iter().enumerate() {
                        v += x * self.chars[b + 1][j] * scale;
                    }
                    next.push(v);
                }
            }
            cur = next;
        }
        cur
    }

    /// E_k on a tree-ordered vector: block means over level-k cubes.
    pub fn expectation_tree(&self, v: &[C64], k: usize) -> Vec<C64> {
        let per = self.grid.cells_in_cube(k);
        let mut out = Vec::with_capacity(v.len());
        for chunk in v.chunks(per) {
            let m = chunk.iter().sum::<C64>() / per as f64;
            out.extend(std::iter::repeat_n(m, per));
        }
        out
    }

    /// Block means only, one per level-k cube.
    pub fn cube_averages_tree(&self, v: &[C64], k: usize) -> Vec<C64> {
        let per = self.grid.cells_in_cube(k);
        v.chunks(per).map(|ch| ch.iter().sum::<C64>() / per as f64).collect()
    }

    /// All conditional expectations E_0..E_L of a tree-ordered vector, as
    /// per-cube averages.
    pub fn average_pyramid(&self, v: &[C64]) -> Vec<Vec<C64>> {
        let g = &self.grid;
        let c = g.children_per_cube();
        let mut pyr = vec![Vec::new(); g.levels() + 1];
        pyr[g.levels()] = v.to_vec();
        for k in (0..g.levels()).rev() {
            pyr[k] = pyr[k + 1].chunks(c).map(|ch| ch.iter().sum::<C64>() / c as f64).collect();
        }
        pyr
    }

    /// Values of a wavelet on the leaves of its cube, in tree order.
    pub fn wavelet_on_cube(&self, level: usize, branch: usize) -> Vec<C64> {
        let g = &self.grid;
        let c = g.children_per_cube();
        let per_child = g.cells_in_cube(level + 1);
        let scale = 1.0 / g.cube_measure(level).sqrt();
        let mut out = Vec::with_capacity(per_child * c);
        for j in 0..c {
            let v = self.chars[branch % c][j] * scale;
            out.extend(std::iter::repeat_n(v, per_child));
        }
        out
    }
}

/// The wavelet as a leaf-sampled function. Branch C (the children count)
/// denotes the normalized constant |I|^{-1/2}·1_I.
pub fn haar_function(grid: &GridSpec, w: &WaveletIndex) -> Result<SampledFunction> {
    grid.check_cube(&w.cube)?;
    let c = grid.children_per_cube();
    if w.cube.level >= grid.levels() || w.branch == 0 || w.branch > c {
        return Err(Error::InvalidArgument(format!("no wavelet {w:?}")));
    }
    let hb = HaarBasis::new(grid);
    let vals = hb.wavelet_on_cube(w.cube.level, w.branch);
    let mut f = SampledFunction::zeros(grid);
    for (wi, v) in grid.cube_leaves(&w.cube).into_iter().zip(vals) {
        f.values[wi] = v;
    }
    Ok(f)
}

pub fn analyze(f: &SampledFunction) -> HaarCoefficients {
    let hb = HaarBasis::new(f.grid());
    analyze_with(&hb, f)
}

pub fn analyze_with(hb: &HaarBasis, f: &SampledFunction) -> HaarCoefficients {
    let (levels, avg) = hb.analyze_tree(&hb.to_tree(f.values()));
    HaarCoefficients { grid: f.grid().clone(), levels, averages: vec![avg] }
}

pub fn synthesize(c: &HaarCoefficients) -> SampledFunction {
    let hb = HaarBasis::new(c.grid());
    synthesize_with(&hb, c)
}

pub fn synthesize_with(hb: &HaarBasis, c: &HaarCoefficients) -> SampledFunction {
    let tree = hb.synthesize_tree(&c.levels, c.averages[0]);
    SampledFunction { grid: c.grid.clone(), values: hb.to_window(&tree) }
}

pub fn expectation(f: &SampledFunction, k: usize) -> Result<SampledFunction> {
    if k > f.grid().levels() {
        return Err(Error::InvalidArgument(format!("level {k} above leaf level")));
    }
    let hb = HaarBasis::new(f.grid());
    let e = hb.expectation_tree(&hb.to_tree(f.values()), k);
    Ok(SampledFunction { grid: f.grid().clone(), values: hb.to_window(&e) })
}

/// d_k f = E_k f − E_{k−1} f for 1 ≤ k ≤ L.
pub fn difference(f: &SampledFunction, k: usize) -> Result<SampledFunction> {
    if k == 0 || k > f.grid().levels() {
        return Err(Error::InvalidArgument(format!("difference level {k} outside 1..=L")));
    }
    expectation(f, k)?.sub(&expectation(f, k - 1)?)
}

/// Scale factor of a wavelet product: the product carries μ(I)^{−1/2}.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductScale {
    InvSqrtMeasure,
}

impl ProductScale {
    pub fn value(self, measure: f64) -> f64 {
        match self {
            ProductScale::InvSqrtMeasure => 1.0 / measure.sqrt(),
        }
    }
}

/// h^i·h^j = μ^{−1/2}·h^{r} with r = i + j reduced into [1, d]; r = d is the
/// normalized constant.
pub fn product_index(i: usize, j: usize, d: usize) -> Result<(usize, ProductScale)> {
    if d < 2 || i == 0 || j == 0 || i >= d || j >= d {
        return Err(Error::InvalidArgument(format!("branches ({i},{j}) invalid for d={d}")));
    }
    Ok(((i + j - 1) % d + 1, ProductScale::InvSqrtMeasure))
}

/// Product rule for any grid: roots of unity add, sign patterns multiply.
pub fn product_branch(grid: &GridSpec, i: usize, j: usize) -> Result<(usize, ProductScale)> {
    if grid.dim() == 1 {
        return product_index(i, j, grid.branching());
    }
    let c = grid.children_per_cube();
    if i == 0 || j == 0 || i >= c || j >= c {
        return Err(Error::InvalidArgument(format!("branches ({i},{j}) invalid")));
    }
    let x = i ^ j;
    Ok((if x == 0 { c } else { x }, ProductScale::InvSqrtMeasure))
}

fn q_string(q: &[usize]) -> String {
    q.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(":")
}

fn parse_q(s: &str) -> Result<Vec<usize>> {
    s.split(':')
        .map(|p| p.trim().parse().map_err(|_| Error::Parse(format!("bad index {s:?}"))))
        .collect()
}

fn parse_f(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') || l.starts_with("cell_index") || l.starts_with("level")
        {
            None
        } else {
            Some((i + 1, l.split(',').collect()))
        }
    })
}

/// CSV rows `cell_index,re,im` in window order.
pub fn function_to_csv(f: &SampledFunction) -> String {
    let mut s = String::from("cell_index,re,im\n");
    for (i, v) in f.values().iter().enumerate() {
        s.push_str(&format!("{i},{:e},{:e}\n", v.re, v.im));
    }
    s
}

pub fn function_from_csv(grid: &GridSpec, text: &str) -> Result<SampledFunction> {
    let mut values = vec![C64::new(0.0, 0.0); grid.leaf_count()];
    let mut seen = vec![false; grid.leaf_count()];
    for (line, cols) in data_lines(text) {
        if cols.len() != 3 {
            return Err(Error::Parse(format!("line {line}: expected cell_index,re,im")));
        }
        let i: usize =
            cols[0].trim().parse().map_err(|_| Error::Parse(format!("line {line}: bad index")))?;
        if i >= values.len() {
            return Err(Error::Parse(format!("line {line}: cell {i} outside grid")));
        }
        values[i] = C64::new(parse_f(cols[1])?, parse_f(cols[2])?);
        seen[i] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::Parse("missing cells".into()));
    }
    SampledFunction::new(grid.clone(), values)
}

/// CSV rows `level,q,branch,re,im` plus `avg,q,re,im`; q is colon-separated
/// for n ≥ 2.
pub fn coefficients_to_csv(c: &HaarCoefficients) -> String {
    let mut s = String::from("level,q,branch,re,im\n");
    for (w, v) in c.iter() {
        s.push_str(&format!(
            "{},{},{},{:e},{:e}\n",
            w.cube.level,
            q_string(&w.cube.q),
            w.branch,
            v.re,
            v.im
        ));
    }
    let root = c.grid.root();
    s.push_str(&format!("avg,{},{:e},{:e}\n", q_string(&root.q), c.average().re, c.average().im));
    s
}

pub fn coefficients_from_csv(grid: &GridSpec, text: &str) -> Result<HaarCoefficients> {
    let mut c = HaarCoefficients::zeros(grid);
    for (line, cols) in data_lines(text) {
        if cols[0].trim() == "avg" {
            if cols.len() != 4 {
                return Err(Error::Parse(format!("line {line}: expected avg,q,re,im")));
            }
            c.set_average(C64::new(parse_f(cols[2])?, parse_f(cols[3])?));
            continue;
        }
        if cols.len() != 5 {
            return Err(Error::Parse(format!("line {line}: expected level,q,branch,re,im")));
        }
        let level: usize =
            cols[0].trim().parse().map_err(|_| Error::Parse(format!("line {line}: bad level")))?;
        let branch: usize =
            cols[2].trim().parse().map_err(|_| Error::Parse(format!("line {line}: bad branch")))?;
        let w = WaveletIndex { cube: Cube { level, q: parse_q(cols[1])? }, branch };
        c.set(&w, C64::new(parse_f(cols[3])?, parse_f(cols[4])?))?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Rat;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn root_wavelet(branch: usize) -> WaveletIndex {
        WaveletIndex { cube: Cube { level: 0, q: vec![0] }, branch }
    }

    #[test]
    fn dyadic_wavelet_values() {
        let g = GridSpec::interval(2, 1).unwrap();
        let h = haar_function(&g, &root_wavelet(1)).unwrap();
        assert_eq!(h.values(), &[c(-1.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn triadic_wavelet_values() {
        let g = GridSpec::interval(3, 1).unwrap();
        let h = haar_function(&g, &root_wavelet(1)).unwrap();
        let w = C64::from_polar(1.0, 2.0 * PI / 3.0);
        let expect = [w, w * w, c(1.0, 0.0)];
        for (a, b) in h.values().iter().zip(expect) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn tensor_wavelet_sign_pattern() {
        let g = GridSpec::unit_cube(2, 1).unwrap();
        let w = WaveletIndex { cube: g.root(), branch: 0b10 };
        let h = haar_function(&g, &w).unwrap();
        // η = (1,0): + on x₁ < 1/2, − on x₁ ≥ 1/2, constant in x₂
        assert_eq!(h.values(), &[c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)]);
    }

    fn all_wavelets(g: &GridSpec) -> Vec<WaveletIndex> {
        let mut out = Vec::new();
        for k in 0..g.levels() {
            for cube in g.cubes(k) {
                for b in 1..g.children_per_cube() {
                    out.push(WaveletIndex { cube: cube.clone(), branch: b });
                }
            }
        }
        out
    }

    #[test]
    fn orthonormal_at_level_four() {
        for d in [2, 3, 4] {
            let g = GridSpec::interval(d, if d == 4 { 3 } else { 4 }).unwrap();
            let hs: Vec<_> = all_wavelets(&g).iter().map(|w| haar_function(&g, w).unwrap()).collect();
            for (i, a) in hs.iter().enumerate() {
                for (j, b) in hs.iter().enumerate() {
                    let ip = a.inner(b).unwrap();
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - e).norm() < 1e-12, "d={d} ({i},{j}) {ip}");
                }
            }
        }
    }

    #[test]
    fn indicator_of_left_half() {
        let g = GridSpec::interval(2, 3).unwrap();
        let f = SampledFunction::indicator(&g, &Cube { level: 1, q: vec![0] });
        let co = analyze(&f);
        assert!((co.average() - c(0.5, 0.0)).norm() < 1e-15);
        assert!((co.get(&root_wavelet(1)).unwrap() - c(-0.5, 0.0)).norm() < 1e-15);
        for (w, v) in co.iter() {
            if w.cube.level > 0 {
                assert!(v.norm() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_has_no_wavelet_part() {
        let g = GridSpec::interval(3, 3).unwrap();
        let co = analyze(&SampledFunction::constant(&g, c(2.0, -1.0)));
        assert!(co.iter().all(|(_, v)| v.norm() < 1e-14));
    }

    #[test]
    fn wavelet_analyzes_to_delta() {
        let g = GridSpec::interval(3, 3).unwrap();
        let w = WaveletIndex { cube: Cube { level: 1, q: vec![2] }, branch: 2 };
        let co = analyze(&haar_function(&g, &w).unwrap());
        for (x, v) in co.iter() {
            let e = if x == w { 1.0 } else { 0.0 };
            assert!((v - e).norm() < 1e-14);
        }
        assert!(co.average().norm() < 1e-15);
    }

    #[test]
    fn single_coefficient_synthesis() {
        let g = GridSpec::interval(2, 3).unwrap();
        let w = WaveletIndex { cube: Cube { level: 2, q: vec![1] }, branch: 1 };
        let mut co = HaarCoefficients::zeros(&g);
        assert!(synthesize(&co).values().iter().all(|v| v.norm() == 0.0));
        co.set(&w, c(2.0, 1.0)).unwrap();
        let f = synthesize(&co);
        let expect = haar_function(&g, &w).unwrap().scale(c(2.0, 1.0));
        assert!(f.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn expectation_examples() {
        let g = GridSpec::interval(2, 2).unwrap();
        let f = SampledFunction::indicator(&g, &Cube { level: 2, q: vec![0] });
        let e1 = expectation(&f, 1).unwrap();
        assert_eq!(e1.values(), &[c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(expectation(&f, 2).unwrap(), f);
        let h = haar_function(&g, &root_wavelet(1)).unwrap();
        assert!(expectation(&h, 0).unwrap().values().iter().all(|v| v.norm() == 0.0));
        assert!(expectation(&f, 3).is_err());
    }

    #[test]
    fn wavelet_lives_in_one_difference() {
        let g = GridSpec::interval(3, 3).unwrap();
        let w = WaveletIndex { cube: Cube { level: 1, q: vec![1] }, branch: 1 };
        let h = haar_function(&g, &w).unwrap();
        for k in 1..=3 {
            let dk = difference(&h, k).unwrap();
            if k == 2 {
                assert!(dk.max_abs_diff(&h) < 1e-14);
            } else {
                assert!(dk.norm_l2() < 1e-14);
            }
        }
        assert!(difference(&h, 0).is_err());
    }

    #[test]
    fn product_index_examples() {
        assert_eq!(product_index(1, 1, 3).unwrap().0, 2);
        assert_eq!(product_index(1, 2, 3).unwrap().0, 3);
        assert_eq!(product_index(1, 1, 2).unwrap().0, 2);
        assert!(product_index(0, 1, 3).is_err());
        // (h^1)^2 = μ^{-1} 1_I on a dyadic cube of measure 1/2
        let g = GridSpec::interval(2, 3).unwrap();
        let cube = Cube { level: 1, q: vec![1] };
        let h = haar_function(&g, &WaveletIndex { cube: cube.clone(), branch: 1 }).unwrap();
        let sq = h.mul(&h).unwrap();
        let expect = SampledFunction::indicator(&g, &cube).scale(c(2.0, 0.0));
        assert!(sq.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn csv_roundtrips() {
        let g = GridSpec::unit_cube(2, 2).unwrap();
        let f = SampledFunction::from_fn(&g, |x| c(x[0] * 3.0, x[1] - 0.25));
        let back = function_from_csv(&g, &function_to_csv(&f)).unwrap();
        assert_eq!(back, f);
        let co = analyze(&f);
        let text = coefficients_to_csv(&co);
        assert!(text.lines().any(|l| l.starts_with("avg,0:0,")));
        let back = coefficients_from_csv(&g, &text).unwrap();
        assert_eq!(back, co);
    }

    fn grids() -> impl Strategy<Value = GridSpec> {
        prop_oneof![
            (2usize..5, 1usize..5).prop_map(|(d, l)| GridSpec::interval(d, l).unwrap()),
            (1usize..4).prop_map(|l| GridSpec::unit_cube(2, l).unwrap()),
            (0i64..16).prop_map(|s| GridSpec::interval(2, 4)
                .unwrap()
                .shifted(vec![Rat::new(s, 16)])
                .unwrap()),
        ]
    }

    fn function_on(g: GridSpec) -> impl Strategy<Value = SampledFunction> {
        let n = g.leaf_count();
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(move |v| {
            SampledFunction::new(g.clone(), v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn roundtrip_and_parseval(f in grids().prop_flat_map(function_on)) {
            let co = analyze(&f);
            let back = synthesize(&co);
            let norm = f.norm_l2().max(1e-300);
            prop_assert!(back.max_abs_diff(&f) <= 1e-12 * norm.max(1.0));
            prop_assert!((co.energy() - norm * norm).abs() <= 1e-12 * norm * norm);
        }

        #[test]
        fn telescoping(f in grids().prop_flat_map(function_on)) {
            let l = f.grid().levels();
            let mut sum = SampledFunction::zeros(f.grid());
            for k in 1..=l {
                sum = sum.add(&difference(&f, k).unwrap()).unwrap();
            }
            let rest = f.sub(&expectation(&f, 0).unwrap()).unwrap();
            prop_assert!(sum.max_abs_diff(&rest) < 1e-13);
        }

        #[test]
        fn expectation_idempotent_self_adjoint(
            pair in grids().prop_flat_map(|g| (function_on(g.clone()), function_on(g))),
            k in 0usize..5,
        ) {
            let (f, h) = pair;
            let k = k.min(f.grid().levels());
            let ef = expectation(&f, k).unwrap();
            prop_assert!(expectation(&ef, k).unwrap().max_abs_diff(&ef) < 1e-14);
            let lhs = h.inner(&ef).unwrap();
            let rhs = expectation(&h, k).unwrap().inner(&f).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-13);
        }
    }
}

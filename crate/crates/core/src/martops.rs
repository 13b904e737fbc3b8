//! Martingale operators as dense matrices over the leaf cells: multipliers,
//! paraproducts, the diagonal and remainder parts of multiplication, the
//! auxiliary Ψ operator, dyadic shifts and commutators.
//!
//! Matrices act on leaf values in window order. The leaf measure is uniform,
//! so the adjoint for the L² inner product is the conjugate transpose.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cube, GridSpec};
use crate::haar::{HaarBasis, SampledFunction, C64};
use crate::linalg::{self, CMatrix};

const ZERO: C64 = Complex64 { re: 0.0, im: 0.0 };

/// What an operator was assembled from. Derived operators are `General`.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorKind {
    General,
    Multiplier,
    Expectation(usize),
    Paraproduct,
    ParaproductAdjoint,
    Lambda,
    Remainder(SampledFunction),
    Psi,
    Shift(Box<ShiftCoefficients>),
    ShiftRemainderCommutator { shift: Box<ShiftCoefficients>, symbol: SampledFunction },
    Kernel(String),
}

#[derive(Clone, Debug)]
pub struct DenseOperator {
    grid: GridSpec,
    matrix: CMatrix,
    kind: OperatorKind,
}

impl DenseOperator {
    pub fn new(grid: &GridSpec, matrix: CMatrix, kind: OperatorKind) -> Result<Self> {
        let n = grid.leaf_count();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on {n} leaf cells",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(Self { grid: grid.clone(), matrix, kind })
    }

    pub fn from_matrix(grid: &GridSpec, matrix: CMatrix) -> Result<Self> {
        Self::new(grid, matrix, OperatorKind::General)
    }

    pub fn zero(grid: &GridSpec) -> Self {
        let n = grid.leaf_count();
        Self { grid: grid.clone(), matrix: CMatrix::zeros(n, n), kind: OperatorKind::General }
    }

    pub fn identity(grid: &GridSpec) -> Self {
        let n = grid.leaf_count();
        Self { grid: grid.clone(), matrix: CMatrix::identity(n, n), kind: OperatorKind::General }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn with_kind(mut self, kind: OperatorKind) -> Self {
        self.kind = kind;
        self
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.matrix.shape() != other.matrix.shape()
            || self.grid.unshifted() != other.grid.unshifted()
        {
            return Err(Error::DimensionMismatch("operators on different grids".into()));
        }
        Ok(())
    }

    fn derived(&self, matrix: CMatrix) -> Self {
        Self { grid: self.grid.clone(), matrix, kind: OperatorKind::General }
    }

    pub fn apply(&self, f: &SampledFunction) -> Result<SampledFunction> {
        if f.values().len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch("function and operator sizes differ".into()));
        }
        let v = nalgebra::DVector::from_column_slice(f.values());
        SampledFunction::new(f.grid().clone(), (&self.matrix * v).iter().copied().collect())
    }

    pub fn adjoint(&self) -> Self {
        self.derived(self.matrix.adjoint())
    }

    /// self ∘ other.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(self.derived(&self.matrix * &other.matrix))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(self.derived(&self.matrix + &other.matrix))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(self.derived(&self.matrix - &other.matrix))
    }

    pub fn scale(&self, c: C64) -> Self {
        self.derived(&self.matrix * c)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        linalg::max_abs(&(&self.matrix - &other.matrix))
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.matrix)
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        linalg::singular_values(&self.matrix)
    }

    pub fn spectral_norm(&self) -> Result<f64> {
        linalg::spectral_norm(&self.matrix)
    }
}

/// Tree-order bookkeeping shared by the assemblies.
struct Tree {
    basis: HaarBasis,
    n: usize,
    levels: usize,
    cells: Vec<usize>,
}

impl Tree {
    fn new(grid: &GridSpec) -> Self {
        let levels = grid.levels();
        Self {
            basis: HaarBasis::new(grid),
            n: grid.leaf_count(),
            levels,
            cells: (0..=levels).map(|k| grid.cells_in_cube(k)).collect(),
        }
    }

    /// Per-leaf conditional expectations E_k b for k = 0..=L, tree order.
    fn leaf_expectations(&self, b: &SampledFunction) -> Vec<Vec<C64>> {
        let pyr = self.basis.average_pyramid(&self.basis.to_tree(b.values()));
        (0..=self.levels)
            .map(|k| (0..self.n).map(|x| pyr[k][x / self.cells[k]]).collect())
            .collect()
    }

    /// Per-leaf martingale differences d_k b, index 0 unused.
    fn leaf_differences(&self, e: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let mut d = vec![vec![ZERO; self.n]];
        for k in 1..=self.levels {
            d.push((0..self.n).map(|x| e[k][x] - e[k - 1][x]).collect());
        }
        d
    }

    /// Fills a matrix whose row x depends on y only through the deepest
    /// level m at which x and y share a cube; `table(x)[m]` gives the entry.
    /// With `transpose` the table describes column x instead.
    fn fill(&self, transpose: bool, table: impl Fn(usize) -> Vec<C64>) -> CMatrix {
        let n = self.n;
        let mut data = vec![ZERO; n * n];
        for x in 0..n {
            let t = table(x);
            for k in 0..=self.levels {
                let per = self.cells[k];
                let start = (x / per) * per;
                for y in start..start + per {
                    let idx = if transpose { y * n + x } else { x * n + y };
                    data[idx] = t[k];
                }
            }
        }
        self.to_window(&data)
    }

    fn to_window(&self, tree_rows: &[C64]) -> CMatrix {
        let n = self.n;
        let perm = self.basis.tree_to_window();
        if perm.iter().enumerate().all(|(i, &w)| i == w) {
            return CMatrix::from_row_slice(n, n, tree_rows);
        }
        let mut m = CMatrix::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                m[(perm[x], perm[y])] = tree_rows[x * n + y];
            }
        }
        m
    }

    /// Table for Σ_k g_k(x)·d_k acting on f: row entries by common level.
    fn difference_table(&self, g: &[Vec<C64>], x: usize) -> Vec<C64> {
        let l = self.levels;
        let mut t = vec![ZERO; l + 1];
        let mut acc = ZERO;
        for m in 0..=l {
            if m >= 1 {
                let k = m;
                acc += g[k][x] * (1.0 / self.cells[k] as f64 - 1.0 / self.cells[k - 1] as f64);
            }
            t[m] = acc;
            if m < l {
                t[m] -= g[m + 1][x] / self.cells[m] as f64;
            }
        }
        t
    }

    /// Table for Σ_k g_k(x)·E_{k−1}.
    fn lagged_expectation_table(&self, g: &[Vec<C64>], x: usize) -> Vec<C64> {
        let l = self.levels;
        let mut t = vec![ZERO; l + 1];
        let mut acc = ZERO;
        for (m, slot) in t.iter_mut().enumerate() {
            let k = m + 1;
            if k <= l {
                acc += g[k][x] / self.cells[k - 1] as f64;
            }
            *slot = acc;
        }
        t
    }
}

pub fn multiplier(b: &SampledFunction) -> DenseOperator {
    let m = CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(b.values()));
    DenseOperator { grid: b.grid().clone(), matrix: m, kind: OperatorKind::Multiplier }
}

/// E_k as a matrix.
pub fn expectation_operator(grid: &GridSpec, k: usize) -> Result<DenseOperator> {
    if k > grid.levels() {
        return Err(Error::InvalidArgument(format!("level {k} above leaf level")));
    }
    let tree = Tree::new(grid);
    let w = C64::new(1.0 / tree.cells[k] as f64, 0.0);
    let m = tree.fill(false, |_| (0..=tree.levels).map(|m| if m >= k { w } else { ZERO }).collect());
    Ok(DenseOperator { grid: grid.clone(), matrix: m, kind: OperatorKind::Expectation(k) })
}

/// f ↦ Σ_{k=1}^{L} d_k b · E_{k−1} f.
pub fn paraproduct(b: &SampledFunction) -> DenseOperator {
    let tree = Tree::new(b.grid());
    let db = tree.leaf_differences(&tree.leaf_expectations(b));
    let m = tree.fill(false, |x| tree.lagged_expectation_table(&db, x));
    DenseOperator { grid: b.grid().clone(), matrix: m, kind: OperatorKind::Paraproduct }
}

/// The paraproduct assembled from the Haar expansion Σ ⟨h,b⟩⟨1_I/|I|, f⟩ h.
pub fn paraproduct_haar(b: &SampledFunction) -> DenseOperator {
    let grid = b.grid();
    let tree = Tree::new(grid);
    let c = grid.children_per_cube();
    let (coefs, _) = tree.basis.analyze_tree(&tree.basis.to_tree(b.values()));
    let chars = tree.basis.characters();
    let m = tree.fill(false, |x| {
        let mut t = vec![ZERO; tree.levels + 1];
        let mut acc = ZERO;
        for (l, slot) in t.iter_mut().enumerate() {
            if l < tree.levels {
                let cube = x / tree.cells[l];
                let child = (x / tree.cells[l + 1]) % c;
                let scale = 1.0 / grid.cube_measure(l).sqrt() / tree.cells[l] as f64;
                for br in 1..c {
                    acc += coefs[l][cube * (c - 1) + br - 1] * chars[br][child] * scale;
                }
            }
            *slot = acc;
        }
        t
    });
    DenseOperator { grid: grid.clone(), matrix: m, kind: OperatorKind::Paraproduct }
}

/// f ↦ Σ_k E_{k−1}(conj(d_k b)·d_k f).
pub fn paraproduct_adjoint(b: &SampledFunction) -> DenseOperator {
    let tree = Tree::new(b.grid());
    let db = tree.leaf_differences(&tree.leaf_expectations(b));
    let conj: Vec<Vec<C64>> = db.iter().map(|v| v.iter().map(|z| z.conj()).collect()).collect();
    let m = tree.fill(true, |y| tree.lagged_expectation_table(&conj, y));
    DenseOperator { grid: b.grid().clone(), matrix: m, kind: OperatorKind::ParaproductAdjoint }
}

/// f ↦ Σ_k d_k b · d_k f.
pub fn lambda(b: &SampledFunction) -> DenseOperator {
    let tree = Tree::new(b.grid());
    let db = tree.leaf_differences(&tree.leaf_expectations(b));
    let m = tree.fill(false, |x| tree.difference_table(&db, x));
    DenseOperator { grid: b.grid().clone(), matrix: m, kind: OperatorKind::Lambda }
}

/// f ↦ Σ_k E_{k−1} b · d_k f.
pub fn remainder(b: &SampledFunction) -> DenseOperator {
    let tree = Tree::new(b.grid());
    let e = tree.leaf_expectations(b);
    let mut lagged = vec![vec![ZERO; tree.n]];
    lagged.extend(e[..tree.levels].iter().cloned());
    let m = tree.fill(false, |x| tree.difference_table(&lagged, x));
    DenseOperator { grid: b.grid().clone(), matrix: m, kind: OperatorKind::Remainder(b.clone()) }
}

/// f ↦ Σ_{1≤j<k≤L} d_k a · d_j b · d_j f.
pub fn psi(a: &SampledFunction, b: &SampledFunction) -> Result<DenseOperator> {
    if a.grid().unshifted() != b.grid().unshifted() {
        return Err(Error::DimensionMismatch("symbols on different grids".into()));
    }
    let tree = Tree::new(b.grid());
    let ea = tree.leaf_expectations(a);
    let db = tree.leaf_differences(&tree.leaf_expectations(b));
    let l = tree.levels;
    // Σ_{k>j} d_k a = a − E_j a
    let weight: Vec<Vec<C64>> = (0..=l)
        .map(|j| (0..tree.n).map(|x| db[j][x] * (ea[l][x] - ea[j][x])).collect())
        .collect();
    let m = tree.fill(false, |x| tree.difference_table(&weight, x));
    Ok(DenseOperator { grid: b.grid().clone(), matrix: m, kind: OperatorKind::Psi })
}

/// AB − BA. A shift commuted with a remainder keeps both for block extraction.
pub fn commutator(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    a.check(b)?;
    let m = &a.matrix * &b.matrix - &b.matrix * &a.matrix;
    let kind = match (&a.kind, &b.kind) {
        (OperatorKind::Shift(s), OperatorKind::Remainder(sym)) => {
            OperatorKind::ShiftRemainderCommutator { shift: s.clone(), symbol: sym.clone() }
        }
        _ => OperatorKind::General,
    };
    Ok(DenseOperator { grid: a.grid.clone(), matrix: m, kind })
}

/// max entry of π_b + Λ_b + R_b − (M_b − M_{E₀b}E₀).
pub fn decomposition_residual(b: &SampledFunction) -> Result<f64> {
    let lhs = paraproduct(b).add(&lambda(b))?.add(&remainder(b))?;
    let mean = b.values().iter().sum::<C64>() / b.values().len() as f64;
    let rhs = multiplier(b).sub(&expectation_operator(b.grid(), 0)?.scale(mean))?;
    Ok(lhs.max_abs_diff(&rhs))
}

/// max entry of [π_a, R_b] + Ψ_{a,b} + π_a π_b + π_a M_{E₀b} E₀.
pub fn paraproduct_remainder_residual(a: &SampledFunction, b: &SampledFunction) -> Result<f64> {
    let pa = paraproduct(a);
    let mean = b.values().iter().sum::<C64>() / b.values().len() as f64;
    let e0 = expectation_operator(b.grid(), 0)?.scale(mean);
    let total = commutator(&pa, &remainder(b))?
        .add(&psi(a, b)?)?
        .add(&pa.compose(&paraproduct(b))?)?
        .add(&pa.compose(&e0)?)?;
    Ok(total.max_abs())
}

/// (1+m)^{2(n+α)}·2^{−αm} with m = max(i, j).
pub fn shift_weight_bound(i: usize, j: usize, n: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) || n == 0 {
        return Err(Error::InvalidArgument(format!("need α ∈ (0,1], n ≥ 1; got α={alpha}, n={n}")));
    }
    let m = i.max(j) as f64;
    Ok((1.0 + m).powf(2.0 * (n as f64 + alpha)) * 2f64.powf(-alpha * m))
}

/// Coefficients of a shift of complexity (i, j). For each admissible cube K
/// the block has rows (J, η) and columns (I, ξ), with J and I the depth-j and
/// depth-i descendants of K in tree order and η, ξ the branches.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftCoefficients {
    grid: GridSpec,
    i: usize,
    j: usize,
    blocks: Vec<Vec<CMatrix>>,
}

impl ShiftCoefficients {
    pub fn zeros(grid: &GridSpec, i: usize, j: usize) -> Result<Self> {
        let depth = i.max(j);
        if grid.levels() < depth + 1 {
            return Err(Error::InvalidArgument(format!(
                "no cube admits depth {depth} below it with L = {}",
                grid.levels()
            )));
        }
        let b = grid.children_per_cube() - 1;
        let c = grid.children_per_cube();
        let rows = c.pow(j as u32) * b;
        let cols = c.pow(i as u32) * b;
        let blocks = (0..grid.levels() - depth)
            .map(|k| (0..grid.cube_count(k)).map(|_| CMatrix::zeros(rows, cols)).collect())
            .collect();
        Ok(Self { grid: grid.clone(), i, j, blocks })
    }

    /// Magnitude exactly at the bound, phases uniform.
    pub fn max_random(grid: &GridSpec, i: usize, j: usize, seed: u64) -> Result<Self> {
        let mut s = Self::zeros(grid, i, j)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..s.blocks.len() {
            let bound = s.bound();
            for blk in &mut s.blocks[k] {
                for z in blk.iter_mut() {
                    let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                    *z = C64::from_polar(bound, phase);
                }
            }
        }
        Ok(s)
    }

    /// i = j = 0 with a_{KKK}^{ξη} = δ_{ξη}.
    pub fn haar_delta(grid: &GridSpec) -> Result<Self> {
        let mut s = Self::zeros(grid, 0, 0)?;
        for lv in &mut s.blocks {
            for blk in lv.iter_mut() {
                blk.fill_with_identity();
            }
        }
        Ok(s)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn depths(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    /// √(|I||J|)/|K|, the same for every admissible K.
    pub fn bound(&self) -> f64 {
        (self.grid.children_per_cube() as f64).powf(-((self.i + self.j) as f64) / 2.0)
    }

    pub fn admissible_cubes(&self) -> Vec<Cube> {
        (0..self.blocks.len()).flat_map(|k| self.grid.cubes(k)).collect()
    }

    pub fn is_admissible(&self, k: &Cube) -> bool {
        self.grid.check_cube(k).is_ok() && k.level < self.blocks.len()
    }

    pub fn block(&self, k: &Cube) -> Result<&CMatrix> {
        if !self.is_admissible(k) {
            return Err(Error::InvalidArgument(format!("cube {k:?} not admissible")));
        }
        Ok(&self.blocks[k.level][self.grid.tree_index(k)])
    }

    /// Replaces a whole block after checking the bound entrywise.
    pub fn set_block(&mut self, k: &Cube, m: CMatrix) -> Result<()> {
        let cur = self.block(k)?;
        if cur.shape() != m.shape() {
            return Err(Error::DimensionMismatch("shift block shape".into()));
        }
        let bound = self.bound();
        for z in m.iter() {
            check_bound(z.norm(), bound)?;
        }
        let t = self.grid.tree_index(k);
        self.blocks[k.level][t] = m;
        Ok(())
    }

    fn local(&self, k: &Cube, sub: &Cube, depth: usize, branch: usize) -> Result<usize> {
        if sub.level != k.level + depth {
            return Err(Error::InvalidArgument(format!("{sub:?} is not at depth {depth} below {k:?}")));
        }
        let c = self.grid.children_per_cube();
        let t = self.grid.tree_index(sub);
        let base = self.grid.tree_index(k) * c.pow(depth as u32);
        if t < base || t >= base + c.pow(depth as u32) {
            return Err(Error::InvalidArgument(format!("{sub:?} not inside {k:?}")));
        }
        if branch == 0 || branch >= c {
            return Err(Error::InvalidArgument(format!("branch {branch} out of range")));
        }
        Ok((t - base) * (c - 1) + branch - 1)
    }

    pub fn get(&self, k: &Cube, i: (&Cube, usize), j: (&Cube, usize)) -> Result<C64> {
        let col = self.local(k, i.0, self.i, i.1)?;
        let row = self.local(k, j.0, self.j, j.1)?;
        Ok(self.block(k)?[(row, col)])
    }

    pub fn set(&mut self, k: &Cube, i: (&Cube, usize), j: (&Cube, usize), v: C64) -> Result<()> {
        check_bound(v.norm(), self.bound())?;
        let col = self.local(k, i.0, self.i, i.1)?;
        let row = self.local(k, j.0, self.j, j.1)?;
        self.block(k)?;
        let t = self.grid.tree_index(k);
        self.blocks[k.level][t][(row, col)] = v;
        Ok(())
    }
}

fn check_bound(value: f64, bound: f64) -> Result<()> {
    if value > bound * (1.0 + 1e-12) {
        return Err(Error::CoefficientBound { value, bound });
    }
    Ok(())
}

/// Leaf values (tree order, restricted to K) of the depth-`depth` wavelets
/// below a level-`level` cube: one column per (sub-cube, branch).
fn local_wavelets(grid: &GridSpec, basis: &HaarBasis, level: usize, depth: usize) -> CMatrix {
    let c = grid.children_per_cube();
    let size = grid.cells_in_cube(level);
    let per_sub = grid.cells_in_cube(level + depth);
    let subs = c.pow(depth as u32);
    let mut w = CMatrix::zeros(size, subs * (c - 1));
    for br in 1..c {
        let vals = basis.wavelet_on_cube(level + depth, br);
        for s in 0..subs {
            let col = s * (c - 1) + br - 1;
            for (r, v) in vals.iter().enumerate() {
                w[(s * per_sub + r, col)] = *v;
            }
        }
    }
    w
}

/// S = Σ_K Σ a_{IJK}^{ξη} ⟨H_I^ξ, ·⟩ H_J^η.
pub fn dyadic_shift(coeffs: &ShiftCoefficients) -> Result<DenseOperator> {
    let grid = &coeffs.grid;
    let bound = coeffs.bound();
    for z in coeffs.blocks.iter().flatten().flat_map(|b| b.iter()) {
        check_bound(z.norm(), bound)?;
    }
    let tree = Tree::new(grid);
    let n = tree.n;
    let mu = grid.leaf_measure();
    let mut data = vec![ZERO; n * n];
    for (k, level_blocks) in coeffs.blocks.iter().enumerate() {
        let wi = local_wavelets(grid, &tree.basis, k, coeffs.i);
        let wj = local_wavelets(grid, &tree.basis, k, coeffs.j);
        let wi_adj = wi.adjoint();
        let size = tree.cells[k];
        for (t, a) in level_blocks.iter().enumerate() {
            if a.iter().all(|z| *z == ZERO) {
                continue;
            }
            let local = &wj * a * &wi_adj * C64::new(mu, 0.0);
            let off = t * size;
            for r in 0..size {
                for s in 0..size {
                    data[(off + r) * n + off + s] += local[(r, s)];
                }
            }
        }
    }
    Ok(DenseOperator {
        grid: grid.clone(),
        matrix: tree.to_window(&data),
        kind: OperatorKind::Shift(Box::new(coeffs.clone())),
    })
}

/// Window-order leaf values of the depth-i wavelets below K, one per column.
fn wavelets_below(grid: &GridSpec, basis: &HaarBasis, k: &Cube, depth: usize) -> CMatrix {
    let local = local_wavelets(grid, basis, k.level, depth);
    let perm = basis.tree_to_window();
    let size = grid.cells_in_cube(k.level);
    let off = grid.tree_index(k) * size;
    let mut w = CMatrix::zeros(grid.leaf_count(), local.ncols());
    for r in 0..size {
        for c in 0..local.ncols() {
            w[(perm[off + r], c)] = local[(r, c)];
        }
    }
    w
}

/// The block B_K*B_K of Φ*Φ on the depth-i wavelets below K.
pub fn block_extract(phi: &DenseOperator, k: &Cube, depth: usize) -> Result<CMatrix> {
    let OperatorKind::ShiftRemainderCommutator { shift, .. } = &phi.kind else {
        return Err(Error::NotShiftRemainderCommutator);
    };
    if depth != shift.i {
        return Err(Error::InvalidArgument(format!(
            "depth {depth} differs from the shift's source depth {}",
            shift.i
        )));
    }
    if !shift.is_admissible(k) {
        return Err(Error::InvalidArgument(format!("cube {k:?} not admissible")));
    }
    let basis = HaarBasis::new(&phi.grid);
    let w = wavelets_below(&phi.grid, &basis, k, depth);
    let pw = &phi.matrix * w;
    Ok(pw.adjoint() * pw * C64::new(phi.grid.leaf_measure(), 0.0))
}

/// Orthonormal basis (constant, then wavelets level by level) as columns of
/// window-order leaf values, with the cube and branch of each column.
pub fn wavelet_basis_matrix(grid: &GridSpec) -> (CMatrix, Vec<Option<(Cube, usize)>>) {
    let basis = HaarBasis::new(grid);
    let n = grid.leaf_count();
    let mut u = CMatrix::zeros(n, n);
    let mut labels = vec![None];
    let c0 = C64::new(1.0 / grid.window_measure().sqrt(), 0.0);
    for r in 0..n {
        u[(r, 0)] = c0;
    }
    let mut col = 1;
    for k in 0..grid.levels() {
        for cube in grid.cubes(k) {
            let w = wavelets_below(grid, &basis, &cube, 0);
            for b in 0..w.ncols() {
                u.set_column(col, &w.column(b));
                labels.push(Some((cube.clone(), b + 1)));
                col += 1;
            }
        }
    }
    (u, labels)
}

#[derive(Clone, Debug)]
pub struct BlockReport {
    pub blocks: Vec<(Cube, CMatrix)>,
    pub cross_mass: f64,
    pub total_mass: f64,
    /// Σ_K trace(B_K*B_K) minus trace(Φ*Φ).
    pub trace_gap: f64,
}

impl BlockReport {
    pub fn cross_ratio(&self) -> f64 {
        if self.total_mass == 0.0 {
            0.0
        } else {
            self.cross_mass / self.total_mass
        }
    }
}

/// Φ*Φ in the full orthonormal wavelet basis, split into cross-block and
/// total absolute mass, plus every block B_K*B_K.
pub fn block_structure(phi: &DenseOperator) -> Result<BlockReport> {
    let OperatorKind::ShiftRemainderCommutator { shift, .. } = &phi.kind else {
        return Err(Error::NotShiftRemainderCommutator);
    };
    let grid = &phi.grid;
    let (u, labels) = wavelet_basis_matrix(grid);
    let pu = &phi.matrix * &u;
    let g = pu.adjoint() * pu * C64::new(grid.leaf_measure(), 0.0);
    let groups: Vec<Option<usize>> = labels
        .iter()
        .map(|lab| {
            let (cube, _) = lab.as_ref()?;
            if cube.level < shift.i {
                return None;
            }
            let level_k = cube.level - shift.i;
            if level_k >= shift.blocks.len() {
                return None;
            }
            let parent_t = grid.tree_index(cube) / grid.children_per_cube().pow(shift.i as u32);
            Some(level_k * grid.leaf_count() + parent_t)
        })
        .collect();
    let (mut cross, mut total) = (0.0, 0.0);
    for r in 0..g.nrows() {
        for c in 0..g.ncols() {
            let v = g[(r, c)].norm();
            total += v;
            if groups[r].is_none() || groups[r] != groups[c] {
                cross += v;
            }
        }
    }
    let mut blocks = Vec::new();
    let mut block_trace = 0.0;
    for k in shift.admissible_cubes() {
        let b = block_extract(phi, &k, shift.i)?;
        block_trace += linalg::trace(&b).re;
        blocks.push((k, b));
    }
    let full_trace = linalg::trace(&g).re;
    Ok(BlockReport { blocks, cross_mass: cross, total_mass: total, trace_gap: block_trace - full_trace })
}

/// Eigenvalues s_m of a positive block against the bound Tr/m.
#[derive(Clone, Debug)]
pub struct TailReport {
    pub eigenvalues: Vec<f64>,
    pub trace: f64,
    /// max over m of s_m − Tr/m.
    pub max_excess: f64,
    pub holds: bool,
}

pub fn weak_type_tail(block: &CMatrix) -> Result<TailReport> {
    let e = linalg::hermitian_eigenvalues(block)?;
    let trace = linalg::trace(block).re;
    let slack = 1e-12 * trace.abs().max(1.0);
    let mut max_excess = f64::NEG_INFINITY;
    for (m, s) in e.iter().enumerate() {
        max_excess = max_excess.max(s - trace / (m + 1) as f64);
    }
    let holds = e.is_empty() || max_excess <= slack;
    Ok(TailReport { eigenvalues: e, trace, max_excess, holds })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContainerHeader {
    grid: GridSpec,
    rows: usize,
    cols: usize,
    dtype: String,
    basis: String,
}

/// Binary container: u64 LE header length, JSON header, then row-major
/// (re, im) pairs as LE f64.
pub fn write_container(op: &DenseOperator, mut out: impl Write) -> Result<()> {
    let header = ContainerHeader {
        grid: op.grid.clone(),
        rows: op.matrix.nrows(),
        cols: op.matrix.ncols(),
        dtype: "complex128".into(),
        basis: "leaf".into(),
    };
    let h = serde_json::to_vec(&header)?;
    out.write_all(&(h.len() as u64).to_le_bytes())?;
    out.write_all(&h)?;
    let mut buf = Vec::with_capacity(16 * op.matrix.len());
    for r in 0..header.rows {
        for c in 0..header.cols {
            let z = op.matrix[(r, c)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_container(mut input: impl Read) -> Result<DenseOperator> {
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 20 {
        return Err(Error::Parse("container header too large".into()));
    }
    let mut h = vec![0u8; len];
    input.read_exact(&mut h)?;
    let header: ContainerHeader = serde_json::from_slice(&h)?;
    if header.dtype != "complex128" || header.basis != "leaf" {
        return Err(Error::Parse(format!("unsupported dtype/basis {}/{}", header.dtype, header.basis)));
    }
    let mut body = vec![0u8; 16 * header.rows * header.cols];
    input.read_exact(&mut body)?;
    let vals: Vec<C64> = body
        .chunks_exact(16)
        .map(|ch| {
            C64::new(
                f64::from_le_bytes(ch[..8].try_into().unwrap()),
                f64::from_le_bytes(ch[8..].try_into().unwrap()),
            )
        })
        .collect();
    DenseOperator::from_matrix(
        &header.grid,
        DMatrix::from_row_slice(header.rows, header.cols, &vals),
    )
}

/// CSV rows `row,col,re,im`.
pub fn operator_to_csv(op: &DenseOperator) -> String {
    let mut s = String::from("row,col,re,im\n");
    for r in 0..op.matrix.nrows() {
        for c in 0..op.matrix.ncols() {
            let z = op.matrix[(r, c)];
            s.push_str(&format!("{r},{c},{:e},{:e}\n", z.re, z.im));
        }
    }
    s
}

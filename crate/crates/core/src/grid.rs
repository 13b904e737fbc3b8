//! Truncated d-adic systems on a window, translated dyadic grids and the
//! one-third covering family.
//!
//! Cubes are half-open and lower-inclusive. A shifted grid lives on the window
//! viewed as a torus, so its cubes may wrap around the upper edge.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rat = Ratio<i64>;

/// Upper limit on leaf cells, keeps index arithmetic far from overflow.
const MAX_LEAVES: usize = 1 << 26;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSpec {
    n: usize,
    d: usize,
    levels: usize,
    origin: Vec<Rat>,
    side: Rat,
    sigma: Vec<Rat>,
    shift_cells: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cube {
    pub level: usize,
    pub q: Vec<usize>,
}

impl GridSpec {
    pub fn new(
        n: usize,
        d: usize,
        levels: usize,
        origin: Vec<Rat>,
        side: Rat,
        sigma: Vec<Rat>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if d < 2 {
            return Err(Error::InvalidGrid("branching must be at least 2".into()));
        }
        if n >= 2 && d != 2 {
            return Err(Error::InvalidGrid(
                "grids of dimension 2 or more are dyadic per coordinate".into(),
            ));
        }
        if levels == 0 {
            return Err(Error::InvalidGrid("leaf level must be at least 1".into()));
        }
        if origin.len() != n || sigma.len() != n {
            return Err(Error::InvalidGrid("origin and shift need n coordinates".into()));
        }
        if side <= Rat::zero() {
            return Err(Error::InvalidGrid("window side must be positive".into()));
        }
        let children = if n == 1 { d } else { 1usize << n };
        let mut leaves: usize = 1;
        for _ in 0..levels {
            leaves = leaves.saturating_mul(children);
            if leaves > MAX_LEAVES {
                return Err(Error::InvalidGrid(format!("more than {MAX_LEAVES} leaf cells")));
            }
        }
        let radix = if n == 1 { d } else { 2 };
        let axis = (radix as i64).pow(levels as u32);
        let leaf_side = side / Rat::from_integer(axis);
        let mut shift_cells = Vec::with_capacity(n);
        for s in &sigma {
            let cells = s / leaf_side;
            if !cells.is_integer() || cells < Rat::zero() || *s >= side {
                return Err(Error::InvalidGrid(format!(
                    "shift {s} is not a leaf multiple inside [0, {side})"
                )));
            }
            shift_cells.push(cells.to_integer() as usize);
        }
        Ok(Self { n, d, levels, origin, side, sigma, shift_cells })
    }

    /// The unshifted d-adic system on [0,1).
    pub fn interval(d: usize, levels: usize) -> Result<Self> {
        Self::new(1, d, levels, vec![Rat::zero()], Rat::from_integer(1), vec![Rat::zero()])
    }

    /// The unshifted dyadic system on [0,1)^n.
    pub fn unit_cube(n: usize, levels: usize) -> Result<Self> {
        Self::new(
            n,
            2,
            levels,
            vec![Rat::zero(); n],
            Rat::from_integer(1),
            vec![Rat::zero(); n],
        )
    }

    pub fn with_window(&self, origin: Vec<Rat>, side: Rat) -> Result<Self> {
        Self::new(self.n, self.d, self.levels, origin, side, vec![Rat::zero(); self.n])
    }

    /// Same window and shift at another leaf level.
    pub fn with_levels(&self, levels: usize) -> Result<Self> {
        Self::new(self.n, self.d, levels, self.origin.clone(), self.side, self.sigma.clone())
    }

    pub fn shifted(&self, sigma: Vec<Rat>) -> Result<Self> {
        Self::new(self.n, self.d, self.levels, self.origin.clone(), self.side, sigma)
    }

    /// Same window and leaf level with the shift removed.
    pub fn unshifted(&self) -> Self {
        let mut g = self.clone();
        g.sigma = vec![Rat::zero(); self.n];
        g.shift_cells = vec![0; self.n];
        g
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn branching(&self) -> usize {
        self.d
    }
    pub fn levels(&self) -> usize {
        self.levels
    }
    pub fn origin(&self) -> &[Rat] {
        &self.origin
    }
    pub fn side(&self) -> Rat {
        self.side
    }
    pub fn sigma(&self) -> &[Rat] {
        &self.sigma
    }
    pub fn shift_cells(&self) -> &[usize] {
        &self.shift_cells
    }
    pub fn is_shifted(&self) -> bool {
        self.shift_cells.iter().any(|&s| s != 0)
    }

    /// Split factor per axis per level.
    pub fn radix(&self) -> usize {
        if self.n == 1 {
            self.d
        } else {
            2
        }
    }

    pub fn children_per_cube(&self) -> usize {
        if self.n == 1 {
            self.d
        } else {
            1 << self.n
        }
    }

    pub fn axis_cells(&self, k: usize) -> usize {
        self.radix().pow(k as u32)
    }

    pub fn cube_count(&self, k: usize) -> usize {
        self.children_per_cube().pow(k as u32)
    }

    pub fn leaf_count(&self) -> usize {
        self.cube_count(self.levels)
    }

    pub fn leaf_side(&self) -> Rat {
        self.side / Rat::from_integer(self.axis_cells(self.levels) as i64)
    }

    pub fn side_f64(&self) -> f64 {
        rat_f64(self.side)
    }

    pub fn cube_side(&self, k: usize) -> f64 {
        self.side_f64() / self.axis_cells(k) as f64
    }

    pub fn cube_measure(&self, k: usize) -> f64 {
        self.cube_side(k).powi(self.n as i32)
    }

    pub fn leaf_measure(&self) -> f64 {
        self.cube_measure(self.levels)
    }

    pub fn window_measure(&self) -> f64 {
        self.side_f64().powi(self.n as i32)
    }

    /// Leaf cells per cube of level k.
    pub fn cells_in_cube(&self, k: usize) -> usize {
        self.cube_count(self.levels - k)
    }

    /// Row-major axis coordinates of a window leaf index.
    pub fn window_coords(&self, index: usize) -> Vec<usize> {
        let m = self.axis_cells(self.levels);
        let mut coords = vec![0; self.n];
        let mut rest = index;
        for i in (0..self.n).rev() {
            coords[i] = rest % m;
            rest /= m;
        }
        coords
    }

    pub fn window_index(&self, coords: &[usize]) -> usize {
        let m = self.axis_cells(self.levels);
        coords.iter().fold(0, |acc, &c| acc * m + c)
    }

    /// Center of a window leaf cell.
    pub fn leaf_center(&self, index: usize) -> Vec<f64> {
        let ls = rat_f64(self.leaf_side());
        self.window_coords(index)
            .iter()
            .zip(&self.origin)
            .map(|(&c, o)| rat_f64(*o) + (c as f64 + 0.5) * ls)
            .collect()
    }

    /// Tree index of a cube: the base-C digits of its ancestry, root first.
    pub fn tree_index(&self, cube: &Cube) -> usize {
        if self.n == 1 {
            return cube.q[0];
        }
        let mut t = 0;
        for b in (0..cube.level).rev() {
            let mut digit = 0;
            for (i, q) in cube.q.iter().enumerate() {
                digit |= ((q >> b) & 1) << (self.n - 1 - i);
            }
            t = (t << self.n) | digit;
        }
        t
    }

    pub fn cube_from_tree(&self, level: usize, t: usize) -> Cube {
        if self.n == 1 {
            return Cube { level, q: vec![t] };
        }
        let mut q = vec![0usize; self.n];
        for s in 0..level {
            let digit = (t >> (self.n * (level - 1 - s))) & ((1 << self.n) - 1);
            for (i, qi) in q.iter_mut().enumerate() {
                *qi = (*qi << 1) | ((digit >> (self.n - 1 - i)) & 1);
            }
        }
        Cube { level, q }
    }

    /// Window leaf index of every leaf, listed in tree order of this grid.
    pub fn tree_to_window(&self) -> Vec<usize> {
        let m = self.axis_cells(self.levels);
        (0..self.leaf_count())
            .map(|t| {
                let c = self.cube_from_tree(self.levels, t);
                let coords: Vec<usize> = c
                    .q
                    .iter()
                    .zip(&self.shift_cells)
                    .map(|(&q, &s)| (q + s) % m)
                    .collect();
                self.window_index(&coords)
            })
            .collect()
    }

    pub fn root(&self) -> Cube {
        Cube { level: 0, q: vec![0; self.n] }
    }

    pub fn cubes(&self, k: usize) -> impl Iterator<Item = Cube> + '_ {
        (0..self.cube_count(k)).map(move |t| self.cube_from_tree(k, t))
    }

    pub fn check_cube(&self, c: &Cube) -> Result<()> {
        if c.level > self.levels || c.q.len() != self.n {
            return Err(Error::InvalidArgument(format!("cube {c:?} not in grid")));
        }
        let m = self.axis_cells(c.level);
        if c.q.iter().any(|&q| q >= m) {
            return Err(Error::InvalidArgument(format!("cube {c:?} index out of range")));
        }
        Ok(())
    }

    pub fn children(&self, c: &Cube) -> Result<Vec<Cube>> {
        self.check_cube(c)?;
        if c.level >= self.levels {
            return Err(Error::LevelOverflow(c.level));
        }
        let r = self.radix();
        Ok((0..self.children_per_cube())
            .map(|j| {
                let q = if self.n == 1 {
                    vec![c.q[0] * r + j]
                } else {
                    c.q.iter()
                        .enumerate()
                        .map(|(i, &qi)| 2 * qi + ((j >> (self.n - 1 - i)) & 1))
                        .collect()
                };
                Cube { level: c.level + 1, q }
            })
            .collect())
    }

    pub fn parent(&self, c: &Cube) -> Option<Cube> {
        if c.level == 0 {
            return None;
        }
        let r = self.radix();
        Some(Cube { level: c.level - 1, q: c.q.iter().map(|&q| q / r).collect() })
    }

    /// Window leaf coordinates of a point.
    pub fn leaf_of_point(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!("point has {} coordinates", x.len())));
        }
        let m = self.axis_cells(self.levels);
        let side = self.side_f64();
        x.iter()
            .zip(&self.origin)
            .map(|(&xi, o)| {
                let rel = xi - rat_f64(*o);
                if !(0.0..side).contains(&rel) {
                    return Err(Error::PointOutsideWindow);
                }
                let cell = (rel / side * m as f64).floor() as usize;
                Ok(cell.min(m - 1))
            })
            .collect()
    }

    pub fn cube_at(&self, x: &[f64], k: usize) -> Result<Cube> {
        if k > self.levels {
            return Err(Error::InvalidArgument(format!("level {k} above leaf level")));
        }
        let m = self.axis_cells(self.levels);
        let block = self.axis_cells(self.levels - k);
        let q = self
            .leaf_of_point(x)?
            .iter()
            .zip(&self.shift_cells)
            .map(|(&w, &s)| ((w + m - s) % m) / block)
            .collect();
        Ok(Cube { level: k, q })
    }

    /// Window leaf indices covered by a cube, in tree order.
    pub fn cube_leaves(&self, c: &Cube) -> Vec<usize> {
        let per = self.cells_in_cube(c.level);
        let start = self.tree_index(c) * per;
        let map = self.tree_to_window();
        map[start..start + per].to_vec()
    }

    /// Per coordinate, the one or two half-open pieces of a (possibly wrapped) cube.
    pub fn cube_extent(&self, c: &Cube) -> Vec<Vec<(f64, f64)>> {
        let m = self.axis_cells(self.levels);
        let len = self.axis_cells(self.levels - c.level);
        let ls = rat_f64(self.leaf_side());
        c.q.iter()
            .zip(&self.shift_cells)
            .zip(&self.origin)
            .map(|((&q, &s), o)| {
                let o = rat_f64(*o);
                let start = (q * len + s) % m;
                if start + len <= m {
                    vec![(o + start as f64 * ls, o + (start + len) as f64 * ls)]
                } else {
                    vec![
                        (o + start as f64 * ls, o + m as f64 * ls),
                        (o, o + (start + len - m) as f64 * ls),
                    ]
                }
            })
            .collect()
    }
}

pub fn rat_f64(r: Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn format_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rat(s: &str) -> Result<Rat> {
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Rat::new(p, q))
        }
        None => Ok(Rat::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridJson {
    n: usize,
    d: usize,
    #[serde(rename = "L")]
    levels: usize,
    origin: Vec<String>,
    side: String,
    sigma: Vec<String>,
}

impl Serialize for GridSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GridJson {
            n: self.n,
            d: self.d,
            levels: self.levels,
            origin: self.origin.iter().map(format_rat).collect(),
            side: format_rat(&self.side),
            sigma: self.sigma.iter().map(format_rat).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GridSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = GridJson::deserialize(d)?;
        let parse_all = |v: &[String]| v.iter().map(|s| parse_rat(s)).collect::<Result<Vec<_>>>();
        let origin = parse_all(&j.origin).map_err(D::Error::custom)?;
        let sigma = parse_all(&j.sigma).map_err(D::Error::custom)?;
        let side = parse_rat(&j.side).map_err(D::Error::custom)?;
        GridSpec::new(j.n, j.d, j.levels, origin, side, sigma).map_err(D::Error::custom)
    }
}

/// Grids sharing window and leaf level, differing only in their shifts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridFamily {
    pub members: Vec<GridSpec>,
    #[serde(serialize_with = "ser_rat", deserialize_with = "de_rat")]
    pub covering_constant: Rat,
}

fn ser_rat<S: Serializer>(r: &Rat, s: S) -> std::result::Result<S::Ok, S::Error> {
    format_rat(r).serialize(s)
}

fn de_rat<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rat, D::Error> {
    use serde::de::Error as _;
    let s = String::deserialize(d)?;
    parse_rat(&s).map_err(D::Error::custom)
}

pub const DEFAULT_COVERING_CONSTANT: i64 = 7;

/// The 3^n one-third-shift family on [0,1)^n at leaf level L.
pub fn adjacent_family(n: usize, levels: usize) -> Result<GridFamily> {
    adjacent_family_on(&GridSpec::unit_cube(n, levels)?)
}

/// One-third-shift family over the window of a dyadic base grid.
pub fn adjacent_family_on(base: &GridSpec) -> Result<GridFamily> {
    if base.branching() != 2 {
        return Err(Error::InvalidGrid("covering family needs a dyadic grid".into()));
    }
    if base.levels() < 2 {
        return Err(Error::InvalidGrid("covering family needs L >= 2".into()));
    }
    let n = base.dim();
    let m = base.axis_cells(base.levels()) as i64;
    let step = (m as f64 / 3.0).round() as i64;
    let leaf = base.leaf_side();
    let mut members = Vec::with_capacity(3usize.pow(n as u32));
    for code in 0..3usize.pow(n as u32) {
        let mut rest = code;
        let mut sigma = vec![Rat::zero(); n];
        for s in sigma.iter_mut().rev() {
            *s = leaf * Rat::from_integer(step * (rest % 3) as i64);
            rest /= 3;
        }
        members.push(base.unshifted().shifted(sigma)?);
    }
    Ok(GridFamily {
        members,
        covering_constant: Rat::from_integer(DEFAULT_COVERING_CONSTANT),
    })
}

/// Axis-aligned cube [lower, lower + side)^n.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisCube {
    pub lower: Vec<f64>,
    pub side: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    pub member: usize,
    pub cube: Cube,
    pub ratio: f64,
}

fn extent_contains(extent: &[Vec<(f64, f64)>], b: &AxisCube) -> bool {
    extent.iter().zip(&b.lower).all(|(pieces, &lo)| {
        pieces.iter().any(|&(a, e)| a <= lo && lo + b.side <= e)
    })
}

pub fn cover(fam: &GridFamily, b: &AxisCube) -> Result<Cover> {
    let first = fam
        .members
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty family".into()))?;
    if b.lower.len() != first.dim() || !(b.side > 0.0) {
        return Err(Error::InvalidArgument("malformed cube".into()));
    }
    let c = rat_f64(fam.covering_constant);
    let side = first.side_f64();
    // finest level whose cubes are at least as long as B
    let mut k0 = (side / b.side).log2().floor().max(0.0) as usize;
    k0 = k0.min(first.levels());
    while k0 > 0 && first.cube_side(k0) < b.side {
        k0 -= 1;
    }
    for k in (0..=k0).rev() {
        if first.cube_side(k) > c * b.side * (1.0 + 1e-12) {
            break;
        }
        for (member, g) in fam.members.iter().enumerate() {
            let q = g.cube_at(&b.lower, k)?;
            if extent_contains(&g.cube_extent(&q), b) {
                return Ok(Cover { member, cube: q, ratio: g.cube_side(k) / b.side });
            }
        }
    }
    Err(Error::NoCoverFound(b.side))
}

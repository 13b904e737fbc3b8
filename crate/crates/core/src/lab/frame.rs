//! Test vectors for the lower bound on commutators with a non-degenerate
//! kernel: a distant partner cube, a median of the symbol there, and the
//! quadrant sets it induces.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Cube;
use crate::haar::{SampledFunction, C64};
use crate::kernels::{ball_pair, BallPairDiagnostics, KernelSpec};
use crate::median::{complex_median, quadrant_membership, WeightedPointSet};

/// e = |I(q)|^{1/2} 1_{F_s}/|I| and f = 1_{I(q) ∩ E_s}/|I(q)|^{1/2}.
#[derive(Clone, Debug)]
pub struct TestPair {
    /// Quadrant 0..4.
    pub s: usize,
    /// Child of I.
    pub child: Cube,
    pub e: SampledFunction,
    pub f: SampledFunction,
}

#[derive(Clone, Debug, Serialize)]
pub struct NecessityFrame {
    pub cube: Cube,
    pub partner: Cube,
    pub partner_point: Vec<f64>,
    pub diagnostics: BallPairDiagnostics,
    /// Median center α of b on the partner.
    pub center: [f64; 2],
    /// Angle of the median's first line.
    pub line_angle: f64,
    /// Rotation θ = 3π/4 − line angle, so that the sets below are sectors
    /// of e^{iθ}(b − α).
    pub rotation: f64,
    /// F_s: partner leaves where b − α lies in the closed quadrant s.
    pub f_sets: Vec<Vec<usize>>,
    /// E_s: leaves of I where b − α lies in the opposite quadrant s + 2.
    pub e_sets: Vec<Vec<usize>>,
    /// |F_s|/|partner|.
    pub f_fractions: [f64; 4],
    /// Every leaf of I lies in some E_s.
    pub e_cover: bool,
    #[serde(skip)]
    pub pairs: Vec<TestPair>,
}

impl NecessityFrame {
    pub fn min_fraction(&self) -> f64 {
        self.f_fractions.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Builds the frame of `cube` for symbol `b` and kernel `k` at separation `a`.
/// The partner ball is centered at the cube's center with radius its side.
pub fn necessity_frame(b: &SampledFunction, cube: &Cube, k: &KernelSpec, a: f64) -> Result<NecessityFrame> {
    let g = b.grid();
    g.check_cube(cube)?;
    if cube.level >= g.levels() {
        return Err(Error::LevelOverflow(cube.level));
    }
    let leaves = g.cube_leaves(cube);
    let side = g.cube_side(cube.level);
    let center: Vec<f64> = g
        .cube_extent(cube)
        .iter()
        .map(|pieces| pieces[0].0 + 0.5 * side)
        .collect();
    let (y0, diagnostics) = ball_pair(k, &center, side, a)?;
    let partner = g.cube_at(&y0, cube.level).map_err(|_| Error::PairNotFound)?;
    let atoms = WeightedPointSet::from_function(b, &partner)?;
    let pair = complex_median(&atoms)?;
    let partner_leaves = g.cube_leaves(&partner);

    let f_member = quadrant_membership(&pair, atoms.points());
    let mut f_sets = vec![Vec::new(); 4];
    for (leaf, m) in partner_leaves.iter().zip(&f_member) {
        for s in 0..4 {
            if m[s] {
                f_sets[s].push(*leaf);
            }
        }
    }
    let vals = b.values();
    let own: Vec<[f64; 2]> = leaves.iter().map(|&i| [vals[i].re, vals[i].im]).collect();
    let e_member = quadrant_membership(&pair, &own);
    let mut e_sets = vec![Vec::new(); 4];
    let mut e_cover = true;
    for (leaf, m) in leaves.iter().zip(&e_member) {
        e_cover &= m.iter().any(|x| *x);
        for s in 0..4 {
            if m[(s + 2) % 4] {
                e_sets[s].push(*leaf);
            }
        }
    }
    let f_fractions = [0, 1, 2, 3].map(|s| f_sets[s].len() as f64 / partner_leaves.len() as f64);

    let measure = g.cube_measure(cube.level);
    let child_measure = g.cube_measure(cube.level + 1);
    let mut in_e = vec![vec![false; g.leaf_count()]; 4];
    for s in 0..4 {
        for &i in &e_sets[s] {
            in_e[s][i] = true;
        }
    }
    let mut pairs = Vec::new();
    for child in g.children(cube)? {
        let inside = g.cube_leaves(&child);
        for s in 0..4 {
            let mut e = SampledFunction::zeros(g);
            for &i in &f_sets[s] {
                e.values_mut()[i] = C64::new(child_measure.sqrt() / measure, 0.0);
            }
            let mut f = SampledFunction::zeros(g);
            for &i in &inside {
                if in_e[s][i] {
                    f.values_mut()[i] = C64::new(1.0 / child_measure.sqrt(), 0.0);
                }
            }
            pairs.push(TestPair { s, child: child.clone(), e, f });
        }
    }
    let rotation = (0.75 * PI - pair.theta).rem_euclid(2.0 * PI);
    Ok(NecessityFrame {
        cube: cube.clone(),
        partner,
        partner_point: y0,
        diagnostics,
        center: pair.center,
        line_angle: pair.theta,
        rotation,
        f_sets,
        e_sets,
        f_fractions,
        e_cover,
        pairs,
    })
}

/// Sector index of e^{iθ}z: s covers arguments [−π/4 + sπ/2, π/4 + sπ/2].
#[cfg(test)]
fn sector(z: C64, rotation: f64) -> usize {
    let a = (z.arg() + rotation + PI / 4.0).rem_euclid(2.0 * PI);
    ((a / (PI / 2.0)) as usize).min(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::haar::C64;
    use crate::lab::{random_symbol, trial_rng};

    fn setup(levels: usize) -> GridSpec {
        let g = GridSpec::interval(2, levels + 6).unwrap();
        g.with_window(vec![0.into()], 64.into()).unwrap()
    }

    #[test]
    fn constant_symbol_gives_full_sets() {
        let g = setup(3);
        let b = SampledFunction::constant(&g, C64::new(2.0, -1.0));
        let cube = g.cube_at(&[1.0], 6).unwrap();
        let fr = necessity_frame(&b, &cube, &KernelSpec::hilbert(), 32.0).unwrap();
        assert_eq!(fr.center, [2.0, -1.0]);
        let n_partner = g.cube_leaves(&fr.partner).len();
        let n_own = g.cube_leaves(&cube).len();
        for s in 0..4 {
            assert_eq!(fr.f_sets[s].len(), n_partner);
            assert_eq!(fr.e_sets[s].len(), n_own);
        }
        assert!(fr.e_cover);
    }

    #[test]
    fn sets_match_rotated_sectors() {
        let g = setup(4);
        let b = random_symbol(&g, 0.5, &mut trial_rng(3, 0));
        let cube = g.cube_at(&[3.0], 7).unwrap();
        let fr = necessity_frame(&b, &cube, &KernelSpec::hilbert(), 32.0).unwrap();
        let d = fr.diagnostics.distance;
        assert!(d >= 32.0 * 0.5 - 1e-9 && d <= 64.0 * 0.5 + 1e-9);
        for s in 0..4 {
            assert!(16 * fr.f_sets[s].len() >= g.cube_leaves(&fr.partner).len());
        }
        assert!(fr.e_cover);
        let alpha = C64::new(fr.center[0], fr.center[1]);
        let vals = b.values();
        // interior points: F_s is sector s of e^{iθ}(α − b), E_s sector s of e^{iθ}(b − α)
        for s in 0..4 {
            for &i in &fr.f_sets[s] {
                let z = alpha - vals[i];
                if z.norm() > 1e-9 {
                    let k = sector(z, fr.rotation);
                    assert!(k == s || near_edge(z, fr.rotation), "F sector {k} vs {s}");
                }
            }
            for &i in &fr.e_sets[s] {
                let z = vals[i] - alpha;
                if z.norm() > 1e-9 {
                    let k = sector(z, fr.rotation);
                    assert!(k == s || near_edge(z, fr.rotation), "E sector {k} vs {s}");
                }
            }
        }
        // test vectors have the advertised norms
        let p = &fr.pairs[0];
        let h = g.leaf_measure();
        let ne: f64 = p.e.values().iter().map(|v| v.norm_sqr() * h).sum();
        let want = fr.f_sets[p.s].len() as f64 * h * g.cube_measure(8) / g.cube_measure(7).powi(2);
        assert!((ne - want).abs() <= 1e-12 * want.max(1.0));
    }

    fn near_edge(z: C64, rotation: f64) -> bool {
        let a = (z.arg() + rotation + PI / 4.0).rem_euclid(PI / 2.0);
        a < 1e-9 || PI / 2.0 - a < 1e-9
    }
}

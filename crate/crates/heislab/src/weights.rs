//! Muckenhoupt and reverse Hölder characteristics over dyadic cube
//! collections, and the weighted bound for sparse forms.

use crate::dyadic::{CubeRef, DyadicSystems};
use crate::error::{domain, HeisError, Result};
use crate::means::{Grid, Interp, SampledField};
use crate::sparse::{sparse_form, SparseFamily};
use rayon::prelude::*;
use serde::Serialize;

/// A strictly positive weight sampled on a grid.
#[derive(Clone, Debug)]
pub struct WeightField {
    pub w: SampledField,
}

impl WeightField {
    pub fn new(w: SampledField) -> Result<Self> {
        if let Some(v) = w.values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return domain(format!("weights must be positive and finite, found {v}"));
        }
        Ok(WeightField { w })
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        WeightField::new(SampledField::new(grid.clone(), values, Interp::Nearest)?)
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        WeightField::from_values(grid, vec![c; grid.len()])
    }

    /// Two values alternating on boxes of side `side_z` in the first
    /// coordinate and `side_t` in `t`.
    pub fn checkerboard(grid: &Grid, a: f64, b: f64, side_z: f64, side_t: f64) -> Result<Self> {
        let v = (0..grid.len())
            .map(|c| {
                let x = grid.center(c);
                let k = (x.z[0] / side_z).floor() as i64 + (x.t / side_t).floor() as i64;
                if k.rem_euclid(2) == 0 {
                    a
                } else {
                    b
                }
            })
            .collect();
        WeightField::from_values(grid, v)
    }

    /// `min(|x|^a, cap)` with the Koranyi norm.
    pub fn koranyi_power(grid: &Grid, a: f64, cap: f64) -> Result<Self> {
        let v = (0..grid.len()).map(|c| grid.center(c).norm().powf(a).min(cap)).collect();
        WeightField::from_values(grid, v)
    }

    /// `floor + 1_A` for the cells where `inside` holds.
    pub fn indicator_plus_floor(grid: &Grid, floor: f64, inside: impl Fn(&crate::HeisPoint) -> bool) -> Result<Self> {
        let v = (0..grid.len()).map(|c| floor + if inside(&grid.center(c)) { 1.0 } else { 0.0 }).collect();
        WeightField::from_values(grid, v)
    }

    pub fn values(&self) -> &[f64] {
        &self.w.values
    }

    /// `sigma = w^{1 - p'}`.
    pub fn sigma(&self, p: f64) -> Result<Vec<f64>> {
        if !(p > 1.0) {
            return domain("need p > 1");
        }
        let e = 1.0 - conjugate(p);
        Ok(self.w.values.iter().map(|w| w.powf(e)).collect())
    }
}

pub fn conjugate(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

// Both characteristics are invariant under w -> cw; dividing by the largest
// value on the cube keeps constants exactly at 1.
fn ap_on(w: &[f64], cells: &[u32], p: f64) -> f64 {
    let m = cells.iter().map(|&c| w[c as usize]).fold(0.0, f64::max);
    let e = 1.0 - conjugate(p);
    let n = cells.len() as f64;
    let aw = cells.iter().map(|&c| w[c as usize] / m).sum::<f64>() / n;
    let asg = cells.iter().map(|&c| (w[c as usize] / m).powf(e)).sum::<f64>() / n;
    aw * asg.powf(p - 1.0)
}

fn rh_on(w: &[f64], cells: &[u32], p: f64) -> f64 {
    let m = cells.iter().map(|&c| w[c as usize]).fold(0.0, f64::max);
    let n = cells.len() as f64;
    let a1 = cells.iter().map(|&c| w[c as usize] / m).sum::<f64>() / n;
    let ap = (cells.iter().map(|&c| (w[c as usize] / m).powf(p)).sum::<f64>() / n).powf(1.0 / p);
    ap / a1
}

/// `sup_Q <w>_Q <sigma>_Q^{p-1}` over the given cubes.
pub fn ap_char(w: &WeightField, p: f64, cubes: &[CubeRef], systems: &DyadicSystems) -> Result<f64> {
    if !(p > 1.0) {
        return domain("A_p needs p > 1");
    }
    check_grid(w, systems)?;
    Ok(cubes.par_iter().map(|&q| ap_on(&w.w.values, &systems.cube(q).cells, p)).reduce(|| 0.0, f64::max))
}

/// `sup_Q <w>_{Q,p} / <w>_Q` over the given cubes.
pub fn rh_char(w: &WeightField, p: f64, cubes: &[CubeRef], systems: &DyadicSystems) -> Result<f64> {
    if !(p >= 1.0) {
        return domain("RH_p needs p >= 1");
    }
    check_grid(w, systems)?;
    if p == 1.0 {
        return Ok(1.0);
    }
    Ok(cubes.par_iter().map(|&q| rh_on(&w.w.values, &systems.cube(q).cells, p)).reduce(|| 0.0, f64::max))
}

fn check_grid(w: &WeightField, systems: &DyadicSystems) -> Result<()> {
    if w.w.grid != systems.grid {
        return domain("weight and dyadic systems live on different grids");
    }
    Ok(())
}

/// `max{1/(p-1), (q0'-1)/(q0'-p)}`; the second term tends to 1 as
/// `q0' -> inf`.
pub fn bfp_alpha(p: f64, q0: f64) -> f64 {
    let qc = conjugate(q0);
    let second = if qc.is_infinite() { 1.0 } else { (qc - 1.0) / (qc - p) };
    (1.0 / (p - 1.0)).max(second)
}

#[derive(Clone, Debug, Serialize)]
pub struct BfpReport {
    pub p: f64,
    pub p0: f64,
    pub q0: f64,
    pub ap_char: f64,
    pub rh_char: f64,
    pub alpha: f64,
    /// Largest number of family cubes over one cell.
    pub overlap: usize,
    pub lhs: f64,
    /// `overlap * {[w]_A [w]_RH}^alpha ||f||_{L^p(w)} ||g||_{L^{p'}(sigma)}`.
    pub rhs: f64,
    pub slack: f64,
}

/// Largest number of family cubes containing a single cell.
pub fn overlap_depth(fam: &SparseFamily, systems: &DyadicSystems) -> usize {
    let mut cnt = vec![0usize; systems.grid.len()];
    for &s in &fam.cubes {
        for &c in &systems.cube(s).cells {
            cnt[c as usize] += 1;
        }
    }
    cnt.into_iter().max().unwrap_or(0)
}

/// Both sides of the weighted sparse bound. The unknown absolute constant
/// is replaced by the overlap depth of the family, which makes the bound a
/// theorem for `w = 1` (Hölder on each cube, then on the sum).
#[allow(clippy::too_many_arguments)]
pub fn bfp_check(
    fam: &SparseFamily,
    f: &[f64],
    g: &[f64],
    w: &WeightField,
    p: f64,
    p0: f64,
    q0: f64,
    systems: &DyadicSystems,
) -> Result<BfpReport> {
    let qc = conjugate(q0);
    if !(p0 >= 1.0 && q0 >= 1.0 && p0 < qc && p0 < p && p < qc) {
        return Err(HeisError::Domain(format!("need 1 <= p0 < p < q0' with p0={p0}, p={p}, q0={q0}")));
    }
    check_grid(w, systems)?;
    let cubes: Vec<CubeRef> = systems.all_cubes();
    let a = ap_char(w, p / p0, &cubes, systems)?;
    let rh_index = if qc.is_infinite() { 1.0 } else { conjugate(qc / p) };
    let r = rh_char(w, rh_index, &cubes, systems)?;
    let alpha = bfp_alpha(p, q0);
    let lhs = sparse_form(fam, f, g, p0, q0, systems)?;
    let vol = systems.grid.cell_volume();
    let sigma = w.sigma(p)?;
    let pc = conjugate(p);
    let fw = (f.iter().zip(w.values()).map(|(f, w)| f.abs().powf(p) * w).sum::<f64>() * vol).powf(1.0 / p);
    let gs = (g.iter().zip(&sigma).map(|(g, s)| g.abs().powf(pc) * s).sum::<f64>() * vol).powf(1.0 / pc);
    let overlap = overlap_depth(fam, systems);
    let rhs = overlap as f64 * (a * r).powf(alpha) * fw * gs;
    Ok(BfpReport { p, p0, q0, ap_char: a, rh_char: r, alpha, overlap, lhs, rhs, slack: if lhs > 0.0 { rhs / lhs } else { f64::INFINITY } })
}

/// `1/phi(1/p0)`: `1 - 1/(n p0)` up to `1/p0 = n/(n+1)`, `n(1 - 1/p0)`
/// beyond.
pub fn phi_exponent(p0_inv: f64, n: usize) -> Result<f64> {
    if !(p0_inv > 0.0 && p0_inv < 1.0) {
        return domain("1/p0 must lie in (0,1)");
    }
    let nf = n as f64;
    Ok(if p0_inv <= nf / (nf + 1.0) { 1.0 - p0_inv / nf } else { nf * (1.0 - p0_inv) })
}

/// Weight classes `(p/p0, (phi'/p)')` for the weighted lacunary bound, with
/// the admissible upper end `phi'` for `p`.
pub fn weighted_classes(p0: f64, p: f64, n: usize) -> Result<(f64, f64, f64)> {
    let inv_phi = phi_exponent(1.0 / p0, n)?;
    let phi_c = conjugate(1.0 / inv_phi);
    if !(p0 > 1.0 && p > p0 && p < phi_c) {
        return domain(format!("need 1 < p0 < p < {phi_c}"));
    }
    Ok((p / p0, conjugate(phi_c / p), phi_c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{build_systems_relaxed, BuildSpec};
    use crate::sparse::build_sparse_family;
    use crate::BoxRegion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn systems() -> &'static DyadicSystems {
        static S: OnceLock<DyadicSystems> = OnceLock::new();
        S.get_or_init(|| {
            let grid = Grid::uniform(BoxRegion::uniform(1, 0.5, 0.25).unwrap(), 16, 32).unwrap();
            build_systems_relaxed(&grid, &BuildSpec { delta: 0.25, k_min: -1, k_max: 1, systems: 2, seed: 11, candidates: None }).unwrap()
        })
    }

    #[test]
    fn constants_are_exactly_one() {
        let s = systems();
        let cubes = s.all_cubes();
        for c in [1.0, 7.0, 0.013] {
            let w = WeightField::constant(&s.grid, c).unwrap();
            for p in [1.5, 2.0, 3.7] {
                assert_eq!(ap_char(&w, p, &cubes, s).unwrap(), 1.0);
                assert_eq!(rh_char(&w, p, &cubes, s).unwrap(), 1.0);
            }
        }
        assert!(WeightField::constant(&s.grid, 0.0).is_err());
        assert!(ap_char(&WeightField::constant(&s.grid, 1.0).unwrap(), 1.0, &cubes, s).is_err());
    }

    #[test]
    fn checkerboard_against_brute_force() {
        let s = systems();
        let cubes = s.all_cubes();
        let w = WeightField::checkerboard(&s.grid, 1.0, 9.0, 0.25, 0.125).unwrap();
        let p = 2.0;
        // direct formula, no rescaling
        let brute = cubes
            .iter()
            .map(|&q| {
                let cells = &s.cube(q).cells;
                let n = cells.len() as f64;
                let a = cells.iter().map(|&c| w.values()[c as usize]).sum::<f64>() / n;
                let sg = cells.iter().map(|&c| 1.0 / w.values()[c as usize]).sum::<f64>() / n;
                a * sg
            })
            .fold(0.0, f64::max);
        let got = ap_char(&w, p, &cubes, s).unwrap();
        assert!((got - brute).abs() < 1e-12 * brute);
        assert!(got > 1.0 && got <= 25.0 / 9.0 + 1e-12);
        let scaled = WeightField::from_values(&s.grid, w.values().iter().map(|v| 3.5 * v).collect()).unwrap();
        assert!((ap_char(&scaled, p, &cubes, s).unwrap() - got).abs() < 1e-12 * got);
    }

    #[test]
    fn reverse_holder_against_brute_force() {
        let s = systems();
        let cubes = s.all_cubes();
        let w = WeightField::indicator_plus_floor(&s.grid, 0.1, |x| x.z[0] > 0.2 && x.t < 0.0).unwrap();
        let brute = cubes
            .iter()
            .map(|&q| {
                let cells = &s.cube(q).cells;
                let n = cells.len() as f64;
                let a = cells.iter().map(|&c| w.values()[c as usize]).sum::<f64>() / n;
                let b = (cells.iter().map(|&c| w.values()[c as usize].powi(3)).sum::<f64>() / n).cbrt();
                b / a
            })
            .fold(0.0, f64::max);
        let got = rh_char(&w, 3.0, &cubes, s).unwrap();
        assert!((got - brute).abs() < 1e-12 * brute && got > 1.0);
        assert_eq!(rh_char(&w, 1.0, &cubes, s).unwrap(), 1.0);
        let k = WeightField::koranyi_power(&s.grid, -1.0, 10.0).unwrap();
        assert!(ap_char(&k, 2.5, &cubes, s).unwrap() >= 1.0);
        assert!(rh_char(&k, 2.5, &cubes, s).unwrap() >= 1.0);
    }

    #[test]
    fn alpha_values() {
        assert!((bfp_alpha(1.5, 1.0) - 2.0).abs() < 1e-15);
        assert!((bfp_alpha(3.0, 1.0) - 1.0).abs() < 1e-15);
        // q0 = 3/2: q0' = 3, (3-1)/(3-2) = 2 against 1/(p-1) = 1/1
        assert!((bfp_alpha(2.0, 1.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bfp_bound_holds() {
        let s = systems();
        let top = s.cubes_at(0, -1)[0];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f: Vec<f64> = (0..s.grid.len()).map(|c| if s.grid.center(c).z[0] > 0.1 { 5.0 * rng.gen::<f64>() } else { 0.1 }).collect();
        let g: Vec<f64> = (0..s.grid.len()).map(|_| rng.gen::<f64>()).collect();
        let fam = build_sparse_family(&f, &g, top, 1.2, 1.1, 10, s).unwrap();
        let one = WeightField::constant(&s.grid, 1.0).unwrap();
        let rep = bfp_check(&fam, &f, &g, &one, 2.0, 1.2, 1.1, s).unwrap();
        assert_eq!(rep.ap_char, 1.0);
        assert!(rep.slack >= 1.0, "{rep:?}");
        for w in [WeightField::checkerboard(&s.grid, 1.0, 4.0, 0.25, 0.125).unwrap(), WeightField::koranyi_power(&s.grid, 0.5, 10.0).unwrap()] {
            let rep = bfp_check(&fam, &f, &g, &w, 2.0, 1.2, 1.1, s).unwrap();
            assert!(rep.slack >= 1.0, "{rep:?}");
        }
        assert!(bfp_check(&fam, &f, &g, &one, 1.1, 1.2, 1.1, s).is_err());
    }

    #[test]
    fn phi_branches() {
        for n in 1..6 {
            let b = n as f64 / (n as f64 + 1.0);
            let left = 1.0 - b / n as f64;
            let right = n as f64 * (1.0 - b);
            assert!((left - right).abs() < 1e-12);
            assert!((phi_exponent(b, n).unwrap() - b).abs() < 1e-12);
            assert!((phi_exponent(1e-12, n).unwrap() - 1.0).abs() < 1e-11);
            assert!(phi_exponent(1.0 - 1e-12, n).unwrap() < 1e-10);
        }
        assert!(phi_exponent(0.0, 2).is_err());
        let (ap, rh, top) = weighted_classes(1.5, 2.0, 2).unwrap();
        assert!((ap - 4.0 / 3.0).abs() < 1e-15 && rh > 1.0 && top > 2.0);
    }
}

//! Spherical means by direct quadrature, sampled fields on box grids,
//! translations, dilations, discretized maximal operators and continuity
//! ratios.

use crate::dyadic::{CubeRef, DyadicSystems};
use crate::error::{domain, Result};
use crate::func::{HeisFunction, Translated};
use crate::heis::{dilate_unchecked, BoxRegion, Coords, HeisPoint};
use crate::quad::gauss_legendre;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Boundary values above this make a mean that leaves the box suspect.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Uniform cell-centred grid over a box. Cells are stored row-major with
/// the `t` axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub region: BoxRegion,
    pub counts: Vec<usize>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(region: BoxRegion, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != region.half_widths.len() {
            return domain("one cell count per coordinate required");
        }
        if counts.iter().any(|&c| c == 0) {
            return domain("cell counts must be positive");
        }
        let mut strides = vec![1usize; counts.len()];
        for a in (0..counts.len() - 1).rev() {
            strides[a] = strides[a + 1] * counts[a + 1];
        }
        Ok(Grid { region, counts, strides })
    }

    /// `cz` cells along each z coordinate and `ct` along t.
    pub fn uniform(region: BoxRegion, cz: usize, ct: usize) -> Result<Self> {
        let d = region.half_widths.len();
        let mut c = vec![cz; d - 1];
        c.push(ct);
        Grid::new(region, c)
    }

    /// Same box with every count multiplied by `m`.
    pub fn refined(&self, m: usize) -> Grid {
        Grid::new(self.region.clone(), self.counts.iter().map(|c| c * m).collect()).expect("valid grid")
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.region.half_widths[axis] / self.counts[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.counts.len()).map(|a| self.spacing(a)).product()
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut m = vec![0; self.counts.len()];
        for a in 0..self.counts.len() {
            m[a] = idx / self.strides[a];
            idx %= self.strides[a];
        }
        m
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn axis_center(&self, axis: usize, i: usize) -> f64 {
        -self.region.half_widths[axis] + (i as f64 + 0.5) * self.spacing(axis)
    }

    pub fn center(&self, idx: usize) -> HeisPoint {
        let d = self.counts.len();
        let mut z = Coords::with_capacity(d - 1);
        let mut rest = idx;
        let mut t = 0.0;
        for a in 0..d {
            let i = rest / self.strides[a];
            rest %= self.strides[a];
            let c = self.axis_center(a, i);
            if a + 1 < d {
                z.push(c);
            } else {
                t = c;
            }
        }
        HeisPoint { z, t }
    }

    pub fn centers(&self) -> Vec<HeisPoint> {
        (0..self.len()).into_par_iter().map(|i| self.center(i)).collect()
    }

    /// Cell containing `x`, if inside the box.
    pub fn cell_of(&self, x: &HeisPoint) -> Option<usize> {
        let d = self.counts.len();
        let mut idx = 0;
        for a in 0..d {
            let v = if a + 1 < d { x.z[a] } else { x.t };
            let u = (v + self.region.half_widths[a]) / self.spacing(a);
            if !(u >= 0.0) {
                return None;
            }
            let i = u.floor() as usize;
            if i >= self.counts[a] {
                return None;
            }
            idx += i * self.strides[a];
        }
        Some(idx)
    }

    /// Whether a cell lies in the outermost layer of the box.
    pub fn on_boundary(&self, idx: usize) -> bool {
        self.multi_index(idx).iter().zip(&self.counts).any(|(&i, &c)| i == 0 || i + 1 == c)
    }

    /// Sample a function at the cell centres.
    pub fn sample<F: HeisFunction + ?Sized>(&self, f: &F) -> Vec<f64> {
        (0..self.len()).into_par_iter().map(|i| f.eval(&self.center(i))).collect()
    }

    /// Midpoint-rule `(int |g|^p)^{1/p}` over the box.
    pub fn lp_norm<F: HeisFunction + ?Sized>(&self, f: &F, p: f64) -> f64 {
        let vol = self.cell_volume();
        let terms: Vec<f64> = (0..self.len()).into_par_iter().map(|i| f.eval(&self.center(i)).abs().powf(p)).collect();
        let s: f64 = terms.iter().sum();
        (s * vol).powf(1.0 / p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    Multilinear,
    /// Piecewise constant on cells.
    Nearest,
}

/// A function sampled at the cell centres of a grid, zero outside the box.
#[derive(Clone, Debug)]
pub struct SampledField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub interp: Interp,
}

impl SampledField {
    pub fn new(grid: Grid, values: Vec<f64>, interp: Interp) -> Result<Self> {
        if values.len() != grid.len() {
            return domain("value count does not match the grid");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("field values must be finite");
        }
        Ok(SampledField { grid, values, interp })
    }

    pub fn from_fn<F: HeisFunction + ?Sized>(grid: &Grid, f: &F, interp: Interp) -> Self {
        let values = grid.sample(f);
        SampledField { grid: grid.clone(), values, interp }
    }

    pub fn constant(grid: &Grid, c: f64, interp: Interp) -> Self {
        SampledField { grid: grid.clone(), values: vec![c; grid.len()], interp }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Midpoint-rule `L^p` norm of the samples.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let terms: Vec<f64> = self.values.par_iter().map(|v| v.abs().powf(p)).collect();
        let s: f64 = terms.iter().sum();
        (s * self.grid.cell_volume()).powf(1.0 / p)
    }

    fn interp_linear(&self, x: &HeisPoint) -> f64 {
        let g = &self.grid;
        let d = g.counts.len();
        let mut lo = [0i64; 8];
        let mut fr = [0.0f64; 8];
        for a in 0..d {
            let v = if a + 1 < d { x.z[a] } else { x.t };
            let h = g.region.half_widths[a];
            if !(v.abs() <= h) {
                return 0.0;
            }
            let u = (v + h) / g.spacing(a) - 0.5;
            let i0 = u.floor();
            lo[a] = i0 as i64;
            fr[a] = u - i0;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0usize;
            let mut inside = true;
            for a in 0..d {
                let up = (corner >> a) & 1 == 1;
                let i = lo[a] + up as i64;
                if i < 0 || i >= g.counts[a] as i64 {
                    inside = false;
                    break;
                }
                w *= if up { fr[a] } else { 1.0 - fr[a] };
                idx += i as usize * g.strides[a];
            }
            if inside && w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    /// Largest absolute value over the outermost layer of cells.
    pub fn boundary_max(&self) -> f64 {
        (0..self.values.len())
            .into_par_iter()
            .filter(|&i| self.grid.on_boundary(i))
            .map(|i| self.values[i].abs())
            .reduce(|| 0.0, f64::max)
    }
}

impl HeisFunction for SampledField {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn eval(&self, x: &HeisPoint) -> f64 {
        match self.interp {
            Interp::Multilinear => self.interp_linear(x),
            Interp::Nearest => self.grid.cell_of(x).map_or(0.0, |i| self.values[i]),
        }
    }

    fn boundary_mass(&self) -> f64 {
        self.boundary_max()
    }

    fn known_at(&self, x: &HeisPoint) -> bool {
        self.grid.region.contains(x)
    }
}

/// Quadrature rule on the unit sphere of C^n with positive weights summing
/// to one.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub n: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

impl SphereRule {
    /// `m` equally spaced points on the circle.
    pub fn circle(m: usize) -> Self {
        assert!(m >= 1);
        let nodes = (0..m)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / m as f64;
                vec![th.cos(), th.sin()]
            })
            .collect();
        SphereRule { n: 1, nodes, weights: vec![1.0 / m as f64; m], degree: m - 1 }
    }

    /// Product rule on S^3 in Hopf coordinates
    /// `(cos e^{i a}, sin e^{i b})` with `u = sin^2` Gauss-Legendre on [0,1]
    /// and `m_phase` uniform phases per angle. Even `m_phase` makes the rule
    /// invariant under `w -> -w`.
    pub fn s3(m_phase: usize, m_u: usize) -> Self {
        assert!(m_phase >= 1 && m_u >= 1);
        let gl = gauss_legendre(m_u).mapped(0.0, 1.0);
        let mut nodes = Vec::with_capacity(m_phase * m_phase * m_u);
        let mut weights = Vec::with_capacity(nodes.capacity());
        let wp = 1.0 / (m_phase * m_phase) as f64;
        for (&u, &wu) in gl.nodes.iter().zip(&gl.weights) {
            let (s, c) = (u.sqrt(), (1.0 - u).sqrt());
            for i in 0..m_phase {
                let a = 2.0 * PI * i as f64 / m_phase as f64;
                for j in 0..m_phase {
                    let b = 2.0 * PI * j as f64 / m_phase as f64;
                    nodes.push(vec![c * a.cos(), c * a.sin(), s * b.cos(), s * b.sin()]);
                    weights.push(wu * wp);
                }
            }
        }
        SphereRule { n: 2, nodes, weights, degree: (m_phase - 1).min(4 * m_u - 1) }
    }

    /// Default rule for dimension `n`.
    pub fn default_for(n: usize) -> Result<Self> {
        match n {
            1 => Ok(SphereRule::circle(128)),
            2 => Ok(SphereRule::s3(24, 12)),
            _ => domain("sphere rules are provided for n = 1, 2"),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Whether the node set is closed under `w -> -w` with matching weights.
    pub fn is_antipodal(&self) -> bool {
        self.nodes.iter().zip(&self.weights).all(|(v, w)| {
            self.nodes.iter().zip(&self.weights).any(|(u, wu)| {
                (wu - w).abs() <= 1e-15 && u.iter().zip(v).all(|(a, b)| (a + b).abs() < 1e-12)
            })
        })
    }
}

/// `x (r omega, 0)^{-1}`.
#[inline]
pub fn sphere_point(x: &HeisPoint, r: f64, omega: &[f64]) -> HeisPoint {
    let mut z = x.z.clone();
    let mut tw = 0.0;
    for (k, o) in omega.chunks_exact(2).enumerate() {
        let (a, b) = (x.z[2 * k], x.z[2 * k + 1]);
        let (u, v) = (r * o[0], r * o[1]);
        z[2 * k] = a - u;
        z[2 * k + 1] = b - v;
        tw += b * u - a * v;
    }
    HeisPoint { z, t: x.t - 0.5 * tw }
}

/// `A_r f(x)` by the sphere rule, no checks.
pub fn mean_value<F: HeisFunction + ?Sized>(f: &F, r: f64, x: &HeisPoint, rule: &SphereRule) -> f64 {
    rule.nodes.iter().zip(&rule.weights).map(|(o, w)| w * f.eval(&sphere_point(x, r, o))).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanValue {
    pub value: f64,
    /// The sphere left the sampled box while the field was not negligible
    /// on its boundary.
    pub flagged: bool,
}

pub fn quadrature_spherical_mean<F: HeisFunction + ?Sized>(
    f: &F,
    r: f64,
    x: &HeisPoint,
    rule: &SphereRule,
) -> Result<MeanValue> {
    if !(r > 0.0) {
        return domain("radius must be positive");
    }
    if f.dim() != rule.dim() || x.dim() != rule.dim() {
        return Err(crate::HeisError::DimensionMismatch(f.dim(), rule.dim()));
    }
    let mut value = 0.0;
    let mut exits = false;
    for (o, w) in rule.nodes.iter().zip(&rule.weights) {
        let p = sphere_point(x, r, o);
        exits |= !f.known_at(&p);
        value += w * f.eval(&p);
    }
    Ok(MeanValue { value, flagged: exits && f.boundary_mass() > BOUNDARY_TOL })
}

/// `tau_y f (x) = f(x y^{-1})`, resampled on the same grid.
pub fn translate(f: &SampledField, y: &HeisPoint) -> SampledField {
    let tr = Translated::new(f, y);
    SampledField::from_fn(&f.grid, &tr, f.interp)
}

/// `delta_r f (x) = f(delta_r x)`, resampled on the same grid.
pub fn dilate_field(f: &SampledField, r: f64) -> Result<SampledField> {
    if !(r > 0.0) {
        return domain("dilation factor must be positive");
    }
    let d = crate::func::Dilated { f, r };
    Ok(SampledField::from_fn(&f.grid, &d, f.interp))
}

/// `max_j |A_{delta^j} f(x)|` over a finite range of `j`.
pub fn lacunary_max<F: HeisFunction + ?Sized>(
    f: &F,
    delta: f64,
    j_range: std::ops::RangeInclusive<i32>,
    x: &HeisPoint,
    rule: &SphereRule,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return domain("lacunary ratio must lie in (0,1)");
    }
    Ok(j_range.map(|j| mean_value(f, delta.powi(j), x, rule).abs()).fold(0.0, f64::max))
}

/// Geometric radii `delta^{-i/(m-1)}`, `i = 0..m`, spanning `[1, 1/delta]`.
/// Doubling-minus-one refinement `m -> 2m - 1` keeps every old node.
pub fn local_radii(delta: f64, m: usize) -> Vec<f64> {
    if m <= 1 {
        return vec![1.0];
    }
    let l = -delta.ln();
    (0..m).map(|i| (l * (i as f64 / (m - 1) as f64)).exp()).collect()
}

/// `max_{1 <= r <= 1/delta} |A_r f(x)|` over the geometric radii.
pub fn local_max<F: HeisFunction + ?Sized>(
    f: &F,
    delta: f64,
    r_nodes: usize,
    x: &HeisPoint,
    rule: &SphereRule,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return domain("delta must lie in (0,1)");
    }
    Ok(local_radii(delta, r_nodes).into_iter().map(|r| mean_value(f, r, x, rule).abs()).fold(0.0, f64::max))
}

/// Right side of the fundamental-theorem majorant
/// `A_1 f(x) + int_1^{1/delta} |B_r f(x)| dr`, the integral by composite
/// Gauss-Legendre on `panels` panels of 8 nodes with spectral `B_r`.
pub fn ftc_majorant(
    f: &crate::func::GaussianBump,
    delta: f64,
    panels: usize,
    x: &HeisPoint,
    rule: &SphereRule,
    trunc: &crate::spectral::SpectralTruncation,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) || panels == 0 {
        return domain("need delta in (0,1) and at least one panel");
    }
    let a1 = quadrature_spherical_mean(f, 1.0, x, rule)?.value;
    let gl = gauss_legendre(8);
    let top = 1.0 / delta;
    let hw = (top - 1.0) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let a = 1.0 + p as f64 * hw;
        let sub = gl.mapped(a, a + hw);
        for (&r, &w) in sub.nodes.iter().zip(&sub.weights) {
            acc += w * crate::spectral::spectral_derivative_mean(f, r, x, trunc)?.value.abs();
        }
    }
    Ok(a1 + acc)
}

/// `||A_r f - A_r tau_y f||_q / ||f||_p` with midpoint-rule norms over `grid`.
pub fn continuity_ratio<F: HeisFunction + ?Sized>(
    f: &F,
    y: &HeisPoint,
    p: f64,
    q: f64,
    r: f64,
    grid: &Grid,
    rule: &SphereRule,
) -> Result<f64> {
    if !(r > 0.0) || !(p >= 1.0) || !(q >= 1.0) {
        return domain("need r > 0 and p, q >= 1");
    }
    if y.norm() > 1.0 + 1e-12 {
        return domain("translation must satisfy |y| <= 1");
    }
    let tr = Translated::new(f, y);
    let vol = grid.cell_volume();
    let terms: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.center(i);
            let mut d = 0.0;
            for (o, w) in rule.nodes.iter().zip(&rule.weights) {
                let s = sphere_point(&x, r, o);
                d += w * (f.eval(&s) - tr.eval(&s));
            }
            d.abs().powf(q)
        })
        .collect();
    let num: f64 = terms.iter().sum();
    let den = grid.lp_norm(f, p);
    if den == 0.0 {
        return domain("zero function has no continuity ratio");
    }
    Ok((num * vol).powf(1.0 / q) / den)
}

/// `||delta_r f||_p` predicted from `||f||_p` by homogeneity.
pub fn dilation_norm_factor(n: usize, r: f64, p: f64) -> f64 {
    r.powf(-((2 * n + 2) as f64) / p)
}

/// `delta_r^{-1} g(x)` for a function `g`.
pub fn undilate_at(r: f64, x: &HeisPoint) -> HeisPoint {
    dilate_unchecked(1.0 / r, x)
}

/// How the localized means pick their support set and radius: with `Q` at
/// level `k`, `V_Q` is the union of the level `k + cell_offset` cubes `P` of
/// system `p_system` whose closed ball `B(z_P, ball_scale delta^k)` meets the
/// grid only inside `Q`, and the mean is taken at radius
/// `radius_scale delta^k`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Localization {
    pub cell_offset: i32,
    pub ball_scale: f64,
    pub radius_scale: f64,
    pub p_system: usize,
}

impl Localization {
    /// `P` three levels down, balls of radius `delta^{k+1}`, mean radius
    /// `delta^{k+2}`.
    pub fn standard(delta: f64) -> Self {
        Localization { cell_offset: 3, ball_scale: delta, radius_scale: delta * delta, p_system: 0 }
    }

    /// Ball radius large enough that the support of the localized mean stays
    /// in `Q` on the grid: the largest measured reach of a `P` cube plus the
    /// mean radius plus the reach of one grid cell.
    pub fn fitted(systems: &DyadicSystems, cell_offset: i32, radius_scale: f64) -> Self {
        let sys = &systems.systems[0];
        let reach = systems.grid.cell_reach();
        let mut ball: f64 = 0.0;
        for k in systems.k_min..=systems.k_max - cell_offset {
            let scale = systems.delta.powi(k);
            for r in systems.cubes_at(0, k + cell_offset) {
                let q = &sys.cubes[r.id];
                let rp = q.cells.iter().map(|&c| crate::heis::dist_left(&q.center, &systems.grid.center(c as usize))).fold(0.0, f64::max);
                ball = ball.max((rp + reach) / scale + radius_scale);
            }
        }
        Localization { cell_offset, ball_scale: ball, radius_scale, p_system: 0 }
    }

    pub fn radius(&self, delta: f64, k: i32) -> f64 {
        self.radius_scale * delta.powi(k)
    }
}

impl Grid {
    /// Upper bound for `d(c, y)` between a cell centre `c` and any point `y`
    /// of its cell.
    pub fn cell_reach(&self) -> f64 {
        let d = self.counts.len();
        let zmax = self.region.half_widths[..d - 1].iter().map(|h| h * h).sum::<f64>().sqrt();
        let hz2: f64 = (0..d - 1).map(|a| (self.spacing(a) / 2.0).powi(2)).sum();
        let dt = self.spacing(d - 1) / 2.0 + 0.5 * zmax * hz2.sqrt();
        (hz2 * hz2 + dt * dt).sqrt().sqrt()
    }
}

/// Cells of `V_Q`.
pub fn localization_cells(systems: &DyadicSystems, q: CubeRef, loc: &Localization) -> Result<Vec<u32>> {
    let cube = systems.try_cube(q)?;
    let k = cube.level;
    let pk = k + loc.cell_offset;
    if pk > systems.k_max {
        return Err(crate::HeisError::UnknownCube(format!("level {pk} is finer than the built levels")));
    }
    let ball = loc.ball_scale * systems.delta.powi(k);
    let mut out = Vec::new();
    for p in systems.cubes_at(loc.p_system, pk) {
        let pc = systems.cube(p);
        // cheap rejection: P must meet Q
        if !pc.cells.iter().any(|c| cube.cells.binary_search(c).is_ok()) {
            continue;
        }
        let inside = crate::dyadic::cells_in_ball(&systems.grid, &pc.center, ball, true)
            .iter()
            .all(|c| cube.cells.binary_search(c).is_ok());
        if inside {
            out.extend_from_slice(&pc.cells);
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// `A_Q f = A_{rho}(f 1_{V_Q})`, with `f` read piecewise constant on cells,
/// evaluated at the listed cells (all cells when `at` is `None`).
pub fn localized_aq(
    f: &SampledField,
    q: CubeRef,
    systems: &DyadicSystems,
    loc: &Localization,
    rule: &SphereRule,
    at: Option<&[u32]>,
) -> Result<Vec<f64>> {
    let v = localization_cells(systems, q, loc)?;
    let rho = loc.radius(systems.delta, systems.cube(q).level);
    localized_mean_values(f, &v, &[rho], rule, at.unwrap_or(&[]), at.is_none(), systems)
}

/// `max_i A_{t_i}(f 1_V)` at the listed cells.
pub(crate) fn localized_mean_values(
    f: &SampledField,
    v: &[u32],
    radii: &[f64],
    rule: &SphereRule,
    at: &[u32],
    everywhere: bool,
    systems: &DyadicSystems,
) -> Result<Vec<f64>> {
    if f.grid != systems.grid {
        return domain("field and dyadic systems live on different grids");
    }
    let mut masked = vec![0.0; f.values.len()];
    for &c in v {
        masked[c as usize] = f.values[c as usize];
    }
    let fv = SampledField { grid: f.grid.clone(), values: masked, interp: Interp::Nearest };
    let eval = |c: usize| {
        let x = fv.grid.center(c);
        radii.iter().map(|&r| mean_value(&fv, r, &x, rule)).fold(f64::NEG_INFINITY, f64::max)
    };
    if v.is_empty() {
        let len = if everywhere { f.values.len() } else { at.len() };
        return Ok(vec![0.0; len]);
    }
    Ok(if everywhere {
        (0..f.values.len()).into_par_iter().map(eval).collect()
    } else {
        at.par_iter().map(|&c| eval(c as usize)).collect()
    })
}

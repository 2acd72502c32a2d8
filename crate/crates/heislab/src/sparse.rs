//! Sparse machinery on built dyadic systems: linearization of the localized
//! maximal operator, Calderón–Zygmund stopping cubes, the recursive sparse
//! family, sparse forms, Lorentz norms and the Carleson embedding.
//!
//! Functions are given by their values on the grid cells; all measures are
//! cell counts times the cell volume.

use crate::dyadic::{cube_average_cells, CubeRef, DyadicSystems};
use crate::error::{domain, HeisError, Result};
use crate::means::{lacunary_max, localized_mean_values, localization_cells, Localization, SampledField, SphereRule};
use crate::quad::adaptive;
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::VecDeque;

/// Deterministic processing order: coarsest first, then by centre
/// coordinates.
pub fn cube_order(systems: &DyadicSystems, a: CubeRef, b: CubeRef) -> Ordering {
    let (ca, cb) = (systems.cube(a), systems.cube(b));
    ca.level
        .cmp(&cb.level)
        .then_with(|| {
            ca.center
                .coords()
                .iter()
                .zip(cb.center.coords().iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| a.cmp(&b))
}

fn sorted_subset(inner: &[u32], outer: &[u32]) -> bool {
    if inner.len() > outer.len() {
        return false;
    }
    let mut j = 0;
    for &c in inner {
        while j < outer.len() && outer[j] < c {
            j += 1;
        }
        if j == outer.len() || outer[j] != c {
            return false;
        }
    }
    true
}

/// Cubes of system `alpha` on which the localized mean is defined, i.e.
/// whose `P` level is still built.
pub fn localizable_cubes(systems: &DyadicSystems, alpha: usize, loc: &Localization) -> Vec<CubeRef> {
    let mut v = Vec::new();
    for k in systems.k_min..=systems.k_max - loc.cell_offset {
        v.extend(systems.cubes_at(alpha, k));
    }
    v
}

/// Largest `|A_Q 1|` outside `Q` over the grid. Zero means the support of
/// the localized mean stays in its cube.
pub fn support_leak(systems: &DyadicSystems, q: CubeRef, loc: &Localization, rule: &SphereRule) -> Result<f64> {
    let ones = SampledField::constant(&systems.grid, 1.0, crate::means::Interp::Nearest);
    let cube = systems.try_cube(q)?;
    let v = localization_cells(systems, q, loc)?;
    let rho = loc.radius(systems.delta, cube.level);
    let outside: Vec<u32> = (0..systems.grid.len() as u32).filter(|c| cube.cells.binary_search(c).is_err()).collect();
    let vals = localized_mean_values(&ones, &v, &[rho], rule, &outside, false, systems)?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Per-cube sets of the linearized supremum.
#[derive(Clone, Debug)]
pub struct LinearizationSets {
    pub cubes: Vec<CubeRef>,
    /// Operator values on the cells of each cube, aligned with its cell list.
    pub values: Vec<Vec<f64>>,
    pub e: Vec<Vec<u32>>,
    pub b: Vec<Vec<u32>>,
    /// `sup_Q A_Q f(x)` over the cubes containing `x`, per grid cell.
    pub sup: Vec<f64>,
}

impl LinearizationSets {
    /// Builds `E_Q = {x in Q : A_Q f(x) > 0, A_Q f(x) >= sup/2}` and
    /// `B_Q = E_Q \ U_{Q' strictly containing Q} E_Q'`, where among cubes
    /// with equal cell sets the earlier in [`cube_order`] counts as larger.
    pub fn from_values(systems: &DyadicSystems, cubes: Vec<CubeRef>, values: Vec<Vec<f64>>) -> Result<Self> {
        if cubes.len() != values.len() {
            return domain("one value vector per cube");
        }
        let ncell = systems.grid.len();
        let mut sup = vec![0.0f64; ncell];
        for (q, v) in cubes.iter().zip(&values) {
            let cells = &systems.try_cube(*q)?.cells;
            if cells.len() != v.len() {
                return domain("values must be aligned with the cube cells");
            }
            for (&c, &a) in cells.iter().zip(v) {
                sup[c as usize] = sup[c as usize].max(a);
            }
        }
        let e: Vec<Vec<u32>> = cubes
            .iter()
            .zip(&values)
            .map(|(q, v)| {
                systems
                    .cube(*q)
                    .cells
                    .iter()
                    .zip(v)
                    .filter(|&(&c, &a)| a > 0.0 && a >= 0.5 * sup[c as usize])
                    .map(|(&c, _)| c)
                    .collect()
            })
            .collect();
        let b = cubes
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let cells = &systems.cube(*q).cells;
                // a cube with a single child equals it as a set; the coarser one wins
                let bigger: Vec<usize> = (0..cubes.len())
                    .filter(|&j| {
                        let other = &systems.cube(cubes[j]).cells;
                        sorted_subset(cells, other)
                            && (other.len() > cells.len() || (j != i && cube_order(systems, cubes[j], *q) == Ordering::Less))
                    })
                    .collect();
                e[i].iter().copied().filter(|c| bigger.iter().all(|&j| e[j].binary_search(c).is_err())).collect()
            })
            .collect();
        Ok(LinearizationSets { cubes, values, e, b, sup })
    }

    /// No cell lies in two `B_Q`.
    pub fn b_disjoint(&self, ncell: usize) -> bool {
        let mut seen = vec![false; ncell];
        for b in &self.b {
            for &c in b {
                if std::mem::replace(&mut seen[c as usize], true) {
                    return false;
                }
            }
        }
        true
    }

    /// `U B_Q = U E_Q` as cell sets.
    pub fn unions_agree(&self, ncell: usize) -> bool {
        let mut in_e = vec![false; ncell];
        let mut in_b = vec![false; ncell];
        for (e, b) in self.e.iter().zip(&self.b) {
            e.iter().for_each(|&c| in_e[c as usize] = true);
            b.iter().for_each(|&c| in_b[c as usize] = true);
        }
        in_e == in_b
    }

    /// Every cell with positive supremum lies in some `E_Q`.
    pub fn covers_support(&self) -> bool {
        let mut in_e = vec![false; self.sup.len()];
        for e in &self.e {
            e.iter().for_each(|&c| in_e[c as usize] = true);
        }
        self.sup.iter().zip(&in_e).all(|(&s, &i)| s <= 0.0 || i)
    }

    /// `(<sup_Q A_Q f, g>, 2 sum_Q <A_Q f, g 1_{B_Q}>)` as grid sums.
    pub fn half_sup_pairing(&self, systems: &DyadicSystems, g: &[f64]) -> (f64, f64) {
        let vol = systems.grid.cell_volume();
        let lhs: f64 = self.sup.iter().zip(g).map(|(s, w)| s * w).sum::<f64>() * vol;
        let mut rhs = 0.0;
        for (i, q) in self.cubes.iter().enumerate() {
            let cells = &systems.cube(*q).cells;
            for &c in &self.b[i] {
                let pos = cells.binary_search(&c).expect("B_Q lies in Q");
                rhs += self.values[i][pos] * g[c as usize];
            }
        }
        (lhs, 2.0 * rhs * vol)
    }
}

fn aq_values(
    f: &SampledField,
    cubes: &[CubeRef],
    systems: &DyadicSystems,
    loc: &Localization,
    rule: &SphereRule,
    radii_of: impl Fn(f64) -> Vec<f64>,
) -> Result<Vec<Vec<f64>>> {
    cubes
        .iter()
        .map(|&q| {
            let cube = systems.try_cube(q)?;
            let v = localization_cells(systems, q, loc)?;
            let radii = radii_of(loc.radius(systems.delta, cube.level));
            localized_mean_values(f, &v, &radii, rule, &cube.cells, false, systems)
        })
        .collect()
}

/// Linearization of `sup_Q A_Q f` over a finite cube collection.
pub fn linearize(
    f: &SampledField,
    cubes: &[CubeRef],
    systems: &DyadicSystems,
    loc: &Localization,
    rule: &SphereRule,
) -> Result<LinearizationSets> {
    let values = aq_values(f, cubes, systems, loc, rule, |rho| vec![rho])?;
    LinearizationSets::from_values(systems, cubes.to_vec(), values)
}

/// Radii `rho delta^{i / r_nodes}`, `i = 0..r_nodes`, for the local full
/// operator at mean radius `rho`.
pub fn full_radii(rho: f64, delta: f64, r_nodes: usize) -> Vec<f64> {
    (0..r_nodes.max(1)).map(|i| rho * delta.powf(i as f64 / r_nodes.max(1) as f64)).collect()
}

/// Same as [`linearize`] with `A_Q` replaced by the maximum of
/// `A_t(f 1_{V_Q})` over a geometric grid of `t` between `delta rho` and
/// `rho`.
pub fn linearize_full(
    f: &SampledField,
    cubes: &[CubeRef],
    systems: &DyadicSystems,
    loc: &Localization,
    rule: &SphereRule,
    r_nodes: usize,
) -> Result<LinearizationSets> {
    if r_nodes == 0 {
        return domain("need at least one radius node");
    }
    let delta = systems.delta;
    let values = aq_values(f, cubes, systems, loc, rule, |rho| full_radii(rho, delta, r_nodes))?;
    LinearizationSets::from_values(systems, cubes.to_vec(), values)
}

/// Maximal strict subcubes `P` of `q0` with `exceeds(P)`, found top-down.
pub fn stopping_cubes(systems: &DyadicSystems, q0: CubeRef, exceeds: impl Fn(CubeRef) -> bool) -> Vec<CubeRef> {
    let mut out = Vec::new();
    let mut stack = systems.children(q0);
    while let Some(p) = stack.pop() {
        if exceeds(p) {
            out.push(p);
        } else {
            stack.extend(systems.children(p));
        }
    }
    out.sort_by(|a, b| cube_order(systems, *a, *b));
    out
}

/// Brute-force oracle for [`stopping_cubes`]: every strict descendant that
/// exceeds and has no exceeding strict ancestor below `q0`.
pub fn stopping_cubes_brute(systems: &DyadicSystems, q0: CubeRef, exceeds: impl Fn(CubeRef) -> bool) -> Vec<CubeRef> {
    let all = systems.descendants(q0);
    let hit: Vec<CubeRef> = all.iter().copied().filter(|&p| exceeds(p)).collect();
    let mut out: Vec<CubeRef> = hit
        .iter()
        .copied()
        .filter(|&p| !hit.iter().any(|&a| a != p && sorted_subset(&systems.cube(p).cells, &systems.cube(a).cells) && systems.cube(a).level < systems.cube(p).level))
        .collect();
    out.sort_by(|a, b| cube_order(systems, *a, *b));
    out
}

/// Maximal strict subcubes with `<f>_{P,p} > mult <f>_{Q0,p}`.
pub fn cz_stopping(values: &[f64], q0: CubeRef, p: f64, mult: f64, systems: &DyadicSystems) -> Result<Vec<CubeRef>> {
    if !(mult > 1.0) {
        return domain("threshold multiplier must exceed 1");
    }
    let top = systems.cube_average(values, q0, p)?;
    let avg = |r: CubeRef| cube_average_cells(values, &systems.cube(r).cells, p).unwrap_or(0.0);
    Ok(stopping_cubes(systems, q0, |r| avg(r) > mult * top))
}

/// Outcome of the two-sided stopping rule.
#[derive(Clone, Debug, Serialize)]
pub struct StoppingResult {
    pub cubes: Vec<CubeRef>,
    pub multiplier: f64,
    /// `|U P| / |Q0|`.
    pub covered_fraction: f64,
}

const MAX_MULTIPLIER_DOUBLINGS: u32 = 60;

/// Maximal strict subcubes `P` of `q0` with `<f>_{P,p} > c <f>_{Q0,p}` or
/// `<g>_{P,q} > c <g>_{Q0,q}`, where `c` runs through `2, 4, 8, ...` until the
/// union covers less than half of `q0`.
pub fn stopping_children(q0: CubeRef, f: &[f64], g: &[f64], p: f64, q: f64, systems: &DyadicSystems) -> Result<StoppingResult> {
    let fa = systems.cube_average(f, q0, p)?;
    let ga = systems.cube_average(g, q0, q)?;
    let n0 = systems.cube(q0).cells.len() as f64;
    let mut mult = 2.0;
    for _ in 0..MAX_MULTIPLIER_DOUBLINGS {
        let cubes = stopping_cubes(systems, q0, |r| {
            let cells = &systems.cube(r).cells;
            cube_average_cells(f, cells, p).unwrap_or(0.0) > mult * fa || cube_average_cells(g, cells, q).unwrap_or(0.0) > mult * ga
        });
        let covered: usize = cubes.iter().map(|&r| systems.cube(r).cells.len()).sum();
        let frac = covered as f64 / n0;
        if frac < 0.5 {
            return Ok(StoppingResult { cubes, multiplier: mult, covered_fraction: frac });
        }
        mult *= 2.0;
    }
    Err(HeisError::CheckFailed(format!("stopping cubes of {q0:?} still cover half the cube at multiplier {mult}")))
}

/// A stopping family with its pairwise disjoint major subsets.
#[derive(Clone, Debug, Serialize)]
pub struct SparseFamily {
    pub cubes: Vec<CubeRef>,
    /// `E_S = S \ U(stopping children of S)`.
    pub e: Vec<Vec<u32>>,
    pub eta: f64,
    pub depth: Vec<usize>,
    pub multipliers: Vec<f64>,
    /// Recursion hit the depth limit with stopping cubes left over.
    pub truncated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SparsityReport {
    pub disjoint: bool,
    pub subsets_inside: bool,
    /// `min_S |E_S| / |S|`.
    pub min_ratio: f64,
}

impl SparsityReport {
    pub fn passed(&self, eta: f64) -> bool {
        self.disjoint && self.subsets_inside && self.min_ratio > eta
    }
}

impl SparseFamily {
    pub fn empty() -> Self {
        SparseFamily { cubes: Vec::new(), e: Vec::new(), eta: 0.5, depth: Vec::new(), multipliers: Vec::new(), truncated: false }
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Appends another family, e.g. one from a different system.
    pub fn extend(&mut self, other: SparseFamily) {
        self.cubes.extend(other.cubes);
        self.e.extend(other.e);
        self.depth.extend(other.depth);
        self.multipliers.extend(other.multipliers);
        self.truncated |= other.truncated;
    }

    /// Exhaustive check of disjointness and `|E_S| > eta |S|`. Families from
    /// different systems are checked separately by the caller.
    pub fn check(&self, systems: &DyadicSystems) -> SparsityReport {
        let mut seen = vec![false; systems.grid.len()];
        let mut disjoint = true;
        let mut inside = true;
        let mut min_ratio = f64::INFINITY;
        for (s, e) in self.cubes.iter().zip(&self.e) {
            let cells = &systems.cube(*s).cells;
            inside &= sorted_subset(e, cells);
            min_ratio = min_ratio.min(e.len() as f64 / cells.len() as f64);
            for &c in e {
                disjoint &= !std::mem::replace(&mut seen[c as usize], true);
            }
        }
        SparsityReport { disjoint, subsets_inside: inside, min_ratio }
    }
}

/// Recursive stopping-time family below `q0`.
pub fn build_sparse_family(
    f: &[f64],
    g: &[f64],
    q0: CubeRef,
    p: f64,
    q: f64,
    max_depth: usize,
    systems: &DyadicSystems,
) -> Result<SparseFamily> {
    if f.len() != systems.grid.len() || g.len() != systems.grid.len() {
        return Err(HeisError::DimensionMismatch(f.len().min(g.len()), systems.grid.len()));
    }
    if f.iter().chain(g).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return domain("sparse families need bounded nonnegative f and g");
    }
    systems.try_cube(q0)?;
    let mut fam = SparseFamily::empty();
    let mut queue = VecDeque::from([(q0, 0usize)]);
    while let Some((s, d)) = queue.pop_front() {
        let st = stopping_children(s, f, g, p, q, systems)?;
        let mut covered: Vec<u32> = st.cubes.iter().flat_map(|&r| systems.cube(r).cells.iter().copied()).collect();
        covered.sort_unstable();
        let e: Vec<u32> = systems.cube(s).cells.iter().copied().filter(|c| covered.binary_search(c).is_err()).collect();
        fam.cubes.push(s);
        fam.e.push(e);
        fam.depth.push(d);
        fam.multipliers.push(st.multiplier);
        if !st.cubes.is_empty() {
            if d + 1 > max_depth {
                fam.truncated = true;
            } else {
                queue.extend(st.cubes.into_iter().map(|c| (c, d + 1)));
            }
        }
    }
    Ok(fam)
}

/// `sum_S |S| <f>_{S,p} <g>_{S,q}`.
pub fn sparse_form(fam: &SparseFamily, f: &[f64], g: &[f64], p: f64, q: f64, systems: &DyadicSystems) -> Result<f64> {
    let terms: Vec<f64> = fam
        .cubes
        .par_iter()
        .map(|&s| Ok(systems.measure(s) * systems.cube_average(f, s, p)? * systems.cube_average(g, s, q)?))
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// Grid pairing `<M_lac f, g>` with `M_lac f = max_j |A_{ratio^j} f|`,
/// evaluated only where `g` is nonzero.
pub fn lacunary_pairing(f: &SampledField, g: &[f64], ratio: f64, j_range: std::ops::RangeInclusive<i32>, rule: &SphereRule) -> Result<f64> {
    if g.len() != f.grid.len() {
        return Err(HeisError::DimensionMismatch(g.len(), f.grid.len()));
    }
    let cells: Vec<usize> = (0..g.len()).filter(|&c| g[c] != 0.0).collect();
    let terms: Vec<f64> = cells
        .par_iter()
        .map(|&c| Ok(lacunary_max(f, ratio, j_range.clone(), &f.grid.center(c), rule)? * g[c]))
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() * f.grid.cell_volume())
}

/// Exponents and operator settings for a domination run.
#[derive(Clone, Debug, Serialize)]
pub struct DominationConfig {
    pub p: f64,
    pub q: f64,
    pub lac_ratio: f64,
    pub j_min: i32,
    pub j_max: i32,
    pub max_depth: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub family_size: usize,
    pub max_depth: usize,
    pub max_multiplier: f64,
    pub truncated: bool,
    pub sparse_ok: bool,
}

/// The stopping family of every system, rooted at each coarsest cube.
pub fn build_all_families(f: &[f64], g: &[f64], p: f64, q: f64, max_depth: usize, systems: &DyadicSystems) -> Result<Vec<SparseFamily>> {
    let mut out = Vec::new();
    for alpha in 0..systems.systems.len() {
        let mut fam = SparseFamily::empty();
        for top in systems.cubes_at(alpha, systems.k_min) {
            fam.extend(build_sparse_family(f, g, top, p, q, max_depth, systems)?);
        }
        out.push(fam);
    }
    Ok(out)
}

/// Compares `<M_lac f, g>` with the sum over systems of the sparse forms of
/// the stopping families.
pub fn verify_domination(f: &SampledField, g: &[f64], systems: &DyadicSystems, cfg: &DominationConfig, rule: &SphereRule) -> Result<DominationReport> {
    if f.grid != systems.grid {
        return domain("field and dyadic systems live on different grids");
    }
    let lhs = lacunary_pairing(f, g, cfg.lac_ratio, cfg.j_min..=cfg.j_max, rule)?;
    domination_against(lhs, &f.values, g, systems, cfg)
}

/// Sparse side of [`verify_domination`] for an already computed pairing.
pub fn domination_against(lhs: f64, f: &[f64], g: &[f64], systems: &DyadicSystems, cfg: &DominationConfig) -> Result<DominationReport> {
    let fam = build_all_families(f, g, cfg.p, cfg.q, cfg.max_depth, systems)?;
    let mut rhs = 0.0;
    let mut sparse_ok = true;
    for s in &fam {
        rhs += sparse_form(s, f, g, cfg.p, cfg.q, systems)?;
        sparse_ok &= s.check(systems).passed(0.5);
    }
    Ok(DominationReport {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 0.0 } else { f64::INFINITY },
        family_size: fam.iter().map(|s| s.len()).sum(),
        max_depth: fam.iter().map(|s| s.max_depth()).max().unwrap_or(0),
        max_multiplier: fam.iter().flat_map(|s| s.multipliers.iter().copied()).fold(0.0, f64::max),
        truncated: fam.iter().any(|s| s.truncated),
        sparse_ok,
    })
}

fn check_probability(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return domain("measure weights must be nonnegative");
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return domain(format!("measure must have total mass 1, got {s}"));
    }
    Ok(())
}

/// Distinct values of `|f|` in decreasing order with the mass of
/// `{|f| >= v}` for each.
fn level_masses(values: &[f64], weights: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = values.iter().map(|v| v.abs()).zip(weights.iter().copied()).filter(|(v, _)| *v > 0.0).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut acc = 0.0;
    for (v, w) in pairs {
        acc += w;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = acc,
            _ => out.push((v, acc)),
        }
    }
    out
}

/// `mu(|f| > s)`.
pub fn distribution_function(values: &[f64], weights: &[f64], s: f64) -> f64 {
    values.iter().zip(weights).filter(|(v, _)| v.abs() > s).map(|(_, w)| w).sum()
}

/// `int_0^inf d_f(s)^{1/r} ds` on a discrete probability measure.
pub fn lorentz_norm(values: &[f64], weights: &[f64], r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return domain("Lorentz exponent must exceed 1");
    }
    if values.len() != weights.len() {
        return Err(HeisError::DimensionMismatch(values.len(), weights.len()));
    }
    check_probability(weights)?;
    let lv = level_masses(values, weights);
    let mut s = 0.0;
    for (i, &(v, m)) in lv.iter().enumerate() {
        let next = lv.get(i + 1).map_or(0.0, |x| x.0);
        s += (v - next) * m.powf(1.0 / r);
    }
    Ok(s)
}

/// `int_0^1 t^{1/r - 1} f*(t) dt`. Equals `r` times [`lorentz_norm`].
pub fn lorentz_rearrangement(values: &[f64], weights: &[f64], r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return domain("Lorentz exponent must exceed 1");
    }
    if values.len() != weights.len() {
        return Err(HeisError::DimensionMismatch(values.len(), weights.len()));
    }
    check_probability(weights)?;
    let mut prev = 0.0f64;
    let mut s = 0.0;
    for (v, m) in level_masses(values, weights) {
        s += v * r * (m.powf(1.0 / r) - prev.powf(1.0 / r));
        prev = m;
    }
    Ok(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSetReport {
    /// `sum_m 2^m mu(E_m)^{1/r}` with `E_m = {2^m < |f| <= 2^{m+1}}`.
    pub lhs: f64,
    /// `2 ||f||_{L^{r,1}}`.
    pub rhs: f64,
    pub holds: bool,
}

/// Dyadic level-set bound against the Lorentz norm with constant 2.
pub fn check_level_set_lemma(values: &[f64], weights: &[f64], r: f64) -> Result<LevelSetReport> {
    let norm = lorentz_norm(values, weights, r)?;
    let mut mass: std::collections::BTreeMap<i32, f64> = Default::default();
    for (v, w) in values.iter().zip(weights) {
        let a = v.abs();
        if a > 0.0 {
            // 2^m < a <= 2^{m+1}
            let mut m = a.log2().ceil() as i32 - 1;
            while 2f64.powi(m + 1) < a {
                m += 1;
            }
            while 2f64.powi(m) >= a {
                m -= 1;
            }
            *mass.entry(m).or_default() += w;
        }
    }
    let lhs: f64 = mass.iter().map(|(&m, &mu)| 2f64.powi(m) * mu.powf(1.0 / r)).sum();
    let rhs = 2.0 * norm;
    Ok(LevelSetReport { lhs, rhs, holds: lhs <= rhs })
}

fn conjugate(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `C_{r,p} = (int_0^1 t^{-p'/r'} dt)^{1/p'} = (1 - p'/r')^{-1/p'}` for
/// `1 < r < p`.
pub fn proba_constant(r: f64, p: f64) -> Result<f64> {
    if !(r > 1.0 && p > r) {
        return domain("need 1 < r < p");
    }
    let (pc, rc) = (conjugate(p), conjugate(r));
    Ok((1.0 - pc / rc).powf(-1.0 / pc))
}

/// [`proba_constant`] with the integral done by adaptive quadrature after
/// `t = e^{-u}`.
pub fn proba_constant_numeric(r: f64, p: f64) -> Result<f64> {
    proba_constant(r, p)?;
    let (pc, rc) = (conjugate(p), conjugate(r));
    let a = pc / rc;
    let top = 60.0 / (1.0 - a);
    let body = adaptive(|u| (-(1.0 - a) * u).exp(), 0.0, top, 1e-14, 1e-13).value;
    let tail = (-(1.0 - a) * top).exp() / (1.0 - a);
    Ok((body + tail).powf(1.0 / pc))
}

/// `L^p` norm on a discrete probability measure.
pub fn lp_norm_discrete(values: &[f64], weights: &[f64], p: f64) -> f64 {
    values.iter().zip(weights).map(|(v, w)| w * v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlesonReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `sum_Q <phi>_{Q,s} |Q|` against `<phi>_{Q0,t} |Q0|`, with `Q0` the first
/// cube of the family.
pub fn carleson_check(fam: &SparseFamily, phi: &[f64], s: f64, t: f64, systems: &DyadicSystems) -> Result<CarlesonReport> {
    if !(s >= 1.0 && t > s) {
        return domain("need 1 <= s < t");
    }
    let Some(&q0) = fam.cubes.first() else {
        return domain("empty family");
    };
    let terms: Vec<f64> = fam.cubes.par_iter().map(|&q| Ok(systems.cube_average(phi, q, s)? * systems.measure(q))).collect::<Result<_>>()?;
    let lhs: f64 = terms.iter().sum();
    let rhs = systems.cube_average(phi, q0, t)? * systems.measure(q0);
    Ok(CarlesonReport { lhs, rhs, ratio: lhs / rhs })
}

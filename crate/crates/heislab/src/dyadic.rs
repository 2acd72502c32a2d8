//! Adjacent dyadic systems on a bounded box, built from nested greedy nets
//! under the left-invariant metric. Cubes are explicit sets of grid cells.

use crate::error::{domain, HeisError, Result};
use crate::heis::{dist_left, HeisPoint};
use crate::means::Grid;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Largest ratio for which the sandwich constants hold by the nearest-parent
/// construction without further assumptions.
pub const MAX_CERTIFIED_DELTA: f64 = 1.0 / 96.0;
/// Largest ratio accepted by the relaxed builder: nearest-parent linkage
/// keeps `B(z, delta^k / 12)` inside its cube as long as
/// `2 (delta / (1 - delta) + 1/12) < 1`.
pub const MAX_RELAXED_DELTA: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CubeRef {
    pub alpha: usize,
    pub id: usize,
}

#[derive(Clone, Debug)]
pub struct DyadicCube {
    pub alpha: usize,
    pub level: i32,
    pub center: HeisPoint,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Sorted grid-cell indices.
    pub cells: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct DyadicSystem {
    pub alpha: usize,
    pub cubes: Vec<DyadicCube>,
    /// Cube ids per level, coarsest first.
    pub by_level: Vec<Vec<usize>>,
    cell_cube: Vec<Vec<u32>>,
}

/// A collection of adjacent systems on one grid.
#[derive(Clone, Debug)]
pub struct DyadicSystems {
    pub grid: Grid,
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub seed: u64,
    /// Built with `delta <= 1/96`.
    pub certified: bool,
    pub systems: Vec<DyadicSystem>,
}

/// Serializable cube summary.
#[derive(Clone, Debug, Serialize)]
pub struct CubeRecord {
    pub alpha: usize,
    pub k: i32,
    pub center: Vec<f64>,
    pub cell_count: usize,
    pub parent_id: Option<usize>,
}

/// Bucket grid for radius queries under the left-invariant metric.
struct BallHash {
    wz: f64,
    wt: f64,
    dims: usize,
    lo: [f64; 5],
    shape: [usize; 5],
    buckets: Vec<Vec<u32>>,
}

impl BallHash {
    /// Buckets able to answer queries of radius `< rho` for points of the
    /// box `half_widths`.
    fn new(rho: f64, half_widths: &[f64]) -> Self {
        let dims = half_widths.len();
        let zmax = half_widths[..dims - 1].iter().map(|h| h * h).sum::<f64>().sqrt();
        let wz = rho;
        let wt = rho * rho + 0.5 * zmax * rho;
        let mut lo = [0.0; 5];
        let mut shape = [1usize; 5];
        for a in 0..dims {
            let w = if a + 1 < dims { wz } else { wt };
            lo[a] = -half_widths[a];
            shape[a] = ((2.0 * half_widths[a] / w).floor() as usize + 1).min(1 << 20);
        }
        let total: usize = shape[..dims].iter().product();
        BallHash { wz, wt, dims, lo, shape, buckets: vec![Vec::new(); total] }
    }

    fn coord(&self, x: &HeisPoint, a: usize) -> i64 {
        let (v, w) = if a + 1 < self.dims { (x.z[a], self.wz) } else { (x.t, self.wt) };
        (((v - self.lo[a]) / w).floor() as i64).clamp(0, self.shape[a] as i64 - 1)
    }

    fn insert(&mut self, x: &HeisPoint, id: u32) {
        let mut idx = 0;
        for a in 0..self.dims {
            idx = idx * self.shape[a] + self.coord(x, a) as usize;
        }
        self.buckets[idx].push(id);
    }

    /// Visit candidates until `f` returns false.
    fn visit(&self, x: &HeisPoint, mut f: impl FnMut(u32) -> bool) {
        let mut lo = [0usize; 5];
        let mut hi = [0usize; 5];
        for a in 0..self.dims {
            let c = self.coord(x, a);
            lo[a] = (c - 1).max(0) as usize;
            hi[a] = ((c + 1) as usize).min(self.shape[a] - 1);
        }
        let mut m = lo;
        loop {
            let mut idx = 0;
            for a in 0..self.dims {
                idx = idx * self.shape[a] + m[a];
            }
            for &i in &self.buckets[idx] {
                if !f(i) {
                    return;
                }
            }
            let mut a = self.dims;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                if m[a] < hi[a] {
                    m[a] += 1;
                    break;
                }
                m[a] = lo[a];
            }
        }
    }
}

/// Nearest point of `pts` to `x` among those within `rho`, ties to the
/// smallest index.
fn nearest_in(hash: &BallHash, pts: &[HeisPoint], x: &HeisPoint, rho: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    hash.visit(x, |i| {
        let d = dist_left(&pts[i as usize], x);
        if d < rho {
            let cand = (d, i as usize);
            if best.map_or(true, |b| cand < b) {
                best = Some(cand);
            }
        }
        true
    });
    best.map(|b| b.1)
}

fn nearest_brute(pts: &[HeisPoint], x: &HeisPoint) -> usize {
    let mut best = (f64::INFINITY, 0usize);
    for (i, p) in pts.iter().enumerate() {
        let cand = (dist_left(p, x), i);
        if cand < best {
            best = cand;
        }
    }
    best.1
}

/// Options for [`DyadicSystems::build`].
#[derive(Clone, Debug)]
pub struct BuildSpec {
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub systems: usize,
    pub seed: u64,
    /// Candidate centres; defaults to the cell centres of the grid.
    pub candidates: Option<Grid>,
}

/// Build `systems` adjacent systems with `delta <= 1/96`.
pub fn build_systems(grid: &Grid, delta: f64, k_min: i32, k_max: i32, systems: usize, seed: u64) -> Result<DyadicSystems> {
    if !(delta > 0.0 && delta <= MAX_CERTIFIED_DELTA) {
        return domain(format!("delta must lie in (0, 1/96], got {delta}"));
    }
    DyadicSystems::build(grid, &BuildSpec { delta, k_min, k_max, systems, seed, candidates: None })
}

/// Build with a ratio up to [`MAX_RELAXED_DELTA`]; the result is marked
/// uncertified and its properties must be checked, not assumed.
pub fn build_systems_relaxed(grid: &Grid, spec: &BuildSpec) -> Result<DyadicSystems> {
    if !(spec.delta > 0.0 && spec.delta <= MAX_RELAXED_DELTA) {
        return domain(format!("relaxed builder needs delta in (0, 1/4], got {}", spec.delta));
    }
    DyadicSystems::build(grid, spec)
}

impl DyadicSystems {
    fn build(grid: &Grid, spec: &BuildSpec) -> Result<DyadicSystems> {
        let BuildSpec { delta, k_min, k_max, systems, seed, .. } = *spec;
        if k_max < k_min {
            return domain("k_max must be at least k_min");
        }
        if systems == 0 {
            return domain("need at least one system");
        }
        let dims = grid.counts.len();
        if dims > 5 {
            return Err(HeisError::Unsupported("dyadic systems are built for n <= 2".into()));
        }
        // the finest scale must be resolved at the centre of the box
        let fine = delta.powi(k_max);
        let hz = (0..dims - 1).map(|a| grid.spacing(a)).fold(0.0, f64::max);
        let ht = grid.spacing(dims - 1);
        if hz > fine / 2.0 || ht.sqrt() > fine / 2.0 {
            return Err(HeisError::GridTooCoarse(format!(
                "level {k_max} needs z spacing <= {:.3e} and t spacing <= {:.3e}, got {hz:.3e} and {ht:.3e}",
                fine / 2.0,
                fine * fine / 4.0
            )));
        }
        let cand_grid = spec.candidates.as_ref().unwrap_or(grid);
        if cand_grid.dim() != grid.dim() {
            return Err(HeisError::DimensionMismatch(cand_grid.dim(), grid.dim()));
        }
        let candidates = cand_grid.centers();
        let cells = grid.centers();
        let hw: Vec<f64> = grid.region.half_widths.iter().zip(&cand_grid.region.half_widths).map(|(a, b)| a.max(*b)).collect();
        let mut out = Vec::with_capacity(systems);
        for alpha in 0..systems {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(alpha as u64));
            out.push(build_one(alpha, &candidates, &cells, delta, k_min, k_max, &hw, &mut rng)?);
        }
        Ok(DyadicSystems {
            grid: grid.clone(),
            delta,
            k_min,
            k_max,
            seed,
            certified: delta <= MAX_CERTIFIED_DELTA,
            systems: out,
        })
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<i32> {
        self.k_min..=self.k_max
    }

    fn level_index(&self, k: i32) -> Option<usize> {
        if k < self.k_min || k > self.k_max {
            None
        } else {
            Some((k - self.k_min) as usize)
        }
    }

    pub fn cube(&self, r: CubeRef) -> &DyadicCube {
        &self.systems[r.alpha].cubes[r.id]
    }

    pub fn try_cube(&self, r: CubeRef) -> Result<&DyadicCube> {
        self.systems
            .get(r.alpha)
            .and_then(|s| s.cubes.get(r.id))
            .ok_or_else(|| HeisError::UnknownCube(format!("{r:?}")))
    }

    /// All cubes of all systems, coarsest level first.
    pub fn all_cubes(&self) -> Vec<CubeRef> {
        let mut v = Vec::new();
        for s in &self.systems {
            for lvl in &s.by_level {
                v.extend(lvl.iter().map(|&id| CubeRef { alpha: s.alpha, id }));
            }
        }
        v
    }

    pub fn cubes_at(&self, alpha: usize, k: i32) -> Vec<CubeRef> {
        match self.level_index(k) {
            Some(l) => self.systems[alpha].by_level[l].iter().map(|&id| CubeRef { alpha, id }).collect(),
            None => Vec::new(),
        }
    }

    /// Level-`k` cube of system `alpha` holding the cell `cell`.
    pub fn cube_of_cell(&self, alpha: usize, k: i32, cell: usize) -> Option<CubeRef> {
        let l = self.level_index(k)?;
        Some(CubeRef { alpha, id: self.systems[alpha].cell_cube[l][cell] as usize })
    }

    /// The unique level-`k` cube of system `alpha` containing `x`.
    pub fn locate(&self, x: &HeisPoint, k: i32, alpha: usize) -> Option<CubeRef> {
        let cell = self.grid.cell_of(x)?;
        self.cube_of_cell(alpha, k, cell)
    }

    pub fn children(&self, r: CubeRef) -> Vec<CubeRef> {
        self.cube(r).children.iter().map(|&id| CubeRef { alpha: r.alpha, id }).collect()
    }

    pub fn parent(&self, r: CubeRef) -> Option<CubeRef> {
        self.cube(r).parent.map(|id| CubeRef { alpha: r.alpha, id })
    }

    /// Strict descendants of `r`.
    pub fn descendants(&self, r: CubeRef) -> Vec<CubeRef> {
        let mut out = Vec::new();
        let mut stack = self.children(r);
        while let Some(c) = stack.pop() {
            stack.extend(self.children(c));
            out.push(c);
        }
        out
    }

    pub fn measure(&self, r: CubeRef) -> f64 {
        self.cube(r).cells.len() as f64 * self.grid.cell_volume()
    }

    /// Whether `inner` is a subset of `outer` as cell sets.
    pub fn is_subset(&self, inner: CubeRef, outer: CubeRef) -> bool {
        let o = self.cube(outer);
        let Some(l) = self.level_index(o.level) else { return false };
        let map = &self.systems[outer.alpha].cell_cube[l];
        self.cube(inner).cells.iter().all(|&c| map[c as usize] as usize == outer.id)
    }

    /// `(|Q|^{-1} int_Q |f|^p)^{1/p}` for values on the grid.
    pub fn cube_average(&self, values: &[f64], r: CubeRef, p: f64) -> Result<f64> {
        cube_average_cells(values, &self.cube(r).cells, p)
    }

    pub fn records(&self) -> Vec<CubeRecord> {
        let mut v = Vec::new();
        for s in &self.systems {
            for c in &s.cubes {
                v.push(CubeRecord {
                    alpha: c.alpha,
                    k: c.level,
                    center: c.center.coords(),
                    cell_count: c.cells.len(),
                    parent_id: c.parent,
                });
            }
        }
        v
    }
}

/// Power mean of `|f|` over a set of cells.
pub fn cube_average_cells(values: &[f64], cells: &[u32], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return domain("cube averages need p >= 1");
    }
    if cells.is_empty() {
        return domain("empty cube");
    }
    let s: f64 = cells.iter().map(|&c| values[c as usize].abs().powf(p)).sum();
    Ok((s / cells.len() as f64).powf(1.0 / p))
}

#[allow(clippy::too_many_arguments)]
fn build_one(
    alpha: usize,
    candidates: &[HeisPoint],
    cells: &[HeisPoint],
    delta: f64,
    k_min: i32,
    k_max: i32,
    hw: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<DyadicSystem> {
    let nlev = (k_max - k_min + 1) as usize;
    let mut centers: Vec<Vec<HeisPoint>> = Vec::with_capacity(nlev);
    let mut parents: Vec<Vec<usize>> = Vec::with_capacity(nlev);
    for l in 0..nlev {
        let rho = delta.powi(k_min + l as i32);
        let mut hash = BallHash::new(rho, hw);
        let mut pts: Vec<HeisPoint> = if l == 0 { Vec::new() } else { centers[l - 1].clone() };
        for (i, p) in pts.iter().enumerate() {
            hash.insert(p, i as u32);
        }
        let inherited = pts.len();
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.shuffle(rng);
        for &i in &order {
            let x = &candidates[i];
            let mut free = true;
            hash.visit(x, |j| {
                free = dist_left(&pts[j as usize], x) >= rho;
                free
            });
            if free {
                hash.insert(x, pts.len() as u32);
                pts.push(x.clone());
            }
        }
        // parent links into the previous level
        let mut par = Vec::with_capacity(pts.len());
        if l > 0 {
            let prho = delta.powi(k_min + l as i32 - 1);
            let prev = &centers[l - 1];
            let mut ph = BallHash::new(prho, hw);
            for (i, p) in prev.iter().enumerate() {
                ph.insert(p, i as u32);
            }
            for (i, p) in pts.iter().enumerate() {
                if i < inherited {
                    par.push(i);
                } else {
                    par.push(nearest_in(&ph, prev, p, prho).unwrap_or_else(|| nearest_brute(prev, p)));
                }
            }
        }
        centers.push(pts);
        parents.push(par);
    }
    // finest assignment, then up the parent chain
    let finest = &centers[nlev - 1];
    let frho = delta.powi(k_max);
    let mut near = BallHash::new(frho, hw);
    let mut wide = BallHash::new(2.0 * frho, hw);
    for (i, p) in finest.iter().enumerate() {
        near.insert(p, i as u32);
        wide.insert(p, i as u32);
    }
    let leaf: Vec<u32> = cells
        .par_iter()
        .map(|x| {
            nearest_in(&near, finest, x, frho)
                .or_else(|| nearest_in(&wide, finest, x, 2.0 * frho))
                .unwrap_or_else(|| nearest_brute(finest, x)) as u32
        })
        .collect();
    let mut center_of_cell: Vec<Vec<u32>> = vec![Vec::new(); nlev];
    center_of_cell[nlev - 1] = leaf;
    for l in (0..nlev - 1).rev() {
        let up = &parents[l + 1];
        center_of_cell[l] = center_of_cell[l + 1].iter().map(|&c| up[c as usize] as u32).collect();
    }
    // cubes: one per centre, ids assigned level by level
    let mut cubes = Vec::new();
    let mut by_level = Vec::with_capacity(nlev);
    let mut id_of: Vec<Vec<usize>> = Vec::with_capacity(nlev);
    for l in 0..nlev {
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); centers[l].len()];
        for (cell, &c) in center_of_cell[l].iter().enumerate() {
            members[c as usize].push(cell as u32);
        }
        let mut ids = Vec::with_capacity(centers[l].len());
        let mut lvl = Vec::with_capacity(centers[l].len());
        for (c, cells_c) in members.into_iter().enumerate() {
            if cells_c.is_empty() {
                return Err(HeisError::GridTooCoarse(format!(
                    "centre {c} at level {} holds no grid cell; refine the grid or use it as candidate set",
                    k_min + l as i32
                )));
            }
            let parent = if l == 0 { None } else { Some(id_of[l - 1][parents[l][c]]) };
            let id = cubes.len();
            cubes.push(DyadicCube {
                alpha,
                level: k_min + l as i32,
                center: centers[l][c].clone(),
                parent,
                children: Vec::new(),
                cells: cells_c,
            });
            if let Some(p) = parent {
                cubes[p].children.push(id);
            }
            ids.push(id);
            lvl.push(id);
        }
        id_of.push(ids);
        by_level.push(lvl);
    }
    let cell_cube = (0..nlev).map(|l| center_of_cell[l].iter().map(|&c| id_of[l][c as usize] as u32).collect()).collect();
    Ok(DyadicSystem { alpha, cubes, by_level, cell_cube })
}

/// Cells whose centres lie in `B(center, radius)` (strict), or in the closed
/// ball when `closed` is set.
pub fn cells_in_ball(grid: &Grid, center: &HeisPoint, radius: f64, closed: bool) -> Vec<u32> {
    let d = grid.counts.len();
    let cz = center.z_norm_sq().sqrt();
    let mut lo = vec![0usize; d];
    let mut hi = vec![0usize; d];
    for a in 0..d {
        let (c, w) = if a + 1 < d { (center.z[a], radius) } else { (center.t, radius * radius + 0.5 * cz * radius) };
        let h = grid.spacing(a);
        let l = grid.region.half_widths[a];
        let i0 = ((c - w + l) / h - 0.5).ceil().max(0.0);
        let i1 = ((c + w + l) / h - 0.5).floor();
        if i1 < 0.0 || i0 > (grid.counts[a] - 1) as f64 {
            return Vec::new();
        }
        lo[a] = i0 as usize;
        hi[a] = (i1 as usize).min(grid.counts[a] - 1);
        if lo[a] > hi[a] {
            return Vec::new();
        }
    }
    let mut out = Vec::new();
    let mut m = lo.clone();
    loop {
        let idx = grid.flat_index(&m);
        let dd = dist_left(center, &grid.center(idx));
        if dd < radius || (closed && dd <= radius) {
            out.push(idx as u32);
        }
        let mut a = d;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            if m[a] < hi[a] {
                m[a] += 1;
                break;
            }
            m[a] = lo[a];
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PropertyReport {
    pub cubes_checked: usize,
    pub partition_violations: usize,
    pub nesting_violations: usize,
    pub outer_violations: usize,
    pub inner_violations: usize,
    /// max of `d(center, cell) / delta^k` over member cells
    pub worst_outer_ratio: f64,
    /// min of `d(center, cell) / delta^k` over non-member cells
    pub closest_outsider_ratio: f64,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.partition_violations == 0 && self.nesting_violations == 0 && self.outer_violations == 0 && self.inner_violations == 0
    }
}

impl DyadicSystems {
    /// Exhaustive check of partition, nesting and the ball sandwich
    /// `B(z, delta^k/12) <= Q <= B(z, 4 delta^k)` on grid cells.
    pub fn check_properties(&self) -> PropertyReport {
        let total = self.grid.len();
        let mut rep = PropertyReport { closest_outsider_ratio: f64::INFINITY, ..Default::default() };
        for s in &self.systems {
            for (l, lvl) in s.by_level.iter().enumerate() {
                // partition: each cell listed exactly once at each level
                let mut seen = vec![0u8; total];
                for &id in lvl {
                    for &c in &s.cubes[id].cells {
                        seen[c as usize] = seen[c as usize].saturating_add(1);
                        if s.cell_cube[l][c as usize] as usize != id {
                            rep.partition_violations += 1;
                        }
                    }
                }
                rep.partition_violations += seen.iter().filter(|&&v| v != 1).count();
                // nesting: the cube of a cell one level down has the cube above as parent
                if l + 1 < s.by_level.len() {
                    for cell in 0..total {
                        let child = s.cell_cube[l + 1][cell] as usize;
                        if s.cubes[child].parent != Some(s.cell_cube[l][cell] as usize) {
                            rep.nesting_violations += 1;
                        }
                    }
                }
            }
            let results: Vec<(usize, usize, f64, f64)> = s
                .cubes
                .par_iter()
                .enumerate()
                .map(|(id, q)| {
                    let scale = self.delta.powi(q.level);
                    let mut outer = 0;
                    let mut worst: f64 = 0.0;
                    for &c in &q.cells {
                        let d = dist_left(&q.center, &self.grid.center(c as usize));
                        worst = worst.max(d / scale);
                        if !(d < 4.0 * scale) {
                            outer += 1;
                        }
                    }
                    let l = (q.level - self.k_min) as usize;
                    let mut inner = 0;
                    for c in cells_in_ball(&self.grid, &q.center, scale / 12.0, false) {
                        if s.cell_cube[l][c as usize] as usize != id {
                            inner += 1;
                        }
                    }
                    // closest outsider, searched within the outer ball
                    let mut closest = f64::INFINITY;
                    if q.cells.len() < 200_000 {
                        for c in cells_in_ball(&self.grid, &q.center, scale / 2.0, false) {
                            if s.cell_cube[l][c as usize] as usize != id {
                                closest = closest.min(dist_left(&q.center, &self.grid.center(c as usize)) / scale);
                            }
                        }
                    }
                    (outer, inner, worst, closest)
                })
                .collect();
            for (o, i, w, c) in results {
                rep.cubes_checked += 1;
                rep.outer_violations += o;
                rep.inner_violations += i;
                rep.worst_outer_ratio = rep.worst_outer_ratio.max(w);
                rep.closest_outsider_ratio = rep.closest_outsider_ratio.min(c);
            }
            // every non-root cube has exactly one parent one level up
            for q in &s.cubes {
                match q.parent {
                    Some(p) if s.cubes[p].level + 1 == q.level => {}
                    None if q.level == self.k_min => {}
                    _ => rep.nesting_violations += 1,
                }
            }
        }
        rep
    }

    /// Smallest cube of any system at level `k - 1` containing every grid
    /// cell of `B(center, r)`, where `delta^{k+1} < r <= delta^k`.
    pub fn covering_cube(&self, center: &HeisPoint, r: f64) -> Option<CubeRef> {
        let k = (r.ln() / self.delta.ln()).floor() as i32;
        let ball = cells_in_ball(&self.grid, center, r, false);
        if ball.is_empty() {
            return None;
        }
        let l = self.level_index(k - 1)?;
        for s in &self.systems {
            let q = s.cell_cube[l][ball[0] as usize];
            if ball.iter().all(|&c| s.cell_cube[l][c as usize] == q) {
                return Some(CubeRef { alpha: s.alpha, id: q as usize });
            }
        }
        None
    }

    /// Random balls resolved by the grid (at least `min_cells` cells) with
    /// radii in `(delta^{k_min+2}, delta^{k_min+1}]` down to the finest
    /// resolvable level; returns (tested, contained).
    pub fn check_covering_property(&self, balls: usize, min_cells: usize, seed: u64) -> BallReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rep = BallReport::default();
        let mut attempts = 0;
        while rep.tested < balls && attempts < 1000 * balls {
            attempts += 1;
            let cell = rng.gen_range(0..self.grid.len());
            let x = self.grid.center(cell);
            let k = rng.gen_range(self.k_min + 1..=self.k_max);
            let lo = self.delta.powi(k + 1);
            let hi = self.delta.powi(k);
            let r = (lo.ln() + (hi.ln() - lo.ln()) * rng.gen_range(1e-9..=1.0)).exp();
            if cells_in_ball(&self.grid, &x, r, false).len() < min_cells {
                continue;
            }
            rep.tested += 1;
            if let Some(q) = self.covering_cube(&x, r) {
                rep.contained += 1;
                rep.found.push((x.coords(), r, q));
            } else {
                rep.failures.push((x.coords(), r));
            }
        }
        rep
    }

    /// Observed doubling ratio `|B(x,2r)| / |B(x,r)|` over random balls
    /// inside the box, counted in grid cells.
    pub fn doubling_constant(&self, balls: usize, seed: u64) -> f64 {
        doubling_constant(&self.grid, self.delta.powi(self.k_max), balls, seed)
    }
}

#[derive(Clone, Debug, Default)]
pub struct BallReport {
    pub tested: usize,
    pub contained: usize,
    pub found: Vec<(Vec<f64>, f64, CubeRef)>,
    pub failures: Vec<(Vec<f64>, f64)>,
}

/// Max over random balls of the cell-count ratio `|B(x,2r)|/|B(x,r)|`, for
/// radii between `r_min` and the largest radius whose doubled ball stays in
/// the box.
pub fn doubling_constant(grid: &Grid, r_min: f64, balls: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = &grid.region;
    let d = region.half_widths.len();
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut attempts = 0;
    while done < balls && attempts < 100 * balls {
        attempts += 1;
        let z: Vec<f64> = (0..d - 1).map(|a| rng.gen_range(-0.5..0.5) * region.half_widths[a]).collect();
        let x = HeisPoint::new(&z, rng.gen_range(-0.5..0.5) * region.half_widths[d - 1]);
        let r = r_min * rng.gen_range(1.0..4.0);
        // doubled ball must stay inside the box
        let cz = x.z_norm_sq().sqrt();
        let fits = (0..d - 1).all(|a| x.z[a].abs() + 2.0 * r < region.half_widths[a])
            && x.t.abs() + 4.0 * r * r + cz * r < region.half_widths[d - 1];
        if !fits {
            continue;
        }
        let small = cells_in_ball(grid, &x, r, false).len();
        if small < 8 {
            continue;
        }
        let big = cells_in_ball(grid, &x, 2.0 * r, false).len();
        worst = worst.max(big as f64 / small as f64);
        done += 1;
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heis::BoxRegion;

    fn small_systems() -> DyadicSystems {
        let grid = Grid::uniform(BoxRegion::uniform(1, 0.5, 0.25).unwrap(), 16, 32).unwrap();
        build_systems_relaxed(&grid, &BuildSpec { delta: 0.25, k_min: -1, k_max: 1, systems: 3, seed: 7, candidates: None }).unwrap()
    }

    #[test]
    fn relaxed_systems_satisfy_properties() {
        let s = small_systems();
        assert!(!s.certified);
        let rep = s.check_properties();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.worst_outer_ratio < 4.0);
    }

    #[test]
    fn partition_and_accessors() {
        let s = small_systems();
        let vol = s.grid.cell_volume();
        for alpha in 0..3 {
            for k in s.levels() {
                let total: usize = s.cubes_at(alpha, k).iter().map(|&q| s.cube(q).cells.len()).sum();
                assert_eq!(total, s.grid.len());
            }
        }
        for q in s.all_cubes() {
            let kids = s.children(q);
            if !kids.is_empty() {
                let m: f64 = kids.iter().map(|&c| s.measure(c)).sum();
                assert!((m - s.measure(q)).abs() < 1e-12 * vol.max(1.0));
            }
            let c = s.cube(q);
            assert_eq!(s.locate(&c.center, c.level, q.alpha), Some(q));
        }
        let x = HeisPoint::new(&[0.11, -0.2], 0.03);
        for k in 0..1 {
            let q = s.locate(&x, k, 1).unwrap();
            let child = s.children(q).into_iter().find(|&c| s.cube(c).cells.contains(&(s.grid.cell_of(&x).unwrap() as u32)));
            assert_eq!(child, s.locate(&x, k + 1, 1));
        }
        assert_eq!(s.locate(&HeisPoint::new(&[3.0, 0.0], 0.0), 0, 0), None);
        assert!(s.try_cube(CubeRef { alpha: 9, id: 0 }).is_err());
    }

    #[test]
    fn determinism() {
        let a = small_systems();
        let b = small_systems();
        for (x, y) in a.systems.iter().zip(&b.systems) {
            assert_eq!(x.cell_cube, y.cell_cube);
        }
    }

    #[test]
    fn cube_averages() {
        let s = small_systems();
        let q = s.cubes_at(0, 0)[0];
        let c = vec![3.5; s.grid.len()];
        for p in [1.0, 2.0, 3.7] {
            assert!((s.cube_average(&c, q, p).unwrap() - 3.5).abs() < 1e-12);
        }
        // indicator of half the cells: p = 2 gives (1/2)^{1/2}
        let cells = &s.cube(q).cells;
        let mut v = vec![0.0; s.grid.len()];
        let half = cells.len() / 2;
        for &cc in &cells[..half] {
            v[cc as usize] = 1.0;
        }
        let want = (half as f64 / cells.len() as f64).sqrt();
        assert!((s.cube_average(&v, q, 2.0).unwrap() - want).abs() < 1e-15);
        if cells.len() % 2 == 0 {
            assert!((want - 0.5f64.sqrt()).abs() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r: Vec<f64> = (0..s.grid.len()).map(|_| rng.gen_range(0.0..2.0)).collect();
        let mut prev = 0.0;
        for p in [1.0, 1.5, 2.0, 4.0] {
            let a = s.cube_average(&r, q, p).unwrap();
            assert!(a >= prev);
            prev = a;
        }
        assert!(s.cube_average(&r, q, 0.5).is_err());
    }

    #[test]
    fn builder_preconditions() {
        let grid = Grid::uniform(BoxRegion::uniform(1, 0.5, 0.25).unwrap(), 16, 32).unwrap();
        assert!(build_systems(&grid, 0.25, 0, 1, 1, 0).is_err());
        assert!(matches!(
            build_systems(&grid, 0.01, 0, 1, 1, 0),
            Err(HeisError::GridTooCoarse(_))
        ));
    }

    #[test]
    fn ball_enumeration_matches_brute_force() {
        let grid = Grid::uniform(BoxRegion::uniform(1, 1.0, 1.0).unwrap(), 20, 30).unwrap();
        for (c, r) in [(HeisPoint::new(&[0.3, -0.4], 0.2), 0.5), (HeisPoint::new(&[-0.9, 0.9], -0.9), 0.7)] {
            let fast = cells_in_ball(&grid, &c, r, false);
            let brute: Vec<u32> =
                (0..grid.len()).filter(|&i| dist_left(&c, &grid.center(i)) < r).map(|i| i as u32).collect();
            assert_eq!(fast, brute);
        }
    }

    #[test]
    fn doubling_on_grid() {
        let grid = Grid::uniform(BoxRegion::uniform(1, 1.0, 1.0).unwrap(), 40, 80).unwrap();
        let c = doubling_constant(&grid, 0.1, 30, 1);
        // Haar measure: exactly 2^{2n+2} = 16 in the continuum
        assert!(c > 10.0 && c < 25.0, "{c}");
    }
}

//! Run configuration: TOML with one table per suite. Every key has a
//! default, so an empty file (or no file) is a valid configuration.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub general: General,
    pub laguerre: LaguerreCfg,
    pub means: MeansCfg,
    pub continuity: ContinuityCfg,
    pub dyadic: DyadicCfg,
    pub sparse: SparseCfg,
    pub weights: WeightsCfg,
    pub regions: RegionsCfg,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct General {
    /// Overrides the per-suite dimension when set.
    pub n: Option<usize>,
    pub seed: u64,
}

impl Default for General {
    fn default() -> Self {
        General { n: None, seed: 7 }
    }
}

/// Box `[-lz, lz]^{2n} x [-lt, lt]` with `cz` cells per z axis and `ct` on t.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lz: f64,
    pub lt: f64,
    pub cz: usize,
    pub ct: usize,
}

/// Largest grid any suite will allocate.
pub const MAX_CELLS: usize = 1 << 24;

impl GridSpec {
    /// `refine` is the per-axis factor of any refined copy the suite builds.
    fn check(&self, what: &str, n: usize, refine: usize) -> Result<(), String> {
        if !(self.lz > 0.0 && self.lt > 0.0 && self.lz.is_finite() && self.lt.is_finite()) {
            return Err(format!("{what}: half widths must be positive"));
        }
        if self.cz == 0 || self.ct == 0 {
            return Err(format!("{what}: cell counts must be positive"));
        }
        let cells = ((self.cz * refine) as f64).powi(2 * n as i32) * (self.ct * refine) as f64;
        if cells > MAX_CELLS as f64 {
            return Err(format!("{what}: {cells:.3e} cells at n={n} exceeds the limit of {MAX_CELLS}"));
        }
        Ok(())
    }

    pub fn build(&self, n: usize) -> heislab::Result<heislab::means::Grid> {
        heislab::means::Grid::uniform(heislab::BoxRegion::uniform(n, self.lz, self.lt)?, self.cz, self.ct)
    }

    /// Spacing test used by the cube builder: the finest level must be
    /// resolved in z and in sqrt(t).
    fn resolves(&self, delta: f64, k_max: i32) -> bool {
        let fine = delta.powi(k_max);
        let hz = 2.0 * self.lz / self.cz as f64;
        let ht = 2.0 * self.lt / self.ct as f64;
        hz <= fine / 2.0 && ht.sqrt() <= fine / 2.0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaguerreCfg {
    pub n: Option<usize>,
    pub psi0_k_max: usize,
    /// Envelope parameters; defaults to `{0, 1, n - 1}`.
    pub envelope_deltas: Option<Vec<f64>>,
    pub envelope_k_max: usize,
    pub envelope_samples: usize,
    pub envelope_refine: usize,
    pub envelope_growth_tol: f64,
    pub scan_deltas: Vec<f64>,
    pub scan_lambda_min: f64,
    pub scan_lambda_max: f64,
    pub scan_points: usize,
    pub scan_k_max: usize,
    pub slope_tol: f64,
    pub ident_alphas: Vec<f64>,
    pub ident_betas: Vec<f64>,
    pub ident_ks: Vec<usize>,
    pub ident_ts: Vec<f64>,
    pub ident_tol: f64,
    pub mass_tol: f64,
    pub transform_tol: f64,
    pub derivative_tol: f64,
}

impl Default for LaguerreCfg {
    fn default() -> Self {
        LaguerreCfg {
            n: None,
            psi0_k_max: 50,
            envelope_deltas: None,
            envelope_k_max: 500,
            envelope_samples: 2000,
            envelope_refine: 4,
            envelope_growth_tol: 0.01,
            scan_deltas: vec![0.0, 0.5, 1.0, 2.0],
            scan_lambda_min: 10.0,
            scan_lambda_max: 1e4,
            scan_points: 13,
            scan_k_max: 20_000,
            slope_tol: 0.15,
            ident_alphas: vec![0.0, 0.5, 2.0],
            ident_betas: vec![0.5, 1.0, 3.0],
            ident_ks: vec![0, 3, 10],
            ident_ts: vec![0.5, 1.0, 2.0],
            ident_tol: 1e-8,
            mass_tol: 1e-8,
            transform_tol: 1e-6,
            derivative_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeansCfg {
    pub n: Option<usize>,
    pub radii: Vec<f64>,
    pub points: usize,
    pub point_scale: f64,
    /// Circle nodes (n = 1, default 256) or phases per angle of the S^3
    /// rule (n = 2, default 48).
    pub sphere_nodes: Option<usize>,
    /// Gauss-Legendre nodes in `|w_1|^2` for the S^3 rule.
    pub s3_u_nodes: usize,
    pub k_max: usize,
    pub lambda: Option<f64>,
    pub n_lambda: usize,
    pub tail_tol: f64,
    pub rel_tol: f64,
    pub dilation_radii: Vec<f64>,
    pub dilation_tol: f64,
    /// Step of the Richardson difference for the derivative route.
    pub fd_step: f64,
}

impl Default for MeansCfg {
    fn default() -> Self {
        MeansCfg {
            n: None,
            radii: vec![0.5, 1.0, 2.0],
            points: 10,
            point_scale: 0.8,
            sphere_nodes: None,
            s3_u_nodes: 24,
            k_max: 2_000_000,
            lambda: None,
            n_lambda: 160,
            tail_tol: 1e-11,
            rel_tol: 1e-3,
            dilation_radii: vec![0.5, 2.0],
            dilation_tol: 1e-3,
            fd_step: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuityCfg {
    pub n: Option<usize>,
    pub grid: GridSpec,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// Direction of the translations; scaled to `2^{-j}`.
    pub direction: Vec<f64>,
    pub j_min: i32,
    pub j_max: i32,
    pub sphere_nodes: usize,
    pub s3_u_nodes: usize,
    pub min_slope: f64,
}

impl Default for ContinuityCfg {
    fn default() -> Self {
        ContinuityCfg {
            n: None,
            grid: GridSpec { lz: 3.5, lt: 4.0, cz: 8, ct: 10 },
            p: 2.0,
            q: 2.0,
            r: 1.0,
            direction: vec![0.8, 0.6],
            j_min: 1,
            j_max: 6,
            sphere_nodes: 8,
            s3_u_nodes: 4,
            min_slope: 0.8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DyadicCfg {
    pub n: Option<usize>,
    pub grid: GridSpec,
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub systems: usize,
    pub balls: usize,
    /// Balls smaller than this many cells are not drawn.
    pub min_ball_cells: usize,
    pub dump_cubes: bool,
}

impl Default for DyadicCfg {
    fn default() -> Self {
        DyadicCfg {
            n: None,
            grid: GridSpec { lz: 0.03, lt: 0.002, cz: 60, ct: 160 },
            delta: 0.01,
            k_min: -1,
            k_max: 1,
            systems: 3,
            balls: 100,
            min_ball_cells: 4,
            dump_cubes: true,
        }
    }
}

/// Sparse settings for one dimension.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseRun {
    pub n: usize,
    pub grid: GridSpec,
    pub k_min: i32,
    pub k_max: i32,
    /// Nodes per angle of the sphere rule (circle for n = 1, S^3 phases for n = 2).
    pub sphere_nodes: usize,
    pub s3_u_nodes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparseCfg {
    pub runs: Vec<SparseRun>,
    pub delta: f64,
    pub systems: usize,
    /// Level offset and radius factor of the localized means.
    pub cell_offset: i32,
    pub radius_scale: f64,
    /// Barycentric weights of the `(1/p, 1/q)` points inside the lacunary
    /// sparse triangle.
    pub points: Vec<[i64; 3]>,
    pub lac_ratio: f64,
    pub j_min: i32,
    pub j_max: i32,
    pub max_depth: usize,
    /// Refinement factor for the stability check; 1 disables it.
    pub refine: usize,
    pub stability_tol: f64,
    /// Pairs run through the domination comparison.
    pub domination_ids: Vec<String>,
    /// Radius nodes per decade of the full operator.
    pub full_r_nodes: usize,
}

impl Default for SparseCfg {
    fn default() -> Self {
        SparseCfg {
            runs: vec![
                SparseRun { n: 1, grid: GridSpec { lz: 0.5, lt: 0.25, cz: 16, ct: 32 }, k_min: -1, k_max: 1, sphere_nodes: 64, s3_u_nodes: 4 },
                SparseRun { n: 2, grid: GridSpec { lz: 1.0, lt: 1.0, cz: 8, ct: 16 }, k_min: -1, k_max: 0, sphere_nodes: 8, s3_u_nodes: 4 },
            ],
            delta: 0.25,
            systems: 2,
            cell_offset: 1,
            radius_scale: 0.1,
            points: vec![[1, 1, 1], [2, 1, 1], [1, 2, 1]],
            lac_ratio: 0.5,
            j_min: -1,
            j_max: 4,
            max_depth: 10,
            refine: 2,
            stability_tol: 0.2,
            domination_ids: vec!["balls".into(), "two-bump".into()],
            full_r_nodes: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsCfg {
    pub grid: GridSpec,
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub systems: usize,
    /// `(p, p0, q0)` triples.
    pub exponents: Vec<[f64; 3]>,
    pub max_depth: usize,
}

impl Default for WeightsCfg {
    fn default() -> Self {
        WeightsCfg {
            grid: GridSpec { lz: 0.5, lt: 0.25, cz: 16, ct: 32 },
            delta: 0.25,
            k_min: -1,
            k_max: 1,
            systems: 2,
            exponents: vec![[2.0, 1.2, 1.1], [1.5, 1.1, 1.2], [3.0, 1.5, 1.0], [1.8, 1.0, 1.5]],
            max_depth: 10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionsCfg {
    pub n: Option<usize>,
    pub per_edge: usize,
    /// Range of n for the inclusion checks.
    pub n_max: u32,
}

impl Default for RegionsCfg {
    fn default() -> Self {
        RegionsCfg { n: None, per_edge: 20, n_max: 10 }
    }
}

pub const SUITES: [&str; 8] =
    ["laguerre-verify", "means-compare", "continuity", "grid-build", "sparse-verify", "full-verify", "weights-verify", "regions"];

fn check_n(n: usize, what: &str) -> Result<(), String> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(format!("{what}: n must be 1 or 2, got {n}"))
    }
}

fn positive(x: f64, what: &str) -> Result<(), String> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(format!("{what} must be positive, got {x}"))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Fills in dimension defaults and the seed override.
    pub fn resolve(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.general.seed = s;
        }
        let g = self.general.n;
        self.laguerre.n = g.or(self.laguerre.n).or(Some(1));
        self.means.n = g.or(self.means.n).or(Some(1));
        if self.means.sphere_nodes.is_none() {
            self.means.sphere_nodes = Some(if self.means.n == Some(1) { 256 } else { 48 });
        }
        self.continuity.n = g.or(self.continuity.n).or(Some(2));
        self.dyadic.n = g.or(self.dyadic.n).or(Some(1));
        self.regions.n = g.or(self.regions.n).or(Some(2));
        if let Some(n) = g {
            self.sparse.runs.retain(|r| r.n == n);
        }
        let n = self.laguerre.n.unwrap_or(1) as f64;
        if self.laguerre.envelope_deltas.is_none() {
            let mut d = vec![0.0, 1.0];
            if n - 1.0 != 0.0 && n - 1.0 != 1.0 {
                d.push(n - 1.0);
            }
            self.laguerre.envelope_deltas = Some(d);
        }
    }

    /// Checks the parts of the configuration the suite will use.
    pub fn validate(&self, suite: &str) -> Result<(), String> {
        if !SUITES.contains(&suite) {
            return Err(format!("unknown suite {suite:?}; expected one of {}", SUITES.join(", ")));
        }
        match suite {
            "laguerre-verify" => {
                let c = &self.laguerre;
                check_n(c.n.unwrap_or(1), "laguerre")?;
                if c.envelope_k_max == 0 || c.envelope_samples < 2 || c.envelope_refine == 0 {
                    return Err("laguerre: envelope needs k_max >= 1, samples >= 2, refine >= 1".into());
                }
                if c.envelope_deltas.iter().flatten().chain(&c.scan_deltas).any(|&d| !(d >= 0.0)) {
                    return Err("laguerre: envelope and scan deltas must be nonnegative".into());
                }
                if !(c.scan_lambda_min > 0.0 && c.scan_lambda_max > c.scan_lambda_min && c.scan_points >= 2) {
                    return Err("laguerre: scan needs 0 < lambda_min < lambda_max and two points".into());
                }
                if c.ident_alphas.iter().any(|&a| !(a > -1.0)) || c.ident_betas.iter().chain(&c.ident_ts).any(|&b| !(b > 0.0)) {
                    return Err("laguerre: ident needs alpha > -1 and beta, t > 0".into());
                }
                for (x, w) in [
                    (c.envelope_growth_tol, "envelope_growth_tol"),
                    (c.slope_tol, "slope_tol"),
                    (c.ident_tol, "ident_tol"),
                    (c.mass_tol, "mass_tol"),
                    (c.transform_tol, "transform_tol"),
                    (c.derivative_tol, "derivative_tol"),
                ] {
                    positive(x, w)?;
                }
            }
            "means-compare" => {
                let c = &self.means;
                check_n(c.n.unwrap_or(1), "means")?;
                if c.radii.iter().chain(&c.dilation_radii).any(|&r| !(r > 0.0)) {
                    return Err("means: radii must be positive".into());
                }
                if c.points == 0 || c.sphere_nodes.unwrap_or(0) < 2 || c.s3_u_nodes == 0 || c.n_lambda < 4 || c.k_max == 0 {
                    return Err("means: points, node counts and k_max must be positive".into());
                }
                positive(c.rel_tol, "means.rel_tol")?;
                positive(c.dilation_tol, "means.dilation_tol")?;
                positive(c.fd_step, "means.fd_step")?;
                positive(c.tail_tol, "means.tail_tol")?;
                positive(c.point_scale, "means.point_scale")?;
            }
            "continuity" => {
                let c = &self.continuity;
                let n = c.n.unwrap_or(2);
                check_n(n, "continuity")?;
                c.grid.check("continuity.grid", n, 1)?;
                if !(c.p >= 1.0 && c.q >= 1.0 && c.r > 0.0) {
                    return Err("continuity: need p, q >= 1 and r > 0".into());
                }
                if c.direction.is_empty() || c.direction.len() > 2 * n || c.direction.iter().all(|&v| v == 0.0) {
                    return Err(format!("continuity: direction needs 1..={} entries, not all zero", 2 * n));
                }
                if c.j_min < 0 || c.j_max < c.j_min + 1 {
                    return Err("continuity: need 0 <= j_min < j_max so that |y| <= 1".into());
                }
                if c.sphere_nodes < 2 || c.s3_u_nodes == 0 {
                    return Err("continuity: sphere rule too small".into());
                }
            }
            "grid-build" => {
                let c = &self.dyadic;
                check_n(c.n.unwrap_or(1), "dyadic")?;
                c.grid.check("dyadic.grid", c.n.unwrap_or(1), 1)?;
                if !(c.delta > 0.0 && c.delta <= 1.0 / 96.0) {
                    return Err(format!("dyadic: delta must lie in (0, 1/96], got {}", c.delta));
                }
                if c.k_max < c.k_min || c.systems == 0 {
                    return Err("dyadic: need k_min <= k_max and at least one system".into());
                }
                if !c.grid.resolves(c.delta, c.k_max) {
                    return Err(format!("dyadic: grid too coarse for level {} at delta {}", c.k_max, c.delta));
                }
            }
            "sparse-verify" | "full-verify" => {
                let c = &self.sparse;
                if c.runs.is_empty() {
                    return Err("sparse: no runs for the selected dimension".into());
                }
                if !(c.delta > 0.0 && c.delta <= 0.25) {
                    return Err(format!("sparse: delta must lie in (0, 1/4], got {}", c.delta));
                }
                for r in &c.runs {
                    check_n(r.n, "sparse")?;
                    r.grid.check("sparse.grid", r.n, c.refine.max(1))?;
                    if r.k_max < r.k_min {
                        return Err("sparse: need k_min <= k_max".into());
                    }
                    if !r.grid.resolves(c.delta, r.k_max) {
                        return Err(format!("sparse: n={} grid too coarse for level {}", r.n, r.k_max));
                    }
                    if r.sphere_nodes < 2 || r.s3_u_nodes == 0 {
                        return Err("sparse: sphere rule too small".into());
                    }
                }
                if c.systems == 0 || c.points.is_empty() || c.refine == 0 || c.full_r_nodes == 0 {
                    return Err("sparse: systems, points, refine and full_r_nodes must be positive".into());
                }
                if c.points.iter().any(|w| w.iter().any(|&x| x <= 0)) {
                    return Err("sparse: barycentric weights must be positive integers (interior points)".into());
                }
                if !(c.lac_ratio > 0.0 && c.lac_ratio < 1.0) || c.j_max < c.j_min {
                    return Err("sparse: need lac_ratio in (0,1) and j_min <= j_max".into());
                }
                positive(c.radius_scale, "sparse.radius_scale")?;
                positive(c.stability_tol, "sparse.stability_tol")?;
            }
            "weights-verify" => {
                let c = &self.weights;
                c.grid.check("weights.grid", 1, 1)?;
                if !(c.delta > 0.0 && c.delta <= 0.25) || c.k_max < c.k_min || c.systems == 0 {
                    return Err("weights: need delta in (0, 1/4], k_min <= k_max, systems >= 1".into());
                }
                if !c.grid.resolves(c.delta, c.k_max) {
                    return Err("weights: grid too coarse".into());
                }
                for &[p, p0, q0] in &c.exponents {
                    let qc = if q0 == 1.0 { f64::INFINITY } else { q0 / (q0 - 1.0) };
                    if !(p0 >= 1.0 && q0 >= 1.0 && p0 < p && p < qc) {
                        return Err(format!("weights: need 1 <= p0 < p < q0' for ({p}, {p0}, {q0})"));
                    }
                }
            }
            "regions" => {
                let n = self.regions.n.unwrap_or(2);
                if n == 0 || self.regions.n_max < 2 || self.regions.per_edge == 0 {
                    return Err("regions: need n >= 1, n_max >= 2, per_edge >= 1".into());
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let mut c = RunConfig::parse("").unwrap();
        c.resolve(None);
        for s in SUITES {
            c.validate(s).unwrap();
        }
        assert_eq!(c.laguerre.envelope_deltas.as_deref(), Some(&[0.0, 1.0][..]));
        assert_eq!(c.continuity.n, Some(2));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("[general]\nbogus = 1\n").is_err());
        let mut c = RunConfig::parse("[dyadic]\ndelta = 0.02\n").unwrap();
        c.resolve(None);
        assert!(c.validate("grid-build").unwrap_err().contains("1/96"));
        let mut c = RunConfig::parse("[general]\nn = 3\n").unwrap();
        c.resolve(Some(4));
        assert_eq!(c.general.seed, 4);
        assert!(c.validate("means-compare").is_err());
        assert!(c.validate("sparse-verify").is_err());
        assert!(c.validate("nope").is_err());
        let mut c = RunConfig::parse("[dyadic]\ngrid = { lz = 0.03, lt = 0.002, cz = 10, ct = 160 }\n").unwrap();
        c.resolve(None);
        assert!(c.validate("grid-build").unwrap_err().contains("coarse"));
        // the default dyadic grid has 60^4 * 160 cells at n = 2
        let mut c = RunConfig::parse("[general]\nn = 2\n").unwrap();
        c.resolve(None);
        assert!(c.validate("grid-build").unwrap_err().contains("exceeds"));
        assert!(c.validate("sparse-verify").is_ok());
    }

    #[test]
    fn general_n_overrides() {
        let mut c = RunConfig::parse("[general]\nn = 2\n").unwrap();
        c.resolve(None);
        assert_eq!(c.means.n, Some(2));
        assert_eq!(c.sparse.runs.len(), 1);
        assert_eq!(c.laguerre.envelope_deltas.as_deref(), Some(&[0.0, 1.0][..]));
    }
}

//! The verification suites. Each one records assertions and writes its
//! tables into the report directory.

use crate::config::{RunConfig, SparseRun};
use crate::report::{num, Report};
use heislab::corpus::{analytic_pairs, gaussian_corpus, sample_points, sparse_pairs, FgPair};
use heislab::dyadic::{build_systems, build_systems_relaxed, BuildSpec, CubeRef, DyadicSystems};
use heislab::func::GaussianBump;
use heislab::laguerre::{certify_envelope, certify_envelope_on, envelope_radii, loglog_slope, psi, refine_radii, uniform_bound_scan};
use heislab::means::{
    continuity_ratio, mean_value, quadrature_spherical_mean, undilate_at, Grid, Localization, SampledField, SphereRule,
};
use heislab::quad::{adaptive, adaptive_real_line, cosine_transform_half_line};
use heislab::regions::{ExponentTriangle, TriangleKind, Q};
use heislab::sparse::{
    build_all_families, carleson_check, check_level_set_lemma, cz_stopping, domination_against, lacunary_pairing, linearize,
    linearize_full, localizable_cubes, lorentz_norm, lorentz_rearrangement, proba_constant, proba_constant_numeric,
    stopping_cubes_brute, DominationConfig,
};
use heislab::spectral::{
    corollary_ident_check, k_beta_kernel, poisson_kernel, poisson_transform, q_kernel, spectral_derivative_mean,
    spectral_spherical_mean, SpectralTruncation,
};
use heislab::weights::{ap_char, bfp_check, rh_char, WeightField};
use heislab::{HeisError, HeisPoint};
use serde::Serialize;
use std::fmt;

#[derive(Debug)]
pub enum SuiteError {
    Lib(HeisError),
    Io(std::io::Error),
}

impl fmt::Display for SuiteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuiteError::Lib(e) => write!(f, "{e}"),
            SuiteError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<HeisError> for SuiteError {
    fn from(e: HeisError) -> Self {
        SuiteError::Lib(e)
    }
}

impl From<std::io::Error> for SuiteError {
    fn from(e: std::io::Error) -> Self {
        SuiteError::Io(e)
    }
}

type Out = Result<(), SuiteError>;

pub fn run(suite: &str, cfg: &RunConfig, rep: &mut Report) -> Out {
    match suite {
        "laguerre-verify" => laguerre(cfg, rep),
        "means-compare" => means_compare(cfg, rep),
        "continuity" => continuity(cfg, rep),
        "grid-build" => grid_build(cfg, rep),
        "sparse-verify" => sparse_verify(cfg, rep),
        "full-verify" => full_verify(cfg, rep),
        "weights-verify" => weights_verify(cfg, rep),
        "regions" => regions(cfg, rep),
        _ => unreachable!("suite names are validated first"),
    }
}

fn rule_for(n: usize, nodes: usize, u_nodes: usize) -> SphereRule {
    if n == 1 {
        SphereRule::circle(nodes)
    } else {
        SphereRule::s3(nodes, u_nodes)
    }
}

fn point_str(x: &HeisPoint) -> String {
    let c: Vec<String> = x.coords().iter().map(|v| num(*v)).collect();
    c.join(" ")
}

// ---------------------------------------------------------------- laguerre

fn laguerre(cfg: &RunConfig, rep: &mut Report) -> Out {
    let c = &cfg.laguerre;
    let deltas = c.envelope_deltas.clone().unwrap_or_default();

    let mut rows = Vec::new();
    let mut bad = 0;
    for &d in &deltas {
        for k in 0..=c.psi0_k_max {
            let v = psi(k, d, 0.0)?;
            bad += usize::from(v != 1.0);
            rows.push(vec![num(d), k.to_string(), num(v)]);
        }
    }
    rep.check("psi_k(0) = 1", bad == 0, format!("{} entries, {bad} off", rows.len()));
    rep.csv("psi0.csv", &["delta", "k", "value"], &rows)?;

    let mut rows = Vec::new();
    for &d in &deltas {
        let cert = certify_envelope(d, c.envelope_k_max, c.envelope_samples)?;
        let radii = refine_radii(&envelope_radii(c.envelope_k_max, c.envelope_samples), c.envelope_refine);
        let fine = certify_envelope_on(d, c.envelope_k_max, &radii, cert.gamma)?;
        let growth = fine.c_star / cert.c_star - 1.0;
        rep.check(
            format!("envelope delta={d}"),
            cert.c_star.is_finite() && fine.c_star.is_finite() && growth <= c.envelope_growth_tol,
            format!("C*={} refined={} growth={growth:.3e} gamma={}", cert.c_star, fine.c_star, cert.gamma),
        );
        rows.push(vec![
            num(d),
            c.envelope_k_max.to_string(),
            c.envelope_samples.to_string(),
            num(cert.gamma),
            num(cert.c_star),
            num(fine.c_star),
            num(growth),
            cert.worst_k.to_string(),
            num(cert.worst_r),
        ]);
    }
    rep.csv("envelopes.csv", &["delta", "k_max", "samples", "gamma", "c_star", "c_star_refined", "growth", "worst_k", "worst_r"], &rows)?;

    let (lo, hi) = (c.scan_lambda_min.ln(), c.scan_lambda_max.ln());
    let lambdas: Vec<f64> = (0..c.scan_points).map(|i| (lo + (hi - lo) * i as f64 / (c.scan_points - 1) as f64).exp()).collect();
    let mut rows = Vec::new();
    for &d in &c.scan_deltas {
        let scan: Vec<(f64, usize)> = lambdas.iter().map(|&l| uniform_bound_scan(d, l, c.scan_k_max)).collect::<Result<_, _>>()?;
        let sups: Vec<f64> = scan.iter().map(|s| s.0).collect();
        let slope = loglog_slope(&lambdas, &sups);
        let want = -(d + 1.0 / 3.0);
        let fitted = lambdas.iter().zip(&sups).map(|(l, s)| s * l.powf(d + 1.0 / 3.0)).fold(0.0, f64::max);
        rep.check(
            format!("uniform slope delta={d}"),
            (slope - want).abs() <= c.slope_tol,
            format!("slope {slope:.4} expected {want:.4} +- {}", c.slope_tol),
        );
        for (l, s) in lambdas.iter().zip(&scan) {
            rows.push(vec![num(d), num(*l), c.scan_k_max.to_string(), num(s.0), s.1.to_string(), num(fitted)]);
        }
    }
    rep.csv("uniform_scan.csv", &["delta", "lambda", "k_max", "sup", "k_at_sup", "fitted_c"], &rows)?;

    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut doubled_ok = true;
    for &a in &c.ident_alphas {
        for &b in &c.ident_betas {
            for &k in &c.ident_ks {
                for &t in &c.ident_ts {
                    let r = corollary_ident_check(a, b, k, t)?;
                    let err = (r.lhs - r.rhs).abs() / r.lhs.abs().max(1e-300);
                    let ratio = r.rhs_doubled() / r.lhs;
                    worst = worst.max(err);
                    if k == 0 {
                        let derr = (r.lhs - r.rhs_doubled()).abs() / r.lhs.abs();
                        doubled_ok &= (ratio - 2.0).abs() < 1e-6 && derr > c.ident_tol;
                    }
                    rows.push(vec![num(a), num(b), k.to_string(), num(t), num(r.lhs), num(r.rhs), num(err), num(ratio)]);
                }
            }
        }
    }
    rep.check("beta identity without factor 2", worst <= c.ident_tol, format!("worst relative error {worst:.3e}"));
    rep.check("beta identity with factor 2 fails by 2 at k=0", doubled_ok, "ratio rhs_doubled/lhs at k = 0");
    rep.csv("ident.csv", &["alpha", "beta", "k", "t", "lhs", "rhs", "rel_err", "doubled_ratio"], &rows)?;

    kernels(c, rep)
}

fn kernels(c: &crate::config::LaguerreCfg, rep: &mut Report) -> Out {
    let head = ["check", "a", "b", "c", "value", "expected", "error"];
    let mut rows = Vec::new();
    let mut worst_mass: f64 = 0.0;
    for &r in &[0.25, 1.0, 4.0] {
        let p = adaptive_real_line(|t| poisson_kernel(r, t).unwrap(), 1e-14, 1e-14).value;
        let q = adaptive_real_line(|t| q_kernel(r, t).unwrap(), 1e-14, 1e-14).value;
        worst_mass = worst_mass.max((p - 1.0).abs()).max((q - 1.0).abs());
        rows.push(vec!["mass_p".into(), num(r), String::new(), String::new(), num(p), "1".into(), num((p - 1.0).abs())]);
        rows.push(vec!["mass_q".into(), num(r), String::new(), String::new(), num(q), "1".into(), num((q - 1.0).abs())]);
    }
    for &b in &[0.5, 1.0, 2.5] {
        // t = s^{1/b} removes the singularity at the origin
        let top = 60f64.powf(b);
        let m = adaptive(|s| k_beta_kernel(b, s.powf(1.0 / b)).unwrap() * s.powf(1.0 / b - 1.0) / b, 0.0, top, 1e-14, 1e-14).value;
        worst_mass = worst_mass.max((m - 1.0).abs());
        rows.push(vec!["mass_k_beta".into(), num(b), String::new(), String::new(), num(m), "1".into(), num((m - 1.0).abs())]);
    }
    rep.check("kernel masses", worst_mass <= c.mass_tol, format!("worst |mass - 1| = {worst_mass:.3e}"));

    let mut worst_tr: f64 = 0.0;
    for i in 0..10 {
        let r = 0.1 * 100f64.powf(i as f64 / 9.0);
        for j in 0..10 {
            let lam = 2.0 * j as f64;
            let v = 2.0 * cosine_transform_half_line(|t| poisson_kernel(r, t).unwrap(), lam, 1e-12).value;
            let want = poisson_transform(r, lam);
            worst_tr = worst_tr.max((v - want).abs());
            rows.push(vec!["poisson_transform".into(), num(r), num(lam), String::new(), num(v), num(want), num((v - want).abs())]);
        }
    }
    rep.check("Poisson transform", worst_tr <= c.transform_tol, format!("worst abs error {worst_tr:.3e} on 10x10 (r, lambda)"));

    let mut worst_d: f64 = 0.0;
    let mut one_over_u: f64 = f64::INFINITY;
    for &a in &[0.5, 1.0] {
        for &u in &[0.5, 1.0, 2.0] {
            for &t in &[0.0, 0.3, 1.0] {
                let pu = |u: f64| poisson_kernel(u * u * a, t).unwrap();
                let h = 1e-3 * u;
                let d = |h: f64| (pu(u + h) - pu(u - h)) / (2.0 * h);
                let fd = (4.0 * d(0.5 * h) - d(h)) / 3.0;
                let s = u * u * a;
                let want = 2.0 / u * (poisson_kernel(s, t).unwrap() - q_kernel(s, t).unwrap());
                let err = (fd - want).abs() / want.abs().max(pu(u));
                worst_d = worst_d.max(err);
                let alt = 0.5 * want;
                if want != 0.0 {
                    one_over_u = one_over_u.min((fd - alt).abs() / want.abs());
                }
                rows.push(vec!["derivative".into(), num(a), num(u), num(t), num(fd), num(want), num(err)]);
            }
        }
    }
    rep.check("d/du p_{u^2 a} = (2/u)(p - q)", worst_d <= c.derivative_tol, format!("worst relative error {worst_d:.3e}"));
    rep.check("factor 1/u variant rejected", one_over_u > c.derivative_tol, format!("smallest relative error of 1/u form {one_over_u:.3e}"));
    Ok(rep.csv("kernels.csv", &head, &rows)?)
}

// ---------------------------------------------------------------- means

#[derive(Serialize)]
struct SpectralRecord {
    n: usize,
    corpus_id: usize,
    r: f64,
    point: Vec<f64>,
    k: usize,
    lambda: f64,
    value: f64,
    tail_estimate: f64,
    oracle_value: f64,
    rel_err: f64,
}

fn means_compare(cfg: &RunConfig, rep: &mut Report) -> Out {
    let c = &cfg.means;
    let n = c.n.unwrap_or(1);
    let corpus = gaussian_corpus(n);
    let points = sample_points(n, c.points, c.point_scale, cfg.general.seed);
    let rule = rule_for(n, c.sphere_nodes.unwrap_or(256), c.s3_u_nodes);
    let trunc = SpectralTruncation { k_max: c.k_max, lambda: c.lambda, n_lambda: c.n_lambda, tail_tol: c.tail_tol };

    let mut recs = Vec::new();
    let mut worst: f64 = 0.0;
    let mut flagged = 0;
    for (id, f) in corpus.iter().enumerate() {
        for &r in &c.radii {
            for x in &points {
                let q = quadrature_spherical_mean(f, r, x, &rule)?;
                let s = spectral_spherical_mean(f, r, x, &trunc)?;
                let rel = (s.value - q.value).abs() / q.value.abs();
                worst = worst.max(rel);
                flagged += usize::from(s.flagged || q.flagged);
                recs.push(SpectralRecord {
                    n,
                    corpus_id: id,
                    r,
                    point: x.coords(),
                    k: s.k_max_used,
                    lambda: s.lambda_cut,
                    value: s.value,
                    tail_estimate: s.tail_estimate,
                    oracle_value: q.value,
                    rel_err: rel,
                });
            }
        }
    }
    rep.check(
        "spectral vs quadrature",
        worst <= c.rel_tol && flagged == 0,
        format!("{} evaluations, worst relative error {worst:.3e}, {flagged} flagged", recs.len()),
    );
    let rows: Vec<Vec<String>> = recs
        .iter()
        .map(|r| {
            vec![
                r.corpus_id.to_string(),
                num(r.r),
                r.point.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" "),
                num(r.value),
                num(r.oracle_value),
                num(r.rel_err),
            ]
        })
        .collect();
    rep.csv("means_compare.csv", &["corpus_id", "r", "point", "spectral", "quadrature", "rel_err"], &rows)?;
    rep.json("spectral.json", &recs)?;

    // A_r f(x) = A_1 (f o delta_r)(delta_r^{-1} x); B_r carries an extra 1/r
    let mut rows = Vec::new();
    let (mut worst_a, mut worst_b): (f64, f64) = (0.0, 0.0);
    for (id, f) in corpus.iter().enumerate() {
        for &r in &c.dilation_radii {
            let fr = f.dilated(r);
            for x in &points {
                let y = undilate_at(r, x);
                let a_lhs = spectral_spherical_mean(f, r, x, &trunc)?.value;
                let a_rhs = quadrature_spherical_mean(&fr, 1.0, &y, &rule)?.value;
                let ea = (a_lhs - a_rhs).abs() / a_rhs.abs();
                worst_a = worst_a.max(ea);
                let b_lhs = spectral_derivative_mean(f, r, x, &trunc)?.value;
                let h = c.fd_step;
                let d = |h: f64| -> Result<f64, HeisError> {
                    Ok((quadrature_spherical_mean(&fr, 1.0 + h, &y, &rule)?.value - quadrature_spherical_mean(&fr, 1.0 - h, &y, &rule)?.value)
                        / (2.0 * h))
                };
                let b_rhs = (4.0 * d(0.5 * h)? - d(h)?) / 3.0 / r;
                // B vanishes where the mean is stationary; measure against the mean's size there
                let eb = (b_lhs - b_rhs).abs() / b_rhs.abs().max(a_rhs.abs());
                worst_b = worst_b.max(eb);
                rows.push(vec!["A".into(), id.to_string(), num(r), point_str(x), num(a_lhs), num(a_rhs), num(ea)]);
                rows.push(vec!["B".into(), id.to_string(), num(r), point_str(x), num(b_lhs), num(b_rhs), num(eb)]);
            }
        }
    }
    rep.check("dilation identity for A_r", worst_a <= c.dilation_tol, format!("worst relative error {worst_a:.3e}"));
    rep.check("dilation identity for B_r", worst_b <= c.dilation_tol, format!("worst relative error {worst_b:.3e}"));
    Ok(rep.csv("dilation.csv", &["operator", "corpus_id", "r", "point", "lhs", "rhs", "rel_err"], &rows)?)
}

// ---------------------------------------------------------------- continuity

fn continuity(cfg: &RunConfig, rep: &mut Report) -> Out {
    let c = &cfg.continuity;
    let n = c.n.unwrap_or(2);
    let grid = c.grid.build(n)?;
    let rule = rule_for(n, c.sphere_nodes, c.s3_u_nodes);
    let f = GaussianBump::centered(n, 1.0, 1.0, 1.0);
    let mut dir = vec![0.0; 2 * n];
    dir[..c.direction.len()].copy_from_slice(&c.direction);
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut sizes = Vec::new();
    let mut ratios = Vec::new();
    for j in c.j_min..=c.j_max {
        let s = 0.5f64.powi(j);
        let z: Vec<f64> = dir.iter().map(|v| v * s / norm).collect();
        let y = HeisPoint::new(&z, 0.0);
        ratios.push(continuity_ratio(&f, &y, c.p, c.q, c.r, &grid, &rule)?);
        sizes.push(s);
    }
    let slope = loglog_slope(&sizes, &ratios);
    rep.check("continuity slope", slope >= c.min_slope, format!("fitted slope {slope:.4}, minimum {}", c.min_slope));
    let rows: Vec<Vec<String>> = sizes.iter().zip(&ratios).map(|(s, r)| vec![num(*s), num(*r)]).collect();
    Ok(rep.csv("continuity.csv", &["y_norm", "ratio"], &rows)?)
}

// ---------------------------------------------------------------- grid-build

fn grid_build(cfg: &RunConfig, rep: &mut Report) -> Out {
    let c = &cfg.dyadic;
    let n = c.n.unwrap_or(1);
    let grid = c.grid.build(n)?;
    let sys = build_systems(&grid, c.delta, c.k_min, c.k_max, c.systems, cfg.general.seed)?;
    let props = sys.check_properties();
    rep.check(
        "cube invariants",
        props.passed(),
        format!(
            "{} cubes; partition {}, nesting {}, outer {}, inner {} violations",
            props.cubes_checked, props.partition_violations, props.nesting_violations, props.outer_violations, props.inner_violations
        ),
    );
    let balls = sys.check_covering_property(c.balls, c.min_ball_cells, cfg.general.seed);
    rep.check(
        "ball covering property",
        balls.failures.is_empty() && balls.tested == c.balls,
        format!("{} balls tested, {} failures", balls.tested, balls.failures.len()),
    );
    let mut rows = Vec::new();
    for (alpha, s) in sys.systems.iter().enumerate() {
        for k in sys.levels() {
            let cubes = sys.cubes_at(alpha, k);
            let cells: usize = cubes.iter().map(|&q| sys.cube(q).cells.len()).sum();
            rows.push(vec![alpha.to_string(), k.to_string(), cubes.len().to_string(), cells.to_string()]);
        }
        let _ = s;
    }
    rep.csv("levels.csv", &["system", "level", "cubes", "cells"], &rows)?;
    let ball_rows: Vec<Vec<String>> = balls
        .found
        .iter()
        .map(|(c, r, q)| vec![c.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" "), num(*r), q.alpha.to_string(), sys.cube(*q).level.to_string()])
        .collect();
    rep.csv("balls.csv", &["center", "radius", "system", "level"], &ball_rows)?;
    if c.dump_cubes {
        rep.json("cubes.json", &sys.records())?;
    }
    Ok(())
}

// ---------------------------------------------------------------- sparse

struct SparseSetup {
    n: usize,
    grid: Grid,
    sys: DyadicSystems,
    rule: SphereRule,
    loc: Localization,
    /// `(p, q)` strictly inside the lacunary sparse triangle.
    points: Vec<(f64, f64)>,
}

fn to_f(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn interior_points(kind: TriangleKind, n: usize, weights: &[[i64; 3]]) -> Result<Vec<(f64, f64)>, HeisError> {
    let tri = ExponentTriangle::new(kind, n as u32)?;
    weights
        .iter()
        .map(|w| {
            let s: i64 = w.iter().sum();
            let (a, b) = tri.barycentric([Q::new(w[0], s), Q::new(w[1], s), Q::new(w[2], s)])?;
            debug_assert!(tri.contains(a, b, true));
            Ok((1.0 / to_f(a), 1.0 / to_f(b)))
        })
        .collect()
}

fn sparse_setup(cfg: &RunConfig, run: &SparseRun, grid: Grid, candidates: Option<Grid>) -> Result<SparseSetup, HeisError> {
    let c = &cfg.sparse;
    let sys = build_systems_relaxed(
        &grid,
        &BuildSpec { delta: c.delta, k_min: run.k_min, k_max: run.k_max, systems: c.systems, seed: cfg.general.seed, candidates },
    )?;
    let loc = Localization::fitted(&sys, c.cell_offset, c.radius_scale);
    Ok(SparseSetup {
        n: run.n,
        grid,
        sys,
        rule: rule_for(run.n, run.sphere_nodes, run.s3_u_nodes),
        loc,
        points: interior_points(TriangleKind::S, run.n, &c.points)?,
    })
}

fn dom_cfg(cfg: &RunConfig, p: f64, q: f64) -> DominationConfig {
    let c = &cfg.sparse;
    DominationConfig { p, q, lac_ratio: c.lac_ratio, j_min: c.j_min, j_max: c.j_max, max_depth: c.max_depth }
}

fn sparse_verify(cfg: &RunConfig, rep: &mut Report) -> Out {
    let c = &cfg.sparse;
    let mut lin_rows = Vec::new();
    let mut cz_rows = Vec::new();
    let mut sp_rows = Vec::new();
    let mut dom_rows = Vec::new();
    for run in &c.runs {
        let st = sparse_setup(cfg, run, run.grid.build(run.n)?, None)?;
        let props = st.sys.check_properties();
        rep.check(
            format!("n={} relaxed cube invariants (i)-(iii)", st.n),
            props.partition_violations == 0 && props.nesting_violations == 0,
            format!("{} cubes; partition {}, nesting {}", props.cubes_checked, props.partition_violations, props.nesting_violations),
        );
        let pairs = sparse_pairs(&st.grid, cfg.general.seed);
        let (mut lin_ok, mut cz_ok, mut sp_ok) = (true, true, true);
        let ncell = st.grid.len();
        for pr in &pairs {
            for alpha in 0..st.sys.systems.len() {
                let cubes = localizable_cubes(&st.sys, alpha, &st.loc);
                let lin = linearize(&pr.f, &cubes, &st.sys, &st.loc, &st.rule)?;
                let (bd, ua, cs) = (lin.b_disjoint(ncell), lin.unions_agree(ncell), lin.covers_support());
                let (l, r) = lin.half_sup_pairing(&st.sys, &pr.g);
                let half = l <= r * (1.0 + 1e-12);
                lin_ok &= bd && ua && cs && half;
                let e_cells: usize = lin.e.iter().map(|e| e.len()).sum();
                lin_rows.push(vec![
                    st.n.to_string(),
                    pr.id.clone(),
                    alpha.to_string(),
                    cubes.len().to_string(),
                    e_cells.to_string(),
                    bd.to_string(),
                    ua.to_string(),
                    cs.to_string(),
                    num(l),
                    num(r),
                ]);
                for top in st.sys.cubes_at(alpha, st.sys.k_min) {
                    for &(p, _) in &st.points {
                        let avg = st.sys.cube_average(&pr.f.values, top, p)?;
                        let got = cz_stopping(&pr.f.values, top, p, 2.0, &st.sys)?;
                        let brute = stopping_cubes_brute(&st.sys, top, |q: CubeRef| st.sys.cube_average(&pr.f.values, q, p).unwrap() > 2.0 * avg);
                        let eq = got == brute;
                        cz_ok &= eq;
                        cz_rows.push(vec![st.n.to_string(), pr.id.clone(), alpha.to_string(), top.id.to_string(), num(p), got.len().to_string(), eq.to_string()]);
                    }
                }
            }
            for &(p, q) in &st.points {
                for (alpha, fam) in build_all_families(&pr.f.values, &pr.g, p, q, c.max_depth, &st.sys)?.iter().enumerate() {
                    let r = fam.check(&st.sys);
                    sp_ok &= r.passed(0.5);
                    sp_rows.push(vec![
                        st.n.to_string(),
                        pr.id.clone(),
                        num(p),
                        num(q),
                        alpha.to_string(),
                        fam.len().to_string(),
                        r.disjoint.to_string(),
                        r.subsets_inside.to_string(),
                        num(r.min_ratio),
                    ]);
                }
            }
        }
        rep.check(format!("n={} linearization sets", st.n), lin_ok, format!("{} pairs: B_Q disjoint, unions agree, support covered, half-sup pairing", pairs.len()));
        rep.check(format!("n={} CZ stopping cubes match brute force", st.n), cz_ok, "every top cube, every p");
        rep.check(format!("n={} families are 1/2-sparse", st.n), sp_ok, "disjoint E_S with |E_S| > |S|/2");

        // domination and its stability under refinement
        let fine = if c.refine > 1 {
            let g = st.grid.refined(c.refine);
            Some(sparse_setup(cfg, run, g, Some(st.grid.clone()))?)
        } else {
            None
        };
        let fine_pairs = fine.as_ref().map(|f| analytic_pairs(&f.grid));
        for id in &c.domination_ids {
            let Some(pr) = pairs.iter().find(|p| &p.id == id) else {
                rep.check(format!("n={} domination pair {id}", st.n), false, "unknown corpus id");
                continue;
            };
            let coarse = domination_rows(cfg, &st, pr, &mut dom_rows)?;
            if let (Some(fs), Some(fp)) = (&fine, &fine_pairs) {
                let fpr = fp.iter().find(|p| &p.id == id).expect("analytic ids are shared");
                let refined = domination_rows(cfg, fs, fpr, &mut dom_rows)?;
                for ((p, q), (a, b)) in st.points.iter().zip(coarse.iter().zip(&refined)) {
                    let dev = b / a - 1.0;
                    rep.check(
                        format!("n={} {id} p={p:.4} q={q:.4} ratio stable", st.n),
                        a.is_finite() && b.is_finite() && *a > 0.0 && dev.abs() <= c.stability_tol,
                        format!("ratio {a:.5} -> {b:.5} ({:+.2}%)", 100.0 * dev),
                    );
                }
            } else {
                for ((p, q), a) in st.points.iter().zip(&coarse) {
                    rep.check(format!("n={} {id} p={p:.4} q={q:.4} ratio finite", st.n), a.is_finite() && *a > 0.0, format!("ratio {a:.5}"));
                }
            }
        }
    }
    rep.csv("linearization.csv", &["n", "corpus_id", "system", "cubes", "e_cells", "b_disjoint", "unions_agree", "covers_support", "half_lhs", "half_rhs"], &lin_rows)?;
    rep.csv("cz.csv", &["n", "corpus_id", "system", "top", "p", "stopping_cubes", "matches_brute"], &cz_rows)?;
    rep.csv("sparsity.csv", &["n", "corpus_id", "p", "q", "system", "family_size", "disjoint", "subsets_inside", "min_ratio"], &sp_rows)?;
    Ok(rep.csv("domination.csv", &["n", "p", "q", "corpus_id", "cells", "lhs", "rhs", "ratio", "family_size", "max_depth"], &dom_rows)?)
}

fn domination_rows(cfg: &RunConfig, st: &SparseSetup, pr: &FgPair, rows: &mut Vec<Vec<String>>) -> Result<Vec<f64>, HeisError> {
    let c = &cfg.sparse;
    let lhs = lacunary_pairing(&pr.f, &pr.g, c.lac_ratio, c.j_min..=c.j_max, &st.rule)?;
    let mut out = Vec::new();
    for &(p, q) in &st.points {
        let r = domination_against(lhs, &pr.f.values, &pr.g, &st.sys, &dom_cfg(cfg, p, q))?;
        rows.push(vec![
            st.n.to_string(),
            num(p),
            num(q),
            pr.id.clone(),
            st.grid.len().to_string(),
            num(r.lhs),
            num(r.rhs),
            num(r.ratio),
            r.family_size.to_string(),
            r.max_depth.to_string(),
        ]);
        out.push(r.ratio);
    }
    Ok(out)
}

// ---------------------------------------------------------------- full

fn full_verify(cfg: &RunConfig, rep: &mut Report) -> Out {
    let c = &cfg.sparse;
    let m = c.full_r_nodes;
    let mut set_rows = Vec::new();
    let mut pw_rows = Vec::new();
    let mut dom_rows = Vec::new();
    for run in &c.runs {
        let st = sparse_setup(cfg, run, run.grid.build(run.n)?, None)?;
        let ncell = st.grid.len();
        let pairs = analytic_pairs(&st.grid);
        let ones = SampledField::constant(&st.grid, 1.0, heislab::means::Interp::Nearest);
        let (mut degenerate, mut dominates, mut sets, mut bounded) = (true, true, true, true);
        for pr in &pairs {
            for alpha in 0..st.sys.systems.len() {
                let cubes = localizable_cubes(&st.sys, alpha, &st.loc);
                let lac = linearize(&pr.f, &cubes, &st.sys, &st.loc, &st.rule)?;
                let one = linearize_full(&pr.f, &cubes, &st.sys, &st.loc, &st.rule, 1)?;
                let full = linearize_full(&pr.f, &cubes, &st.sys, &st.loc, &st.rule, m)?;
                let d = one.values == lac.values && one.e == lac.e;
                let dom = lac.values.iter().flatten().zip(full.values.iter().flatten()).all(|(a, b)| a <= b);
                let s = full.b_disjoint(ncell) && full.unions_agree(ncell) && full.covers_support();
                degenerate &= d;
                dominates &= dom;
                sets &= s;
                set_rows.push(vec![st.n.to_string(), pr.id.clone(), alpha.to_string(), cubes.len().to_string(), d.to_string(), dom.to_string(), s.to_string()]);
            }
        }
        for alpha in 0..st.sys.systems.len() {
            let cubes = localizable_cubes(&st.sys, alpha, &st.loc);
            let f1 = linearize_full(&ones, &cubes, &st.sys, &st.loc, &st.rule, m)?;
            bounded &= f1.values.iter().flatten().all(|&v| v <= 1.0 + 1e-12);
        }
        rep.check(format!("n={} one radius node is the lacunary case", st.n), degenerate, "values and E_Q identical");
        rep.check(format!("n={} full values dominate lacunary values", st.n), dominates, "every cube, every cell");
        rep.check(format!("n={} full linearization sets", st.n), sets, "B_Q disjoint, unions agree, support covered");
        rep.check(format!("n={} averages of 1 stay below 1", st.n), bounded, "f = 1");

        // pointwise: the lacunary radii are members of the finer geometric grid
        // built from the lacunary radii so those are members bit for bit;
        // Nearest sampling makes the means jump under one-ulp radius changes
        let fine_ratio = c.lac_ratio.powf(1.0 / m as f64);
        let lac_radii: Vec<f64> = (c.j_min..=c.j_max).map(|j| c.lac_ratio.powi(j)).collect();
        let fine_radii: Vec<f64> = lac_radii
            .iter()
            .enumerate()
            .flat_map(|(i, &r)| {
                let steps = if i + 1 == lac_radii.len() { 1 } else { m };
                (0..steps).map(move |k| r * fine_ratio.powi(k as i32))
            })
            .collect();
        let max_over = |f: &SampledField, radii: &[f64], x: &HeisPoint| radii.iter().map(|&r| mean_value(f, r, x, &st.rule).abs()).fold(0.0, f64::max);
        for pr in pairs.iter().filter(|p| c.domination_ids.contains(&p.id)) {
            let mut worst = f64::NEG_INFINITY;
            let mut lhs_full = 0.0;
            for cell in 0..ncell {
                let x = st.grid.center(cell);
                let a = max_over(&pr.f, &lac_radii, &x);
                let b = max_over(&pr.f, &fine_radii, &x);
                worst = worst.max(a - b * (1.0 + 1e-12));
                lhs_full += b * pr.g[cell];
            }
            lhs_full *= st.grid.cell_volume();
            rep.check(format!("n={} {} M_lac <= full maximal pointwise", st.n, pr.id), worst <= 0.0, format!("largest excess {worst:.3e}"));
            pw_rows.push(vec![st.n.to_string(), pr.id.clone(), num(worst)]);
            for (p, q) in interior_points(TriangleKind::F, st.n, &c.points)? {
                let r = domination_against(lhs_full, &pr.f.values, &pr.g, &st.sys, &dom_cfg(cfg, p, q))?;
                rep.check(format!("n={} {} full ratio finite at p={p:.4} q={q:.4}", st.n, pr.id), r.ratio.is_finite() && r.sparse_ok, format!("ratio {:.5}", r.ratio));
                dom_rows.push(vec![st.n.to_string(), num(p), num(q), pr.id.clone(), num(r.lhs), num(r.rhs), num(r.ratio), r.family_size.to_string(), r.max_depth.to_string()]);
            }
        }
    }
    rep.csv("full_linearization.csv", &["n", "corpus_id", "system", "cubes", "degenerate_ok", "dominates", "sets_ok"], &set_rows)?;
    rep.csv("full_pointwise.csv", &["n", "corpus_id", "largest_excess"], &pw_rows)?;
    Ok(rep.csv("full_domination.csv", &["n", "p", "q", "corpus_id", "lhs", "rhs", "ratio", "family_size", "max_depth"], &dom_rows)?)
}

// ---------------------------------------------------------------- weights

/// Round-off allowance in the weighted bound, whose equality cases occur.
const SLACK_ROUNDING: f64 = 1e-12;

fn weights_verify(cfg: &RunConfig, rep: &mut Report) -> Out {
    let c = &cfg.weights;
    let grid = c.grid.build(1)?;
    let sys = build_systems_relaxed(
        &grid,
        &BuildSpec { delta: c.delta, k_min: c.k_min, k_max: c.k_max, systems: c.systems, seed: cfg.general.seed, candidates: None },
    )?;
    let cubes = sys.all_cubes();
    let lz = c.grid.lz;
    let weights: Vec<(&str, WeightField)> = vec![
        ("one", WeightField::constant(&grid, 1.0)?),
        ("const-3.5", WeightField::constant(&grid, 3.5)?),
        ("checkerboard", WeightField::checkerboard(&grid, 1.0, 4.0, 0.5 * lz, 0.5 * c.grid.lt)?),
        ("koranyi-0.5", WeightField::koranyi_power(&grid, 0.5, 10.0)?),
        ("koranyi-neg-0.5", WeightField::koranyi_power(&grid, -0.5, 20.0)?),
        ("upper-half-floor", WeightField::indicator_plus_floor(&grid, 0.2, |x| x.t > 0.0)?),
    ];

    let mut rows = Vec::new();
    let (mut consts_ok, mut at_least_one, mut invariant) = (true, true, true);
    for (id, w) in &weights {
        let scaled = WeightField::from_values(&grid, w.values().iter().map(|v| 2.5 * v).collect())?;
        for &p in &[1.5, 2.0, 4.0] {
            let a = ap_char(w, p, &cubes, &sys)?;
            let r = rh_char(w, p, &cubes, &sys)?;
            if id.starts_with("one") || id.starts_with("const") {
                consts_ok &= a == 1.0 && r == 1.0;
            }
            at_least_one &= a >= 1.0 - 1e-12 && r >= 1.0 - 1e-12;
            let a2 = ap_char(&scaled, p, &cubes, &sys)?;
            let r2 = rh_char(&scaled, p, &cubes, &sys)?;
            invariant &= (a2 / a - 1.0).abs() <= 1e-12 && (r2 / r - 1.0).abs() <= 1e-12;
            rows.push(vec![id.to_string(), num(p), num(a), num(r)]);
        }
    }
    rep.check("constants have characteristics exactly 1", consts_ok, "A_p and RH_p");
    rep.check("characteristics are at least 1", at_least_one, "every weight, p in {1.5, 2, 4}");
    rep.check("characteristics are scale invariant", invariant, "w -> 2.5 w");
    rep.csv("characteristics.csv", &["weight_id", "p", "ap_char", "rh_char"], &rows)?;

    let pairs = sparse_pairs(&grid, cfg.general.seed);
    let mut rows = Vec::new();
    let mut worst = f64::INFINITY;
    let mut worst_at = String::new();
    for pr in &pairs {
        for &[p, p0, q0] in &c.exponents {
            let fams = build_all_families(&pr.f.values, &pr.g, p0, q0, c.max_depth, &sys)?;
            for (alpha, fam) in fams.iter().enumerate() {
                for (id, w) in &weights {
                    let b = bfp_check(fam, &pr.f.values, &pr.g, w, p, p0, q0, &sys)?;
                    if b.slack < worst {
                        worst = b.slack;
                        worst_at = format!("{id} {} system {alpha} p={p} p0={p0} q0={q0}", pr.id);
                    }
                    rows.push(vec![
                        id.to_string(),
                        pr.id.clone(),
                        alpha.to_string(),
                        num(p),
                        num(p0),
                        num(q0),
                        num(b.ap_char),
                        num(b.rh_char),
                        num(b.alpha),
                        num(b.lhs),
                        num(b.rhs),
                        num(b.slack),
                    ]);
                }
            }
        }
    }
    // f = g = 1 with a constant weight is an equality case of Hölder
    rep.check("weighted sparse bound slack >= 1", worst >= 1.0 - SLACK_ROUNDING, format!("smallest slack {worst} at {worst_at}"));
    rep.csv("weights.csv", &["weight_id", "corpus_id", "system", "p", "p0", "q0", "ap_char", "rh_char", "alpha", "lhs", "rhs", "slack"], &rows)?;

    lorentz_and_carleson(cfg, &sys, &pairs, rep)
}

fn lorentz_and_carleson(cfg: &RunConfig, sys: &DyadicSystems, pairs: &[FgPair], rep: &mut Report) -> Out {
    let n = sys.grid.len();
    let mu = vec![1.0 / n as f64; n];
    let mut rows = Vec::new();
    let (mut lemma_ok, mut forms_ok) = (true, true);
    for pr in pairs {
        for &r in &[1.5, 3.0] {
            let ls = check_level_set_lemma(&pr.f.values, &mu, r)?;
            let a = lorentz_norm(&pr.f.values, &mu, r)?;
            let b = lorentz_rearrangement(&pr.f.values, &mu, r)?;
            lemma_ok &= ls.holds;
            forms_ok &= (b - r * a).abs() <= 1e-9 * b.abs().max(1e-300);
            rows.push(vec![pr.id.clone(), num(r), num(ls.lhs), num(ls.rhs), ls.holds.to_string(), num(a), num(b)]);
        }
    }
    rep.check("level set lemma with constant 2", lemma_ok, "every pair, r in {1.5, 3}");
    rep.check("Lorentz forms differ by the factor r", forms_ok, "rearrangement = r * distribution form");
    rep.csv("lorentz.csv", &["corpus_id", "r", "level_lhs", "level_rhs", "holds", "lorentz_norm", "rearrangement"], &rows)?;

    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &r in &[1.2, 2.0, 3.0] {
        for &p in &[1.5, 2.5, 4.0, 8.0] {
            if p <= r {
                continue;
            }
            let a = proba_constant(r, p)?;
            let b = proba_constant_numeric(r, p)?;
            let e = (a - b).abs() / a;
            worst = worst.max(e);
            rows.push(vec![num(r), num(p), num(a), num(b), num(e)]);
        }
    }
    rep.check("probability-space constant matches closed form", worst <= 1e-8, format!("worst relative error {worst:.3e}"));
    rep.csv("proba_constant.csv", &["r", "p", "closed_form", "numeric", "rel_err"], &rows)?;

    let mut rows = Vec::new();
    let mut finite = true;
    for pr in pairs {
        for (alpha, fam) in build_all_families(&pr.f.values, &pr.g, 1.5, 2.0, cfg.weights.max_depth, sys)?.iter().enumerate() {
            let c = carleson_check(fam, &pr.g, 1.0, 2.0, sys)?;
            finite &= c.ratio.is_finite();
            rows.push(vec![pr.id.clone(), alpha.to_string(), fam.len().to_string(), num(c.lhs), num(c.rhs), num(c.ratio)]);
        }
    }
    rep.check("Carleson ratios finite", finite, format!("{} families", rows.len()));
    Ok(rep.csv("carleson.csv", &["corpus_id", "system", "family_size", "lhs", "rhs", "ratio"], &rows)?)
}

// ---------------------------------------------------------------- regions

fn regions(cfg: &RunConfig, rep: &mut Report) -> Out {
    let c = &cfg.regions;
    let n = c.n.unwrap_or(2) as u32;
    let mut vrows = Vec::new();
    let mut prows = Vec::new();
    for kind in TriangleKind::all() {
        let t = ExponentTriangle::new(kind, n)?;
        for (i, (a, b)) in t.vertices.iter().enumerate() {
            vrows.push(vec![kind.name().into(), n.to_string(), i.to_string(), a.to_string(), b.to_string(), num(to_f(*a)), num(to_f(*b))]);
        }
        for (i, (x, y)) in t.polyline(c.per_edge).iter().enumerate() {
            prows.push(vec![kind.name().into(), n.to_string(), i.to_string(), num(*x), num(*y)]);
        }
    }
    let m = n as i64;
    let sp = ExponentTriangle::new(TriangleKind::SPrime, n)?;
    let apex = (Q::new(3 * m + 1, 3 * m + 4), Q::new(3, 3 * m + 4));
    rep.check("S' apex vertex", sp.vertices.contains(&apex), format!("({}, {})", apex.0, apex.1));
    let s = ExponentTriangle::new(TriangleKind::S, n)?;
    let mut dual_ok = true;
    for v in sp.dual().vertices {
        dual_ok &= s.vertices.contains(&v);
    }
    rep.check("S is the dual of S'", dual_ok, "vertex sets agree");

    let mut ok = true;
    for k in 2..=6u32 {
        let kk = k as i64;
        ok &= ExponentTriangle::new(TriangleKind::S, k)?.contains(Q::new(kk, kk + 1), Q::new(kk, kk + 1), true);
    }
    rep.check("Euclidean vertex inside the lacunary sparse triangle", ok, "n = 2..6, strict");
    let mut ok = true;
    for k in 2..=c.n_max {
        ok &= ExponentTriangle::new(TriangleKind::FPrime, k)?.is_inside(&ExponentTriangle::new(TriangleKind::SPrime, k)?);
        ok &= ExponentTriangle::new(TriangleKind::F, k)?.is_inside(&ExponentTriangle::new(TriangleKind::S, k)?);
    }
    rep.check("full triangles inside lacunary triangles", ok, format!("n = 2..{}", c.n_max));
    rep.csv("regions.csv", &["triangle", "n", "vertex", "p_inv", "q_inv", "p_inv_f64", "q_inv_f64"], &vrows)?;
    Ok(rep.csv("region_polylines.csv", &["triangle", "n", "index", "p_inv", "q_inv"], &prows)?)
}

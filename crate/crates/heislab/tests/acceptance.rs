//! Acceptance criteria 1-11. Runs without the libtest harness so every
//! criterion prints one line, pass or fail; exits nonzero if any fails.

use heislab::corpus::{analytic_pairs, gaussian_corpus, sample_points, sparse_pairs, FgPair};
use heislab::dyadic::{build_systems, build_systems_relaxed, BuildSpec, CubeRef, DyadicSystems};
use heislab::func::GaussianBump;
use heislab::laguerre::{certify_envelope, certify_envelope_on, envelope_radii, loglog_slope, refine_radii, uniform_bound_scan};
use heislab::means::{
    continuity_ratio, quadrature_spherical_mean, undilate_at, Grid, Localization, SphereRule,
};
use heislab::quad::{adaptive, adaptive_real_line, cosine_transform_half_line};
use heislab::regions::{ExponentTriangle, TriangleKind, Q};
use heislab::sparse::{
    build_all_families, carleson_check, check_level_set_lemma, cz_stopping, domination_against, lacunary_pairing, linearize,
    localizable_cubes, proba_constant, proba_constant_numeric, stopping_cubes_brute, DominationConfig,
};
use heislab::spectral::{
    corollary_ident_check, k_beta_kernel, poisson_kernel, poisson_transform, q_kernel, spectral_derivative_mean,
    spectral_spherical_mean, SpectralTruncation,
};
use heislab::weights::{ap_char, bfp_check, rh_char, WeightField};
use heislab::{BoxRegion, HeisPoint, Result};
use std::time::Instant;

const SEED: u64 = 7;

const MEANS_REL_TOL: f64 = 1e-3;
const DILATION_REL_TOL: f64 = 1e-3;
const IDENT_TOL: f64 = 1e-8;
const ENVELOPE_GROWTH_TOL: f64 = 0.01;
const SLOPE_TOL: f64 = 0.15;
const MASS_TOL: f64 = 1e-8;
const TRANSFORM_TOL: f64 = 1e-6;
const DERIVATIVE_TOL: f64 = 1e-6;
const STABILITY_TOL: f64 = 0.20;
const CONTINUITY_MIN_SLOPE: f64 = 0.8;
const PROBA_TOL: f64 = 1e-8;
/// Hölder equality cases (constant f, g, w) land on slack 1 up to rounding.
const SLACK_ROUNDING: f64 = 1e-12;

type Outcome = Result<(bool, String)>;

fn grid(n: usize, lz: f64, lt: f64, cz: usize, ct: usize) -> Result<Grid> {
    Grid::uniform(BoxRegion::uniform(n, lz, lt)?, cz, ct)
}

fn rule_for(n: usize) -> SphereRule {
    if n == 1 {
        SphereRule::circle(256)
    } else {
        SphereRule::s3(48, 24)
    }
}

fn trunc() -> SpectralTruncation {
    SpectralTruncation::default()
}

fn c1_cross_route() -> Outcome {
    let corpus = gaussian_corpus(1);
    let points = sample_points(1, 10, 0.8, SEED);
    let rule = rule_for(1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for f in &corpus {
        for &r in &[0.5, 1.0, 2.0] {
            for x in &points {
                let q = quadrature_spherical_mean(f, r, x, &rule)?;
                let s = spectral_spherical_mean(f, r, x, &trunc())?;
                worst = worst.max((s.value - q.value).abs() / q.value.abs());
                count += 1;
            }
        }
    }
    Ok((corpus.len() >= 5 && worst <= MEANS_REL_TOL, format!("{count} evaluations, worst relative error {worst:.2e}")))
}

fn c2_dilation() -> Outcome {
    let corpus = gaussian_corpus(1);
    let points = sample_points(1, 10, 0.8, SEED);
    let rule = rule_for(1);
    let (mut wa, mut wb): (f64, f64) = (0.0, 0.0);
    for f in &corpus {
        for &r in &[0.5, 2.0] {
            let fr = f.dilated(r);
            for x in &points {
                let y = undilate_at(r, x);
                let a_lhs = spectral_spherical_mean(f, r, x, &trunc())?.value;
                let a_rhs = quadrature_spherical_mean(&fr, 1.0, &y, &rule)?.value;
                wa = wa.max((a_lhs - a_rhs).abs() / a_rhs.abs());
                let b_lhs = spectral_derivative_mean(f, r, x, &trunc())?.value;
                let d = |h: f64| -> Result<f64> {
                    Ok((quadrature_spherical_mean(&fr, 1.0 + h, &y, &rule)?.value - quadrature_spherical_mean(&fr, 1.0 - h, &y, &rule)?.value)
                        / (2.0 * h))
                };
                let b_rhs = (4.0 * d(0.5e-3)? - d(1e-3)?) / 3.0 / r;
                wb = wb.max((b_lhs - b_rhs).abs() / b_rhs.abs().max(a_rhs.abs()));
            }
        }
    }
    Ok((wa <= DILATION_REL_TOL && wb <= DILATION_REL_TOL, format!("A worst {wa:.2e}, B worst {wb:.2e}")))
}

fn c3_ident() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ratio_dev: f64 = 0.0;
    let mut doubled_fails = true;
    for &a in &[0.0, 0.5, 2.0] {
        for &b in &[0.5, 1.0, 3.0] {
            for &k in &[0usize, 3, 10] {
                for &t in &[0.5, 1.0, 2.0] {
                    let r = corollary_ident_check(a, b, k, t)?;
                    worst = worst.max((r.lhs - r.rhs).abs() / r.lhs.abs());
                    if k == 0 {
                        ratio_dev = ratio_dev.max((r.rhs_doubled() / r.lhs - 2.0).abs());
                        doubled_fails &= (r.lhs - r.rhs_doubled()).abs() / r.lhs.abs() > IDENT_TOL;
                    }
                }
            }
        }
    }
    Ok((
        worst <= IDENT_TOL && doubled_fails && ratio_dev < 1e-6,
        format!("worst relative error {worst:.2e}; doubled variant off by ratio 2 (max deviation {ratio_dev:.1e})"),
    ))
}

fn c4_envelopes() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    // delta in {0, 1, n-1} for n = 1, 2
    for &d in &[0.0, 1.0] {
        let cert = certify_envelope(d, 500, 2000)?;
        let radii = refine_radii(&envelope_radii(500, 2000), 4);
        let fine = certify_envelope_on(d, 500, &radii, cert.gamma)?;
        let growth = fine.c_star / cert.c_star - 1.0;
        ok &= cert.c_star.is_finite() && fine.c_star.is_finite() && growth <= ENVELOPE_GROWTH_TOL;
        parts.push(format!("C*({d})={:.5} growth {growth:.1e}", cert.c_star));
    }
    let lambdas: Vec<f64> = (0..13).map(|i| 10f64 * 1000f64.powf(i as f64 / 12.0)).collect();
    for &d in &[0.0, 0.5, 1.0, 2.0] {
        let sups: Vec<f64> = lambdas.iter().map(|&l| uniform_bound_scan(d, l, 20000).map(|s| s.0)).collect::<Result<_>>()?;
        let slope = loglog_slope(&lambdas, &sups);
        ok &= (slope + d + 1.0 / 3.0).abs() <= SLOPE_TOL;
        parts.push(format!("slope({d})={slope:.3}"));
    }
    Ok((ok, parts.join(", ")))
}

fn c5_kernels() -> Outcome {
    let mut mass: f64 = 0.0;
    for &r in &[0.25, 1.0, 4.0] {
        mass = mass.max((adaptive_real_line(|t| poisson_kernel(r, t).unwrap(), 1e-14, 1e-14).value - 1.0).abs());
        mass = mass.max((adaptive_real_line(|t| q_kernel(r, t).unwrap(), 1e-14, 1e-14).value - 1.0).abs());
    }
    for &b in &[0.5, 1.0, 2.5] {
        let top = 60f64.powf(b);
        let m = adaptive(|s| k_beta_kernel(b, s.powf(1.0 / b)).unwrap() * s.powf(1.0 / b - 1.0) / b, 0.0, top, 1e-14, 1e-14).value;
        mass = mass.max((m - 1.0).abs());
    }
    let mut tr: f64 = 0.0;
    for i in 0..10 {
        let r = 0.1 * 100f64.powf(i as f64 / 9.0);
        for j in 0..10 {
            let lam = 2.0 * j as f64;
            let v = 2.0 * cosine_transform_half_line(|t| poisson_kernel(r, t).unwrap(), lam, 1e-12).value;
            tr = tr.max((v - poisson_transform(r, lam)).abs());
        }
    }
    let mut der: f64 = 0.0;
    for &a in &[0.5, 1.0] {
        for &u in &[0.5, 1.0, 2.0] {
            for &t in &[0.0, 0.3, 1.0] {
                let pu = |u: f64| poisson_kernel(u * u * a, t).unwrap();
                let h = 1e-3 * u;
                let d = |h: f64| (pu(u + h) - pu(u - h)) / (2.0 * h);
                let fd = (4.0 * d(0.5 * h) - d(h)) / 3.0;
                let s = u * u * a;
                let want = 2.0 / u * (poisson_kernel(s, t).unwrap() - q_kernel(s, t).unwrap());
                der = der.max((fd - want).abs() / want.abs().max(pu(u)));
            }
        }
    }
    Ok((
        mass <= MASS_TOL && tr <= TRANSFORM_TOL && der <= DERIVATIVE_TOL,
        format!("mass {mass:.1e}, transform {tr:.1e}, derivative {der:.1e}"),
    ))
}

fn c6_dyadic() -> Outcome {
    let g = grid(1, 0.03, 0.002, 60, 160)?;
    let sys = build_systems(&g, 0.01, -1, 1, 3, SEED)?;
    let props = sys.check_properties();
    let balls = sys.check_covering_property(100, 4, SEED);
    Ok((
        props.passed() && balls.tested == 100 && balls.failures.is_empty(),
        format!(
            "{} cubes, {} violations; {} balls, {} failures",
            props.cubes_checked,
            props.partition_violations + props.nesting_violations + props.outer_violations + props.inner_violations,
            balls.tested,
            balls.failures.len()
        ),
    ))
}

struct Setup {
    grid: Grid,
    sys: DyadicSystems,
    rule: SphereRule,
    loc: Localization,
    points: Vec<(f64, f64)>,
}

fn interior_points(n: usize) -> Result<Vec<(f64, f64)>> {
    let tri = ExponentTriangle::new(TriangleKind::S, n as u32)?;
    [[1, 1, 1], [2, 1, 1], [1, 2, 1]]
        .iter()
        .map(|w: &[i64; 3]| {
            let s: i64 = w.iter().sum();
            let (a, b) = tri.barycentric([Q::new(w[0], s), Q::new(w[1], s), Q::new(w[2], s)])?;
            assert!(tri.contains(a, b, true));
            Ok((*a.denom() as f64 / *a.numer() as f64, *b.denom() as f64 / *b.numer() as f64))
        })
        .collect()
}

fn setup(n: usize, grid: Grid, levels: (i32, i32), candidates: Option<Grid>) -> Result<Setup> {
    let sys = build_systems_relaxed(&grid, &BuildSpec { delta: 0.25, k_min: levels.0, k_max: levels.1, systems: 2, seed: SEED, candidates })?;
    let loc = Localization::fitted(&sys, 1, 0.1);
    let rule = if n == 1 { SphereRule::circle(64) } else { SphereRule::s3(8, 4) };
    Ok(Setup { grid, sys, rule, loc, points: interior_points(n)? })
}

fn n1_setup() -> Result<Setup> {
    setup(1, grid(1, 0.5, 0.25, 16, 32)?, (-1, 1), None)
}

fn c7_sparse_exact() -> Outcome {
    let st = n1_setup()?;
    let pairs = sparse_pairs(&st.grid, SEED);
    let ids = pairs.iter().map(|p| p.id.as_str()).collect::<Vec<_>>();
    let has_shapes = ids.contains(&"balls") && ids.contains(&"two-bump");
    let ncell = st.grid.len();
    let (mut lin, mut cz, mut sparse) = (0usize, 0usize, 0usize);
    for pr in &pairs {
        for alpha in 0..st.sys.systems.len() {
            let cubes = localizable_cubes(&st.sys, alpha, &st.loc);
            let l = linearize(&pr.f, &cubes, &st.sys, &st.loc, &st.rule)?;
            if !(l.b_disjoint(ncell) && l.unions_agree(ncell) && l.covers_support()) {
                lin += 1;
            }
            for top in st.sys.cubes_at(alpha, st.sys.k_min) {
                for &(p, _) in &st.points {
                    let avg = st.sys.cube_average(&pr.f.values, top, p)?;
                    let got = cz_stopping(&pr.f.values, top, p, 2.0, &st.sys)?;
                    let brute = stopping_cubes_brute(&st.sys, top, |q: CubeRef| st.sys.cube_average(&pr.f.values, q, p).unwrap() > 2.0 * avg);
                    cz += usize::from(got != brute);
                }
            }
        }
        for &(p, q) in &st.points {
            for fam in build_all_families(&pr.f.values, &pr.g, p, q, 10, &st.sys)? {
                sparse += usize::from(!fam.check(&st.sys).passed(0.5));
            }
        }
    }
    Ok((
        pairs.len() >= 10 && has_shapes && lin + cz + sparse == 0,
        format!("{} pairs; failures: linearization {lin}, CZ {cz}, sparsity {sparse}", pairs.len()),
    ))
}

fn ratios(st: &Setup, pr: &FgPair) -> Result<Vec<f64>> {
    // the left side does not depend on (p, q)
    let lhs = lacunary_pairing(&pr.f, &pr.g, 0.5, -1..=4, &st.rule)?;
    st.points
        .iter()
        .map(|&(p, q)| {
            let cfg = DominationConfig { p, q, lac_ratio: 0.5, j_min: -1, j_max: 4, max_depth: 10 };
            Ok(domination_against(lhs, &pr.f.values, &pr.g, &st.sys, &cfg)?.ratio)
        })
        .collect()
}

fn c8_domination() -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let runs = [(1usize, grid(1, 0.5, 0.25, 16, 32)?, (-1, 1)), (2, grid(2, 1.0, 1.0, 8, 16)?, (-1, 0))];
    for (n, g, levels) in runs {
        let coarse = setup(n, g.clone(), levels, None)?;
        let fine = setup(n, g.refined(2), levels, Some(g))?;
        let (cp, fp) = (analytic_pairs(&coarse.grid), analytic_pairs(&fine.grid));
        for id in ["balls", "two-bump"] {
            let a = ratios(&coarse, cp.iter().find(|p| p.id == id).unwrap())?;
            let b = ratios(&fine, fp.iter().find(|p| p.id == id).unwrap())?;
            for (x, y) in a.iter().zip(&b) {
                let dev = y / x - 1.0;
                ok &= x.is_finite() && y.is_finite() && *x > 0.0 && dev.abs() <= STABILITY_TOL;
                worst = worst.max(dev.abs());
                count += 1;
            }
        }
    }
    Ok((ok, format!("{count} ratios for n = 1, 2, largest change under refinement {:.2}%", 100.0 * worst)))
}

fn c9_continuity() -> Outcome {
    let g = grid(2, 3.5, 4.0, 8, 10)?;
    let rule = SphereRule::s3(8, 4);
    let f = GaussianBump::centered(2, 1.0, 1.0, 1.0);
    let mut sizes = Vec::new();
    let mut rs = Vec::new();
    for j in 1..=6 {
        let s = 0.5f64.powi(j);
        let y = HeisPoint::new(&[0.8 * s, 0.6 * s, 0.0, 0.0], 0.0);
        rs.push(continuity_ratio(&f, &y, 2.0, 2.0, 1.0, &g, &rule)?);
        sizes.push(s);
    }
    let slope = loglog_slope(&sizes, &rs);
    Ok((slope >= CONTINUITY_MIN_SLOPE, format!("fitted slope {slope:.4}")))
}

fn c10_weights() -> Outcome {
    let g = grid(1, 0.5, 0.25, 16, 32)?;
    let sys = build_systems_relaxed(&g, &BuildSpec { delta: 0.25, k_min: -1, k_max: 1, systems: 2, seed: SEED, candidates: None })?;
    let cubes = sys.all_cubes();
    let pairs = sparse_pairs(&g, SEED);
    let mu = vec![1.0 / g.len() as f64; g.len()];

    let mut level_ok = true;
    for pr in &pairs {
        for &r in &[1.5, 3.0] {
            level_ok &= check_level_set_lemma(&pr.f.values, &mu, r)?.holds;
        }
    }
    let mut proba: f64 = 0.0;
    for &r in &[1.2, 2.0, 3.0] {
        for &p in &[1.5, 2.5, 4.0, 8.0] {
            if p > r {
                let a = proba_constant(r, p)?;
                proba = proba.max((a - proba_constant_numeric(r, p)?).abs() / a);
            }
        }
    }
    let mut carleson = true;
    for pr in &pairs {
        for fam in build_all_families(&pr.f.values, &pr.g, 1.5, 2.0, 10, &sys)? {
            carleson &= carleson_check(&fam, &pr.g, 1.0, 2.0, &sys)?.ratio.is_finite();
        }
    }
    let weights = vec![
        WeightField::constant(&g, 1.0)?,
        WeightField::constant(&g, 3.5)?,
        WeightField::checkerboard(&g, 1.0, 4.0, 0.25, 0.125)?,
        WeightField::koranyi_power(&g, 0.5, 10.0)?,
        WeightField::koranyi_power(&g, -0.5, 20.0)?,
        WeightField::indicator_plus_floor(&g, 0.2, |x| x.t > 0.0)?,
    ];
    let mut consts = true;
    for w in &weights[..2] {
        for &p in &[1.5, 2.0, 4.0] {
            consts &= ap_char(w, p, &cubes, &sys)? == 1.0 && rh_char(w, p, &cubes, &sys)? == 1.0;
        }
    }
    let mut slack = f64::INFINITY;
    for pr in &pairs {
        for &[p, p0, q0] in &[[2.0, 1.2, 1.1], [1.5, 1.1, 1.2], [3.0, 1.5, 1.0], [1.8, 1.0, 1.5]] {
            for fam in build_all_families(&pr.f.values, &pr.g, p0, q0, 10, &sys)? {
                for w in &weights {
                    slack = slack.min(bfp_check(&fam, &pr.f.values, &pr.g, w, p, p0, q0, &sys)?.slack);
                }
            }
        }
    }
    Ok((
        level_ok && proba <= PROBA_TOL && carleson && consts && slack >= 1.0 - SLACK_ROUNDING,
        format!("level set {level_ok}, proba error {proba:.1e}, Carleson finite {carleson}, constants exact {consts}, min slack {slack:.6}"),
    ))
}

fn c11_regions() -> Outcome {
    let mut ok = true;
    for n in 1..=10u32 {
        let m = n as i64;
        let has = |k: TriangleKind, v: [(i64, i64, i64, i64); 3]| -> Result<bool> {
            let t = ExponentTriangle::new(k, n)?;
            Ok(v.iter().all(|&(a, b, c, d)| t.vertices.contains(&(Q::new(a, b), Q::new(c, d)))))
        };
        ok &= has(TriangleKind::SPrime, [(0, 1, 0, 1), (1, 1, 1, 1), (3 * m + 1, 3 * m + 4, 3, 3 * m + 4)])?;
        ok &= has(TriangleKind::S, [(0, 1, 1, 1), (1, 1, 0, 1), (3 * m + 1, 3 * m + 4, 3 * m + 1, 3 * m + 4)])?;
        ok &= has(TriangleKind::FPrime, [(0, 1, 0, 1), (2 * m - 1, 2 * m, 2 * m - 1, 2 * m), (3 * m + 1, 3 * m + 7, 6, 3 * m + 7)])?;
        ok &= has(TriangleKind::F, [(0, 1, 1, 1), (2 * m - 1, 2 * m, 1, 2 * m), (3 * m + 1, 3 * m + 7, 3 * m + 1, 3 * m + 7)])?;
    }
    ok &= ExponentTriangle::new(TriangleKind::SPrime, 2)?.vertices.contains(&(Q::new(7, 10), Q::new(3, 10)));
    for n in 2..=6u32 {
        let m = n as i64;
        ok &= ExponentTriangle::new(TriangleKind::S, n)?.contains(Q::new(m, m + 1), Q::new(m, m + 1), true);
    }
    for n in 2..=10u32 {
        ok &= ExponentTriangle::new(TriangleKind::FPrime, n)?.is_inside(&ExponentTriangle::new(TriangleKind::SPrime, n)?);
    }
    Ok((ok, "vertices for n = 1..10, Euclidean vertex for n = 2..6, F' inside S' for n = 2..10".into()))
}

fn main() {
    // cargo test passes harness flags such as --list; answer them like libtest
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("cross-route spherical mean", c1_cross_route),
        ("dilation identities", c2_dilation),
        ("beta identity without factor 2", c3_ident),
        ("Laguerre envelopes and uniform rate", c4_envelopes),
        ("kernels", c5_kernels),
        ("dyadic systems", c6_dyadic),
        ("sparse machinery exactness", c7_sparse_exact),
        ("lacunary sparse domination stability", c8_domination),
        ("continuity rate", c9_continuity),
        ("Lorentz, Carleson and weights", c10_weights),
        ("exponent regions", c11_regions),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!("criterion {}: {} {name}: {detail} [{:.1}s]", i + 1, if ok { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

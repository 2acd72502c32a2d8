use heislab::corpus::{analytic_pairs, gaussian_corpus, sample_points};
use heislab::dyadic::{build_systems_relaxed, BuildSpec};
use heislab::heis::{dist_left, group_mul, koranyi_norm};
use heislab::laguerre::psi;
use heislab::means::{lacunary_max, quadrature_spherical_mean, Grid, Localization, SphereRule};
use heislab::sparse::{build_all_families, lacunary_pairing, linearize, localizable_cubes, sparse_form};
use heislab::spectral::{spectral_spherical_mean, SpectralTruncation};
use heislab::{BoxRegion, HeisPoint};
use proptest::prelude::*;

fn pt(c: [f64; 3]) -> HeisPoint {
    HeisPoint::new(&c[..2], c[2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn left_invariant_distance(a in prop::array::uniform3(-2.0..2.0f64), b in prop::array::uniform3(-2.0..2.0f64), y in prop::array::uniform3(-2.0..2.0f64)) {
        let (a, b, y) = (pt(a), pt(b), pt(y));
        let d = dist_left(&a, &b);
        let d2 = dist_left(&group_mul(&y, &a).unwrap(), &group_mul(&y, &b).unwrap());
        prop_assert!((d - d2).abs() <= 1e-9 * (1.0 + d));
        prop_assert!((koranyi_norm(&a.inv()) - koranyi_norm(&a)).abs() <= 1e-12 * (1.0 + koranyi_norm(&a)));
    }
}

#[test]
fn spectral_and_quadrature_agree_in_two_complex_dimensions() {
    let f = &gaussian_corpus(2)[1];
    let rule = SphereRule::s3(48, 24);
    for x in sample_points(2, 3, 0.8, 11) {
        let q = quadrature_spherical_mean(f, 1.0, &x, &rule).unwrap().value;
        let s = spectral_spherical_mean(f, 1.0, &x, &SpectralTruncation::default()).unwrap();
        assert!(!s.flagged);
        assert!((s.value - q).abs() <= 1e-3 * q.abs(), "{} vs {q}", s.value);
    }
}

#[test]
fn laguerre_functions_start_at_one() {
    for d in [0.0, 1.0, 2.5] {
        for k in [0, 1, 7, 40] {
            assert_eq!(psi(k, d, 0.0).unwrap(), 1.0);
        }
    }
}

#[test]
fn sparse_pipeline_on_a_small_grid() {
    let grid = Grid::uniform(BoxRegion::uniform(1, 0.5, 0.25).unwrap(), 12, 32).unwrap();
    let sys = build_systems_relaxed(&grid, &BuildSpec { delta: 0.25, k_min: -1, k_max: 1, systems: 2, seed: 3, candidates: None }).unwrap();
    let loc = Localization::fitted(&sys, 1, 0.1);
    let rule = SphereRule::circle(48);
    let pairs = analytic_pairs(&grid);
    let pr = pairs.iter().find(|p| p.id == "balls").unwrap();

    for alpha in 0..sys.systems.len() {
        let lin = linearize(&pr.f, &localizable_cubes(&sys, alpha, &loc), &sys, &loc, &rule).unwrap();
        assert!(lin.b_disjoint(grid.len()) && lin.unions_agree(grid.len()) && lin.covers_support());
    }

    let lhs = lacunary_pairing(&pr.f, &pr.g, 0.5, -1..=4, &rule).unwrap();
    assert!(lhs > 0.0);
    // pairing is the grid sum of the pointwise maximal function against g
    let direct: f64 = (0..grid.len())
        .map(|c| lacunary_max(&pr.f, 0.5, -1..=4, &grid.center(c), &rule).unwrap() * pr.g[c])
        .sum::<f64>()
        * grid.cell_volume();
    assert!((lhs - direct).abs() <= 1e-12 * lhs);

    let fams = build_all_families(&pr.f.values, &pr.g, 2.0, 2.0, 10, &sys).unwrap();
    assert_eq!(fams.len(), 2);
    for fam in &fams {
        assert!(fam.check(&sys).passed(0.5));
        assert!(sparse_form(fam, &pr.f.values, &pr.g, 2.0, 2.0, &sys).unwrap().is_finite());
    }
}

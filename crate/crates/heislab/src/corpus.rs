//! Deterministic test inputs: Gaussian bumps, sample points and `(f, g)`
//! pairs on a grid for the sparse machinery.

use crate::func::GaussianBump;
use crate::heis::{dist_left, HeisPoint};
use crate::means::{Grid, Interp, SampledField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Five or more Gaussian bumps with varied widths, amplitudes and centres.
pub fn gaussian_corpus(n: usize) -> Vec<GaussianBump> {
    let params = [
        (1.0, 1.0, 1.0, 0.0, 0.0),
        (0.7, 2.0, 0.5, 0.3, 0.1),
        (1.5, 0.6, 1.8, -0.4, 0.3),
        (2.0, 1.3, 0.9, 0.1, -0.5),
        (0.4, 0.9, 3.0, -0.2, -0.2),
        (1.2, 3.0, 1.2, 0.5, 0.4),
    ];
    params
        .iter()
        .map(|&(amp, a, b, cz, ct)| {
            let z: Vec<f64> = (0..2 * n).map(|i| if i % 2 == 0 { cz } else { -0.5 * cz }).collect();
            GaussianBump::new(amp, a, b, &HeisPoint::new(&z, ct))
        })
        .collect()
}

/// `count` points with coordinates uniform in `[-scale, scale]`.
pub fn sample_points(n: usize, count: usize, scale: f64, seed: u64) -> Vec<HeisPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-scale..=scale)).collect();
            HeisPoint::new(&z, rng.gen_range(-scale..=scale))
        })
        .collect()
}

/// A named `(f, g)` pair on a grid.
pub struct FgPair {
    pub id: String,
    pub f: SampledField,
    pub g: Vec<f64>,
    /// Defined from a formula, so it can be resampled on a finer grid.
    pub analytic: bool,
}

/// Point at fractions of the region half widths: `fz` on every z
/// coordinate with alternating sign, `ft` on `t`.
fn frac_point(grid: &Grid, fz: f64, ft: f64) -> HeisPoint {
    let hw = &grid.region.half_widths;
    let d = hw.len();
    let z: Vec<f64> = (0..d - 1).map(|i| if i % 2 == 0 { fz * hw[i] } else { -fz * hw[i] }).collect();
    HeisPoint::new(&z, ft * hw[d - 1])
}

fn scale(grid: &Grid) -> f64 {
    let hw = &grid.region.half_widths;
    hw[0].min(hw[hw.len() - 1].sqrt())
}

fn field(grid: &Grid, f: impl Fn(&HeisPoint) -> f64) -> Vec<f64> {
    (0..grid.len()).map(|c| f(&grid.center(c))).collect()
}

fn ball(c: &HeisPoint, r: f64) -> impl Fn(&HeisPoint) -> f64 + '_ {
    move |x| if dist_left(c, x) < r { 1.0 } else { 0.0 }
}

fn bump(c: &HeisPoint, r: f64, h: f64) -> impl Fn(&HeisPoint) -> f64 + '_ {
    move |x| {
        let d = dist_left(c, x) / r;
        h * (-d * d * d * d).exp()
    }
}

/// Formula-defined pairs: indicators of balls and half spaces, bumps and a
/// dyadic-valued function.
pub fn analytic_pairs(grid: &Grid) -> Vec<FgPair> {
    let s = scale(grid);
    let c1 = frac_point(grid, 0.2, 0.1);
    let c2 = frac_point(grid, -0.3, -0.2);
    let c3 = frac_point(grid, 0.45, -0.3);
    let mk = |id: &str, f: Vec<f64>, g: Vec<f64>| FgPair {
        id: id.into(),
        f: SampledField::new(grid.clone(), f, Interp::Nearest).expect("grid-sized field"),
        g,
        analytic: true,
    };
    let one = |_: &HeisPoint| 1.0;
    vec![
        mk("balls", field(grid, ball(&c1, 0.5 * s)), field(grid, ball(&c2, 0.6 * s))),
        mk("ball-one", field(grid, ball(&c1, 0.3 * s)), field(grid, one)),
        mk("same-ball", field(grid, ball(&c2, 0.5 * s)), field(grid, ball(&c2, 0.5 * s))),
        mk("half-spaces", field(grid, |x| if x.z[0] > 0.0 { 1.0 } else { 0.0 }), field(grid, |x| if x.t > 0.0 { 1.0 } else { 0.0 })),
        mk(
            "two-bump",
            field(grid, |x| bump(&c1, 0.25 * s, 4.0)(x) + bump(&c3, 0.2 * s, 3.0)(x)),
            field(grid, ball(&c2, 0.7 * s)),
        ),
        mk("bump-bump", field(grid, bump(&c2, 0.3 * s, 2.0)), field(grid, bump(&c1, 0.4 * s, 1.0))),
        mk("tall-bump", field(grid, bump(&c3, 0.15 * s, 20.0)), field(grid, one)),
        mk(
            "dyadic-levels",
            field(grid, |x| {
                let d = dist_left(&c1, x) / s;
                if d < 0.25 {
                    4.0
                } else if d < 0.5 {
                    2.0
                } else if d < 0.8 {
                    1.0
                } else {
                    0.0
                }
            }),
            field(grid, ball(&c2, 0.8 * s)),
        ),
    ]
}

/// [`analytic_pairs`] plus constants and seeded random fields.
pub fn sparse_pairs(grid: &Grid, seed: u64) -> Vec<FgPair> {
    let mut out = analytic_pairs(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rand_field = |lo: f64| (0..grid.len()).map(|_| lo + rng.gen::<f64>()).collect::<Vec<f64>>();
    let ones = vec![1.0; grid.len()];
    let r1 = rand_field(0.0);
    let r2 = rand_field(0.1);
    let r3 = rand_field(0.0);
    let s = scale(grid);
    let c = frac_point(grid, 0.0, 0.0);
    let ht = grid.region.half_widths[grid.region.half_widths.len() - 1];
    let slab: Vec<f64> = field(grid, |x| if x.t.abs() < 0.3 * ht { 1.0 } else { 0.0 });
    let tall: Vec<f64> = field(grid, |x| if dist_left(&c, x) < 0.2 * s { 50.0 } else { 0.01 });
    let mut push = |id: &str, f: Vec<f64>, g: Vec<f64>| {
        out.push(FgPair { id: id.into(), f: SampledField::new(grid.clone(), f, Interp::Nearest).expect("grid-sized field"), g, analytic: false })
    };
    push("constant", ones.clone(), ones.clone());
    push("random", r1, r2);
    push("slab-random", slab, r3);
    push("spike-floor", tall, ones);
    out
}

//! Heisenberg group arithmetic.
//!
//! Points are `(z, t)` with `z` in C^n stored as interleaved real pairs
//! `[x1, y1, x2, y2, ...]`. The group law is
//! `(z,t)(w,s) = (z + w, t + s + Im(z . conj w) / 2)`.

use crate::error::{domain, HeisError, Result};
use smallvec::SmallVec;

pub type Coords = SmallVec<[f64; 4]>;

#[derive(Clone, Debug, PartialEq)]
pub struct HeisPoint {
    pub z: Coords,
    pub t: f64,
}

impl HeisPoint {
    pub fn new(z: &[f64], t: f64) -> Self {
        assert!(z.len() % 2 == 0 && !z.is_empty(), "z must hold n >= 1 complex pairs");
        HeisPoint { z: Coords::from_slice(z), t }
    }

    pub fn identity(n: usize) -> Self {
        HeisPoint { z: SmallVec::from_elem(0.0, 2 * n), t: 0.0 }
    }

    /// Build from complex coordinates `(re, im)`.
    pub fn from_complex(z: &[(f64, f64)], t: f64) -> Self {
        let mut c = Coords::with_capacity(2 * z.len());
        for &(re, im) in z {
            c.push(re);
            c.push(im);
        }
        HeisPoint { z: c, t }
    }

    pub fn dim(&self) -> usize {
        self.z.len() / 2
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.z.iter().all(|v| v.is_finite())
    }

    pub fn z_norm_sq(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum()
    }

    /// Real coordinates `[z..., t]`.
    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.z.to_vec();
        v.push(self.t);
        v
    }

    pub fn from_coords(c: &[f64]) -> Self {
        let (z, t) = c.split_at(c.len() - 1);
        HeisPoint::new(z, t[0])
    }

    pub fn inv(&self) -> HeisPoint {
        HeisPoint { z: self.z.iter().map(|v| -v).collect(), t: -self.t }
    }

    /// Group product; panics on dimension mismatch. See [`group_mul`].
    pub fn mul(&self, other: &HeisPoint) -> HeisPoint {
        assert_eq!(self.z.len(), other.z.len(), "dimension mismatch");
        let mut z = Coords::with_capacity(self.z.len());
        for (a, b) in self.z.iter().zip(other.z.iter()) {
            z.push(a + b);
        }
        HeisPoint { z, t: self.t + other.t + 0.5 * im_dot(&self.z, &other.z) }
    }

    pub fn norm(&self) -> f64 {
        koranyi_norm(self)
    }
}

/// `Im(z . conj w)` for interleaved coordinates.
#[inline]
pub fn im_dot(z: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..z.len() / 2 {
        let (x, y) = (z[2 * j], z[2 * j + 1]);
        let (u, v) = (w[2 * j], w[2 * j + 1]);
        s += y * u - x * v;
    }
    s
}

pub fn group_mul(a: &HeisPoint, b: &HeisPoint) -> Result<HeisPoint> {
    if a.z.len() != b.z.len() {
        return Err(HeisError::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(a.mul(b))
}

pub fn group_inv(a: &HeisPoint) -> HeisPoint {
    a.inv()
}

/// Koranyi gauge `(|z|^4 + t^2)^{1/4}`.
pub fn koranyi_norm(a: &HeisPoint) -> f64 {
    let r2 = a.z_norm_sq();
    (r2 * r2 + a.t * a.t).sqrt().sqrt()
}

/// Left invariant distance `|x^{-1} y|`.
pub fn dist_left(x: &HeisPoint, y: &HeisPoint) -> f64 {
    // x^{-1} y = (w - z, s - t - Im(z . conj w)/2)
    assert_eq!(x.z.len(), y.z.len(), "dimension mismatch");
    let mut r2 = 0.0;
    for (a, b) in x.z.iter().zip(y.z.iter()) {
        r2 += (b - a) * (b - a);
    }
    let t = y.t - x.t - 0.5 * im_dot(&x.z, &y.z);
    (r2 * r2 + t * t).sqrt().sqrt()
}

pub fn dilate(r: f64, a: &HeisPoint) -> Result<HeisPoint> {
    if !(r > 0.0) {
        return domain(format!("dilation factor must be positive, got {r}"));
    }
    Ok(dilate_unchecked(r, a))
}

#[inline]
pub(crate) fn dilate_unchecked(r: f64, a: &HeisPoint) -> HeisPoint {
    HeisPoint { z: a.z.iter().map(|v| r * v).collect(), t: r * r * a.t }
}

/// Open Koranyi ball membership `|c^{-1} x| < radius`.
pub fn ball_contains(center: &HeisPoint, radius: f64, x: &HeisPoint) -> bool {
    dist_left(center, x) < radius
}

/// Axis-aligned box `[-L_i, L_i]` over the real coordinates `(z..., t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    pub half_widths: Vec<f64>,
}

impl BoxRegion {
    pub fn new(half_widths: Vec<f64>) -> Result<Self> {
        if half_widths.len() < 3 || half_widths.len() % 2 == 0 {
            return domain("box needs 2n + 1 half-widths");
        }
        if half_widths.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return domain("half-widths must be positive and finite");
        }
        Ok(BoxRegion { half_widths })
    }

    /// Box with half-width `lz` on every z coordinate and `lt` on t.
    pub fn uniform(n: usize, lz: f64, lt: f64) -> Result<Self> {
        let mut h = vec![lz; 2 * n];
        h.push(lt);
        BoxRegion::new(h)
    }

    pub fn dim(&self) -> usize {
        (self.half_widths.len() - 1) / 2
    }

    pub fn volume(&self) -> f64 {
        self.half_widths.iter().map(|h| 2.0 * h).product()
    }

    pub fn contains(&self, x: &HeisPoint) -> bool {
        let d = self.half_widths.len() - 1;
        x.z.iter().zip(&self.half_widths[..d]).all(|(v, h)| v.abs() <= *h)
            && x.t.abs() <= self.half_widths[d]
    }
}

/// Empirical quasi-triangle constant: max of `d(x,z) / (d(x,y) + d(y,z))`
/// over random triples drawn from a box.
pub fn quasi_triangle_constant(n: usize, samples: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pt = |rng: &mut rand_chacha::ChaCha8Rng| {
        let z: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        HeisPoint::new(&z, rng.gen_range(-1.0..1.0))
    };
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (x, y, z) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
        let lhs = dist_left(&x, &z);
        let rhs = dist_left(&x, &y) + dist_left(&y, &z);
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(n: usize) -> impl Strategy<Value = HeisPoint> {
        (prop::collection::vec(-3.0f64..3.0, 2 * n), -3.0f64..3.0)
            .prop_map(|(z, t)| HeisPoint::new(&z, t))
    }

    fn close(a: &HeisPoint, b: &HeisPoint, tol: f64) -> bool {
        a.coords().iter().zip(b.coords()).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
    }

    #[test]
    fn group_law_example() {
        let a = HeisPoint::from_complex(&[(1.0, 0.0)], 0.0);
        let b = HeisPoint::from_complex(&[(0.0, 1.0)], 0.0);
        let c = group_mul(&a, &b).unwrap();
        assert_eq!(c, HeisPoint::from_complex(&[(1.0, 1.0)], -0.5));
    }

    #[test]
    fn identity_and_mismatch() {
        let x = HeisPoint::new(&[0.3, -1.0], 2.0);
        assert_eq!(group_mul(&HeisPoint::identity(1), &x).unwrap(), x);
        let y = HeisPoint::identity(2);
        assert_eq!(group_mul(&x, &y), Err(HeisError::DimensionMismatch(1, 2)));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(group_inv(&HeisPoint::new(&[0.0, 0.0], 3.0)), HeisPoint::new(&[0.0, 0.0], -3.0));
        assert_eq!(group_inv(&HeisPoint::new(&[1.0, 2.0], 0.0)), HeisPoint::new(&[-1.0, -2.0], 0.0));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(koranyi_norm(&HeisPoint::new(&[0.0, 0.0], 4.0)), 2.0);
        assert!((koranyi_norm(&HeisPoint::new(&[3.0, 4.0], 0.0)) - 5.0).abs() < 1e-15);
        assert!((koranyi_norm(&HeisPoint::new(&[0.0, 0.0, 0.0, 0.0], -9.0)) - 3.0).abs() < 1e-15);
        assert_eq!(koranyi_norm(&HeisPoint::identity(2)), 0.0);
    }

    #[test]
    fn dilation_examples() {
        let a = HeisPoint::new(&[1.0, -2.0], 3.0);
        assert_eq!(dilate(1.0, &a).unwrap(), a);
        assert_eq!(dilate(2.0, &a).unwrap(), HeisPoint::new(&[2.0, -4.0], 12.0));
        assert!(dilate(0.0, &a).is_err());
        assert!(dilate(-1.0, &a).is_err());
    }

    #[test]
    fn ball_boundary_is_open() {
        let c = HeisPoint::new(&[0.5, 0.5], 0.25);
        assert!(ball_contains(&c, 1e-9, &c));
        let x = c.mul(&HeisPoint::new(&[0.0, 0.0], 4.0));
        assert!((dist_left(&c, &x) - 2.0).abs() < 1e-15);
        assert!(!ball_contains(&c, dist_left(&c, &x), &x));
    }

    #[test]
    fn quasi_triangle_is_measured() {
        // the gauge is a genuine metric for this group law, so the
        // measured constant should not exceed one
        let c1 = quasi_triangle_constant(1, 20000, 7);
        let c2 = quasi_triangle_constant(2, 20000, 7);
        assert!(c1 <= 1.0 + 1e-12 && c1 > 0.5, "{c1}");
        assert!(c2 <= 1.0 + 1e-12 && c2 > 0.5, "{c2}");
    }

    #[test]
    fn box_region() {
        let b = BoxRegion::uniform(1, 2.0, 4.0).unwrap();
        assert_eq!(b.volume(), 4.0 * 4.0 * 8.0);
        assert!(b.contains(&HeisPoint::new(&[2.0, -1.0], 3.9)));
        assert!(!b.contains(&HeisPoint::new(&[2.1, -1.0], 0.0)));
        assert!(BoxRegion::new(vec![1.0, 0.0, 1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn associativity(a in pt(2), b in pt(2), c in pt(2)) {
            let l = a.mul(&b).mul(&c);
            let r = a.mul(&b.mul(&c));
            prop_assert!(close(&l, &r, 1e-12));
        }

        #[test]
        fn inverse_axioms(a in pt(2)) {
            prop_assert!(close(&a.mul(&a.inv()), &HeisPoint::identity(2), 1e-15));
            prop_assert_eq!(a.inv().inv(), a);
        }

        #[test]
        fn left_invariance(a in pt(1), x in pt(1), y in pt(1)) {
            let d0 = dist_left(&x, &y);
            let d1 = dist_left(&a.mul(&x), &a.mul(&y));
            prop_assert!((d0 - d1).abs() <= 1e-12 * (1.0 + d0));
            prop_assert!(dist_left(&x, &x) == 0.0);
            prop_assert!((dist_left(&HeisPoint::identity(1), &y) - koranyi_norm(&y)).abs() < 1e-15);
        }

        #[test]
        fn homogeneity_and_automorphism(a in pt(2), b in pt(2), r in 0.05f64..20.0, s in 0.05f64..20.0) {
            let na = koranyi_norm(&a);
            prop_assert!((koranyi_norm(&dilate(r, &a).unwrap()) - r * na).abs() <= 1e-12 * r * na.max(1e-300));
            let l = dilate(r, &a.mul(&b)).unwrap();
            let rr = dilate(r, &a).unwrap().mul(&dilate(r, &b).unwrap());
            prop_assert!(close(&l, &rr, 1e-12));
            let c = dilate(r, &dilate(s, &a).unwrap()).unwrap();
            prop_assert!(close(&c, &dilate(r * s, &a).unwrap(), 1e-12));
        }

        #[test]
        fn ball_translation_covariance(a in pt(1), x in pt(1), rad in 0.1f64..3.0) {
            prop_assert_eq!(ball_contains(&a, rad, &x),
                            ball_contains(&HeisPoint::identity(1), rad, &a.inv().mul(&x)));
        }
    }
}

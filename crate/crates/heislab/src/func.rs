//! Functions on the group: the evaluation trait, closed-form Gaussian bumps
//! and translation/dilation wrappers.

use crate::heis::{dilate_unchecked, im_dot, HeisPoint};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub trait HeisFunction: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &HeisPoint) -> f64;

    /// Largest absolute value on the boundary of a compact sampling box, if
    /// the function is only known on such a box.
    fn boundary_mass(&self) -> f64 {
        0.0
    }

    /// Whether `x` lies inside the region where the function is known.
    fn known_at(&self, _x: &HeisPoint) -> bool {
        true
    }
}

/// `amp * exp(-a|z|^2 - b t^2)` left-translated to `center`, i.e.
/// `f(x) = f0(center^{-1} x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub amp: f64,
    pub a: f64,
    pub b: f64,
    pub center: HeisPointDef,
}

/// Serializable mirror of a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeisPointDef {
    pub z: Vec<f64>,
    pub t: f64,
}

impl From<&HeisPoint> for HeisPointDef {
    fn from(p: &HeisPoint) -> Self {
        HeisPointDef { z: p.z.to_vec(), t: p.t }
    }
}

impl From<&HeisPointDef> for HeisPoint {
    fn from(p: &HeisPointDef) -> Self {
        HeisPoint::new(&p.z, p.t)
    }
}

impl GaussianBump {
    pub fn new(amp: f64, a: f64, b: f64, center: &HeisPoint) -> Self {
        assert!(a > 0.0 && b > 0.0, "Gaussian widths must be positive");
        GaussianBump { amp, a, b, center: center.into() }
    }

    pub fn centered(n: usize, amp: f64, a: f64, b: f64) -> Self {
        GaussianBump::new(amp, a, b, &HeisPoint::identity(n))
    }

    pub fn center(&self) -> HeisPoint {
        (&self.center).into()
    }

    /// The centred profile `f0` evaluated at `p`.
    #[inline]
    pub fn profile(&self, p: &HeisPoint) -> f64 {
        self.amp * (-self.a * p.z_norm_sq() - self.b * p.t * p.t).exp()
    }

    /// `center^{-1} x`.
    #[inline]
    pub fn local(&self, x: &HeisPoint) -> HeisPoint {
        let c = &self.center;
        let mut z = x.z.clone();
        for (v, cv) in z.iter_mut().zip(&c.z) {
            *v -= cv;
        }
        HeisPoint { z, t: x.t - c.t - 0.5 * im_dot(&c.z, &x.z) }
    }

    /// `f(delta_r x)` is again a Gaussian bump.
    pub fn dilated(&self, r: f64) -> GaussianBump {
        let c = dilate_unchecked(1.0 / r, &self.center());
        GaussianBump::new(self.amp, self.a * r * r, self.b * r.powi(4), &c)
    }

    /// `f^lambda(z) = int e^{i lambda t} f(z,t) dt` in closed form.
    pub fn partial_ft(&self, lambda: f64, z: &[f64]) -> Complex64 {
        let c = &self.center;
        let r2: f64 = z.iter().zip(&c.z).map(|(a, b)| (a - b) * (a - b)).sum();
        let tau = c.t + 0.5 * im_dot(&c.z, z);
        let m = self.amp * (-self.a * r2).exp() * (std::f64::consts::PI / self.b).sqrt() * (-lambda * lambda / (4.0 * self.b)).exp();
        Complex64::from_polar(m, lambda * tau)
    }

    /// `int |f|^p` over the group.
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        let n = self.center.z.len() as f64 / 2.0;
        let pi = std::f64::consts::PI;
        self.amp.abs().powf(p) * (pi / (p * self.a)).powf(n) * (pi / (p * self.b)).sqrt()
    }
}

impl HeisFunction for GaussianBump {
    fn dim(&self) -> usize {
        self.center.z.len() / 2
    }

    fn eval(&self, x: &HeisPoint) -> f64 {
        self.profile(&self.local(x))
    }
}

/// Right translate `f(x y^{-1})`.
pub struct Translated<'a, F: HeisFunction + ?Sized> {
    pub f: &'a F,
    pub y_inv: HeisPoint,
}

impl<'a, F: HeisFunction + ?Sized> Translated<'a, F> {
    pub fn new(f: &'a F, y: &HeisPoint) -> Self {
        Translated { f, y_inv: y.inv() }
    }
}

impl<F: HeisFunction + ?Sized> HeisFunction for Translated<'_, F> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn eval(&self, x: &HeisPoint) -> f64 {
        self.f.eval(&x.mul(&self.y_inv))
    }
    fn boundary_mass(&self) -> f64 {
        self.f.boundary_mass()
    }
    fn known_at(&self, x: &HeisPoint) -> bool {
        self.f.known_at(&x.mul(&self.y_inv))
    }
}

/// Dilate `f(delta_r x)`.
pub struct Dilated<'a, F: HeisFunction + ?Sized> {
    pub f: &'a F,
    pub r: f64,
}

impl<F: HeisFunction + ?Sized> HeisFunction for Dilated<'_, F> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn eval(&self, x: &HeisPoint) -> f64 {
        self.f.eval(&dilate_unchecked(self.r, x))
    }
    fn boundary_mass(&self) -> f64 {
        self.f.boundary_mass()
    }
    fn known_at(&self, x: &HeisPoint) -> bool {
        self.f.known_at(&dilate_unchecked(self.r, x))
    }
}

/// A closure on the group.
pub struct FnField<G: Fn(&HeisPoint) -> f64 + Sync> {
    pub n: usize,
    pub g: G,
}

impl<G: Fn(&HeisPoint) -> f64 + Sync> HeisFunction for FnField<G> {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, x: &HeisPoint) -> f64 {
        (self.g)(x)
    }
}

/// Sum of functions.
pub struct Sum<'a> {
    pub parts: Vec<&'a dyn HeisFunction>,
}

impl HeisFunction for Sum<'_> {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }
    fn eval(&self, x: &HeisPoint) -> f64 {
        self.parts.iter().map(|f| f.eval(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heis::dilate;
    use crate::quad::{adaptive, gauss_legendre};

    fn bump() -> GaussianBump {
        GaussianBump::new(1.3, 0.8, 1.7, &HeisPoint::new(&[0.4, -0.3], 0.2))
    }

    #[test]
    fn left_translation_structure() {
        let g = bump();
        let c = g.center();
        let x = HeisPoint::new(&[0.1, 0.9], -0.5);
        assert!((g.eval(&c.mul(&x)) - g.profile(&x)).abs() < 1e-15);
        assert!((g.eval(&c) - 1.3).abs() < 1e-15);
    }

    #[test]
    fn dilated_matches_wrapper() {
        let g = bump();
        let d = g.dilated(1.7);
        let w = Dilated { f: &g, r: 1.7 };
        for x in [HeisPoint::new(&[0.1, 0.2], 0.3), HeisPoint::new(&[-0.3, 0.0], -0.1)] {
            assert!((d.eval(&x) - w.eval(&x)).abs() < 1e-14);
            assert!((w.eval(&x) - g.eval(&dilate(1.7, &x).unwrap())).abs() < 1e-15);
        }
    }

    #[test]
    fn partial_ft_against_quadrature() {
        let g = bump();
        let rule = gauss_legendre(200).mapped(-12.0, 12.0);
        for &lam in &[0.0, 0.7, -2.3, 5.0] {
            let z = [0.35, -0.1];
            let re = rule.integrate(|t| (lam * t).cos() * g.eval(&HeisPoint::new(&z, t)));
            let im = rule.integrate(|t| (lam * t).sin() * g.eval(&HeisPoint::new(&z, t)));
            let cf = g.partial_ft(lam, &z);
            assert!((cf.re - re).abs() < 1e-12 && (cf.im - im).abs() < 1e-12, "{lam}");
            // conjugate symmetry for a real function
            assert_eq!(g.partial_ft(-lam, &z), cf.conj());
        }
    }

    #[test]
    fn lp_norm_closed_form() {
        let g = GaussianBump::centered(1, 2.0, 1.5, 0.5);
        // int e^{-2 a |z|^2 - 2 b t^2} = (pi / 2a) sqrt(pi / 2b), times amp^2
        let want = 4.0 * std::f64::consts::PI / 3.0 * (std::f64::consts::PI).sqrt();
        assert!((g.lp_norm_pow(2.0) - want).abs() < 1e-12);
        let r = adaptive(|t| (-0.5 * 2.0 * t * t).exp(), -20.0, 20.0, 1e-13, 1e-13);
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }
}

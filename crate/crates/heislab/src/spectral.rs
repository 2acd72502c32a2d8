//! Spectral route to the spherical means.
//!
//! With `f^lambda(z) = int e^{i lambda t} f(z,t) dt` and the normalized
//! Laguerre bands `beta_k = (2 pi)^{-n} |lambda|^n f^lambda *_lambda phi_k^lambda`
//! (so that `sum_k beta_k = f^lambda`), the mean is
//!
//! `A_r f(z,t) = (2 pi)^{-1} int e^{-i lambda t} sum_k psi_k^{n-1}(sqrt|lambda| r) beta_k(lambda, z) dlambda`.
//!
//! For a centred Gaussian `e^{-a|z|^2}` the bands are explicit:
//! `beta_k = (1-w)^n w^k phi_k^lambda` with `w = (4a - |lambda|)/(4a + |lambda|)`.

use crate::error::{domain, Result};
use crate::func::{GaussianBump, HeisFunction};
use crate::heis::{im_dot, HeisPoint};
use crate::laguerre::normalized_sequence;
use crate::quad::{gauss_jacobi_unit, gauss_legendre, Rule};
use crate::laguerre::ln_gamma_ratio;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Truncation of the spectral integral and band sum.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralTruncation {
    /// cap on the Laguerre index
    pub k_max: usize,
    /// lambda cutoff; `None` picks it from the input's decay bound
    pub lambda: Option<f64>,
    /// Gauss-Legendre nodes on `[0, Lambda]`
    pub n_lambda: usize,
    /// absolute tolerance for the discarded band tail at each lambda
    pub tail_tol: f64,
}

impl Default for SpectralTruncation {
    fn default() -> Self {
        SpectralTruncation { k_max: 2_000_000, lambda: None, n_lambda: 160, tail_tol: 1e-11 }
    }
}

/// Multiplier applied on the k-th band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Multiplier {
    /// `psi_k^delta(sqrt|lambda| r)`
    Mean { delta: f64, r: f64 },
    /// `d/dr psi_k^{n-1}(sqrt|lambda| r)`
    Derivative { r: f64 },
}

impl Multiplier {
    /// Coefficients `m_0..=m_k`.
    fn coefficients(&self, n: usize, lambda: f64, k: usize) -> Vec<f64> {
        let lam = lambda.abs();
        match *self {
            Multiplier::Mean { delta, r } => {
                normalized_sequence(k, delta, 0.5 * lam * r * r).into_iter().map(mat).collect()
            }
            Multiplier::Derivative { r } => {
                let x = 0.5 * lam * r * r;
                let a: Vec<f64> = normalized_sequence(k, n as f64 - 1.0, x).into_iter().map(mat).collect();
                let b: Vec<f64> = normalized_sequence(k, n as f64, x).into_iter().map(mat).collect();
                let nf = n as f64;
                (0..=k)
                    .map(|j| {
                        let mut c = -0.5 * lam * r * a[j];
                        if j > 0 {
                            c -= j as f64 * lam * r / nf * b[j - 1];
                        }
                        c
                    })
                    .collect()
            }
        }
    }

    /// `|m_k| <= lin.0 + lin.1 * k` (uses `|psi^d| <= 1` for `d >= 0`).
    fn bound(&self, n: usize, lambda: f64) -> (f64, f64) {
        let lam = lambda.abs();
        match *self {
            Multiplier::Mean { .. } => (1.0, 0.0),
            Multiplier::Derivative { r } => (0.5 * lam * r, lam * r / n as f64),
        }
    }
}

#[inline]
fn mat(p: (f64, f64)) -> f64 {
    if p.0 == 0.0 {
        0.0
    } else {
        p.0 * p.1.exp()
    }
}

/// Weighted band sum at one lambda.
#[derive(Clone, Copy, Debug)]
pub struct BandSum {
    /// `e^{-i lambda t} sum_k m_k beta_k`
    pub value: Complex64,
    pub k_used: usize,
    pub tail: f64,
    pub converged: bool,
}

/// Inputs for which the spectral bands are available.
pub trait SpectralInput: Sync {
    fn dim(&self) -> usize;
    /// Bound on `sum_k |beta_k(lambda, .)|`, used to choose the lambda cutoff.
    fn band_mass_bound(&self, lambda: f64) -> f64;
    fn band_sum(&self, lambda: f64, x: &HeisPoint, m: Multiplier, trunc: &SpectralTruncation) -> BandSum;
}

/// Smallest K with `sum_{k>K} |w|^k C(k+n-1,k) (c0 + c1 k) <= tol / pref`.
fn choose_k(w: f64, n: usize, lin: (f64, f64), pref: f64, tol: f64, cap: usize) -> (usize, f64, bool) {
    let aw = w.abs();
    if aw == 0.0 {
        return (0, 0.0, true);
    }
    let nf = n as f64;
    let coef = |k: f64, binom: f64| binom * (lin.0 + lin.1 * k);
    // t_k = |w|^k C(k+n-1,k) (c0 + c1 k), computed in logs
    let mut ln_wk = 0.0f64;
    let mut binom = 1.0f64;
    let mut k = 0usize;
    loop {
        // tail after k: t_{k+1} / (1 - q) where q bounds later term ratios
        let kf = k as f64;
        let b1 = binom * (kf + nf) / (kf + 1.0);
        let b2 = b1 * (kf + 1.0 + nf) / (kf + 2.0);
        let t1 = (ln_wk + aw.ln()).exp() * coef(kf + 1.0, b1);
        let q = aw * coef(kf + 2.0, b2) / coef(kf + 1.0, b1).max(1e-300);
        if q < 1.0 {
            let tail = pref * t1 / (1.0 - q);
            if tail <= tol {
                return (k, tail, true);
            }
            if k >= cap {
                return (k, tail, false);
            }
        } else if k >= cap {
            return (k, f64::INFINITY, false);
        }
        ln_wk += aw.ln();
        binom = b1;
        k += 1;
    }
}

impl SpectralInput for GaussianBump {
    fn dim(&self) -> usize {
        HeisFunction::dim(self)
    }

    fn band_mass_bound(&self, lambda: f64) -> f64 {
        let lam = lambda.abs();
        let n = HeisFunction::dim(self) as i32;
        self.amp.abs() * (PI / self.b).sqrt() * (-lam * lam / (4.0 * self.b)).exp() * (lam / (4.0 * self.a)).max(1.0).powi(n)
    }

    fn band_sum(&self, lambda: f64, x: &HeisPoint, m: Multiplier, trunc: &SpectralTruncation) -> BandSum {
        // left invariance: evaluate the centred profile at center^{-1} x
        let p = self.local(x);
        let n = HeisFunction::dim(self);
        let lam = lambda.abs();
        let w = (4.0 * self.a - lam) / (4.0 * self.a + lam);
        let pref = self.amp.abs() * (PI / self.b).sqrt() * (-lam * lam / (4.0 * self.b)).exp() * (1.0 - w).powi(n as i32);
        let (k, tail, converged) = choose_k(w, n, m.bound(n, lam), pref, trunc.tail_tol, trunc.k_max);
        let coef = m.coefficients(n, lam, k);
        let y = 0.5 * lam * p.z_norm_sq();
        let d = n as f64 - 1.0;
        let phis = normalized_sequence(k, d, y);
        // sum_k coef_k w^k phi_k, phi_k = l_k e^{-y/2} / gamma_ratio(k, n-1)
        let mut s = 0.0;
        let mut wk = 1.0;
        for j in 0..=k {
            let (mm, sc) = phis[j];
            if mm != 0.0 && wk != 0.0 {
                let phi = mm * (sc - ln_gamma_ratio_fast(j, d)).exp();
                s += coef[j] * wk * phi;
            }
            wk *= w;
        }
        let s = self.amp * (PI / self.b).sqrt() * (-lam * lam / (4.0 * self.b)).exp() * (1.0 - w).powi(n as i32) * s;
        BandSum { value: Complex64::from_polar(1.0, -lambda * p.t) * s, k_used: k, tail, converged }
    }
}

/// `ln gamma_ratio(k, d)` for integer `d` in {0, 1}, i.e. `-ln C(k+d, k)`.
#[inline]
fn ln_gamma_ratio_fast(k: usize, d: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else if d == 1.0 {
        -((k + 1) as f64).ln()
    } else {
        ln_gamma_ratio(k, d)
    }
}

/// Result of a spectral evaluation.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralResult {
    pub value: f64,
    /// bound on the discarded band tails integrated over lambda
    pub tail_estimate: f64,
    pub k_max_used: usize,
    pub lambda_cut: f64,
    pub n_lambda: usize,
    pub flagged: bool,
}

fn lambda_cutoff(f: &dyn SpectralInput, tol: f64) -> f64 {
    let mut lam = 1.0;
    while f.band_mass_bound(lam) * lam.max(1.0) > tol && lam < 1e6 {
        lam *= 1.1;
    }
    lam
}

fn spectral_integral(f: &dyn SpectralInput, x: &HeisPoint, m: Multiplier, trunc: &SpectralTruncation) -> SpectralResult {
    let cut = trunc.lambda.unwrap_or_else(|| lambda_cutoff(f, 1e-13));
    // two panels: the band structure changes fastest near lambda = 0
    let split = (0.25 * cut).min(4.0);
    let half = trunc.n_lambda / 2;
    let mut nodes = gauss_legendre(half.max(2)).mapped(0.0, split);
    let hi = gauss_legendre(half.max(2)).mapped(split, cut);
    nodes.nodes.extend(hi.nodes);
    nodes.weights.extend(hi.weights);
    let parts: Vec<(f64, f64, usize, bool)> = nodes
        .nodes
        .par_iter()
        .zip(nodes.weights.par_iter())
        .map(|(&lam, &wt)| {
            let b = f.band_sum(lam, x, m, trunc);
            (wt * b.value.re, wt * b.tail, b.k_used, b.converged)
        })
        .collect();
    let mut value = 0.0;
    let mut tail = 0.0;
    let mut kmax = 0;
    let mut flagged = false;
    for (v, t, k, c) in parts {
        value += v;
        tail += t;
        kmax = kmax.max(k);
        flagged |= !c;
    }
    SpectralResult {
        value: value / PI,
        tail_estimate: tail / PI,
        k_max_used: kmax,
        lambda_cut: cut,
        n_lambda: nodes.nodes.len(),
        flagged,
    }
}

/// `A_r f(x)` by the Laguerre expansion.
pub fn spectral_spherical_mean(f: &dyn SpectralInput, r: f64, x: &HeisPoint, trunc: &SpectralTruncation) -> Result<SpectralResult> {
    if !(r >= 0.0) {
        return domain("radius must be nonnegative");
    }
    let delta = f.dim() as f64 - 1.0;
    Ok(spectral_integral(f, x, Multiplier::Mean { delta, r }, trunc))
}

/// `B_r f(x) = d/dr A_r f(x)` by the Laguerre expansion.
pub fn spectral_derivative_mean(f: &dyn SpectralInput, r: f64, x: &HeisPoint, trunc: &SpectralTruncation) -> Result<SpectralResult> {
    if !(r > 0.0) {
        return domain("radius must be positive");
    }
    Ok(spectral_integral(f, x, Multiplier::Derivative { r }, trunc))
}

/// Analytic family member at radius 1 by its series, with multiplier
/// `psi_k^{beta+n-1}`.
pub fn analytic_family_spectral(f: &dyn SpectralInput, beta: f64, x: &HeisPoint, trunc: &SpectralTruncation) -> Result<SpectralResult> {
    if !(beta > 0.0) {
        return domain("beta must be positive");
    }
    let delta = beta + f.dim() as f64 - 1.0;
    Ok(spectral_integral(f, x, Multiplier::Mean { delta, r: 1.0 }, trunc))
}

/// Provenance of a partial transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    ClosedForm,
    Quadrature,
}

/// Sources of `z -> f^lambda(z)`.
pub trait PartialFourier: Sync {
    fn dim(&self) -> usize;
    fn partial_ft_at(&self, lambda: f64, z: &[f64]) -> (Complex64, bool);
    fn provenance(&self) -> Provenance;
}

impl PartialFourier for GaussianBump {
    fn dim(&self) -> usize {
        HeisFunction::dim(self)
    }
    fn partial_ft_at(&self, lambda: f64, z: &[f64]) -> (Complex64, bool) {
        (self.partial_ft(lambda, z), false)
    }
    fn provenance(&self) -> Provenance {
        Provenance::ClosedForm
    }
}

/// Partial transform of an arbitrary function supported in `|t| <= t_half`,
/// by Gauss-Legendre in t; the result is flagged when halving the node
/// count changes it by more than `tol`.
pub struct TQuadrature<'a, F: HeisFunction + ?Sized> {
    pub f: &'a F,
    pub t_half: f64,
    pub nodes: usize,
    pub tol: f64,
}

impl<F: HeisFunction + ?Sized> PartialFourier for TQuadrature<'_, F> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn partial_ft_at(&self, lambda: f64, z: &[f64]) -> (Complex64, bool) {
        let eval = |m: usize| {
            let rule = gauss_legendre(m).mapped(-self.t_half, self.t_half);
            let mut s = Complex64::new(0.0, 0.0);
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                s += Complex64::from_polar(*w, lambda * t) * self.f.eval(&HeisPoint::new(z, *t));
            }
            s
        };
        let fine = eval(self.nodes);
        let coarse = eval((self.nodes / 2).max(2));
        (fine, (fine - coarse).norm() > self.tol)
    }
    fn provenance(&self) -> Provenance {
        Provenance::Quadrature
    }
}

/// `z -> f^lambda(z)` for one lambda.
pub struct PartialTransform<'a> {
    pub lambda: f64,
    pub source: &'a dyn PartialFourier,
    pub provenance: Provenance,
}

impl PartialTransform<'_> {
    pub fn eval(&self, z: &[f64]) -> Complex64 {
        self.source.partial_ft_at(self.lambda, z).0
    }
    pub fn eval_flagged(&self, z: &[f64]) -> (Complex64, bool) {
        self.source.partial_ft_at(self.lambda, z)
    }
}

pub fn partial_ft(f: &dyn PartialFourier, lambda: f64) -> PartialTransform<'_> {
    PartialTransform { lambda, source: f, provenance: f.provenance() }
}

/// Twisted convolution value with a boundary diagnostic.
#[derive(Clone, Copy, Debug)]
pub struct TwistedValue {
    pub value: Complex64,
    /// largest integrand modulus on the outer node layer relative to the maximum
    pub boundary_ratio: f64,
    pub flagged: bool,
}

fn tensor_nodes(dim: usize, rule: &Rule, mut visit: impl FnMut(&[f64], f64, bool)) {
    let m = rule.nodes.len();
    let total = m.pow(dim as u32);
    let mut w = vec![0.0; dim];
    for idx in 0..total {
        let mut rem = idx;
        let mut weight = 1.0;
        let mut outer = false;
        for d in 0..dim {
            let i = rem % m;
            rem /= m;
            w[d] = rule.nodes[i];
            weight *= rule.weights[i];
            outer |= i == 0 || i == m - 1;
        }
        visit(&w, weight, outer);
    }
}

/// `F *_lambda G (z) = int F(z - w) G(w) e^{i (lambda/2) Im z.conj(w)} dw` over
/// the box `[-half_width, half_width]^{2n}` with a tensor Gauss-Legendre rule.
pub fn twisted_conv(
    big_f: &dyn Fn(&[f64]) -> Complex64,
    g: &dyn Fn(&[f64]) -> Complex64,
    lambda: f64,
    z: &[f64],
    half_width: f64,
    nodes: usize,
    tol: f64,
) -> TwistedValue {
    let rule = gauss_legendre(nodes).mapped(-half_width, half_width);
    let dim = z.len();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut peak: f64 = 0.0;
    let mut edge: f64 = 0.0;
    let mut zw = vec![0.0; dim];
    tensor_nodes(dim, &rule, |w, weight, outer| {
        for i in 0..dim {
            zw[i] = z[i] - w[i];
        }
        let v = big_f(&zw) * g(w) * Complex64::from_polar(1.0, 0.5 * lambda * im_dot(z, w));
        let a = v.norm();
        peak = peak.max(a);
        if outer {
            edge = edge.max(a);
        }
        acc += v * weight;
    });
    let ratio = if peak > 0.0 { edge / peak } else { 0.0 };
    TwistedValue { value: acc, boundary_ratio: ratio, flagged: ratio > tol }
}

/// Bands computed by twisted convolution of a partial transform with the
/// Laguerre functions. The k-sum stops once three consecutive terms fall
/// below `1e-3` of the running sum (capped at `k_max`).
pub struct QuadratureBands<'a> {
    pub source: &'a dyn PartialFourier,
    pub half_width: f64,
    pub nodes: usize,
    pub mass_bound: &'a (dyn Fn(f64) -> f64 + Sync),
}

impl QuadratureBands<'_> {
    /// `beta_0..=beta_k` at `(lambda, z)`.
    pub fn bands(&self, lambda: f64, z: &[f64], k: usize) -> Vec<Complex64> {
        let n = self.source.dim();
        let lam = lambda.abs();
        let rule = gauss_legendre(self.nodes).mapped(-self.half_width, self.half_width);
        let mut acc = vec![Complex64::new(0.0, 0.0); k + 1];
        let mut zw = vec![0.0; 2 * n];
        let d = n as f64 - 1.0;
        tensor_nodes(2 * n, &rule, |w, weight, _| {
            for i in 0..2 * n {
                zw[i] = z[i] - w[i];
            }
            let y = 0.5 * lam * w.iter().map(|v| v * v).sum::<f64>();
            let base = self.source.partial_ft_at(lambda, &zw).0 * Complex64::from_polar(weight, 0.5 * lambda * im_dot(z, w));
            for (j, p) in normalized_sequence(k, d, y).into_iter().enumerate() {
                let phi = if p.0 == 0.0 { 0.0 } else { p.0 * (p.1 - ln_gamma_ratio(j, d)).exp() };
                acc[j] += base * phi;
            }
        });
        let scale = (lam / (2.0 * PI)).powi(n as i32);
        acc.into_iter().map(|v| v * scale).collect()
    }
}

impl SpectralInput for QuadratureBands<'_> {
    fn dim(&self) -> usize {
        self.source.dim()
    }
    fn band_mass_bound(&self, lambda: f64) -> f64 {
        (self.mass_bound)(lambda)
    }
    fn band_sum(&self, lambda: f64, x: &HeisPoint, m: Multiplier, trunc: &SpectralTruncation) -> BandSum {
        let n = self.source.dim();
        let k = trunc.k_max.min(200);
        let bands = self.bands(lambda, &x.z, k);
        let coef = m.coefficients(n, lambda, k);
        let mut s = Complex64::new(0.0, 0.0);
        let mut small = 0;
        let mut used = k;
        let mut converged = false;
        for j in 0..=k {
            let term = bands[j] * coef[j];
            s += term;
            if term.norm() < 1e-3 * s.norm() {
                small += 1;
            } else {
                small = 0;
            }
            if small == 3 {
                used = j;
                converged = true;
                break;
            }
        }
        BandSum { value: Complex64::from_polar(1.0, -lambda * x.t) * s, k_used: used, tail: 0.0, converged }
    }
}

/// `p_r(t) = (4/pi) r / (r^2 + 16 t^2)`, unit mass, transform `e^{-r|lambda|/4}`.
pub fn poisson_kernel(r: f64, t: f64) -> Result<f64> {
    if !(r > 0.0) {
        return domain("Poisson kernel needs r > 0");
    }
    Ok(4.0 / PI * r / (r * r + 16.0 * t * t))
}

pub fn poisson_transform(r: f64, lambda: f64) -> f64 {
    (-r * lambda.abs() / 4.0).exp()
}

/// `q_r(t) = (8/pi) r^3 / (r^2 + 16 t^2)^2`, unit mass.
pub fn q_kernel(r: f64, t: f64) -> Result<f64> {
    if !(r > 0.0) {
        return domain("q kernel needs r > 0");
    }
    let d = r * r + 16.0 * t * t;
    Ok(8.0 / PI * r.powi(3) / (d * d))
}

/// `k_beta(t) = t_+^{beta-1} e^{-t} / Gamma(beta)`.
pub fn k_beta_kernel(beta: f64, t: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return domain("k_beta needs beta > 0");
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    Ok(((beta - 1.0) * t.ln() - t - ln_gamma(beta)).exp())
}

/// `int e^{i lambda t} k_beta(t) dt = (1 - i lambda)^{-beta}` (principal branch).
pub fn k_beta_transform(beta: f64, lambda: f64) -> Result<Complex64> {
    if !(beta > 0.0) {
        return domain("k_beta needs beta > 0");
    }
    Ok((-beta * Complex64::new(1.0, -lambda).ln()).exp())
}

/// Both sides of the Beta-integral identity
/// `psi_k^{a+b}(t) = G(b+a+1)/(G(b)G(a+1)) int_0^1 s^a (1-s)^{b-1} psi_k^a(t sqrt s) e^{-t^2(1-s)/4} ds`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl IdentCheck {
    /// The right side with an extra leading factor 2.
    pub fn rhs_doubled(&self) -> f64 {
        2.0 * self.rhs
    }
}

pub fn corollary_ident_check(alpha: f64, beta: f64, k: usize, t: f64) -> Result<IdentCheck> {
    if !(alpha > -1.0) || !(beta > 0.0) || !(t > 0.0) {
        return domain("need alpha > -1, beta > 0, t > 0");
    }
    let lhs = mat(*normalized_sequence(k, alpha + beta, 0.5 * t * t).last().unwrap());
    // the integrand is a degree-k polynomial in s against the Jacobi weight
    let rule = gauss_jacobi_unit(k / 2 + 24, alpha, beta - 1.0);
    let c = (ln_gamma(beta + alpha + 1.0) - ln_gamma(beta) - ln_gamma(alpha + 1.0)).exp();
    let rhs = c * rule.integrate(|s| {
        let ps = mat(*normalized_sequence(k, alpha, 0.5 * t * t * s).last().unwrap());
        ps * (-t * t * (1.0 - s) / 4.0).exp()
    });
    Ok(IdentCheck { lhs, rhs })
}

/// `int e^{-b (t - tau)^2} p_s(tau) dtau`.
pub fn poisson_smoothed_gaussian(b: f64, s: f64, t: f64, rule: &Rule) -> f64 {
    // (1/pi) int_0^inf cos(lambda t) sqrt(pi/b) e^{-lambda^2/4b - s lambda/4} dlambda
    let c = (PI / b).sqrt() / PI;
    c * rule.integrate(|l| (l * t).cos() * (-l * l / (4.0 * b) - s * l / 4.0).exp())
}

/// Rule for [`poisson_smoothed_gaussian`] adapted to the width `b`.
pub fn poisson_rule(b: f64, nodes: usize) -> Rule {
    let cut = (4.0 * b * 36.0).sqrt();
    gauss_legendre(nodes).mapped(0.0, cut)
}

/// Analytic family member by its integral representation
/// `G(beta+n)/(G(beta)G(n)) int_0^1 u^{n-1} (1-u)^{beta-1} A_{sqrt u}(P_{1-u} f)(x) du`,
/// with the spherical means taken by the supplied sphere quadrature.
pub fn analytic_family_mean(
    f: &GaussianBump,
    beta: f64,
    x: &HeisPoint,
    u_nodes: usize,
    sphere: &crate::means::SphereRule,
) -> Result<f64> {
    if !(beta > 0.0) {
        return domain("beta must be positive");
    }
    let n = HeisFunction::dim(f);
    if sphere.dim() != n {
        return domain("sphere rule dimension mismatch");
    }
    let nf = n as f64;
    let rule = gauss_jacobi_unit(u_nodes, nf - 1.0, beta - 1.0);
    let c = (ln_gamma(beta + nf) - ln_gamma(beta) - ln_gamma(nf)).exp();
    let p = f.local(x);
    let lrule = poisson_rule(f.b, 96);
    let mut total = 0.0;
    for (&u, &wu) in rule.nodes.iter().zip(&rule.weights) {
        let r = u.sqrt();
        let s = 1.0 - u;
        let mut acc = 0.0;
        for (node, &wn) in sphere.nodes.iter().zip(&sphere.weights) {
            // p . (r omega, 0)^{-1}
            let mut z = p.z.clone();
            let mut rw = smallvec::SmallVec::<[f64; 4]>::new();
            for (zi, oi) in z.iter_mut().zip(node) {
                *zi -= r * oi;
                rw.push(r * oi);
            }
            let t = p.t - 0.5 * im_dot(&p.z, &rw);
            let r2: f64 = z.iter().map(|v| v * v).sum();
            acc += wn * f.amp * (-f.a * r2).exp() * poisson_smoothed_gaussian(f.b, s, t, &lrule);
        }
        total += wu * acc;
    }
    Ok(c * total)
}

//! Laguerre polynomials and the Laguerre function normalizations.
//!
//! `psi(k, d, r) = k! G(d+1)/G(k+d+1) L_k^d(r^2/2) e^{-r^2/4}` is computed by
//! a recurrence on the normalized values `l_k = gamma_ratio(k,d) L_k^d`,
//! which satisfy `l_k(0) = 1` and
//! `(k+1+d) l_{k+1} = (2k+1+d-x) l_k - k l_{k-1}`.
//! Large arguments are handled by carrying a separate log scale.

use crate::error::{domain, Result};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

fn check_delta(delta: f64) -> Result<()> {
    if delta > -1.0 && delta.is_finite() {
        Ok(())
    } else {
        domain(format!("Laguerre type must exceed -1, got {delta}"))
    }
}

/// `L_k^delta(x)` by the upward three-term recurrence.
pub fn laguerre_poly(k: usize, delta: f64, x: f64) -> Result<f64> {
    check_delta(delta)?;
    let (mut l0, mut l1) = (1.0, 1.0 + delta - x);
    if k == 0 {
        return Ok(l0);
    }
    for j in 1..k {
        let jf = j as f64;
        let l2 = ((2.0 * jf + 1.0 + delta - x) * l1 - (jf + delta) * l0) / (jf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    Ok(l1)
}

/// `ln( G(k+1) G(d+1) / G(k+d+1) )`.
pub fn ln_gamma_ratio(k: usize, delta: f64) -> f64 {
    if delta == 0.0 || k == 0 {
        return 0.0;
    }
    if k <= 1000 {
        // compensated sum of -log1p(d/j)
        let (mut s, mut c) = (0.0f64, 0.0f64);
        for j in 1..=k {
            let y = -(delta / j as f64).ln_1p() - c;
            let t = s + y;
            c = (t - s) - y;
            s = t;
        }
        return s;
    }
    let z = k as f64 + 1.0;
    let stirling = |z: f64| {
        let z2 = z * z;
        (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z
    };
    let d = -(z - 0.5) * (delta / z).ln_1p() - delta * (z + delta).ln() + delta + stirling(z)
        - stirling(z + delta);
    d + ln_gamma(delta + 1.0)
}

/// `G(k+1) G(d+1) / G(k+d+1)`.
pub fn gamma_ratio(k: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(ln_gamma_ratio(k, delta).exp())
}

/// Normalized values `gamma_ratio(k,d) L_k^d(x) e^{-x/2}` for `k = 0..=k_max`,
/// returned as `(mantissa, log_scale)` with value `mantissa * exp(log_scale)`.
pub fn normalized_sequence(k_max: usize, delta: f64, x: f64) -> Vec<(f64, f64)> {
    if x == 0.0 {
        return vec![(1.0, 0.0); k_max + 1];
    }
    let mut out = Vec::with_capacity(k_max + 1);
    let mut scale = -0.5 * x;
    let (mut l0, mut l1) = (1.0, 1.0 - x / (1.0 + delta));
    out.push((l0, scale));
    if k_max == 0 {
        return out;
    }
    out.push((l1, scale));
    const BIG: f64 = 1e150;
    let ln_big = BIG.ln();
    for k in 1..k_max {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 + delta - x) * l1 - kf * l0) / (kf + 1.0 + delta);
        l0 = l1;
        l1 = l2;
        if l1.abs() > BIG {
            l0 /= BIG;
            l1 /= BIG;
            scale += ln_big;
        }
        out.push((l1, scale));
    }
    out
}

#[inline]
fn materialize(p: (f64, f64)) -> f64 {
    if p.0 == 0.0 {
        0.0
    } else {
        p.0 * p.1.exp()
    }
}

/// `psi_k^delta(r)`.
pub fn psi(k: usize, delta: f64, r: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(materialize(*normalized_sequence(k, delta, 0.5 * r * r).last().unwrap()))
}

/// `psi_0^delta(r), ..., psi_{k_max}^delta(r)`.
pub fn psi_all(k_max: usize, delta: f64, r: f64) -> Result<Vec<f64>> {
    check_delta(delta)?;
    Ok(normalized_sequence(k_max, delta, 0.5 * r * r).into_iter().map(materialize).collect())
}

/// Standard Laguerre function `(k!/G(k+d+1))^{1/2} L_k^d(r) e^{-r/2} r^{d/2}`,
/// orthonormal in `L^2((0, inf), dr)`.
pub fn std_laguerre(k: usize, delta: f64, r: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(r > 0.0) {
        return domain("standard Laguerre function needs r > 0");
    }
    let (m, s) = *normalized_sequence(k, delta, r).last().unwrap();
    if m == 0.0 {
        return Ok(0.0);
    }
    Ok(m * (s - 0.5 * ln_gamma_ratio(k, delta) - 0.5 * ln_gamma(delta + 1.0) + 0.5 * delta * r.ln()).exp())
}

/// `phi_k^lambda(z) = L_k^{n-1}(|lambda||z|^2/2) e^{-|lambda||z|^2/4}`.
pub fn varphi(k: usize, lambda: f64, z: &[f64]) -> Result<f64> {
    if lambda == 0.0 || !lambda.is_finite() {
        return domain("varphi needs a finite nonzero lambda");
    }
    let n = z.len() / 2;
    let y = 0.5 * lambda.abs() * z.iter().map(|v| v * v).sum::<f64>();
    let d = n as f64 - 1.0;
    let (m, s) = *normalized_sequence(k, d, y).last().unwrap();
    Ok(m * (s - ln_gamma_ratio(k, d)).exp())
}

/// Regimes of the four-piece majorant for the standard Laguerre functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EnvelopeRegime {
    Small,
    Oscillatory,
    Turning,
    Exponential,
}

impl EnvelopeRegime {
    pub fn classify(k: usize, r: f64) -> EnvelopeRegime {
        let kf = k as f64;
        if r <= 1.0 / kf {
            EnvelopeRegime::Small
        } else if r <= 0.5 * kf {
            EnvelopeRegime::Oscillatory
        } else if r <= 1.5 * kf {
            EnvelopeRegime::Turning
        } else {
            EnvelopeRegime::Exponential
        }
    }
}

fn ln_envelope(k: usize, delta: f64, r: f64, gamma: f64) -> f64 {
    let kf = k as f64;
    match EnvelopeRegime::classify(k, r) {
        EnvelopeRegime::Small => 0.5 * delta * (kf * r).ln(),
        EnvelopeRegime::Oscillatory => -0.25 * (kf * r).ln(),
        EnvelopeRegime::Turning => -0.25 * kf.ln() - 0.25 * (kf.cbrt() + (kf - r).abs()).ln(),
        EnvelopeRegime::Exponential => -gamma * r,
    }
}

/// Raw four-regime envelope (no constant) with exponential rate `gamma`.
pub fn envelope_t(k: usize, delta: f64, r: f64, gamma: f64) -> Result<f64> {
    if k == 0 {
        return domain("envelope needs k >= 1");
    }
    if !(r > 0.0) {
        return domain("envelope needs r > 0");
    }
    Ok(ln_envelope(k, delta, r, gamma).exp())
}

/// Outcome of an envelope certification scan.
#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeCertificate {
    pub delta: f64,
    pub k_max: usize,
    pub samples: usize,
    pub gamma: f64,
    pub c_star: f64,
    pub worst_k: usize,
    pub worst_r: f64,
    /// samples whose value would underflow an f64 if evaluated directly
    pub underflows: usize,
}

/// Log-spaced radii covering all regimes for `k <= k_max`.
pub fn envelope_radii(k_max: usize, samples: usize) -> Vec<f64> {
    let lo = (0.01 / k_max as f64).ln();
    let hi = (8.0 * k_max as f64 + 40.0).ln();
    (0..samples).map(|i| (lo + (hi - lo) * i as f64 / (samples - 1) as f64).exp()).collect()
}

/// Insert `factor - 1` geometric midpoints between consecutive radii.
pub fn refine_radii(radii: &[f64], factor: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(radii.len() * factor);
    for w in radii.windows(2) {
        out.push(w[0]);
        let (a, b) = (w[0].ln(), w[1].ln());
        for j in 1..factor {
            out.push((a + (b - a) * j as f64 / factor as f64).exp());
        }
    }
    out.push(*radii.last().unwrap());
    out
}

pub const GAMMA_LADDER: usize = 24;

struct ScanAcc {
    rest: (f64, usize, f64),
    exp: Vec<(f64, usize, f64)>,
    underflows: usize,
}

fn scan_radius(delta: f64, k_max: usize, r: f64, gammas: &[f64], ln_gr: &[f64]) -> ScanAcc {
    let seq = normalized_sequence(k_max, delta, r);
    let mut acc = ScanAcc {
        rest: (f64::NEG_INFINITY, 0, r),
        exp: vec![(f64::NEG_INFINITY, 0, r); gammas.len()],
        underflows: 0,
    };
    let lr = 0.5 * delta * r.ln();
    for (k, &(m, s)) in seq.iter().enumerate().skip(1) {
        if m == 0.0 {
            continue;
        }
        let ln_val = m.abs().ln() + s - 0.5 * ln_gr[k] + lr;
        if ln_val < -745.0 {
            acc.underflows += 1;
        }
        match EnvelopeRegime::classify(k, r) {
            EnvelopeRegime::Exponential => {
                for (g, e) in gammas.iter().zip(acc.exp.iter_mut()) {
                    let q = ln_val + g * r;
                    if q > e.0 {
                        *e = (q, k, r);
                    }
                }
            }
            _ => {
                let q = ln_val - ln_envelope(k, delta, r, 0.0);
                if q > acc.rest.0 {
                    acc.rest = (q, k, r);
                }
            }
        }
    }
    acc
}

fn scan(delta: f64, k_max: usize, radii: &[f64], gammas: &[f64]) -> ScanAcc {
    let lg = ln_gamma(delta + 1.0);
    let ln_gr: Vec<f64> = (0..=k_max).map(|k| ln_gamma_ratio(k, delta) + lg).collect();
    let parts: Vec<ScanAcc> = radii.par_iter().map(|&r| scan_radius(delta, k_max, r, gammas, &ln_gr)).collect();
    let mut total = ScanAcc {
        rest: (f64::NEG_INFINITY, 0, 0.0),
        exp: vec![(f64::NEG_INFINITY, 0, 0.0); gammas.len()],
        underflows: 0,
    };
    for p in parts {
        if p.rest.0 > total.rest.0 {
            total.rest = p.rest;
        }
        for (t, e) in total.exp.iter_mut().zip(p.exp) {
            if e.0 > t.0 {
                *t = e;
            }
        }
        total.underflows += p.underflows;
    }
    total
}

fn certificate(delta: f64, k_max: usize, samples: usize, gamma: f64, acc: &ScanAcc, gi: usize) -> EnvelopeCertificate {
    let (best, k, r) = if acc.exp[gi].0 > acc.rest.0 { acc.exp[gi] } else { acc.rest };
    EnvelopeCertificate {
        delta,
        k_max,
        samples,
        gamma,
        c_star: best.exp(),
        worst_k: k,
        worst_r: r,
        underflows: acc.underflows,
    }
}

/// Scan `|L_k^delta(r)| / envelope` over `1 <= k <= k_max` and `samples`
/// log-spaced radii. The exponential rate is the largest `2^{-j}` for which
/// the exponential regime does not dominate the other three.
pub fn certify_envelope(delta: f64, k_max: usize, samples: usize) -> Result<EnvelopeCertificate> {
    check_delta(delta)?;
    if k_max == 0 || samples < 2 {
        return domain("certification needs k_max >= 1 and at least two samples");
    }
    let gammas: Vec<f64> = (0..GAMMA_LADDER).map(|j| 0.5f64.powi(j as i32)).collect();
    let radii = envelope_radii(k_max, samples);
    let acc = scan(delta, k_max, &radii, &gammas);
    let gi = (0..gammas.len()).find(|&i| acc.exp[i].0 <= acc.rest.0).unwrap_or(gammas.len() - 1);
    Ok(certificate(delta, k_max, samples, gammas[gi], &acc, gi))
}

/// As [`certify_envelope`] with a fixed rate and an explicit radius set.
pub fn certify_envelope_on(delta: f64, k_max: usize, radii: &[f64], gamma: f64) -> Result<EnvelopeCertificate> {
    check_delta(delta)?;
    let acc = scan(delta, k_max, radii, &[gamma]);
    Ok(certificate(delta, k_max, radii.len(), gamma, &acc, 0))
}

/// `sup_k |psi_k^delta(sqrt(lambda))|` over `k <= k_max`, with the maximizing k.
pub fn uniform_bound_scan(delta: f64, lambda: f64, k_max: usize) -> Result<(f64, usize)> {
    if delta < -1.0 / 3.0 {
        return domain("uniform scan needs delta >= -1/3");
    }
    if !(lambda > 0.0) {
        return domain("uniform scan needs lambda > 0");
    }
    let seq = normalized_sequence(k_max, delta, 0.5 * lambda);
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, &(m, s)) in seq.iter().enumerate() {
        if m != 0.0 {
            let v = m.abs().ln() + s;
            if v > best.0 {
                best = (v, k);
            }
        }
    }
    Ok((best.0.exp(), best.1))
}

/// `sup_k (k lambda)^{1/2} |psi_k^delta(sqrt(lambda))|` over `k <= k_max`.
pub fn weighted_bound_scan(delta: f64, lambda: f64, k_max: usize) -> Result<(f64, usize)> {
    if delta < 0.5 {
        return domain("weighted scan needs delta >= 1/2");
    }
    if !(lambda >= 1.0) {
        return domain("weighted scan needs lambda >= 1");
    }
    let seq = normalized_sequence(k_max, delta, 0.5 * lambda);
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, &(m, s)) in seq.iter().enumerate().skip(1) {
        if m != 0.0 {
            let v = m.abs().ln() + s + 0.5 * (k as f64 * lambda).ln();
            if v > best.0 {
                best = (v, k);
            }
        }
    }
    Ok((best.0.exp(), best.1))
}

/// Least squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

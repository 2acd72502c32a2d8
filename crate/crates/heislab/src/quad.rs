//! One-dimensional quadrature rules and integrators.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Nodes and weights of a quadrature rule.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    /// Map a rule on `[-1, 1]` to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        Rule {
            nodes: self.nodes.iter().map(|x| c + h * x).collect(),
            weights: self.weights.iter().map(|w| h * w).collect(),
        }
    }
}

/// Gauss-Legendre on `[-1, 1]` by Newton iteration on P_m.
pub fn gauss_legendre(m: usize) -> Rule {
    assert!(m >= 1);
    if m == 1 {
        return Rule { nodes: vec![0.0], weights: vec![2.0] };
    }
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..(m + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = mf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    Rule { nodes, weights }
}

/// Golub-Welsch from recurrence coefficients (diagonal `a`, off-diagonal `b`)
/// and total mass `mu0`.
fn golub_welsch(a: &[f64], b: &[f64], mu0: f64) -> Rule {
    let m = a.len();
    let mut j = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        j[(i, i)] = a[i];
        if i + 1 < m {
            j[(i, i + 1)] = b[i];
            j[(i + 1, i)] = b[i];
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    Rule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
}

/// Gauss-Jacobi on `[-1, 1]` for the weight `(1-x)^alpha (1+x)^beta`.
pub fn gauss_jacobi(m: usize, alpha: f64, beta: f64) -> Rule {
    assert!(alpha > -1.0 && beta > -1.0 && m >= 1);
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m.saturating_sub(1)];
    let ab = alpha + beta;
    for i in 0..m {
        let k = i as f64;
        let s = 2.0 * k + ab;
        a[i] = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        };
        if i + 1 < m {
            let k1 = k + 1.0;
            let s1 = 2.0 * k1 + ab;
            let num = 4.0 * k1 * (k1 + alpha) * (k1 + beta) * (k1 + ab);
            let den = s1 * s1 * (s1 + 1.0) * (s1 - 1.0);
            b[i] = (num / den).sqrt();
        }
    }
    let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(ab + 2.0))
    .exp();
    golub_welsch(&a, &b, mu0)
}

/// Rule on `[0, 1]` for the weight `s^a (1-s)^b`.
pub fn gauss_jacobi_unit(m: usize, a: f64, b: f64) -> Rule {
    // s = (1 + x)/2: (1-s)^b s^a = 2^{-a-b} (1-x)^b (1+x)^a, ds = dx/2
    let r = gauss_jacobi(m, b, a);
    let scale = 2f64.powf(-(a + b + 1.0));
    Rule {
        nodes: r.nodes.iter().map(|x| 0.5 * (1.0 + x)).collect(),
        weights: r.weights.iter().map(|w| w * scale).collect(),
    }
}

/// Generalized Gauss-Laguerre on `[0, inf)` for the weight `x^alpha e^{-x}`.
pub fn gauss_laguerre(m: usize, alpha: f64) -> Rule {
    assert!(alpha > -1.0 && m >= 1);
    let a: Vec<f64> = (0..m).map(|i| 2.0 * i as f64 + alpha + 1.0).collect();
    let b: Vec<f64> = (1..m).map(|i| (i as f64 * (i as f64 + alpha)).sqrt()).collect();
    let mut rule = golub_welsch(&a, &b, ln_gamma(alpha + 1.0).exp());
    // polish nodes by Newton on L_m^alpha and recompute weights from L_{m+1}
    let lag = |k: usize, x: f64| -> (f64, f64) {
        let (mut l0, mut l1) = (1.0, 1.0 + alpha - x);
        for j in 1..k {
            let jf = j as f64;
            let l2 = ((2.0 * jf + 1.0 + alpha - x) * l1 - (jf + alpha) * l0) / (jf + 1.0);
            l0 = l1;
            l1 = l2;
        }
        (l1, l0)
    };
    let mf = m as f64;
    let ln_c = ln_gamma(mf + alpha + 1.0) - ln_gamma(mf + 1.0) - 2.0 * (mf + 1.0).ln();
    for i in 0..m {
        let mut x = rule.nodes[i];
        for _ in 0..4 {
            let (lm, lm1) = lag(m, x);
            let d = (mf * lm - (mf + alpha) * lm1) / x;
            x -= lm / d;
        }
        let (lp1, _) = lag(m + 1, x);
        rule.nodes[i] = x;
        rule.weights[i] = (ln_c + x.ln() - 2.0 * lp1.abs().ln()).exp();
    }
    rule
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Adaptive Gauss-Kronrod (7/15) on `[a, b]` with absolute/relative tolerance.
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Integral {
    let mut intervals = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..5000 {
        let total: f64 = intervals.iter().map(|x| x.2 .0).sum();
        let err: f64 = intervals.iter().map(|x| x.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Integral { value: total, error: err, converged: true };
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.partial_cmp(&y.1 .2 .1).unwrap())
            .unwrap();
        let (lo, hi, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(&f, lo, mid)));
        intervals.push((mid, hi, gk15(&f, mid, hi)));
    }
    let total: f64 = intervals.iter().map(|x| x.2 .0).sum();
    let err: f64 = intervals.iter().map(|x| x.2 .1).sum();
    Integral { value: total, error: err, converged: err <= abs_tol.max(rel_tol * total.abs()) }
}

/// Integral over the whole real line via `t = tan(theta)`.
pub fn adaptive_real_line(f: impl Fn(f64) -> f64, abs_tol: f64, rel_tol: f64) -> Integral {
    let h = std::f64::consts::FRAC_PI_2;
    adaptive(
        |th| {
            let c = th.cos();
            if c <= 0.0 {
                return 0.0;
            }
            f(th.tan()) / (c * c)
        },
        -h,
        h,
        abs_tol,
        rel_tol,
    )
}

/// `int_0^inf f(t) cos(w t) dt` for slowly decaying `f`: integrates half
/// periods and sums the alternating tail with Wynn's epsilon algorithm.
pub fn cosine_transform_half_line(f: impl Fn(f64) -> f64, w: f64, tol: f64) -> Integral {
    if w == 0.0 {
        return adaptive(|u| if u >= 1.0 { 0.0 } else { f(u / (1.0 - u)) / ((1.0 - u) * (1.0 - u)) }, 0.0, 1.0, tol, tol);
    }
    let w = w.abs();
    let period = std::f64::consts::PI / w;
    // first segment up to the first zero of cos, then half periods
    let mut edges = vec![0.0, 0.5 * period];
    let mut partial = Vec::new();
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut prev = f64::NAN;
    for j in 0..400 {
        if j > 0 {
            edges.push(edges[j] + period);
        }
        let (a, b) = (edges[j], edges[j + 1]);
        let r = adaptive(|t| f(t) * (w * t).cos(), a, b, tol * 1e-3, 1e-13);
        sum += r.value;
        err += r.error;
        partial.push(sum);
        if partial.len() >= 12 {
            let est = wynn_epsilon(&partial[partial.len() - 12..]);
            if (est - prev).abs() < tol {
                return Integral { value: est, error: err + (est - prev).abs(), converged: true };
            }
            prev = est;
        }
    }
    Integral { value: prev, error: f64::INFINITY, converged: false }
}

/// Wynn epsilon extrapolation of a sequence of partial sums.
pub fn wynn_epsilon(s: &[f64]) -> f64 {
    let n = s.len();
    let mut e0 = vec![0.0; n + 1];
    let mut e1: Vec<f64> = s.to_vec();
    let mut best = s[n - 1];
    let mut k = 0;
    while e1.len() > 1 {
        let mut next = Vec::with_capacity(e1.len() - 1);
        for i in 0..e1.len() - 1 {
            let d = e1[i + 1] - e1[i];
            let prev = e0[i + 1];
            next.push(if d == 0.0 { f64::INFINITY } else { prev + 1.0 / d });
        }
        e0 = e1;
        e1 = next;
        k += 1;
        if k % 2 == 0 {
            if let Some(v) = e1.last() {
                if v.is_finite() {
                    best = *v;
                } else {
                    break;
                }
            }
        }
    }
    best
}

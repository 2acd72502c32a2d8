//! Exponent triangles in the `(1/p, 1/q)` square with exact rational
//! vertices and membership.

use crate::error::{domain, Result};
use num_rational::{BigRational, Rational64};
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::fmt;

pub type Q = Rational64;

fn q(a: i64, b: i64) -> Q {
    Q::new(a, b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TriangleKind {
    /// `L^p -> L^q` region of the unit-radius mean: `(0,0), (1,1)` and
    /// `((3n+1)/(3n+4), 3/(3n+4))`.
    SPrime,
    /// Dual of `SPrime`; also the sparse range of the lacunary operator.
    S,
    /// `L^p -> L^q` region of the local full operator: `(0,0)`,
    /// `((2n-1)/2n, (2n-1)/2n)` and `((3n+1)/(3n+7), 6/(3n+7))`.
    FPrime,
    /// Dual of `FPrime`; the sparse range of the full operator.
    F,
    /// Euclidean lacunary range `(0,1), (1,0), (n/(n+1), n/(n+1))`.
    Euclidean,
}

impl TriangleKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "S'" | "s-prime" | "lp-lq" => TriangleKind::SPrime,
            "S" | "s" | "lacunary-sparse" => TriangleKind::S,
            "F'" | "f-prime" | "full-lp-lq" => TriangleKind::FPrime,
            "F" | "f" | "full-sparse" => TriangleKind::F,
            "euclidean" => TriangleKind::Euclidean,
            _ => return domain(format!("unknown triangle {name:?}")),
        })
    }

    pub fn all() -> [TriangleKind; 5] {
        [TriangleKind::SPrime, TriangleKind::S, TriangleKind::FPrime, TriangleKind::F, TriangleKind::Euclidean]
    }

    pub fn name(self) -> &'static str {
        match self {
            TriangleKind::SPrime => "S'",
            TriangleKind::S => "S",
            TriangleKind::FPrime => "F'",
            TriangleKind::F => "F",
            TriangleKind::Euclidean => "euclidean",
        }
    }
}

/// Vertices in counter-clockwise order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentTriangle {
    pub kind: TriangleKind,
    pub n: u32,
    #[serde(serialize_with = "ser_vertices")]
    pub vertices: [(Q, Q); 3],
}

fn ser_vertices<S: serde::Serializer>(v: &[(Q, Q); 3], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(3))?;
    for (a, b) in v {
        seq.serialize_element(&(a.to_string(), b.to_string()))?;
    }
    seq.end()
}

fn cross(o: (Q, Q), a: (Q, Q), b: (Q, Q)) -> Q {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// `(1/p, 1/q) -> (1/p, 1 - 1/q)`.
pub fn dual(v: (Q, Q)) -> (Q, Q) {
    (v.0, Q::one() - v.1)
}

impl ExponentTriangle {
    pub fn new(kind: TriangleKind, n: u32) -> Result<Self> {
        if n == 0 {
            return domain("n must be at least 1");
        }
        let m = n as i64;
        let zero = Q::zero();
        let one = Q::one();
        let s_apex = (q(3 * m + 1, 3 * m + 4), q(3, 3 * m + 4));
        let f_edge = (q(2 * m - 1, 2 * m), q(2 * m - 1, 2 * m));
        let f_apex = (q(3 * m + 1, 3 * m + 7), q(6, 3 * m + 7));
        let v = match kind {
            TriangleKind::SPrime => [(zero, zero), (one, one), s_apex],
            TriangleKind::S => [dual((zero, zero)), dual((one, one)), dual(s_apex)],
            TriangleKind::FPrime => [(zero, zero), f_edge, f_apex],
            TriangleKind::F => [dual((zero, zero)), dual(f_edge), dual(f_apex)],
            TriangleKind::Euclidean => [(zero, one), (one, zero), (q(m, m + 1), q(m, m + 1))],
        };
        Ok(ExponentTriangle::from_vertices(kind, n, v))
    }

    fn from_vertices(kind: TriangleKind, n: u32, mut v: [(Q, Q); 3]) -> Self {
        if cross(v[0], v[1], v[2]) < Q::zero() {
            v.swap(1, 2);
        }
        ExponentTriangle { kind, n, vertices: v }
    }

    /// Image under the duality map.
    pub fn dual(&self) -> ExponentTriangle {
        ExponentTriangle::from_vertices(self.kind, self.n, self.vertices.map(dual))
    }

    /// Barycentric membership; `strict` asks for the open interior.
    pub fn contains(&self, p_inv: Q, q_inv: Q, strict: bool) -> bool {
        let x = (p_inv, q_inv);
        let v = &self.vertices;
        (0..3).all(|i| {
            let c = cross(v[i], v[(i + 1) % 3], x);
            if strict {
                c > Q::zero()
            } else {
                c >= Q::zero()
            }
        })
    }

    /// Membership of a floating point pair, decided exactly on its binary
    /// value.
    pub fn contains_f64(&self, p_inv: f64, q_inv: f64, strict: bool) -> bool {
        let (Some(a), Some(b)) = (BigRational::from_float(p_inv), BigRational::from_float(q_inv)) else {
            return false;
        };
        let big = |x: Q| BigRational::new((*x.numer()).into(), (*x.denom()).into());
        let v: Vec<(BigRational, BigRational)> = self.vertices.iter().map(|&(x, y)| (big(x), big(y))).collect();
        (0..3).all(|i| {
            let (o, p) = (&v[i], &v[(i + 1) % 3]);
            let c = (&p.0 - &o.0) * (&b - &o.1) - (&p.1 - &o.1) * (&a - &o.0);
            if strict {
                c.is_positive()
            } else {
                !c.is_negative()
            }
        })
    }

    /// Every point of `self` lies in `other`.
    pub fn is_inside(&self, other: &ExponentTriangle) -> bool {
        self.vertices.iter().all(|&(a, b)| other.contains(a, b, false))
    }

    pub fn centroid(&self) -> (Q, Q) {
        let v = &self.vertices;
        ((v[0].0 + v[1].0 + v[2].0) / q(3, 1), (v[0].1 + v[1].1 + v[2].1) / q(3, 1))
    }

    /// `sum_i w_i v_i` for barycentric weights summing to one.
    pub fn barycentric(&self, w: [Q; 3]) -> Result<(Q, Q)> {
        if w.iter().copied().sum::<Q>() != Q::one() || w.iter().any(|x| *x < Q::zero()) {
            return domain("barycentric weights must be nonnegative and sum to 1");
        }
        let v = &self.vertices;
        Ok((0..3).fold((Q::zero(), Q::zero()), |acc, i| (acc.0 + w[i] * v[i].0, acc.1 + w[i] * v[i].1)))
    }

    /// Closed boundary polyline with `per_edge` segments per edge.
    pub fn polyline(&self, per_edge: usize) -> Vec<(f64, f64)> {
        let f = |x: Q| *x.numer() as f64 / *x.denom() as f64;
        let m = per_edge.max(1);
        let mut out = Vec::with_capacity(3 * m + 1);
        for i in 0..3 {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % 3]);
            for j in 0..m {
                let s = j as f64 / m as f64;
                out.push((f(a.0) + s * (f(b.0) - f(a.0)), f(a.1) + s * (f(b.1) - f(a.1))));
            }
        }
        out.push(out[0]);
        out
    }
}

impl fmt::Display for ExponentTriangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}:", self.kind.name(), self.n)?;
        for (a, b) in &self.vertices {
            write!(f, " ({a}, {b})")?;
        }
        Ok(())
    }
}

/// The triangle named `name` for dimension `n`.
pub fn triangle(name: &str, n: u32) -> Result<ExponentTriangle> {
    ExponentTriangle::new(TriangleKind::parse(name)?, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn has(t: &ExponentTriangle, v: (Q, Q)) -> bool {
        t.vertices.contains(&v)
    }

    #[test]
    fn vertices_at_n2() {
        let s = triangle("S'", 2).unwrap();
        assert!(has(&s, (q(7, 10), q(3, 10))));
        let f = triangle("F'", 2).unwrap();
        for v in [(q(0, 1), q(0, 1)), (q(3, 4), q(3, 4)), (q(7, 13), q(6, 13))] {
            assert!(has(&f, v), "{f}");
        }
        let sd = triangle("S", 2).unwrap();
        for v in [(q(0, 1), q(1, 1)), (q(1, 1), q(0, 1)), (q(7, 10), q(7, 10))] {
            assert!(has(&sd, v));
        }
        let fd = triangle("F", 3).unwrap();
        for v in [(q(0, 1), q(1, 1)), (q(5, 6), q(1, 6)), (q(10, 16), q(10, 16))] {
            assert!(has(&fd, v));
        }
        assert!(triangle("T", 2).is_err());
        assert!(triangle("S", 0).is_err());
    }

    #[test]
    fn duality_is_an_involution() {
        for n in 1..6 {
            for k in TriangleKind::all() {
                let t = ExponentTriangle::new(k, n).unwrap();
                assert_eq!(t.dual().dual().vertices.iter().collect::<std::collections::HashSet<_>>(), t.vertices.iter().collect());
            }
            let sp = ExponentTriangle::new(TriangleKind::SPrime, n).unwrap();
            let s = ExponentTriangle::new(TriangleKind::S, n).unwrap();
            assert_eq!(sp.dual().vertices.iter().collect::<std::collections::HashSet<_>>(), s.vertices.iter().collect());
        }
    }

    #[test]
    fn membership_semantics() {
        let t = triangle("S", 2).unwrap();
        let (a, b) = t.centroid();
        assert!(t.contains(a, b, true));
        for &(x, y) in &t.vertices {
            assert!(!t.contains(x, y, true));
            assert!(t.contains(x, y, false));
        }
        // midpoint of an edge
        assert!(!t.contains(q(1, 2), q(1, 2), true) && t.contains(q(1, 2), q(1, 2), false));
        assert!(t.contains_f64(0.7, 0.55, true) && !t.contains_f64(0.9, 0.6, false));
        assert!(!t.contains_f64(0.5, 0.5, true) && t.contains_f64(0.5, 0.5, false));
        assert!(!t.contains_f64(f64::NAN, 0.5, false));
    }

    #[test]
    fn euclidean_vertex_inside_lacunary_range() {
        for n in 2..=6 {
            let t = triangle("S", n).unwrap();
            let m = n as i64;
            assert!(t.contains(q(m, m + 1), q(m, m + 1), true));
            assert!(triangle("euclidean", n).unwrap().is_inside(&t));
        }
    }

    #[test]
    fn full_inside_lacunary() {
        for n in 2..=10 {
            assert!(triangle("F'", n).unwrap().is_inside(&triangle("S'", n).unwrap()));
            assert!(triangle("F", n).unwrap().is_inside(&triangle("S", n).unwrap()));
            assert!(!triangle("S'", n).unwrap().is_inside(&triangle("F'", n).unwrap()));
        }
    }

    #[test]
    fn polyline_closes() {
        let t = triangle("F'", 4).unwrap();
        let p = t.polyline(5);
        assert_eq!(p.len(), 16);
        assert_eq!(p[0], p[15]);
    }
}

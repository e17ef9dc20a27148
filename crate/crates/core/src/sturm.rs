//! Real-rootedness of univariate polynomials by Sturm sequences.
//!
//! A polynomial `p` of degree `d` is real-rooted iff its number of distinct
//! real roots, `V(-inf) - V(+inf)` over the Sturm chain, equals its number of
//! distinct complex roots, `d - deg gcd(p, p')`. Only the leading
//! coefficients of the chain are needed, so no evaluation happens; the
//! numerical risk sits in deciding the degree of each remainder.
//!
//! The double-precision chain is accepted only when every leading
//! coefficient clears a guard band relative to the magnitude of the terms
//! that produced it and the chain ends in a non-zero constant. Anything else
//! is recomputed in exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};
use serde::{Deserialize, Serialize};

/// Relative guard: a computed coefficient is trusted only when its
/// magnitude exceeds this multiple of its accumulated term magnitude.
const GUARD: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootCount {
    pub degree: usize,
    pub distinct_real_roots: usize,
    pub distinct_roots: usize,
    /// `true` when the double-precision chain was ambiguous and the count
    /// comes from exact arithmetic.
    pub exact: bool,
}

impl RootCount {
    pub fn real_rooted(&self) -> bool {
        self.distinct_real_roots == self.distinct_roots
    }
}

/// Converts a finite f64 into the rational it represents exactly.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite float")
}

/// Counts roots of the polynomial with coefficients `coeffs` (lowest degree
/// first), falling back to exact arithmetic on the same coefficients.
pub fn count_roots(coeffs: &[f64]) -> RootCount {
    count_roots_with(coeffs, || coeffs.iter().map(|c| rational(*c)).collect())
}

/// Like [`count_roots`], but the exact fallback uses `exact()`, for callers
/// whose f64 coefficients are themselves rounded images of exact values.
pub fn count_roots_with<F>(coeffs: &[f64], exact: F) -> RootCount
where
    F: FnOnce() -> Vec<BigRational>,
{
    match float_count(coeffs) {
        Some(c) => c,
        None => exact_count(&exact()),
    }
}

#[derive(Clone)]
struct FPoly {
    c: Vec<f64>,
    mag: Vec<f64>,
}

impl FPoly {
    fn degree(&self) -> usize {
        self.c.len() - 1
    }

    fn lead(&self) -> f64 {
        *self.c.last().expect("non-empty")
    }
}

fn sign_changes(signs: &[i8]) -> usize {
    let nz: Vec<i8> = signs.iter().copied().filter(|s| *s != 0).collect();
    nz.windows(2).filter(|w| w[0] != w[1]).count()
}

fn tail_signs(leads: &[(i8, usize)]) -> (usize, usize) {
    let at_pos: Vec<i8> = leads.iter().map(|(s, _)| *s).collect();
    let at_neg: Vec<i8> = leads
        .iter()
        .map(|(s, d)| if d % 2 == 0 { *s } else { -*s })
        .collect();
    (sign_changes(&at_neg), sign_changes(&at_pos))
}

fn float_count(coeffs: &[f64]) -> Option<RootCount> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    let degree = c.len() - 1;
    if degree == 0 {
        return Some(RootCount { degree, distinct_real_roots: 0, distinct_roots: 0, exact: false });
    }
    let p = FPoly { mag: c.iter().map(|x| x.abs()).collect(), c };
    let dp = FPoly {
        c: (1..p.c.len()).map(|k| k as f64 * p.c[k]).collect(),
        mag: (1..p.c.len()).map(|k| k as f64 * p.mag[k]).collect(),
    };
    let mut chain = vec![normalize(p), normalize(dp)];
    loop {
        let n = chain.len();
        let (a, b) = (&chain[n - 2], &chain[n - 1]);
        if b.degree() == 0 {
            break;
        }
        let r = remainder(a, b)?;
        chain.push(normalize(r.negated()));
    }
    let leads: Vec<(i8, usize)> = chain
        .iter()
        .map(|p| (if p.lead() > 0.0 { 1 } else { -1 }, p.degree()))
        .collect();
    let (neg, pos) = tail_signs(&leads);
    Some(RootCount {
        degree,
        distinct_real_roots: neg - pos,
        distinct_roots: degree,
        exact: false,
    })
}

impl FPoly {
    fn negated(self) -> Self {
        Self { c: self.c.into_iter().map(|x| -x).collect(), mag: self.mag }
    }
}

fn normalize(p: FPoly) -> FPoly {
    let s = p.c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if s == 0.0 {
        return p;
    }
    FPoly {
        c: p.c.iter().map(|x| x / s).collect(),
        mag: p.mag.iter().map(|x| x / s).collect(),
    }
}

/// Remainder of `a / b`, or `None` when a leading coefficient of the
/// remainder cannot be separated from rounding noise.
fn remainder(a: &FPoly, b: &FPoly) -> Option<FPoly> {
    let mut r = a.clone();
    let db = b.degree();
    let lb = b.lead();
    if lb.abs() <= GUARD * b.mag[db] {
        return None;
    }
    while r.c.len() > db {
        let dr = r.degree();
        let q = r.c[dr] / lb;
        let qmag = r.mag[dr] / lb.abs() + q.abs() * b.mag[db] / lb.abs();
        let shift = dr - db;
        for k in 0..=db {
            r.c[shift + k] -= q * b.c[k];
            r.mag[shift + k] += q.abs() * b.mag[k] + qmag * b.c[k].abs();
        }
        r.c.pop();
        r.mag.pop();
    }
    // the new leading coefficient must be clearly non-zero
    let lead = *r.c.last()?;
    let lead_mag = *r.mag.last()?;
    if lead.abs() <= GUARD * lead_mag.max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(r)
}

fn trim(mut c: Vec<BigRational>) -> Vec<BigRational> {
    while c.len() > 1 && c.last().map(|x| x.is_zero()).unwrap_or(false) {
        c.pop();
    }
    c
}

fn is_zero_poly(c: &[BigRational]) -> bool {
    c.len() == 1 && c[0].is_zero()
}

/// Remainder of `a / b` for `deg b >= 1`.
fn exact_remainder(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    while r.len() > db && !is_zero_poly(&r) {
        let dr = r.len() - 1;
        let q = &r[dr] / &b[db];
        let shift = dr - db;
        for k in 0..=db {
            let t = &q * &b[k];
            r[shift + k] -= t;
        }
        r.pop();
        if r.is_empty() {
            r.push(BigRational::zero());
        }
        r = trim(r);
    }
    r
}

/// Scales to integer coefficients with unit content, keeping the sign.
fn primitive(c: Vec<BigRational>) -> Vec<BigRational> {
    use num_integer::Integer;
    let lcm = c
        .iter()
        .fold(BigInt::from(1), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = c.iter().map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return c;
    }
    ints.into_iter().map(|x| BigRational::from_integer(x / &g)).collect()
}

/// Exact Sturm count.
pub fn exact_count(coeffs: &[BigRational]) -> RootCount {
    let p = trim(coeffs.to_vec());
    let degree = p.len() - 1;
    if degree == 0 {
        return RootCount { degree, distinct_real_roots: 0, distinct_roots: 0, exact: true };
    }
    let dp: Vec<BigRational> = (1..p.len())
        .map(|k| &p[k] * BigRational::from_integer(BigInt::from(k)))
        .collect();
    let mut chain = vec![primitive(p), primitive(dp)];
    loop {
        let n = chain.len();
        let r = exact_remainder(&chain[n - 2], &chain[n - 1]);
        if is_zero_poly(&r) {
            break;
        }
        chain.push(primitive(r.into_iter().map(|x| -x).collect()));
        if chain.last().unwrap().len() == 1 {
            break;
        }
    }
    let gcd_degree = chain.last().unwrap().len() - 1;
    let leads: Vec<(i8, usize)> = chain
        .iter()
        .map(|c| {
            let l = c.last().unwrap();
            (if l.is_positive() { 1 } else { -1 }, c.len() - 1)
        })
        .collect();
    let (neg, pos) = tail_signs(&leads);
    RootCount {
        degree,
        distinct_real_roots: neg - pos,
        distinct_roots: degree - gcd_degree,
        exact: true,
    }
}

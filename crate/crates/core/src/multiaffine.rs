//! Multi-affine generating polynomials of measures on subsets of `[n]`.
//!
//! Subsets are bitmasks: bit `i` set means coordinate `i` (0-based) is in
//! the subset. Coefficients are stored densely, so `n` is capped at
//! [`MAX_GROUND`].

use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete_laws::{Pmf, MASS_TOL};
use crate::error::{Error, Result};
use crate::numeric::{binomial, compensated_sum, KahanSum};
use crate::sturm::{count_roots_with, rational};

/// Largest ground set size supported.
pub const MAX_GROUND: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    /// Non-negative coefficients summing to one.
    Probability,
    /// Arbitrary real coefficients (derivatives, intermediate results).
    Polynomial,
}

/// A measure on `2^[n]`, doubling as the coefficient table of its
/// generating polynomial `sum_S mu(S) z^S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct SubsetMeasure {
    n: usize,
    coeffs: Vec<f64>,
    kind: MeasureKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureRepr {
    n: usize,
    entries: Vec<(u32, f64)>,
}

impl TryFrom<MeasureRepr> for SubsetMeasure {
    type Error = Error;

    fn try_from(r: MeasureRepr) -> Result<Self> {
        let m = SubsetMeasure::polynomial(r.n, r.entries)?;
        let total = compensated_sum(m.coeffs.iter().copied());
        if m.coeffs.iter().all(|c| *c >= 0.0) && (total - 1.0).abs() <= MASS_TOL {
            Ok(SubsetMeasure { kind: MeasureKind::Probability, ..m })
        } else {
            Ok(m)
        }
    }
}

impl From<SubsetMeasure> for MeasureRepr {
    fn from(m: SubsetMeasure) -> Self {
        MeasureRepr { n: m.n, entries: m.entries() }
    }
}

fn check_ground(n: usize) -> Result<()> {
    if n > MAX_GROUND {
        return Err(Error::Guard {
            what: "ground set size".into(),
            limit: MAX_GROUND as u64,
            got: n as u64,
        });
    }
    Ok(())
}

impl SubsetMeasure {
    /// Probability measure from `(bitmask, weight)` entries; repeated masks
    /// accumulate.
    pub fn probability<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        let m = Self::polynomial(n, entries)?;
        if let Some((s, c)) = m.coeffs.iter().enumerate().find(|(_, c)| **c < 0.0) {
            return Err(Error::Domain(format!("negative weight {c} on subset {s:#b}")));
        }
        let total = compensated_sum(m.coeffs.iter().copied());
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!("weights sum to {total}")));
        }
        Ok(Self { kind: MeasureKind::Probability, ..m })
    }

    /// Polynomial-mode coefficients (sum and sign unconstrained).
    pub fn polynomial<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        check_ground(n)?;
        let mut coeffs = vec![0.0; 1 << n];
        for (mask, w) in entries {
            if (mask as usize) >= coeffs.len() {
                return Err(Error::Index(format!("subset mask {mask:#b} exceeds n = {n}")));
            }
            if !w.is_finite() {
                return Err(Error::Domain(format!("non-finite weight on {mask:#b}")));
            }
            coeffs[mask as usize] += w;
        }
        Ok(Self { n, coeffs, kind: MeasureKind::Polynomial })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn coeff(&self, mask: u32) -> f64 {
        self.coeffs.get(mask as usize).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Non-zero `(bitmask, weight)` pairs in mask order.
    pub fn entries(&self) -> Vec<(u32, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(s, c)| (s as u32, *c))
            .collect()
    }

    fn require_probability(&self) -> Result<()> {
        match self.kind {
            MeasureKind::Probability => Ok(()),
            MeasureKind::Polynomial => Err(Error::Precondition(
                "operation needs a probability-mode measure".into(),
            )),
        }
    }

    /// Measure on `n - 1` coordinates obtained by summing out coordinate
    /// `i`, i.e. the polynomial with `z_i = 1`.
    pub fn contract(&self, i: usize) -> Result<SubsetMeasure> {
        if i >= self.n {
            return Err(Error::Index(format!("coordinate {i} out of range for n = {}", self.n)));
        }
        let low = (1u32 << i) - 1;
        let entries = self.entries().into_iter().map(|(s, w)| {
            let packed = (s & low) | ((s >> (i + 1)) << i);
            (packed, w)
        });
        let m = SubsetMeasure::polynomial(self.n - 1, entries)?;
        Ok(SubsetMeasure { kind: self.kind, ..m })
    }

    /// Coefficients of the univariate diagonal `P(z, ..., z)`.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut acc = vec![KahanSum::new(); self.n + 1];
        for (s, c) in self.coeffs.iter().enumerate() {
            acc[(s as u32).count_ones() as usize].add(*c);
        }
        acc.into_iter().map(|a| a.value()).collect()
    }

    /// Law of the random subset as a joint law of 0/1 indicators.
    pub fn to_joint(&self) -> Result<crate::discrete_laws::JointPmf> {
        self.require_probability()?;
        let n = self.n;
        crate::discrete_laws::JointPmf::normalized_from_atoms(
            n,
            self.entries().into_iter().map(|(s, w)| {
                ((0..n).map(|i| ((s >> i) & 1) as f64).collect(), w)
            }),
        )
    }
}

/// `sum_S mu(S) prod_{i in S} x_i` with compensated summation.
pub fn evaluate(m: &SubsetMeasure, x: &[f64]) -> Result<f64> {
    if x.len() != m.n {
        return Err(Error::DimensionMismatch { expected: m.n, got: x.len() });
    }
    Ok(compensated_sum(m.coeffs.iter().enumerate().filter(|(_, c)| **c != 0.0).map(
        |(s, c)| c * monomial(s as u32, x),
    )))
}

fn monomial(mask: u32, x: &[f64]) -> f64 {
    let mut v = 1.0;
    let mut bits = mask;
    while bits != 0 {
        let i = bits.trailing_zeros() as usize;
        v *= x[i];
        bits &= bits - 1;
    }
    v
}

/// `d/dz_i` of the generating polynomial; polynomial-mode result on the same
/// ground set (coordinate `i` no longer appears).
pub fn partial_derivative(m: &SubsetMeasure, i: usize) -> Result<SubsetMeasure> {
    if i >= m.n {
        return Err(Error::Index(format!("coordinate {i} out of range for n = {}", m.n)));
    }
    let bit = 1u32 << i;
    let entries = m
        .entries()
        .into_iter()
        .filter(|(s, _)| s & bit != 0)
        .map(|(s, w)| (s & !bit, w));
    SubsetMeasure::polynomial(m.n, entries)
}

/// Splits `P = A + B z_i + C z_j + D z_i z_j` at `x` (other coordinates
/// evaluated). The Rayleigh slack is then `B C - A D`, free of `x_i, x_j`.
fn pair_split(m: &SubsetMeasure, x: &[f64], i: usize, j: usize) -> [f64; 4] {
    let (bi, bj) = (1u32 << i, 1u32 << j);
    let mut acc = [KahanSum::new(); 4];
    for (s, c) in m.coeffs.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let s = s as u32;
        let slot = ((s & bi != 0) as usize) | (((s & bj != 0) as usize) << 1);
        acc[slot].add(c * monomial(s & !bi & !bj, x));
    }
    [acc[0].value(), acc[1].value(), acc[2].value(), acc[3].value()]
}

/// `dP/dz_i(x) dP/dz_j(x) - P(x) d2P/dz_i dz_j(x)`; non-negative when the
/// Rayleigh inequality holds at `x` for the pair.
pub fn rayleigh_at(m: &SubsetMeasure, x: &[f64], i: usize, j: usize) -> Result<f64> {
    if x.len() != m.n {
        return Err(Error::DimensionMismatch { expected: m.n, got: x.len() });
    }
    if i == j {
        return Err(Error::Index(format!("Rayleigh slack needs i != j (got {i}, {j})")));
    }
    if i >= m.n || j >= m.n {
        return Err(Error::Index(format!("pair ({i}, {j}) out of range for n = {}", m.n)));
    }
    let [a, b, c, d] = pair_split(m, x, i, j);
    Ok(b * c - a * d)
}

/// The same slack in exact rational arithmetic (inputs are taken as the
/// rationals their f64 values represent).
pub fn rayleigh_at_exact(m: &SubsetMeasure, x: &[f64], i: usize, j: usize) -> BigRational {
    let (bi, bj) = (1u32 << i, 1u32 << j);
    let xr: Vec<BigRational> = x.iter().map(|v| rational(*v)).collect();
    let mut acc = [BigRational::zero(), BigRational::zero(), BigRational::zero(), BigRational::zero()];
    for (s, c) in m.entries() {
        let slot = ((s & bi != 0) as usize) | (((s & bj != 0) as usize) << 1);
        let mut term = rational(c);
        let mut bits = s & !bi & !bj;
        while bits != 0 {
            let k = bits.trailing_zeros() as usize;
            term *= &xr[k];
            bits &= bits - 1;
        }
        acc[slot] += term;
    }
    &acc[1] * &acc[2] - &acc[0] * &acc[3]
}

fn to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Trial budgets and sampling region for the stability semi-decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    /// Points evaluated for every pair (lattice plus scattered points).
    pub grid_points_per_pair: usize,
    /// Random lines `t -> a + t b` tested for real-rootedness.
    pub lines: usize,
    /// Half-width of the lattice box.
    pub box_radius: f64,
    /// Slack below `-tol` counts as a violation.
    pub tol: f64,
    pub seed: u64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            grid_points_per_pair: 10_000,
            lines: 1_000,
            box_radius: 5.0,
            tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityStatus {
    Violated,
    NoViolationFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StabilityWitness {
    /// Rayleigh inequality fails at `point` for the pair `(i, j)`.
    Rayleigh {
        point: Vec<f64>,
        i: usize,
        j: usize,
        slack: f64,
        /// Slack recomputed in exact rational arithmetic.
        exact_slack: f64,
    },
    /// `t -> P(a + t b)` has non-real roots.
    Line {
        a: Vec<f64>,
        b: Vec<f64>,
        degree: usize,
        distinct_real_roots: usize,
        distinct_roots: usize,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialCounts {
    pub grid_points: usize,
    pub pair_tests: usize,
    pub lines: usize,
    /// Float-path violations that exact recomputation did not confirm.
    pub rejected_witnesses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub status: StabilityStatus,
    pub witness: Option<StabilityWitness>,
    pub trials: TrialCounts,
}

impl StabilityVerdict {
    pub fn violated(&self) -> bool {
        self.status == StabilityStatus::Violated
    }
}

/// Deterministic lattice over `[lo, hi]^n` plus seeded scattered points,
/// `budget` points in total.
fn trial_points(n: usize, lo: f64, hi: f64, budget: usize, rng: &mut ChaCha8Rng, scatter: &dyn Fn(&mut ChaCha8Rng) -> f64) -> Vec<Vec<f64>> {
    let mut per_axis = 2usize;
    while (per_axis + 1).checked_pow(n as u32).map(|c| c <= budget / 2).unwrap_or(false) {
        per_axis += 1;
    }
    let mut points = Vec::with_capacity(budget);
    let lattice = per_axis.checked_pow(n as u32).unwrap_or(usize::MAX);
    if lattice <= budget {
        let axis: Vec<f64> = (0..per_axis)
            .map(|k| lo + (hi - lo) * k as f64 / (per_axis - 1) as f64)
            .collect();
        for idx in 0..lattice {
            let mut rem = idx;
            let p: Vec<f64> = (0..n)
                .map(|_| {
                    let v = axis[rem % per_axis];
                    rem /= per_axis;
                    v
                })
                .collect();
            points.push(p);
        }
    }
    while points.len() < budget {
        points.push((0..n).map(|_| scatter(rng)).collect());
    }
    points
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect()
}

/// Scans `points x pairs` in order and returns the first violation that
/// survives exact re-verification, with the number of rejected float-path
/// candidates.
fn scan_rayleigh(m: &SubsetMeasure, points: &[Vec<f64>], tol: f64) -> (Option<StabilityWitness>, usize) {
    let prs = pairs(m.n);
    let rejected = std::sync::atomic::AtomicUsize::new(0);
    let witness = points.par_iter().find_map_first(|x| {
        prs.iter().find_map(|&(i, j)| {
            let [a, b, c, d] = pair_split(m, x, i, j);
            let slack = b * c - a * d;
            if slack >= -tol {
                return None;
            }
            let exact = rayleigh_at_exact(m, x, i, j);
            let exact_f = to_f64(&exact);
            if exact_f < -tol {
                Some(StabilityWitness::Rayleigh { point: x.clone(), i, j, slack, exact_slack: exact_f })
            } else {
                rejected.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                None
            }
        })
    });
    (witness, rejected.into_inner())
}

/// Rayleigh property: the pairwise inequality on the non-negative orthant,
/// tested on `[0, box_radius]^n` and scattered non-negative points.
pub fn is_rayleigh(m: &SubsetMeasure, cfg: &StabilityConfig) -> Result<StabilityVerdict> {
    m.require_probability()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.box_radius / 2.0).expect("positive scale");
    let points = trial_points(m.n, 0.0, cfg.box_radius, cfg.grid_points_per_pair, &mut rng, &|r| {
        normal.sample(r).abs()
    });
    let n_pairs = pairs(m.n).len();
    let (witness, rejected) = if n_pairs == 0 { (None, 0) } else { scan_rayleigh(m, &points, cfg.tol) };
    Ok(StabilityVerdict {
        status: if witness.is_some() { StabilityStatus::Violated } else { StabilityStatus::NoViolationFound },
        witness,
        trials: TrialCounts {
            grid_points: points.len(),
            pair_tests: points.len() * n_pairs,
            lines: 0,
            rejected_witnesses: rejected,
        },
    })
}

/// Coefficients (in `t`) of `P(a + t b)`.
pub fn line_restriction(m: &SubsetMeasure, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut acc = vec![KahanSum::new(); m.n + 1];
    for (s, c) in m.entries() {
        let mut poly = vec![c];
        let mut bits = s;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            let mut next = vec![0.0; poly.len() + 1];
            for (k, v) in poly.iter().enumerate() {
                next[k] += v * a[i];
                next[k + 1] += v * b[i];
            }
            poly = next;
            bits &= bits - 1;
        }
        for (k, v) in poly.into_iter().enumerate() {
            acc[k].add(v);
        }
    }
    acc.into_iter().map(|s| s.value()).collect()
}

fn line_restriction_exact(m: &SubsetMeasure, a: &[f64], b: &[f64]) -> Vec<BigRational> {
    let ar: Vec<BigRational> = a.iter().map(|v| rational(*v)).collect();
    let br: Vec<BigRational> = b.iter().map(|v| rational(*v)).collect();
    let mut acc = vec![BigRational::zero(); m.n + 1];
    for (s, c) in m.entries() {
        let mut poly = vec![rational(c)];
        let mut bits = s;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            let mut next = vec![BigRational::zero(); poly.len() + 1];
            for (k, v) in poly.iter().enumerate() {
                next[k] += v * &ar[i];
                next[k + 1] += v * &br[i];
            }
            poly = next;
            bits &= bits - 1;
        }
        for (k, v) in poly.into_iter().enumerate() {
            acc[k] += v;
        }
    }
    acc
}

/// Strong Rayleigh (real stability) as a randomized semi-decision:
/// (a) the pairwise inequality over `[-r, r]^n` and Gaussian points,
/// (b) real-rootedness of `t -> P(a + t b)` along seeded lines with `b > 0`.
/// Any reported violation has been confirmed in exact arithmetic.
pub fn is_strongly_rayleigh(m: &SubsetMeasure, cfg: &StabilityConfig) -> Result<StabilityVerdict> {
    m.require_probability()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = cfg.box_radius;
    let normal = Normal::new(0.0, r / 2.0).expect("positive scale");
    let points = trial_points(m.n, -r, r, cfg.grid_points_per_pair, &mut rng, &|g| normal.sample(g));
    let n_pairs = pairs(m.n).len();
    let (witness, rejected) = if n_pairs == 0 { (None, 0) } else { scan_rayleigh(m, &points, cfg.tol) };
    let mut trials = TrialCounts {
        grid_points: points.len(),
        pair_tests: points.len() * n_pairs,
        lines: 0,
        rejected_witnesses: rejected,
    };
    if witness.is_some() {
        return Ok(StabilityVerdict { status: StabilityStatus::Violated, witness, trials });
    }

    let positive = Uniform::new(0.1, 2.0).expect("valid range");
    let lines: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.lines)
        .map(|_| {
            let a: Vec<f64> = (0..m.n).map(|_| normal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..m.n).map(|_| rng.sample(positive)).collect();
            (a, b)
        })
        .collect();
    let witness = lines.par_iter().find_map_first(|(a, b)| {
        let coeffs = line_restriction(m, a, b);
        let count = count_roots_with(&coeffs, || line_restriction_exact(m, a, b));
        if count.real_rooted() {
            return None;
        }
        // a float-path verdict is re-derived exactly before it is reported
        let count = if count.exact {
            count
        } else {
            crate::sturm::exact_count(&line_restriction_exact(m, a, b))
        };
        (!count.real_rooted()).then(|| StabilityWitness::Line {
            a: a.clone(),
            b: b.clone(),
            degree: count.degree,
            distinct_real_roots: count.distinct_real_roots,
            distinct_roots: count.distinct_roots,
        })
    });
    trials.lines = lines.len();
    Ok(StabilityVerdict {
        status: if witness.is_some() { StabilityStatus::Violated } else { StabilityStatus::NoViolationFound },
        witness,
        trials,
    })
}

/// Re-derives a witness in exact arithmetic; `true` when the violation is
/// reproduced.
pub fn verify_witness(m: &SubsetMeasure, w: &StabilityWitness, tol: f64) -> bool {
    match w {
        StabilityWitness::Rayleigh { point, i, j, .. } => {
            let exact = rayleigh_at_exact(m, point, *i, *j);
            exact < -rational(tol)
        }
        StabilityWitness::Line { a, b, .. } => {
            !crate::sturm::exact_count(&line_restriction_exact(m, a, b)).real_rooted()
        }
    }
}

/// `e_k(values)` by the triangle recurrence `e_j <- e_j + x e_{j-1}`, each
/// `e_j` carried in a compensated accumulator.
pub fn elementary_symmetric(values: &[f64], k: usize) -> Result<f64> {
    if k > values.len() {
        return Err(Error::Index(format!("e_{k} of {} values", values.len())));
    }
    let mut e = vec![KahanSum::new(); k + 1];
    e[0].add(1.0);
    for &x in values {
        for j in (1..=k).rev() {
            let prev = e[j - 1].value();
            e[j].add(x * prev);
        }
    }
    Ok(e[k].value())
}

/// Polarization of a count law: the exchangeable measure with
/// `mu(S) = P(tau = |S|) / C(n, |S|)` on `2^[n]`, `n = tau.bound()`.
pub fn polarize(tau: &Pmf) -> Result<SubsetMeasure> {
    let n = tau.bound();
    if n < 1 {
        return Err(Error::DegenerateSupport("polarization needs n >= 1".into()));
    }
    check_ground(n)?;
    let level: Vec<f64> = (0..=n).map(|k| tau.prob(k) / binomial(n, k)).collect();
    let coeffs = (0..1usize << n).map(|s| level[s.count_ones() as usize]).collect();
    Ok(SubsetMeasure { n, coeffs, kind: MeasureKind::Probability })
}

/// Independent Bernoulli(`ps[i]`) inclusions.
pub fn product_measure(ps: &[f64]) -> Result<SubsetMeasure> {
    check_ground(ps.len())?;
    if let Some(p) = ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    let n = ps.len();
    let coeffs = (0..1usize << n)
        .map(|s| {
            (0..n)
                .map(|i| if s >> i & 1 == 1 { ps[i] } else { 1.0 - ps[i] })
                .product()
        })
        .collect();
    Ok(SubsetMeasure { n, coeffs, kind: MeasureKind::Probability })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> SubsetMeasure {
        SubsetMeasure::probability(2, [(0b00, 0.5), (0b11, 0.5)]).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let m = product_measure(&[0.3, 0.7]).unwrap();
        assert!((evaluate(&m, &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((evaluate(&m, &[0.0, 0.0]).unwrap() - 0.21).abs() < 1e-15);
        assert_eq!(evaluate(&two_point(), &[2.0, 3.0]).unwrap(), 3.5);
        assert!(matches!(evaluate(&m, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn derivative_examples() {
        let m = product_measure(&[0.2, 0.6]).unwrap();
        let d = partial_derivative(&m, 0).unwrap();
        // p1 (p2 z2 + 1 - p2)
        assert!((d.coeff(0b00) - 0.2 * 0.4).abs() < 1e-15);
        assert!((d.coeff(0b10) - 0.2 * 0.6).abs() < 1e-15);
        assert_eq!(d.coeff(0b01), 0.0);
        let c = SubsetMeasure::probability(1, [(0, 1.0)]).unwrap();
        assert!(partial_derivative(&c, 0).unwrap().entries().is_empty());
        let d = partial_derivative(&two_point(), 1).unwrap();
        assert_eq!(d.entries(), vec![(0b01, 0.5)]);
        assert!(partial_derivative(&c, 1).is_err());
    }

    #[test]
    fn rayleigh_examples() {
        let m = product_measure(&[0.2, 0.5, 0.9]).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.5, -2.0, 3.0], [-4.0, 0.25, 1.0]] {
            for (i, j) in pairs(3) {
                assert!(rayleigh_at(&m, &x, i, j).unwrap().abs() < 1e-15);
            }
        }
        assert_eq!(rayleigh_at(&two_point(), &[0.0, 0.0], 0, 1).unwrap(), -0.25);
        let u = SubsetMeasure::probability(2, [(0, 0.25), (1, 0.25), (2, 0.25), (3, 0.25)]).unwrap();
        assert_eq!(rayleigh_at(&u, &[1.0, 1.0], 0, 1).unwrap(), 0.0);
        assert!(rayleigh_at(&u, &[1.0, 1.0], 1, 1).is_err());
    }

    #[test]
    fn rayleigh_symbolic_oracle() {
        // slack from the definition with hand-differentiated polynomial
        // P = a + b z1 + c z2 + d z1 z2 at x = (x1, x2)
        let (a, b, c, d) = (0.1, 0.2, 0.3, 0.4);
        let m = SubsetMeasure::probability(2, [(0, a), (1, b), (2, c), (3, d)]).unwrap();
        let (x1, x2) = (0.7, -1.3);
        let p = a + b * x1 + c * x2 + d * x1 * x2;
        let d1 = b + d * x2;
        let d2 = c + d * x1;
        let oracle = d1 * d2 - p * d;
        assert!((rayleigh_at(&m, &[x1, x2], 0, 1).unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn rayleigh_and_sr_verdicts() {
        let cfg = StabilityConfig { grid_points_per_pair: 500, lines: 100, ..Default::default() };
        let m = product_measure(&[0.2, 0.5, 0.9]).unwrap();
        assert!(!is_rayleigh(&m, &cfg).unwrap().violated());
        assert!(!is_strongly_rayleigh(&m, &cfg).unwrap().violated());

        let v = is_rayleigh(&two_point(), &cfg).unwrap();
        assert!(v.violated());
        match v.witness.as_ref().unwrap() {
            StabilityWitness::Rayleigh { point, exact_slack, .. } => {
                assert_eq!(point, &vec![0.0, 0.0]);
                assert_eq!(*exact_slack, -0.25);
            }
            w => panic!("unexpected witness {w:?}"),
        }
        assert!(verify_witness(&two_point(), v.witness.as_ref().unwrap(), 1e-10));
        assert!(is_strongly_rayleigh(&two_point(), &cfg).unwrap().violated());

        let single = SubsetMeasure::probability(1, [(0, 0.3), (1, 0.7)]).unwrap();
        let v = is_rayleigh(&single, &cfg).unwrap();
        assert!(!v.violated());
        assert_eq!(v.trials.pair_tests, 0);

        let full = SubsetMeasure::probability(4, [(0b1111, 1.0)]).unwrap();
        assert!(!is_strongly_rayleigh(&full, &cfg).unwrap().violated());
    }

    #[test]
    fn line_layer_alone_catches_two_point() {
        // zero grid budget forces the line layer
        let cfg = StabilityConfig { grid_points_per_pair: 0, lines: 200, ..Default::default() };
        let v = is_strongly_rayleigh(&two_point(), &cfg).unwrap();
        assert!(v.violated());
        assert!(matches!(v.witness, Some(StabilityWitness::Line { .. })));
        assert!(verify_witness(&two_point(), v.witness.as_ref().unwrap(), 1e-10));
    }

    #[test]
    fn symmetric_function_examples() {
        assert_eq!(elementary_symmetric(&[4.0, 5.0], 0).unwrap(), 1.0);
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0], 2).unwrap(), 11.0);
        assert_eq!(elementary_symmetric(&[1.0, 1.0, 1.0], 3).unwrap(), 1.0);
        assert!(elementary_symmetric(&[1.0], 2).is_err());
    }

    #[test]
    fn polarize_examples() {
        let m = polarize(&Pmf::point_mass(3)).unwrap();
        assert_eq!(m.entries(), vec![(0b111, 1.0)]);
        let p = 0.3;
        let m = polarize(&Pmf::binomial(3, p).unwrap()).unwrap();
        let prod = product_measure(&[p; 3]).unwrap();
        for s in 0..8u32 {
            assert!((m.coeff(s) - prod.coeff(s)).abs() < 1e-15);
        }
        let m = polarize(&Pmf::uniform(2)).unwrap();
        assert!((m.coeff(0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.coeff(1) - 1.0 / 6.0).abs() < 1e-15);
        assert!((m.coeff(2) - 1.0 / 6.0).abs() < 1e-15);
        assert!((m.coeff(3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn product_measure_examples() {
        assert_eq!(product_measure(&[1.0, 1.0]).unwrap().entries(), vec![(0b11, 1.0)]);
        let u = product_measure(&[0.5, 0.5]).unwrap();
        assert!(u.coeffs().iter().all(|c| *c == 0.25));
        let m = product_measure(&[0.2, 0.7]).unwrap();
        let want = [0.24, 0.06, 0.56, 0.14];
        for (s, w) in want.iter().enumerate() {
            assert!((m.coeff(s as u32) - w).abs() < 1e-15);
        }
        assert!(product_measure(&[1.2]).is_err());
    }

    #[test]
    fn serialization_shape() {
        let s = serde_json::to_string(&two_point()).unwrap();
        assert_eq!(s, r#"{"n":2,"entries":[[0,0.5],[3,0.5]]}"#);
        let back: SubsetMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back.kind(), MeasureKind::Probability);
        let poly: SubsetMeasure = serde_json::from_str(r#"{"n":1,"entries":[[1,2.0]]}"#).unwrap();
        assert_eq!(poly.kind(), MeasureKind::Polynomial);
        assert!(serde_json::from_str::<SubsetMeasure>(r#"{"n":21,"entries":[]}"#).is_err());
    }
}

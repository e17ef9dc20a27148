//! Laws of the random point count: finite pmfs, joint laws on explicit
//! supports, log-concavity predicates (PF2, ultra log-concavity), Condition N
//! conditioning and the stop-loss / convex-order comparison.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{binomial, compensated_sum, ge_rel, KahanSum};

/// Absolute tolerance on the total mass of a law.
pub const MASS_TOL: f64 = 1e-12;
/// Absolute tolerance on probability-scale inequalities.
pub const PROB_TOL: f64 = 1e-10;
/// Relative tolerance on products of probabilities.
pub const REL_TOL: f64 = 1e-12;
/// Default retained-mass floor for truncating infinite-support laws.
pub const DEFAULT_MASS_FLOOR: f64 = 1.0 - 1e-12;

/// Probability mass function on `{0, ..., n}`.
///
/// Trailing zeros are allowed and act as padding up to a declared bound `n`
/// (needed by [`is_ulc`], whose binomial normalisation depends on `n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfRepr", into = "PmfRepr")]
pub struct Pmf {
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PmfRepr {
    probs: Vec<f64>,
    #[serde(default)]
    n: Option<usize>,
}

impl TryFrom<PmfRepr> for Pmf {
    type Error = Error;

    fn try_from(r: PmfRepr) -> Result<Self> {
        let pmf = Pmf::new(r.probs)?;
        match r.n {
            Some(n) if n + 1 < pmf.probs.len() => Err(Error::InvalidPmf(format!(
                "declared bound n={n} is below the last listed index {}",
                pmf.probs.len() - 1
            ))),
            Some(n) => Ok(pmf.with_bound(n)),
            None => Ok(pmf),
        }
    }
}

impl From<Pmf> for PmfRepr {
    fn from(p: Pmf) -> Self {
        let n = p.bound();
        PmfRepr { probs: p.probs, n: Some(n) }
    }
}

impl Pmf {
    /// Validating constructor: entries finite, non-negative, summing to one
    /// within [`MASS_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPmf("empty probability list".into()));
        }
        if let Some((k, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidPmf(format!("entry {k} is {p}")));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidPmf(format!("entries sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Normalises non-negative weights into a pmf.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidPmf("weights must be finite and non-negative".into()));
        }
        let total = compensated_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::InvalidPmf("weights sum to zero".into()));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn point_mass(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self { probs }
    }

    pub fn binomial(n: usize, p: f64) -> Result<Self> {
        check_probability(p)?;
        let probs = (0..=n)
            .map(|k| binomial(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
            .collect();
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / (n + 1) as f64; n + 1],
        }
    }

    /// Pads with trailing zeros up to bound `n` (no-op if already that long).
    pub fn with_bound(mut self, n: usize) -> Self {
        if self.probs.len() < n + 1 {
            self.probs.resize(n + 1, 0.0);
        }
        self
    }

    /// Drops trailing zeros.
    pub fn trimmed(mut self) -> Self {
        while self.probs.len() > 1 && self.probs[self.probs.len() - 1] == 0.0 {
            self.probs.pop();
        }
        self
    }

    /// Declared support bound `n`.
    pub fn bound(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    /// Largest index carrying positive mass.
    pub fn max_support(&self) -> usize {
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.probs.iter().enumerate().map(|(k, p)| k as f64 * p))
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        compensated_sum(
            self.probs
                .iter()
                .enumerate()
                .map(|(k, p)| (k as f64 - mu).powi(2) * p),
        )
    }

    pub fn cdf(&self, k: usize) -> f64 {
        compensated_sum(self.probs.iter().take(k + 1).copied()).min(1.0)
    }

    /// Probability generating function `sum_k p_k z^k` (Horner).
    pub fn pgf(&self, z: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, p| acc * z + p)
    }
}

/// Where an infinite-support law was cut and how much mass survived before
/// renormalisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub point: usize,
    pub retained_mass: f64,
}

impl Truncation {
    pub fn exact(point: usize) -> Self {
        Self { point, retained_mass: 1.0 }
    }
}

/// Outcome of a sequence predicate with the smallest violating index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceCheck {
    pub holds: bool,
    pub first_violation: Option<usize>,
}

impl SequenceCheck {
    fn pass() -> Self {
        Self { holds: true, first_violation: None }
    }

    fn fail(k: usize) -> Self {
        Self { holds: false, first_violation: Some(k) }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

fn check_mass_floor(mass_floor: f64) -> Result<()> {
    if !(mass_floor > 0.0 && mass_floor < 1.0) {
        return Err(Error::Domain(format!("mass floor {mass_floor} outside (0, 1)")));
    }
    Ok(())
}

/// First internal zero of a sequence (a zero strictly between two non-zero
/// entries), if any, along with the index range of the non-zero block.
fn internal_zero(seq: &[f64]) -> (Option<usize>, usize, usize) {
    let first = seq.iter().position(|p| *p > 0.0).unwrap_or(0);
    let last = seq.iter().rposition(|p| *p > 0.0).unwrap_or(0);
    let hole = (first..=last).find(|&k| seq[k] <= 0.0);
    (hole, first, last)
}

fn log_concave(seq: &[f64]) -> SequenceCheck {
    let (hole, first, last) = internal_zero(seq);
    if let Some(k) = hole {
        return SequenceCheck::fail(k);
    }
    for k in (first + 1)..last {
        if !ge_rel(seq[k] * seq[k], seq[k - 1] * seq[k + 1], REL_TOL) {
            return SequenceCheck::fail(k);
        }
    }
    SequenceCheck::pass()
}

/// PF2 (log-concavity) with no internal zeros.
pub fn is_pf2(p: &Pmf) -> SequenceCheck {
    log_concave(&p.probs)
}

/// Ultra log-concavity of order `n = p.bound()`: the sequence
/// `p_k / C(n, k)` is log-concave with no internal zeros.
pub fn is_ulc(p: &Pmf) -> Result<SequenceCheck> {
    let n = p.bound();
    if n < 1 {
        return Err(Error::DegenerateSupport(
            "ULC(n) needs a declared bound n >= 1".into(),
        ));
    }
    let normalized: Vec<f64> = p
        .probs
        .iter()
        .enumerate()
        .map(|(k, a)| a / binomial(n, k))
        .collect();
    Ok(log_concave(&normalized))
}

/// Law of a sum of independent Bernoulli variables.
pub fn poisson_binomial(ps: &[f64]) -> Result<Pmf> {
    for &p in ps {
        check_probability(p)?;
    }
    let mut probs = vec![1.0];
    for &p in ps {
        let mut next = vec![0.0; probs.len() + 1];
        for (k, a) in probs.iter().enumerate() {
            next[k] += a * (1.0 - p);
            next[k + 1] += a * p;
        }
        probs = next;
    }
    Ok(Pmf { probs })
}

/// Poisson(lambda) truncated at the smallest n whose cdf reaches
/// `mass_floor`, then renormalised.
pub fn poisson_truncated(lambda: f64, mass_floor: f64) -> Result<(Pmf, Truncation)> {
    let (weights, retained) = poisson_prefix(lambda, mass_floor)?;
    let point = weights.len() - 1;
    let pmf = Pmf::from_weights(weights)?;
    Ok((pmf, Truncation { point, retained_mass: retained }))
}

/// Unnormalised Poisson prefix and its total mass.
fn poisson_prefix(lambda: f64, mass_floor: f64) -> Result<(Vec<f64>, f64)> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("Poisson rate {lambda} must be >= 0")));
    }
    check_mass_floor(mass_floor)?;
    if lambda == 0.0 {
        return Ok((vec![1.0], 1.0));
    }
    let ln_lambda = lambda.ln();
    let mut weights = Vec::new();
    let mut acc = KahanSum::new();
    let mut ln_fact = 0.0;
    let mut k = 0usize;
    loop {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let w = (-lambda + k as f64 * ln_lambda - ln_fact).exp();
        weights.push(w);
        acc.add(w);
        // past the mode the terms only shrink; stop once the floor is met
        if acc.value() >= mass_floor && k as f64 >= lambda {
            break;
        }
        k += 1;
        if k > 1_000_000 {
            return Err(Error::Guard {
                what: "Poisson truncation length".into(),
                limit: 1_000_000,
                got: k as u64,
            });
        }
    }
    // cut back to the smallest prefix meeting the floor
    let mut acc = KahanSum::new();
    let mut cut = weights.len();
    for (i, w) in weights.iter().enumerate() {
        acc.add(*w);
        if acc.value() >= mass_floor {
            cut = i + 1;
            break;
        }
    }
    weights.truncate(cut);
    let retained = compensated_sum(weights.iter().copied());
    Ok((weights, retained))
}

/// Geometric law `P(k) = (1-p)^k p`, truncated at `mass_floor` and
/// renormalised.
pub fn geometric_truncated(p: f64, mass_floor: f64) -> Result<(Pmf, Truncation)> {
    check_probability(p)?;
    check_mass_floor(mass_floor)?;
    if p == 0.0 {
        return Err(Error::Domain("geometric success probability must be positive".into()));
    }
    let mut weights = Vec::new();
    let mut acc = KahanSum::new();
    let mut w = p;
    while acc.value() < mass_floor {
        weights.push(w);
        acc.add(w);
        w *= 1.0 - p;
        if w == 0.0 {
            break;
        }
    }
    let point = weights.len() - 1;
    let retained = acc.value();
    Ok((Pmf::from_weights(weights)?, Truncation { point, retained_mass: retained }))
}

/// A member of the class Q: Poisson(lambda) convolved with an independent
/// Poisson-binomial(ps), truncated at `mass_floor` and renormalised.
pub fn class_q_pmf(lambda: f64, ps: &[f64], mass_floor: f64) -> Result<(Pmf, Truncation)> {
    let (poisson, _) = poisson_prefix(lambda, mass_floor)?;
    let pb = poisson_binomial(ps)?;
    let full = convolve_raw(&poisson, &pb.probs);
    let mut acc = KahanSum::new();
    let mut cut = full.len();
    for (i, w) in full.iter().enumerate() {
        acc.add(*w);
        if acc.value() >= mass_floor {
            cut = i + 1;
            break;
        }
    }
    let weights: Vec<f64> = full[..cut].to_vec();
    let retained = compensated_sum(weights.iter().copied());
    Ok((Pmf::from_weights(weights)?, Truncation { point: cut - 1, retained_mass: retained }))
}

fn convolve_raw(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len() + b.len() - 1)
        .map(|k| {
            let lo = k.saturating_sub(b.len() - 1);
            let hi = k.min(a.len() - 1);
            compensated_sum((lo..=hi).map(|i| a[i] * b[k - i]))
        })
        .collect()
}

/// Law of the sum of two independent counts; the bound is `m + n`.
pub fn convolve(p: &Pmf, q: &Pmf) -> Pmf {
    Pmf {
        probs: convolve_raw(&p.probs, &q.probs),
    }
}

/// Exact joint law on an explicit finite support of `dim`-dimensional
/// vectors. Atoms are kept sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRepr", into = "JointRepr")]
pub struct JointPmf {
    dim: usize,
    support: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointRepr {
    dim: usize,
    support: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl TryFrom<JointRepr> for JointPmf {
    type Error = Error;

    fn try_from(r: JointRepr) -> Result<Self> {
        JointPmf::new(r.dim, r.support, r.probs)
    }
}

impl From<JointPmf> for JointRepr {
    fn from(j: JointPmf) -> Self {
        JointRepr { dim: j.dim, support: j.support, probs: j.probs }
    }
}

type AtomKey = Vec<OrderedFloat<f64>>;

fn key_of(v: &[f64]) -> AtomKey {
    // normalise -0.0 so that it shares a key with 0.0
    v.iter().map(|x| OrderedFloat(*x + 0.0)).collect()
}

impl JointPmf {
    /// Validating constructor: distinct support vectors of length `dim`,
    /// non-negative probabilities summing to one within [`MASS_TOL`].
    pub fn new(dim: usize, support: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::InvalidJoint(format!(
                "{} support vectors but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::InvalidJoint("empty support".into()));
        }
        let mut map: BTreeMap<AtomKey, f64> = BTreeMap::new();
        for (v, p) in support.iter().zip(&probs) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidJoint(format!("non-finite coordinate in {v:?}")));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidJoint(format!("probability {p} at {v:?}")));
            }
            if map.insert(key_of(v), *p).is_some() {
                return Err(Error::InvalidJoint(format!("duplicate support vector {v:?}")));
            }
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidJoint(format!("probabilities sum to {total}")));
        }
        Ok(Self::from_map(dim, map))
    }

    fn from_map(dim: usize, map: BTreeMap<AtomKey, f64>) -> Self {
        let (support, probs) = map
            .into_iter()
            .map(|(k, p)| (k.into_iter().map(|x| x.0).collect::<Vec<_>>(), p))
            .unzip();
        Self { dim, support, probs }
    }

    /// Aggregates duplicate atoms, drops zero-mass atoms and validates the
    /// total mass.
    pub fn from_atoms<I>(dim: usize, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<f64>, f64)>,
    {
        let map = aggregate(dim, atoms)?;
        let total = compensated_sum(map.values().copied());
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidJoint(format!("probabilities sum to {total}")));
        }
        if map.is_empty() {
            return Err(Error::InvalidJoint("empty support".into()));
        }
        Ok(Self::from_map(dim, map))
    }

    /// Like [`JointPmf::from_atoms`] but renormalises the total mass.
    pub fn normalized_from_atoms<I>(dim: usize, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<f64>, f64)>,
    {
        let mut map = aggregate(dim, atoms)?;
        let total = compensated_sum(map.values().copied());
        if !(total > 0.0) {
            return Err(Error::InvalidJoint("total mass is zero".into()));
        }
        for p in map.values_mut() {
            *p /= total;
        }
        Ok(Self::from_map(dim, map))
    }

    /// Integer-valued convenience constructor.
    pub fn from_int_atoms<I>(dim: usize, atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, f64)>,
    {
        Self::from_atoms(
            dim,
            atoms
                .into_iter()
                .map(|(v, p)| (v.into_iter().map(|x| x as f64).collect(), p)),
        )
    }

    /// Law of independent coordinates with the given marginals.
    pub fn independent(marginals: &[Pmf]) -> Result<Self> {
        let mut atoms: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
        for m in marginals {
            let mut next = Vec::with_capacity(atoms.len() * m.probs.len());
            for (v, p) in &atoms {
                for (k, q) in m.probs.iter().enumerate() {
                    if *q > 0.0 {
                        let mut w = v.clone();
                        w.push(k as f64);
                        next.push((w, p * q));
                    }
                }
            }
            atoms = next;
        }
        Self::normalized_from_atoms(marginals.len(), atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.support.iter().map(|v| v.as_slice()).zip(self.probs.iter().copied())
    }

    /// Probability of an exact support vector (zero when absent).
    pub fn prob_of(&self, v: &[f64]) -> f64 {
        let key = key_of(v);
        self.support
            .binary_search_by(|s| key_of(s).cmp(&key))
            .map(|i| self.probs[i])
            .unwrap_or(0.0)
    }

    pub fn expect<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.atoms().map(|(v, p)| f(v) * p))
    }

    pub fn mean(&self, coord: usize) -> f64 {
        self.expect(|v| v[coord])
    }

    pub fn variance(&self, coord: usize) -> f64 {
        let mu = self.mean(coord);
        self.expect(|v| (v[coord] - mu).powi(2))
    }

    /// Joint law of the listed coordinates (in the given order).
    pub fn project(&self, coords: &[usize]) -> Result<JointPmf> {
        if let Some(&c) = coords.iter().find(|&&c| c >= self.dim) {
            return Err(Error::Index(format!("coordinate {c} out of range for dim {}", self.dim)));
        }
        JointPmf::normalized_from_atoms(
            coords.len(),
            self.atoms()
                .map(|(v, p)| (coords.iter().map(|&c| v[c]).collect(), p)),
        )
    }

    /// Marginal values and masses of one coordinate, sorted by value.
    pub fn marginal(&self, coord: usize) -> Vec<(f64, f64)> {
        let mut map: BTreeMap<OrderedFloat<f64>, KahanSum> = BTreeMap::new();
        for (v, p) in self.atoms() {
            map.entry(OrderedFloat(v[coord] + 0.0)).or_default().add(p);
        }
        map.into_iter().map(|(k, s)| (k.0, s.value())).collect()
    }

    /// Marginal of a non-negative integer coordinate as a [`Pmf`].
    pub fn marginal_pmf(&self, coord: usize) -> Result<Pmf> {
        let marg = self.marginal(coord);
        let max = marg.last().map(|(v, _)| *v).unwrap_or(0.0);
        let mut probs = vec![0.0; max as usize + 1];
        for (v, p) in marg {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::InvalidJoint(format!(
                    "coordinate {coord} takes non-integer value {v}"
                )));
            }
            probs[v as usize] += p;
        }
        Pmf::from_weights(probs)
    }

    /// Law with independent coordinates and the same marginals.
    pub fn product_of_marginals(&self) -> JointPmf {
        let margs: Vec<Vec<(f64, f64)>> = (0..self.dim).map(|c| self.marginal(c)).collect();
        let mut atoms: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
        for m in &margs {
            let mut next = Vec::with_capacity(atoms.len() * m.len());
            for (v, p) in &atoms {
                for (x, q) in m {
                    let mut w = v.clone();
                    w.push(*x);
                    next.push((w, p * q));
                }
            }
            atoms = next;
        }
        JointPmf::normalized_from_atoms(self.dim, atoms).expect("product of valid marginals")
    }

    /// Independent concatenation `(X, Y)` of two laws.
    pub fn concat_independent(&self, other: &JointPmf) -> JointPmf {
        let atoms = self.atoms().flat_map(|(v, p)| {
            other.atoms().map(move |(w, q)| {
                let mut x = v.to_vec();
                x.extend_from_slice(w);
                (x, p * q)
            })
        });
        JointPmf::normalized_from_atoms(self.dim + other.dim, atoms.collect::<Vec<_>>())
            .expect("product of valid laws")
    }

    /// Image law under a map of the support vectors.
    pub fn map<F: Fn(&[f64]) -> Vec<f64>>(&self, out_dim: usize, f: F) -> Result<JointPmf> {
        JointPmf::normalized_from_atoms(out_dim, self.atoms().map(|(v, p)| (f(v), p)))
    }
}

fn aggregate<I>(dim: usize, atoms: I) -> Result<BTreeMap<AtomKey, f64>>
where
    I: IntoIterator<Item = (Vec<f64>, f64)>,
{
    let mut map: BTreeMap<AtomKey, KahanSum> = BTreeMap::new();
    for (v, p) in atoms {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidJoint(format!("probability {p} at {v:?}")));
        }
        if p > 0.0 {
            map.entry(key_of(&v)).or_default().add(p);
        }
    }
    Ok(map.into_iter().map(|(k, s)| (k, s.value())).collect())
}

/// Condition N construction: the law of `(S_1, ..., S_n)` given
/// `S_0 + S_1 + ... + S_n = s`, for independent `S_i ~ laws[i]`.
pub fn condition_n_joint(laws: &[Pmf], s: usize) -> Result<JointPmf> {
    if laws.len() < 2 {
        return Err(Error::Precondition(
            "need the law of S_0 and at least one further law".into(),
        ));
    }
    let (s0, rest) = laws.split_first().expect("non-empty");
    let mut atoms = Vec::new();
    let mut current = vec![0usize; rest.len()];
    enumerate_bounded(rest, s, 0, 0, 1.0, &mut current, &mut |v, used, w| {
        let p0 = s0.prob(s - used);
        if p0 > 0.0 {
            atoms.push((v.iter().map(|&x| x as f64).collect::<Vec<_>>(), w * p0));
        }
    });
    let total = compensated_sum(atoms.iter().map(|(_, p)| *p));
    if !(total > 0.0) {
        return Err(Error::EmptyEvent(format!("sum {s} is unreachable")));
    }
    JointPmf::normalized_from_atoms(rest.len(), atoms)
}

/// Depth-first enumeration of `(s_i)` with `sum s_i <= budget` and positive
/// product weight.
fn enumerate_bounded<F: FnMut(&[usize], usize, f64)>(
    laws: &[Pmf],
    budget: usize,
    depth: usize,
    used: usize,
    weight: f64,
    current: &mut Vec<usize>,
    visit: &mut F,
) {
    if depth == laws.len() {
        visit(current, used, weight);
        return;
    }
    let max = laws[depth].bound().min(budget - used);
    for k in 0..=max {
        let p = laws[depth].prob(k);
        if p > 0.0 {
            current[depth] = k;
            enumerate_bounded(laws, budget, depth + 1, used + k, weight * p, current, visit);
        }
    }
}

/// Result of [`efron_monotone_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfronVerdict {
    pub holds: bool,
    pub violation: Option<(usize, usize)>,
    /// `(s, E(phi(X) | sum X = s))` for every reachable `s`.
    pub conditional_means: Vec<(usize, f64)>,
}

const EFRON_ENUM_CAP: u64 = 10_000_000;

/// Checks that `s -> E(phi(X) | X_1 + ... + X_n = s)` is non-decreasing over
/// the reachable sums, for independent `X_i ~ laws[i]`.
pub fn efron_monotone_check<F>(laws: &[Pmf], phi: F) -> Result<EfronVerdict>
where
    F: Fn(&[usize]) -> f64,
{
    let size: u64 = laws
        .iter()
        .try_fold(1u64, |acc, l| acc.checked_mul(l.probs.len() as u64))
        .unwrap_or(u64::MAX);
    if size > EFRON_ENUM_CAP {
        return Err(Error::EnumerationTooLarge {
            what: "product support".into(),
            cap: EFRON_ENUM_CAP,
        });
    }
    let max_sum: usize = laws.iter().map(|l| l.bound()).sum();
    let mut num = vec![KahanSum::new(); max_sum + 1];
    let mut den = vec![KahanSum::new(); max_sum + 1];
    let mut current = vec![0usize; laws.len()];
    enumerate_bounded(laws, max_sum, 0, 0, 1.0, &mut current, &mut |v, used, w| {
        num[used].add(w * phi(v));
        den[used].add(w);
    });
    let conditional_means: Vec<(usize, f64)> = (0..=max_sum)
        .filter(|&s| den[s].value() > 0.0)
        .map(|s| (s, num[s].value() / den[s].value()))
        .collect();
    if conditional_means.is_empty() {
        return Err(Error::EmptyEvent("no reachable sum".into()));
    }
    let violation = conditional_means
        .windows(2)
        .find(|w| w[1].1 < w[0].1 - PROB_TOL)
        .map(|w| (w[0].0, w[1].0));
    Ok(EfronVerdict { holds: violation.is_none(), violation, conditional_means })
}

/// Stop-loss transform `E(X - k)_+`.
pub fn stop_loss(p: &Pmf, k: f64) -> f64 {
    compensated_sum(
        p.probs
            .iter()
            .enumerate()
            .map(|(j, q)| (j as f64 - k).max(0.0) * q),
    )
}

/// Why a convex-order comparison failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CxWitness {
    MeanMismatch { mean_p: f64, mean_q: f64 },
    StopLoss { k: usize, stop_loss_p: f64, stop_loss_q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CxVerdict {
    pub holds: bool,
    pub witness: Option<CxWitness>,
    /// Smallest `stop_loss(q, k) - stop_loss(p, k)` over the probed `k`.
    pub min_slack: f64,
}

/// Tolerance on the mean equality required by the convex order.
pub const CX_MEAN_TOL: f64 = 1e-9;

/// `p <=_cx q`: equal means (post-truncation) and pointwise dominated
/// stop-loss transforms at every integer threshold of the joint support.
pub fn cx_dominates(p: &Pmf, q: &Pmf) -> CxVerdict {
    let (mean_p, mean_q) = (p.mean(), q.mean());
    let mut min_slack = f64::INFINITY;
    let top = p.bound().max(q.bound());
    let mut witness = None;
    if (mean_p - mean_q).abs() > CX_MEAN_TOL {
        witness = Some(CxWitness::MeanMismatch { mean_p, mean_q });
    }
    for k in 0..=top {
        let (a, b) = (stop_loss(p, k as f64), stop_loss(q, k as f64));
        min_slack = min_slack.min(b - a);
        if witness.is_none() && a > b + PROB_TOL {
            witness = Some(CxWitness::StopLoss { k, stop_loss_p: a, stop_loss_q: b });
        }
    }
    CxVerdict { holds: witness.is_none(), witness, min_slack }
}

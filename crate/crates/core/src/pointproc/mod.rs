//! Point process specifications and their count laws over a finite
//! partition: mixed sampled processes, finite determinantal processes and
//! marked sums.
//!
//! Every statement checked downstream quantifies over disjoint sets, so a
//! process is only ever observed through its counts in the tracked cells
//! `B_1, ..., B_m` (plus an untracked remainder).

mod dpp;
mod spec;

pub use dpp::{
    dpp_count_law, dpp_exact_law, dpp_inclusion_probability, dpp_sample, dpp_single_cell_law,
    dpp_validate, DppDiagnostics, DppModel, DppSampler, DppSubsetLaw, DPP_EXACT_MAX_POINTS,
};
pub use spec::{ProcessSpec, TauSpec};

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discrete_laws::{JointPmf, Pmf, Truncation, DEFAULT_MASS_FLOOR};
use crate::error::{Error, Result};
use crate::numeric::{binomial, multinomial, KahanSum};

/// Support-size guards for the exact mixed count law.
pub const MAX_CELLS: usize = 6;
pub const MAX_TAU_BOUND: usize = 30;
/// Atom guard for marked sums.
pub const MAX_MARKED_ATOMS: usize = 1_000_000;

/// Cell probabilities `q_i = F(B_i)` of the tracked cells; the remainder
/// cell gets `1 - sum q_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PartitionModel {
    q: Vec<f64>,
}

impl TryFrom<Vec<f64>> for PartitionModel {
    type Error = Error;

    fn try_from(q: Vec<f64>) -> Result<Self> {
        PartitionModel::new(q)
    }
}

impl From<PartitionModel> for Vec<f64> {
    fn from(p: PartitionModel) -> Self {
        p.q
    }
}

impl PartitionModel {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::Domain("partition needs at least one cell".into()));
        }
        if let Some(x) = q.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Domain(format!("cell probability {x} must be >= 0")));
        }
        let total: f64 = q.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("cell probabilities sum to {total} > 1")));
        }
        Ok(Self { q })
    }

    pub fn cells(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn remainder(&self) -> f64 {
        (1.0 - self.q.iter().sum::<f64>()).max(0.0)
    }
}

/// `eta = sum_{i <= tau} delta_{X_i}` with iid locations independent of the
/// count `tau`, observed through a [`PartitionModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedSampledProcess {
    pub tau: Pmf,
    pub partition: PartitionModel,
    /// Retained mass of `tau` when it was cut from an infinite-support law.
    #[serde(default = "one")]
    pub tau_retained_mass: f64,
}

fn one() -> f64 {
    1.0
}

impl MixedSampledProcess {
    pub fn new(tau: Pmf, partition: PartitionModel) -> Self {
        Self { tau, partition, tau_retained_mass: 1.0 }
    }

    pub fn with_truncation(tau: Pmf, truncation: Truncation, partition: PartitionModel) -> Self {
        Self { tau, partition, tau_retained_mass: truncation.retained_mass }
    }

    /// Convenience: Poisson(lambda) count truncated at the default floor.
    pub fn poisson(lambda: f64, partition: PartitionModel) -> Result<Self> {
        let (tau, t) = crate::discrete_laws::poisson_truncated(lambda, DEFAULT_MASS_FLOOR)?;
        Ok(Self::with_truncation(tau, t, partition))
    }
}

/// Exact joint law of `(eta(B_1), ..., eta(B_m))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountVectorLaw {
    pub law: JointPmf,
    /// Retained probability of the count law it was built from (1 when no
    /// truncation happened).
    pub truncation_mass: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountAtom {
    counts: Vec<f64>,
    p: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountLawRepr {
    dim: usize,
    truncation_mass: f64,
    atoms: Vec<CountAtom>,
}

impl Serialize for CountVectorLaw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CountLawRepr {
            dim: self.law.dim(),
            truncation_mass: self.truncation_mass,
            atoms: self
                .law
                .atoms()
                .map(|(v, p)| CountAtom { counts: v.to_vec(), p })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CountVectorLaw {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = CountLawRepr::deserialize(d)?;
        let law = JointPmf::from_atoms(r.dim, r.atoms.into_iter().map(|a| (a.counts, a.p)))
            .map_err(serde::de::Error::custom)?;
        Ok(CountVectorLaw { law, truncation_mass: r.truncation_mass })
    }
}

impl CountVectorLaw {
    pub fn exact(law: JointPmf) -> Self {
        Self { law, truncation_mass: 1.0 }
    }

    pub fn cells(&self) -> usize {
        self.law.dim()
    }

    /// Law of the counts in the listed cells.
    pub fn restrict(&self, cells: &[usize]) -> Result<CountVectorLaw> {
        Ok(CountVectorLaw { law: self.law.project(cells)?, truncation_mass: self.truncation_mass })
    }

    /// Law of the total count over the listed cells.
    pub fn total_count(&self, cells: &[usize]) -> Result<Pmf> {
        let merged = self.law.map(1, |v| vec![cells.iter().map(|&c| v[c]).sum()])?;
        merged.marginal_pmf(0)
    }

    /// `E prod_i z_i^{n_i}`.
    pub fn pgf(&self, z: &[f64]) -> f64 {
        self.law.expect(|v| v.iter().zip(z).map(|(n, zi)| zi.powi(*n as i32)).product())
    }
}

/// Exact count law of a mixed sampled process:
/// `P(n_1..n_m) = sum_N P(tau = N) N!/(prod n_i! (N-s)!) prod q_i^{n_i} r^{N-s}`
/// with `s = sum n_i` and remainder probability `r`.
pub fn exact_count_law(p: &MixedSampledProcess) -> Result<CountVectorLaw> {
    let m = p.partition.cells();
    if m > MAX_CELLS {
        return Err(Error::Guard { what: "tracked cells".into(), limit: MAX_CELLS as u64, got: m as u64 });
    }
    let top = p.tau.max_support();
    if top > MAX_TAU_BOUND {
        return Err(Error::Guard {
            what: "count support bound".into(),
            limit: MAX_TAU_BOUND as u64,
            got: top as u64,
        });
    }
    let r = p.partition.remainder();
    // g(s) = sum_{N >= s} P(tau = N) C(N, s) r^{N - s}
    let g: Vec<f64> = (0..=top)
        .map(|s| {
            (s..=top)
                .map(|n| p.tau.prob(n) * binomial(n, s) * r.powi((n - s) as i32))
                .collect::<KahanSum>()
                .value()
        })
        .collect();
    let q = p.partition.q();
    let mut atoms = Vec::new();
    let mut counts = vec![0usize; m];
    fill_counts(&mut counts, 0, top, &mut |c| {
        let s: usize = c.iter().sum();
        if g[s] == 0.0 {
            return;
        }
        let mono: f64 = c.iter().zip(q).map(|(n, qi)| qi.powi(*n as i32)).product();
        let w = multinomial(c) * mono * g[s];
        if w > 0.0 {
            atoms.push((c.iter().map(|&n| n as f64).collect::<Vec<f64>>(), w));
        }
    });
    let law = JointPmf::normalized_from_atoms(m, atoms)?;
    Ok(CountVectorLaw { law, truncation_mass: p.tau_retained_mass })
}

fn fill_counts<F: FnMut(&[usize])>(counts: &mut Vec<usize>, depth: usize, budget: usize, visit: &mut F) {
    if depth == counts.len() {
        visit(counts);
        return;
    }
    for k in 0..=budget {
        counts[depth] = k;
        fill_counts(counts, depth + 1, budget - k, visit);
    }
    counts[depth] = 0;
}

/// Law of `Bin(tau, q)`: coefficients of `P_tau(1 - q + q z)` by Horner's
/// rule, which only ever adds non-negative terms.
pub fn thin(tau: &Pmf, q: f64) -> Pmf {
    let top = tau.max_support();
    let mut acc = vec![tau.prob(top)];
    for n in (0..top).rev() {
        let mut next = vec![0.0; acc.len() + 1];
        for (k, a) in acc.iter().enumerate() {
            next[k] += a * (1.0 - q);
            next[k + 1] += a * q;
        }
        next[0] += tau.prob(n);
        acc = next;
    }
    Pmf::from_weights(acc).expect("thinning keeps total mass").trimmed()
}

/// Inverse-cdf draw from a pmf.
fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// One realisation of the per-cell counts: `N ~ tau`, then `N` categorical
/// draws over the cells and the remainder.
pub fn sample_mixed<R: Rng + ?Sized>(p: &MixedSampledProcess, rng: &mut R) -> Vec<usize> {
    let n = draw_index(p.tau.probs(), rng);
    let q = p.partition.q();
    let mut counts = vec![0usize; q.len()];
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (cell, qi) in q.iter().enumerate() {
            acc += qi;
            if u < acc {
                counts[cell] += 1;
                break;
            }
        }
    }
    counts
}

type Key = Vec<OrderedFloat<f64>>;

fn key(v: &[f64]) -> Key {
    v.iter().map(|x| OrderedFloat(*x + 0.0)).collect()
}

/// Law of `sum_{i <= tau} Z_i` for iid marks `Z_i ~ mark_law` whose support
/// vectors have at most one strictly positive coordinate.
pub fn marked_sum_law(tau: &Pmf, mark_law: &JointPmf) -> Result<JointPmf> {
    if let Some(v) = mark_law
        .support()
        .iter()
        .find(|v| v.iter().filter(|x| **x > 0.0).count() > 1)
    {
        return Err(Error::Precondition(format!(
            "mark {v:?} has more than one positive coordinate"
        )));
    }
    let dim = mark_law.dim();
    let mut mixture: BTreeMap<Key, KahanSum> = BTreeMap::new();
    let mut current: BTreeMap<Key, f64> = BTreeMap::from([(key(&vec![0.0; dim]), 1.0)]);
    let top = tau.max_support();
    for k in 0..=top {
        let pk = tau.prob(k);
        if pk > 0.0 {
            for (v, w) in &current {
                mixture.entry(v.clone()).or_default().add(pk * w);
            }
        }
        if k == top {
            break;
        }
        let mut next: BTreeMap<Key, KahanSum> = BTreeMap::new();
        for (v, w) in &current {
            for (z, pz) in mark_law.atoms() {
                let sum: Key = v.iter().zip(z).map(|(a, b)| OrderedFloat(a.0 + b + 0.0)).collect();
                next.entry(sum).or_default().add(w * pz);
            }
        }
        if next.len() > MAX_MARKED_ATOMS {
            return Err(Error::Guard {
                what: "marked-sum support size".into(),
                limit: MAX_MARKED_ATOMS as u64,
                got: next.len() as u64,
            });
        }
        current = next.into_iter().map(|(k, s)| (k, s.value())).collect();
    }
    JointPmf::normalized_from_atoms(
        dim,
        mixture
            .into_iter()
            .map(|(k, s)| (k.into_iter().map(|x| x.0).collect(), s.value())),
    )
}

/// Exact per-cell means.
pub fn intensity(law: &CountVectorLaw) -> Vec<f64> {
    (0..law.cells()).map(|c| law.law.mean(c)).collect()
}

/// Either kind of process, as consumed by the reports and the harness.
#[derive(Debug, Clone, PartialEq)]
pub enum PointProcess {
    Mixed(MixedSampledProcess),
    Dpp(DppModel),
}

impl PointProcess {
    pub fn cells(&self) -> usize {
        match self {
            PointProcess::Mixed(p) => p.partition.cells(),
            PointProcess::Dpp(d) => d.cells(),
        }
    }

    pub fn count_law(&self) -> Result<CountVectorLaw> {
        match self {
            PointProcess::Mixed(p) => exact_count_law(p),
            PointProcess::Dpp(d) => dpp_count_law(d),
        }
    }

    /// Exact law of the count in one cell; cheap for both kinds.
    pub fn cell_law(&self, cell: usize) -> Result<Pmf> {
        if cell >= self.cells() {
            return Err(Error::Index(format!("cell {cell} of {}", self.cells())));
        }
        match self {
            PointProcess::Mixed(p) => Ok(thin(&p.tau, p.partition.q()[cell])),
            PointProcess::Dpp(d) => dpp_single_cell_law(d, cell),
        }
    }

    /// A sampler producing per-cell count vectors.
    pub fn sampler(&self) -> Result<CountSampler> {
        Ok(match self {
            PointProcess::Mixed(p) => CountSampler::Mixed(p.clone()),
            PointProcess::Dpp(d) => CountSampler::Dpp(DppSampler::new(d)?, d.cell_of().to_vec(), d.cells()),
        })
    }
}

/// Reusable per-process sampler (the DPP variant caches its spectrum).
#[derive(Debug, Clone)]
pub enum CountSampler {
    Mixed(MixedSampledProcess),
    Dpp(DppSampler, Vec<Option<usize>>, usize),
}

impl CountSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        match self {
            CountSampler::Mixed(p) => sample_mixed(p, rng),
            CountSampler::Dpp(s, cell_of, cells) => {
                let mut counts = vec![0usize; *cells];
                for i in s.sample(rng) {
                    if let Some(c) = cell_of[i] {
                        counts[c] += 1;
                    }
                }
                counts
            }
        }
    }
}

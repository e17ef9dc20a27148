//! Exhaustive negative-dependence checks on finite joint laws.
//!
//! Every non-decreasing function on a finite poset is a constant plus a
//! non-negative combination of up-set indicators, and covariance is bilinear
//! and blind to constants. So NA, sNA and the wcs order reduce to
//! covariances of up-set indicators. On one block the up-sets are
//! enumerated; on the other block the worst up-set is found exactly as a
//! maximum-weight closure.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closure::{dominates, OrderGraph};
use crate::discrete_laws::JointPmf;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, KahanSum};

/// Default covariance tolerance.
pub const COV_TOL: f64 = 1e-10;

/// Refusal thresholds for up-set enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnumerationCaps {
    /// Posets with at most this many points are always enumerated.
    pub max_points: usize,
    /// Otherwise the chain-decomposition bound on the up-set count must not
    /// exceed this.
    pub max_up_sets: u64,
}

impl Default for EnumerationCaps {
    fn default() -> Self {
        Self { max_points: 24, max_up_sets: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DependenceConfig {
    pub tol: f64,
    pub caps: EnumerationCaps,
}

impl Default for DependenceConfig {
    fn default() -> Self {
        Self { tol: COV_TOL, caps: EnumerationCaps::default() }
    }
}

/// Finite poset of distinct vectors under the componentwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct Poset {
    points: Vec<Vec<f64>>,
}

impl Poset {
    /// Deduplicates and sorts the points.
    pub fn new<I: IntoIterator<Item = Vec<f64>>>(points: I) -> Self {
        let set: BTreeMap<Vec<OrderedFloat<f64>>, Vec<f64>> = points
            .into_iter()
            .map(|p| (p.iter().map(|x| OrderedFloat(*x + 0.0)).collect(), p))
            .collect();
        Self { points: set.into_values().collect() }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn index_of(&self, v: &[f64]) -> Option<usize> {
        let key: Vec<OrderedFloat<f64>> = v.iter().map(|x| OrderedFloat(*x + 0.0)).collect();
        self.points
            .binary_search_by(|p| {
                p.iter().map(|x| OrderedFloat(*x + 0.0)).cmp(key.iter().copied())
            })
            .ok()
    }

    /// Upper bound on the number of up-sets from a greedy chain partition:
    /// an up-set meets every chain in a top segment.
    pub fn up_set_bound(&self) -> u64 {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&a, &b| {
            let sa: f64 = self.points[a].iter().sum();
            let sb: f64 = self.points[b].iter().sum();
            sa.total_cmp(&sb).then(a.cmp(&b))
        });
        let mut chain_tops: Vec<usize> = Vec::new();
        let mut chain_lens: Vec<u64> = Vec::new();
        for v in order {
            match chain_tops
                .iter()
                .position(|&t| dominates(&self.points[v], &self.points[t]))
            {
                Some(c) => {
                    chain_tops[c] = v;
                    chain_lens[c] += 1;
                }
                None => {
                    chain_tops.push(v);
                    chain_lens.push(1);
                }
            }
        }
        chain_lens
            .iter()
            .try_fold(1u64, |acc, l| acc.checked_mul(l + 1))
            .unwrap_or(u64::MAX)
    }

    fn check_caps(&self, caps: &EnumerationCaps) -> Result<()> {
        if self.len() <= caps.max_points || self.up_set_bound() <= caps.max_up_sets {
            Ok(())
        } else {
            Err(Error::EnumerationTooLarge {
                what: format!(
                    "up-sets of a {}-point poset (chain bound {})",
                    self.len(),
                    self.up_set_bound()
                ),
                cap: caps.max_up_sets,
            })
        }
    }
}

/// An up-closed subset of a [`Poset`], as member indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpSet {
    pub members: Vec<usize>,
}

impl UpSet {
    pub fn vectors(&self, poset: &Poset) -> Vec<Vec<f64>> {
        self.members.iter().map(|&i| poset.points[i].clone()).collect()
    }
}

/// Streams the non-trivial up-sets (neither empty nor the whole poset) of
/// `poset` in a deterministic order, each exactly once.
pub fn enumerate_up_sets(poset: &Poset, caps: &EnumerationCaps) -> Result<UpSetIter> {
    poset.check_caps(caps)?;
    Ok(UpSetIter::new(poset))
}

/// Backtracking odometer over include/exclude decisions taken in an order
/// where every point comes after all points above it.
pub struct UpSetIter {
    order: Vec<usize>,
    /// For each position in `order`, the positions of strictly greater points.
    above: Vec<Vec<usize>>,
    decision: Vec<bool>,
    depth: usize,
    started: bool,
    done: bool,
}

impl UpSetIter {
    fn new(poset: &Poset) -> Self {
        let pts = &poset.points;
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| {
            let sa: f64 = pts[a].iter().sum();
            let sb: f64 = pts[b].iter().sum();
            sb.total_cmp(&sa).then(a.cmp(&b))
        });
        let mut pos = vec![0; pts.len()];
        for (p, &v) in order.iter().enumerate() {
            pos[v] = p;
        }
        let above = order
            .iter()
            .map(|&v| {
                (0..pts.len())
                    .filter(|&w| w != v && dominates(&pts[w], &pts[v]))
                    .map(|w| pos[w])
                    .collect()
            })
            .collect();
        Self {
            decision: vec![false; order.len()],
            order,
            above,
            depth: 0,
            started: false,
            done: false,
        }
    }

    fn descend(&mut self) {
        while self.depth < self.order.len() {
            let d = self.depth;
            self.decision[d] = self.above[d].iter().all(|&p| self.decision[p]);
            self.depth += 1;
        }
    }

    /// Flips the deepest "include" to "exclude"; `false` when exhausted.
    fn backtrack(&mut self) -> bool {
        while self.depth > 0 {
            self.depth -= 1;
            if self.decision[self.depth] {
                self.decision[self.depth] = false;
                self.depth += 1;
                return true;
            }
        }
        false
    }
}

impl Iterator for UpSetIter {
    type Item = UpSet;

    fn next(&mut self) -> Option<UpSet> {
        loop {
            if self.done {
                return None;
            }
            if self.started {
                if !self.backtrack() {
                    self.done = true;
                    return None;
                }
            } else {
                self.started = true;
            }
            self.descend();
            let count = self.decision.iter().filter(|d| **d).count();
            if count == 0 || count == self.order.len() {
                continue;
            }
            let mut members: Vec<usize> = self
                .decision
                .iter()
                .enumerate()
                .filter(|(_, d)| **d)
                .map(|(p, _)| self.order[p])
                .collect();
            members.sort_unstable();
            return Some(UpSet { members });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceStatus {
    Holds,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DependenceWitness {
    /// `Cov(1_U(X_A), 1_V(X_B)) > tol` for the coordinate split `(A, B)`.
    Split {
        block_a: Vec<usize>,
        block_b: Vec<usize>,
        up_set_a: Vec<Vec<f64>>,
        up_set_b: Vec<Vec<f64>>,
        covariance: f64,
    },
    /// `Cov(1{X_i > t}, 1_V(X_{i+1..m})) > tol`.
    Sequence {
        index: usize,
        threshold: f64,
        up_set_suffix: Vec<Vec<f64>>,
        covariance: f64,
    },
    /// The wcs inequality fails: `cov_x > cov_y + tol`.
    Wcs {
        index: usize,
        threshold: f64,
        up_set_suffix: Vec<Vec<f64>>,
        cov_x: f64,
        cov_y: f64,
    },
    /// Bivariate cdf comparison fails at `(s, t)`.
    Cdf { s: f64, t: f64, cdf_x: f64, cdf_y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceVerdict {
    pub status: DependenceStatus,
    pub witness: Option<DependenceWitness>,
    /// Enumerated up-sets (or thresholds), each paired with its worst
    /// opposite up-set.
    pub pairs_checked: u64,
    /// Largest covariance (or covariance gap) seen.
    pub max_value: f64,
    /// Holds, but some value landed in `(0, tol]`.
    pub margin_warning: bool,
}

impl DependenceVerdict {
    pub fn holds(&self) -> bool {
        self.status == DependenceStatus::Holds
    }

    fn from_parts(witness: Option<DependenceWitness>, pairs: u64, max_value: f64) -> Self {
        let status = if witness.is_some() { DependenceStatus::Violated } else { DependenceStatus::Holds };
        Self {
            margin_warning: status == DependenceStatus::Holds && max_value > 0.0,
            status,
            witness,
            pairs_checked: pairs,
            max_value,
        }
    }
}

/// One coordinate block of a law: its poset and, per atom, the index of the
/// atom's projection.
struct Block {
    coords: Vec<usize>,
    poset: Poset,
    atom_index: Vec<usize>,
    marginal: Vec<f64>,
}

impl Block {
    fn new(law: &JointPmf, coords: &[usize]) -> Self {
        let poset = Poset::new(
            law.support()
                .iter()
                .map(|v| coords.iter().map(|&c| v[c]).collect::<Vec<f64>>()),
        );
        let atom_index: Vec<usize> = law
            .support()
            .iter()
            .map(|v| {
                let proj: Vec<f64> = coords.iter().map(|&c| v[c]).collect();
                poset.index_of(&proj).expect("projection is in the poset")
            })
            .collect();
        let mut acc = vec![KahanSum::new(); poset.len()];
        for (k, p) in atom_index.iter().zip(law.probs()) {
            acc[*k].add(*p);
        }
        Self {
            coords: coords.to_vec(),
            poset,
            atom_index,
            marginal: acc.into_iter().map(|a| a.value()).collect(),
        }
    }
}

/// `Cov(1{X_A in U}, 1{X_B in V})` computed directly from the law, with `U`
/// and `V` given as explicit vectors of the respective blocks.
pub fn indicator_covariance(
    law: &JointPmf,
    block_a: &[usize],
    up_set_a: &[Vec<f64>],
    block_b: &[usize],
    up_set_b: &[Vec<f64>],
) -> f64 {
    let in_set = |v: &[f64], coords: &[usize], set: &[Vec<f64>]| {
        set.iter().any(|s| coords.iter().zip(s).all(|(&c, x)| v[c] + 0.0 == *x + 0.0))
    };
    let (mut pa, mut pb, mut pab) = (KahanSum::new(), KahanSum::new(), KahanSum::new());
    for (v, p) in law.atoms() {
        let a = in_set(v, block_a, up_set_a);
        let b = in_set(v, block_b, up_set_b);
        if a {
            pa.add(p);
        }
        if b {
            pb.add(p);
        }
        if a && b {
            pab.add(p);
        }
    }
    pab.value() - pa.value() * pb.value()
}

/// Splits `(A, B)` of `0..m` with coordinate 0 in `A` (covariance is
/// symmetric, so this covers every bipartition once).
fn bipartitions(m: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0u64..(1u64 << m))
        .filter(|mask| mask & 1 == 1 && *mask != (1u64 << m) - 1)
        .map(|mask| {
            let a = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            let b = (0..m).filter(|i| mask >> i & 1 == 0).collect();
            (a, b)
        })
        .collect()
}

struct SplitOutcome {
    witness: Option<DependenceWitness>,
    pairs: u64,
    max_cov: f64,
}

fn check_split(law: &JointPmf, a: &[usize], b: &[usize], cfg: &DependenceConfig) -> Result<SplitOutcome> {
    let block_a = Block::new(law, a);
    let block_b = Block::new(law, b);
    // enumerate on the side with the smaller up-set bound
    let (enum_block, opt_block) = if block_a.poset.up_set_bound() <= block_b.poset.up_set_bound() {
        (&block_a, &block_b)
    } else {
        (&block_b, &block_a)
    };
    let up_sets = enumerate_up_sets(&enum_block.poset, &cfg.caps)?;
    let graph = OrderGraph::new(opt_block.poset.points());
    let mut pairs = 0u64;
    let mut max_cov = f64::NEG_INFINITY;
    for u in up_sets {
        pairs += 1;
        let mut inside = vec![false; enum_block.poset.len()];
        for &i in &u.members {
            inside[i] = true;
        }
        let p_u = compensated_sum(u.members.iter().map(|&i| enum_block.marginal[i]));
        let mut joint = vec![KahanSum::new(); opt_block.poset.len()];
        for (atom, p) in law.probs().iter().enumerate() {
            if inside[enum_block.atom_index[atom]] {
                joint[opt_block.atom_index[atom]].add(*p);
            }
        }
        let weights: Vec<f64> = joint
            .iter()
            .zip(&opt_block.marginal)
            .map(|(j, m)| j.value() - p_u * m)
            .collect();
        let (best, value) = graph.max_weight_up_set(&weights);
        max_cov = max_cov.max(value);
        if value > cfg.tol {
            let up_enum = u.vectors(&enum_block.poset);
            let up_opt: Vec<Vec<f64>> = best
                .iter()
                .enumerate()
                .filter(|(_, m)| **m)
                .map(|(i, _)| opt_block.poset.points()[i].clone())
                .collect();
            let (up_a, up_b) = if std::ptr::eq(enum_block, &block_a) {
                (up_enum, up_opt)
            } else {
                (up_opt, up_enum)
            };
            let covariance = indicator_covariance(law, &block_a.coords, &up_a, &block_b.coords, &up_b);
            return Ok(SplitOutcome {
                witness: Some(DependenceWitness::Split {
                    block_a: block_a.coords.clone(),
                    block_b: block_b.coords.clone(),
                    up_set_a: up_a,
                    up_set_b: up_b,
                    covariance,
                }),
                pairs,
                max_cov,
            });
        }
    }
    Ok(SplitOutcome { witness: None, pairs, max_cov })
}

/// Negative association: `Cov(f(X_A), g(X_{A^c})) <= tol` for all
/// non-decreasing `f, g` and every split of the coordinates.
pub fn is_na(law: &JointPmf, cfg: &DependenceConfig) -> Result<DependenceVerdict> {
    let splits = bipartitions(law.dim());
    let outcomes: Vec<Result<SplitOutcome>> = splits
        .par_iter()
        .map(|(a, b)| check_split(law, a, b, cfg))
        .collect();
    let mut pairs = 0;
    let mut max_value = f64::NEG_INFINITY;
    for outcome in outcomes {
        let o = outcome?;
        pairs += o.pairs;
        max_value = max_value.max(o.max_cov);
        if o.witness.is_some() {
            return Ok(DependenceVerdict::from_parts(o.witness, pairs, max_value));
        }
    }
    Ok(DependenceVerdict::from_parts(None, pairs, max_value.max(0.0)))
}

/// Per-threshold weights `P(X_i > t, Y = y) - P(X_i > t) P(Y = y)` over a
/// suffix poset.
fn threshold_weights(law: &JointPmf, i: usize, t: f64, suffix: &Poset, coords: &[usize]) -> Vec<f64> {
    let mut joint = vec![KahanSum::new(); suffix.len()];
    let mut marg = vec![KahanSum::new(); suffix.len()];
    let mut above = KahanSum::new();
    for (v, p) in law.atoms() {
        let proj: Vec<f64> = coords.iter().map(|&c| v[c]).collect();
        let k = suffix.index_of(&proj).expect("suffix poset covers the support");
        marg[k].add(p);
        if v[i] > t {
            joint[k].add(p);
            above.add(p);
        }
    }
    let p_above = above.value();
    joint
        .iter()
        .zip(&marg)
        .map(|(j, m)| j.value() - p_above * m.value())
        .collect()
}

fn distinct_values(law: &JointPmf, i: usize) -> Vec<f64> {
    law.marginal(i).into_iter().map(|(v, _)| v).collect()
}

fn set_vectors(poset: &Poset, members: &[bool]) -> Vec<Vec<f64>> {
    members
        .iter()
        .enumerate()
        .filter(|(_, m)| **m)
        .map(|(k, _)| poset.points()[k].clone())
        .collect()
}

/// Negative association in sequence: `Cov(1{X_i > t}, f(X_{i+1}, ..., X_m))
/// <= tol` for every `i < m`, threshold `t` and non-decreasing `f`.
pub fn is_sna(law: &JointPmf, cfg: &DependenceConfig) -> Result<DependenceVerdict> {
    let m = law.dim();
    let mut pairs = 0u64;
    let mut max_value = 0.0f64;
    for i in 0..m.saturating_sub(1) {
        let coords: Vec<usize> = ((i + 1)..m).collect();
        let suffix = Poset::new(
            law.support()
                .iter()
                .map(|v| coords.iter().map(|&c| v[c]).collect::<Vec<f64>>()),
        );
        let graph = OrderGraph::new(suffix.points());
        let values = distinct_values(law, i);
        for &t in &values[..values.len() - 1] {
            pairs += 1;
            let w = threshold_weights(law, i, t, &suffix, &coords);
            let (best, value) = graph.max_weight_up_set(&w);
            max_value = max_value.max(value);
            if value > cfg.tol {
                let up = set_vectors(&suffix, &best);
                let first: Vec<Vec<f64>> = values.iter().filter(|v| **v > t).map(|v| vec![*v]).collect();
                let covariance = indicator_covariance(law, &[i], &first, &coords, &up);
                let witness = DependenceWitness::Sequence { index: i, threshold: t, up_set_suffix: up, covariance };
                return Ok(DependenceVerdict::from_parts(Some(witness), pairs, max_value));
            }
        }
    }
    Ok(DependenceVerdict::from_parts(None, pairs, max_value))
}

/// Negative quadrant dependence of a bivariate law:
/// `P(X <= x, Y <= y) <= P(X <= x) P(Y <= y) + tol` on the support grid.
pub fn is_nqd(law: &JointPmf, tol: f64) -> Result<bool> {
    if law.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: law.dim() });
    }
    let xs = distinct_values(law, 0);
    let ys = distinct_values(law, 1);
    let fx = |x: f64| law.expect(|v| (v[0] <= x) as u8 as f64);
    let fy = |y: f64| law.expect(|v| (v[1] <= y) as u8 as f64);
    for &x in &xs {
        for &y in &ys {
            let joint = law.expect(|v| (v[0] <= x && v[1] <= y) as u8 as f64);
            if joint > fx(x) * fy(y) + tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `X <=_wcs Y`: for all `i`, thresholds `t` and up-sets `V` of the union of
/// the suffix supports, `Cov(1{X_i > t}, 1_V) <= Cov(1{Y_i > t}, 1_V) + tol`.
pub fn wcs_dominates(law_x: &JointPmf, law_y: &JointPmf, cfg: &DependenceConfig) -> Result<DependenceVerdict> {
    if law_x.dim() != law_y.dim() {
        return Err(Error::DimensionMismatch { expected: law_x.dim(), got: law_y.dim() });
    }
    let m = law_x.dim();
    let mut pairs = 0u64;
    let mut max_value = f64::NEG_INFINITY;
    for i in 0..m.saturating_sub(1) {
        let coords: Vec<usize> = ((i + 1)..m).collect();
        let suffix = Poset::new(
            law_x
                .support()
                .iter()
                .chain(law_y.support())
                .map(|v| coords.iter().map(|&c| v[c]).collect::<Vec<f64>>()),
        );
        let graph = OrderGraph::new(suffix.points());
        let values = Poset::new(
            distinct_values(law_x, i)
                .into_iter()
                .chain(distinct_values(law_y, i))
                .map(|v| vec![v]),
        );
        let thresholds: Vec<f64> = values.points().iter().map(|v| v[0]).collect();
        for &t in &thresholds[..thresholds.len() - 1] {
            pairs += 1;
            let wx = threshold_weights(law_x, i, t, &suffix, &coords);
            let wy = threshold_weights(law_y, i, t, &suffix, &coords);
            let diff: Vec<f64> = wx.iter().zip(&wy).map(|(a, b)| a - b).collect();
            let (best, value) = graph.max_weight_up_set(&diff);
            max_value = max_value.max(value);
            if value > cfg.tol {
                let up = set_vectors(&suffix, &best);
                let first: Vec<Vec<f64>> = thresholds.iter().filter(|v| **v > t).map(|v| vec![*v]).collect();
                let cov_x = indicator_covariance(law_x, &[i], &first, &coords, &up);
                let cov_y = indicator_covariance(law_y, &[i], &first, &coords, &up);
                let witness = DependenceWitness::Wcs { index: i, threshold: t, up_set_suffix: up, cov_x, cov_y };
                return Ok(DependenceVerdict::from_parts(Some(witness), pairs, max_value));
            }
        }
    }
    Ok(DependenceVerdict::from_parts(None, pairs, max_value.max(0.0)))
}

/// Tolerance on marginal equality for the supermodular comparison.
pub const MARGINAL_TOL: f64 = 1e-10;

fn marginals_match(x: &JointPmf, y: &JointPmf, coord: usize) -> bool {
    let mx: BTreeMap<OrderedFloat<f64>, f64> =
        x.marginal(coord).into_iter().map(|(v, p)| (OrderedFloat(v), p)).collect();
    let my: BTreeMap<OrderedFloat<f64>, f64> =
        y.marginal(coord).into_iter().map(|(v, p)| (OrderedFloat(v), p)).collect();
    mx.keys()
        .chain(my.keys())
        .all(|k| (mx.get(k).copied().unwrap_or(0.0) - my.get(k).copied().unwrap_or(0.0)).abs() <= MARGINAL_TOL)
}

/// Supermodular order for bivariate laws with equal marginals, via the
/// pointwise joint-cdf comparison `F_X <= F_Y + tol`.
pub fn sm_dominates_bivariate(law_x: &JointPmf, law_y: &JointPmf, tol: f64) -> Result<DependenceVerdict> {
    for law in [law_x, law_y] {
        if law.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: law.dim() });
        }
    }
    for c in 0..2 {
        if !marginals_match(law_x, law_y, c) {
            return Err(Error::MarginalMismatch(format!("coordinate {c} marginals differ")));
        }
    }
    let grid = |c: usize| {
        Poset::new(
            distinct_values(law_x, c)
                .into_iter()
                .chain(distinct_values(law_y, c))
                .map(|v| vec![v]),
        )
        .points()
        .iter()
        .map(|v| v[0])
        .collect::<Vec<f64>>()
    };
    let (ss, ts) = (grid(0), grid(1));
    let mut pairs = 0u64;
    let mut max_value = f64::NEG_INFINITY;
    for &s in &ss {
        for &t in &ts {
            pairs += 1;
            let cdf_x = law_x.expect(|v| (v[0] <= s && v[1] <= t) as u8 as f64);
            let cdf_y = law_y.expect(|v| (v[0] <= s && v[1] <= t) as u8 as f64);
            max_value = max_value.max(cdf_x - cdf_y);
            if cdf_x > cdf_y + tol {
                let witness = DependenceWitness::Cdf { s, t, cdf_x, cdf_y };
                return Ok(DependenceVerdict::from_parts(Some(witness), pairs, max_value));
            }
        }
    }
    Ok(DependenceVerdict::from_parts(None, pairs, max_value.max(0.0)))
}

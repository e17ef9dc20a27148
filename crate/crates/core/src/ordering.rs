//! Consequences of negative association for point processes: moment
//! factorization, void-probability and Laplace-functional bounds, and
//! comparison with the Poisson process of the same intensity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::discrete_laws::{cx_dominates, poisson_truncated, CxVerdict, Pmf, DEFAULT_MASS_FLOOR};
use crate::error::{Error, Result};
use crate::pointproc::{intensity, CountVectorLaw, PointProcess};

/// `status = holds` iff `slack >= -BOUND_TOL`.
pub const BOUND_TOL: f64 = 1e-10;

/// Default Laplace damping levels per cell and the combination cap.
pub const LAPLACE_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];
pub const LAPLACE_MAX_COMBOS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundStatus {
    Holds,
    Violated,
}

/// One inequality `lhs <= rhs` with the inputs needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub status: BoundStatus,
    pub context: BTreeMap<String, Value>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, context: BTreeMap<String, Value>) -> Self {
        let slack = rhs - lhs;
        let status = if slack >= -BOUND_TOL { BoundStatus::Holds } else { BoundStatus::Violated };
        Self { name: name.into(), lhs, rhs, slack, status, context }
    }

    pub fn holds(&self) -> bool {
        self.status == BoundStatus::Holds
    }

    pub fn with(mut self, key: &str, value: Value) -> Self {
        self.context.insert(key.to_string(), value);
        self
    }
}

fn ctx(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn check_cells(law: &CountVectorLaw, cells: &[usize]) -> Result<()> {
    if cells.is_empty() {
        return Err(Error::Domain("cell subset must be non-empty".into()));
    }
    match cells.iter().find(|c| **c >= law.cells()) {
        Some(c) => Err(Error::Index(format!("cell {c} of {}", law.cells()))),
        None => Ok(()),
    }
}

/// `E prod eta(B_i) <= prod E eta(B_i)` over all cells of the law.
pub fn moment_factorization_check(law: &CountVectorLaw) -> BoundReport {
    let all: Vec<usize> = (0..law.cells()).collect();
    moment_factorization_on(law, &all).expect("all cells are valid")
}

/// The same over a subset of cells.
pub fn moment_factorization_on(law: &CountVectorLaw, cells: &[usize]) -> Result<BoundReport> {
    check_cells(law, cells)?;
    let lhs = law.law.expect(|v| cells.iter().map(|&c| v[c]).product());
    let means: Vec<f64> = cells.iter().map(|&c| law.law.mean(c)).collect();
    let rhs = means.iter().product();
    Ok(BoundReport::new(
        "moment_factorization",
        lhs,
        rhs,
        ctx(&[
            ("cells", json!(cells)),
            ("means", json!(means)),
            ("truncation_mass", json!(law.truncation_mass)),
        ]),
    ))
}

/// `P(eta(B) = 0) <= exp(-E eta(B))` for `B` the union of `cells`.
pub fn void_bound_check(law: &CountVectorLaw, cells: &[usize]) -> Result<BoundReport> {
    check_cells(law, cells)?;
    let lhs = law.law.expect(|v| if cells.iter().all(|&c| v[c] == 0.0) { 1.0 } else { 0.0 });
    let mean: f64 = cells.iter().map(|&c| law.law.mean(c)).sum();
    Ok(BoundReport::new(
        "void",
        lhs,
        (-mean).exp(),
        ctx(&[
            ("cells", json!(cells)),
            ("mean", json!(mean)),
            ("truncation_mass", json!(law.truncation_mass)),
        ]),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplaceSign {
    /// `E exp(-sum h_i eta_i) <= exp(sum (e^{-h_i} - 1) mu_i)`
    Negative,
    /// `E exp(sum h_i eta_i) <= exp(sum (e^{h_i} - 1) mu_i)`
    Positive,
}

pub fn laplace_bound_check(law: &CountVectorLaw, h: &[f64], sign: LaplaceSign) -> Result<BoundReport> {
    if h.len() != law.cells() {
        return Err(Error::DimensionMismatch { expected: law.cells(), got: h.len() });
    }
    if let Some(x) = h.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::Domain(format!("damping {x} must be >= 0")));
    }
    let s = match sign {
        LaplaceSign::Negative => -1.0,
        LaplaceSign::Positive => 1.0,
    };
    let lhs = law.law.expect(|v| (s * v.iter().zip(h).map(|(n, hi)| n * hi).sum::<f64>()).exp());
    let means = intensity(law);
    let exponent: f64 = h.iter().zip(&means).map(|(hi, mu)| (s * hi).exp_m1() * mu).sum();
    Ok(BoundReport::new(
        "laplace",
        lhs,
        exponent.exp(),
        ctx(&[
            ("h", json!(h)),
            ("sign", json!(sign)),
            ("means", json!(means)),
            ("truncation_mass", json!(law.truncation_mass)),
        ]),
    ))
}

/// `{0, 1/4, 1/2, 1, 2}^m`, strided down to at most 200 vectors.
pub fn default_laplace_grid(m: usize) -> Vec<Vec<f64>> {
    let levels = LAPLACE_LEVELS.len();
    let total = (levels as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    let take = total.min(LAPLACE_MAX_COMBOS as u128);
    (0..take)
        .map(|k| {
            let mut idx = k * total / take;
            (0..m)
                .map(|_| {
                    let l = LAPLACE_LEVELS[(idx % levels as u128) as usize];
                    idx /= levels as u128;
                    l
                })
                .collect()
        })
        .collect()
}

/// The two-set void bound for a binomial count together with a grid check
/// that `phi(s) = -log P_tau(1 - s)` is superadditive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityReport {
    pub void: BoundReport,
    /// Worst grid point of `phi(s) + phi(t) <= phi(s + t)`.
    pub phi: BoundReport,
}

impl SuperadditivityReport {
    pub fn holds(&self) -> bool {
        self.void.holds() && self.phi.holds()
    }
}

const PHI_GRID: usize = 20;

pub fn binomial_void_superadditivity(n: usize, p: f64, qb: f64, qb2: f64) -> Result<SuperadditivityReport> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p = {p} outside [0, 1]")));
    }
    if !(qb >= 0.0 && qb2 >= 0.0 && qb + qb2 <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!("cell masses {qb}, {qb2} must be >= 0 with sum <= 1")));
    }
    let pgf = |z: f64| (p * z + 1.0 - p).powi(n as i32);
    let phi = |s: f64| -pgf(1.0 - s).ln();
    let inputs = [("n", json!(n)), ("p", json!(p)), ("q_b", json!(qb)), ("q_b2", json!(qb2))];
    let void = BoundReport::new("binomial_void", pgf(1.0 - qb - qb2), pgf(1.0 - qb) * pgf(1.0 - qb2), ctx(&inputs));

    let mut worst: Option<(f64, f64, f64, f64, f64)> = None;
    for i in 0..=PHI_GRID {
        for j in 0..=(PHI_GRID - i) {
            let (s, t) = (i as f64 / PHI_GRID as f64, j as f64 / PHI_GRID as f64);
            let (lhs, rhs) = (phi(s) + phi(t), phi(s + t));
            let gap = if rhs == f64::INFINITY { f64::INFINITY } else { rhs - lhs };
            if worst.is_none_or(|w| gap < w.4) {
                worst = Some((s, t, lhs, rhs, gap));
            }
        }
    }
    let (s, t, lhs, rhs, _) = worst.expect("grid is non-empty");
    let mut c = ctx(&inputs);
    c.insert("s".into(), json!(s));
    c.insert("t".into(), json!(t));
    c.insert("grid_step".into(), json!(1.0 / PHI_GRID as f64));
    Ok(SuperadditivityReport { void, phi: BoundReport::new("phi_superadditive", lhs, rhs, c) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCx {
    pub cell: usize,
    pub mean: f64,
    pub verdict: CxVerdict,
}

/// Sub-checks (a)-(d) against the Poisson process with the same intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub pass: bool,
    pub intensity: Vec<f64>,
    pub truncation_mass: f64,
    pub cx_marginals: Vec<CellCx>,
    pub void: Vec<BoundReport>,
    pub moment: Vec<BoundReport>,
    pub laplace: Vec<BoundReport>,
}

impl DominationReport {
    /// Every bound report in a fixed order: void, moment, laplace.
    pub fn bounds(&self) -> impl Iterator<Item = &BoundReport> {
        self.void.iter().chain(&self.moment).chain(&self.laplace)
    }

    /// Smallest slack across every sub-check, cx stop-loss slack included.
    pub fn min_slack(&self) -> f64 {
        self.bounds()
            .map(|b| b.slack)
            .chain(self.cx_marginals.iter().map(|c| c.verdict.min_slack))
            .fold(f64::INFINITY, f64::min)
    }
}

fn poisson_like(mean: f64) -> Result<Pmf> {
    if mean <= 0.0 {
        return Ok(Pmf::point_mass(0));
    }
    Ok(poisson_truncated(mean, DEFAULT_MASS_FLOOR)?.0)
}

fn nonempty_subsets(m: usize, min_size: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1 << m))
        .filter(move |mask| mask.count_ones() as usize >= min_size)
        .map(move |mask| (0..m).filter(|i| mask >> i & 1 == 1).collect())
}

/// Builds the exact count law and compares it with Poisson: (a) per-cell cx,
/// (b) void bounds on every non-empty union of cells, (c) moment
/// factorization on every union of two or more cells, (d) Laplace bounds of
/// both signs on the default grid.
pub fn poisson_domination_report(p: &PointProcess) -> Result<DominationReport> {
    let law = p.count_law()?;
    domination_from_law(&law)
}

pub fn domination_from_law(law: &CountVectorLaw) -> Result<DominationReport> {
    let m = law.cells();
    let mu = intensity(law);
    let mut cx_marginals = Vec::with_capacity(m);
    for (cell, mean) in mu.iter().enumerate() {
        let count = law.law.marginal_pmf(cell)?;
        let verdict = cx_dominates(&count, &poisson_like(*mean)?);
        cx_marginals.push(CellCx { cell, mean: *mean, verdict });
    }
    let void = nonempty_subsets(m, 1)
        .map(|s| void_bound_check(law, &s))
        .collect::<Result<Vec<_>>>()?;
    let moment = nonempty_subsets(m, 2)
        .map(|s| moment_factorization_on(law, &s))
        .collect::<Result<Vec<_>>>()?;
    let mut laplace = Vec::new();
    for h in default_laplace_grid(m) {
        for sign in [LaplaceSign::Negative, LaplaceSign::Positive] {
            laplace.push(laplace_bound_check(law, &h, sign)?);
        }
    }
    let pass = cx_marginals.iter().all(|c| c.verdict.holds)
        && void.iter().chain(&moment).chain(&laplace).all(BoundReport::holds);
    Ok(DominationReport {
        pass,
        intensity: mu,
        truncation_mass: law.truncation_mass,
        cx_marginals,
        void,
        moment,
        laplace,
    })
}

//! Chebyshev, Chernoff and Kolmogorov-type tail bounds for cell counts.

use serde_json::json;

use super::mc::{mc_estimate, validate_sequence, Functional};
use crate::discrete_laws::Pmf;
use crate::error::{Error, Result};
use crate::ordering::BoundReport;
use crate::pointproc::{CountVectorLaw, PointProcess};

/// Default Chernoff parameters.
pub const CHERNOFF_T_GRID: [f64; 6] = [0.1, 0.25, 0.5, 1.0, 1.5, 2.0];

/// Events `X - mu >= eps` are evaluated with this absolute allowance so that
/// boundary atoms are not lost to rounding in `mu`.
const EVENT_TOL: f64 = 1e-12;

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} must be > 0")))
    }
}

fn tail(count: &Pmf, pred: impl Fn(f64) -> bool) -> f64 {
    (0..=count.bound())
        .filter(|k| pred(*k as f64))
        .map(|k| count.prob(k))
        .fold(0.0, |a, b| a + b)
}

/// `P(|X - EX| >= eps) <= Var X / eps^2` for the count law of one cell.
pub fn chebyshev_from_pmf(count: &Pmf, eps: f64) -> Result<BoundReport> {
    positive("eps", eps)?;
    let mu = count.mean();
    let lhs = tail(count, |x| (x - mu).abs() >= eps - EVENT_TOL);
    let var = count.variance();
    Ok(BoundReport::new(
        "chebyshev",
        lhs,
        var / (eps * eps),
        [("eps".to_string(), json!(eps)), ("mean".into(), json!(mu)), ("variance".into(), json!(var))].into(),
    ))
}

pub fn chebyshev_bound(law: &CountVectorLaw, cell: usize, eps: f64) -> Result<BoundReport> {
    Ok(chebyshev_from_pmf(&marginal(law, cell)?, eps)?.with("cell", json!(cell)))
}

/// Upper tail `P(X - EX >= eps) <= e^{-t(EX + eps)} E e^{tX}` and lower tail
/// `P(EX - X >= eps) <= e^{t(EX - eps)} E e^{-tX}`.
pub fn chernoff_from_pmf(count: &Pmf, eps: f64, t: f64) -> Result<[BoundReport; 2]> {
    positive("eps", eps)?;
    positive("t", t)?;
    let mu = count.mean();
    let mgf = |s: f64| (0..=count.bound()).map(|k| count.prob(k) * (s * k as f64).exp()).sum::<f64>();
    let context = |tail: &str| {
        [
            ("eps".to_string(), json!(eps)),
            ("t".into(), json!(t)),
            ("mean".into(), json!(mu)),
            ("tail".into(), json!(tail)),
        ]
        .into()
    };
    let upper = BoundReport::new(
        "chernoff_upper",
        tail(count, |x| x - mu >= eps - EVENT_TOL),
        (-t * (mu + eps)).exp() * mgf(t),
        context("upper"),
    );
    let lower = BoundReport::new(
        "chernoff_lower",
        tail(count, |x| mu - x >= eps - EVENT_TOL),
        (t * (mu - eps)).exp() * mgf(-t),
        context("lower"),
    );
    Ok([upper, lower])
}

pub fn chernoff_bound(law: &CountVectorLaw, cell: usize, eps: f64, t: f64) -> Result<[BoundReport; 2]> {
    Ok(chernoff_from_pmf(&marginal(law, cell)?, eps, t)?.map(|r| r.with("cell", json!(cell))))
}

fn marginal(law: &CountVectorLaw, cell: usize) -> Result<Pmf> {
    if cell >= law.cells() {
        return Err(Error::Index(format!("cell {cell} of {}", law.cells())));
    }
    law.law.marginal_pmf(cell)
}

/// Right-hand side of the Kolmogorov-type maximal inequality over cells
/// `0..b.len()`: `8 eps^-2 sum Var_i / b_i^2`, or with a 1-based start index
/// `m`, `32 eps^-2 (sum_{i > m} Var_i / b_i^2 + sum_{i <= m} Var_i / b_m^2)`.
pub fn kolmogorov_rhs(variances: &[f64], b: &[f64], eps: f64, start: Option<usize>) -> f64 {
    let e2 = eps * eps;
    match start {
        None => 8.0 / e2 * variances.iter().zip(b).map(|(v, bi)| v / (bi * bi)).sum::<f64>(),
        Some(m) => {
            let bm = b[m - 1];
            let head: f64 = variances[..m].iter().sum::<f64>() / (bm * bm);
            let rest: f64 = variances[m..].iter().zip(&b[m..]).map(|(v, bi)| v / (bi * bi)).sum();
            32.0 / e2 * (rest + head)
        }
    }
}

/// Monte Carlo check of the maximal inequality. The report's `lhs` is the
/// upper Wilson limit of the estimated probability, so `holds` means the
/// whole confidence interval sits below the bound; the point estimate and
/// interval are in the context.
pub fn kolmogorov_bound_check(
    process: &PointProcess,
    b: &[f64],
    eps: f64,
    start: Option<usize>,
    n_mc: usize,
    seed: u64,
) -> Result<BoundReport> {
    validate_sequence(b, eps, start)?;
    let cells = b.len();
    if cells > process.cells() {
        return Err(Error::DimensionMismatch { expected: process.cells(), got: cells });
    }
    let variances = (0..cells)
        .map(|c| process.cell_law(c).map(|l| l.variance()))
        .collect::<Result<Vec<f64>>>()?;
    let rhs = kolmogorov_rhs(&variances, b, eps, start);
    let est = mc_estimate(process, &Functional::MaxPartialSum { b: b.to_vec(), eps, start }, n_mc, seed)?;
    let name = if start.is_some() { "kolmogorov_m" } else { "kolmogorov" };
    Ok(BoundReport::new(
        name,
        est.upper(),
        rhs,
        [
            ("b".to_string(), json!(b)),
            ("eps".into(), json!(eps)),
            ("start".into(), json!(start)),
            ("variances".into(), json!(variances)),
            ("estimate".into(), json!(est.estimate)),
            ("ci_wilson".into(), json!(est.ci_wilson)),
            ("n_mc".into(), json!(n_mc)),
            ("seed".into(), json!(seed)),
            ("path".into(), json!("monte_carlo")),
        ]
        .into(),
    ))
}

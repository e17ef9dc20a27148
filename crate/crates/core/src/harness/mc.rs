//! Seeded Monte Carlo over point-process count vectors.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `r`, so every replication is reproducible on its own and the
//! result does not depend on how replications are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::pointproc::{CountSampler, PointProcess};

pub const MIN_REPLICATIONS: usize = 100;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// The random generator of replication `rep`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Functional {
    /// `1{eta(B) = 0}` for `B` the union of `cells`.
    Void { cells: Vec<usize> },
    CountMean { cell: usize },
    /// `1{max_{start <= k <= n} |sum_{i <= k} (eta(B_i) - E eta(B_i))| / b_k >= eps}`
    /// over cells `0..n` with `n = b.len()`; `start` is 1-based.
    MaxPartialSum {
        b: Vec<f64>,
        eps: f64,
        #[serde(default)]
        start: Option<usize>,
    },
}

impl Functional {
    fn is_indicator(&self) -> bool {
        !matches!(self, Functional::CountMean { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_normal: [f64; 2],
    /// Only for indicator functionals.
    pub ci_wilson: Option<[f64; 2]>,
    pub replications: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Builds the estimate from per-replication values.
    pub fn from_values(values: &[f64], seed: u64, proportion: bool) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().copied().collect::<KahanSum>().value() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).collect::<KahanSum>().value() / (n - 1.0)
        } else {
            0.0
        };
        let se = (var / n).sqrt();
        let ci_normal = [mean - Z95 * se, mean + Z95 * se];
        let ci_wilson = proportion.then(|| wilson(mean, n, Z95));
        Self { estimate: mean, std_error: se, ci_normal, ci_wilson, replications: values.len(), seed }
    }

    /// Upper confidence limit: Wilson for proportions, normal otherwise.
    pub fn upper(&self) -> f64 {
        self.ci_wilson.unwrap_or(self.ci_normal)[1]
    }
}

/// Wilson score interval for a proportion `p` out of `n` trials.
pub fn wilson(p: f64, n: f64, z: f64) -> [f64; 2] {
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // at p = 0 or 1 an endpoint equals p exactly; rounding must not exclude it
    [(centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0)]
}

/// Draws `n` iid count vectors, in replication order.
pub fn sample_counts(process: &PointProcess, n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let sampler = process.sampler()?;
    Ok(draw(&sampler, n, seed, |c| c.to_vec()))
}

fn draw<T: Send, F>(sampler: &CountSampler, n: usize, seed: u64, f: F) -> Vec<T>
where
    F: Fn(&[usize]) -> T + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(seed, rep);
            f(&sampler.sample(&mut rng))
        })
        .collect()
}

pub fn mc_estimate(process: &PointProcess, functional: &Functional, n: usize, seed: u64) -> Result<McEstimate> {
    if n < MIN_REPLICATIONS {
        return Err(Error::Domain(format!("need at least {MIN_REPLICATIONS} replications, got {n}")));
    }
    let m = process.cells();
    let check = |c: usize| {
        if c < m {
            Ok(())
        } else {
            Err(Error::Index(format!("cell {c} of {m}")))
        }
    };
    let sampler = process.sampler()?;
    let values: Vec<f64> = match functional {
        Functional::Void { cells } => {
            if cells.is_empty() {
                return Err(Error::Domain("cell subset must be non-empty".into()));
            }
            cells.iter().try_for_each(|c| check(*c))?;
            draw(&sampler, n, seed, |v| cells.iter().all(|&c| v[c] == 0) as u8 as f64)
        }
        Functional::CountMean { cell } => {
            check(*cell)?;
            draw(&sampler, n, seed, |v| v[*cell] as f64)
        }
        Functional::MaxPartialSum { b, eps, start } => {
            validate_sequence(b, *eps, *start)?;
            if b.len() > m {
                return Err(Error::DimensionMismatch { expected: m, got: b.len() });
            }
            let means = (0..b.len())
                .map(|c| process.cell_law(c).map(|l| l.mean()))
                .collect::<Result<Vec<f64>>>()?;
            let from = start.unwrap_or(1);
            draw(&sampler, n, seed, |v| max_partial_exceeds(v, &means, b, *eps, from) as u8 as f64)
        }
    };
    Ok(McEstimate::from_values(&values, seed, functional.is_indicator()))
}

/// `b` positive and strictly increasing, `eps > 0`, `1 <= start < n`.
pub fn validate_sequence(b: &[f64], eps: f64, start: Option<usize>) -> Result<()> {
    if b.is_empty() {
        return Err(Error::Domain("normalising sequence is empty".into()));
    }
    if !(b[0] > 0.0) || b.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(format!("normalising sequence {b:?} must be positive and strictly increasing")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps = {eps} must be > 0")));
    }
    if let Some(m) = start {
        if m < 1 || m >= b.len() {
            return Err(Error::Domain(format!("start index {m} must satisfy 1 <= m < {}", b.len())));
        }
    }
    Ok(())
}

fn max_partial_exceeds(counts: &[usize], means: &[f64], b: &[f64], eps: f64, from: usize) -> bool {
    let mut partial = 0.0;
    for k in 0..b.len() {
        partial += counts[k] as f64 - means[k];
        if k + 1 >= from && (partial / b[k]).abs() >= eps {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete_laws::Pmf;
    use crate::pointproc::{MixedSampledProcess, PartitionModel};

    fn process(tau: Pmf, q: &[f64]) -> PointProcess {
        PointProcess::Mixed(MixedSampledProcess::new(tau, PartitionModel::new(q.to_vec()).unwrap()))
    }

    #[test]
    fn void_of_empty_process() {
        let p = process(Pmf::point_mass(0), &[0.5, 0.5]);
        let e = mc_estimate(&p, &Functional::Void { cells: vec![0, 1] }, 500, 1).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert!(e.ci_wilson.unwrap()[0] < 1.0);
    }

    #[test]
    fn reproducible() {
        let p = process(Pmf::binomial(5, 0.3).unwrap(), &[0.4, 0.4]);
        let f = Functional::CountMean { cell: 1 };
        let a = mc_estimate(&p, &f, 2000, 42).unwrap();
        let b = mc_estimate(&p, &f, 2000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_ne!(a, mc_estimate(&p, &f, 2000, 43).unwrap());
    }

    #[test]
    fn poisson_void_matches_exact() {
        let p = PointProcess::Mixed(
            MixedSampledProcess::poisson(1.0, PartitionModel::new(vec![1.0]).unwrap()).unwrap(),
        );
        let e = mc_estimate(&p, &Functional::Void { cells: vec![0] }, 100_000, 9).unwrap();
        let exact = (-1.0f64).exp();
        assert!((e.estimate - exact).abs() < 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = process(Pmf::point_mass(1), &[1.0]);
        assert!(mc_estimate(&p, &Functional::CountMean { cell: 0 }, 99, 0).is_err());
        assert!(mc_estimate(&p, &Functional::CountMean { cell: 1 }, 100, 0).is_err());
        let f = Functional::MaxPartialSum { b: vec![2.0, 1.0], eps: 1.0, start: None };
        assert!(mc_estimate(&process(Pmf::point_mass(1), &[0.5, 0.5]), &f, 100, 0).is_err());
    }

    #[test]
    fn wilson_contains_estimate() {
        for (p, n) in [(0.0, 100.0), (1.0, 100.0), (0.3, 1000.0)] {
            let [lo, hi] = wilson(p, n, Z95);
            assert!(lo <= p && p <= hi);
        }
    }
}

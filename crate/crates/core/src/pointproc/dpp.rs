//! Finite determinantal point processes on a ground set `{0, ..., N-1}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CountVectorLaw;
use crate::discrete_laws::{poisson_binomial, JointPmf, Pmf};
use crate::error::{Error, Result};
use crate::numeric::KahanSum;

pub const DPP_EXACT_MAX_POINTS: usize = 12;
const KERNEL_TOL: f64 = 1e-10;
const CLIP_TOL: f64 = 1e-12;

/// Kernel plus the cell label of every ground point; `None` sends the point
/// to the untracked remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct DppModel {
    kernel: DMatrix<f64>,
    cell_of: Vec<Option<usize>>,
    cells: usize,
}

impl DppModel {
    /// Checks shapes only; use [`dpp_validate`] for the spectral conditions.
    pub fn new(kernel: Vec<Vec<f64>>, cell_of: Vec<Option<usize>>) -> Result<Self> {
        let n = kernel.len();
        if let Some(row) = kernel.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
        if cell_of.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: cell_of.len() });
        }
        if kernel.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidKernel("non-finite entry".into()));
        }
        let cells = cell_of.iter().flatten().max().map_or(0, |c| c + 1);
        let kernel = DMatrix::from_fn(n, n, |i, j| kernel[i][j]);
        Ok(Self { kernel, cell_of, cells })
    }

    /// Every point in its own cell.
    pub fn singletons(kernel: Vec<Vec<f64>>) -> Result<Self> {
        let n = kernel.len();
        Self::new(kernel, (0..n).map(Some).collect())
    }

    pub fn points(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn kernel_rows(&self) -> Vec<Vec<f64>> {
        (0..self.points())
            .map(|i| self.kernel.row(i).iter().copied().collect())
            .collect()
    }

    pub fn cell_of(&self) -> &[Option<usize>] {
        &self.cell_of
    }

    pub fn cell_points(&self, cell: usize) -> Vec<usize> {
        (0..self.points()).filter(|&i| self.cell_of[i] == Some(cell)).collect()
    }

    fn symmetrized(&self) -> DMatrix<f64> {
        (&self.kernel + self.kernel.transpose()) * 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DppDiagnostics {
    pub n: usize,
    pub symmetry_defect: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub pass: bool,
    pub failures: Vec<String>,
}

fn eigenvalues_sorted(k: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(k).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn dpp_validate(d: &DppModel) -> DppDiagnostics {
    let n = d.points();
    let k = &d.kernel;
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            defect = defect.max((k[(i, j)] - k[(j, i)]).abs());
        }
    }
    let eigenvalues = if n == 0 { Vec::new() } else { eigenvalues_sorted(d.symmetrized()) };
    let mut failures = Vec::new();
    if defect > KERNEL_TOL {
        failures.push(format!("kernel not symmetric: defect {defect:e}"));
    }
    if let Some(lo) = eigenvalues.first().filter(|l| **l < -KERNEL_TOL) {
        failures.push(format!("eigenvalue {lo} < 0"));
    }
    if let Some(hi) = eigenvalues.last().filter(|h| **h > 1.0 + KERNEL_TOL) {
        failures.push(format!("eigenvalue {hi} > 1"));
    }
    DppDiagnostics { n, symmetry_defect: defect, eigenvalues, pass: failures.is_empty(), failures }
}

fn require_valid(d: &DppModel) -> Result<()> {
    let diag = dpp_validate(d);
    if diag.pass {
        Ok(())
    } else {
        Err(Error::InvalidKernel(diag.failures.join("; ")))
    }
}

/// `P(S ⊆ η) = det(K_S)` for a list of ground points.
pub fn dpp_inclusion_probability(d: &DppModel, set: &[usize]) -> Result<f64> {
    if let Some(i) = set.iter().find(|i| **i >= d.points()) {
        return Err(Error::Index(format!("point {i} of {}", d.points())));
    }
    let sub = DMatrix::from_fn(set.len(), set.len(), |a, b| d.kernel[(set[a], set[b])]);
    Ok(sub.lu().determinant())
}

/// Exact subset law indexed by bitmask (bit `i` = point `i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DppSubsetLaw {
    pub n: usize,
    pub probs: Vec<f64>,
    /// Largest negative round-off clipped to zero before renormalising.
    pub clipped: f64,
    /// Total mass before renormalising.
    pub raw_total: f64,
}

impl DppSubsetLaw {
    pub fn prob(&self, mask: u32) -> f64 {
        self.probs[mask as usize]
    }

    /// The same law as 0/1 indicator vectors.
    pub fn to_joint(&self) -> Result<JointPmf> {
        let n = self.n;
        JointPmf::from_atoms(
            n,
            self.probs.iter().enumerate().map(|(mask, p)| {
                ((0..n).map(|i| (mask >> i & 1) as f64).collect::<Vec<f64>>(), *p)
            }),
        )
    }
}

/// `P(η = S) = (-1)^{|S^c|} det(K - I_{S^c})`, via pivoted LU.
pub fn dpp_exact_law(d: &DppModel) -> Result<DppSubsetLaw> {
    let n = d.points();
    if n > DPP_EXACT_MAX_POINTS {
        return Err(Error::Guard {
            what: "ground set size for the exact subset law".into(),
            limit: DPP_EXACT_MAX_POINTS as u64,
            got: n as u64,
        });
    }
    require_valid(d)?;
    let k = d.symmetrized();
    let mut clipped = 0.0f64;
    let mut raw = Vec::with_capacity(1 << n);
    for mask in 0u32..(1 << n) {
        let mut m = k.clone();
        let mut outside = 0;
        for i in 0..n {
            if mask >> i & 1 == 0 {
                m[(i, i)] -= 1.0;
                outside += 1;
            }
        }
        let det = m.lu().determinant();
        let p = if outside % 2 == 0 { det } else { -det };
        if p < -CLIP_TOL {
            return Err(Error::InvalidKernel(format!("subset {mask:#b} has probability {p}")));
        }
        if p < 0.0 {
            clipped = clipped.max(-p);
        }
        raw.push(p.max(0.0));
    }
    let total: f64 = raw.iter().copied().collect::<KahanSum>().value();
    Ok(DppSubsetLaw { n, probs: raw.into_iter().map(|p| p / total).collect(), clipped, raw_total: total })
}

/// Aggregates the subset law by cell labels.
pub fn dpp_count_law(d: &DppModel) -> Result<CountVectorLaw> {
    let law = dpp_exact_law(d)?;
    let cells = d.cells();
    let atoms = law.probs.iter().enumerate().map(|(mask, p)| {
        let mut counts = vec![0.0; cells];
        for (i, c) in d.cell_of.iter().enumerate() {
            if let (Some(c), true) = (c, mask >> i & 1 == 1) {
                counts[*c] += 1.0;
            }
        }
        (counts, *p)
    });
    Ok(CountVectorLaw::exact(JointPmf::normalized_from_atoms(cells, atoms)?))
}

/// The count in one cell is Poisson-binomial in the eigenvalues of the
/// principal submatrix on that cell.
pub fn dpp_single_cell_law(d: &DppModel, cell: usize) -> Result<Pmf> {
    require_valid(d)?;
    let pts = d.cell_points(cell);
    if pts.is_empty() {
        return Ok(Pmf::point_mass(0));
    }
    let k = d.symmetrized();
    let sub = DMatrix::from_fn(pts.len(), pts.len(), |a, b| k[(pts[a], pts[b])]);
    let ev: Vec<f64> = eigenvalues_sorted(sub).into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
    poisson_binomial(&ev)
}

/// Spectral sampler with the eigendecomposition cached.
#[derive(Debug, Clone)]
pub struct DppSampler {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl DppSampler {
    pub fn new(d: &DppModel) -> Result<Self> {
        require_valid(d)?;
        let eig = SymmetricEigen::new(d.symmetrized());
        Ok(Self {
            eigenvalues: eig.eigenvalues.iter().map(|x| x.clamp(0.0, 1.0)).collect(),
            eigenvectors: eig.eigenvectors,
        })
    }

    /// Sorted ground points of one realisation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let n = self.eigenvalues.len();
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for (k, lambda) in self.eigenvalues.iter().enumerate() {
            let u: f64 = rng.random();
            if u < *lambda {
                cols.push(self.eigenvectors.column(k).into_owned());
            }
        }
        let mut out = Vec::with_capacity(cols.len());
        while !cols.is_empty() {
            let dim = cols.len() as f64;
            let weights: Vec<f64> = (0..n)
                .map(|i| cols.iter().map(|v| v[i] * v[i]).sum::<f64>() / dim)
                .collect();
            let i = pick(&weights, rng);
            out.push(i);
            // eliminate the coordinate i from the span, dropping one vector
            let pivot = (0..cols.len())
                .max_by(|&a, &b| cols[a][i].abs().total_cmp(&cols[b][i].abs()))
                .expect("non-empty");
            let pv = cols.swap_remove(pivot);
            for v in cols.iter_mut() {
                let f = v[i] / pv[i];
                v.axpy(-f, &pv, 1.0);
            }
            orthonormalize(&mut cols);
        }
        out.sort_unstable();
        out
    }
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Modified Gram-Schmidt.
fn orthonormalize(cols: &mut [DVector<f64>]) {
    for a in 0..cols.len() {
        for b in 0..a {
            let (head, tail) = cols.split_at_mut(a);
            let proj = tail[0].dot(&head[b]);
            tail[0].axpy(-proj, &head[b], 1.0);
        }
        let norm = cols[a].norm();
        if norm > 0.0 {
            cols[a] /= norm;
        }
    }
}

/// One-shot sample; builds the spectrum every call.
pub fn dpp_sample<R: Rng + ?Sized>(d: &DppModel, rng: &mut R) -> Result<Vec<usize>> {
    Ok(DppSampler::new(d)?.sample(rng))
}

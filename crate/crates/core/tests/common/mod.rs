#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use negassoc::discrete_laws::{is_ulc, Pmf};
use negassoc::pointproc::{DppModel, PartitionModel};
use negassoc::numeric::binomial;
use negassoc::sturm::count_roots;

pub fn uniform_in<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Cell probabilities for `m` cells, with a remainder cell half the time.
pub fn random_partition<R: Rng>(rng: &mut R, m: usize) -> PartitionModel {
    let with_rest = rng.random::<bool>();
    let parts = m + with_rest as usize;
    let w: Vec<f64> = (0..parts).map(|_| uniform_in(rng, 0.05, 1.0)).collect();
    let total: f64 = w.iter().sum();
    PartitionModel::new(w[..m].iter().map(|x| x / total).collect()).unwrap()
}

/// A ULC law on `{0..n}` with full support: weights `C(n, k) exp(c_k)` with
/// `c` concave.
pub fn random_ulc<R: Rng>(rng: &mut R, n: usize) -> Pmf {
    let mut step = uniform_in(rng, -1.5, 1.5);
    let mut c = 0.0f64;
    let mut w = Vec::with_capacity(n + 1);
    for k in 0..=n {
        w.push(binomial(n, k) * c.exp());
        c += step;
        step -= uniform_in(rng, 0.0, 1.0);
    }
    let p = Pmf::from_weights(w).unwrap();
    assert!(is_ulc(&p).unwrap().holds, "{:?}", p.probs());
    p
}

pub fn real_rooted(p: &Pmf) -> bool {
    count_roots(p.probs()).real_rooted()
}

/// A ULC law on `{0..3}` whose generating polynomial has non-real roots.
pub fn random_ulc_not_real_rooted<R: Rng>(rng: &mut R) -> Pmf {
    loop {
        let p = random_ulc(rng, 3);
        if !real_rooted(&p) {
            return p;
        }
    }
}

/// `K = U diag(lambda) U^T` with Haar-ish `U` and `lambda ~ U(0, 1)`.
pub fn random_kernel<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.random::<f64>()));
    let k = &q * lambda * q.transpose();
    let k = (&k + k.transpose()) * 0.5;
    (0..n).map(|i| (0..n).map(|j| k[(i, j)]).collect()).collect()
}

/// Random kernel with every point assigned to one of `m` cells (each cell
/// non-empty).
pub fn random_dpp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DppModel {
    let kernel = random_kernel(rng, n);
    let mut cells: Vec<Option<usize>> = (0..n).map(|i| Some(i % m)).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        cells.swap(i, j);
    }
    DppModel::new(kernel, cells).unwrap()
}

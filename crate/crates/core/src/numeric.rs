//! Small numeric kernels shared across modules.

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Binomial coefficient as f64. Exact for every result below 2^53; past
/// the u128 range it continues in floating point.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        match acc.checked_mul((n - i) as u128) {
            Some(x) => acc = x / (i + 1) as u128,
            None => {
                let mut f = acc as f64;
                for j in i..k {
                    f = f * (n - j) as f64 / (j + 1) as f64;
                }
                return f;
            }
        }
    }
    acc as f64
}

/// Multinomial coefficient N! / (k_1! ... k_r!) with N = sum of parts.
pub fn multinomial(parts: &[usize]) -> f64 {
    let mut total = 0usize;
    let mut acc = 1.0;
    for &k in parts {
        total += k;
        acc *= binomial(total, k);
    }
    acc
}

/// `true` when `a >= b` up to a relative slack on the larger magnitude.
pub fn ge_rel(a: f64, b: f64, rel: f64) -> bool {
    a >= b - rel * a.abs().max(b.abs())
}

#[cfg(test)]
mod tests {
    #[test]
    fn binomial_large_arguments() {
        let c = super::binomial(300, 150);
        // C(300, 150) ~ 9.37597e88
        assert!((c / 9.375_970_277_281_39e88 - 1.0).abs() < 1e-12, "{c}");
        assert_eq!(super::binomial(200, 1), 200.0);
    }

    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(30, 15), 155_117_520.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(multinomial(&[1, 1, 0]), 2.0);
        assert_eq!(multinomial(&[2, 1, 1]), 12.0);
    }

    #[test]
    fn compensated_beats_naive() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
    }
}

//! Compensated and order-stable summation.

use std::ops::AddAssign;

use rayon::prelude::*;

/// Kahan-Babuska-Neumaier running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    s: f64,
    c: f64,
}

impl NeumaierSum {
    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

impl AddAssign<f64> for NeumaierSum {
    #[inline]
    fn add_assign(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = NeumaierSum::default();
    for x in xs {
        acc += x;
    }
    acc.value()
}

/// `Σ_{i<n} f(i)`, evaluated in parallel and reduced in index order.
///
/// Each term is computed independently, then folded sequentially, so the
/// result is bit-identical for any number of worker threads.
pub fn par_ordered_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let terms: Vec<f64> = (0..n).into_par_iter().map(&f).collect();
    compensated_sum(terms)
}

/// Like [`par_ordered_sum`] for `K` simultaneous sums.
pub fn par_ordered_sums<const K: usize, F>(n: usize, f: F) -> [f64; K]
where
    F: Fn(usize) -> [f64; K] + Sync,
{
    let terms: Vec<[f64; K]> = (0..n).into_par_iter().map(&f).collect();
    let mut acc = [NeumaierSum::default(); K];
    for t in &terms {
        for (a, x) in acc.iter_mut().zip(t) {
            *a += *x;
        }
    }
    acc.map(|a| a.value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        assert_eq!(compensated_sum([1.0, 1e100, 1.0, -1e100]), 2.0);
        let naive: f64 = [1.0, 1e100, 1.0, -1e100].iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn adding_zeros_is_exact() {
        let xs = [0.1, 0.7, -0.3, 1e-9];
        let with_zeros = [0.1, 0.0, 0.7, 0.0, -0.3, 0.0, 1e-9];
        assert_eq!(
            compensated_sum(xs).to_bits(),
            compensated_sum(with_zeros).to_bits()
        );
    }

    #[test]
    fn worker_count_invariance() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let serial = compensated_sum((0..10_000).map(f));
        for threads in [1, 2, 3, 7] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let par = pool.install(|| par_ordered_sum(10_000, f));
            assert_eq!(par.to_bits(), serial.to_bits());
        }
        let two = par_ordered_sums(100, |i| [i as f64, 1.0]);
        assert_eq!(two, [4950.0, 100.0]);
    }
}

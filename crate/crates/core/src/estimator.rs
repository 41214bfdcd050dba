//! Running mean / variance accumulators and the replica driver.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::rng::RngStream;

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    sum_sq_dev: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.sum_sq_dev += delta * (value - self.mean);
    }

    /// Pairwise combination (Chan et al.).
    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / n as f64;
        self.mean += delta * w;
        self.sum_sq_dev += other.sum_sq_dev + delta * delta * self.count as f64 * w;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sum_sq_dev(&self) -> f64 {
        self.sum_sq_dev
    }

    /// Standard error of the mean; zero below two samples.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        (self.sum_sq_dev.max(0.0) / n / (n - 1.0)).sqrt()
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean,
            stderr: self.stderr(),
            samples: self.count,
        }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::new();
        iter.into_iter().for_each(|v| acc.push(v));
        acc
    }
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl Estimate {
    /// `(self - other) / sqrt(se1^2 + se2^2)`; zero when both are exact and equal.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let diff = self.mean - other.mean;
        let se = self.stderr.hypot(other.stderr);
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            }
        } else {
            diff / se
        }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

const CHUNK: u64 = 1024;

/// Runs `n` replicas in parallel; replica `r` receives `stream.replica(r)`
/// and writes `dim` observables into its output slice.
///
/// Replicas are grouped into fixed chunks that are reduced in order, so the
/// result is bit-identical for any thread count.
pub fn run_replicas<F>(n: u64, stream: RngStream, dim: usize, replica: F) -> Vec<Accumulator>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<Vec<Accumulator>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut accs = vec![Accumulator::new(); dim];
            let mut out = vec![0.0; dim];
            for r in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut rng = stream.replica(r);
                out.iter_mut().for_each(|v| *v = 0.0);
                replica(&mut rng, &mut out);
                for (acc, &v) in accs.iter_mut().zip(&out) {
                    acc.push(v);
                }
            }
            accs
        })
        .collect();
    let mut total = vec![Accumulator::new(); dim];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    total
}

/// Scalar form of [`run_replicas`].
pub fn run_scalar<F>(n: u64, stream: RngStream, replica: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    run_replicas(n, stream, 1, |rng, out| out[0] = replica(rng))[0].estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn stderr_formula() {
        let acc: Accumulator = [1.0, 2.0, 3.0, 4.0].into_iter().collect();
        assert_relative_eq!(acc.mean(), 2.5);
        assert_relative_eq!(acc.sum_sq_dev(), 5.0);
        assert_relative_eq!(acc.stderr(), (5.0f64 / 4.0 / 3.0).sqrt());
        assert_eq!(Accumulator::new().stderr(), 0.0);
    }

    #[test]
    fn replicas_are_thread_independent() {
        let f = |rng: &mut ChaCha8Rng| rng.random::<f64>();
        let a = run_scalar(5000, RngStream::new(1, 2), f);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| run_scalar(5000, RngStream::new(1, 2), f));
        assert_eq!(a, b);
        assert!(a.within(0.5, 4.0));
    }

    #[test]
    fn z_score_edge_cases() {
        let e = Estimate {
            mean: 0.5,
            stderr: 0.0,
            samples: 1,
        };
        assert_eq!(e.z_score(&e), 0.0);
        let f = Estimate {
            mean: 0.6,
            stderr: 0.0,
            samples: 1,
        };
        assert!(f.z_score(&e).is_infinite());
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in prop::collection::vec(-10.0f64..10.0, 0..60), split in 0usize..60) {
            let split = split.min(xs.len());
            let whole: Accumulator = xs.iter().copied().collect();
            let mut left: Accumulator = xs[..split].iter().copied().collect();
            let right: Accumulator = xs[split..].iter().copied().collect();
            left.merge(&right);
            prop_assert_eq!(left.count(), whole.count());
            prop_assert!((left.mean() - whole.mean()).abs() < 1e-9);
            prop_assert!((left.sum_sq_dev() - whole.sum_sq_dev()).abs() < 1e-7);
        }
    }
}

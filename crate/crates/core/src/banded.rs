//! Banded LU without pivoting, for diagonally dominant systems.

use crate::error::{Error, Result};

/// Square matrix stored by diagonals within half-bandwidth `band`.
#[derive(Debug, Clone)]
pub(crate) struct BandedMatrix {
    n: usize,
    band: usize,
    // row i holds columns i-band ..= i+band
    data: Vec<f64>,
}

impl BandedMatrix {
    pub(crate) fn zeros(n: usize, band: usize) -> Self {
        Self {
            n,
            band,
            data: vec![0.0; n * (2 * band + 1)],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(
            i.abs_diff(j) <= self.band,
            "({i}, {j}) outside band {}",
            self.band
        );
        i * (2 * self.band + 1) + (j + self.band - i)
    }

    pub(crate) fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self.slot(i, j);
        self.data[k] += value;
    }

    /// Solves `A x = rhs`, consuming the matrix.
    pub(crate) fn solve(mut self, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
        let (n, w) = (self.n, self.band);
        for k in 0..n {
            let pivot = self.data[self.slot(k, k)];
            if pivot.abs() < 1e-300 {
                return Err(Error::Numeric(format!("zero pivot at row {k}")));
            }
            let last = (k + w).min(n - 1);
            for i in k + 1..=last {
                let factor = self.data[self.slot(i, k)] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in k..=last {
                    let u = self.data[self.slot(k, j)];
                    let s = self.slot(i, j);
                    self.data[s] -= factor * u;
                }
                rhs[i] -= factor * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let last = (k + w).min(n - 1);
            let mut acc = rhs[k];
            for (j, x) in rhs.iter().enumerate().take(last + 1).skip(k + 1) {
                acc -= self.data[self.slot(k, j)] * x;
            }
            rhs[k] = acc / self.data[self.slot(k, k)];
        }
        Ok(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_laplacian() {
        // -u'' = 0 on 5 nodes with u(0)=0, u(6)=1 gives u(i)=i/6
        let n = 5;
        let mut a = BandedMatrix::zeros(n, 1);
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        rhs[n - 1] = 1.0;
        let x = a.solve(rhs).unwrap();
        for (i, v) in x.iter().enumerate() {
            assert!((v - (i + 1) as f64 / 6.0).abs() < 1e-14);
        }
    }
}

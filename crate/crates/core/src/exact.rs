//! Exact stationary law of the forward chain on the `2^S` interior
//! configurations.
//!
//! States are interior bitmasks with site 1 as the least significant bit.
//! Every transition has rate `lambda`, so the generator is stored as a
//! compressed list of targets per state.

use crate::error::{Error, Result};
use crate::lattice::{ModelParams, PointSet};

/// Largest `S` accepted by [`build_generator`].
pub const DEFAULT_MAX_EXACT_SIZE: usize = 20;

/// Default stopping threshold on the l1 increment of the power iteration.
pub const DEFAULT_TOL: f64 = 1e-13;

const DEFAULT_MAX_ITERATIONS: usize = 5_000_000;

#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    size: usize,
    rate: f64,
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl GeneratorMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dimension(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Targets of the rate-`lambda` transitions out of `state`.
    pub fn targets(&self, state: usize) -> &[u32] {
        &self.targets[self.offsets[state]..self.offsets[state + 1]]
    }

    /// Total exit rate of `state` (minus the diagonal entry).
    pub fn exit_rate(&self, state: usize) -> f64 {
        self.rate * self.targets(state).len() as f64
    }

    /// Uniformization constant `lambda (S+1)`.
    pub fn uniformization_rate(&self) -> f64 {
        self.rate * (self.size + 1) as f64
    }

    /// Entry `q(from, to)` of the generator.
    pub fn entry(&self, from: usize, to: usize) -> f64 {
        if from == to {
            -self.exit_rate(from)
        } else {
            self.rate
                * self
                    .targets(from)
                    .iter()
                    .filter(|&&t| t as usize == to)
                    .count() as f64
        }
    }

    /// `pi Q` as a dense vector.
    pub fn left_apply(&self, pi: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.dimension())
            .map(|s| -self.exit_rate(s) * pi[s])
            .collect();
        for (s, &p) in pi.iter().enumerate() {
            for &t in self.targets(s) {
                out[t as usize] += self.rate * p;
            }
        }
        out
    }
}

/// Successor masks of `state` under every enabled bond, left to right.
fn successors(size: usize, state: u64, out: &mut Vec<u32>) {
    if state & 1 == 1 {
        out.push((state & !1) as u32);
    }
    for left in 1..size {
        let a = state >> (left - 1) & 1;
        let b = state >> left & 1;
        if a != b {
            out.push((state ^ (0b11 << (left - 1))) as u32);
        }
    }
    let top = 1u64 << (size - 1);
    if state & top == 0 {
        out.push((state | top) as u32);
    }
}

pub fn build_generator(params: &ModelParams) -> Result<GeneratorMatrix> {
    build_generator_capped(params, DEFAULT_MAX_EXACT_SIZE)
}

pub fn build_generator_capped(params: &ModelParams, max_size: usize) -> Result<GeneratorMatrix> {
    let size = params.size();
    if size > max_size.min(30) {
        return Err(Error::Resource(format!(
            "exact stationary solve supports S <= {}, got S = {size}",
            max_size.min(30)
        )));
    }
    let dim = 1usize << size;
    let mut offsets = Vec::with_capacity(dim + 1);
    let mut targets = Vec::with_capacity(dim * (size + 1) / 2 + 1);
    offsets.push(0);
    for state in 0..dim as u64 {
        successors(size, state, &mut targets);
        offsets.push(targets.len());
    }
    Ok(GeneratorMatrix {
        size,
        rate: params.rate(),
        offsets,
        targets,
    })
}

#[derive(Debug, Clone)]
pub struct StationaryVector {
    size: usize,
    probabilities: Vec<f64>,
    iterations: usize,
    increment: f64,
}

impl StationaryVector {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, mask: usize) -> f64 {
        self.probabilities[mask]
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// l1 increment of the final power-iteration step.
    pub fn final_increment(&self) -> f64 {
        self.increment
    }

    /// `max |(pi Q)_j|`.
    pub fn residual(&self, generator: &GeneratorMatrix) -> f64 {
        generator
            .left_apply(&self.probabilities)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Stationary law by power iteration on `P = I + Q / (lambda (S+1))`.
pub fn stationary_distribution(generator: &GeneratorMatrix, tol: f64) -> Result<StationaryVector> {
    stationary_distribution_capped(generator, tol, DEFAULT_MAX_ITERATIONS)
}

pub fn stationary_distribution_capped(
    generator: &GeneratorMatrix,
    tol: f64,
    max_iterations: usize,
) -> Result<StationaryVector> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::validation("tolerance must be positive"));
    }
    let dim = generator.dimension();
    // every off-diagonal entry of P equals lambda / Lambda = 1 / (S+1)
    let jump = generator.rate / generator.uniformization_rate();
    let stay: Vec<f64> = (0..dim)
        .map(|s| 1.0 - jump * generator.targets(s).len() as f64)
        .collect();
    let mut pi = vec![1.0 / dim as f64; dim];
    let mut next = vec![0.0; dim];
    let mut increment = f64::INFINITY;
    for iteration in 1..=max_iterations {
        for (n, (&p, &st)) in next.iter_mut().zip(pi.iter().zip(&stay)) {
            *n = p * st;
        }
        for (s, &p) in pi.iter().enumerate() {
            let flow = p * jump;
            for &t in generator.targets(s) {
                next[t as usize] += flow;
            }
        }
        let total: f64 = next.iter().sum();
        increment = 0.0;
        for (p, n) in pi.iter_mut().zip(&next) {
            let v = n / total;
            increment += (v - *p).abs();
            *p = v;
        }
        if increment < tol {
            return Ok(StationaryVector {
                size: generator.size,
                probabilities: pi,
                iterations: iteration,
                increment,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iterations,
        residual: increment,
    })
}

/// `m(points)`: stationary probability that all `points` are occupied.
///
/// A point at `0` gives 0 and a point at `S+1` is dropped.
pub fn exact_moment(pi: &StationaryVector, points: &PointSet) -> Result<f64> {
    let size = pi.size;
    let mut mask = 0usize;
    for x in points.iter() {
        match x {
            0 => return Ok(0.0),
            x if x <= size => mask |= 1 << (x - 1),
            x if x == size + 1 => {}
            x => {
                return Err(Error::validation(format!(
                    "site {x} outside 0..={}",
                    size + 1
                )))
            }
        }
    }
    Ok(pi
        .probabilities
        .iter()
        .enumerate()
        .filter(|(s, _)| s & mask == mask)
        .map(|(_, p)| p)
        .sum())
}

/// `m_1(x)` for `x = 1..=S`.
pub fn one_point_profile(pi: &StationaryVector) -> Vec<f64> {
    (1..=pi.size)
        .map(|x| exact_moment(pi, &PointSet::singleton(x)).expect("interior site"))
        .collect()
}

/// `m_2(x, y)` for all `1 <= x < y <= S`, lexicographic in `(x, y)`.
pub fn two_point_table(pi: &StationaryVector) -> Vec<(usize, usize, f64)> {
    let s = pi.size;
    let mut rows = Vec::with_capacity(s * s.saturating_sub(1) / 2);
    for x in 1..=s {
        for y in x + 1..=s {
            let set = PointSet::pair(x, y).expect("x < y");
            rows.push((x, y, exact_moment(pi, &set).expect("interior sites")));
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(size: usize, rate: f64) -> (GeneratorMatrix, StationaryVector) {
        let p = ModelParams::new(size, rate, 0).unwrap();
        let g = build_generator(&p).unwrap();
        let pi = stationary_distribution(&g, DEFAULT_TOL).unwrap();
        (g, pi)
    }

    #[test]
    fn generator_s1() {
        let (g, _) = solve(1, 2.5);
        assert_eq!(g.targets(0), &[1]);
        assert_eq!(g.targets(1), &[0]);
        assert_eq!(g.entry(0, 1), 2.5);
        assert_eq!(g.entry(1, 1), -2.5);
    }

    #[test]
    fn generator_s2_by_hand() {
        let (g, _) = solve(2, 1.0);
        // masks: site 1 = bit 0; "10" = site 1 occupied = mask 1
        let mut from_10: Vec<u32> = g.targets(0b01).to_vec();
        from_10.sort_unstable();
        assert_eq!(from_10, vec![0b00, 0b10, 0b11]);
        assert_eq!(g.targets(0b10), &[0b01]);
    }

    #[test]
    fn generator_rows_sum_to_zero_and_all_ones_has_one_exit() {
        for s in 1..=8 {
            let (g, _) = solve(s, 1.0);
            let full = (1usize << s) - 1;
            assert_eq!(g.targets(full), &[(full & !1) as u32]);
            for state in 0..g.dimension() {
                let row: f64 = (0..g.dimension()).map(|t| g.entry(state, t)).sum();
                assert!(row.abs() < 1e-12);
                assert!(g.targets(state).len() <= s + 1);
            }
        }
    }

    #[test]
    fn size_cap_is_a_resource_error() {
        let p = ModelParams::with_size(21).unwrap();
        assert!(matches!(build_generator(&p), Err(Error::Resource(_))));
        let p = ModelParams::with_size(4).unwrap();
        assert!(matches!(
            build_generator_capped(&p, 3),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn s1_and_s2_closed_forms() {
        let (_, pi) = solve(1, 1.0);
        assert!((pi.probability(0) - 0.5).abs() < 1e-12);
        let (_, pi) = solve(2, 1.0);
        // (00, 01, 10, 11) in interior-pattern notation
        let expected = [
            (0b00, 1.0 / 6.0),
            (0b10, 0.5),
            (0b01, 1.0 / 6.0),
            (0b11, 1.0 / 6.0),
        ];
        for (mask, p) in expected {
            assert!((pi.probability(mask) - p).abs() < 1e-12, "mask {mask:b}");
        }
        let m2 = exact_moment(&pi, &PointSet::pair(1, 2).unwrap()).unwrap();
        assert!((m2 - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn linear_profile_and_residual() {
        for s in [3, 8, 10] {
            let (g, pi) = solve(s, 1.0);
            assert!(pi.probabilities().iter().all(|&p| p > 0.0));
            let total: f64 = pi.probabilities().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(pi.residual(&g) < 10.0 * DEFAULT_TOL * g.uniformization_rate());
            for (i, m) in one_point_profile(&pi).into_iter().enumerate() {
                let x = (i + 1) as f64;
                assert!((m - x / (s as f64 + 1.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn boundary_identities_and_monotonicity() {
        let (_, pi) = solve(6, 1.0);
        assert_eq!(
            exact_moment(&pi, &PointSet::new(vec![0, 3]).unwrap()).unwrap(),
            0.0
        );
        let base = exact_moment(&pi, &PointSet::pair(2, 4).unwrap()).unwrap();
        let ext = exact_moment(&pi, &PointSet::new(vec![2, 4, 7]).unwrap()).unwrap();
        assert_eq!(base, ext);
        let three = exact_moment(&pi, &PointSet::new(vec![2, 4, 5]).unwrap()).unwrap();
        assert!(three <= base);
        assert!(exact_moment(&pi, &PointSet::singleton(8)).is_err());
    }

    #[test]
    fn rate_invariance() {
        let (_, a) = solve(5, 1.0);
        let (_, b) = solve(5, 3.0);
        for (p, q) in a.probabilities().iter().zip(b.probabilities()) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let p = ModelParams::with_size(6).unwrap();
        let g = build_generator(&p).unwrap();
        let err = stationary_distribution_capped(&g, 1e-14, 3).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 3, .. }));
    }
}

//! The absorbing dual of the forward process.
//!
//! Dual particles perform a symmetric exclusion walk on `[0, S+1]`. A
//! particle stepping onto site 0 kills the whole configuration; a particle
//! stepping onto `S+1` sticks there and no longer interacts with the rest.
//! The stationary correlation `m_k(A)` equals the probability that the walk
//! started from `A` ends with every particle stuck.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::estimator::{run_scalar, Estimate};
use crate::lattice::{Configuration, ModelParams, PointSet};
use crate::rng::RngStream;

/// Hard cap on embedded-chain jumps of a single dual trajectory.
pub const JUMP_CAP: u64 = 1_000_000_000;

/// A non-identity move of the dual walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualMove {
    /// Particle `index` hops to site `to`.
    Hop { index: usize, to: usize },
    /// Particle `index` reaches `S+1`.
    Stick { index: usize },
    /// The leftmost particle reaches 0.
    Death,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualState {
    size: usize,
    free: Vec<usize>,
    stuck: usize,
    dead: bool,
}

impl DualState {
    pub fn new(size: usize, initial: &PointSet) -> Result<Self> {
        if initial.is_empty() {
            return Err(Error::validation("dual walk needs at least one particle"));
        }
        initial.require_interior(size)?;
        Ok(Self {
            size,
            free: initial.as_slice().to_vec(),
            stuck: 0,
            dead: false,
        })
    }

    pub fn free_positions(&self) -> &[usize] {
        &self.free
    }

    pub fn stuck_count(&self) -> usize {
        self.stuck
    }

    pub fn is_dead(&self) -> bool {
        self.dead
    }

    /// Dead, or every particle stuck.
    pub fn is_terminal(&self) -> bool {
        self.dead || self.free.is_empty()
    }

    /// Non-identity moves, each firing at rate `lambda`.
    ///
    /// Two adjacent free particles exchanging places is the identity on the
    /// occupied set and is left out.
    pub fn moves(&self) -> Vec<DualMove> {
        let mut moves = Vec::with_capacity(2 * self.free.len());
        if self.dead {
            return moves;
        }
        for (index, &p) in self.free.iter().enumerate() {
            if p == 1 {
                moves.push(DualMove::Death);
            } else if index == 0 || self.free[index - 1] != p - 1 {
                moves.push(DualMove::Hop { index, to: p - 1 });
            }
            if p == self.size {
                moves.push(DualMove::Stick { index });
            } else if index + 1 == self.free.len() || self.free[index + 1] != p + 1 {
                moves.push(DualMove::Hop { index, to: p + 1 });
            }
        }
        moves
    }

    pub fn apply(&mut self, mv: DualMove) {
        match mv {
            DualMove::Hop { index, to } => self.free[index] = to,
            DualMove::Stick { index } => {
                self.free.remove(index);
                self.stuck += 1;
            }
            DualMove::Death => {
                self.free.clear();
                self.dead = true;
            }
        }
    }

    /// Product of `env` over the current particles; dead gives 0 and stuck
    /// particles read the full reservoir.
    pub fn evaluate(&self, env: &Configuration) -> f64 {
        if self.dead || !self.free.iter().all(|&x| env.occupied(x)) {
            0.0
        } else {
            1.0
        }
    }

    fn two_free_adjacent(&self) -> bool {
        self.stuck == 0 && self.free.len() == 2 && self.free[1] == self.free[0] + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Absorption {
    Died,
    AllStuck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DualOutcome {
    pub result: Absorption,
    /// Entries of two free particles into distance 1 (two-particle walks only).
    pub meeting_count: u64,
    pub total_jumps: u64,
}

/// Runs the embedded jump chain from `initial` to absorption.
pub fn simulate_dual<R: Rng + ?Sized>(
    params: &ModelParams,
    initial: &PointSet,
    rng: &mut R,
) -> Result<DualOutcome> {
    let mut state = DualState::new(params.size(), initial)?;
    let mut meeting_count = 0;
    let mut total_jumps = 0;
    while !state.is_terminal() {
        if total_jumps >= JUMP_CAP {
            return Err(Error::Numeric(format!(
                "dual walk exceeded {JUMP_CAP} jumps"
            )));
        }
        let moves = state.moves();
        let was_adjacent = state.two_free_adjacent();
        state.apply(moves[rng.random_range(0..moves.len())]);
        total_jumps += 1;
        if !was_adjacent && state.two_free_adjacent() {
            meeting_count += 1;
        }
    }
    let result = if state.dead {
        Absorption::Died
    } else {
        Absorption::AllStuck
    };
    Ok(DualOutcome {
        result,
        meeting_count,
        total_jumps,
    })
}

/// Monte Carlo probability that the dual walk from `initial` ends all stuck.
pub fn estimate_absorption(
    params: &ModelParams,
    initial: &PointSet,
    n_replicas: u64,
    stream: RngStream,
) -> Result<Estimate> {
    DualState::new(params.size(), initial)?;
    if n_replicas == 0 {
        return Err(Error::validation("replica count must be positive"));
    }
    let failure = std::sync::Mutex::new(None);
    let est = run_scalar(n_replicas, stream, |rng| {
        match simulate_dual(params, initial, rng) {
            Ok(out) if out.result == Absorption::AllStuck => 1.0,
            Ok(_) => 0.0,
            Err(e) => {
                failure.lock().expect("poisoned").get_or_insert(e);
                0.0
            }
        }
    });
    match failure.into_inner().expect("poisoned") {
        Some(e) => Err(e),
        None => Ok(est),
    }
}

/// Monte Carlo estimate of `E prod_{x in A_t} env(x)` for the dual started
/// at `initial_points`, evolved in continuous time to `t`.
pub fn transient_dual_moment(
    params: &ModelParams,
    initial_points: &PointSet,
    initial_env: &Configuration,
    t: f64,
    n_replicas: u64,
    stream: RngStream,
) -> Result<Estimate> {
    let start = DualState::new(params.size(), initial_points)?;
    if initial_env.size() != params.size() {
        return Err(Error::validation(format!(
            "configuration has {} interior sites, model has {}",
            initial_env.size(),
            params.size()
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::validation("time must be finite and nonnegative"));
    }
    if n_replicas == 0 {
        return Err(Error::validation("replica count must be positive"));
    }
    Ok(run_scalar(n_replicas, stream, |rng| {
        let mut state = start.clone();
        let mut now = 0.0;
        while !state.is_terminal() {
            let moves = state.moves();
            now += rng.sample::<f64, _>(Exp1) / (params.rate() * moves.len() as f64);
            if now > t {
                break;
            }
            state.apply(moves[rng.random_range(0..moves.len())]);
        }
        state.evaluate(initial_env)
    }))
}

/// Linear solver for [`pair_absorption_exact`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SolveMethod {
    /// Banded LU on the `(x, y)`-lexicographic ordering.
    Dense,
    /// Gauss-Seidel sweeps ordered by `(y - x, x)`; `relaxation = 1` is plain
    /// Gauss-Seidel, larger values over-relax.
    GaussSeidel { relaxation: f64 },
}

/// Largest `S` for [`SolveMethod::Dense`].
pub const DENSE_MAX_SIZE: usize = 200;
/// Largest `S` for [`SolveMethod::GaussSeidel`].
pub const ITERATIVE_MAX_SIZE: usize = 10_000;

impl SolveMethod {
    pub const fn gauss_seidel() -> Self {
        SolveMethod::GaussSeidel { relaxation: 1.0 }
    }

    /// Over-relaxed Gauss-Seidel with the classical optimal factor for a
    /// Dirichlet Laplacian of linear size `S + 1`.
    pub fn over_relaxed(size: usize) -> Self {
        let rho = (std::f64::consts::PI / (size as f64 + 1.0)).cos();
        SolveMethod::GaussSeidel {
            relaxation: 2.0 / (1.0 + (1.0 - rho * rho).sqrt()),
        }
    }

    /// Dense up to [`DENSE_MAX_SIZE`], over-relaxed sweeps beyond.
    pub fn auto(size: usize) -> Self {
        if size <= DENSE_MAX_SIZE {
            SolveMethod::Dense
        } else {
            Self::over_relaxed(size)
        }
    }
}

/// Absorption probabilities `v(x, y)` of the two-particle dual, padded with
/// their boundary layer: `v(0, y) = 0` and `v(x, S+1) = x / (S+1)`.
#[derive(Debug, Clone)]
pub struct PairAbsorption {
    size: usize,
    // row x in 0..=S holds y in x+1..=S+1
    row_start: Vec<usize>,
    values: Vec<f64>,
    iterations: usize,
}

impl PairAbsorption {
    fn with_boundary(size: usize) -> Self {
        let mut row_start = Vec::with_capacity(size + 2);
        let mut acc = 0;
        for x in 0..=size {
            row_start.push(acc);
            acc += size + 1 - x;
        }
        row_start.push(acc);
        let mut table = Self {
            size,
            row_start,
            values: vec![0.0; acc],
            iterations: 0,
        };
        let denom = (size + 1) as f64;
        for x in 1..=size {
            let k = table.slot(x, size + 1);
            table.values[k] = x as f64 / denom;
        }
        table
    }

    #[inline]
    fn slot(&self, x: usize, y: usize) -> usize {
        self.row_start[x] + (y - x - 1)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `v(x, y)` for `0 <= x < y <= S+1`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        assert!(
            x < y && y <= self.size + 1,
            "pair ({x}, {y}) outside the table"
        );
        self.values[self.slot(x, y)]
    }

    /// Sweeps (iterative) or 1 (dense).
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Interior pairs `1 <= x < y <= S` with their values.
    pub fn interior(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (1..=self.size).flat_map(move |x| (x + 1..=self.size).map(move |y| (x, y, self.get(x, y))))
    }

    /// `max |v(x,y) - mean of v over the enabled moves|` over interior pairs.
    pub fn residual(&self) -> f64 {
        self.interior()
            .map(|(x, y, v)| (v - self.harmonic_mean(x, y)).abs())
            .fold(0.0, f64::max)
    }

    #[inline]
    fn harmonic_mean(&self, x: usize, y: usize) -> f64 {
        if y == x + 1 {
            0.5 * (self.values[self.slot(x - 1, y)] + self.values[self.slot(x, y + 1)])
        } else {
            0.25 * (self.values[self.slot(x - 1, y)]
                + self.values[self.slot(x + 1, y)]
                + self.values[self.slot(x, y - 1)]
                + self.values[self.slot(x, y + 1)])
        }
    }
}

/// Solves the first-step equations of the embedded two-particle dual.
///
/// From `(x, y)` the enabled moves are equally likely: `x - 1` (death when
/// `x = 1`), `x + 1` unless blocked, `y - 1` unless blocked, `y + 1`
/// (sticking when `y = S`, after which the lower particle succeeds with
/// probability `x / (S+1)`).
pub fn pair_absorption_exact(
    params: &ModelParams,
    method: SolveMethod,
    tol: f64,
) -> Result<PairAbsorption> {
    let size = params.size();
    if size < 2 {
        return Err(Error::validation("two-particle dual needs S >= 2"));
    }
    match method {
        SolveMethod::Dense => solve_dense(size),
        SolveMethod::GaussSeidel { relaxation } => {
            if !(relaxation > 0.0 && relaxation < 2.0) {
                return Err(Error::validation(format!(
                    "relaxation must lie in (0, 2), got {relaxation}"
                )));
            }
            if tol.is_nan() || tol <= 0.0 {
                return Err(Error::validation("tolerance must be positive"));
            }
            solve_sweeps(size, relaxation, tol)
        }
    }
}

fn solve_dense(size: usize) -> Result<PairAbsorption> {
    if size > DENSE_MAX_SIZE {
        return Err(Error::Resource(format!(
            "dense pair solve supports S <= {DENSE_MAX_SIZE}, got {size}"
        )));
    }
    let mut table = PairAbsorption::with_boundary(size);
    // unknown index of interior (x, y): lexicographic, row x holding S - x pairs
    let index = |x: usize, y: usize| (x - 1) * size - (x - 1) * x / 2 + (y - x - 1);
    let n = size * (size - 1) / 2;
    let band = size.saturating_sub(2).max(1);
    let mut a = BandedMatrix::zeros(n, band);
    let mut rhs = vec![0.0; n];
    for x in 1..=size {
        for y in x + 1..=size {
            let i = index(x, y);
            let mut neighbours = vec![(x - 1, y), (x, y + 1)];
            if y != x + 1 {
                neighbours.extend([(x + 1, y), (x, y - 1)]);
            }
            a.add(i, i, neighbours.len() as f64);
            for (u, w) in neighbours {
                if u == 0 || w == size + 1 {
                    rhs[i] += table.get(u, w);
                } else {
                    a.add(i, index(u, w), -1.0);
                }
            }
        }
    }
    let solution = a.solve(rhs)?;
    for x in 1..=size {
        for y in x + 1..=size {
            let k = table.slot(x, y);
            table.values[k] = solution[index(x, y)];
        }
    }
    table.iterations = 1;
    Ok(table)
}

fn solve_sweeps(size: usize, relaxation: f64, tol: f64) -> Result<PairAbsorption> {
    if size > ITERATIVE_MAX_SIZE {
        return Err(Error::Resource(format!(
            "iterative pair solve supports S <= {ITERATIVE_MAX_SIZE}, got {size}"
        )));
    }
    let mut table = PairAbsorption::with_boundary(size);
    let max_sweeps = 200 * (size + 1) * (size + 1) + 10_000;
    let mut max_update = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        max_update = 0.0;
        for gap in 1..size {
            for x in 1..=size - gap {
                let y = x + gap;
                let k = table.slot(x, y);
                let delta = relaxation * (table.harmonic_mean(x, y) - table.values[k]);
                table.values[k] += delta;
                max_update = max_update.max(delta.abs());
            }
        }
        if max_update < tol {
            table.iterations = sweep;
            return Ok(table);
        }
    }
    Err(Error::NonConvergence {
        iterations: max_sweeps,
        residual: max_update,
    })
}

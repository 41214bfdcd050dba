//! Meeting-kernel ladder for the two-particle dual.
//!
//! `P_0(x, y) = x y / (S+1)^2` is the probability that two independent
//! walkers started at `x < y` both reach `S+1` before either reaches 0. The
//! process `eta^(k)` follows the exclusion dual until its `k`-th meeting
//! episode (distance 1 with both particles free) ends, and lets the walkers
//! move independently afterwards. Its success probability `P_k` satisfies
//!
//! ```text
//! P_k = P_{k-1} - C_k / (2 (S+1)^2)
//! C_1(i, j) = sum_{n < S} K_{ij}(n)
//! C_k(i, j) = 1/2 sum_{n < S} K_{ij}(n) (C_{k-1}(n, n+2) + C_{k-1}(n-1, n+1))
//! ```
//!
//! where `K_{ij}(n)` is the probability that independent walkers from
//! `(i, j)` first meet at `(n, n+1)`. `P_k` decreases to the exact dual
//! absorption probability `P_inf`, and `C_k` is dominated by
//! `gamma_k = ((S-1)/S)^k`, the chance that a reflected walk on `[0, S]`
//! from 1 visits 0 at least `k` times before reaching `S`.

use rand::Rng;
use serde::Serialize;

use crate::dual::{pair_absorption_exact, SolveMethod};
use crate::error::{Error, Result};
use crate::estimator::{run_replicas, run_scalar, Estimate};
use crate::lattice::ModelParams;
use crate::rng::RngStream;

/// Default ladder depth.
pub const DEFAULT_K_MAX: usize = 40;
/// Deeper rungs are skipped once `gamma_k` falls below this.
pub const GAMMA_CUTOFF: f64 = 1e-12;

/// Success probability of two independent walkers from `x` and `y`.
pub fn p0_independent(params: &ModelParams, x: usize, y: usize) -> f64 {
    let d = (params.size() + 1) as f64;
    (x as f64 / d) * (y as f64 / d)
}

/// `((S-1)/S)^k`.
pub fn gamma_closed_form(size: usize, k: usize) -> f64 {
    let s = size as f64;
    ((s - 1.0) / s).powi(k as i32)
}

/// First-meeting distribution of two independent walkers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeetingKernel {
    pub start: (usize, usize),
    /// `mass[n - 1]`: first meeting at `(n, n+1)`, `n = 1..=S`.
    pub mass: Vec<f64>,
    /// The lower walker reaches 0 before any meeting.
    pub no_meet_mass: f64,
}

impl MeetingKernel {
    pub fn mass_at(&self, n: usize) -> f64 {
        self.mass[n - 1]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.no_meet_mass
    }

    /// Probability of a meeting with both walkers still free.
    pub fn c1(&self) -> f64 {
        self.mass[..self.mass.len() - 1].iter().sum()
    }
}

/// First-meeting distributions from every start `(a, b)`, `1 <= a`,
/// `a + 2 <= b <= S + 1`, solved jointly.
///
/// A walker reaching `S+1` parks there; the other keeps moving, and reaching
/// `S` next to it counts as the meeting `n = S`. The lower walker reaching 0
/// first is a non-meeting. Walkers at distance at least 2 cannot cross
/// without first passing distance 1.
#[derive(Debug, Clone)]
pub struct MeetingTable {
    size: usize,
    row_start: Vec<usize>,
    // per state, S meeting masses followed by the no-meet mass
    values: Vec<f64>,
    sweeps: usize,
}

impl MeetingTable {
    pub fn solve(params: &ModelParams, tol: f64) -> Result<Self> {
        let size = params.size();
        if size < 3 {
            return Err(Error::validation("meeting kernels need S >= 3"));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::validation("tolerance must be positive"));
        }
        let width = size + 1;
        let mut row_start = Vec::with_capacity(size + 1);
        let mut acc = 0;
        for a in 1..size {
            row_start.push(acc);
            acc += size - a; // b in a+2..=S+1
        }
        row_start.push(acc);
        let mut table = Self {
            size,
            row_start,
            values: vec![0.0; acc * width],
            sweeps: 0,
        };

        let relaxation = match SolveMethod::over_relaxed(size) {
            SolveMethod::GaussSeidel { relaxation } => relaxation,
            SolveMethod::Dense => unreachable!(),
        };
        let mut target = vec![0.0; width];
        let max_sweeps = 200 * (size + 1) * (size + 1) + 10_000;
        let mut max_update = f64::INFINITY;
        for sweep in 1..=max_sweeps {
            max_update = 0.0;
            for gap in 2..=size {
                for a in 1..=size + 1 - gap {
                    let b = a + gap;
                    target.iter_mut().for_each(|v| *v = 0.0);
                    let moves = table.accumulate_moves(a, b, &mut target);
                    let base = table.state(a, b).expect("interior state") * width;
                    for (i, t) in target.iter().enumerate() {
                        let delta = relaxation * (t / moves - table.values[base + i]);
                        table.values[base + i] += delta;
                        max_update = max_update.max(delta.abs());
                    }
                }
            }
            if max_update < tol {
                table.sweeps = sweep;
                return Ok(table);
            }
        }
        Err(Error::NonConvergence {
            iterations: max_sweeps,
            residual: max_update,
        })
    }

    fn state(&self, a: usize, b: usize) -> Option<usize> {
        (a >= 1 && b >= a + 2 && b <= self.size + 1).then(|| self.row_start[a - 1] + (b - a - 2))
    }

    /// Adds the value of every successor of `(a, b)` into `out`; returns the
    /// number of moves.
    fn accumulate_moves(&self, a: usize, b: usize, out: &mut [f64]) -> f64 {
        let s = self.size;
        let parked = b == s + 1;
        let add = |u: usize, w: usize, out: &mut [f64]| {
            if u == 0 {
                out[s] += 1.0;
            } else if w == u + 1 {
                out[u - 1] += 1.0;
            } else {
                let base = self.state(u, w).expect("successor inside the grid") * (s + 1);
                for (o, v) in out.iter_mut().zip(&self.values[base..base + s + 1]) {
                    *o += v;
                }
            }
        };
        add(a - 1, b, out);
        add(a + 1, b, out);
        if parked {
            2.0
        } else {
            add(a, b - 1, out);
            add(a, b + 1, out);
            4.0
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Kernel from `(x, y)`; `y` may be `S+1` (upper walker already parked).
    pub fn kernel(&self, x: usize, y: usize) -> Result<MeetingKernel> {
        let idx = self.state(x, y).ok_or_else(|| {
            Error::validation(format!(
                "start ({x}, {y}) needs 1 <= x, y - x >= 2, y <= {}",
                self.size + 1
            ))
        })?;
        let base = idx * (self.size + 1);
        let slice = &self.values[base..base + self.size + 1];
        Ok(MeetingKernel {
            start: (x, y),
            mass: slice[..self.size].to_vec(),
            no_meet_mass: slice[self.size],
        })
    }
}

/// First-meeting kernel for interior starts `1 <= x`, `x + 2 <= y <= S`.
pub fn first_meeting_kernel(
    params: &ModelParams,
    x: usize,
    y: usize,
    tol: f64,
) -> Result<MeetingKernel> {
    check_start(params, x, y)?;
    MeetingTable::solve(params, tol)?.kernel(x, y)
}

fn check_start(params: &ModelParams, x: usize, y: usize) -> Result<()> {
    if x == 0 || y > params.size() || y < x + 2 {
        return Err(Error::validation(format!(
            "start ({x}, {y}) needs 1 <= x, y - x >= 2 and y <= S = {}",
            params.size()
        )));
    }
    Ok(())
}

/// One row of the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderRow {
    pub k: usize,
    #[serde(rename = "C_k")]
    pub c: f64,
    #[serde(rename = "gamma_k")]
    pub gamma: f64,
    #[serde(rename = "P_k")]
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct LadderSummary {
    pub P0: f64,
    pub P_inf: f64,
    pub bound: f64,
    pub slack: f64,
}

#[derive(Debug, Clone)]
pub struct LadderTable {
    size: usize,
    start: (usize, usize),
    /// `c[k - 1] = C_k(x0, y0)`.
    c: Vec<f64>,
    /// `c_gap2[k - 1][m - 1] = C_k(m, m+2)`, `m = 1..=S-2`.
    c_gap2: Vec<Vec<f64>>,
    /// `p[k] = P_k` from the recurrence, `k = 0..=K`.
    p: Vec<f64>,
    /// `P_k` from the total-probability decomposition over the first meeting.
    p_direct: Vec<f64>,
    p_inf: f64,
}

impl LadderTable {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    /// Number of rungs computed (`k_max` after early stopping).
    pub fn depth(&self) -> usize {
        self.c.len()
    }

    /// `C_k(x0, y0)`, `k >= 1`.
    pub fn c(&self, k: usize) -> f64 {
        self.c[k - 1]
    }

    /// `C_k(m, m + 2)`.
    pub fn c_gap2(&self, k: usize, m: usize) -> f64 {
        self.c_gap2[k - 1][m - 1]
    }

    pub fn c_gap2_rows(&self) -> &[Vec<f64>] {
        &self.c_gap2
    }

    /// `P_k`, `k >= 0`.
    pub fn p(&self, k: usize) -> f64 {
        self.p[k]
    }

    pub fn p_direct(&self, k: usize) -> f64 {
        self.p_direct[k]
    }

    pub fn p0(&self) -> f64 {
        self.p[0]
    }

    pub fn p_inf(&self) -> f64 {
        self.p_inf
    }

    pub fn gamma(&self, k: usize) -> f64 {
        gamma_closed_form(self.size, k)
    }

    pub fn alpha(&self) -> f64 {
        self.start.0 as f64 / (self.size + 1) as f64
    }

    pub fn beta(&self) -> f64 {
        self.start.1 as f64 / (self.size + 1) as f64
    }

    /// `1/(2(S+1)^2)`, the weight of one rung.
    pub fn rung_weight(&self) -> f64 {
        let d = (self.size + 1) as f64;
        1.0 / (2.0 * d * d)
    }

    /// `(S-1)/(2(S+1)^2) = 1/(2(S+1)) - 1/(S+1)^2`.
    pub fn bound(&self) -> f64 {
        (self.size as f64 - 1.0) * self.rung_weight()
    }

    /// Geometric bound on `P_k - P_inf`: `gamma_{k+1} S / (2(S+1)^2)`.
    pub fn tail_bound(&self, k: usize) -> f64 {
        self.gamma(k + 1) * self.size as f64 * self.rung_weight()
    }

    pub fn rows(&self) -> Vec<LadderRow> {
        (1..=self.depth())
            .map(|k| LadderRow {
                k,
                c: self.c(k),
                gamma: self.gamma(k),
                p: self.p(k),
            })
            .collect()
    }

    pub fn summary(&self) -> LadderSummary {
        let gap = self.p0() - self.p_inf;
        LadderSummary {
            P0: self.p0(),
            P_inf: self.p_inf,
            bound: self.bound(),
            slack: self.bound() - gap,
        }
    }
}

/// Builds the ladder from `(x0, y0)` to depth `k_max`, stopping early once
/// `gamma_k < GAMMA_CUTOFF`.
pub fn ladder_tables(
    params: &ModelParams,
    x0: usize,
    y0: usize,
    k_max: usize,
    tol: f64,
) -> Result<LadderTable> {
    check_start(params, x0, y0)?;
    if k_max == 0 {
        return Err(Error::validation("k_max must be at least 1"));
    }
    let size = params.size();
    let meetings = MeetingTable::solve(params, tol)?;
    let user = meetings.kernel(x0, y0)?;
    let gap2: Vec<MeetingKernel> = (1..=size - 2)
        .map(|m| meetings.kernel(m, m + 2))
        .collect::<Result<_>>()?;

    let depth = (1..=k_max)
        .find(|&k| gamma_closed_form(size, k) < GAMMA_CUTOFF)
        .unwrap_or(k_max);

    // C(m, m+2) from the previous rung, zero off the interior
    let lookup = |row: &[f64], m: usize| {
        if m >= 1 && m + 2 <= size {
            row[m - 1]
        } else {
            0.0
        }
    };
    let step_c = |kernel: &MeetingKernel, prev: &[f64]| -> f64 {
        0.5 * (1..size)
            .map(|n| kernel.mass_at(n) * (lookup(prev, n) + lookup(prev, n - 1)))
            .sum::<f64>()
    };

    let mut c = vec![user.c1()];
    let mut c_gap2 = vec![gap2.iter().map(MeetingKernel::c1).collect::<Vec<_>>()];
    for _ in 2..=depth {
        let prev = c_gap2.last().expect("previous rung");
        c.push(step_c(&user, prev));
        let next = gap2.iter().map(|k| step_c(k, prev)).collect();
        c_gap2.push(next);
    }

    let d = (size + 1) as f64;
    let weight = 1.0 / (2.0 * d * d);
    let mut p = vec![p0_independent(params, x0, y0)];
    for &ck in &c {
        p.push(p.last().expect("P_0") - ck * weight);
    }

    // P_k(m, m+2) with P(0, .) = 0 and P(S-1, S+1) = (S-1)/(S+1) for every k
    let p_lookup = |row: &[f64], m: usize| {
        if m == 0 {
            0.0
        } else if m + 2 == size + 1 {
            m as f64 / d
        } else {
            row[m - 1]
        }
    };
    let step_p = |kernel: &MeetingKernel, prev: &[f64]| -> f64 {
        let exits: f64 = (1..size)
            .map(|n| kernel.mass_at(n) * 0.5 * (p_lookup(prev, n) + p_lookup(prev, n - 1)))
            .sum();
        exits + kernel.mass_at(size) * size as f64 / d
    };
    let mut p_gap2: Vec<f64> = (1..=size - 2)
        .map(|m| p0_independent(params, m, m + 2))
        .collect();
    let mut p_direct = vec![p0_independent(params, x0, y0)];
    for _ in 1..=depth {
        p_direct.push(step_p(&user, &p_gap2));
        p_gap2 = gap2.iter().map(|k| step_p(k, &p_gap2)).collect();
    }

    let p_inf = pair_absorption_exact(params, SolveMethod::auto(size), tol)?.get(x0, y0);

    Ok(LadderTable {
        size,
        start: (x0, y0),
        c,
        c_gap2,
        p,
        p_direct,
        p_inf,
    })
}

/// Outcome of one independent walker: reaches `S+1` before 0.
fn walker_survives<R: Rng + ?Sized>(size: usize, mut pos: usize, rng: &mut R) -> bool {
    while pos != 0 && pos != size + 1 {
        if rng.random::<bool>() {
            pos += 1;
        } else {
            pos -= 1;
        }
    }
    pos == size + 1
}

/// One trajectory of `eta^(k)`; true when both particles reach `S+1`.
pub fn eta_k_trajectory<R: Rng + ?Sized>(
    size: usize,
    x0: usize,
    y0: usize,
    k: usize,
    rng: &mut R,
) -> bool {
    let (mut a, mut b) = (x0, y0);
    let mut meetings = 0;
    loop {
        let adjacent = b == a + 1;
        let episode_over = meetings == k && !adjacent;
        if episode_over || b == size + 1 {
            // independent from here on; a parked upper particle is a success
            let upper = b == size + 1 || walker_survives(size, b, rng);
            return upper && walker_survives(size, a, rng);
        }
        if adjacent {
            // the exchange of the pair is an identity move
            if rng.random::<bool>() {
                a -= 1;
            } else {
                b += 1;
            }
        } else {
            match rng.random_range(0..4u8) {
                0 => a -= 1,
                1 => a += 1,
                2 => b -= 1,
                _ => b += 1,
            }
            if b == a + 1 && b <= size {
                meetings += 1;
            }
        }
        if a == 0 {
            return false;
        }
    }
}

/// Monte Carlo of `P_k`.
pub fn simulate_eta_k(
    params: &ModelParams,
    x0: usize,
    y0: usize,
    k: usize,
    n_replicas: u64,
    stream: RngStream,
) -> Result<Estimate> {
    check_start(params, x0, y0)?;
    if n_replicas == 0 {
        return Err(Error::validation("replica count must be positive"));
    }
    let size = params.size();
    Ok(run_scalar(n_replicas, stream, |rng| {
        if eta_k_trajectory(size, x0, y0, k, rng) {
            1.0
        } else {
            0.0
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxWalkResult {
    pub size: usize,
    /// `gamma[k - 1] = ((S-1)/S)^k`.
    pub gamma: Vec<f64>,
    /// Empirical probability of at least `k` visits to 0.
    pub gamma_mc: Vec<Estimate>,
}

/// Visits to 0 before reaching `size`, capped at `k_max`, for the walk on
/// `[0, size]` from 1 that steps back to 1 after every visit to 0.
pub fn aux_walk_visits<R: Rng + ?Sized>(size: usize, k_max: usize, rng: &mut R) -> usize {
    let mut pos = 1;
    let mut visits = 0;
    loop {
        if rng.random::<bool>() {
            pos += 1;
        } else {
            pos -= 1;
        }
        if pos == 0 {
            visits += 1;
            if visits >= k_max {
                return visits;
            }
            pos = 1;
        } else if pos == size {
            return visits;
        }
    }
}

pub fn simulate_aux_walk(
    size: usize,
    k_max: usize,
    n_replicas: u64,
    stream: RngStream,
) -> Result<AuxWalkResult> {
    if size < 2 {
        return Err(Error::validation("auxiliary walk needs S >= 2"));
    }
    if k_max == 0 || n_replicas == 0 {
        return Err(Error::validation(
            "k_max and replica count must be positive",
        ));
    }
    let accs = run_replicas(n_replicas, stream, k_max, |rng, out| {
        let visits = aux_walk_visits(size, k_max, rng);
        out[..visits].iter_mut().for_each(|v| *v = 1.0);
    });
    Ok(AuxWalkResult {
        size,
        gamma: (1..=k_max).map(|k| gamma_closed_form(size, k)).collect(),
        gamma_mc: accs.iter().map(|a| a.estimate()).collect(),
    })
}

//! Closed hierarchy of correlation-function equations.
//!
//! For an ordered set `X` with `p` clusters,
//!
//! ```text
//! d/dt m_k(X) = lambda * sum over clusters (m_k(X with left end - 1) + m_k(X with right end + 1)) - 2 p lambda m_k(X)
//! ```
//!
//! with `m_k(X) = 0` when a point reaches 0 and `m_k(X) = m_{k-1}(X \ {S+1})`
//! when the last point reaches `S+1`. Level `k` only reads level `k - 1`,
//! so the hierarchy is solved bottom-up from `m_0 = 1`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lattice::{cluster_decompose, Configuration, ModelParams};

/// Cap on the number of `k`-subsets of one level.
pub const MAX_SUBSETS: usize = 5_000_000;

/// One neighbour reference in a row of the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    /// Another set of the same level.
    Slot(usize),
    /// A shifted point reached `S+1`: the set without it, one level down.
    Source(usize),
    /// A shifted point reached 0.
    Sink,
}

#[derive(Debug, Clone)]
struct Row {
    terms: Vec<Term>,
    clusters: usize,
}

/// Lexicographic enumeration of the `k`-subsets of `1..=S`.
#[derive(Debug, Clone)]
pub struct SubsetIndex {
    subsets: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl SubsetIndex {
    fn new(size: usize, k: usize) -> Result<Self> {
        let count = binomial(size, k);
        if count > MAX_SUBSETS as u128 {
            return Err(Error::Resource(format!(
                "level k = {k} on S = {size} has {count} sets, cap is {MAX_SUBSETS}"
            )));
        }
        let mut subsets = Vec::with_capacity(count as usize);
        let mut current: Vec<usize> = (1..=k).collect();
        loop {
            subsets.push(current.clone());
            // advance to the next combination in lexicographic order
            let Some(i) = (0..k).rev().find(|&i| current[i] < size - (k - 1 - i)) else {
                break;
            };
            current[i] += 1;
            for j in i + 1..k {
                current[j] = current[j - 1] + 1;
            }
        }
        let lookup = subsets
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Self { subsets, lookup })
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn get(&self, slot: usize) -> &[usize] {
        &self.subsets[slot]
    }

    pub fn position(&self, points: &[usize]) -> Option<usize> {
        self.lookup.get(points).copied()
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Level `k` of the hierarchy.
#[derive(Debug, Clone)]
pub struct MomentSystem {
    size: usize,
    rate: f64,
    k: usize,
    index: SubsetIndex,
    rows: Vec<Row>,
}

pub fn build_moment_system(params: &ModelParams, k: usize) -> Result<MomentSystem> {
    let size = params.size();
    if k == 0 || k > size {
        return Err(Error::validation(format!(
            "level k must lie in 1..={size}, got {k}"
        )));
    }
    let index = SubsetIndex::new(size, k)?;
    let lower = if k > 1 {
        Some(SubsetIndex::new(size, k - 1)?)
    } else {
        None
    };
    let lower_slot = |points: &[usize]| -> usize {
        match &lower {
            Some(idx) => idx.position(points).expect("lower set is enumerated"),
            None => 0,
        }
    };
    let mut rows = Vec::with_capacity(index.len());
    for points in &index.subsets {
        let decomposition = cluster_decompose(points)?;
        let mut terms = Vec::with_capacity(2 * decomposition.len());
        let mut shifted = points.clone();
        for (c, (first, last)) in decomposition.endpoints().enumerate() {
            let first_pos = points
                .iter()
                .position(|&x| x == first)
                .expect("endpoint in set");
            let last_pos = points
                .iter()
                .position(|&x| x == last)
                .expect("endpoint in set");
            if first == 1 {
                debug_assert_eq!(c, 0);
                terms.push(Term::Sink);
            } else {
                shifted[first_pos] = first - 1;
                terms.push(Term::Slot(
                    index.position(&shifted).expect("shifted set is ordered"),
                ));
                shifted[first_pos] = first;
            }
            if last == size {
                terms.push(Term::Source(lower_slot(&points[..k - 1])));
            } else {
                shifted[last_pos] = last + 1;
                terms.push(Term::Slot(
                    index.position(&shifted).expect("shifted set is ordered"),
                ));
                shifted[last_pos] = last;
            }
        }
        rows.push(Row {
            terms,
            clusters: decomposition.len(),
        });
    }
    Ok(MomentSystem {
        size,
        rate: params.rate(),
        k,
        index,
        rows,
    })
}

impl MomentSystem {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn index(&self) -> &SubsetIndex {
        &self.index
    }

    /// Neighbour references of a row.
    pub fn terms(&self, slot: usize) -> &[Term] {
        &self.rows[slot].terms
    }

    /// Diagonal coefficient `-2 p lambda`.
    pub fn diagonal(&self, slot: usize) -> f64 {
        -2.0 * self.rows[slot].clusters as f64 * self.rate
    }

    pub fn clusters(&self, slot: usize) -> usize {
        self.rows[slot].clusters
    }

    #[inline]
    fn neighbour_sum(&self, slot: usize, values: &[f64], lower: &[f64]) -> f64 {
        self.rows[slot]
            .terms
            .iter()
            .map(|t| match *t {
                Term::Slot(j) => values[j],
                Term::Source(j) => lower[j],
                Term::Sink => 0.0,
            })
            .sum()
    }

    /// Time derivative of `values` given the level below (`[1.0]` for `k = 1`).
    pub fn derivative(&self, values: &[f64], lower: &[f64], out: &mut [f64]) {
        for (slot, o) in out.iter_mut().enumerate() {
            *o = self.rate * self.neighbour_sum(slot, values, lower)
                + self.diagonal(slot) * values[slot];
        }
    }

    /// `m_k(X) = prod_{x in X} config(x)` for a deterministic configuration.
    pub fn field_from_configuration(&self, config: &Configuration) -> Result<MomentField> {
        if config.size() != self.size {
            return Err(Error::validation(
                "configuration size does not match the system",
            ));
        }
        let values = self
            .index
            .subsets
            .iter()
            .map(|s| {
                if s.iter().all(|&x| config.occupied(x)) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Ok(MomentField {
            k: self.k,
            values,
            time: 0.0,
        })
    }

    /// Value of `field` on an interior set.
    pub fn value(&self, field: &MomentField, points: &[usize]) -> Option<f64> {
        self.index.position(points).map(|i| field.values[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    pub k: usize,
    pub values: Vec<f64>,
    pub time: f64,
}

/// The constant level `m_0 = 1`.
fn level_zero() -> MomentField {
    MomentField {
        k: 0,
        values: vec![1.0],
        time: 0.0,
    }
}

/// Gauss-Seidel solve of the stationary level-`k` equations given the
/// stationary level `k - 1` (ignored for `k = 1`).
pub fn stationary_moments(
    system: &MomentSystem,
    lower: Option<&MomentField>,
    tol: f64,
) -> Result<MomentField> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::validation("tolerance must be positive"));
    }
    let zero = level_zero();
    let lower = match (system.k, lower) {
        (1, _) => &zero,
        (k, Some(l)) if l.k + 1 == k => l,
        (k, _) => {
            return Err(Error::validation(format!(
                "level {k} needs the stationary level {}",
                k - 1
            )))
        }
    };
    let n = system.len();
    let mut values = vec![0.0; n];
    let max_sweeps = 200 * (system.size + 1) * (system.size + 1) + 10_000;
    let mut max_update = f64::INFINITY;
    for _ in 0..max_sweeps {
        max_update = 0.0;
        for slot in 0..n {
            let next = system.neighbour_sum(slot, &values, &lower.values)
                / (2 * system.rows[slot].clusters) as f64;
            max_update = max_update.max((next - values[slot]).abs());
            values[slot] = next;
        }
        if max_update < tol {
            return Ok(MomentField {
                k: system.k,
                values,
                time: f64::INFINITY,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_sweeps,
        residual: max_update,
    })
}

/// Levels `1..=k_max` of the hierarchy.
#[derive(Debug, Clone)]
pub struct MomentHierarchy {
    levels: Vec<MomentSystem>,
}

impl MomentHierarchy {
    pub fn new(params: &ModelParams, k_max: usize) -> Result<Self> {
        let levels = (1..=k_max)
            .map(|k| build_moment_system(params, k))
            .collect::<Result<_>>()?;
        Ok(Self { levels })
    }

    pub fn level(&self, k: usize) -> &MomentSystem {
        &self.levels[k - 1]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn fields_from_configuration(&self, config: &Configuration) -> Result<Vec<MomentField>> {
        self.levels
            .iter()
            .map(|l| l.field_from_configuration(config))
            .collect()
    }

    /// Stationary fields, bottom-up.
    pub fn stationary(&self, tol: f64) -> Result<Vec<MomentField>> {
        let mut fields: Vec<MomentField> = Vec::with_capacity(self.depth());
        for level in &self.levels {
            let field = stationary_moments(level, fields.last(), tol)?;
            fields.push(field);
        }
        Ok(fields)
    }
}

/// Explicit Euler co-integration of all levels to time `t`.
///
/// The step is `min(dt_max, 1 / (2 max_k 2 p lambda))`, shortened at the end
/// to land on `t`. Every update is then a convex combination, so values stay
/// in `[0, 1]`; leaving that range beyond `1e-9` is reported as instability.
pub fn integrate_moments(
    hierarchy: &MomentHierarchy,
    initial: &[MomentField],
    t: f64,
    dt_max: f64,
) -> Result<Vec<MomentField>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::validation("time must be finite and nonnegative"));
    }
    if dt_max.is_nan() || dt_max <= 0.0 {
        return Err(Error::validation("dt_max must be positive"));
    }
    if initial.len() != hierarchy.depth()
        || initial
            .iter()
            .zip(&hierarchy.levels)
            .any(|(f, l)| f.values.len() != l.len() || f.k != l.k)
    {
        return Err(Error::validation(
            "initial fields do not match the hierarchy",
        ));
    }
    let max_diag = hierarchy
        .levels
        .iter()
        .flat_map(|l| (0..l.len()).map(move |i| -l.diagonal(i)))
        .fold(0.0, f64::max);
    let h_max = dt_max.min(1.0 / (2.0 * max_diag));
    let start = initial.first().map_or(0.0, |f| f.time);
    let mut fields: Vec<Vec<f64>> = initial.iter().map(|f| f.values.clone()).collect();
    let mut rates: Vec<Vec<f64>> = fields.iter().map(|v| vec![0.0; v.len()]).collect();
    let zero = [1.0];
    let mut now = 0.0;
    while now < t {
        let h = h_max.min(t - now);
        for (k, level) in hierarchy.levels.iter().enumerate() {
            let lower: &[f64] = if k == 0 { &zero } else { &fields[k - 1] };
            level.derivative(&fields[k], lower, &mut rates[k]);
        }
        for (values, rate) in fields.iter_mut().zip(&rates) {
            for (v, r) in values.iter_mut().zip(rate) {
                *v += h * r;
                if !(-1e-9..=1.0 + 1e-9).contains(v) {
                    return Err(Error::Numeric(format!(
                        "moment left [0, 1] at t = {}: {v}",
                        start + now
                    )));
                }
            }
        }
        now += h;
    }
    Ok(fields
        .into_iter()
        .zip(&hierarchy.levels)
        .map(|(values, l)| MomentField {
            k: l.k,
            values,
            time: start + t,
        })
        .collect())
}

//! Lattice primitives: model parameters, bonds, configurations, point sets
//! and their cluster decomposition.
//!
//! Sites are numbered `0..=S+1`. Site `0` is an empty reservoir and site
//! `S+1` a full one; both are pinned for the whole evolution. The `S+1`
//! bonds `(s, s+1)`, `s = 0..=S`, each fire at rate `lambda`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size, bond rate and seed of one model instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    size: usize,
    rate: f64,
    seed: u64,
}

impl ModelParams {
    pub fn new(size: usize, rate: f64, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::validation("size must be at least 1"));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::validation(format!(
                "rate must be positive, got {rate}"
            )));
        }
        Ok(Self { size, rate, seed })
    }

    /// Unit rate, seed 0.
    pub fn with_size(size: usize) -> Result<Self> {
        Self::new(size, 1.0, 0)
    }

    /// Number of interior sites `S`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the right reservoir, `S+1`.
    pub fn right_boundary(&self) -> usize {
        self.size + 1
    }

    pub fn is_interior(&self, site: usize) -> bool {
        (1..=self.size).contains(&site)
    }

    pub fn bonds(&self) -> impl Iterator<Item = Bond> {
        (0..=self.size).map(Bond::new)
    }
}

/// The bond joining `left` and `left + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub left: usize,
}

impl Bond {
    pub const fn new(left: usize) -> Self {
        Self { left }
    }

    pub const fn right(&self) -> usize {
        self.left + 1
    }
}

/// Occupation of sites `0..=S+1` with the reservoirs pinned to 0 and 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    sites: Vec<bool>,
}

impl Configuration {
    /// Builds a configuration from the interior occupations of sites `1..=S`.
    pub fn from_interior(interior: &[bool]) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::validation(
                "configuration needs at least one interior site",
            ));
        }
        let mut sites = Vec::with_capacity(interior.len() + 2);
        sites.push(false);
        sites.extend_from_slice(interior);
        sites.push(true);
        Ok(Self { sites })
    }

    /// Parses an interior pattern such as `"0110"` (site 1 first).
    pub fn parse_interior(pattern: &str) -> Result<Self> {
        let interior = pattern
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::validation(format!(
                    "occupation pattern may only contain 0 and 1, found {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_interior(&interior)
    }

    /// Interior bitmask with site 1 as the least significant bit.
    pub fn from_mask(size: usize, mask: u64) -> Result<Self> {
        if size == 0 || size > 64 {
            return Err(Error::validation(format!(
                "bitmask form needs 1 <= S <= 64, got {size}"
            )));
        }
        let interior: Vec<bool> = (0..size).map(|i| mask >> i & 1 == 1).collect();
        Self::from_interior(&interior)
    }

    pub fn empty(size: usize) -> Result<Self> {
        Self::from_interior(&vec![false; size])
    }

    /// Interior site `i` occupied iff `i > S/2`.
    pub fn right_half_filled(size: usize) -> Result<Self> {
        let interior: Vec<bool> = (1..=size).map(|i| 2 * i > size).collect();
        Self::from_interior(&interior)
    }

    /// Interior site `i` occupied iff `i <= S/2`.
    pub fn left_half_filled(size: usize) -> Result<Self> {
        let interior: Vec<bool> = (1..=size).map(|i| 2 * i <= size).collect();
        Self::from_interior(&interior)
    }

    pub fn size(&self) -> usize {
        self.sites.len() - 2
    }

    /// Occupation of any site in `0..=S+1`.
    ///
    /// # Panics
    /// If `site > S+1`.
    #[inline]
    pub fn occupied(&self, site: usize) -> bool {
        self.sites[site]
    }

    pub fn interior(&self) -> &[bool] {
        &self.sites[1..self.sites.len() - 1]
    }

    pub fn interior_particles(&self) -> usize {
        self.interior().iter().filter(|&&b| b).count()
    }

    /// Interior bitmask, site 1 least significant; `None` for `S > 64`.
    pub fn mask(&self) -> Option<u64> {
        (self.size() <= 64).then(|| {
            self.interior()
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i))
        })
    }

    /// Product of the occupations over `points`; sites beyond `S+1` are an error.
    pub fn product_over(&self, points: &PointSet) -> Result<bool> {
        if let Some(&last) = points.as_slice().last() {
            if last > self.size() + 1 {
                return Err(Error::validation(format!(
                    "site {last} outside 0..={}",
                    self.size() + 1
                )));
            }
        }
        Ok(points.iter().all(|x| self.sites[x]))
    }

    /// Fires `bond` in place.
    ///
    /// Interior bonds exchange their endpoint values. Bond `(0,1)` empties
    /// site 1 and bond `(S,S+1)` fills site `S`; the reservoirs never change.
    #[inline]
    pub fn swap_in_place(&mut self, bond: Bond) {
        let s = self.size();
        debug_assert!(bond.left <= s);
        if bond.left == 0 {
            self.sites[1] = false;
        } else if bond.left == s {
            self.sites[s] = true;
        } else {
            self.sites.swap(bond.left, bond.left + 1);
        }
    }

    /// A bond changes the configuration iff its endpoint values differ.
    #[inline]
    pub fn is_enabled(&self, bond: Bond) -> bool {
        self.sites[bond.left] != self.sites[bond.left + 1]
    }

    pub fn enabled_count(&self) -> usize {
        self.sites.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// The `index`-th enabled bond in left-to-right order.
    pub fn nth_enabled(&self, index: usize) -> Option<Bond> {
        self.sites
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .nth(index)
            .map(|(left, _)| Bond::new(left))
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({self})")
    }
}

impl fmt::Display for Configuration {
    /// Interior pattern, site 1 first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in self.interior() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Returns `config` with `bond` fired.
pub fn apply_swap(config: &Configuration, bond: Bond) -> Result<Configuration> {
    if bond.left > config.size() {
        return Err(Error::validation(format!(
            "bond ({}, {}) outside 0..={}",
            bond.left,
            bond.right(),
            config.size() + 1
        )));
    }
    let mut next = config.clone();
    next.swap_in_place(bond);
    Ok(next)
}

/// Bonds whose firing changes `config`.
pub fn enabled_bonds(config: &Configuration) -> Vec<Bond> {
    (0..=config.size())
        .map(Bond::new)
        .filter(|&b| config.is_enabled(b))
        .collect()
}

/// A strictly increasing list of sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PointSet(Vec<usize>);

impl PointSet {
    pub fn new(points: Vec<usize>) -> Result<Self> {
        if let Some(w) = points.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::validation(format!(
                "points must be strictly increasing, found {} before {}",
                w[0], w[1]
            )));
        }
        Ok(Self(points))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn singleton(x: usize) -> Self {
        Self(vec![x])
    }

    pub fn pair(x: usize, y: usize) -> Result<Self> {
        Self::new(vec![x, y])
    }

    /// Parses `"3,7"`.
    pub fn parse(text: &str) -> Result<Self> {
        let points = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::validation(format!("not a site index: {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// Checks every point is an interior site of a size-`size` lattice.
    pub fn require_interior(&self, size: usize) -> Result<()> {
        match self.0.iter().find(|&&x| x == 0 || x > size) {
            Some(x) => Err(Error::validation(format!(
                "site {x} is not interior (1..={size})"
            ))),
            None => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for PointSet {
    type Error = Error;

    fn try_from(points: Vec<usize>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<PointSet> for Vec<usize> {
    fn from(points: PointSet) -> Self {
        points.0
    }
}

impl fmt::Display for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Maximal runs of consecutive points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterDecomposition {
    clusters: Vec<Vec<usize>>,
}

impl ClusterDecomposition {
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// `(first, last)` point of every cluster.
    pub fn endpoints(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.clusters.iter().map(|c| (c[0], c[c.len() - 1]))
    }

    pub fn flatten(&self) -> Vec<usize> {
        self.clusters.concat()
    }
}

/// Splits a strictly increasing list of sites into maximal step-1 runs.
pub fn cluster_decompose(points: &[usize]) -> Result<ClusterDecomposition> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, &x) in points.iter().enumerate() {
        match i.checked_sub(1).map(|j| points[j]) {
            Some(prev) if x <= prev => {
                return Err(Error::validation(format!(
                    "points must be strictly increasing, found {prev} before {x}"
                )))
            }
            Some(prev) if x == prev + 1 => clusters.last_mut().expect("open cluster").push(x),
            _ => clusters.push(vec![x]),
        }
    }
    Ok(ClusterDecomposition { clusters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(p: &str) -> Configuration {
        Configuration::parse_interior(p).unwrap()
    }

    #[test]
    fn clusters_of_examples() {
        let d = cluster_decompose(&[1, 2, 4, 5, 6, 9]).unwrap();
        assert_eq!(d.clusters(), &[vec![1, 2], vec![4, 5, 6], vec![9]]);
        assert_eq!(cluster_decompose(&[3]).unwrap().clusters(), &[vec![3]]);
        assert_eq!(
            cluster_decompose(&[1, 2, 3]).unwrap().clusters(),
            &[vec![1, 2, 3]]
        );
        assert!(cluster_decompose(&[]).unwrap().is_empty());
    }

    #[test]
    fn clusters_reject_unsorted() {
        assert!(matches!(
            cluster_decompose(&[2, 2]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            cluster_decompose(&[3, 1]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn swap_examples() {
        let c = cfg("0110");
        assert_eq!(apply_swap(&c, Bond::new(1)).unwrap(), cfg("1010"));
        assert_eq!(apply_swap(&cfg("1110"), Bond::new(0)).unwrap(), cfg("0110"));
        assert_eq!(apply_swap(&c, Bond::new(4)).unwrap(), cfg("0111"));
        assert!(matches!(
            apply_swap(&c, Bond::new(5)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn reservoirs_stay_pinned() {
        let mut c = cfg("1");
        c.swap_in_place(Bond::new(0));
        assert!(!c.occupied(0) && c.occupied(2));
        c.swap_in_place(Bond::new(1));
        assert!(!c.occupied(0) && c.occupied(1) && c.occupied(2));
    }

    #[test]
    fn enabled_examples() {
        assert_eq!(enabled_bonds(&cfg("1111")), vec![Bond::new(0)]);
        assert_eq!(enabled_bonds(&cfg("0000")), vec![Bond::new(4)]);
        // "01" is 0|01|1 with the reservoirs: only the middle bond differs
        assert_eq!(enabled_bonds(&cfg("01")), vec![Bond::new(1)]);
        assert_eq!(
            enabled_bonds(&cfg("10")),
            vec![Bond::new(0), Bond::new(1), Bond::new(2)]
        );
        assert_eq!(cfg("10").enabled_count(), 3);
        assert_eq!(cfg("10").nth_enabled(2), Some(Bond::new(2)));
    }

    #[test]
    fn mask_roundtrip_and_convention() {
        let c = cfg("1000");
        assert_eq!(c.mask(), Some(1));
        assert_eq!(Configuration::from_mask(4, 0b1010).unwrap(), cfg("0101"));
    }

    #[test]
    fn point_set_validation() {
        assert!(PointSet::parse("3,7").is_ok());
        assert!(PointSet::parse("7,3").is_err());
        assert!(PointSet::parse("a").is_err());
        assert!(PointSet::pair(1, 4).unwrap().require_interior(3).is_err());
        assert!(PointSet::singleton(0).require_interior(3).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0, 1.0, 0).is_err());
        assert!(ModelParams::new(3, 0.0, 0).is_err());
        assert!(ModelParams::new(3, f64::NAN, 0).is_err());
        assert_eq!(ModelParams::with_size(3).unwrap().bonds().count(), 4);
    }

    fn interior_strategy() -> impl Strategy<Value = Vec<bool>> {
        prop::collection::vec(any::<bool>(), 1..24)
    }

    proptest! {
        #[test]
        fn particle_count_changes_only_at_reservoirs(interior in interior_strategy(), pick in any::<prop::sample::Index>()) {
            let c = Configuration::from_interior(&interior).unwrap();
            let s = c.size();
            let bond = Bond::new(pick.index(s + 1));
            let next = apply_swap(&c, bond).unwrap();
            let before = c.interior_particles() as i64;
            let after = next.interior_particles() as i64;
            prop_assert!(!next.occupied(0) && next.occupied(s + 1));
            if bond.left == 0 {
                prop_assert!(after == before || after == before - 1);
            } else if bond.left == s {
                prop_assert!(after == before || after == before + 1);
            } else {
                prop_assert_eq!(after, before);
                prop_assert_eq!(apply_swap(&next, bond).unwrap(), c.clone());
            }
        }

        #[test]
        fn disabled_bonds_are_noops(interior in interior_strategy()) {
            let c = Configuration::from_interior(&interior).unwrap();
            let enabled = enabled_bonds(&c);
            for bond in (0..=c.size()).map(Bond::new) {
                let next = apply_swap(&c, bond).unwrap();
                prop_assert_eq!(next != c, enabled.contains(&bond));
            }
            prop_assert!(!enabled.is_empty());
        }

        #[test]
        fn decomposition_flattens_back(set in prop::collection::btree_set(1usize..40, 0..15)) {
            let points: Vec<usize> = set.into_iter().collect();
            let d = cluster_decompose(&points).unwrap();
            prop_assert_eq!(d.flatten(), points);
            for pair in d.clusters().windows(2) {
                prop_assert!(pair[1][0] >= pair[0][pair[0].len() - 1] + 2);
            }
            for c in d.clusters() {
                prop_assert!(c.windows(2).all(|w| w[1] == w[0] + 1));
            }
        }
    }
}

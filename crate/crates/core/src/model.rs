//! Locations, trajectories, and trajectory databases.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Index of a location inside a [`LocationUniverse`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocationId(pub u32);

impl LocationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for LocationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Ordered set of opaque location tokens. Ids are assigned in insertion order,
/// so interning the same token stream twice yields the same ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocationUniverse {
    tokens: Vec<String>,
    index: BTreeMap<String, LocationId>,
}

impl LocationUniverse {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a universe from distinct tokens. Returns the first duplicate on failure.
    pub fn from_tokens<I, S>(tokens: I) -> core::result::Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut universe = Self::new();
        for token in tokens {
            let token = token.into();
            if universe.get(&token).is_some() {
                return Err(token);
            }
            universe.intern(&token);
        }
        Ok(universe)
    }

    /// Universe of `n` synthetic tokens `L1 ... Ln`.
    pub fn numbered(n: usize) -> Self {
        let mut universe = Self::new();
        for i in 1..=n {
            universe.intern(&format!("L{i}"));
        }
        universe
    }

    pub fn intern(&mut self, token: &str) -> LocationId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = LocationId(self.tokens.len() as u32);
        self.tokens.push(String::from(token));
        self.index.insert(String::from(token), id);
        id
    }

    pub fn get(&self, token: &str) -> Option<LocationId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: LocationId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, id: LocationId) -> bool {
        id.index() < self.tokens.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = LocationId> + '_ {
        (0..self.tokens.len() as u32).map(LocationId)
    }
}

/// A non-empty ordered list of locations. Repeats, including consecutive
/// repeats, are allowed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Trajectory(Vec<LocationId>);

impl Trajectory {
    pub fn new(locations: Vec<LocationId>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        Ok(Trajectory(locations))
    }

    pub fn locations(&self) -> &[LocationId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<LocationId> {
        self.0
    }
}

impl AsRef<[LocationId]> for Trajectory {
    fn as_ref(&self) -> &[LocationId] {
        &self.0
    }
}

/// `s ⪯ t`: `s` is no longer than `t` and agrees with it position by position.
pub fn is_prefix(s: &[LocationId], t: &[LocationId]) -> bool {
    s.len() <= t.len() && s.iter().zip(t).all(|(a, b)| a == b)
}

/// Interns a sequence of `(location, timestamp)` pairs as composite
/// `location@timestamp` tokens. Timestamps must already be discretized and
/// non-decreasing.
pub fn encode_timestamped(
    universe: &mut LocationUniverse,
    pairs: &[(&str, u64)],
) -> Result<Trajectory> {
    if let Some(position) = pairs.windows(2).position(|w| w[1].1 < w[0].1) {
        return Err(Error::DecreasingTimestamp {
            position: position + 1,
        });
    }
    let ids = pairs
        .iter()
        .map(|(loc, t)| universe.intern(&format!("{loc}@{t}")))
        .collect();
    Trajectory::new(ids)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Run {
    start: usize,
    len: u32,
    count: u64,
}

/// A multiset of trajectories, stored as an ordered list of runs
/// (trajectory, multiplicity) over one flat location buffer.
///
/// Raw data is pushed one record at a time; releases push each node prefix
/// once with its multiplicity, which keeps large noisy releases compact.
/// Iteration order is insertion order, with every run expanded in place.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrajectoryDb {
    locations: Vec<LocationId>,
    runs: Vec<Run>,
    total: u64,
}

impl TrajectoryDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_trajectories<I: IntoIterator<Item = Trajectory>>(trajectories: I) -> Self {
        let mut db = Self::new();
        for t in trajectories {
            db.push(&t);
        }
        db
    }

    pub fn push(&mut self, trajectory: &Trajectory) {
        self.push_n(trajectory.locations(), 1);
    }

    /// Appends `count` copies of `locations`. Zero counts are dropped.
    ///
    /// Panics if `locations` is empty.
    pub fn push_n(&mut self, locations: &[LocationId], count: u64) {
        assert!(!locations.is_empty(), "empty trajectory");
        if count == 0 {
            return;
        }
        let start = self.locations.len();
        self.locations.extend_from_slice(locations);
        self.runs.push(Run {
            start,
            len: locations.len() as u32,
            count,
        });
        self.total += count;
    }

    /// Number of records |D|, counting multiplicity.
    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    pub fn run(&self, i: usize) -> (&[LocationId], u64) {
        let r = self.runs[i];
        (&self.locations[r.start..r.start + r.len as usize], r.count)
    }

    /// Runs as `(trajectory, multiplicity)` in insertion order.
    pub fn runs(&self) -> impl Iterator<Item = (&[LocationId], u64)> + '_ {
        self.runs
            .iter()
            .map(move |r| (&self.locations[r.start..r.start + r.len as usize], r.count))
    }

    /// Every record, with duplicates repeated.
    pub fn iter(&self) -> impl Iterator<Item = &[LocationId]> + '_ {
        self.runs()
            .flat_map(|(t, n)| core::iter::repeat_n(t, n as usize))
    }

    pub fn max_len(&self) -> usize {
        self.runs.iter().map(|r| r.len as usize).max().unwrap_or(0)
    }

    /// One past the largest location id used, or 0 for an empty database.
    pub fn location_bound(&self) -> usize {
        self.locations.iter().map(|l| l.index() + 1).max().unwrap_or(0)
    }

    /// Checks every location id against `universe`.
    pub fn validate(&self, universe: &LocationUniverse) -> Result<()> {
        match self.locations.iter().find(|l| !universe.contains(**l)) {
            Some(l) => Err(Error::UnknownLocation(l.0)),
            None => Ok(()),
        }
    }

    /// Multiset view: distinct trajectories with their total multiplicity.
    pub fn multiset(&self) -> BTreeMap<Vec<LocationId>, u64> {
        let mut out = BTreeMap::new();
        for (t, n) in self.runs() {
            *out.entry(t.to_vec()).or_insert(0) += n;
        }
        out
    }
}

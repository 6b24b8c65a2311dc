//! Utility of a sanitized database: count-query relative error and top-k
//! frequent sequential patterns.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::dp::RandomSource;
use crate::model::{LocationId, TrajectoryDb};
use crate::{Error, Result};

/// Fraction of |D| used as the default sanity bound.
pub const DEFAULT_SANITY_FRACTION: f64 = 0.001;

/// A set of locations; matches every trajectory that visits all of them, in
/// any order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountQuery {
    locations: Vec<LocationId>,
}

impl CountQuery {
    pub fn new<I: IntoIterator<Item = LocationId>>(locations: I) -> Result<Self> {
        let mut locations: Vec<LocationId> = locations.into_iter().collect();
        locations.sort_unstable();
        locations.dedup();
        if locations.is_empty() {
            return Err(Error::EmptyQuery);
        }
        Ok(CountQuery { locations })
    }

    pub fn locations(&self) -> &[LocationId] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Number of records whose location set contains every query location.
pub fn eval_count_query(db: &TrajectoryDb, query: &CountQuery) -> u64 {
    db.runs()
        .filter(|(t, _)| query.locations.iter().all(|q| t.contains(q)))
        .map(|(_, n)| n)
        .sum()
}

/// `|noisy − true| / max(true, sanity)`.
pub fn relative_error(true_count: u64, noisy_count: u64, sanity: f64) -> f64 {
    let diff = true_count.abs_diff(noisy_count) as f64;
    diff / (true_count as f64).max(sanity)
}

/// `fraction · |D|`.
pub fn sanity_bound(db_len: u64, fraction: f64) -> f64 {
    fraction * db_len as f64
}

/// Inverted index over distinct location sets, for answering many count
/// queries against one database.
#[derive(Debug, Clone)]
pub struct CountIndex {
    sets: Vec<Vec<LocationId>>,
    weights: Vec<u64>,
    postings: Vec<Vec<u32>>,
    total: u64,
}

impl CountIndex {
    pub fn new(db: &TrajectoryDb) -> Self {
        let mut distinct: BTreeMap<Vec<LocationId>, u64> = BTreeMap::new();
        for (t, n) in db.runs() {
            let mut set = t.to_vec();
            set.sort_unstable();
            set.dedup();
            *distinct.entry(set).or_insert(0) += n;
        }
        let mut postings: Vec<Vec<u32>> = vec![Vec::new(); db.location_bound()];
        let mut sets = Vec::with_capacity(distinct.len());
        let mut weights = Vec::with_capacity(distinct.len());
        for (i, (set, w)) in distinct.into_iter().enumerate() {
            for loc in &set {
                postings[loc.index()].push(i as u32);
            }
            sets.push(set);
            weights.push(w);
        }
        CountIndex {
            sets,
            weights,
            postings,
            total: db.len(),
        }
    }

    /// |D| of the indexed database.
    pub fn db_len(&self) -> u64 {
        self.total
    }

    pub fn count(&self, query: &CountQuery) -> u64 {
        let posting = |l: &LocationId| self.postings.get(l.index()).map_or(&[][..], Vec::as_slice);
        let Some(shortest) = query.locations.iter().min_by_key(|l| posting(l).len()) else {
            return 0;
        };
        posting(shortest)
            .iter()
            .filter(|&&s| {
                let set = &self.sets[s as usize];
                query.locations.iter().all(|q| set.binary_search(q).is_ok())
            })
            .map(|&s| self.weights[s as usize])
            .sum()
    }
}

/// Queries of one workload subset; lengths are uniform in `[1, max_len]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySubset {
    pub max_len: usize,
    pub queries: Vec<CountQuery>,
}

/// Four subsets of random count queries; subset `i` (1-based) draws
/// lengths uniformly from `[1, ⌊i·h/4⌋]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryWorkload {
    pub subsets: Vec<QuerySubset>,
    pub seed: u64,
}

impl QueryWorkload {
    pub fn len(&self) -> usize {
        self.subsets.iter().map(|s| s.queries.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn generate_workload(
    universe_size: usize,
    height: u32,
    per_subset: usize,
    seed: u64,
) -> Result<QueryWorkload> {
    if per_subset == 0 {
        return Err(Error::param("queries per subset", "must be at least 1"));
    }
    if universe_size == 0 {
        return Err(Error::param("universe", "must not be empty"));
    }
    let mut rng = RandomSource::new(seed).named("count-query-workload");
    let mut subsets = Vec::with_capacity(4);
    for i in 1..=4usize {
        let max_len = i * height as usize / 4;
        if max_len < 1 {
            return Err(Error::param("height", "subset length bound i·h/4 is below 1"));
        }
        // A query is a set, so it cannot be longer than the universe.
        let draw_max = max_len.min(universe_size);
        let queries = (0..per_subset)
            .map(|_| {
                let len = rng.random_range(1..=draw_max);
                let picks = rand::seq::index::sample(&mut rng, universe_size, len);
                CountQuery::new(picks.into_iter().map(|l| LocationId(l as u32)))
                    .expect("len ≥ 1")
            })
            .collect();
        subsets.push(QuerySubset { max_len, queries });
    }
    Ok(QueryWorkload { subsets, seed })
}

/// Average relative error of one workload subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetError {
    /// 1-based subset number.
    pub subset: usize,
    pub max_len: usize,
    pub queries: usize,
    pub avg_relative_error: f64,
}

/// Runs every query on both databases and averages the relative errors per
/// subset.
pub fn evaluate_workload(
    raw: &CountIndex,
    sanitized: &CountIndex,
    workload: &QueryWorkload,
    sanity: f64,
) -> Vec<SubsetError> {
    workload
        .subsets
        .iter()
        .enumerate()
        .map(|(i, subset)| {
            let errors = query_errors(raw, sanitized, &subset.queries, sanity);
            let avg = if errors.is_empty() {
                0.0
            } else {
                errors.iter().sum::<f64>() / errors.len() as f64
            };
            SubsetError {
                subset: i + 1,
                max_len: subset.max_len,
                queries: subset.queries.len(),
                avg_relative_error: avg,
            }
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn query_errors(raw: &CountIndex, sanitized: &CountIndex, queries: &[CountQuery], sanity: f64) -> Vec<f64> {
    use rayon::prelude::*;
    queries
        .par_iter()
        .with_min_len(64)
        .map(|q| relative_error(raw.count(q), sanitized.count(q), sanity))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn query_errors(raw: &CountIndex, sanitized: &CountIndex, queries: &[CountQuery], sanity: f64) -> Vec<f64> {
    queries
        .iter()
        .map(|q| relative_error(raw.count(q), sanitized.count(q), sanity))
        .collect()
}

/// A sequential pattern and the number of records containing it as a
/// (not necessarily contiguous) subsequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeqPattern {
    pub locations: Vec<LocationId>,
    pub support: u64,
}

/// `pattern` occurs in `t` in order, gaps allowed.
pub fn contains_subsequence(t: &[LocationId], pattern: &[LocationId]) -> bool {
    let mut rest = t.iter();
    pattern.iter().all(|p| rest.any(|x| x == p))
}

pub fn pattern_support(db: &TrajectoryDb, pattern: &[LocationId]) -> u64 {
    db.runs()
        .filter(|(t, _)| contains_subsequence(t, pattern))
        .map(|(_, n)| n)
        .sum()
}

/// Result of [`mine_top_k`]. `short` is set when fewer than `k` patterns
/// with support ≥ 1 exist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopK {
    pub k: usize,
    pub patterns: Vec<SeqPattern>,
    pub short: bool,
}

/// Ranking: higher support, then shorter, then lexicographically smaller.
fn rank(a_support: u64, a: &[LocationId], b_support: u64, b: &[LocationId]) -> Ordering {
    b_support
        .cmp(&a_support)
        .then(a.len().cmp(&b.len()))
        .then_with(|| a.cmp(b))
}

struct Candidate {
    support: u64,
    pattern: Vec<LocationId>,
    /// Index of the expanded parent whose projection this extends.
    parent: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // max-heap: the best-ranked candidate is the greatest
    fn cmp(&self, other: &Self) -> Ordering {
        rank(other.support, &other.pattern, self.support, &self.pattern)
    }
}

/// Distinct sequences with multiplicities, flattened.
struct SeqStore {
    data: Vec<LocationId>,
    spans: Vec<(u32, u32)>,
    weights: Vec<u64>,
}

impl SeqStore {
    fn new(db: &TrajectoryDb) -> Self {
        let mut store = SeqStore {
            data: Vec::new(),
            spans: Vec::new(),
            weights: Vec::new(),
        };
        for (t, w) in db.multiset() {
            store.spans.push((store.data.len() as u32, t.len() as u32));
            store.data.extend_from_slice(&t);
            store.weights.push(w);
        }
        store
    }

    fn seq(&self, i: u32) -> &[LocationId] {
        let (start, len) = self.spans[i as usize];
        &self.data[start as usize..(start + len) as usize]
    }
}

/// (sequence, position just after the earliest match of the pattern)
type Projection = Vec<(u32, u32)>;

/// The `k` highest-support sequential patterns, PrefixSpan style.
///
/// Patterns are grown by projected-database recursion in best-first order.
/// A pattern's support never exceeds its prefix's support and the prefix is
/// shorter, so patterns leave the queue in exactly the ranking order
/// (support, then length, then location ids).
pub fn mine_top_k(db: &TrajectoryDb, k: usize, max_len: Option<usize>) -> Result<TopK> {
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    let max_len = max_len.unwrap_or(usize::MAX);
    if max_len == 0 {
        return Err(Error::param("max pattern length", "must be at least 1"));
    }
    let store = SeqStore::new(db);
    let bound = db.location_bound();
    let mut stamp = vec![0u32; bound];
    let mut tally = vec![0u64; bound];
    let mut epoch = 0u32;

    let mut projections: Vec<Projection> = vec![(0..store.spans.len() as u32).map(|s| (s, 0)).collect()];
    let mut heap = BinaryHeap::new();
    let mut out = Vec::with_capacity(k);

    let mut push_extensions = |parent: usize, pattern: &[LocationId], proj: &Projection, heap: &mut BinaryHeap<Candidate>| {
        let mut seen = Vec::new();
        for &(s, pos) in proj {
            epoch += 1;
            let w = store.weights[s as usize];
            for loc in &store.seq(s)[pos as usize..] {
                let i = loc.index();
                if stamp[i] != epoch {
                    stamp[i] = epoch;
                    if tally[i] == 0 {
                        seen.push(*loc);
                    }
                    tally[i] += w;
                }
            }
        }
        for loc in seen {
            let mut next = Vec::with_capacity(pattern.len() + 1);
            next.extend_from_slice(pattern);
            next.push(loc);
            heap.push(Candidate {
                support: tally[loc.index()],
                pattern: next,
                parent,
            });
            tally[loc.index()] = 0;
        }
    };

    let root = projections[0].clone();
    push_extensions(0, &[], &root, &mut heap);

    while out.len() < k {
        let Some(cand) = heap.pop() else { break };
        if cand.pattern.len() < max_len {
            let last = *cand.pattern.last().expect("non-empty pattern");
            let proj: Projection = projections[cand.parent]
                .iter()
                .filter_map(|&(s, pos)| {
                    store.seq(s)[pos as usize..]
                        .iter()
                        .position(|x| *x == last)
                        .map(|p| (s, pos + p as u32 + 1))
                })
                .collect();
            let id = projections.len();
            push_extensions(id, &cand.pattern, &proj, &mut heap);
            projections.push(proj);
        }
        out.push(SeqPattern {
            locations: cand.pattern,
            support: cand.support,
        });
    }

    Ok(TopK {
        k,
        short: out.len() < k,
        patterns: out,
    })
}

/// Overlap between the top-k sets of the raw and sanitized databases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FspMetrics {
    pub k: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_drops: usize,
}

/// Patterns are compared by location sequence only; supports are ignored.
pub fn fsp_metrics(truth: &[SeqPattern], sanitized: &[SeqPattern], k: usize) -> FspMetrics {
    let truth_set: BTreeSet<&[LocationId]> = truth.iter().map(|p| p.locations.as_slice()).collect();
    let san_set: BTreeSet<&[LocationId]> = sanitized.iter().map(|p| p.locations.as_slice()).collect();
    let tp = truth_set.intersection(&san_set).count();
    FspMetrics {
        k,
        true_positives: tp,
        false_positives: san_set.len() - tp,
        false_drops: truth_set.len() - tp,
    }
}

/// Count-query errors per subset and FSP overlap per k, for one release.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UtilityReport {
    pub count_queries: Vec<SubsetError>,
    pub patterns: Vec<FspMetrics>,
}

impl UtilityReport {
    /// Mean of the per-subset averages.
    pub fn mean_relative_error(&self) -> f64 {
        if self.count_queries.is_empty() {
            return 0.0;
        }
        self.count_queries.iter().map(|s| s.avg_relative_error).sum::<f64>() / self.count_queries.len() as f64
    }
}

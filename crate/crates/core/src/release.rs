//! Turning a (possibly inferred) noisy tree back into a trajectory database,
//! and the end-to-end sanitization pipeline.

use alloc::collections::{BTreeMap, BTreeSet};

use crate::dp::{PrivacyParams, RandomSource};
use crate::inference::infer;
use crate::model::TrajectoryDb;
use crate::tree::{NodeId, NoisyPrefixTree, TreeBuilder};

/// Which node counts drive the release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    /// Raw noisy counts c(v).
    Basic,
    /// Consistent estimates c̄(v) after constrained inference.
    #[default]
    Full,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::Full => "full",
        }
    }
}

impl core::str::FromStr for Variant {
    type Err = alloc::string::String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "basic" => Ok(Variant::Basic),
            "full" => Ok(Variant::Full),
            other => Err(alloc::format!("unknown variant `{other}` (expected basic or full)")),
        }
    }
}

fn count_of(tree: &NoisyPrefixTree, id: NodeId, variant: Variant) -> f64 {
    let node = tree.node(id);
    match variant {
        Variant::Basic => node.noisy_count,
        Variant::Full => node.consistent,
    }
}

/// Number of trajectories that end exactly at `id`:
/// `max(0, round(x(v) − Σ x(children)))`, rounding half to even.
pub fn terminating_count(tree: &NoisyPrefixTree, id: NodeId, variant: Variant) -> u64 {
    let kids: f64 = tree
        .node(id)
        .children()
        .map(|c| count_of(tree, c, variant))
        .sum();
    let n = libm::rint(count_of(tree, id, variant) - kids);
    if n > 0.0 {
        n as u64
    } else {
        0
    }
}

/// Walks the tree once in postorder and emits, for every non-root node, its
/// terminating count of copies of the node's prefix. `Variant::Full` expects
/// [`infer`] to have run.
pub fn generate_release(tree: &NoisyPrefixTree, variant: Variant) -> TrajectoryDb {
    let mut db = TrajectoryDb::new();
    for id in tree.postorder() {
        if id == NodeId::ROOT {
            continue;
        }
        let n = terminating_count(tree, id, variant);
        if n > 0 {
            let prefix = tree.node_prefix(id).expect("non-root");
            db.push_n(prefix.locations(), n);
        }
    }
    db
}

/// Record count, length histogram, and number of distinct locations used.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReleaseStats {
    pub records: u64,
    pub lengths: BTreeMap<usize, u64>,
    pub distinct_locations: usize,
}

pub fn release_stats(db: &TrajectoryDb) -> ReleaseStats {
    let mut lengths = BTreeMap::new();
    let mut locations = BTreeSet::new();
    for (t, n) in db.runs() {
        *lengths.entry(t.len()).or_insert(0) += n;
        locations.extend(t.iter().copied());
    }
    ReleaseStats {
        records: db.len(),
        lengths,
        distinct_locations: locations.len(),
    }
}

/// Tree plus both releases, built from one draw of randomness.
#[derive(Debug, Clone)]
pub struct Sanitized {
    pub tree: NoisyPrefixTree,
}

impl Sanitized {
    pub fn release(&self, variant: Variant) -> TrajectoryDb {
        generate_release(&self.tree, variant)
    }
}

/// Builds the noisy tree with `builder` and runs constrained inference on
/// it. Basic and Full releases then share the same tree.
pub fn sanitize_with(
    builder: &TreeBuilder,
    db: &TrajectoryDb,
    universe_size: usize,
    source: &RandomSource,
) -> Sanitized {
    let mut tree = builder.build(db, universe_size, source);
    infer(&mut tree);
    Sanitized { tree }
}

/// The default private pipeline: noisy tree, inference, release.
pub fn sanitize(
    db: &TrajectoryDb,
    universe_size: usize,
    params: &PrivacyParams,
    variant: Variant,
    source: &RandomSource,
) -> TrajectoryDb {
    sanitize_with(&TreeBuilder::new(*params), db, universe_size, source).release(variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{sample_db, traj};
    use crate::model::Trajectory;
    use crate::tree::{build_exact_tree, EmptyCandidates, NoiseMode};
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn leaf_rounds_down() {
        let mut db = TrajectoryDb::new();
        db.push(&Trajectory::new(traj(&[1])).unwrap());
        let mut tree = build_exact_tree(&db);
        tree.nodes_mut()[1].noisy_count = 3.4;
        let out = generate_release(&tree, Variant::Basic);
        assert_eq!(out.len(), 3);
        tree.nodes_mut()[1].noisy_count = 2.5;
        assert_eq!(generate_release(&tree, Variant::Basic).len(), 2);
        tree.nodes_mut()[1].noisy_count = 3.5;
        assert_eq!(generate_release(&tree, Variant::Basic).len(), 4);
        tree.nodes_mut()[1].noisy_count = -2.0;
        assert!(generate_release(&tree, Variant::Basic).is_empty());
    }

    #[test]
    fn node_keeps_remainder() {
        let mut db = TrajectoryDb::new();
        db.push(&Trajectory::new(traj(&[1, 2])).unwrap());
        db.push(&Trajectory::new(traj(&[1, 3])).unwrap());
        let mut tree = build_exact_tree(&db);
        let n = tree.nodes_mut();
        n[1].noisy_count = 10.0;
        n[2].noisy_count = 3.0;
        n[3].noisy_count = 4.0;
        assert_eq!(terminating_count(&tree, NodeId(1), Variant::Basic), 3);
        let out = generate_release(&tree, Variant::Basic);
        let ms = out.multiset();
        assert_eq!(ms[&traj(&[1])], 3);
        assert_eq!(ms[&traj(&[1, 2])], 3);
        assert_eq!(ms[&traj(&[1, 3])], 4);
    }

    #[test]
    fn zero_noise_release_is_identity() {
        let (db, _) = sample_db();
        for h in [4, 6] {
            let params = PrivacyParams::new(1.0, h).unwrap().with_threshold(0.0).unwrap();
            let builder = TreeBuilder::new(params)
                .noise(NoiseMode::Zero)
                .empty_candidates(EmptyCandidates::Skipped);
            let s = sanitize_with(&builder, &db, 4, &RandomSource::new(0));
            for variant in [Variant::Basic, Variant::Full] {
                assert_eq!(s.release(variant).multiset(), db.multiset());
            }
        }
    }

    #[test]
    fn short_height_truncates() {
        let (db, _) = sample_db();
        let params = PrivacyParams::new(1.0, 2).unwrap().with_threshold(0.0).unwrap();
        let builder = TreeBuilder::new(params)
            .noise(NoiseMode::Zero)
            .empty_candidates(EmptyCandidates::Skipped);
        let out = sanitize_with(&builder, &db, 4, &RandomSource::new(0)).release(Variant::Full);
        let mut expected = TrajectoryDb::new();
        for t in db.iter() {
            expected.push_n(&t[..t.len().min(2)], 1);
        }
        assert_eq!(out.multiset(), expected.multiset());
    }

    #[test]
    fn conservation_and_bounds() {
        let (db, _) = sample_db();
        let params = PrivacyParams::new(2.0, 3).unwrap();
        for seed in 0..100 {
            let s = sanitize_with(&TreeBuilder::new(params), &db, 4, &RandomSource::new(seed));
            for variant in [Variant::Basic, Variant::Full] {
                let out = s.release(variant);
                let expected: u64 = s
                    .tree
                    .ids()
                    .skip(1)
                    .map(|id| terminating_count(&s.tree, id, variant))
                    .sum();
                assert_eq!(out.len(), expected);
                assert!(out.max_len() <= 3);
            }
        }
    }

    #[test]
    fn variants_share_the_tree() {
        let (db, _) = sample_db();
        let params = PrivacyParams::new(2.0, 3).unwrap();
        let src = RandomSource::new(17);
        let a = sanitize(&db, 4, &params, Variant::Basic, &src);
        let b = sanitize_with(&TreeBuilder::new(params), &db, 4, &src).release(Variant::Basic);
        assert_eq!(a, b);
    }

    #[test]
    fn stats_of_sample() {
        let (db, _) = sample_db();
        let stats = release_stats(&db);
        assert_eq!(stats.records, 8);
        assert_eq!(stats.lengths.iter().map(|(k, v)| (*k, *v)).collect::<Vec<_>>(), vec![(2, 3), (3, 4), (4, 1)]);
        assert_eq!(stats.lengths.values().sum::<u64>(), stats.records);
        assert_eq!(stats.distinct_locations, 4);
        assert_eq!(release_stats(&TrajectoryDb::new()), ReleaseStats::default());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("basic".parse::<Variant>(), Ok(Variant::Basic));
        assert_eq!("full".parse::<Variant>(), Ok(Variant::Full));
        assert!("fancy".parse::<Variant>().is_err());
    }
}

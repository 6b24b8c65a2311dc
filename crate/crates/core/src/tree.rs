//! Exact and differentially private prefix trees.
//!
//! Nodes live in one arena in breadth-first order: every level is appended
//! after the previous one, and the children of a node are contiguous. The
//! root is node 0 at depth 0.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use rand::Rng;

use crate::dp::{
    laplace_noisy_count, sample_pass_count, sample_passing_noisy_count, BudgetLedger, LaplaceNoise,
    PrivacyParams, RandomSource, ZeroNoise,
};
use crate::model::{LocationId, LocationUniverse, Trajectory, TrajectoryDb};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// `None` only on the root.
    pub location: Option<LocationId>,
    pub depth: u32,
    pub parent: Option<NodeId>,
    first_child: u32,
    child_count: u32,
    /// |tr(v)|. Construction-time bookkeeping; never written out.
    pub true_count: u64,
    /// c(v)
    pub noisy_count: f64,
    /// c̃(v), set by [`crate::inference::consolidate`].
    pub consolidated: f64,
    /// c̄(v), set by [`crate::inference::consistent_estimates`].
    pub consistent: f64,
    /// Created by the empty-candidate sampler rather than from real data.
    pub empty_born: bool,
}

impl TreeNode {
    pub fn children(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (self.first_child..self.first_child + self.child_count).map(NodeId)
    }

    pub fn child_count(&self) -> usize {
        self.child_count as usize
    }

    pub fn is_leaf(&self) -> bool {
        self.child_count == 0
    }

    fn child_range(&self) -> Range<usize> {
        self.first_child as usize..(self.first_child + self.child_count) as usize
    }
}

#[derive(Debug, Clone)]
pub struct NoisyPrefixTree {
    nodes: Vec<TreeNode>,
    universe_size: usize,
    params: Option<PrivacyParams>,
    ledger: Option<BudgetLedger>,
}

impl NoisyPrefixTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [TreeNode] {
        &mut self.nodes
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the tree holds nothing but the root.
    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn children(&self, id: NodeId) -> &[TreeNode] {
        &self.nodes[self.node(id).child_range()]
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    /// `None` for noise-free trees from [`build_exact_tree`].
    pub fn params(&self) -> Option<&PrivacyParams> {
        self.params.as_ref()
    }

    pub fn ledger(&self) -> Option<&BudgetLedger> {
        self.ledger.as_ref()
    }

    pub fn height(&self) -> u32 {
        self.nodes.last().map_or(0, |n| n.depth)
    }

    /// Child of `id` labelled `location`, if any.
    pub fn child(&self, id: NodeId, location: LocationId) -> Option<NodeId> {
        self.node(id)
            .children()
            .find(|c| self.node(*c).location == Some(location))
    }

    /// Follows `path` from the root.
    pub fn find(&self, path: &[LocationId]) -> Option<NodeId> {
        path.iter()
            .try_fold(NodeId::ROOT, |at, loc| self.child(at, *loc))
    }

    /// The prefix spelled by the root-to-`id` path.
    pub fn node_prefix(&self, id: NodeId) -> Result<Trajectory> {
        if id == NodeId::ROOT {
            return Err(Error::RootHasNoPrefix);
        }
        let mut path = Vec::with_capacity(self.node(id).depth as usize);
        let mut at = id;
        while let Some(loc) = self.node(at).location {
            path.push(loc);
            at = self.node(at).parent.expect("non-root node has a parent");
        }
        path.reverse();
        Trajectory::new(path)
    }

    /// Node ids in postorder (children before parents, siblings in order);
    /// the root comes last.
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = alloc::vec![(NodeId::ROOT, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(id);
                continue;
            }
            stack.push((id, true));
            stack.extend(self.node(id).children().rev().map(|c| (c, false)));
        }
        out
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids().skip(1).filter(|id| self.node(*id).is_leaf())
    }

    pub fn stats(&self) -> TreeStats {
        TreeStats {
            nodes: self.nodes.len() - 1,
            leaves: self.leaves().count(),
            empty_born: self.nodes.iter().filter(|n| n.empty_born).count(),
            height: self.height(),
        }
    }

    /// Text outline, one non-root node per line in preorder: two spaces of
    /// indent per level below the first, the location token, a tab, and the
    /// noisy count to two decimals.
    pub fn write_outline<W: fmt::Write>(&self, universe: &LocationUniverse, out: &mut W) -> fmt::Result {
        let mut stack: Vec<NodeId> = self.node(NodeId::ROOT).children().rev().collect();
        while let Some(id) = stack.pop() {
            let node = self.node(id);
            let loc = node.location.expect("non-root");
            for _ in 1..node.depth {
                out.write_str("  ")?;
            }
            match universe.token(loc) {
                Some(tok) => out.write_str(tok)?,
                None => write!(out, "{loc}")?,
            }
            writeln!(out, "\t{:.2}", node.noisy_count)?;
            stack.extend(node.children().rev());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeStats {
    /// Non-root nodes.
    pub nodes: usize,
    pub leaves: usize,
    pub empty_born: usize,
    pub height: u32,
}

/// How candidate counts are perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Laplace,
    /// Noise-free counts; not private. For reference runs and tests.
    Zero,
}

/// Whether the never-observed children of a node are considered at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyCandidates {
    /// Binomial pass count plus uniform choice of locations (private).
    #[default]
    Sampled,
    /// Only children with real trajectories are candidates. Not private.
    Skipped,
}

/// Configuration of the level-wise noisy tree construction.
#[derive(Debug, Clone, Copy)]
pub struct TreeBuilder {
    params: PrivacyParams,
    noise: NoiseMode,
    empty: EmptyCandidates,
    expand_empty: bool,
}

impl TreeBuilder {
    pub fn new(params: PrivacyParams) -> Self {
        TreeBuilder {
            params,
            noise: NoiseMode::Laplace,
            empty: EmptyCandidates::Sampled,
            expand_empty: false,
        }
    }

    pub fn noise(mut self, noise: NoiseMode) -> Self {
        self.noise = noise;
        self
    }

    pub fn empty_candidates(mut self, empty: EmptyCandidates) -> Self {
        self.empty = empty;
        self
    }

    /// Also grow children under nodes created by the empty-candidate sampler.
    /// Each such node draws about `|L|·p_θ` children of its own, so this is
    /// only practical for small universes.
    pub fn expand_empty(mut self, expand: bool) -> Self {
        self.expand_empty = expand;
        self
    }

    pub fn params(&self) -> &PrivacyParams {
        &self.params
    }

    /// Builds the noisy prefix tree of `db` over a universe of
    /// `universe_size` locations. Every location id in `db` must be below
    /// `universe_size`.
    pub fn build(&self, db: &TrajectoryDb, universe_size: usize, source: &RandomSource) -> NoisyPrefixTree {
        assert!(
            db.location_bound() <= universe_size,
            "database uses locations outside the universe"
        );
        let ctx = Expander {
            db,
            builder: self,
            universe_size,
            source,
        };
        let mut ledger = BudgetLedger::new(&self.params);
        let mut tree = grow(db, universe_size, self.params.height(), &ctx, |level, width| {
            ledger.charge_level(level, width)
        });
        tree.params = Some(self.params);
        tree.ledger = Some(ledger);
        tree
    }
}

/// Algorithm-default noisy tree: Laplace noise, sampled empty candidates,
/// empty-born nodes left as leaves.
pub fn build_noisy_tree(
    db: &TrajectoryDb,
    universe_size: usize,
    params: &PrivacyParams,
    source: &RandomSource,
) -> NoisyPrefixTree {
    TreeBuilder::new(*params).build(db, universe_size, source)
}

/// The exact prefix tree: one node per distinct prefix, `c(v) = |tr(v)|`.
pub fn build_exact_tree(db: &TrajectoryDb) -> NoisyPrefixTree {
    let universe_size = db.location_bound();
    let height = db.max_len() as u32;
    grow(db, universe_size, height, &ExactExpander { db }, |_, _| {})
}

/// Member of a frontier: a node still to be expanded together with the
/// database runs that share its prefix.
struct Frontier {
    id: NodeId,
    depth: u32,
    key: u64,
    members: Vec<u32>,
}

struct ChildSpec {
    location: LocationId,
    true_count: u64,
    noisy_count: f64,
    empty_born: bool,
    members: Vec<u32>,
}

trait Expand: Sync {
    fn expand(&self, node: &Frontier) -> Vec<ChildSpec>;
    fn keep_expanding(&self, child: &ChildSpec) -> bool;
}

fn grow<E: Expand>(
    db: &TrajectoryDb,
    universe_size: usize,
    height: u32,
    expander: &E,
    mut on_level: impl FnMut(u32, usize),
) -> NoisyPrefixTree {
    let root = TreeNode {
        location: None,
        depth: 0,
        parent: None,
        first_child: 1,
        child_count: 0,
        true_count: db.len(),
        noisy_count: db.len() as f64,
        consolidated: db.len() as f64,
        consistent: db.len() as f64,
        empty_born: false,
    };
    let mut nodes = alloc::vec![root];
    let mut frontier = alloc::vec![Frontier {
        id: NodeId::ROOT,
        depth: 0,
        key: RandomSource::root_key(),
        members: (0..db.run_count() as u32).collect(),
    }];

    for level in 1..=height {
        on_level(level, frontier.len());
        let expansions = expand_all(expander, &frontier);
        let mut next = Vec::new();
        for (parent, children) in frontier.into_iter().zip(expansions) {
            let first = nodes.len() as u32;
            {
                let p = &mut nodes[parent.id.index()];
                p.first_child = first;
                p.child_count = children.len() as u32;
            }
            for (offset, child) in children.into_iter().enumerate() {
                let id = NodeId(first + offset as u32);
                nodes.push(TreeNode {
                    location: Some(child.location),
                    depth: level,
                    parent: Some(parent.id),
                    first_child: 0,
                    child_count: 0,
                    true_count: child.true_count,
                    noisy_count: child.noisy_count,
                    consolidated: child.noisy_count,
                    consistent: child.noisy_count,
                    empty_born: child.empty_born,
                });
                if expander.keep_expanding(&child) {
                    next.push(Frontier {
                        id,
                        depth: level,
                        key: RandomSource::child_key(parent.key, child.location.0),
                        members: child.members,
                    });
                }
            }
        }
        frontier = next;
    }
    // Leaves point past the arena; normalize so `children()` is empty.
    let end = nodes.len() as u32;
    for n in nodes.iter_mut().filter(|n| n.child_count == 0) {
        n.first_child = end;
    }

    NoisyPrefixTree {
        nodes,
        universe_size,
        params: None,
        ledger: None,
    }
}

#[cfg(feature = "parallel")]
fn expand_all<E: Expand>(expander: &E, frontier: &[Frontier]) -> Vec<Vec<ChildSpec>> {
    use rayon::prelude::*;
    frontier
        .par_iter()
        .with_min_len(32)
        .map(|f| expander.expand(f))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn expand_all<E: Expand>(expander: &E, frontier: &[Frontier]) -> Vec<Vec<ChildSpec>> {
    frontier.iter().map(|f| expander.expand(f)).collect()
}

/// Runs of `node`'s members that continue past its depth, grouped by the
/// location at that depth, in location order.
fn group_members(db: &TrajectoryDb, node: &Frontier) -> Vec<(LocationId, u64, Vec<u32>)> {
    let depth = node.depth as usize;
    let mut keyed: Vec<(LocationId, u32)> = node
        .members
        .iter()
        .filter_map(|&r| db.run(r as usize).0.get(depth).map(|loc| (*loc, r)))
        .collect();
    keyed.sort_unstable();
    let mut groups: Vec<(LocationId, u64, Vec<u32>)> = Vec::new();
    for (loc, r) in keyed {
        let weight = db.run(r as usize).1;
        match groups.last_mut() {
            Some(g) if g.0 == loc => {
                g.1 += weight;
                g.2.push(r);
            }
            _ => groups.push((loc, weight, alloc::vec![r])),
        }
    }
    groups
}

struct ExactExpander<'a> {
    db: &'a TrajectoryDb,
}

impl Expand for ExactExpander<'_> {
    fn expand(&self, node: &Frontier) -> Vec<ChildSpec> {
        group_members(self.db, node)
            .into_iter()
            .map(|(location, count, members)| ChildSpec {
                location,
                true_count: count,
                noisy_count: count as f64,
                empty_born: false,
                members,
            })
            .collect()
    }

    fn keep_expanding(&self, _child: &ChildSpec) -> bool {
        true
    }
}

struct Expander<'a> {
    db: &'a TrajectoryDb,
    builder: &'a TreeBuilder,
    universe_size: usize,
    source: &'a RandomSource,
}

impl Expand for Expander<'_> {
    fn expand(&self, node: &Frontier) -> Vec<ChildSpec> {
        let params = &self.builder.params;
        let theta = params.threshold();
        let scale = params.noise_scale();
        let mut rng = self.source.stream(node.key);

        let groups = group_members(self.db, node);
        let occupied: Vec<LocationId> = groups.iter().map(|g| g.0).collect();
        let mut children = Vec::with_capacity(groups.len());

        for (location, count, members) in groups {
            let noisy = match self.builder.noise {
                NoiseMode::Laplace => laplace_noisy_count(count, scale, &mut LaplaceNoise(&mut rng)),
                NoiseMode::Zero => laplace_noisy_count(count, scale, &mut ZeroNoise),
            }
            .expect("scale validated by PrivacyParams");
            if noisy >= theta {
                children.push(ChildSpec {
                    location,
                    true_count: count,
                    noisy_count: noisy,
                    empty_born: false,
                    members,
                });
            }
        }

        if self.builder.empty == EmptyCandidates::Sampled {
            let m = (self.universe_size - occupied.len()) as u64;
            let k = sample_pass_count(m, params, &mut rng);
            let picked = sample_unoccupied(&occupied, m, k, &mut rng);
            for location in picked {
                children.push(ChildSpec {
                    location,
                    true_count: 0,
                    noisy_count: sample_passing_noisy_count(params, &mut rng),
                    empty_born: true,
                    members: Vec::new(),
                });
            }
            children.sort_by_key(|c| c.location);
        }
        children
    }

    fn keep_expanding(&self, child: &ChildSpec) -> bool {
        !child.empty_born || self.builder.expand_empty
    }
}

/// `k` distinct locations drawn uniformly from the `m` locations not in
/// `occupied` (sorted), by a partial Fisher–Yates shuffle over the virtual
/// array of unoccupied locations.
fn sample_unoccupied<R: Rng + ?Sized>(occupied: &[LocationId], m: u64, k: u64, rng: &mut R) -> Vec<LocationId> {
    debug_assert!(k <= m);
    let mut swapped: BTreeMap<u64, u64> = BTreeMap::new();
    let mut out = Vec::with_capacity(k as usize);
    for i in 0..k {
        let j = rng.random_range(i..m);
        let at_j = *swapped.get(&j).unwrap_or(&j);
        let at_i = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, at_i);
        out.push(nth_unoccupied(occupied, at_j));
    }
    out
}

/// The `rank`-th (0-based) location id not contained in sorted `occupied`.
fn nth_unoccupied(occupied: &[LocationId], rank: u64) -> LocationId {
    let mut id = rank as u32;
    for o in occupied {
        if o.0 <= id {
            id += 1;
        } else {
            break;
        }
    }
    LocationId(id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{sample_db, traj};
    use alloc::string::String;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn count_at(tree: &NoisyPrefixTree, path: &[u32]) -> Option<u64> {
        tree.find(&traj(path)).map(|id| tree.node(id).true_count)
    }

    #[test]
    fn exact_tree_of_sample() {
        let (db, _) = sample_db();
        let tree = build_exact_tree(&db);
        let level1: Vec<_> = tree
            .children(NodeId::ROOT)
            .iter()
            .map(|n| (n.location.unwrap(), n.true_count))
            .collect();
        assert_eq!(level1, alloc::vec![(LocationId(0), 5), (LocationId(2), 3)]);
        assert_eq!(count_at(&tree, &[1, 2]), Some(5));
        assert_eq!(count_at(&tree, &[1, 2, 3]), Some(2));
        assert_eq!(count_at(&tree, &[1, 2, 4]), Some(2));
        assert_eq!(count_at(&tree, &[1, 2, 4, 1]), Some(1));
        assert_eq!(count_at(&tree, &[3, 2]), Some(2));
        assert_eq!(count_at(&tree, &[3, 1]), Some(1));
        assert_eq!(count_at(&tree, &[1, 3]), None);
        assert_eq!(tree.root().true_count, 8);
        // one node per distinct prefix
        assert_eq!(tree.stats().nodes, 9);
        for n in tree.nodes() {
            assert_eq!(n.noisy_count, n.true_count as f64);
        }
    }

    #[test]
    fn exact_tree_of_empty_db() {
        let tree = build_exact_tree(&TrajectoryDb::new());
        assert!(tree.is_empty());
        assert_eq!(tree.postorder(), alloc::vec![NodeId::ROOT]);
    }

    #[test]
    fn node_prefix_follows_path() {
        let (db, _) = sample_db();
        let tree = build_exact_tree(&db);
        let l1 = tree.find(&traj(&[1])).unwrap();
        assert_eq!(tree.node_prefix(l1).unwrap().locations(), &traj(&[1])[..]);
        let deep = tree.find(&traj(&[1, 2, 4])).unwrap();
        assert_eq!(tree.node_prefix(deep).unwrap().locations(), &traj(&[1, 2, 4])[..]);
        for id in tree.ids().skip(1) {
            assert_eq!(tree.node_prefix(id).unwrap().len(), tree.node(id).depth as usize);
        }
        assert_eq!(tree.node_prefix(NodeId::ROOT), Err(Error::RootHasNoPrefix));
    }

    #[test]
    fn zero_noise_matches_exact_tree() {
        let (db, _) = sample_db();
        let params = PrivacyParams::new(1.0, 4).unwrap().with_threshold(0.0).unwrap();
        let noisy = TreeBuilder::new(params)
            .noise(NoiseMode::Zero)
            .empty_candidates(EmptyCandidates::Skipped)
            .build(&db, 4, &RandomSource::new(9));
        let exact = build_exact_tree(&db);
        assert_eq!(noisy.len(), exact.len());
        for (a, b) in noisy.nodes().iter().zip(exact.nodes()) {
            assert_eq!(a.location, b.location);
            assert_eq!(a.depth, b.depth);
            assert_eq!(a.noisy_count, b.true_count as f64);
            assert_eq!(a.children().collect::<Vec<_>>(), b.children().collect::<Vec<_>>());
        }
    }

    #[test]
    fn truncation_at_height() {
        let (db, _) = sample_db();
        let params = PrivacyParams::new(1.0, 2).unwrap().with_threshold(0.0).unwrap();
        let tree = TreeBuilder::new(params)
            .noise(NoiseMode::Zero)
            .empty_candidates(EmptyCandidates::Skipped)
            .build(&db, 4, &RandomSource::new(1));
        assert_eq!(tree.height(), 2);
        assert_eq!(count_at(&tree, &[1, 2]), Some(5));
        assert_eq!(count_at(&tree, &[1, 2, 3]), None);
    }

    fn sample_tree(seed: u64, expand_empty: bool) -> NoisyPrefixTree {
        let (db, _) = sample_db();
        let params = PrivacyParams::new(3.0 * core::f64::consts::SQRT_2, 3).unwrap();
        TreeBuilder::new(params)
            .expand_empty(expand_empty)
            .build(&db, 4, &RandomSource::new(seed))
    }

    #[test]
    fn noisy_tree_invariants() {
        for seed in 0..200 {
            for expand in [false, true] {
                let tree = sample_tree(seed, expand);
                let params = *tree.params().unwrap();
                assert!((params.threshold() - 2.0).abs() < 1e-12);
                assert!(tree.ledger().unwrap().is_balanced());
                for id in tree.ids().skip(1) {
                    let n = tree.node(id);
                    assert!(n.noisy_count >= params.threshold());
                    assert!(n.depth >= 1 && n.depth <= 3);
                    let parent = tree.node(n.parent.unwrap());
                    assert_eq!(parent.depth + 1, n.depth);
                    if n.empty_born {
                        assert_eq!(n.true_count, 0);
                        if !expand {
                            assert!(n.is_leaf());
                        }
                    }
                    if parent.empty_born {
                        assert!(n.empty_born);
                    }
                }
                for id in tree.ids() {
                    // distinct labels among siblings; disjoint tr-sets sum to at most the parent
                    let kids = tree.children(id);
                    let mut locs: Vec<_> = kids.iter().map(|c| c.location).collect();
                    locs.dedup();
                    assert_eq!(locs.len(), kids.len());
                    let total: u64 = kids.iter().map(|c| c.true_count).sum();
                    assert!(total <= tree.node(id).true_count);
                }
            }
        }
    }

    #[test]
    fn noisy_tree_is_seed_deterministic() {
        let a = sample_tree(5, false);
        let b = sample_tree(5, false);
        assert_eq!(a.nodes(), b.nodes());
        let differs = (0..20).any(|s| sample_tree(s, false).nodes() != a.nodes());
        assert!(differs);
    }

    #[test]
    fn short_paths_occur() {
        // Some branch dies out before h = 3 for some seed.
        let any_short = (0..50).any(|s| {
            let t = sample_tree(s, false);
            let short = t.leaves().any(|l| t.node(l).depth < 3 && !t.node(l).empty_born);
            short
        });
        assert!(any_short);
    }

    #[test]
    fn large_universe_gets_empty_children() {
        let mut db = TrajectoryDb::new();
        for _ in 0..500 {
            db.push(&Trajectory::new(traj(&[1, 2])).unwrap());
        }
        let params = PrivacyParams::new(1.0, 2).unwrap();
        let tree = build_noisy_tree(&db, 5000, &params, &RandomSource::new(3));
        let empties = tree.nodes().iter().filter(|n| n.empty_born).count();
        // ≈ 2 · 5000 · 0.0295 ≈ 295
        assert!(empties > 150 && empties < 450, "{empties}");
        assert!(tree.node(tree.find(&traj(&[1, 2])).unwrap()).true_count == 500);
    }

    #[test]
    fn unoccupied_sampling() {
        let occupied = alloc::vec![LocationId(1), LocationId(3), LocationId(4)];
        assert_eq!(nth_unoccupied(&occupied, 0), LocationId(0));
        assert_eq!(nth_unoccupied(&occupied, 1), LocationId(2));
        assert_eq!(nth_unoccupied(&occupied, 2), LocationId(5));

        let mut rng = StdRng::seed_from_u64(11);
        let mut hits = [0u32; 8];
        for _ in 0..20_000 {
            let picked = sample_unoccupied(&occupied, 5, 2, &mut rng);
            assert_eq!(picked.len(), 2);
            assert_ne!(picked[0], picked[1]);
            for p in picked {
                assert!(!occupied.contains(&p));
                hits[p.index()] += 1;
            }
        }
        // each of the five free slots chosen with probability 2/5
        for slot in [0, 2, 5, 6, 7] {
            let f = hits[slot] as f64 / 20_000.0;
            assert!((f - 0.4).abs() < 0.02, "slot {slot}: {f}");
        }
        let all = sample_unoccupied(&occupied, 5, 5, &mut rng);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, [0, 2, 5, 6, 7].map(LocationId).to_vec());
    }

    #[test]
    fn outline_dump() {
        let (db, universe) = sample_db();
        let tree = build_exact_tree(&db);
        let mut out = String::new();
        tree.write_outline(&universe, &mut out).unwrap();
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines.len(), 9);
        assert_eq!(lines[0], "L1\t5.00");
        assert_eq!(lines[1], "  L2\t5.00");
        assert_eq!(lines[2], "    L3\t2.00");
        assert_eq!(lines[4], "      L1\t1.00");
    }

    #[test]
    fn postorder_visits_children_first() {
        let (db, _) = sample_db();
        let tree = build_exact_tree(&db);
        let order = tree.postorder();
        assert_eq!(order.len(), tree.len());
        assert_eq!(*order.last().unwrap(), NodeId::ROOT);
        let pos: BTreeMap<NodeId, usize> = order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        for id in tree.ids().skip(1) {
            assert!(pos[&id] < pos[&tree.node(id).parent.unwrap()]);
        }
    }
}

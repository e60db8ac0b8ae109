//! Path aggregation: packing selected switching paths into as few loop-free
//! trees as possible, completing each tree to a spanning tree and binding a
//! VLAN tag to it.
//!
//! The packing pass works as follows.
//!
//! 1. Order the paths longest first (ties: smaller switch sequence first).
//! 2. While paths remain that contain an edge pair (two adjacent links),
//!    recount edge-pair frequencies over the remaining paths and take the most
//!    frequent pair. Pull every remaining path containing it, in path order,
//!    and merge each into the lowest-indexed tree whose edge union with the
//!    path stays acyclic, or open a new tree.
//! 3. Paths with a single link carry no edge pair; they are placed last under
//!    the same rule.
//!
//! First-fit packing can miss the minimum tree count. For path sets no larger
//! than [`AggregateOptions::exact_limit`] an exact branch-and-bound search,
//! bounded by the first-fit count, replaces the packing whenever it finds
//! fewer trees.
//!
//! A primary path and the backup of the same flow never share a tree. For
//! link- and switch-disjoint pairs the union would close a cycle anyway; the
//! rule is enforced explicitly regardless.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::DisjointSets;
use crate::netmodel::{
    EdgePair, Link, Path, PathRole, PathSet, Topology, VlanTag, VlanTree, MAX_VLAN_TAG,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationResult {
    /// Spanning trees, tagged `1..=n` in order.
    pub trees: Vec<VlanTree>,
    /// Tree index of each path, aligned with the input [`PathSet`].
    pub membership: Vec<usize>,
    /// The union of member paths per tree, before spanning completion.
    pub path_unions: Vec<BTreeSet<Link>>,
    /// Tree count of the first-fit packing; larger than the final count when
    /// the exact search improved on it.
    pub first_fit_trees: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregateOptions {
    /// Largest path set for which the exact minimum tree count is searched.
    /// Zero disables the search.
    pub exact_limit: usize,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions { exact_limit: 10 }
    }
}

impl AggregationResult {
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn tree_of(&self, path_index: usize) -> &VlanTree {
        &self.trees[self.membership[path_index]]
    }

    /// VLAN tag carrying the given flow's path of `role`, if any.
    pub fn vlan_of(&self, paths: &PathSet, flow: usize, role: PathRole) -> Option<VlanTag> {
        paths
            .entries()
            .iter()
            .position(|e| e.flow == flow && e.role == role)
            .map(|i| self.tree_of(i).tag)
    }
}

/// One placement decision during packing.
#[derive(Debug)]
pub struct MergeStep<'a> {
    pub path: usize,
    pub tree: usize,
    pub opened: bool,
    /// Tree edges right after the placement.
    pub edges: &'a BTreeSet<Link>,
}

/// Frequency of every two-link sub-path across `paths`, most frequent first,
/// ties in ascending pair order.
pub fn edge_pair_frequencies(paths: &PathSet) -> Vec<(EdgePair, usize)> {
    frequencies(paths.entries().iter().map(|e| &e.path))
}

fn frequencies<'a>(paths: impl Iterator<Item = &'a Path>) -> Vec<(EdgePair, usize)> {
    let mut counts: BTreeMap<EdgePair, usize> = BTreeMap::new();
    for p in paths {
        for ep in p.edge_pairs() {
            *counts.entry(ep).or_insert(0) += 1;
        }
    }
    let mut out: Vec<_> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

#[derive(Clone)]
struct TreeBuild {
    edges: BTreeSet<Link>,
    sets: DisjointSets,
    flows: BTreeSet<(usize, PathRole)>,
}

impl TreeBuild {
    fn accepts(&self, path: &Path) -> bool {
        let mut sets = self.sets.clone();
        path.links()
            .filter(|l| !self.edges.contains(l))
            .all(|l| sets.union(l.lo().index(), l.hi().index()))
    }

    fn absorb(&mut self, path: &Path) {
        for l in path.links() {
            if self.edges.insert(l) {
                self.sets.union(l.lo().index(), l.hi().index());
            }
        }
    }
}

pub fn aggregate_paths(topology: &Topology, paths: &PathSet) -> Result<AggregationResult> {
    aggregate_paths_with(topology, paths, AggregateOptions::default(), |_| {})
}

/// [`aggregate_paths`] with explicit options, reporting every first-fit
/// placement to `observer`.
pub fn aggregate_paths_with(
    topology: &Topology,
    paths: &PathSet,
    options: AggregateOptions,
    mut observer: impl FnMut(&MergeStep<'_>),
) -> Result<AggregationResult> {
    let entries = paths.entries();
    for e in entries {
        Path::new(topology, e.path.nodes().to_vec())?;
    }

    let mut remaining: Vec<usize> = (0..entries.len()).collect();
    remaining.sort_by(|&i, &j| {
        let (p, q) = (&entries[i].path, &entries[j].path);
        q.hops().cmp(&p.hops()).then(p.cmp(q)).then(i.cmp(&j))
    });
    let by_length = remaining.clone();

    let mut trees: Vec<TreeBuild> = Vec::new();
    let mut membership = vec![usize::MAX; entries.len()];
    let mut place = |i: usize, trees: &mut Vec<TreeBuild>| {
        let e = &entries[i];
        let sibling = match e.role {
            PathRole::Primary => (e.flow, PathRole::Backup),
            PathRole::Backup => (e.flow, PathRole::Primary),
        };
        let slot = trees
            .iter()
            .position(|t| !t.flows.contains(&sibling) && t.accepts(&e.path));
        let opened = slot.is_none();
        let ti = slot.unwrap_or_else(|| {
            trees.push(TreeBuild {
                edges: BTreeSet::new(),
                sets: DisjointSets::new(topology.switch_count()),
                flows: BTreeSet::new(),
            });
            trees.len() - 1
        });
        let t = &mut trees[ti];
        t.absorb(&e.path);
        t.flows.insert((e.flow, e.role));
        membership[i] = ti;
        observer(&MergeStep {
            path: i,
            tree: ti,
            opened,
            edges: &t.edges,
        });
    };

    loop {
        let freq = frequencies(remaining.iter().map(|&i| &entries[i].path));
        let Some(&(ep, _)) = freq.first() else {
            break;
        };
        let (taken, rest): (Vec<usize>, Vec<usize>) = remaining
            .iter()
            .partition(|&&i| entries[i].path.edge_pairs().any(|x| x == ep));
        remaining = rest;
        for i in taken {
            place(i, &mut trees);
        }
    }
    for i in std::mem::take(&mut remaining) {
        place(i, &mut trees);
    }

    let first_fit_trees = trees.len();
    let mut path_unions: Vec<BTreeSet<Link>> = trees.into_iter().map(|t| t.edges).collect();
    if entries.len() <= options.exact_limit {
        if let Some(blocks) = fewer_trees(topology, paths, &by_length, first_fit_trees) {
            path_unions = vec![BTreeSet::new(); blocks.iter().max().map_or(0, |b| b + 1)];
            for (&i, &b) in by_length.iter().zip(&blocks) {
                path_unions[b].extend(entries[i].path.links());
                membership[i] = b;
            }
        }
    }
    let completed = path_unions
        .iter()
        .map(|u| complete_tree(topology, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregationResult {
        trees: assign_vlans(completed)?,
        membership,
        path_unions,
        first_fit_trees,
    })
}

/// Branch-and-bound search for a grouping into fewer than `bound` trees.
/// Returns the block of each path in `order`.
fn fewer_trees(
    topology: &Topology,
    paths: &PathSet,
    order: &[usize],
    bound: usize,
) -> Option<Vec<usize>> {
    struct Search<'a> {
        paths: &'a [crate::netmodel::RoutedPath],
        order: &'a [usize],
        bound: usize,
        blocks: Vec<TreeBuild>,
        chosen: Vec<usize>,
        best: Option<Vec<usize>>,
    }

    impl Search<'_> {
        fn run(&mut self, k: usize, n: usize) {
            if self.blocks.len() >= self.bound {
                return;
            }
            if k == self.order.len() {
                self.bound = self.blocks.len();
                self.best = Some(self.chosen.clone());
                return;
            }
            let e = &self.paths[self.order[k]];
            let sibling = match e.role {
                PathRole::Primary => (e.flow, PathRole::Backup),
                PathRole::Backup => (e.flow, PathRole::Primary),
            };
            for b in 0..=self.blocks.len() {
                if b == self.blocks.len() {
                    self.blocks.push(TreeBuild {
                        edges: BTreeSet::new(),
                        sets: DisjointSets::new(n),
                        flows: BTreeSet::new(),
                    });
                } else if self.blocks[b].flows.contains(&sibling) || !self.blocks[b].accepts(&e.path) {
                    continue;
                }
                let fresh = self.blocks[b].edges.is_empty();
                let saved = self.blocks[b].clone();
                self.blocks[b].absorb(&e.path);
                self.blocks[b].flows.insert((e.flow, e.role));
                self.chosen.push(b);
                self.run(k + 1, n);
                self.chosen.pop();
                if fresh {
                    self.blocks.pop();
                } else {
                    self.blocks[b] = saved;
                }
            }
        }
    }

    let mut search = Search {
        paths: paths.entries(),
        order,
        bound,
        blocks: Vec::new(),
        chosen: Vec::new(),
        best: None,
    };
    search.run(0, topology.switch_count());
    search.best
}

/// Grows an acyclic link set into a spanning tree, adding the smallest
/// admissible link first.
pub fn complete_tree(topology: &Topology, partial: &BTreeSet<Link>) -> Result<BTreeSet<Link>> {
    let mut sets = DisjointSets::new(topology.switch_count());
    for l in partial {
        topology.require_link(l)?;
        if !sets.union(l.lo().index(), l.hi().index()) {
            return Err(Error::CyclicTree);
        }
    }
    let mut out = partial.clone();
    for (l, _) in topology.links() {
        if sets.set_count() <= 1 {
            break;
        }
        if sets.union(l.lo().index(), l.hi().index()) {
            out.insert(l);
        }
    }
    if sets.set_count() > 1 {
        return Err(Error::Disconnected);
    }
    Ok(out)
}

/// Tags trees `1..=n` in order.
pub fn assign_vlans(trees: Vec<BTreeSet<Link>>) -> Result<Vec<VlanTree>> {
    if trees.len() > MAX_VLAN_TAG as usize {
        return Err(Error::TagSpaceExhausted(trees.len()));
    }
    Ok(trees
        .into_iter()
        .enumerate()
        .map(|(i, edges)| VlanTree {
            tag: VlanTag::new(i as u16 + 1).unwrap(),
            edges,
        })
        .collect())
}

/// Renders `vlan <tag>: <links>` lines followed by one
/// `flow <src> <dst> primary=<tag> backup=<tag|->` line per flow.
pub fn write_vlan_map(result: &AggregationResult, paths: &PathSet) -> String {
    let mut out = String::new();
    for t in &result.trees {
        let edges: Vec<String> = t.edges.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(out, "vlan {}: {}", t.tag, edges.join(" "));
    }
    let mut flows: BTreeMap<usize, (Option<VlanTag>, Option<VlanTag>, usize)> = BTreeMap::new();
    for (i, e) in paths.entries().iter().enumerate() {
        let slot = flows.entry(e.flow).or_insert((None, None, i));
        let tag = Some(result.tree_of(i).tag);
        match e.role {
            PathRole::Primary => slot.0 = tag,
            PathRole::Backup => slot.1 = tag,
        }
    }
    let show = |t: Option<VlanTag>| t.map_or("-".to_string(), |t| t.to_string());
    for (_, (p, b, first)) in flows {
        let d = paths.entries()[first].demand;
        let _ = writeln!(
            out,
            "flow {} {} primary={} backup={}",
            d.src,
            d.dst,
            show(p),
            show(b)
        );
    }
    out
}

//! Small graph helpers shared across modules.

use std::collections::{BTreeSet, VecDeque};

use crate::netmodel::{Link, SwitchId, Topology};

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
    sets: usize,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
            sets: n,
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `x` and `y` were already joined.
    pub fn union(&mut self, x: usize, y: usize) -> bool {
        let (mut rx, mut ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        if self.size[rx] < self.size[ry] {
            std::mem::swap(&mut rx, &mut ry);
        }
        self.parent[ry] = rx;
        self.size[rx] += self.size[ry];
        self.sets -= 1;
        true
    }

    pub fn set_count(&self) -> usize {
        self.sets
    }
}

/// Elements removed from a topology when evaluating reachability.
#[derive(Debug, Clone, Default)]
pub(crate) struct Excluded {
    pub switches: BTreeSet<SwitchId>,
    pub links: BTreeSet<Link>,
}

impl Excluded {
    fn allows(&self, from: SwitchId, to: SwitchId) -> bool {
        !self.switches.contains(&to) && !self.links.contains(&Link::new(from, to))
    }
}

/// Hop distances from `from` over surviving elements; `None` where unreachable.
pub(crate) fn hop_distances(
    topology: &Topology,
    from: SwitchId,
    excluded: &Excluded,
) -> Vec<Option<usize>> {
    let mut dist = vec![None; topology.switch_count()];
    if excluded.switches.contains(&from) {
        return dist;
    }
    dist[from.index()] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u.index()].unwrap();
        for &v in topology.neighbors(u) {
            if dist[v.index()].is_none() && excluded.allows(u, v) {
                dist[v.index()] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Shortest-path tree rooted at `root`: every switch's parent is its
/// lowest-id neighbor one hop closer to the root.
pub(crate) fn bfs_parents(topology: &Topology, root: SwitchId) -> Vec<Option<SwitchId>> {
    let dist = hop_distances(topology, root, &Excluded::default());
    topology
        .switches()
        .map(|v| {
            let d = dist[v.index()]?;
            topology
                .neighbors(v)
                .iter()
                .copied()
                .find(|u| d > 0 && dist[u.index()] == Some(d - 1))
        })
        .collect()
}

/// Walks parent pointers from `node` up to the root.
pub(crate) fn climb(parent: &[Option<SwitchId>], root: SwitchId, node: SwitchId) -> Option<Vec<SwitchId>> {
    let mut out = vec![node];
    let mut cur = node;
    while cur != root {
        cur = parent[cur.index()]?;
        out.push(cur);
    }
    Some(out)
}

/// The unique route between two switches inside an acyclic edge set.
pub(crate) fn tree_route(
    switch_count: usize,
    edges: &BTreeSet<Link>,
    from: SwitchId,
    to: SwitchId,
) -> Option<Vec<SwitchId>> {
    if from.index() >= switch_count || to.index() >= switch_count {
        return None;
    }
    let mut adj = vec![Vec::new(); switch_count];
    for l in edges {
        adj[l.lo().index()].push(l.hi());
        adj[l.hi().index()].push(l.lo());
    }
    let mut parent: Vec<Option<SwitchId>> = vec![None; switch_count];
    let mut seen = vec![false; switch_count];
    seen[to.index()] = true;
    let mut queue = VecDeque::from([to]);
    while let Some(u) = queue.pop_front() {
        if u == from {
            break;
        }
        for &v in &adj[u.index()] {
            if !seen[v.index()] {
                seen[v.index()] = true;
                parent[v.index()] = Some(u);
                queue.push_back(v);
            }
        }
    }
    if !seen[from.index()] {
        return None;
    }
    climb(&parent, to, from)
}

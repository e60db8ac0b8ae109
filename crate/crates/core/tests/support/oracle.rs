use std::collections::{BTreeMap, BTreeSet, VecDeque};

use vlantree::netmodel::{Link, Path, SwitchId, Topology};
use vlantree::tepath::PathAssignment;

/// Plain quick-union without ranks or compression.
pub struct Forest(Vec<usize>);

impl Forest {
    pub fn new(n: usize) -> Self {
        Forest((0..n).collect())
    }

    pub fn root(&self, mut x: usize) -> usize {
        while self.0[x] != x {
            x = self.0[x];
        }
        x
    }

    /// False if `a` and `b` were already connected.
    pub fn join(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.root(a), self.root(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

pub fn acyclic<'a>(n: usize, links: impl IntoIterator<Item = &'a Link>) -> bool {
    let mut f = Forest::new(n);
    links.into_iter().all(|l| f.join(l.lo().index(), l.hi().index()))
}

pub fn spanning(n: usize, links: &BTreeSet<Link>) -> bool {
    if links.len() + 1 != n || !acyclic(n, links) {
        return false;
    }
    let reach = bfs(n, links, 0, &BTreeSet::new());
    reach.iter().all(Option::is_some)
}

/// Hop distances from `from` over `links`, skipping `dead` switches.
pub fn bfs(n: usize, links: &BTreeSet<Link>, from: usize, dead: &BTreeSet<usize>) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); n];
    for l in links {
        adj[l.lo().index()].push(l.hi().index());
        adj[l.hi().index()].push(l.lo().index());
    }
    let mut dist = vec![None; n];
    if dead.contains(&from) {
        return dist;
    }
    dist[from] = Some(0);
    let mut q = VecDeque::from([from]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v].is_none() && !dead.contains(&v) {
                dist[v] = Some(dist[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

pub fn all_links(t: &Topology) -> BTreeSet<Link> {
    t.links().map(|(l, _)| l).collect()
}

/// Every simple path from `s` to `t`, by depth-first enumeration.
pub fn simple_paths(topo: &Topology, s: SwitchId, t: SwitchId) -> Vec<Vec<SwitchId>> {
    fn go(topo: &Topology, t: SwitchId, stack: &mut Vec<SwitchId>, out: &mut Vec<Vec<SwitchId>>) {
        let u = *stack.last().unwrap();
        if u == t {
            out.push(stack.clone());
            return;
        }
        for &v in topo.neighbors(u) {
            if !stack.contains(&v) {
                stack.push(v);
                go(topo, t, stack, out);
                stack.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(topo, t, &mut vec![s], &mut out);
    out
}

pub fn disjoint(primary: &[SwitchId], other: &[SwitchId]) -> bool {
    let links = |p: &[SwitchId]| -> BTreeSet<Link> { p.windows(2).map(|w| Link::new(w[0], w[1])).collect() };
    let inner = |p: &[SwitchId]| -> BTreeSet<SwitchId> { p[1..p.len() - 1].iter().copied().collect() };
    links(primary).is_disjoint(&links(other))
        && inner(primary).is_disjoint(&other.iter().copied().collect())
        && inner(other).is_disjoint(&primary.iter().copied().collect())
}

/// Directed loads recounted demand by demand.
pub fn recount_loads(a: &PathAssignment, include_backup: bool) -> BTreeMap<(u32, u32), f64> {
    let mut out = BTreeMap::new();
    for r in a.routes() {
        let mut paths: Vec<&Path> = r.primary().into_iter().collect();
        if include_backup {
            paths.extend(r.backup());
        }
        for p in paths {
            for w in p.nodes().windows(2) {
                *out.entry((w[0].0, w[1].0)).or_insert(0.0) += r.demand.rate_mbps;
            }
        }
    }
    out
}

/// Fewest groups of paths such that each group's link union is acyclic and
/// no group holds two paths with the same conflict key. Exhaustive search
/// over set partitions.
pub fn min_partition(n: usize, paths: &[(BTreeSet<Link>, Option<(usize, usize)>)]) -> usize {
    fn ok(n: usize, group: &[usize], paths: &[(BTreeSet<Link>, Option<(usize, usize)>)]) -> bool {
        let union: BTreeSet<Link> = group.iter().flat_map(|&i| paths[i].0.iter().copied()).collect();
        if !acyclic(n, &union) {
            return false;
        }
        // conflict key: (flow, role); a flow may not appear with two roles
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        for &i in group {
            if let Some((flow, role)) = paths[i].1 {
                if let Some(&r) = seen.get(&flow) {
                    if r != role {
                        return false;
                    }
                }
                seen.insert(flow, role);
            }
        }
        true
    }
    fn go(
        k: usize,
        n: usize,
        paths: &[(BTreeSet<Link>, Option<(usize, usize)>)],
        groups: &mut Vec<Vec<usize>>,
        best: &mut usize,
    ) {
        if groups.len() >= *best {
            return;
        }
        if k == paths.len() {
            *best = groups.len();
            return;
        }
        for g in 0..groups.len() {
            groups[g].push(k);
            if ok(n, &groups[g], paths) {
                go(k + 1, n, paths, groups, best);
            }
            groups[g].pop();
        }
        groups.push(vec![k]);
        go(k + 1, n, paths, groups, best);
        groups.pop();
    }
    let mut best = paths.len().max(1);
    if paths.is_empty() {
        return 0;
    }
    go(0, n, paths, &mut Vec::new(), &mut best);
    best
}

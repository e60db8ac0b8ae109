//! Load-balanced primary path selection and disjoint backup paths.
//!
//! Demands are placed greedily in descending rate order; among equal rates
//! the ones with fewer hops between their switches go first. Each one takes
//! the cheapest path under `cost(link) = 1 / (residual + eps)`, where `eps` is a
//! millionth of the link capacity, restricted to links whose residual
//! capacity can carry the whole demand. Admission is all-or-nothing.
//!
//! Equal-cost candidates are resolved toward the lexicographically smallest
//! switch sequence, so identical inputs always yield identical assignments.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{hop_distances, DisjointSets, Excluded};
use crate::netmodel::text::{parse_f64, parse_u32, tokens};
use crate::netmodel::{
    Demand, DirLink, HostId, Link, Path, PathRole, PathSet, RoutedPath, SwitchId, Topology,
    TrafficMatrix,
};

const EPS_FRACTION: f64 = 1e-6;
const RATE_SLACK: f64 = 1e-9;

/// How backup paths are provisioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackupMode {
    /// Primary paths only.
    #[default]
    Off,
    /// Compute a backup when one exists. Backup bandwidth is tracked but
    /// never counted against capacity; a missing backup does not reject.
    Unreserved,
    /// Every admitted demand needs a backup, and primary plus backup
    /// reservations together must fit the link capacities.
    Reserved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SelectOptions {
    pub backup: BackupMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    NoCapacity,
    NoBackup,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Routing {
    Admitted { primary: Path, backup: Option<Path> },
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandRoute {
    pub demand: Demand,
    pub routing: Routing,
}

impl DemandRoute {
    pub fn primary(&self) -> Option<&Path> {
        match &self.routing {
            Routing::Admitted { primary, .. } => Some(primary),
            Routing::Rejected(_) => None,
        }
    }

    pub fn backup(&self) -> Option<&Path> {
        match &self.routing {
            Routing::Admitted { backup, .. } => backup.as_ref(),
            Routing::Rejected(_) => None,
        }
    }

    pub fn is_admitted(&self) -> bool {
        matches!(self.routing, Routing::Admitted { .. })
    }
}

/// Per-direction link loads in Mbps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkLoads(BTreeMap<DirLink, f64>);

impl LinkLoads {
    pub fn get(&self, d: DirLink) -> f64 {
        self.0.get(&d).copied().unwrap_or(0.0)
    }

    pub fn add_path(&mut self, path: &Path, rate: f64) {
        for d in path.dir_links() {
            *self.0.entry(d).or_insert(0.0) += rate;
        }
    }

    fn remove_path(&mut self, path: &Path, rate: f64) {
        for d in path.dir_links() {
            *self.0.entry(d).or_insert(0.0) -= rate;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (DirLink, f64)> + '_ {
        self.0.iter().map(|(d, v)| (*d, *v))
    }

    /// Largest load/capacity ratio over all directed links.
    pub fn max_utilization(&self, topology: &Topology) -> f64 {
        self.iter()
            .filter_map(|(d, v)| topology.capacity(&d.link()).map(|c| v / c))
            .fold(0.0, f64::max)
    }
}

/// Primary and backup routes for every demand of a matrix, in matrix order.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAssignment {
    routes: Vec<DemandRoute>,
    primary_load: LinkLoads,
    backup_load: LinkLoads,
}

impl PathAssignment {
    /// Assembles an assignment from explicit routes, validating each path.
    pub fn from_routes(topology: &Topology, routes: Vec<DemandRoute>) -> Result<PathAssignment> {
        let mut primary_load = LinkLoads::default();
        let mut backup_load = LinkLoads::default();
        for r in &routes {
            let ends = (
                topology.host_switch(r.demand.src)?,
                topology.host_switch(r.demand.dst)?,
            );
            for (p, load) in [
                (r.primary(), &mut primary_load),
                (r.backup(), &mut backup_load),
            ] {
                if let Some(p) = p {
                    Path::new(topology, p.nodes().to_vec())?;
                    if (p.source(), p.target()) != ends {
                        return Err(Error::InvalidPath(format!(
                            "{p} does not join the demand's switches"
                        )));
                    }
                    load.add_path(p, r.demand.rate_mbps);
                }
            }
        }
        Ok(PathAssignment {
            routes,
            primary_load,
            backup_load,
        })
    }

    pub fn routes(&self) -> &[DemandRoute] {
        &self.routes
    }

    pub fn primary_load(&self) -> &LinkLoads {
        &self.primary_load
    }

    pub fn backup_load(&self) -> &LinkLoads {
        &self.backup_load
    }

    pub fn admitted(&self) -> impl Iterator<Item = (usize, &DemandRoute)> {
        self.routes.iter().enumerate().filter(|(_, r)| r.is_admitted())
    }

    pub fn admitted_count(&self) -> usize {
        self.admitted().count()
    }

    pub fn admitted_mbps(&self) -> f64 {
        self.admitted().fold(0.0, |a, (_, r)| a + r.demand.rate_mbps)
    }

    /// All admitted primaries and backups; the flow id is the demand index.
    pub fn path_set(&self) -> PathSet {
        let mut entries = Vec::new();
        for (i, r) in self.admitted() {
            for (role, p) in [(PathRole::Primary, r.primary()), (PathRole::Backup, r.backup())] {
                if let Some(p) = p {
                    entries.push(RoutedPath {
                        flow: i,
                        demand: r.demand,
                        role,
                        path: p.clone(),
                    });
                }
            }
        }
        PathSet::from_trusted(entries)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: SwitchId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Cheapest simple path from `src` to `dst`, breaking cost ties toward the
/// lexicographically smallest switch sequence. `cost` returns `None` for
/// unusable directed links. Switches in `banned` are never entered.
pub(crate) fn min_cost_path(
    topology: &Topology,
    src: SwitchId,
    dst: SwitchId,
    banned: &BTreeSet<SwitchId>,
    mut cost: impl FnMut(DirLink) -> Option<f64>,
) -> Option<Path> {
    let n = topology.switch_count();
    let mut best: Vec<Option<(f64, Vec<SwitchId>)>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[src.index()] = Some((0.0, vec![src]));
    heap.push(HeapEntry { cost: 0.0, node: src });
    while let Some(HeapEntry { node: u, .. }) = heap.pop() {
        if settled[u.index()] {
            continue;
        }
        settled[u.index()] = true;
        if u == dst {
            break;
        }
        let (cu, pu) = best[u.index()].clone().unwrap();
        for &v in topology.neighbors(u) {
            if settled[v.index()] || banned.contains(&v) {
                continue;
            }
            let Some(w) = cost(DirLink::new(u, v)) else {
                continue;
            };
            let cv = cu + w;
            let better = match &best[v.index()] {
                None => true,
                Some((c, p)) => {
                    if nearly_equal(cv, *c) {
                        pu.iter().chain([&v]).lt(p.iter())
                    } else {
                        cv < *c
                    }
                }
            };
            if better {
                let mut pv = pu.clone();
                pv.push(v);
                best[v.index()] = Some((cv, pv));
                heap.push(HeapEntry { cost: cv, node: v });
            }
        }
    }
    best[dst.index()]
        .take()
        .filter(|(_, p)| p.len() >= 2)
        .map(|(_, p)| Path::trusted(p))
}

fn check_demands(topology: &Topology, matrix: &TrafficMatrix) -> Result<Vec<(SwitchId, SwitchId)>> {
    let mut sets = DisjointSets::new(topology.switch_count());
    for (l, _) in topology.links() {
        sets.union(l.lo().index(), l.hi().index());
    }
    let mut ends = Vec::with_capacity(matrix.len());
    for d in matrix.demands() {
        let s = topology.host_switch(d.src)?;
        let t = topology.host_switch(d.dst)?;
        if s == t {
            return Err(Error::InvalidDemand {
                src: d.src,
                dst: d.dst,
                reason: format!("both hosts attach to switch {s}; no switching path needed"),
            });
        }
        if sets.find(s.index()) != sets.find(t.index()) {
            return Err(Error::Unreachable { src: s, dst: t });
        }
        ends.push((s, t));
    }
    Ok(ends)
}

/// Descending rate, then ascending hop distance between the endpoint
/// switches, then ascending (source, destination), then matrix order.
pub(crate) fn admission_order(
    topology: &Topology,
    matrix: &TrafficMatrix,
    ends: &[(SwitchId, SwitchId)],
) -> Vec<usize> {
    let mut dist: BTreeMap<SwitchId, Vec<Option<usize>>> = BTreeMap::new();
    let hops: Vec<usize> = ends
        .iter()
        .map(|&(s, t)| {
            dist.entry(s)
                .or_insert_with(|| hop_distances(topology, s, &Excluded::default()))[t.index()]
            .unwrap_or(usize::MAX)
        })
        .collect();
    let d = matrix.demands();
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| {
        d[j].rate_mbps
            .total_cmp(&d[i].rate_mbps)
            .then(hops[i].cmp(&hops[j]))
            .then((d[i].src, d[i].dst).cmp(&(d[j].src, d[j].dst)))
            .then(i.cmp(&j))
    });
    order
}

/// Routes every demand, computing unreserved backups when `with_backup`.
pub fn select_paths(
    topology: &Topology,
    matrix: &TrafficMatrix,
    with_backup: bool,
) -> Result<PathAssignment> {
    let backup = if with_backup {
        BackupMode::Unreserved
    } else {
        BackupMode::Off
    };
    select_paths_with(topology, matrix, SelectOptions { backup })
}

pub fn select_paths_with(
    topology: &Topology,
    matrix: &TrafficMatrix,
    options: SelectOptions,
) -> Result<PathAssignment> {
    let ends = check_demands(topology, matrix)?;
    let mut routes: Vec<Option<DemandRoute>> = vec![None; matrix.len()];
    let mut primary_load = LinkLoads::default();
    let mut backup_load = LinkLoads::default();
    let reserved = options.backup == BackupMode::Reserved;

    for i in admission_order(topology, matrix, &ends) {
        let demand = matrix.demands()[i];
        let rate = demand.rate_mbps;
        let (s, t) = ends[i];
        let residual = |d: DirLink, p: &LinkLoads, b: &LinkLoads| {
            let cap = topology.capacity(&d.link()).unwrap();
            let used = p.get(d) + if reserved { b.get(d) } else { 0.0 };
            (cap - used, cap)
        };
        let feasible = |d: DirLink, p: &LinkLoads, b: &LinkLoads| {
            let (res, cap) = residual(d, p, b);
            (res >= rate - RATE_SLACK * cap).then(|| 1.0 / (res + EPS_FRACTION * cap))
        };

        let none = BTreeSet::new();
        let Some(primary) = min_cost_path(topology, s, t, &none, |d| {
            feasible(d, &primary_load, &backup_load)
        }) else {
            routes[i] = Some(DemandRoute {
                demand,
                routing: Routing::Rejected(RejectReason::NoCapacity),
            });
            continue;
        };
        primary_load.add_path(&primary, rate);

        let backup = match options.backup {
            BackupMode::Off => None,
            mode => {
                let banned: BTreeSet<SwitchId> = primary.interior().iter().copied().collect();
                let used: BTreeSet<Link> = primary.links().collect();
                min_cost_path(topology, s, t, &banned, |d| {
                    if used.contains(&d.link()) {
                        None
                    } else if mode == BackupMode::Reserved {
                        feasible(d, &primary_load, &backup_load)
                    } else {
                        let (res, cap) = residual(d, &primary_load, &backup_load);
                        Some(1.0 / (res.max(0.0) + EPS_FRACTION * cap))
                    }
                })
            }
        };
        if reserved && backup.is_none() {
            primary_load.remove_path(&primary, rate);
            routes[i] = Some(DemandRoute {
                demand,
                routing: Routing::Rejected(RejectReason::NoBackup),
            });
            continue;
        }
        if let Some(b) = &backup {
            backup_load.add_path(b, rate);
        }
        routes[i] = Some(DemandRoute {
            demand,
            routing: Routing::Admitted { primary, backup },
        });
    }

    Ok(PathAssignment {
        routes: routes.into_iter().map(Option::unwrap).collect(),
        primary_load,
        backup_load,
    })
}

/// Minimum-hop path joining the primary's endpoints that shares no link and
/// no interior switch with it, or `None` when no such path exists.
pub fn select_backup(topology: &Topology, primary: &Path) -> Result<Option<Path>> {
    Path::new(topology, primary.nodes().to_vec())?;
    let banned: BTreeSet<SwitchId> = primary.interior().iter().copied().collect();
    let used: BTreeSet<Link> = primary.links().collect();
    Ok(min_cost_path(
        topology,
        primary.source(),
        primary.target(),
        &banned,
        |d| (!used.contains(&d.link())).then_some(1.0),
    ))
}

/// Recounts directed link loads from the admitted paths.
pub fn link_loads(assignment: &PathAssignment, include_backup: bool) -> LinkLoads {
    let mut loads = LinkLoads::default();
    for (_, r) in assignment.admitted() {
        if let Some(p) = r.primary() {
            loads.add_path(p, r.demand.rate_mbps);
        }
        if include_backup {
            if let Some(b) = r.backup() {
                loads.add_path(b, r.demand.rate_mbps);
            }
        }
    }
    loads
}

/// One `path <src> <dst> <rate> primary|backup <n0>-<n1>-...` line per
/// admitted path, in demand order.
pub fn write_assignment(assignment: &PathAssignment) -> String {
    let mut out = String::new();
    for e in assignment.path_set().entries() {
        let d = e.demand;
        let _ = writeln!(out, "path {} {} {} {} {}", d.src, d.dst, d.rate_mbps, e.role, e.path);
    }
    out
}

/// Reads a path dump. Each `primary` line opens a new flow; a `backup` line
/// belongs to the preceding primary of the same host pair.
pub fn parse_assignment(text: &str, topology: &Topology) -> Result<PathSet> {
    let mut entries: Vec<RoutedPath> = Vec::new();
    let mut flow = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks = tokens(raw);
        if toks.is_empty() {
            continue;
        }
        if toks[0] != "path" {
            return Err(Error::parse(line, format!("unknown directive `{}`", toks[0])));
        }
        if toks.len() != 6 {
            return Err(Error::parse(line, "`path` takes 5 arguments"));
        }
        let src = HostId(parse_u32(line, toks[1], "host id")?);
        let dst = HostId(parse_u32(line, toks[2], "host id")?);
        let rate_mbps = parse_f64(line, toks[3], "rate")?;
        let role = match toks[4] {
            "primary" => PathRole::Primary,
            "backup" => PathRole::Backup,
            other => return Err(Error::parse(line, format!("bad role `{other}`"))),
        };
        let nodes = toks[5]
            .split('-')
            .map(|t| parse_u32(line, t, "switch id").map(SwitchId))
            .collect::<Result<Vec<_>>>()?;
        let path = Path::new(topology, nodes).map_err(|e| Error::parse(line, e.to_string()))?;
        let demand = Demand { src, dst, rate_mbps };
        match role {
            PathRole::Primary => {
                if !entries.is_empty() {
                    flow += 1;
                }
            }
            PathRole::Backup => {
                let ok = entries.last().is_some_and(|p| {
                    p.role == PathRole::Primary && (p.demand.src, p.demand.dst) == (src, dst)
                });
                if !ok {
                    return Err(Error::parse(line, "backup without a matching primary"));
                }
            }
        }
        entries.push(RoutedPath {
            flow,
            demand,
            role,
            path,
        });
    }
    PathSet::new(topology, entries).map_err(|e| Error::parse(0, e.to_string()))
}

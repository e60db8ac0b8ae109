//! Network data model: switches, duplex links, attached hosts, switching
//! paths, VLAN-tagged trees and traffic matrices.
//!
//! Switch and host identifiers are dense integers starting at zero and live in
//! separate namespaces. Links are undirected with a symmetric full-duplex
//! capacity; loads are always accounted per direction ([`DirLink`]).

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::graph::DisjointSets;

mod grid;
pub mod text;

pub use grid::{build_grid, uniform_matrix};

/// Largest usable 802.1Q VLAN identifier.
pub const MAX_VLAN_TAG: u16 = 4094;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SwitchId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HostId(pub u32);

impl SwitchId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl HostId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An undirected link, stored with its lower switch first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    a: SwitchId,
    b: SwitchId,
}

impl Link {
    /// Builds the link joining `x` and `y`, in either order.
    ///
    /// Self-loops are representable here so that parsers can report them;
    /// a [`Topology`] never contains one.
    pub fn new(x: SwitchId, y: SwitchId) -> Self {
        if x <= y {
            Link { a: x, b: y }
        } else {
            Link { a: y, b: x }
        }
    }

    pub fn between(x: u32, y: u32) -> Self {
        Link::new(SwitchId(x), SwitchId(y))
    }

    pub fn lo(&self) -> SwitchId {
        self.a
    }

    pub fn hi(&self) -> SwitchId {
        self.b
    }

    pub fn touches(&self, s: SwitchId) -> bool {
        self.a == s || self.b == s
    }

    /// The endpoint opposite `s`, if `s` is an endpoint.
    pub fn other(&self, s: SwitchId) -> Option<SwitchId> {
        if s == self.a {
            Some(self.b)
        } else if s == self.b {
            Some(self.a)
        } else {
            None
        }
    }

    /// The switch shared with `other`, if the two links are adjacent and distinct.
    pub fn shared_switch(&self, other: &Link) -> Option<SwitchId> {
        if self == other {
            return None;
        }
        [self.a, self.b].into_iter().find(|s| other.touches(*s))
    }

    pub fn directions(&self) -> [DirLink; 2] {
        [
            DirLink {
                from: self.a,
                to: self.b,
            },
            DirLink {
                from: self.b,
                to: self.a,
            },
        ]
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

/// One direction of a duplex link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DirLink {
    pub from: SwitchId,
    pub to: SwitchId,
}

impl DirLink {
    pub fn new(from: SwitchId, to: SwitchId) -> Self {
        DirLink { from, to }
    }

    pub fn link(&self) -> Link {
        Link::new(self.from, self.to)
    }
}

impl fmt::Display for DirLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}", self.from, self.to)
    }
}

/// Switches, capacitated duplex links and host attachment points.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    adjacency: Vec<Vec<SwitchId>>,
    links: std::collections::BTreeMap<Link, f64>,
    hosts: Vec<SwitchId>,
}

impl Topology {
    pub fn builder() -> TopologyBuilder {
        TopologyBuilder::default()
    }

    pub fn switch_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn host_count(&self) -> usize {
        self.hosts.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn switches(&self) -> impl Iterator<Item = SwitchId> + '_ {
        (0..self.adjacency.len() as u32).map(SwitchId)
    }

    pub fn hosts(&self) -> impl Iterator<Item = (HostId, SwitchId)> + '_ {
        self.hosts
            .iter()
            .enumerate()
            .map(|(i, s)| (HostId(i as u32), *s))
    }

    /// Links in ascending order with their capacity in Mbps.
    pub fn links(&self) -> impl Iterator<Item = (Link, f64)> + '_ {
        self.links.iter().map(|(l, c)| (*l, *c))
    }

    pub fn has_switch(&self, s: SwitchId) -> bool {
        s.index() < self.adjacency.len()
    }

    pub fn has_link(&self, link: &Link) -> bool {
        self.links.contains_key(link)
    }

    pub fn capacity(&self, link: &Link) -> Option<f64> {
        self.links.get(link).copied()
    }

    /// Neighbors of `s` in ascending order.
    pub fn neighbors(&self, s: SwitchId) -> &[SwitchId] {
        &self.adjacency[s.index()]
    }

    pub fn degree(&self, s: SwitchId) -> usize {
        self.adjacency[s.index()].len()
    }

    pub fn host_switch(&self, h: HostId) -> Result<SwitchId> {
        self.hosts.get(h.index()).copied().ok_or(Error::UnknownHost(h))
    }

    /// Hosts attached to `s`, ascending.
    pub fn hosts_at(&self, s: SwitchId) -> impl Iterator<Item = HostId> + '_ {
        self.hosts().filter(move |(_, at)| *at == s).map(|(h, _)| h)
    }

    pub fn require_link(&self, link: &Link) -> Result<f64> {
        self.capacity(link).ok_or(Error::UnknownLink(*link))
    }

    pub fn is_connected(&self) -> bool {
        let mut sets = DisjointSets::new(self.switch_count());
        for link in self.links.keys() {
            sets.union(link.lo().index(), link.hi().index());
        }
        sets.set_count() <= 1
    }

    /// A copy of this topology without `link`.
    pub fn without_link(&self, link: &Link) -> Result<Topology> {
        self.require_link(link)?;
        let mut out = self.clone();
        out.links.remove(link);
        out.adjacency[link.lo().index()].retain(|s| *s != link.hi());
        out.adjacency[link.hi().index()].retain(|s| *s != link.lo());
        Ok(out)
    }
}

#[derive(Debug, Default, Clone)]
pub struct TopologyBuilder {
    switches: usize,
    links: Vec<(Link, f64)>,
    hosts: Vec<SwitchId>,
}

impl TopologyBuilder {
    /// Declares switches `0..count`.
    pub fn switches(mut self, count: usize) -> Self {
        self.switches = self.switches.max(count);
        self
    }

    pub fn link(mut self, a: u32, b: u32, capacity_mbps: f64) -> Self {
        self.links.push((Link::between(a, b), capacity_mbps));
        self
    }

    /// Attaches the next host id to switch `s`.
    pub fn host(mut self, s: u32) -> Self {
        self.hosts.push(SwitchId(s));
        self
    }

    pub fn build(self) -> Result<Topology> {
        let n = self.switches;
        let mut adjacency = vec![Vec::new(); n];
        let mut links = std::collections::BTreeMap::new();
        for (link, cap) in self.links {
            if link.lo() == link.hi() {
                return Err(Error::SelfLoop(link.lo()));
            }
            for end in [link.lo(), link.hi()] {
                if end.index() >= n {
                    return Err(Error::UnknownSwitch(end));
                }
            }
            if !(cap > 0.0) || !cap.is_finite() {
                return Err(Error::NonPositiveCapacity(cap));
            }
            if links.insert(link, cap).is_some() {
                return Err(Error::DuplicateLink(link));
            }
            adjacency[link.lo().index()].push(link.hi());
            adjacency[link.hi().index()].push(link.lo());
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        if let Some(bad) = self.hosts.iter().find(|s| s.index() >= n) {
            return Err(Error::UnknownSwitch(*bad));
        }
        Ok(Topology {
            adjacency,
            links,
            hosts: self.hosts,
        })
    }
}

/// A simple switching path of at least one hop.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    nodes: Vec<SwitchId>,
}

impl Path {
    pub fn new(topology: &Topology, nodes: Vec<SwitchId>) -> Result<Path> {
        if nodes.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "needs at least one hop, got {} switch(es)",
                nodes.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for s in &nodes {
            if !topology.has_switch(*s) {
                return Err(Error::UnknownSwitch(*s));
            }
            if !seen.insert(*s) {
                return Err(Error::InvalidPath(format!("switch {s} repeats")));
            }
        }
        for w in nodes.windows(2) {
            let link = Link::new(w[0], w[1]);
            if !topology.has_link(&link) {
                return Err(Error::InvalidPath(format!("no link {link}")));
            }
        }
        Ok(Path { nodes })
    }

    pub fn from_ids(topology: &Topology, ids: &[u32]) -> Result<Path> {
        Path::new(topology, ids.iter().map(|i| SwitchId(*i)).collect())
    }

    /// Builds a path the caller has already validated.
    pub(crate) fn trusted(nodes: Vec<SwitchId>) -> Path {
        debug_assert!(nodes.len() >= 2);
        Path { nodes }
    }

    pub fn nodes(&self) -> &[SwitchId] {
        &self.nodes
    }

    pub fn source(&self) -> SwitchId {
        self.nodes[0]
    }

    pub fn target(&self) -> SwitchId {
        *self.nodes.last().unwrap()
    }

    pub fn hops(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.nodes.windows(2).map(|w| Link::new(w[0], w[1]))
    }

    pub fn dir_links(&self) -> impl Iterator<Item = DirLink> + '_ {
        self.nodes.windows(2).map(|w| DirLink::new(w[0], w[1]))
    }

    pub fn interior(&self) -> &[SwitchId] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    pub fn contains_switch(&self, s: SwitchId) -> bool {
        self.nodes.contains(&s)
    }

    pub fn contains_link(&self, link: &Link) -> bool {
        self.links().any(|l| l == *link)
    }

    /// Two-link sub-paths in path order.
    pub fn edge_pairs(&self) -> impl Iterator<Item = EdgePair> + '_ {
        self.nodes
            .windows(3)
            .map(|w| EdgePair::new(Link::new(w[0], w[1]), Link::new(w[1], w[2])).unwrap())
    }

    pub fn reversed(&self) -> Path {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        Path { nodes }
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.nodes.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Two distinct links sharing exactly one switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgePair {
    first: Link,
    second: Link,
    shared: SwitchId,
}

impl EdgePair {
    /// Returns `None` unless the links are distinct and adjacent. The pair is
    /// unordered, so `first` is always the smaller link.
    pub fn new(x: Link, y: Link) -> Option<EdgePair> {
        let shared = x.shared_switch(&y)?;
        let (first, second) = if x < y { (x, y) } else { (y, x) };
        Some(EdgePair {
            first,
            second,
            shared,
        })
    }

    pub fn first(&self) -> Link {
        self.first
    }

    pub fn second(&self) -> Link {
        self.second
    }

    pub fn shared(&self) -> SwitchId {
        self.shared
    }
}

impl fmt::Display for EdgePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.first, self.second)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VlanTag(u16);

impl VlanTag {
    pub fn new(tag: u16) -> Option<VlanTag> {
        (1..=MAX_VLAN_TAG).contains(&tag).then_some(VlanTag(tag))
    }

    pub fn get(self) -> u16 {
        self.0
    }
}

impl fmt::Display for VlanTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A tree of the topology bound to one VLAN tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VlanTree {
    pub tag: VlanTag,
    pub edges: BTreeSet<Link>,
}

impl VlanTree {
    /// The unique switch sequence from `from` to `to` inside the tree.
    pub fn route(&self, topology: &Topology, from: SwitchId, to: SwitchId) -> Option<Vec<SwitchId>> {
        crate::graph::tree_route(topology.switch_count(), &self.edges, from, to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Demand {
    pub src: HostId,
    pub dst: HostId,
    pub rate_mbps: f64,
}

impl Demand {
    pub fn new(src: u32, dst: u32, rate_mbps: f64) -> Demand {
        Demand {
            src: HostId(src),
            dst: HostId(dst),
            rate_mbps,
        }
    }
}

/// Offered load between host pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficMatrix {
    demands: Vec<Demand>,
}

impl TrafficMatrix {
    pub fn new(topology: &Topology, demands: Vec<Demand>) -> Result<TrafficMatrix> {
        for d in &demands {
            topology.host_switch(d.src)?;
            topology.host_switch(d.dst)?;
            Self::check(d)?;
        }
        Ok(TrafficMatrix { demands })
    }

    fn check(d: &Demand) -> Result<()> {
        let reason = if d.src == d.dst {
            "source equals destination"
        } else if !(d.rate_mbps > 0.0) || !d.rate_mbps.is_finite() {
            "rate must be positive"
        } else {
            return Ok(());
        };
        Err(Error::InvalidDemand {
            src: d.src,
            dst: d.dst,
            reason: reason.into(),
        })
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    pub fn total_mbps(&self) -> f64 {
        self.demands.iter().fold(0.0, |a, d| a + d.rate_mbps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathRole {
    Primary,
    Backup,
}

impl fmt::Display for PathRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathRole::Primary => "primary",
            PathRole::Backup => "backup",
        })
    }
}

/// A path together with the demand it serves.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutedPath {
    /// Identifies the flow; primary and backup of one demand share it.
    pub flow: usize,
    pub demand: Demand,
    pub role: PathRole,
    pub path: Path,
}

/// The set of selected paths handed to aggregation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathSet {
    entries: Vec<RoutedPath>,
}

impl PathSet {
    pub fn new(topology: &Topology, entries: Vec<RoutedPath>) -> Result<PathSet> {
        for e in &entries {
            let src = topology.host_switch(e.demand.src)?;
            let dst = topology.host_switch(e.demand.dst)?;
            Path::new(topology, e.path.nodes().to_vec())?;
            if e.path.source() != src || e.path.target() != dst {
                return Err(Error::InvalidPath(format!(
                    "{} does not join switches {src} and {dst} of demand {} -> {}",
                    e.path, e.demand.src, e.demand.dst
                )));
            }
        }
        Ok(PathSet { entries })
    }

    pub(crate) fn from_trusted(entries: Vec<RoutedPath>) -> PathSet {
        PathSet { entries }
    }

    pub fn entries(&self) -> &[RoutedPath] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// True iff `edges` is acyclic, spans every switch and has `|switches| - 1`
/// links. Every edge must belong to the topology.
pub fn is_spanning_tree<'a>(
    topology: &Topology,
    edges: impl IntoIterator<Item = &'a Link>,
) -> Result<bool> {
    let mut sets = DisjointSets::new(topology.switch_count());
    let mut count = 0usize;
    let mut acyclic = true;
    for link in edges {
        topology.require_link(link)?;
        count += 1;
        if !sets.union(link.lo().index(), link.hi().index()) {
            acyclic = false;
        }
    }
    Ok(acyclic && count + 1 == topology.switch_count() && sets.set_count() == 1)
}

/// True iff `edges` contains no cycle.
pub fn is_acyclic<'a>(switch_count: usize, edges: impl IntoIterator<Item = &'a Link>) -> bool {
    let mut sets = DisjointSets::new(switch_count);
    edges
        .into_iter()
        .all(|l| sets.union(l.lo().index(), l.hi().index()))
}

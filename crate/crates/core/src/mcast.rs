//! Link-layer multicast driven by IGMP snooping.
//!
//! Members join a group by sending a join toward the group's root host.
//! Every switch the join crosses records the port it arrived on, so the
//! recorded ports of a group always form the union of the member-to-root
//! routes. Multicast frames from the root are copied only onto those ports.
//!
//! Joins follow the route unicast traffic to the root would take: the unique
//! path in a given VLAN tree, or the breadth-first shortest-path tree grown
//! from the root's switch (lowest switch id first).
//!
//! Reliability comes from positive acknowledgements: after one multicast
//! send the root waits for a timeout and then unicasts the frame again to
//! every receiver that has not acknowledged, round after round.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregate::{aggregate_paths, assign_vlans, complete_tree, AggregationResult};
use crate::error::{Error, Result};
use crate::graph::{bfs_parents, climb, tree_route, DisjointSets};
use crate::netmodel::{
    Demand, HostId, Link, Path, PathRole, PathSet, RoutedPath, SwitchId, Topology, VlanTree,
};

pub type GroupId = u32;

/// Group tables a commodity switch can hold.
pub const DEFAULT_GROUP_LIMIT: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MulticastGroup {
    pub id: GroupId,
    pub root: HostId,
    /// Receivers. The root may list itself.
    pub members: BTreeSet<HostId>,
}

impl MulticastGroup {
    pub fn new(id: GroupId, root: u32, members: impl IntoIterator<Item = u32>) -> Result<Self> {
        let members: BTreeSet<HostId> = members.into_iter().map(HostId).collect();
        if members.is_empty() {
            return Err(Error::InvalidGroup(format!("group {id} has no members")));
        }
        Ok(MulticastGroup {
            id,
            root: HostId(root),
            members,
        })
    }

    fn check(&self, topology: &Topology) -> Result<()> {
        topology.host_switch(self.root)?;
        for &m in &self.members {
            topology.host_switch(m)?;
        }
        Ok(())
    }
}

/// How frames travel between a member and the root.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TreeRouting {
    #[default]
    ShortestPath,
    Vlan(VlanTree),
}

/// Route from every switch to `root`, as switch sequences ending at `root`.
fn routes_to(topology: &Topology, root: SwitchId, routing: &TreeRouting) -> Vec<Option<Vec<SwitchId>>> {
    match routing {
        TreeRouting::ShortestPath => {
            let parent = bfs_parents(topology, root);
            topology.switches().map(|s| climb(&parent, root, s)).collect()
        }
        TreeRouting::Vlan(tree) => topology
            .switches()
            .map(|s| tree_route(topology.switch_count(), &tree.edges, s, root))
            .collect(),
    }
}

/// A forwarding port: a directly attached host or the link to a neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Port {
    Host(HostId),
    Link(SwitchId),
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Port::Host(h) => write!(f, "h{h}"),
            Port::Link(s) => write!(f, "s{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IgmpKind {
    Join,
    Leave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IgmpMessage {
    pub kind: IgmpKind,
    pub group: GroupId,
    pub host: HostId,
}

impl IgmpMessage {
    pub fn join(group: GroupId, host: u32) -> Self {
        IgmpMessage {
            kind: IgmpKind::Join,
            group,
            host: HostId(host),
        }
    }

    pub fn leave(group: GroupId, host: u32) -> Self {
        IgmpMessage {
            kind: IgmpKind::Leave,
            group,
            host: HostId(host),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IgmpEffect {
    Applied,
    /// Join from a host that is already a member.
    DuplicateJoin,
    /// Leave from a host that is not a member.
    IgnoredLeave,
}

impl IgmpEffect {
    pub fn is_warning(self) -> bool {
        self != IgmpEffect::Applied
    }
}

#[derive(Debug, Clone, PartialEq)]
struct GroupEntry {
    root: HostId,
    routes: Vec<Option<Vec<SwitchId>>>,
    members: BTreeSet<HostId>,
}

/// Per-switch snooping tables: group to forwarding ports, with a count of
/// the members reached through each port.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SnoopState {
    tables: BTreeMap<SwitchId, BTreeMap<GroupId, BTreeMap<Port, u32>>>,
    groups: BTreeMap<GroupId, GroupEntry>,
}

/// Ports per group per switch.
pub type SnoopSnapshot = BTreeMap<SwitchId, BTreeMap<GroupId, BTreeSet<Port>>>;

impl SnoopState {
    pub fn new() -> Self {
        SnoopState::default()
    }

    /// Declares a group and the routing its joins will follow.
    pub fn register_group(
        &mut self,
        topology: &Topology,
        group: GroupId,
        root: HostId,
        routing: &TreeRouting,
    ) -> Result<()> {
        let root_switch = topology.host_switch(root)?;
        if let Some(g) = self.groups.get(&group) {
            if g.root != root {
                return Err(Error::InvalidGroup(format!(
                    "group {group} already rooted at host {}",
                    g.root
                )));
            }
            return Ok(());
        }
        self.groups.insert(
            group,
            GroupEntry {
                root,
                routes: routes_to(topology, root_switch, routing),
                members: BTreeSet::new(),
            },
        );
        Ok(())
    }

    /// Applies one join or leave. Joins add the arrival port on every switch
    /// between the member and the root's switch; leaves undo exactly that.
    pub fn process_igmp(&mut self, topology: &Topology, msg: IgmpMessage) -> Result<IgmpEffect> {
        let host_switch = topology.host_switch(msg.host)?;
        let entry = self
            .groups
            .get_mut(&msg.group)
            .ok_or_else(|| Error::InvalidGroup(format!("group {} is not registered", msg.group)))?;
        let delta: i64 = match msg.kind {
            IgmpKind::Join if entry.members.contains(&msg.host) => return Ok(IgmpEffect::DuplicateJoin),
            IgmpKind::Leave if !entry.members.contains(&msg.host) => return Ok(IgmpEffect::IgnoredLeave),
            IgmpKind::Join => 1,
            IgmpKind::Leave => -1,
        };
        let route = entry.routes[host_switch.index()].clone().ok_or_else(|| {
            Error::InvalidGroup(format!(
                "host {} cannot reach the root of group {}",
                msg.host, msg.group
            ))
        })?;
        if delta > 0 {
            entry.members.insert(msg.host);
        } else {
            entry.members.remove(&msg.host);
        }
        let mut arrival = Port::Host(msg.host);
        for &s in &route {
            let table = self.tables.entry(s).or_default();
            let ports = table.entry(msg.group).or_default();
            let count = ports.entry(arrival).or_insert(0);
            *count = (*count as i64 + delta) as u32;
            if *count == 0 {
                ports.remove(&arrival);
            }
            if ports.is_empty() {
                table.remove(&msg.group);
            }
            if table.is_empty() {
                self.tables.remove(&s);
            }
            arrival = Port::Link(s);
        }
        Ok(IgmpEffect::Applied)
    }

    pub fn members(&self, group: GroupId) -> Option<&BTreeSet<HostId>> {
        self.groups.get(&group).map(|g| &g.members)
    }

    pub fn ports(&self, switch: SwitchId, group: GroupId) -> BTreeSet<Port> {
        self.tables
            .get(&switch)
            .and_then(|t| t.get(&group))
            .map(|p| p.keys().copied().collect())
            .unwrap_or_default()
    }

    /// Groups with forwarding state on `switch`.
    pub fn group_count(&self, switch: SwitchId) -> usize {
        self.tables.get(&switch).map_or(0, BTreeMap::len)
    }

    /// Links carrying the group's traffic.
    pub fn forwarding_links(&self, group: GroupId) -> BTreeSet<Link> {
        let mut out = BTreeSet::new();
        for (&s, table) in &self.tables {
            if let Some(ports) = table.get(&group) {
                for p in ports.keys() {
                    if let Port::Link(n) = p {
                        out.insert(Link::new(s, *n));
                    }
                }
            }
        }
        out
    }

    pub fn snapshot(&self) -> SnoopSnapshot {
        self.tables
            .iter()
            .map(|(&s, t)| {
                (
                    s,
                    t.iter()
                        .map(|(&g, p)| (g, p.keys().copied().collect()))
                        .collect(),
                )
            })
            .collect()
    }
}

/// Switches holding more groups than `limit`, with their table sizes.
pub fn check_group_limits(state: &SnoopState, limit: usize) -> Result<Vec<(SwitchId, usize)>> {
    if limit == 0 {
        return Err(Error::InvalidGroup("group limit must be positive".into()));
    }
    Ok(state
        .tables
        .iter()
        .map(|(&s, t)| (s, t.len()))
        .filter(|&(_, n)| n > limit)
        .collect())
}

/// A group's distribution tree, rooted at the root host's switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MulticastTree {
    pub group: GroupId,
    pub root: SwitchId,
    pub links: BTreeSet<Link>,
    /// Switches with attached members.
    pub member_switches: BTreeSet<SwitchId>,
}

impl MulticastTree {
    /// Root-to-leaf paths covering every link.
    pub fn branches(&self, topology: &Topology) -> Vec<Path> {
        let mut degree: BTreeMap<SwitchId, usize> = BTreeMap::new();
        for l in &self.links {
            *degree.entry(l.lo()).or_insert(0) += 1;
            *degree.entry(l.hi()).or_insert(0) += 1;
        }
        degree
            .into_iter()
            .filter(|&(s, d)| d == 1 && s != self.root)
            .filter_map(|(leaf, _)| {
                tree_route(topology.switch_count(), &self.links, self.root, leaf).map(Path::trusted)
            })
            .collect()
    }

    /// Largest hop count from the root to a member switch.
    pub fn depth(&self, topology: &Topology) -> usize {
        self.member_switches
            .iter()
            .filter_map(|&m| tree_route(topology.switch_count(), &self.links, self.root, m))
            .map(|r| r.len() - 1)
            .max()
            .unwrap_or(0)
    }
}

/// Union of the root-to-member routes under `routing`.
pub fn build_multicast_tree(
    topology: &Topology,
    group: &MulticastGroup,
    routing: &TreeRouting,
) -> Result<MulticastTree> {
    group.check(topology)?;
    let root = topology.host_switch(group.root)?;
    let routes = routes_to(topology, root, routing);
    let mut links = BTreeSet::new();
    let mut member_switches = BTreeSet::new();
    for &m in &group.members {
        let s = topology.host_switch(m)?;
        let route = routes[s.index()].as_ref().ok_or_else(|| {
            Error::InvalidGroup(format!(
                "member host {m} on switch {s} cannot reach root host {} of group {}",
                group.root, group.id
            ))
        })?;
        links.extend(route.windows(2).map(|w| Link::new(w[0], w[1])));
        member_switches.insert(s);
    }
    Ok(MulticastTree {
        group: group.id,
        root,
        links,
        member_switches,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticastAggregation {
    /// Root-to-leaf branches; `flow` is the index of the source tree.
    pub paths: PathSet,
    pub result: AggregationResult,
    /// VLAN tree index per multicast tree; `None` for trees without links.
    pub tree_of: Vec<Option<usize>>,
}

/// Aggregates multicast trees by packing their root-to-leaf branches like
/// unicast paths. Branches of one multicast tree must share a VLAN; a tree
/// whose branches were split is moved as a whole into the first VLAN tree
/// that stays acyclic with it, or into a new one.
pub fn aggregate_multicast_trees(
    topology: &Topology,
    trees: &[MulticastTree],
) -> Result<MulticastAggregation> {
    let mut entries = Vec::new();
    for (i, t) in trees.iter().enumerate() {
        if !crate::netmodel::is_acyclic(topology.switch_count(), &t.links) {
            return Err(Error::CyclicTree);
        }
        for l in &t.links {
            topology.require_link(l)?;
        }
        for p in t.branches(topology) {
            let host = |s: SwitchId| topology.hosts_at(s).next().unwrap_or(HostId(0));
            entries.push(RoutedPath {
                flow: i,
                demand: Demand {
                    src: host(p.source()),
                    dst: host(p.target()),
                    rate_mbps: 0.0,
                },
                role: PathRole::Primary,
                path: p,
            });
        }
    }
    let paths = PathSet::from_trusted(entries);
    let mut result = aggregate_paths(topology, &paths)?;

    let mut blocks: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); trees.len()];
    for (e, &b) in paths.entries().iter().zip(&result.membership) {
        blocks[e.flow].insert(b);
    }
    if blocks.iter().any(|b| b.len() > 1) {
        let mut owner: Vec<Option<usize>> = blocks.iter().map(|b| b.first().copied()).collect();
        for (i, b) in blocks.iter().enumerate() {
            if b.len() <= 1 {
                continue;
            }
            owner[i] = None;
            let union_of = |k: usize, owner: &[Option<usize>]| -> BTreeSet<Link> {
                owner
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| **o == Some(k))
                    .flat_map(|(j, _)| trees[j].links.iter().copied())
                    .collect()
            };
            let count = result.path_unions.len();
            let slot = (0..count).find(|&k| {
                let mut sets = DisjointSets::new(topology.switch_count());
                union_of(k, &owner)
                    .union(&trees[i].links)
                    .all(|l| sets.union(l.lo().index(), l.hi().index()))
            });
            owner[i] = Some(slot.unwrap_or(count));
            if slot.is_none() {
                result.path_unions.push(BTreeSet::new());
            }
            for k in 0..result.path_unions.len() {
                result.path_unions[k] = union_of(k, &owner);
            }
        }
        // drop emptied trees and renumber
        let used: Vec<usize> = (0..result.path_unions.len())
            .filter(|&k| !result.path_unions[k].is_empty())
            .collect();
        let renumber: BTreeMap<usize, usize> = used.iter().enumerate().map(|(n, &k)| (k, n)).collect();
        let unions: Vec<BTreeSet<Link>> = used.iter().map(|&k| result.path_unions[k].clone()).collect();
        result.membership = paths
            .entries()
            .iter()
            .map(|e| renumber[&owner[e.flow].unwrap()])
            .collect();
        let completed = unions
            .iter()
            .map(|u| complete_tree(topology, u))
            .collect::<Result<Vec<_>>>()?;
        result.trees = assign_vlans(completed)?;
        result.path_unions = unions;
    }

    let mut tree_of = vec![None; trees.len()];
    for (e, &b) in paths.entries().iter().zip(&result.membership) {
        tree_of[e.flow] = Some(b);
    }
    Ok(MulticastAggregation {
        paths,
        result,
        tree_of,
    })
}

/// Frame loss applied to data frames; acknowledgements are never lost.
#[derive(Debug, Clone, PartialEq)]
pub enum LossModel {
    Lossless,
    /// Each receiver independently misses each transmission with
    /// probability `p`.
    Bernoulli { p: f64 },
    /// Each link drops each frame with probability `p`. A multicast loss on
    /// a shared link hits every receiver below it.
    PerHop { p: f64 },
    /// Deterministic losses: `(attempt, receiver)` pairs, where attempt 0 is
    /// the multicast send and attempt `k` the `k`-th unicast retry.
    Scripted(BTreeSet<(u32, HostId)>),
}

impl LossModel {
    fn check(&self) -> Result<()> {
        match self {
            LossModel::Bernoulli { p } | LossModel::PerHop { p } if !(0.0..=1.0).contains(p) => Err(
                Error::InvalidGroup(format!("loss probability {p} is outside [0, 1]")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliableConfig {
    pub hop_latency_ms: f64,
    /// Defaults to twice the tree depth times the hop latency.
    pub timeout_ms: Option<f64>,
    /// Unicast retries per receiver; `None` retries until delivered.
    pub max_retries: Option<u32>,
}

impl Default for ReliableConfig {
    fn default() -> Self {
        ReliableConfig {
            hop_latency_ms: 1.0,
            timeout_ms: None,
            max_retries: Some(64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryReport {
    pub group: GroupId,
    /// Multicast send plus unicast retransmissions.
    pub transmissions: u64,
    pub retransmissions: u64,
    pub acks: u64,
    /// Transmissions each receiver needed, ascending by host.
    pub attempts: BTreeMap<HostId, u32>,
    /// Receivers given up on after the retry bound.
    pub failed: Vec<HostId>,
    pub timeout_ms: f64,
    /// Arrival of the last acknowledgement.
    pub completion_ms: f64,
}

/// Runs the acknowledgement and unicast-retry scheme for one frame.
pub fn simulate_reliable_multicast(
    topology: &Topology,
    group: &MulticastGroup,
    tree: &MulticastTree,
    loss: &LossModel,
    config: ReliableConfig,
    seed: u64,
) -> Result<DeliveryReport> {
    group.check(topology)?;
    loss.check()?;
    if tree.group != group.id || tree.root != topology.host_switch(group.root)? {
        return Err(Error::InvalidGroup(format!("tree does not belong to group {}", group.id)));
    }
    let n = topology.switch_count();
    let mut route: BTreeMap<HostId, Vec<SwitchId>> = BTreeMap::new();
    for &m in &group.members {
        let s = topology.host_switch(m)?;
        let r = tree_route(n, &tree.links, tree.root, s).ok_or_else(|| {
            Error::InvalidGroup(format!("member host {m} is not on the tree of group {}", group.id))
        })?;
        route.insert(m, r);
    }
    let timeout = config
        .timeout_ms
        .unwrap_or(2.0 * tree.depth(topology).max(1) as f64 * config.hop_latency_ms);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pending: Vec<HostId> = group.members.iter().copied().collect();
    let mut attempts: BTreeMap<HostId, u32> = BTreeMap::new();
    let mut report = DeliveryReport {
        group: group.id,
        transmissions: 0,
        retransmissions: 0,
        acks: 0,
        attempts: BTreeMap::new(),
        failed: Vec::new(),
        timeout_ms: timeout,
        completion_ms: 0.0,
    };
    let mut attempt: u32 = 0;
    while !pending.is_empty() {
        if attempt > 0 && config.max_retries.is_some_and(|max| attempt > max) {
            report.failed = pending;
            break;
        }
        let sent_at = attempt as f64 * timeout;
        // links that dropped this round's multicast frame
        let mut dropped: BTreeSet<Link> = BTreeSet::new();
        if attempt == 0 {
            report.transmissions += 1;
            if let LossModel::PerHop { p } = loss {
                for &l in &tree.links {
                    if rng.random_bool(*p) {
                        dropped.insert(l);
                    }
                }
            }
        }
        let mut still = Vec::new();
        for h in pending {
            if attempt > 0 {
                report.transmissions += 1;
                report.retransmissions += 1;
            }
            *attempts.entry(h).or_insert(0) += 1;
            let r = &route[&h];
            let lost = match loss {
                LossModel::Lossless => false,
                LossModel::Bernoulli { p } => rng.random_bool(*p),
                LossModel::PerHop { p } => {
                    if attempt == 0 {
                        r.windows(2).any(|w| dropped.contains(&Link::new(w[0], w[1])))
                    } else {
                        // draw every hop so the stream of draws is fixed
                        r.windows(2).fold(false, |acc, _| rng.random_bool(*p) || acc)
                    }
                }
                LossModel::Scripted(set) => set.contains(&(attempt, h)),
            };
            let ack_at = sent_at + 2.0 * (r.len() - 1) as f64 * config.hop_latency_ms;
            if lost || ack_at > sent_at + timeout + 1e-9 {
                still.push(h);
            } else {
                report.acks += 1;
                report.completion_ms = report.completion_ms.max(ack_at);
            }
        }
        pending = still;
        attempt += 1;
    }
    report.attempts = attempts;
    Ok(report)
}

pub const MULTICAST_CSV_HEADER: &str =
    "group,members,transmissions,retransmissions,acks,failed,timeout_ms,completion_ms";

pub fn multicast_csv_line(report: &DeliveryReport) -> String {
    format!(
        "{},{},{},{},{},{},{:.3},{:.3}",
        report.group,
        report.attempts.len(),
        report.transmissions,
        report.retransmissions,
        report.acks,
        report.failed.len(),
        report.timeout_ms,
        report.completion_ms
    )
}

pub fn write_multicast_csv(reports: &[DeliveryReport]) -> String {
    let mut out = String::from(MULTICAST_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(out, "{}", multicast_csv_line(r));
    }
    out
}

//! Status-monitor failover as a discrete-event simulation.
//!
//! A failure is noticed by the switches adjacent to it after a random
//! detection delay. Each detecting switch sends a trap to every monitor it can
//! still reach; a monitor looks up the alternate VLAN of every affected flow
//! and tells the sender to switch over. A flow recovers through the monitor
//! whose notification reaches the sender first.
//!
//! Notifications travel over any surviving path, not only over spanning-tree
//! links, at a fixed latency per switch hop.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::fmt::Write as _;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aggregate::AggregationResult;
use crate::error::{Error, Result};
use crate::graph::{hop_distances, Excluded};
use crate::netmodel::{Link, Path, PathRole, SwitchId, Topology, VlanTag};
use crate::tepath::PathAssignment;

pub const DEFAULT_DETECTION_MS: (f64, f64) = (400.0, 500.0);
pub const DEFAULT_HOP_LATENCY_MS: f64 = 1.0;
pub const DEFAULT_LOOKUP_MS: f64 = 5.0;
pub const DEFAULT_RAMP_UP_MS: f64 = 350.0;

/// A failed link, or a failed switch together with all its links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    Link(Link),
    Switch(SwitchId),
}

impl Element {
    pub fn on_path(&self, path: &Path) -> bool {
        match self {
            Element::Link(l) => path.contains_link(l),
            Element::Switch(s) => path.contains_switch(*s),
        }
    }

    fn check(&self, topology: &Topology) -> Result<()> {
        match self {
            Element::Link(l) => topology.require_link(l).map(|_| ()),
            Element::Switch(s) if topology.has_switch(*s) => Ok(()),
            Element::Switch(s) => Err(Error::UnknownSwitch(*s)),
        }
    }

    fn excluded(&self) -> Excluded {
        let mut ex = Excluded::default();
        match self {
            Element::Link(l) => {
                ex.links.insert(*l);
            }
            Element::Switch(s) => {
                ex.switches.insert(*s);
            }
        }
        ex
    }

    /// Surviving switches that notice the failure, ascending.
    fn detectors(&self, topology: &Topology) -> Vec<SwitchId> {
        match self {
            Element::Link(l) => vec![l.lo(), l.hi()],
            Element::Switch(s) => topology.neighbors(*s).to_vec(),
        }
    }

    /// The surviving switch just upstream of the failure on `path`.
    fn upstream_on(&self, path: &Path) -> Option<SwitchId> {
        let nodes = path.nodes();
        match self {
            Element::Link(l) => path
                .dir_links()
                .find(|d| d.link() == *l)
                .map(|d| d.from),
            Element::Switch(s) => {
                let at = nodes.iter().position(|n| n == s)?;
                at.checked_sub(1).map(|i| nodes[i])
            }
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Link(l) => write!(f, "link {} {}", l.lo(), l.hi()),
            Element::Switch(s) => write!(f, "switch {s}"),
        }
    }
}

/// Extra time a flow needs after switchover before it is back at full rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RampUp {
    #[default]
    Off,
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureScenario {
    pub element: Element,
    pub failure_ms: f64,
    pub detection_ms: (f64, f64),
    pub hop_latency_ms: f64,
    pub lookup_ms: f64,
    pub monitors: Vec<SwitchId>,
    pub ramp_up: RampUp,
}

impl FailureScenario {
    pub fn new(element: Element, failure_ms: f64, monitors: Vec<SwitchId>) -> Self {
        FailureScenario {
            element,
            failure_ms,
            detection_ms: DEFAULT_DETECTION_MS,
            hop_latency_ms: DEFAULT_HOP_LATENCY_MS,
            lookup_ms: DEFAULT_LOOKUP_MS,
            monitors,
            ramp_up: RampUp::Off,
        }
    }

    pub fn with_detection(mut self, lo: f64, hi: f64) -> Self {
        self.detection_ms = (lo, hi);
        self
    }

    pub fn with_hop_latency(mut self, ms: f64) -> Self {
        self.hop_latency_ms = ms;
        self
    }

    pub fn with_lookup(mut self, ms: f64) -> Self {
        self.lookup_ms = ms;
        self
    }

    pub fn with_ramp_up(mut self, ramp: RampUp) -> Self {
        self.ramp_up = ramp;
        self
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let (lo, hi) = self.detection_ms;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return bad(format!("detection interval [{lo}, {hi}] is not a valid range"));
        }
        for (what, v) in [
            ("failure time", self.failure_ms),
            ("hop latency", self.hop_latency_ms),
            ("lookup cost", self.lookup_ms),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{what} must be a non-negative number, got {v}"));
            }
        }
        match self.ramp_up {
            RampUp::Off => {}
            RampUp::Fixed(v) if v.is_finite() && v >= 0.0 => {}
            RampUp::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi => {}
            r => return bad(format!("ramp-up {r:?} is not valid")),
        }
        if self.monitors.is_empty() {
            return bad("at least one monitor is required".into());
        }
        for &m in &self.monitors {
            if !topology.has_switch(m) {
                return Err(Error::UnknownSwitch(m));
            }
        }
        self.element.check(topology)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Recovered,
    /// The failed element lies on the backup path as well.
    BackupHit,
    NoBackup,
    /// A source or destination switch failed.
    EndpointFailed,
    /// No monitor can be reached from the detecting switch.
    MonitorUnreachable,
    /// Monitors hear the trap but none can reach the sender.
    SenderUnreachable,
}

impl Outcome {
    pub fn is_recovered(self) -> bool {
        self == Outcome::Recovered
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Recovered => "recovered",
            Outcome::BackupHit => "backup-hit",
            Outcome::NoBackup => "no-backup",
            Outcome::EndpointFailed => "endpoint-failed",
            Outcome::MonitorUnreachable => "monitor-unreachable",
            Outcome::SenderUnreachable => "sender-unreachable",
        })
    }
}

/// Timeline of one affected flow. Times are absolute milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecovery {
    /// Demand index in the assignment.
    pub flow: usize,
    pub detecting_switch: Option<SwitchId>,
    pub detected_ms: Option<f64>,
    pub monitor: Option<SwitchId>,
    /// Arrival of the trap at the chosen monitor.
    pub monitor_ms: Option<f64>,
    pub sender_ms: Option<f64>,
    pub ramp_up_ms: f64,
    pub backup_vlan: Option<VlanTag>,
    pub outcome: Outcome,
}

impl FlowRecovery {
    /// Time from failure until the flow is back at full rate.
    pub fn downtime_ms(&self, failure_ms: f64) -> Option<f64> {
        self.sender_ms.map(|t| t - failure_ms + self.ramp_up_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Failure,
    Detect { switch: SwitchId },
    TrapArrive { monitor: SwitchId, from: SwitchId },
    LookupDone { monitor: SwitchId, from: SwitchId },
    SenderNotified { flow: usize, monitor: SwitchId },
    Resumed { flow: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub at_ms: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub element: Element,
    pub failure_ms: f64,
    /// Affected flows, ascending by demand index.
    pub flows: Vec<FlowRecovery>,
    /// Every processed event in time order.
    pub events: Vec<Event>,
}

impl RecoveryReport {
    pub fn flow(&self, flow: usize) -> Option<&FlowRecovery> {
        self.flows.iter().find(|f| f.flow == flow)
    }

    /// Zero for unaffected flows, `None` when the flow never recovers.
    pub fn downtime_ms(&self, flow: usize) -> Option<f64> {
        match self.flow(flow) {
            None => Some(0.0),
            Some(f) => f.downtime_ms(self.failure_ms),
        }
    }

    pub fn recovered(&self) -> impl Iterator<Item = &FlowRecovery> {
        self.flows.iter().filter(|f| f.outcome.is_recovered())
    }

    pub fn unrecoverable(&self) -> impl Iterator<Item = &FlowRecovery> {
        self.flows.iter().filter(|f| !f.outcome.is_recovered())
    }

    pub fn max_downtime_ms(&self) -> Option<f64> {
        self.recovered()
            .filter_map(|f| f.downtime_ms(self.failure_ms))
            .reduce(f64::max)
    }
}

/// Demands whose primary path traverses `element`, ascending.
pub fn affected_flows(
    topology: &Topology,
    assignment: &PathAssignment,
    element: Element,
) -> Result<Vec<usize>> {
    element.check(topology)?;
    Ok(assignment
        .admitted()
        .filter(|(_, r)| r.primary().is_some_and(|p| element.on_path(p)))
        .map(|(i, _)| i)
        .collect())
}

/// Whether each monitor can be reached from `detecting` once `element` is
/// gone, in `monitors` order.
pub fn monitor_reachable(
    topology: &Topology,
    element: Element,
    detecting: SwitchId,
    monitors: &[SwitchId],
) -> Vec<bool> {
    let dist = hop_distances(topology, detecting, &element.excluded());
    monitors
        .iter()
        .map(|m| dist.get(m.index()).is_some_and(Option::is_some))
        .collect()
}

#[derive(PartialEq)]
struct Queued {
    at_ms: f64,
    seq: u64,
    kind: EventKind,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.at_ms
            .total_cmp(&other.at_ms)
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

struct Agenda {
    heap: BinaryHeap<Reverse<Queued>>,
    seq: u64,
}

impl Agenda {
    fn push(&mut self, at_ms: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Reverse(Queued {
            at_ms,
            seq: self.seq,
            kind,
        }));
    }
}

fn sample(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    Uniform::new_inclusive(lo, hi).unwrap().sample(rng)
}

/// Runs the failover protocol for one failure. Detection delays are drawn
/// per detecting switch in ascending id order, then ramp-up penalties per
/// affected flow in ascending demand order.
pub fn simulate_failover(
    topology: &Topology,
    assignment: &PathAssignment,
    aggregation: &AggregationResult,
    scenario: &FailureScenario,
    seed: u64,
) -> Result<RecoveryReport> {
    scenario.validate(topology)?;
    let element = scenario.element;
    let t0 = scenario.failure_ms;
    let excluded = element.excluded();
    let paths = assignment.path_set();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let detect_delay: BTreeMap<SwitchId, f64> = element
        .detectors(topology)
        .into_iter()
        .map(|s| (s, sample(&mut rng, scenario.detection_ms.0, scenario.detection_ms.1)))
        .collect();

    let mut flows: Vec<FlowRecovery> = Vec::new();
    for i in affected_flows(topology, assignment, element)? {
        let route = &assignment.routes()[i];
        let primary = route.primary().unwrap();
        let endpoint_failed = matches!(element, Element::Switch(s)
            if s == primary.source() || s == primary.target());
        let detecting = if endpoint_failed {
            None
        } else {
            element.upstream_on(primary)
        };
        let outcome = if endpoint_failed {
            Outcome::EndpointFailed
        } else {
            match route.backup() {
                None => Outcome::NoBackup,
                Some(b) if element.on_path(b) => Outcome::BackupHit,
                Some(_) => Outcome::Recovered,
            }
        };
        let ramp_up_ms = match scenario.ramp_up {
            RampUp::Off => 0.0,
            RampUp::Fixed(v) => v,
            RampUp::Uniform { lo, hi } => sample(&mut rng, lo, hi),
        };
        flows.push(FlowRecovery {
            flow: i,
            detecting_switch: detecting,
            detected_ms: detecting.map(|d| t0 + detect_delay[&d]),
            monitor: None,
            monitor_ms: None,
            sender_ms: None,
            ramp_up_ms,
            backup_vlan: route
                .backup()
                .and_then(|_| aggregation.vlan_of(&paths, i, PathRole::Backup)),
            outcome,
        });
    }

    let mut distance_cache: BTreeMap<SwitchId, Vec<Option<usize>>> = BTreeMap::new();
    let mut hops = |from: SwitchId, to: SwitchId| {
        distance_cache
            .entry(from)
            .or_insert_with(|| hop_distances(topology, from, &excluded))[to.index()]
    };

    let mut agenda = Agenda {
        heap: BinaryHeap::new(),
        seq: 0,
    };
    let mut events = Vec::new();
    agenda.push(t0, EventKind::Failure);
    while let Some(Reverse(q)) = agenda.heap.pop() {
        let now = q.at_ms;
        events.push(Event {
            at_ms: now,
            kind: q.kind,
        });
        match q.kind {
            EventKind::Failure => {
                for (&s, &delay) in &detect_delay {
                    agenda.push(now + delay, EventKind::Detect { switch: s });
                }
            }
            EventKind::Detect { switch } => {
                for &m in &scenario.monitors {
                    if let Some(h) = hops(switch, m) {
                        let at = now + h as f64 * scenario.hop_latency_ms;
                        agenda.push(at, EventKind::TrapArrive { monitor: m, from: switch });
                    }
                }
            }
            EventKind::TrapArrive { monitor, from } => {
                agenda.push(now + scenario.lookup_ms, EventKind::LookupDone { monitor, from });
            }
            EventKind::LookupDone { monitor, from } => {
                for f in &flows {
                    if f.outcome != Outcome::Recovered || f.detecting_switch != Some(from) {
                        continue;
                    }
                    let sender = assignment.routes()[f.flow].primary().unwrap().source();
                    if let Some(h) = hops(monitor, sender) {
                        let at = now + h as f64 * scenario.hop_latency_ms;
                        agenda.push(at, EventKind::SenderNotified { flow: f.flow, monitor });
                    }
                }
            }
            EventKind::SenderNotified { flow, monitor } => {
                let f = flows.iter_mut().find(|f| f.flow == flow).unwrap();
                if f.sender_ms.is_none() {
                    f.sender_ms = Some(now);
                    f.monitor = Some(monitor);
                    agenda.push(now + f.ramp_up_ms, EventKind::Resumed { flow });
                }
            }
            EventKind::Resumed { .. } => {}
        }
    }

    for f in &mut flows {
        let Some(d) = f.detecting_switch else { continue };
        if f.outcome != Outcome::Recovered {
            continue;
        }
        match f.monitor {
            Some(m) => {
                f.monitor_ms = events.iter().find_map(|e| match e.kind {
                    EventKind::TrapArrive { monitor, from } if monitor == m && from == d => {
                        Some(e.at_ms)
                    }
                    _ => None,
                });
            }
            None => {
                let heard = scenario.monitors.iter().any(|&m| hops(d, m).is_some());
                f.outcome = if heard {
                    Outcome::SenderUnreachable
                } else {
                    Outcome::MonitorUnreachable
                };
            }
        }
    }

    Ok(RecoveryReport {
        element,
        failure_ms: t0,
        flows,
        events,
    })
}

pub const FAILOVER_CSV_HEADER: &str = "flow,failure_ms,detected_ms,monitor_ms,sender_ms,downtime_ms,outcome";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

pub fn failover_csv_lines(report: &RecoveryReport) -> Vec<String> {
    report
        .flows
        .iter()
        .map(|f| {
            format!(
                "{},{:.3},{},{},{},{},{}",
                f.flow,
                report.failure_ms,
                opt(f.detected_ms),
                opt(f.monitor_ms),
                opt(f.sender_ms),
                opt(f.downtime_ms(report.failure_ms)),
                f.outcome
            )
        })
        .collect()
}

pub fn write_failover_csv(report: &RecoveryReport) -> String {
    let mut out = String::from(FAILOVER_CSV_HEADER);
    out.push('\n');
    for line in failover_csv_lines(report) {
        let _ = writeln!(out, "{line}");
    }
    out
}

/// Ten switches with host A on switch 0 and host B on switch 9. Load
/// balancing picks 0-3-6-7-9 for A to B with backup 0-1-4-5-9; switches 2
/// and 8 are leaves off 1 and 7.
pub fn backup_example() -> Topology {
    Topology::builder()
        .switches(10)
        .link(0, 3, 100.0)
        .link(3, 6, 100.0)
        .link(6, 7, 100.0)
        .link(7, 9, 100.0)
        .link(0, 1, 50.0)
        .link(1, 4, 50.0)
        .link(4, 5, 50.0)
        .link(5, 9, 50.0)
        .link(1, 2, 100.0)
        .link(7, 8, 100.0)
        .host(0)
        .host(9)
        .build()
        .expect("static topology")
}

//! Runs a scenario's experiments in a fixed order (throughput, failover,
//! multicast, policing), checks invariants on every result and renders the
//! artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use vlantree::aggregate::aggregate_paths;
use vlantree::failover::{
    failover_csv_lines, simulate_failover, FailureScenario, Outcome, RecoveryReport, FAILOVER_CSV_HEADER,
};
use vlantree::flowsim::{route, throughput_csv_line, Mode, ThroughputResult, THROUGHPUT_CSV_HEADER};
use vlantree::mcast::{
    aggregate_multicast_trees, build_multicast_tree, check_group_limits, multicast_csv_line,
    simulate_reliable_multicast, DeliveryReport, IgmpMessage, ReliableConfig, SnoopState, TreeRouting,
    MULTICAST_CSV_HEADER,
};
use vlantree::netmodel::text::{parse_demands, parse_network};
use vlantree::netmodel::{build_grid, uniform_matrix, HostId, Link, Topology, TrafficMatrix};
use vlantree::qos::{run_policed, write_policing_csv, RateProfile};
use vlantree::tepath::PathAssignment;

use crate::error::CliError;
use crate::scenario::{Scenario, TopologySource, TrafficSource};

pub const THROUGHPUT_CSV: &str = "throughput.csv";
pub const FAILOVER_CSV: &str = "failover.csv";
pub const MULTICAST_CSV: &str = "multicast.csv";
pub const POLICING_CSV: &str = "policing.csv";
pub const SUMMARY_TXT: &str = "summary.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub property: &'static str,
    pub detail: String,
}

/// Everything a run produces, in memory.
#[derive(Debug, Clone, Default)]
pub struct Report {
    /// Artifact file name and contents, in experiment order.
    pub files: Vec<(&'static str, String)>,
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| *n == name).map(|(_, c)| c.as_str())
    }

    pub fn summary(&self) -> &str {
        self.file(SUMMARY_TXT).unwrap_or("")
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (name, content) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }

    /// The first violation as an error, if any.
    pub fn status(&self) -> Result<(), CliError> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(CliError::Invariant {
                property: v.property.into(),
                detail: v.detail.clone(),
            }),
        }
    }
}

fn read(base: &Path, p: &Path) -> Result<String, CliError> {
    let path = base.join(p);
    std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))
}

fn in_file(path: &Path, e: vlantree::Error) -> CliError {
    CliError::Scenario(format!("{}: {e}", path.display()))
}

/// Builds the topology and traffic matrix, resolving files against `base`.
pub fn load(scenario: &Scenario, base: &Path) -> Result<(Topology, TrafficMatrix), CliError> {
    let topology = match &scenario.topology {
        TopologySource::Grid { side, capacity_mbps } => build_grid(*side, *capacity_mbps, 1)?,
        TopologySource::File(p) => {
            let net = parse_network(&read(base, p)?).map_err(|e| in_file(p, e))?;
            if !net.matrix.is_empty() {
                return Err(CliError::Scenario(format!(
                    "{}: topology file holds demands; move them to a `traffic` file",
                    p.display()
                )));
            }
            net.topology
        }
    };
    let matrix = match &scenario.traffic {
        TrafficSource::Uniform(rate) => uniform_matrix(&topology, *rate)?,
        TrafficSource::File(p) => parse_demands(&read(base, p)?, &topology).map_err(|e| in_file(p, e))?,
    };
    Ok((topology, matrix))
}

/// Seed of repetition `trial` of item `item` in one experiment.
fn derive_seed(seed: u64, item: usize, trials: u32, trial: u32) -> u64 {
    seed.wrapping_add(item as u64 * u64::from(trials) + u64::from(trial))
}

struct Checker(Vec<Violation>);

impl Checker {
    fn check(&mut self, ok: bool, property: &'static str, detail: impl FnOnce() -> String) {
        if !ok {
            self.0.push(Violation { property, detail: detail() });
        }
    }
}

fn check_throughput(c: &mut Checker, t: &Topology, m: &TrafficMatrix, r: &ThroughputResult) {
    for (l, cap) in t.links() {
        for d in l.directions() {
            let load = r.link_loads.get(d);
            c.check(load <= cap + 1e-9, "capacity", || format!("{}: {d} carries {load} of {cap}", r.mode));
        }
    }
    let sum = r.admitted.iter().fold(0.0, |a, &i| a + m.demands()[i].rate_mbps);
    c.check((sum - r.aggregate_mbps).abs() < 1e-6, "aggregate", || {
        format!("{}: aggregate {} but admitted rates sum to {sum}", r.mode, r.aggregate_mbps)
    });
    check_disjoint(c, &r.assignment);
}

fn check_disjoint(c: &mut Checker, a: &PathAssignment) {
    for (i, route) in a.admitted() {
        if let (Some(p), Some(b)) = (route.primary(), route.backup()) {
            let links: BTreeSet<Link> = p.links().collect();
            let ok = b.links().all(|l| !links.contains(&l))
                && p.interior().iter().all(|s| !b.contains_switch(*s))
                && b.interior().iter().all(|s| !p.contains_switch(*s));
            c.check(ok, "backup-disjointness", || format!("demand {i}: {p} and {b}"));
        }
    }
}

fn check_failover(c: &mut Checker, s: &FailureScenario, a: &PathAssignment, rep: &RecoveryReport) {
    let ordered = rep.events.windows(2).all(|w| w[0].at_ms <= w[1].at_ms);
    c.check(ordered, "event-order", || format!("{}: events out of order", s.element));
    for f in rep.flows.iter().filter(|f| f.outcome == Outcome::Recovered) {
        let (d, m, n) = (f.detected_ms, f.monitor_ms, f.sender_ms);
        let chain = matches!((d, m, n), (Some(d), Some(m), Some(n)) if s.failure_ms <= d && d <= m && m <= n);
        c.check(chain, "notification-order", || format!("{}: flow {} {d:?} {m:?} {n:?}", s.element, f.flow));
        let backup = a.routes()[f.flow].backup();
        c.check(backup.is_some_and(|b| !s.element.on_path(b)), "backup-validity", || {
            format!("{}: flow {} resumes on a failed path", s.element, f.flow)
        });
    }
}

fn profile_map(
    scenario: &Scenario,
    matrix: &TrafficMatrix,
) -> Result<BTreeMap<HostId, RateProfile>, CliError> {
    let mut out = BTreeMap::new();
    for d in matrix.demands() {
        let p = scenario
            .profiles
            .get(&Some(d.src))
            .or_else(|| scenario.profiles.get(&None))
            .ok_or_else(|| CliError::Scenario(format!("no rate profile for sending host {}", d.src)))?;
        out.insert(d.src, *p);
    }
    Ok(out)
}

/// Runs every experiment the scenario asks for. `seed` overrides the
/// scenario's own.
pub fn run(scenario: &Scenario, base: &Path, seed: Option<u64>) -> Result<Report, CliError> {
    let seed = seed.or(scenario.seed);
    if scenario.is_stochastic() && seed.is_none() {
        return Err(CliError::Scenario(
            "scenario has failures or groups and needs a seed; add `seed N` or pass --seed".into(),
        ));
    }
    let seed = seed.unwrap_or(0);
    let (topo, matrix) = load(scenario, base)?;
    let mut checker = Checker(Vec::new());
    let mut files = Vec::new();
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "topology: {} switches, {} links, {} hosts; traffic: {} demands, {:.3} Mbps offered",
        topo.switch_count(),
        topo.link_count(),
        topo.host_count(),
        matrix.len(),
        matrix.total_mbps()
    );

    // throughput
    let mut results: BTreeMap<Mode, ThroughputResult> = BTreeMap::new();
    if !scenario.modes.is_empty() {
        let mut csv = format!("{THROUGHPUT_CSV_HEADER}\n");
        for &mode in &scenario.modes {
            let r = route(&topo, &matrix, mode)?;
            check_throughput(&mut checker, &topo, &matrix, &r);
            let _ = writeln!(csv, "{}", throughput_csv_line(topo.switch_count(), &r));
            let _ = writeln!(
                summary,
                "throughput {mode}: {:.3} Mbps, {} admitted, {} rejected, {} VLANs, max utilization {:.3}",
                r.aggregate_mbps,
                r.admitted.len(),
                r.rejected.len(),
                r.vlan_count,
                r.max_link_util
            );
            results.insert(mode, r);
        }
        let agg = |m| results.get(&m).map(|r: &ThroughputResult| r.aggregate_mbps);
        if let (Some(s), Some(m)) = (agg(Mode::SingleTree), agg(Mode::Multi)) {
            checker.check(m >= s, "dominance", || format!("multi {m} below single {s}"));
        }
        if let (Some(m), Some(b)) = (agg(Mode::Multi), agg(Mode::MultiBackup)) {
            checker.check(b <= m, "backup-penalty", || format!("multi+backup {b} above multi {m}"));
        }
        files.push((THROUGHPUT_CSV, csv));
    }

    // failover
    if !scenario.failures.is_empty() {
        let routed = match results.remove(&Mode::MultiBackup) {
            Some(r) => r,
            None => route(&topo, &matrix, Mode::MultiBackup)?,
        };
        let assignment = &routed.assignment;
        let aggregation = aggregate_paths(&topo, &assignment.path_set())?;
        let mut csv = format!("failure,trial,{FAILOVER_CSV_HEADER}\n");
        for (j, failure) in scenario.failures.iter().enumerate() {
            let fs = FailureScenario::new(failure.element, failure.at_ms, scenario.monitors.clone())
                .with_detection(scenario.detection_ms.0, scenario.detection_ms.1)
                .with_hop_latency(scenario.hop_latency_ms)
                .with_lookup(scenario.lookup_ms)
                .with_ramp_up(scenario.ramp_up);
            let (mut worst, mut affected, mut lost) = (None::<f64>, 0, 0);
            for k in 0..scenario.trials {
                let rep = simulate_failover(&topo, assignment, &aggregation, &fs, derive_seed(seed, j, scenario.trials, k))?;
                check_failover(&mut checker, &fs, assignment, &rep);
                for line in failover_csv_lines(&rep) {
                    let _ = writeln!(csv, "{},{k},{line}", failure.element);
                }
                affected = rep.flows.len();
                lost = rep.unrecoverable().count();
                if let Some(d) = rep.max_downtime_ms() {
                    worst = Some(worst.map_or(d, |w: f64| w.max(d)));
                }
            }
            let _ = writeln!(
                summary,
                "failover {} at {} ms: {affected} flows affected, {lost} unrecoverable, worst downtime {}",
                failure.element,
                failure.at_ms,
                worst.map_or("-".to_string(), |w| format!("{w:.3} ms"))
            );
        }
        files.push((FAILOVER_CSV, csv));
    }

    // multicast
    if !scenario.groups.is_empty() {
        let routing = TreeRouting::ShortestPath;
        let mut state = SnoopState::new();
        let mut trees = Vec::new();
        for g in &scenario.groups {
            state.register_group(&topo, g.id, g.root, &routing)?;
            for m in &g.members {
                state.process_igmp(&topo, IgmpMessage::join(g.id, m.0))?;
            }
            let tree = build_multicast_tree(&topo, g, &routing)?;
            checker.check(state.forwarding_links(g.id) == tree.links, "snoop-soundness", || {
                format!("group {}: forwarding links differ from the member routes", g.id)
            });
            trees.push(tree);
        }
        let vlans = aggregate_multicast_trees(&topo, &trees)?;
        let _ = writeln!(
            summary,
            "multicast: {} groups on {} VLANs",
            trees.len(),
            vlans.result.tree_count()
        );
        for (s, n) in check_group_limits(&state, scenario.group_limit)? {
            let _ = writeln!(summary, "multicast: switch {s} holds {n} groups, above the limit of {}", scenario.group_limit);
        }
        let config = ReliableConfig {
            hop_latency_ms: scenario.hop_latency_ms,
            max_retries: scenario.max_retries,
            ..ReliableConfig::default()
        };
        let mut csv = format!("trial,{MULTICAST_CSV_HEADER}\n");
        for (j, (g, tree)) in scenario.groups.iter().zip(&trees).enumerate() {
            let mut reports: Vec<DeliveryReport> = Vec::new();
            for k in 0..scenario.trials {
                let rep = simulate_reliable_multicast(&topo, g, tree, &scenario.loss, config, derive_seed(seed, j, scenario.trials, k))?;
                checker.check(rep.acks <= g.members.len() as u64, "ack-conservation", || {
                    format!("group {}: {} acks for {} members", g.id, rep.acks, g.members.len())
                });
                checker.check(scenario.max_retries.is_some() || rep.failed.is_empty(), "reliability", || {
                    format!("group {}: undelivered with unbounded retries", g.id)
                });
                let _ = writeln!(csv, "{k},{}", multicast_csv_line(&rep));
                reports.push(rep);
            }
            let retx: u64 = reports.iter().map(|r| r.retransmissions).sum();
            let failed: usize = reports.iter().map(|r| r.failed.len()).sum();
            let _ = writeln!(
                summary,
                "multicast group {}: {} members, depth {}, mean retransmissions {:.4}, {failed} undelivered",
                g.id,
                g.members.len(),
                tree.depth(&topo),
                retx as f64 / reports.len() as f64
            );
        }
        files.push((MULTICAST_CSV, csv));
    }

    // policing
    if !scenario.profiles.is_empty() {
        let profiles = profile_map(scenario, &matrix)?;
        let run = run_policed(&topo, &matrix, &profiles, scenario.scope)?;
        check_throughput(&mut checker, &topo, &run.outcome.policed, &run.routed);
        for (d, left) in run.overlay.residual.iter() {
            checker.check(left >= -1e-9, "overlay-capacity", || format!("{d} oversubscribed by {}", -left));
        }
        let _ = writeln!(
            summary,
            "policing: {:.3} Mbps conforming, {:.3} Mbps admitted, {:.3} Mbps dropped, {:.3} Mbps remarked excess carried",
            run.outcome.policed.total_mbps(),
            run.routed.aggregate_mbps,
            run.outcome.dropped_mbps(),
            run.overlay.total_mbps()
        );
        files.push((POLICING_CSV, write_policing_csv(&matrix, &run)));
    }

    match checker.0.len() {
        0 => summary.push_str("invariants: all hold\n"),
        n => {
            let _ = writeln!(summary, "invariants: {n} violated");
            for v in &checker.0 {
                let _ = writeln!(summary, "  {}: {}", v.property, v.detail);
            }
        }
    }
    files.push((SUMMARY_TXT, summary));
    Ok(Report {
        files,
        violations: checker.0,
    })
}

/// Output directory: the flag, else the scenario's `out`, else `out` next
/// to the scenario file.
pub fn output_dir(scenario: &Scenario, base: &Path, flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => base.join(scenario.out.as_deref().unwrap_or(Path::new("out"))),
    }
}

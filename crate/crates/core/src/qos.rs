//! Ingress policing with single-rate, two-color token buckets.
//!
//! A profile is a committed rate plus a burst size. Frames that find enough
//! tokens conform and consume them. Excess frames consume nothing and are
//! either dropped or remarked to a lower 802.1p class, in which case the
//! network serves them only from spare capacity.
//!
//! At flow level a host sending more than its committed rate has all of its
//! demands scaled down by the same factor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::flowsim::{multi_tree_route, serve_overlay, OverlayResult, ThroughputResult};
use crate::netmodel::{Demand, HostId, Path, SwitchId, Topology, TrafficMatrix};

/// Largest tagged Ethernet frame.
pub const MAX_FRAME_BYTES: u32 = 1522;
pub const DEFAULT_BASE_CLASS: u8 = 3;
pub const DEFAULT_REMARK_CLASS: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExcessAction {
    Drop,
    Remark,
}

impl fmt::Display for ExcessAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExcessAction::Drop => "drop",
            ExcessAction::Remark => "remark",
        })
    }
}

impl std::str::FromStr for ExcessAction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "drop" => Ok(ExcessAction::Drop),
            "remark" => Ok(ExcessAction::Remark),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateProfile {
    pub rate_mbps: f64,
    pub burst_bytes: u64,
    pub action: ExcessAction,
    /// 802.1p class of conforming traffic.
    pub base_class: u8,
    /// Class given to remarked excess; always below `base_class`.
    pub remark_class: u8,
}

impl RateProfile {
    pub fn new(rate_mbps: f64, burst_bytes: u64, action: ExcessAction) -> Result<Self> {
        RateProfile {
            rate_mbps,
            burst_bytes,
            action,
            base_class: DEFAULT_BASE_CLASS,
            remark_class: DEFAULT_REMARK_CLASS,
        }
        .validated()
    }

    pub fn with_classes(mut self, base: u8, remark: u8) -> Result<Self> {
        self.base_class = base;
        self.remark_class = remark;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if !(self.rate_mbps > 0.0 && self.rate_mbps.is_finite()) {
            return Err(Error::InvalidProfile(format!("rate must be positive, got {}", self.rate_mbps)));
        }
        if self.burst_bytes < MAX_FRAME_BYTES as u64 {
            return Err(Error::InvalidProfile(format!(
                "burst of {} bytes is below one {MAX_FRAME_BYTES} byte frame",
                self.burst_bytes
            )));
        }
        if self.base_class > 7 || self.remark_class >= self.base_class {
            return Err(Error::InvalidProfile(format!(
                "remark class {} must be below base class {} (0..=7)",
                self.remark_class, self.base_class
            )));
        }
        Ok(self)
    }

    /// Committed rate in bytes per second.
    pub fn bytes_per_sec(&self) -> f64 {
        self.rate_mbps * 1e6 / 8.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Conform,
    ExceedDrop,
    /// Forwarded at the given lower class.
    ExceedRemark(u8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicerState {
    profile: RateProfile,
    tokens: f64,
    last: Duration,
}

impl PolicerState {
    /// A full bucket at time zero.
    pub fn new(profile: RateProfile) -> Self {
        PolicerState {
            tokens: profile.burst_bytes as f64,
            last: Duration::ZERO,
            profile,
        }
    }

    pub fn tokens(&self) -> f64 {
        self.tokens
    }

    pub fn last_update(&self) -> Duration {
        self.last
    }

    pub fn profile(&self) -> &RateProfile {
        &self.profile
    }

    /// Refills for the time elapsed since the last frame, then judges one
    /// frame arriving at `now`.
    pub fn police(&mut self, frame_bytes: u32, now: Duration) -> Result<Decision> {
        if now < self.last {
            return Err(Error::TimeRegression { now, last: self.last });
        }
        if frame_bytes > MAX_FRAME_BYTES {
            return Err(Error::FrameTooLarge(frame_bytes));
        }
        let burst = self.profile.burst_bytes as f64;
        let dt = (now - self.last).as_secs_f64();
        self.tokens = (self.tokens + dt * self.profile.bytes_per_sec()).min(burst);
        self.last = now;
        let size = frame_bytes as f64;
        if self.tokens >= size {
            self.tokens -= size;
            return Ok(Decision::Conform);
        }
        Ok(match self.profile.action {
            ExcessAction::Drop => Decision::ExceedDrop,
            ExcessAction::Remark => Decision::ExceedRemark(self.profile.remark_class),
        })
    }
}

/// Where policers sit. Only ingress rate matters at flow level, so both
/// scopes yield the same policed traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolicingScope {
    #[default]
    Edge,
    AllSwitches,
}

/// Traffic above profile for one demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excess {
    /// Demand index in the offered matrix.
    pub demand: usize,
    pub excess_mbps: f64,
    pub action: ExcessAction,
    /// 802.1p class of the excess when remarked.
    pub class: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicingOutcome {
    /// Conforming traffic, one demand per offered demand.
    pub policed: TrafficMatrix,
    pub excess: Vec<Excess>,
    pub sites: BTreeSet<SwitchId>,
}

impl PolicingOutcome {
    pub fn dropped_mbps(&self) -> f64 {
        self.excess
            .iter()
            .filter(|e| e.action == ExcessAction::Drop)
            .fold(0.0, |acc, e| acc + e.excess_mbps)
    }

    /// Remarked excess as low-priority demands, with their demand indices.
    pub fn overlay(&self, offered: &TrafficMatrix) -> Vec<(usize, Demand)> {
        self.excess
            .iter()
            .filter(|e| e.action == ExcessAction::Remark)
            .map(|e| {
                let d = offered.demands()[e.demand];
                (e.demand, Demand { rate_mbps: e.excess_mbps, ..d })
            })
            .collect()
    }
}

/// Clips each sending host to its committed rate, scaling all its demands by
/// the same factor.
pub fn apply_ingress_policing(
    topology: &Topology,
    matrix: &TrafficMatrix,
    profiles: &BTreeMap<HostId, RateProfile>,
    scope: PolicingScope,
) -> Result<PolicingOutcome> {
    let mut offered: BTreeMap<HostId, f64> = BTreeMap::new();
    for d in matrix.demands() {
        *offered.entry(d.src).or_insert(0.0) += d.rate_mbps;
    }
    for h in offered.keys() {
        if !profiles.contains_key(h) {
            return Err(Error::MissingProfile(*h));
        }
    }
    let mut policed = Vec::with_capacity(matrix.len());
    let mut excess = Vec::new();
    for (i, d) in matrix.demands().iter().enumerate() {
        let p = &profiles[&d.src];
        let total = offered[&d.src];
        if total <= p.rate_mbps {
            policed.push(*d);
            continue;
        }
        let keep = d.rate_mbps * p.rate_mbps / total;
        policed.push(Demand { rate_mbps: keep, ..*d });
        excess.push(Excess {
            demand: i,
            excess_mbps: d.rate_mbps - keep,
            action: p.action,
            class: (p.action == ExcessAction::Remark).then_some(p.remark_class),
        });
    }
    let sites = match scope {
        PolicingScope::Edge => offered
            .keys()
            .map(|h| topology.host_switch(*h))
            .collect::<Result<_>>()?,
        PolicingScope::AllSwitches => topology.switches().collect(),
    };
    Ok(PolicingOutcome {
        policed: TrafficMatrix::new(topology, policed)?,
        excess,
        sites,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicedRun {
    pub outcome: PolicingOutcome,
    /// Conforming traffic routed by load-balanced multi-tree routing.
    pub routed: ThroughputResult,
    /// Remarked excess carried on the spare capacity of its primary path.
    pub overlay: OverlayResult,
    /// Demand index per overlay entry.
    pub overlay_demands: Vec<usize>,
}

/// Polices, routes conforming traffic, then serves remarked excess along
/// each admitted demand's primary path. Excess of rejected demands has no
/// path and is carried nowhere.
pub fn run_policed(
    topology: &Topology,
    matrix: &TrafficMatrix,
    profiles: &BTreeMap<HostId, RateProfile>,
    scope: PolicingScope,
) -> Result<PolicedRun> {
    let outcome = apply_ingress_policing(topology, matrix, profiles, scope)?;
    let routed = multi_tree_route(topology, &outcome.policed, false)?;
    let mut flows: Vec<(Demand, Path)> = Vec::new();
    let mut overlay_demands = Vec::new();
    for (i, d) in outcome.overlay(matrix) {
        if let Some(p) = routed.assignment.routes()[i].primary() {
            flows.push((d, p.clone()));
            overlay_demands.push(i);
        }
    }
    let overlay = serve_overlay(topology, &routed.link_loads, &flows)?;
    Ok(PolicedRun {
        outcome,
        routed,
        overlay,
        overlay_demands,
    })
}

pub const POLICING_CSV_HEADER: &str = "demand,src,dst,offered_mbps,conform_mbps,excess_mbps,action,carried_excess_mbps";

pub fn write_policing_csv(matrix: &TrafficMatrix, run: &PolicedRun) -> String {
    let mut out = String::from(POLICING_CSV_HEADER);
    out.push('\n');
    let carried: BTreeMap<usize, f64> = run
        .overlay_demands
        .iter()
        .copied()
        .zip(run.overlay.carried.iter().copied())
        .collect();
    let excess: BTreeMap<usize, &Excess> = run.outcome.excess.iter().map(|e| (e.demand, e)).collect();
    for (i, d) in matrix.demands().iter().enumerate() {
        let (ex, action) = excess
            .get(&i)
            .map_or((0.0, "-".to_string()), |e| (e.excess_mbps, e.action.to_string()));
        let _ = writeln!(
            out,
            "{i},{},{},{:.3},{:.3},{ex:.3},{action},{:.3}",
            d.src,
            d.dst,
            d.rate_mbps,
            run.outcome.policed.demands()[i].rate_mbps,
            carried.get(&i).copied().unwrap_or(0.0)
        );
    }
    out
}

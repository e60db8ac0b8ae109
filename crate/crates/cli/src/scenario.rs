//! Scenario files.
//!
//! A scenario is plain text, one directive per line, `#` starting a comment.
//!
//! ```text
//! scenario  = { line }
//! line      = [ directive ] [ "#" comment ] newline
//! directive = "grid" SIDE MBPS
//!           | "topology" PATH
//!           | "uniform" MBPS
//!           | "traffic" PATH
//!           | "modes" MODE { MODE }
//!           | "fail" "link" SWITCH SWITCH "at" MS
//!           | "fail" "switch" SWITCH "at" MS
//!           | "detect" MS MS
//!           | "hoplat" MS
//!           | "lookup" MS
//!           | "rampup" ( "off" | MS | MS MS )
//!           | "monitor" SWITCH { SWITCH }
//!           | "group" ID "root" HOST "members" HOST { HOST }
//!           | "loss" [ "hop" ] P
//!           | "retries" ( N | "inf" )
//!           | "grouplimit" N
//!           | "trials" N
//!           | "profile" ( HOST | "*" ) "rate" MBPS "burst" BYTES
//!                 "action" ( "drop" | "remark" ) [ "classes" BASE REMARK ]
//!           | "police" ( "edge" | "all" )
//!           | "seed" N
//!           | "out" PATH
//! MODE      = "single" | "multi" | "multi+backup" | "all"
//! ```
//!
//! Exactly one of `grid`/`topology` and one of `uniform`/`traffic` must
//! appear. Relative paths resolve against the scenario file's directory.
//! `monitor` lines accumulate. A `profile` for `*` applies to every sending
//! host without its own profile.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use vlantree::failover::{
    Element, RampUp, DEFAULT_DETECTION_MS, DEFAULT_HOP_LATENCY_MS, DEFAULT_LOOKUP_MS,
};
use vlantree::flowsim::Mode;
use vlantree::mcast::{LossModel, MulticastGroup, DEFAULT_GROUP_LIMIT};
use vlantree::netmodel::text::tokens;
use vlantree::netmodel::{HostId, Link, SwitchId};
use vlantree::qos::{ExcessAction, PolicingScope, RateProfile};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySource {
    Grid { side: usize, capacity_mbps: f64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrafficSource {
    Uniform(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Failure {
    pub element: Element,
    pub at_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: TopologySource,
    pub traffic: TrafficSource,
    /// Throughput modes, ascending and distinct.
    pub modes: Vec<Mode>,
    pub failures: Vec<Failure>,
    pub detection_ms: (f64, f64),
    pub hop_latency_ms: f64,
    pub lookup_ms: f64,
    pub ramp_up: RampUp,
    pub monitors: Vec<SwitchId>,
    pub groups: Vec<MulticastGroup>,
    pub loss: LossModel,
    /// Unicast retries per receiver; `None` is unbounded.
    pub max_retries: Option<u32>,
    pub group_limit: usize,
    /// Seeded repetitions of each failure and each multicast group.
    pub trials: u32,
    /// Keyed by host; `None` is the `*` default.
    pub profiles: BTreeMap<Option<HostId>, RateProfile>,
    pub scope: PolicingScope,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Scenario {
    /// A scenario with the given sources and every other setting at its
    /// default.
    pub fn new(topology: TopologySource, traffic: TrafficSource) -> Self {
        Scenario {
            topology,
            traffic,
            modes: Mode::ALL.to_vec(),
            failures: Vec::new(),
            detection_ms: DEFAULT_DETECTION_MS,
            hop_latency_ms: DEFAULT_HOP_LATENCY_MS,
            lookup_ms: DEFAULT_LOOKUP_MS,
            ramp_up: RampUp::Off,
            monitors: Vec::new(),
            groups: Vec::new(),
            loss: LossModel::Lossless,
            max_retries: Some(64),
            group_limit: DEFAULT_GROUP_LIMIT,
            trials: 1,
            profiles: BTreeMap::new(),
            scope: PolicingScope::Edge,
            seed: None,
            out: None,
        }
    }

    /// True when some experiment draws random numbers and so needs a seed.
    pub fn is_stochastic(&self) -> bool {
        !self.failures.is_empty() || !self.groups.is_empty()
    }

    pub fn parse(text: &str) -> Result<Scenario, CliError> {
        let mut p = Parser::default();
        let mut last = 0;
        for (i, raw) in text.lines().enumerate() {
            last = i + 1;
            let toks = tokens(raw);
            if !toks.is_empty() {
                p.directive(last, &toks)?;
            }
        }
        p.finish(last)
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::parse(s)
    }
}

#[derive(Default)]
struct Parser {
    topology: Option<(usize, TopologySource)>,
    traffic: Option<(usize, TrafficSource)>,
    modes: Option<Vec<Mode>>,
    failures: Vec<Failure>,
    detection: Option<(f64, f64)>,
    hop: Option<f64>,
    lookup: Option<f64>,
    ramp: Option<RampUp>,
    monitors: Vec<SwitchId>,
    groups: BTreeMap<u32, MulticastGroup>,
    loss: Option<LossModel>,
    retries: Option<Option<u32>>,
    limit: Option<usize>,
    trials: Option<u32>,
    profiles: BTreeMap<Option<HostId>, RateProfile>,
    scope: Option<PolicingScope>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    directives: usize,
}

fn num<T: FromStr>(line: usize, tok: &str, what: &str) -> Result<T, CliError> {
    tok.parse().map_err(|_| CliError::parse(line, format!("bad {what} `{tok}`")))
}

fn ms(line: usize, tok: &str) -> Result<f64, CliError> {
    let v: f64 = num(line, tok, "time")?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(CliError::parse(line, format!("time must be finite and non-negative, got {tok}")));
    }
    Ok(v)
}

fn positive(line: usize, tok: &str, what: &str) -> Result<f64, CliError> {
    let v: f64 = num(line, tok, what)?;
    if !(v.is_finite() && v > 0.0) {
        return Err(CliError::parse(line, format!("{what} must be positive, got {tok}")));
    }
    Ok(v)
}

fn keyword(line: usize, toks: &[&str], at: usize, word: &str) -> Result<(), CliError> {
    match toks.get(at) {
        Some(&t) if t == word => Ok(()),
        Some(t) => Err(CliError::parse(line, format!("expected `{word}`, found `{t}`"))),
        None => Err(CliError::parse(line, format!("expected `{word}`"))),
    }
}

fn arity(line: usize, toks: &[&str], n: usize) -> Result<(), CliError> {
    if toks.len() != n {
        return Err(CliError::parse(
            line,
            format!("`{}` takes {} argument(s), got {}", toks[0], n - 1, toks.len() - 1),
        ));
    }
    Ok(())
}

fn once<T>(slot: &mut Option<T>, line: usize, name: &str, value: T) -> Result<(), CliError> {
    if slot.is_some() {
        return Err(CliError::parse(line, format!("`{name}` given twice")));
    }
    *slot = Some(value);
    Ok(())
}

impl Parser {
    fn directive(&mut self, line: usize, toks: &[&str]) -> Result<(), CliError> {
        self.directives += 1;
        match toks[0] {
            "grid" => {
                arity(line, toks, 3)?;
                let side: usize = num(line, toks[1], "grid side")?;
                let capacity_mbps = positive(line, toks[2], "capacity")?;
                self.topology_source(line, TopologySource::Grid { side, capacity_mbps })
            }
            "topology" => {
                arity(line, toks, 2)?;
                self.topology_source(line, TopologySource::File(toks[1].into()))
            }
            "uniform" => {
                arity(line, toks, 2)?;
                let rate = positive(line, toks[1], "rate")?;
                self.traffic_source(line, TrafficSource::Uniform(rate))
            }
            "traffic" => {
                arity(line, toks, 2)?;
                self.traffic_source(line, TrafficSource::File(toks[1].into()))
            }
            "modes" => {
                if toks.len() < 2 {
                    return Err(CliError::parse(line, "`modes` needs at least one mode"));
                }
                let mut modes = Vec::new();
                for t in &toks[1..] {
                    if *t == "all" {
                        modes.extend(Mode::ALL);
                    } else {
                        modes.push(t.parse::<Mode>().map_err(|e| CliError::parse(line, e))?);
                    }
                }
                modes.sort();
                modes.dedup();
                once(&mut self.modes, line, "modes", modes)
            }
            "fail" => {
                let element = match toks.get(1) {
                    Some(&"link") => {
                        arity(line, toks, 6)?;
                        let a: u32 = num(line, toks[2], "switch id")?;
                        let b: u32 = num(line, toks[3], "switch id")?;
                        if a == b {
                            return Err(CliError::parse(line, format!("self-loop on switch {a}")));
                        }
                        Element::Link(Link::between(a, b))
                    }
                    Some(&"switch") => {
                        arity(line, toks, 5)?;
                        Element::Switch(SwitchId(num(line, toks[2], "switch id")?))
                    }
                    _ => return Err(CliError::parse(line, "expected `fail link A B at MS` or `fail switch S at MS`")),
                };
                keyword(line, toks, toks.len() - 2, "at")?;
                let at_ms = ms(line, toks[toks.len() - 1])?;
                self.failures.push(Failure { element, at_ms });
                Ok(())
            }
            "detect" => {
                arity(line, toks, 3)?;
                let (lo, hi) = (ms(line, toks[1])?, ms(line, toks[2])?);
                if lo > hi {
                    return Err(CliError::parse(line, format!("detection interval {lo}..{hi} is reversed")));
                }
                once(&mut self.detection, line, "detect", (lo, hi))
            }
            "hoplat" => {
                arity(line, toks, 2)?;
                let v = ms(line, toks[1])?;
                once(&mut self.hop, line, "hoplat", v)
            }
            "lookup" => {
                arity(line, toks, 2)?;
                let v = ms(line, toks[1])?;
                once(&mut self.lookup, line, "lookup", v)
            }
            "rampup" => {
                let ramp = match toks.len() {
                    2 if toks[1] == "off" => RampUp::Off,
                    2 => RampUp::Fixed(ms(line, toks[1])?),
                    3 => {
                        let (lo, hi) = (ms(line, toks[1])?, ms(line, toks[2])?);
                        if lo > hi {
                            return Err(CliError::parse(line, format!("ramp-up interval {lo}..{hi} is reversed")));
                        }
                        RampUp::Uniform { lo, hi }
                    }
                    _ => return Err(CliError::parse(line, "`rampup` takes `off`, one time or two times")),
                };
                once(&mut self.ramp, line, "rampup", ramp)
            }
            "monitor" => {
                if toks.len() < 2 {
                    return Err(CliError::parse(line, "`monitor` needs at least one switch"));
                }
                for t in &toks[1..] {
                    let s = SwitchId(num(line, t, "switch id")?);
                    if !self.monitors.contains(&s) {
                        self.monitors.push(s);
                    }
                }
                Ok(())
            }
            "group" => {
                if toks.len() < 6 {
                    return Err(CliError::parse(line, "expected `group ID root HOST members HOST...`"));
                }
                let id: u32 = num(line, toks[1], "group id")?;
                keyword(line, toks, 2, "root")?;
                let root: u32 = num(line, toks[3], "host id")?;
                keyword(line, toks, 4, "members")?;
                let members = toks[5..]
                    .iter()
                    .map(|t| num::<u32>(line, t, "host id"))
                    .collect::<Result<Vec<_>, _>>()?;
                let group = MulticastGroup::new(id, root, members).map_err(|e| CliError::parse(line, e.to_string()))?;
                if self.groups.insert(id, group).is_some() {
                    return Err(CliError::parse(line, format!("group {id} declared twice")));
                }
                Ok(())
            }
            "loss" => {
                let (hop, tok) = match toks {
                    [_, p] => (false, *p),
                    [_, "hop", p] => (true, *p),
                    _ => return Err(CliError::parse(line, "expected `loss P` or `loss hop P`")),
                };
                let p: f64 = num(line, tok, "loss probability")?;
                if !(0.0..1.0).contains(&p) {
                    return Err(CliError::parse(line, format!("loss probability must be in [0, 1), got {tok}")));
                }
                let model = match (p, hop) {
                    (p, _) if p == 0.0 => LossModel::Lossless,
                    (p, false) => LossModel::Bernoulli { p },
                    (p, true) => LossModel::PerHop { p },
                };
                once(&mut self.loss, line, "loss", model)
            }
            "retries" => {
                arity(line, toks, 2)?;
                let r = if toks[1] == "inf" { None } else { Some(num(line, toks[1], "retry count")?) };
                once(&mut self.retries, line, "retries", r)
            }
            "grouplimit" => {
                arity(line, toks, 2)?;
                let n: usize = num(line, toks[1], "group limit")?;
                if n == 0 {
                    return Err(CliError::parse(line, "group limit must be positive"));
                }
                once(&mut self.limit, line, "grouplimit", n)
            }
            "trials" => {
                arity(line, toks, 2)?;
                let n: u32 = num(line, toks[1], "trial count")?;
                if n == 0 {
                    return Err(CliError::parse(line, "trial count must be positive"));
                }
                once(&mut self.trials, line, "trials", n)
            }
            "profile" => self.profile(line, toks),
            "police" => {
                arity(line, toks, 2)?;
                let scope = match toks[1] {
                    "edge" => PolicingScope::Edge,
                    "all" => PolicingScope::AllSwitches,
                    t => return Err(CliError::parse(line, format!("unknown policing scope `{t}`"))),
                };
                once(&mut self.scope, line, "police", scope)
            }
            "seed" => {
                arity(line, toks, 2)?;
                let s = num(line, toks[1], "seed")?;
                once(&mut self.seed, line, "seed", s)
            }
            "out" => {
                arity(line, toks, 2)?;
                once(&mut self.out, line, "out", toks[1].into())
            }
            other => Err(CliError::parse(line, format!("unknown directive `{other}`"))),
        }
    }

    fn topology_source(&mut self, line: usize, src: TopologySource) -> Result<(), CliError> {
        if let Some((prev, _)) = &self.topology {
            return Err(CliError::parse(line, format!("second topology source, first on line {prev}")));
        }
        self.topology = Some((line, src));
        Ok(())
    }

    fn traffic_source(&mut self, line: usize, src: TrafficSource) -> Result<(), CliError> {
        if let Some((prev, _)) = &self.traffic {
            return Err(CliError::parse(line, format!("second traffic source, first on line {prev}")));
        }
        self.traffic = Some((line, src));
        Ok(())
    }

    fn profile(&mut self, line: usize, toks: &[&str]) -> Result<(), CliError> {
        if toks.len() != 8 && toks.len() != 11 {
            return Err(CliError::parse(
                line,
                "expected `profile HOST rate MBPS burst BYTES action drop|remark [classes BASE REMARK]`",
            ));
        }
        let host = match toks[1] {
            "*" => None,
            t => Some(HostId(num(line, t, "host id")?)),
        };
        keyword(line, toks, 2, "rate")?;
        let rate = positive(line, toks[3], "rate")?;
        keyword(line, toks, 4, "burst")?;
        let burst: u64 = num(line, toks[5], "burst")?;
        keyword(line, toks, 6, "action")?;
        let action: ExcessAction = toks[7].parse().map_err(|e| CliError::parse(line, e))?;
        let bad = |e: vlantree::Error| CliError::parse(line, e.to_string());
        let mut profile = RateProfile::new(rate, burst, action).map_err(bad)?;
        if toks.len() == 11 {
            keyword(line, toks, 8, "classes")?;
            let base: u8 = num(line, toks[9], "class")?;
            let remark: u8 = num(line, toks[10], "class")?;
            profile = profile.with_classes(base, remark).map_err(bad)?;
        }
        if self.profiles.insert(host, profile).is_some() {
            return Err(CliError::parse(line, format!("second profile for {}", toks[1])));
        }
        Ok(())
    }

    fn finish(self, last: usize) -> Result<Scenario, CliError> {
        if self.directives == 0 {
            return Err(CliError::Usage("scenario is empty".into()));
        }
        let Some((_, topology)) = self.topology else {
            return Err(CliError::parse(last, "no topology source; add `grid SIDE MBPS` or `topology PATH`"));
        };
        let Some((_, traffic)) = self.traffic else {
            return Err(CliError::parse(last, "no traffic source; add `uniform MBPS` or `traffic PATH`"));
        };
        let mut s = Scenario::new(topology, traffic);
        if let Some(m) = self.modes {
            s.modes = m;
        }
        s.failures = self.failures;
        s.detection_ms = self.detection.unwrap_or(s.detection_ms);
        s.hop_latency_ms = self.hop.unwrap_or(s.hop_latency_ms);
        s.lookup_ms = self.lookup.unwrap_or(s.lookup_ms);
        s.ramp_up = self.ramp.unwrap_or(s.ramp_up);
        s.monitors = self.monitors;
        s.groups = self.groups.into_values().collect();
        s.loss = self.loss.unwrap_or(s.loss);
        s.max_retries = self.retries.unwrap_or(s.max_retries);
        s.group_limit = self.limit.unwrap_or(s.group_limit);
        s.trials = self.trials.unwrap_or(s.trials);
        s.profiles = self.profiles;
        s.scope = self.scope.unwrap_or(s.scope);
        s.seed = self.seed;
        s.out = self.out;
        Ok(s)
    }
}

fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Canonical form: one directive per line, defaults omitted.
impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let defaults = Scenario::new(self.topology.clone(), self.traffic.clone());
        match &self.topology {
            TopologySource::Grid { side, capacity_mbps } => writeln!(f, "grid {side} {capacity_mbps}")?,
            TopologySource::File(p) => writeln!(f, "topology {}", p.display())?,
        }
        match &self.traffic {
            TrafficSource::Uniform(r) => writeln!(f, "uniform {r}")?,
            TrafficSource::File(p) => writeln!(f, "traffic {}", p.display())?,
        }
        if self.modes != defaults.modes {
            writeln!(f, "modes {}", join(&self.modes))?;
        }
        for x in &self.failures {
            writeln!(f, "fail {} at {}", x.element, x.at_ms)?;
        }
        if self.detection_ms != defaults.detection_ms {
            writeln!(f, "detect {} {}", self.detection_ms.0, self.detection_ms.1)?;
        }
        if self.hop_latency_ms != defaults.hop_latency_ms {
            writeln!(f, "hoplat {}", self.hop_latency_ms)?;
        }
        if self.lookup_ms != defaults.lookup_ms {
            writeln!(f, "lookup {}", self.lookup_ms)?;
        }
        match self.ramp_up {
            RampUp::Off => {}
            RampUp::Fixed(v) => writeln!(f, "rampup {v}")?,
            RampUp::Uniform { lo, hi } => writeln!(f, "rampup {lo} {hi}")?,
        }
        if !self.monitors.is_empty() {
            writeln!(f, "monitor {}", join(&self.monitors))?;
        }
        for g in &self.groups {
            writeln!(f, "group {} root {} members {}", g.id, g.root, join(&g.members))?;
        }
        match &self.loss {
            LossModel::Bernoulli { p } => writeln!(f, "loss {p}")?,
            LossModel::PerHop { p } => writeln!(f, "loss hop {p}")?,
            _ => {}
        }
        if self.max_retries != defaults.max_retries {
            match self.max_retries {
                Some(n) => writeln!(f, "retries {n}")?,
                None => writeln!(f, "retries inf")?,
            }
        }
        if self.group_limit != defaults.group_limit {
            writeln!(f, "grouplimit {}", self.group_limit)?;
        }
        if self.trials != defaults.trials {
            writeln!(f, "trials {}", self.trials)?;
        }
        for (host, p) in &self.profiles {
            let who = host.map_or("*".to_string(), |h| h.to_string());
            write!(f, "profile {who} rate {} burst {} action {}", p.rate_mbps, p.burst_bytes, p.action)?;
            let plain = RateProfile::new(p.rate_mbps, p.burst_bytes, p.action).ok();
            if plain.as_ref() != Some(p) {
                write!(f, " classes {} {}", p.base_class, p.remark_class)?;
            }
            writeln!(f)?;
        }
        if self.scope == PolicingScope::AllSwitches {
            writeln!(f, "police all")?;
        }
        if let Some(s) = self.seed {
            writeln!(f, "seed {s}")?;
        }
        if let Some(o) = &self.out {
            writeln!(f, "out {}", o.display())?;
        }
        Ok(())
    }
}

//! Line-oriented text format for topologies and traffic matrices.
//!
//! ```text
//! file      = { line }
//! line      = [ directive ] [ "#" comment ] newline
//! directive = "switch" ID
//!           | "link" ID ID MBPS
//!           | "host" ID ID          (host id, attachment switch)
//!           | "demand" ID ID MBPS   (source host, destination host)
//! ```
//!
//! Switch and host ids must each be declared densely from zero (in any
//! order). Unknown directives, wrong arity and malformed numbers are errors
//! that carry the 1-based line number.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{Demand, Link, Topology, TrafficMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub topology: Topology,
    pub matrix: TrafficMatrix,
}

/// Splits a line into tokens, dropping any `#` comment.
pub fn tokens(line: &str) -> Vec<&str> {
    let body = line.split('#').next().unwrap_or("");
    body.split_whitespace().collect()
}

pub fn parse_u32(line: usize, tok: &str, what: &str) -> Result<u32> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("bad {what} `{tok}`")))
}

pub fn parse_f64(line: usize, tok: &str, what: &str) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(line, format!("bad {what} `{tok}`"))),
    }
}

fn arity(line: usize, toks: &[&str], n: usize) -> Result<()> {
    if toks.len() != n {
        return Err(Error::parse(
            line,
            format!("`{}` takes {} argument(s), got {}", toks[0], n - 1, toks.len() - 1),
        ));
    }
    Ok(())
}

fn dense(line: usize, ids: &BTreeSet<u32>, what: &str) -> Result<usize> {
    match ids.iter().enumerate().find(|(i, id)| *i as u32 != **id) {
        Some((i, _)) => Err(Error::parse(line, format!("{what} ids are not dense: {what} {i} missing"))),
        None => Ok(ids.len()),
    }
}

#[derive(Default)]
pub(crate) struct NetworkAccumulator {
    switches: BTreeSet<u32>,
    links: Vec<(usize, u32, u32, f64)>,
    hosts: BTreeMap<u32, (usize, u32)>,
    demands: Vec<(usize, u32, u32, f64)>,
}

impl NetworkAccumulator {
    /// Consumes one tokenized line. Returns false if the directive is not a
    /// network directive.
    pub fn accept(&mut self, line: usize, toks: &[&str]) -> Result<bool> {
        match toks[0] {
            "switch" => {
                arity(line, toks, 2)?;
                let id = parse_u32(line, toks[1], "switch id")?;
                if !self.switches.insert(id) {
                    return Err(Error::parse(line, format!("switch {id} declared twice")));
                }
            }
            "link" => {
                arity(line, toks, 4)?;
                let a = parse_u32(line, toks[1], "switch id")?;
                let b = parse_u32(line, toks[2], "switch id")?;
                let cap = parse_f64(line, toks[3], "capacity")?;
                self.links.push((line, a, b, cap));
            }
            "host" => {
                arity(line, toks, 3)?;
                let h = parse_u32(line, toks[1], "host id")?;
                let s = parse_u32(line, toks[2], "switch id")?;
                if self.hosts.insert(h, (line, s)).is_some() {
                    return Err(Error::parse(line, format!("host {h} declared twice")));
                }
            }
            "demand" => {
                arity(line, toks, 4)?;
                let src = parse_u32(line, toks[1], "host id")?;
                let dst = parse_u32(line, toks[2], "host id")?;
                let rate = parse_f64(line, toks[3], "rate")?;
                self.demands.push((line, src, dst, rate));
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn topology(&self, last_line: usize) -> Result<Topology> {
        let n = dense(last_line, &self.switches, "switch")?;
        let hosts: BTreeSet<u32> = self.hosts.keys().copied().collect();
        dense(last_line, &hosts, "host")?;
        let mut seen = BTreeMap::new();
        let mut b = Topology::builder().switches(n);
        for &(line, a, bb, cap) in &self.links {
            let link = Link::between(a, bb);
            if a == bb {
                return Err(Error::parse(line, format!("self-loop on switch {a}")));
            }
            if a as usize >= n || bb as usize >= n {
                return Err(Error::parse(line, format!("link {link} names an undeclared switch")));
            }
            if !(cap > 0.0) {
                return Err(Error::parse(line, format!("capacity must be positive, got {cap}")));
            }
            if let Some(prev) = seen.insert(link, line) {
                return Err(Error::parse(line, format!("link {link} already declared on line {prev}")));
            }
            b = b.link(a, bb, cap);
        }
        for (h, (line, s)) in &self.hosts {
            if *s as usize >= n {
                return Err(Error::parse(*line, format!("host {h} attaches to undeclared switch {s}")));
            }
            b = b.host(*s);
        }
        b.build()
    }

    pub fn matrix(&self, topology: &Topology) -> Result<TrafficMatrix> {
        let mut demands = Vec::with_capacity(self.demands.len());
        for &(line, src, dst, rate) in &self.demands {
            let d = Demand::new(src, dst, rate);
            TrafficMatrix::new(topology, vec![d]).map_err(|e| Error::parse(line, e.to_string()))?;
            demands.push(d);
        }
        TrafficMatrix::new(topology, demands)
    }
}

/// Parses a file holding a topology and, optionally, demands.
pub fn parse_network(text: &str) -> Result<Network> {
    let mut acc = NetworkAccumulator::default();
    let mut last = 0;
    for (i, raw) in text.lines().enumerate() {
        last = i + 1;
        let toks = tokens(raw);
        if toks.is_empty() {
            continue;
        }
        if !acc.accept(last, &toks)? {
            return Err(Error::parse(last, format!("unknown directive `{}`", toks[0])));
        }
    }
    let topology = acc.topology(last)?;
    let matrix = acc.matrix(&topology)?;
    Ok(Network { topology, matrix })
}

/// Parses a demands-only file against an existing topology.
pub fn parse_demands(text: &str, topology: &Topology) -> Result<TrafficMatrix> {
    let mut acc = NetworkAccumulator::default();
    for (i, raw) in text.lines().enumerate() {
        let toks = tokens(raw);
        if toks.is_empty() {
            continue;
        }
        if toks[0] != "demand" || !acc.accept(i + 1, &toks)? {
            return Err(Error::parse(i + 1, format!("unknown directive `{}`", toks[0])));
        }
    }
    acc.matrix(topology)
}

pub fn write_topology(topology: &Topology) -> String {
    let mut out = String::new();
    for s in topology.switches() {
        let _ = writeln!(out, "switch {s}");
    }
    for (l, cap) in topology.links() {
        let _ = writeln!(out, "link {} {} {cap}", l.lo(), l.hi());
    }
    for (h, s) in topology.hosts() {
        let _ = writeln!(out, "host {h} {s}");
    }
    out
}

pub fn write_matrix(matrix: &TrafficMatrix) -> String {
    let mut out = String::new();
    for d in matrix.demands() {
        let _ = writeln!(out, "demand {} {} {}", d.src, d.dst, d.rate_mbps);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{build_grid, uniform_matrix};
    use proptest::prelude::*;

    #[test]
    fn parses_small_network() {
        let text = "\
# two switches
switch 1
switch 0
link 0 1 100   # duplex
host 0 0
host 1 1
demand 0 1 10
demand 1 0 2.5
";
        let net = parse_network(text).unwrap();
        assert_eq!(net.topology.switch_count(), 2);
        assert_eq!(net.topology.capacity(&Link::between(0, 1)), Some(100.0));
        assert_eq!(net.matrix.len(), 2);
        assert_eq!(net.matrix.demands()[1].rate_mbps, 2.5);
    }

    #[test]
    fn rejects_with_line_numbers() {
        let err = |t: &str| match parse_network(t) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(err("switch 0\nfrobnicate 1\n"), 2);
        assert_eq!(err("switch 0\nswitch 1\nlink 0 1\n"), 3);
        assert_eq!(err("switch 0\nswitch 1\nlink 0 1 x\n"), 3);
        assert_eq!(err("switch 0\nswitch 1\nlink 0 1 5\nlink 1 0 5\n"), 4);
        assert_eq!(err("switch 0\nlink 0 0 5\n"), 2);
        assert_eq!(err("switch 0\nswitch 0\n"), 2);
        assert_eq!(err("switch 0\nhost 0 3\n"), 2);
        assert_eq!(err("switch 0\nhost 0 0\nhost 1 0\ndemand 0 0 1\n"), 4);
        assert_eq!(err("switch 0\nswitch 2\n"), 2);
    }

    #[test]
    fn demands_file_rejects_topology_directives() {
        let g = build_grid(2, 10.0, 1).unwrap();
        assert_eq!(parse_demands("demand 0 3 1\n", &g).unwrap().len(), 1);
        assert!(matches!(
            parse_demands("switch 0\n", &g),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn grid_round_trip() {
        let g = build_grid(3, 100.0, 2).unwrap();
        let m = uniform_matrix(&g, 2.5).unwrap();
        let text = write_topology(&g) + &write_matrix(&m);
        let net = parse_network(&text).unwrap();
        assert_eq!(net.topology, g);
        assert_eq!(net.matrix, m);
    }

    proptest! {
        #[test]
        fn random_network_round_trip(
            n in 2u32..8,
            edges in proptest::collection::btree_set((0u32..8, 0u32..8), 0..20),
            cap in 0.001f64..1e5,
            rate in 0.001f64..1e3,
        ) {
            let mut b = Topology::builder().switches(n as usize).host(0).host(n - 1);
            for (x, y) in edges {
                let (x, y) = (x % n, y % n);
                if x < y {
                    b = b.link(x, y, cap);
                }
            }
            let Ok(t) = b.build() else { return Ok(()) };
            let m = TrafficMatrix::new(&t, vec![Demand::new(0, 1, rate)]).unwrap();
            let text = write_topology(&t) + &write_matrix(&m);
            let net = parse_network(&text).unwrap();
            prop_assert_eq!(net.topology, t);
            prop_assert_eq!(net.matrix, m);
        }
    }
}

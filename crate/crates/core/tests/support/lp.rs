//! Fractional multicommodity flow bounds, solved independently of the
//! routing code.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use vlantree::netmodel::{Topology, TrafficMatrix};

struct Arcs {
    arcs: Vec<(usize, usize, f64)>,
}

fn arcs(topology: &Topology) -> Arcs {
    let mut arcs = Vec::new();
    for (l, cap) in topology.links() {
        arcs.push((l.lo().index(), l.hi().index(), cap));
        arcs.push((l.hi().index(), l.lo().index(), cap));
    }
    Arcs { arcs }
}

/// Per-source commodities: (source switch, [(destination switch, rate)]).
fn commodities(topology: &Topology, matrix: &TrafficMatrix) -> Vec<(usize, Vec<(usize, f64)>)> {
    let mut by_src: Vec<Vec<(usize, f64)>> = vec![Vec::new(); topology.switch_count()];
    for d in matrix.demands() {
        let s = topology.host_switch(d.src).unwrap().index();
        let t = topology.host_switch(d.dst).unwrap().index();
        by_src[s].push((t, d.rate_mbps));
    }
    by_src
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .collect()
}

/// Maximum total admitted rate when every demand may be split across paths
/// and partially served (0 <= served <= offered).
pub fn max_throughput(topology: &Topology, matrix: &TrafficMatrix) -> f64 {
    let n = topology.switch_count();
    let a = arcs(topology);
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let mut cap_terms: Vec<Vec<(Variable, f64)>> = vec![Vec::new(); a.arcs.len()];
    for (s, dests) in commodities(topology, matrix) {
        let flow: Vec<Variable> = a
            .arcs
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let v = lp.add_var(0.0, (0.0, f64::INFINITY));
                cap_terms[i].push((v, 1.0));
                v
            })
            .collect();
        // net inflow at each node equals what that node absorbs
        let mut absorb: Vec<Vec<(Variable, f64)>> = vec![Vec::new(); n];
        for &(t, rate) in &dests {
            let x = lp.add_var(1.0, (0.0, rate));
            absorb[t].push((x, -1.0));
            absorb[s].push((x, 1.0));
        }
        for v in 0..n {
            let mut terms = absorb[v].clone();
            for (i, &(from, to, _)) in a.arcs.iter().enumerate() {
                if to == v {
                    terms.push((flow[i], 1.0));
                }
                if from == v {
                    terms.push((flow[i], -1.0));
                }
            }
            lp.add_constraint(terms, ComparisonOp::Eq, 0.0);
        }
    }
    for (i, terms) in cap_terms.into_iter().enumerate() {
        lp.add_constraint(terms, ComparisonOp::Le, a.arcs[i].2);
    }
    lp.solve().unwrap().into_solution().unwrap().objective()
}

/// Smallest achievable maximum link utilisation when every demand is routed
/// in full as a splittable flow.
pub fn min_congestion(topology: &Topology, matrix: &TrafficMatrix) -> f64 {
    let n = topology.switch_count();
    let a = arcs(topology);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let lambda = lp.add_var(1.0, (0.0, f64::INFINITY));
    let mut cap_terms: Vec<Vec<(Variable, f64)>> = vec![Vec::new(); a.arcs.len()];
    for (s, dests) in commodities(topology, matrix) {
        let flow: Vec<Variable> = (0..a.arcs.len())
            .map(|i| {
                let v = lp.add_var(0.0, (0.0, f64::INFINITY));
                cap_terms[i].push((v, 1.0));
                v
            })
            .collect();
        let mut net = vec![0.0; n];
        for &(t, rate) in &dests {
            net[t] += rate;
            net[s] -= rate;
        }
        for v in 0..n {
            let mut terms = Vec::new();
            for (i, &(from, to, _)) in a.arcs.iter().enumerate() {
                if to == v {
                    terms.push((flow[i], 1.0));
                }
                if from == v {
                    terms.push((flow[i], -1.0));
                }
            }
            lp.add_constraint(terms, ComparisonOp::Eq, net[v]);
        }
    }
    for (i, mut terms) in cap_terms.into_iter().enumerate() {
        terms.push((lambda, -a.arcs[i].2));
        lp.add_constraint(terms, ComparisonOp::Le, 0.0);
    }
    lp.solve().unwrap().into_solution().unwrap().objective()
}

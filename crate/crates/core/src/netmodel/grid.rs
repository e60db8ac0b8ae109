use super::{Demand, Topology, TrafficMatrix};
use crate::error::{Error, Result};

/// A `side x side` grid with row-major switch ids; switch `r * side + c`
/// links to its right and lower neighbors. Hosts are numbered in switch order,
/// `host_per_switch` per switch.
pub fn build_grid(side: usize, link_capacity: f64, host_per_switch: usize) -> Result<Topology> {
    if side < 2 {
        return Err(Error::GridTooSmall(side));
    }
    if !(link_capacity > 0.0) || !link_capacity.is_finite() {
        return Err(Error::NonPositiveCapacity(link_capacity));
    }
    let id = |r: usize, c: usize| (r * side + c) as u32;
    let mut b = Topology::builder().switches(side * side);
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                b = b.link(id(r, c), id(r, c + 1), link_capacity);
            }
            if r + 1 < side {
                b = b.link(id(r, c), id(r + 1, c), link_capacity);
            }
        }
    }
    for s in 0..side * side {
        for _ in 0..host_per_switch {
            b = b.host(s as u32);
        }
    }
    b.build()
}

/// One demand of `rate_mbps` per ordered host pair on different switches,
/// ordered by (source, destination).
pub fn uniform_matrix(topology: &Topology, rate_mbps: f64) -> Result<TrafficMatrix> {
    if topology.host_count() < 2 {
        return Err(Error::TooFewHosts {
            need: 2,
            have: topology.host_count(),
        });
    }
    let hosts: Vec<_> = topology.hosts().collect();
    let mut demands = Vec::new();
    for (src, s_sw) in &hosts {
        for (dst, d_sw) in &hosts {
            if s_sw != d_sw {
                demands.push(Demand {
                    src: *src,
                    dst: *dst,
                    rate_mbps,
                });
            }
        }
    }
    TrafficMatrix::new(topology, demands)
}

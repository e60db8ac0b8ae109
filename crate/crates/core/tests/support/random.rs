use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vlantree::netmodel::{
    build_grid, Demand, Path, PathRole, PathSet, RoutedPath, SwitchId, Topology, TrafficMatrix,
};
use vlantree::tepath::{select_paths_with, BackupMode, SelectOptions};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` demands between random distinct-switch host pairs.
pub fn random_matrix(t: &Topology, rng: &mut ChaCha8Rng, count: usize, rates: &[f64]) -> TrafficMatrix {
    let hosts = t.host_count() as u32;
    let mut demands = Vec::new();
    while demands.len() < count {
        let (a, b) = (rng.random_range(0..hosts), rng.random_range(0..hosts));
        let sa = t.host_switch(vlantree::netmodel::HostId(a)).unwrap();
        let sb = t.host_switch(vlantree::netmodel::HostId(b)).unwrap();
        if sa != sb {
            demands.push(Demand::new(a, b, *rates.choose(rng).unwrap()));
        }
    }
    TrafficMatrix::new(t, demands).unwrap()
}

/// A simple path grown by a random walk that never revisits a switch.
pub fn random_walk(t: &Topology, rng: &mut ChaCha8Rng, max_hops: usize) -> Path {
    let start = SwitchId(rng.random_range(0..t.switch_count() as u32));
    let mut nodes = vec![start];
    let hops = rng.random_range(1..=max_hops);
    while nodes.len() <= hops {
        let u = *nodes.last().unwrap();
        let next: Vec<SwitchId> = t.neighbors(u).iter().copied().filter(|v| !nodes.contains(v)).collect();
        match next.choose(rng) {
            Some(&v) => nodes.push(v),
            None => break,
        }
    }
    if nodes.len() < 2 {
        nodes.push(t.neighbors(start)[0]);
    }
    Path::new(t, nodes).unwrap()
}

/// Either routed demands with backups, or free random walks; at most
/// `max_paths` paths on a 3x3 or 4x4 grid.
pub fn aggregation_instance(seed: u64, max_paths: usize) -> (Topology, PathSet) {
    let mut r = rng(seed);
    let side = if r.random_bool(0.5) { 3 } else { 4 };
    let t = build_grid(side, 100.0, 1).unwrap();
    if r.random_bool(0.5) {
        let k = r.random_range(1..=(max_paths / 2).max(1));
        let m = random_matrix(&t, &mut r, k, &[10.0, 20.0, 40.0]);
        let a = select_paths_with(&t, &m, SelectOptions { backup: BackupMode::Unreserved }).unwrap();
        let ps = a.path_set();
        if !ps.is_empty() {
            return (t, ps);
        }
    }
    let k = r.random_range(1..=max_paths);
    let entries = (0..k)
        .map(|i| {
            let p = random_walk(&t, &mut r, 2 * side);
            let host = |s: SwitchId| t.hosts_at(s).next().unwrap();
            RoutedPath {
                flow: i,
                demand: Demand {
                    src: host(p.source()),
                    dst: host(p.target()),
                    rate_mbps: 1.0,
                },
                role: PathRole::Primary,
                path: p,
            }
        })
        .collect();
    (t.clone(), PathSet::new(&t, entries).unwrap())
}

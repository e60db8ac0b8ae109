//! Flow-level throughput evaluation.
//!
//! Three routing modes are compared on the same traffic matrix:
//!
//! - [`Mode::SingleTree`]: every frame follows one spanning tree, the
//!   shortest-path tree grown from the lowest switch id (the stand-in for an
//!   802.1D root election).
//! - [`Mode::Multi`]: load-balanced paths aggregated into several VLAN trees.
//! - [`Mode::MultiBackup`]: as `Multi`, but a demand is admitted only with a
//!   disjoint backup whose bandwidth is reserved as well.
//!
//! Admission is binary at the full demand rate, in descending rate order.
//! Host access links are not capacitated.

use std::fmt;
use std::fmt::Write as _;

use crate::aggregate::aggregate_paths;
use crate::error::{Error, Result};
use crate::graph::{bfs_parents, climb};
use crate::netmodel::{build_grid, uniform_matrix, Demand, DirLink, Path, SwitchId, Topology, TrafficMatrix};
use crate::tepath::{
    admission_order, select_paths_with, BackupMode, DemandRoute, LinkLoads, PathAssignment,
    RejectReason, Routing, SelectOptions,
};

/// Largest grid experiment rows run concurrently.
const GRID_WORKERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    SingleTree,
    Multi,
    MultiBackup,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::SingleTree, Mode::Multi, Mode::MultiBackup];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::SingleTree => "single",
            Mode::Multi => "multi",
            Mode::MultiBackup => "multi+backup",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "single" => Ok(Mode::SingleTree),
            "multi" => Ok(Mode::Multi),
            "multi+backup" | "backup" => Ok(Mode::MultiBackup),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputResult {
    pub mode: Mode,
    pub aggregate_mbps: f64,
    /// Indices of admitted demands, ascending.
    pub admitted: Vec<usize>,
    pub rejected: Vec<usize>,
    /// Primary load per directed link.
    pub link_loads: LinkLoads,
    pub max_link_util: f64,
    /// VLAN trees needed to carry the admitted paths.
    pub vlan_count: usize,
    pub assignment: PathAssignment,
}

impl ThroughputResult {
    fn from_assignment(
        topology: &Topology,
        mode: Mode,
        assignment: PathAssignment,
        vlan_count: usize,
    ) -> ThroughputResult {
        let (admitted, rejected): (Vec<usize>, Vec<usize>) =
            (0..assignment.routes().len()).partition(|&i| assignment.routes()[i].is_admitted());
        let link_loads = assignment.primary_load().clone();
        ThroughputResult {
            mode,
            aggregate_mbps: assignment.admitted_mbps(),
            admitted,
            rejected,
            max_link_util: link_loads.max_utilization(topology),
            link_loads,
            vlan_count,
            assignment,
        }
    }
}

fn endpoints(topology: &Topology, matrix: &TrafficMatrix) -> Result<Vec<(SwitchId, SwitchId)>> {
    matrix
        .demands()
        .iter()
        .map(|d| {
            let ends = (topology.host_switch(d.src)?, topology.host_switch(d.dst)?);
            if ends.0 == ends.1 {
                return Err(Error::InvalidDemand {
                    src: d.src,
                    dst: d.dst,
                    reason: format!("both hosts attach to switch {}", ends.0),
                });
            }
            Ok(ends)
        })
        .collect()
}

/// Routes every demand on the shortest-path tree rooted at switch 0.
pub fn single_tree_route(topology: &Topology, matrix: &TrafficMatrix) -> Result<ThroughputResult> {
    if topology.switch_count() == 0 || !topology.is_connected() {
        return Err(Error::Disconnected);
    }
    let ends = endpoints(topology, matrix)?;
    let root = SwitchId(0);
    let parent = bfs_parents(topology, root);
    let tree_path = |s: SwitchId, t: SwitchId| {
        let up = climb(&parent, root, s).unwrap();
        let mut down = climb(&parent, root, t).unwrap();
        down.reverse();
        // drop the common prefix above the lowest common ancestor
        let mut lca = 0;
        while lca + 1 < up.len().min(down.len())
            && up[up.len() - 2 - lca] == down[lca + 1]
        {
            lca += 1;
        }
        let mut nodes: Vec<SwitchId> = up[..up.len() - lca].to_vec();
        nodes.extend_from_slice(&down[lca + 1..]);
        Path::trusted(nodes)
    };

    let mut loads = LinkLoads::default();
    let mut routes: Vec<Option<DemandRoute>> = vec![None; matrix.len()];
    for i in admission_order(topology, matrix, &ends) {
        let demand = matrix.demands()[i];
        let path = tree_path(ends[i].0, ends[i].1);
        let fits = path.dir_links().all(|d| {
            let cap = topology.capacity(&d.link()).unwrap();
            loads.get(d) + demand.rate_mbps <= cap * (1.0 + 1e-9)
        });
        let routing = if fits {
            loads.add_path(&path, demand.rate_mbps);
            Routing::Admitted {
                primary: path,
                backup: None,
            }
        } else {
            Routing::Rejected(RejectReason::NoCapacity)
        };
        routes[i] = Some(DemandRoute { demand, routing });
    }
    let assignment =
        PathAssignment::from_routes(topology, routes.into_iter().map(Option::unwrap).collect())?;
    Ok(ThroughputResult::from_assignment(
        topology,
        Mode::SingleTree,
        assignment,
        1,
    ))
}

/// Routes demands on load-balanced paths grouped into VLAN trees.
///
/// Without backups the result is the best of three feasible primary sets:
/// the load-balanced selection, the primaries admitted under reserved
/// backups, and the single-tree routing (one VLAN can always reproduce it).
/// The mode therefore never carries less than either of the other two.
pub fn multi_tree_route(
    topology: &Topology,
    matrix: &TrafficMatrix,
    with_backup: bool,
) -> Result<ThroughputResult> {
    if topology.switch_count() == 0 || !topology.is_connected() {
        return Err(Error::Disconnected);
    }
    let reserved = select_paths_with(
        topology,
        matrix,
        SelectOptions {
            backup: BackupMode::Reserved,
        },
    )?;
    let (mode, assignment) = if with_backup {
        (Mode::MultiBackup, reserved)
    } else {
        let balanced = select_paths_with(topology, matrix, SelectOptions::default())?;
        let reserved_primaries = PathAssignment::from_routes(
            topology,
            reserved
                .routes()
                .iter()
                .map(|r| DemandRoute {
                    demand: r.demand,
                    routing: match &r.routing {
                        Routing::Admitted { primary, .. } => Routing::Admitted {
                            primary: primary.clone(),
                            backup: None,
                        },
                        rejected => rejected.clone(),
                    },
                })
                .collect(),
        )?;
        let single = single_tree_route(topology, matrix)?.assignment;
        let mut best = balanced;
        for candidate in [reserved_primaries, single] {
            if candidate.admitted_mbps() > best.admitted_mbps() + 1e-9 {
                best = candidate;
            }
        }
        (Mode::Multi, best)
    };
    let aggregation = aggregate_paths(topology, &assignment.path_set())?;
    Ok(ThroughputResult::from_assignment(
        topology,
        mode,
        assignment,
        aggregation.tree_count(),
    ))
}

pub fn route(topology: &Topology, matrix: &TrafficMatrix, mode: Mode) -> Result<ThroughputResult> {
    match mode {
        Mode::SingleTree => single_tree_route(topology, matrix),
        Mode::Multi => multi_tree_route(topology, matrix, false),
        Mode::MultiBackup => multi_tree_route(topology, matrix, true),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub side: usize,
    pub rate_mbps: f64,
    pub demands: usize,
    /// One result per mode, in [`Mode::ALL`] order.
    pub results: Vec<ThroughputResult>,
}

impl ExperimentRow {
    pub fn size(&self) -> usize {
        self.side * self.side
    }

    pub fn result(&self, mode: Mode) -> &ThroughputResult {
        self.results.iter().find(|r| r.mode == mode).unwrap()
    }
}

/// Grid sizes and per-pair rates of the uniform-traffic experiment.
pub const GRID_SIDES: [usize; 5] = [4, 5, 6, 7, 8];
pub const GRID_RATES: [f64; 5] = [10.0, 8.0, 5.0, 2.0, 1.0];

/// Runs all three modes on `side x side` grids with uniform traffic at the
/// paired rate. Rows are evaluated concurrently and returned in input order.
pub fn run_grid_experiment(sides: &[usize], rates: &[f64], capacity: f64) -> Result<Vec<ExperimentRow>> {
    if sides.len() != rates.len() {
        return Err(Error::LengthMismatch(sides.len(), rates.len()));
    }
    let run_row = |side: usize, rate: f64| -> Result<ExperimentRow> {
        let grid = build_grid(side, capacity, 1)?;
        let matrix = uniform_matrix(&grid, rate)?;
        let results = Mode::ALL
            .iter()
            .map(|m| route(&grid, &matrix, *m))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentRow {
            side,
            rate_mbps: rate,
            demands: matrix.len(),
            results,
        })
    };
    let jobs: Vec<(usize, f64)> = sides.iter().copied().zip(rates.iter().copied()).collect();
    let mut rows = Vec::with_capacity(jobs.len());
    for chunk in jobs.chunks(GRID_WORKERS) {
        let out: Vec<Result<ExperimentRow>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&(side, rate)| scope.spawn(move || run_row(side, rate)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for r in out {
            rows.push(r?);
        }
    }
    Ok(rows)
}

pub const THROUGHPUT_CSV_HEADER: &str = "size,mode,aggregate_mbps,admitted,rejected,max_link_util";

pub fn throughput_csv_line(size: usize, r: &ThroughputResult) -> String {
    format!(
        "{},{},{:.3},{},{},{:.6}",
        size,
        r.mode,
        r.aggregate_mbps,
        r.admitted.len(),
        r.rejected.len(),
        r.max_link_util
    )
}

pub fn write_experiment_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from(THROUGHPUT_CSV_HEADER);
    out.push('\n');
    for row in rows {
        for r in &row.results {
            let _ = writeln!(out, "{}", throughput_csv_line(row.size(), r));
        }
    }
    out
}

/// Low-priority traffic carried on spare capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayResult {
    /// Mbps carried per overlay flow, in input order.
    pub carried: Vec<f64>,
    /// Spare capacity per directed link after the overlay.
    pub residual: LinkLoads,
}

impl OverlayResult {
    pub fn total_mbps(&self) -> f64 {
        self.carried.iter().fold(0.0, |a, c| a + c)
    }
}

/// Serves overlay flows in order, each taking
/// `min(offered, bottleneck residual)` along its path on top of `base`.
pub fn serve_overlay(
    topology: &Topology,
    base: &LinkLoads,
    overlay: &[(Demand, Path)],
) -> Result<OverlayResult> {
    let mut spare = LinkLoads::default();
    for (l, cap) in topology.links() {
        for d in l.directions() {
            spare.add_path(&Path::trusted(vec![d.from, d.to]), (cap - base.get(d)).max(0.0));
        }
    }
    let mut carried = Vec::with_capacity(overlay.len());
    for (demand, path) in overlay {
        for l in path.links() {
            topology.require_link(&l)?;
        }
        let bottleneck = path
            .dir_links()
            .map(|d: DirLink| spare.get(d))
            .fold(f64::INFINITY, f64::min);
        let take = demand.rate_mbps.min(bottleneck).max(0.0);
        if take > 0.0 {
            spare.add_path(path, -take);
        }
        carried.push(take);
    }
    Ok(OverlayResult {
        carried,
        residual: spare,
    })
}

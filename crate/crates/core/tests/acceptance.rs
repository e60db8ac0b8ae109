//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use support::{lp, oracle, random};
use vlantree::aggregate::{aggregate_paths_with, AggregateOptions};
use vlantree::failover::{backup_example, simulate_failover, Element, FailureScenario, RampUp};
use vlantree::flowsim::{run_grid_experiment, write_experiment_csv, Mode, GRID_RATES, GRID_SIDES};
use vlantree::mcast::{
    build_multicast_tree, check_group_limits, simulate_reliable_multicast, write_multicast_csv,
    IgmpMessage, LossModel, MulticastGroup, Port, ReliableConfig, SnoopState, TreeRouting,
};
use vlantree::netmodel::{build_grid, uniform_matrix, HostId, Link, PathRole, SwitchId, Topology};
use vlantree::qos::{ExcessAction, PolicerState, RateProfile, MAX_FRAME_BYTES};
use vlantree::tepath::{select_paths_with, BackupMode, PathAssignment, SelectOptions};

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn grid_dominance() -> Verdict {
    let start = Instant::now();
    let rows = run_grid_experiment(&GRID_SIDES, &GRID_RATES, 100.0).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut ratios = Vec::new();
    for row in &rows {
        let single = row.result(Mode::SingleTree).aggregate_mbps;
        let multi = row.result(Mode::Multi).aggregate_mbps;
        let ratio = multi / single;
        ratios.push(format!("{}x{}={ratio:.3}", row.side, row.side));
        ensure(multi >= single, || format!("side {}: multi {multi} < single {single}", row.side))?;
        if row.side >= 6 {
            ensure(ratio >= 2.0, || format!("side {}: ratio {ratio:.4} < 2", row.side))?;
        }
    }
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("ratios {} in {:.1?}", ratios.join(" "), elapsed))
}

fn lp_bracket() -> Verdict {
    let start = Instant::now();
    let mut notes = Vec::new();
    for (side, rate) in [(4, 10.0), (5, 8.0)] {
        let g = build_grid(side, 100.0, 1).unwrap();
        let m = uniform_matrix(&g, rate).unwrap();
        let bound = lp::max_throughput(&g, &m);
        for mode in Mode::ALL {
            let r = vlantree::flowsim::route(&g, &m, mode).unwrap();
            ensure(r.aggregate_mbps <= bound + 1e-6, || {
                format!("side {side} {mode}: {} above LP {bound}", r.aggregate_mbps)
            })?;
            if mode == Mode::Multi {
                let share = r.aggregate_mbps / bound;
                ensure(share >= 0.5, || format!("side {side}: multi at {share:.3} of LP"))?;
                notes.push(format!("{side}x{side} multi {:.0}/{bound:.0} ({share:.3})", r.aggregate_mbps));
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("{} in {:.1?}", notes.join(", "), elapsed))
}

fn failover_setup() -> (Topology, PathAssignment, vlantree::aggregate::AggregationResult) {
    let t = backup_example();
    let m = vlantree::netmodel::TrafficMatrix::new(&t, vec![vlantree::netmodel::Demand::new(0, 1, 10.0)]).unwrap();
    let a = select_paths_with(&t, &m, SelectOptions { backup: BackupMode::Reserved }).unwrap();
    let agg = vlantree::aggregate::aggregate_paths(&t, &a.path_set()).unwrap();
    (t, a, agg)
}

fn failover_timing() -> Verdict {
    let (t, a, agg) = failover_setup();
    ensure(a.routes()[0].primary().map(|p| p.to_string()) == Some("0-3-6-7-9".into()), || {
        "primary is not 0-3-6-7-9".into()
    })?;
    let base = FailureScenario::new(Element::Link(Link::between(3, 6)), 0.0, vec![SwitchId(2)]);
    let ramped = base.clone().with_ramp_up(RampUp::Uniform { lo: 300.0, hi: 400.0 });
    let (mut lo, mut hi, mut ramp_hi) = (f64::INFINITY, 0.0f64, 0.0f64);
    for seed in 0..1000 {
        for (scenario, ramp) in [(&base, false), (&ramped, true)] {
            let r = simulate_failover(&t, &a, &agg, scenario, seed).unwrap();
            ensure(r.recovered().count() == 1 && r.unrecoverable().count() == 0, || {
                format!("seed {seed}: flow did not recover")
            })?;
            let d = r.max_downtime_ms().unwrap();
            if ramp {
                ramp_hi = ramp_hi.max(d);
                ensure(d < 1000.0, || format!("seed {seed}: ramped downtime {d}"))?;
            } else {
                lo = lo.min(d);
                hi = hi.max(d);
                ensure(d > 400.0 && d < 600.0, || format!("seed {seed}: downtime {d}"))?;
            }
        }
    }
    Ok(format!(
        "1000 runs: downtime {lo:.1}..{hi:.1} ms, with ramp-up max {ramp_hi:.1} ms"
    ))
}

fn aggregation_correctness() -> Verdict {
    let mut improved = 0;
    for seed in 0..1000u64 {
        let (t, paths) = random::aggregation_instance(seed, 8);
        let n = t.switch_count();
        let entries = paths.entries();
        // replay of first-fit steps: trees as seen by the observer
        let mut replay: Vec<BTreeSet<Link>> = Vec::new();
        let mut replay_flows: Vec<BTreeSet<(usize, PathRole)>> = Vec::new();
        let mut step_error = None;
        let result = aggregate_paths_with(&t, &paths, AggregateOptions::default(), |step| {
            if step_error.is_some() {
                return;
            }
            let e = &entries[step.path];
            let links: BTreeSet<Link> = e.path.links().collect();
            if step.opened {
                let sibling = (e.flow, if e.role == PathRole::Primary { PathRole::Backup } else { PathRole::Primary });
                for (k, tree) in replay.iter().enumerate() {
                    let union: BTreeSet<Link> = tree.union(&links).copied().collect();
                    if oracle::acyclic(n, &union) && !replay_flows[k].contains(&sibling) {
                        step_error = Some(format!("seed {seed}: opened a tree although tree {k} fits"));
                    }
                }
                replay.push(BTreeSet::new());
                replay_flows.push(BTreeSet::new());
            }
            replay[step.tree].extend(links.iter().copied());
            replay_flows[step.tree].insert((e.flow, e.role));
            if &replay[step.tree] != step.edges || !oracle::acyclic(n, step.edges) {
                step_error = Some(format!("seed {seed}: step {} breaks acyclicity", step.path));
            }
        })
        .map_err(|e| format!("seed {seed}: {e}"))?;
        if let Some(e) = step_error {
            return Err(e);
        }
        let mut by_tree: BTreeMap<(usize, usize), BTreeSet<PathRole>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            let tree = &result.trees[result.membership[i]];
            ensure(e.path.links().all(|l| tree.edges.contains(&l)), || {
                format!("seed {seed}: path {} not in its tree", e.path)
            })?;
            by_tree.entry((e.flow, result.membership[i])).or_default().insert(e.role);
        }
        ensure(by_tree.values().all(|roles| roles.len() == 1), || {
            format!("seed {seed}: primary and backup share a tree")
        })?;
        for tree in &result.trees {
            ensure(oracle::spanning(n, &tree.edges), || format!("seed {seed}: tree not spanning"))?;
        }
        for u in &result.path_unions {
            ensure(oracle::acyclic(n, u), || format!("seed {seed}: cyclic union"))?;
        }
        let tags: BTreeSet<u16> = result.trees.iter().map(|t| t.tag.get()).collect();
        ensure(tags == (1..=result.tree_count() as u16).collect(), || format!("seed {seed}: tags"))?;
        let oracle_input: Vec<_> = entries
            .iter()
            .map(|e| {
                let role = if e.role == PathRole::Primary { 0 } else { 1 };
                (e.path.links().collect(), Some((e.flow, role)))
            })
            .collect();
        let best = oracle::min_partition(n, &oracle_input);
        ensure(result.tree_count() == best, || {
            format!("seed {seed}: {} trees, minimum is {best}", result.tree_count())
        })?;
        if result.first_fit_trees > best {
            improved += 1;
        }
    }
    Ok(format!(
        "1000 instances hold all properties and match the exhaustive minimum ({improved} needed the exact search)"
    ))
}

fn backup_disjointness() -> Verdict {
    let mut checked = 0usize;
    let mut check = |a: &PathAssignment| -> Result<(), String> {
        for r in a.routes() {
            if let (Some(p), Some(b)) = (r.primary(), r.backup()) {
                checked += 1;
                let pl: BTreeSet<Link> = p.links().collect();
                let bl: BTreeSet<Link> = b.links().collect();
                let pi: BTreeSet<SwitchId> = p.interior().iter().copied().collect();
                let bn: BTreeSet<SwitchId> = b.nodes().iter().copied().collect();
                let bi: BTreeSet<SwitchId> = b.interior().iter().copied().collect();
                let pn: BTreeSet<SwitchId> = p.nodes().iter().copied().collect();
                ensure(
                    pl.is_disjoint(&bl) && pi.is_disjoint(&bn) && bi.is_disjoint(&pn),
                    || format!("{p} and {b} overlap"),
                )?;
            }
        }
        Ok(())
    };
    for seed in 0..300u64 {
        let mut r = random::rng(seed);
        let side = [3, 4, 5].choose(&mut r).copied().unwrap();
        let t = build_grid(side, 100.0, 1).unwrap();
        let k = r.random_range(1..40);
        let m = random::random_matrix(&t, &mut r, k, &[5.0, 10.0, 30.0, 60.0]);
        for mode in [BackupMode::Unreserved, BackupMode::Reserved] {
            check(&select_paths_with(&t, &m, SelectOptions { backup: mode }).unwrap())?;
        }
    }
    for side in [4, 5, 6] {
        let g = build_grid(side, 100.0, 1).unwrap();
        let m = uniform_matrix(&g, GRID_RATES[side - 4]).unwrap();
        check(&vlantree::flowsim::route(&g, &m, Mode::MultiBackup).unwrap().assignment)?;
    }
    ensure(checked > 1000, || format!("only {checked} backups generated"))?;
    Ok(format!("{checked} backups, all link- and interior-switch-disjoint"))
}

/// Routes to the root switch: each switch's parent is its lowest-id
/// neighbor one hop closer to the root.
fn oracle_route(t: &Topology, root: SwitchId, from: SwitchId) -> Vec<SwitchId> {
    let links = oracle::all_links(t);
    let dist = oracle::bfs(t.switch_count(), &links, root.index(), &BTreeSet::new());
    let mut route = vec![from];
    let mut cur = from;
    while cur != root {
        let d = dist[cur.index()].unwrap();
        cur = (0..t.switch_count() as u32)
            .map(SwitchId)
            .find(|&u| links.contains(&Link::new(u, cur)) && dist[u.index()] == Some(d - 1))
            .unwrap();
        route.push(cur);
    }
    route
}

fn snoop_oracle(
    t: &Topology,
    groups: &BTreeMap<u32, (HostId, BTreeSet<HostId>)>,
) -> BTreeMap<SwitchId, BTreeMap<u32, BTreeSet<Port>>> {
    let mut out: BTreeMap<SwitchId, BTreeMap<u32, BTreeSet<Port>>> = BTreeMap::new();
    for (&g, (root, members)) in groups {
        let rs = t.host_switch(*root).unwrap();
        for &m in members {
            let route = oracle_route(t, rs, t.host_switch(m).unwrap());
            let mut port = Port::Host(m);
            for s in route {
                out.entry(s).or_default().entry(g).or_default().insert(port);
                port = Port::Link(s);
            }
        }
    }
    out
}

fn multicast() -> Verdict {
    let t = build_grid(3, 100.0, 1).unwrap();
    let mut r = random::rng(6);
    let mut state = SnoopState::new();
    let mut groups: BTreeMap<u32, (HostId, BTreeSet<HostId>)> = BTreeMap::new();
    for g in 0..6u32 {
        let root = HostId(r.random_range(0..9));
        state.register_group(&t, g, root, &TreeRouting::ShortestPath).unwrap();
        groups.insert(g, (root, BTreeSet::new()));
    }
    for step in 1..=10_000 {
        let g = r.random_range(0..6u32);
        let h = r.random_range(0..9u32);
        let members = &mut groups.get_mut(&g).unwrap().1;
        let msg = if r.random_bool(0.55) {
            members.insert(HostId(h));
            IgmpMessage::join(g, h)
        } else {
            members.remove(&HostId(h));
            IgmpMessage::leave(g, h)
        };
        state.process_igmp(&t, msg).unwrap();
        if step % 1000 == 0 {
            ensure(state.snapshot() == snoop_oracle(&t, &groups), || {
                format!("snoop state diverges after {step} events")
            })?;
        }
    }

    // group limits: single-switch groups with known per-switch counts plus
    // a few spanning groups counted by the route oracle
    let line = Topology::builder()
        .switches(4)
        .link(0, 1, 1.0)
        .link(1, 2, 1.0)
        .link(2, 3, 1.0)
        .host(0)
        .host(1)
        .host(2)
        .host(3)
        .build()
        .unwrap();
    let mut flagged_cases = 0;
    for trial in 0..20u64 {
        let mut r = random::rng(100 + trial);
        let mut state = SnoopState::new();
        let mut expect: BTreeMap<SwitchId, usize> = BTreeMap::new();
        let mut gid = 0u32;
        for s in 0..4u32 {
            for _ in 0..r.random_range(495..=505) {
                state.register_group(&line, gid, HostId(s), &TreeRouting::ShortestPath).unwrap();
                state.process_igmp(&line, IgmpMessage::join(gid, s)).unwrap();
                *expect.entry(SwitchId(s)).or_insert(0) += 1;
                gid += 1;
            }
        }
        for _ in 0..r.random_range(0..4) {
            let (root, member) = (r.random_range(0..4u32), r.random_range(0..4u32));
            state.register_group(&line, gid, HostId(root), &TreeRouting::ShortestPath).unwrap();
            state.process_igmp(&line, IgmpMessage::join(gid, member)).unwrap();
            for s in oracle_route(&line, SwitchId(root), SwitchId(member)) {
                *expect.entry(s).or_insert(0) += 1;
            }
            gid += 1;
        }
        let want: Vec<(SwitchId, usize)> = expect.into_iter().filter(|&(_, c)| c > 500).collect();
        flagged_cases += want.len();
        let got = check_group_limits(&state, 500).unwrap();
        ensure(got == want, || format!("limit trial {trial}: {got:?} != {want:?}"))?;
    }

    // retransmissions under Bernoulli loss
    let g = MulticastGroup::new(1, 0, 1..=8).unwrap();
    let tree = build_multicast_tree(&t, &g, &TreeRouting::ShortestPath).unwrap();
    let p = 0.01;
    let trials = 10_000;
    let config = ReliableConfig { max_retries: None, ..ReliableConfig::default() };
    let loss = LossModel::Bernoulli { p };
    let total: u64 = (0..trials)
        .map(|s| simulate_reliable_multicast(&t, &g, &tree, &loss, config, s).unwrap().retransmissions)
        .sum();
    let mean = total as f64 / trials as f64;
    let expect = 8.0 * p / (1.0 - p);
    let sigma = (8.0 * p / (1.0 - p).powi(2) / trials as f64).sqrt();
    ensure((mean - expect).abs() <= 3.0 * sigma, || {
        format!("mean retransmissions {mean:.5} vs {expect:.5} +- {:.5}", 3.0 * sigma)
    })?;
    Ok(format!(
        "snoop matches oracle over 10^4 events; limits exact ({flagged_cases} switches over 500); mean retx {mean:.4} vs {expect:.4} (3 sigma {:.4})",
        3.0 * sigma
    ))
}

fn policer() -> Verdict {
    // fluid check: Poisson frames at twice the committed rate for 10 s
    let profile = RateProfile::new(10.0, 10 * MAX_FRAME_BYTES as u64, ExcessAction::Drop).unwrap();
    let mut state = PolicerState::new(profile);
    let mut r = random::rng(7);
    let mean_size = (64.0 + MAX_FRAME_BYTES as f64) / 2.0;
    let arrivals = Exp::new(2.0 * profile.bytes_per_sec() / mean_size).unwrap();
    let horizon = 10.0;
    let (mut now, mut offered, mut conform) = (0.0f64, 0.0f64, 0.0f64);
    loop {
        now += arrivals.sample(&mut r);
        if now > horizon {
            break;
        }
        let size = r.random_range(64..=MAX_FRAME_BYTES);
        offered += size as f64;
        if state.police(size, Duration::from_secs_f64(now)).unwrap() == vlantree::qos::Decision::Conform {
            conform += size as f64;
        }
    }
    let committed = profile.bytes_per_sec();
    let fluid = offered.min(profile.burst_bytes as f64 + committed * horizon) / horizon;
    let got = conform / horizon;
    let vs_committed = (got - committed).abs() / committed;
    let vs_fluid = (got - fluid).abs() / fluid;
    ensure(vs_committed <= 0.02 && vs_fluid <= 0.02, || {
        format!("conform {got:.0} B/s, committed {committed:.0}, fluid {fluid:.0}")
    })?;

    // token bounds
    let mut r = random::rng(8);
    let mut violations = 0u64;
    let mut events = 0u64;
    while events < 1_000_000 {
        let rate = r.random_range(0.1..1000.0);
        let burst = r.random_range(MAX_FRAME_BYTES as u64..200_000);
        let action = if r.random_bool(0.5) { ExcessAction::Drop } else { ExcessAction::Remark };
        let mut s = PolicerState::new(RateProfile::new(rate, burst, action).unwrap());
        let mut t = Duration::ZERO;
        for _ in 0..10_000 {
            if r.random_bool(0.8) {
                t += Duration::from_nanos(r.random_range(0..2_000_000));
            }
            let size = r.random_range(0..=MAX_FRAME_BYTES);
            s.police(size, t).unwrap();
            events += 1;
            if !(s.tokens() >= 0.0 && s.tokens() <= burst as f64) {
                violations += 1;
            }
        }
    }
    ensure(violations == 0, || format!("{violations} token bound violations"))?;
    Ok(format!(
        "conform {:.3}% off committed, {:.3}% off fluid; {events} frames within token bounds",
        100.0 * vs_committed,
        100.0 * vs_fluid
    ))
}

fn determinism() -> Verdict {
    let run = || -> String {
        let mut out = write_experiment_csv(&run_grid_experiment(&[4, 5], &[10.0, 8.0], 100.0).unwrap());
        let (t, a, agg) = failover_setup();
        for seed in 0..20 {
            let sc = FailureScenario::new(Element::Link(Link::between(3, 6)), 0.0, vec![SwitchId(2), SwitchId(8)])
                .with_ramp_up(RampUp::Uniform { lo: 300.0, hi: 400.0 });
            out += &vlantree::failover::write_failover_csv(&simulate_failover(&t, &a, &agg, &sc, seed).unwrap());
        }
        let g3 = build_grid(3, 100.0, 1).unwrap();
        let group = MulticastGroup::new(1, 0, 1..=8).unwrap();
        let tree = build_multicast_tree(&g3, &group, &TreeRouting::ShortestPath).unwrap();
        let reports: Vec<_> = (0..50)
            .map(|s| {
                simulate_reliable_multicast(&g3, &group, &tree, &LossModel::PerHop { p: 0.05 }, ReliableConfig::default(), s)
                    .unwrap()
            })
            .collect();
        out += &write_multicast_csv(&reports);
        let m = uniform_matrix(&g3, 30.0).unwrap();
        let p = RateProfile::new(100.0, 3000, ExcessAction::Remark).unwrap();
        let profiles = (0..9).map(|h| (HostId(h), p)).collect();
        let policed = vlantree::qos::run_policed(&g3, &m, &profiles, vlantree::qos::PolicingScope::Edge).unwrap();
        out += &vlantree::qos::write_policing_csv(&m, &policed);
        out
    };
    let (a, b) = (run(), run());
    ensure(a == b, || "CSV output differs between runs".into())?;
    Ok(format!("{} CSV bytes identical across two runs", a.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("grid experiment dominance", grid_dominance),
        ("LP bracket", lp_bracket),
        ("failover timing", failover_timing),
        ("aggregation correctness", aggregation_correctness),
        ("backup disjointness", backup_disjointness),
        ("multicast", multicast),
        ("policer", policer),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use tempfile::TempDir;

use vlantree::failover::{backup_example, Element, RampUp};
use vlantree::flowsim::Mode;
use vlantree::mcast::{LossModel, MulticastGroup};
use vlantree::netmodel::text::write_topology;
use vlantree::netmodel::{HostId, Link, SwitchId};
use vlantree::qos::{ExcessAction, PolicingScope, RateProfile};
use vlantree_cli::compare::compare_paths;
use vlantree_cli::runner::{run, Report, Violation, FAILOVER_CSV, MULTICAST_CSV, POLICING_CSV, THROUGHPUT_CSV};
use vlantree_cli::scenario::{Failure, Scenario, TopologySource, TrafficSource};
use vlantree_cli::CliError;

fn vlantree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlantree")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn grid_scenario_yields_three_rows() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "s.txt", "grid 4 100\nuniform 10\nmodes all\nout res\n");
    let o = vlantree(&["run", &sc]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("res").join(THROUGHPUT_CSV)).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("16,single,"));
    assert!(rows[1].starts_with("16,multi,"));
    assert!(rows[2].starts_with("16,multi+backup,"));
    assert!(stdout(&o).contains("invariants: all hold"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let empty = write(dir.path(), "empty.txt", "# nothing here\n");
    assert_eq!(vlantree(&["run", &empty]).status.code(), Some(1));
    assert_eq!(vlantree(&[]).status.code(), Some(1));
    assert_eq!(vlantree(&["run", "/no/such/file"]).status.code(), Some(1));

    let bad = write(dir.path(), "bad.txt", "grid 4 100\nuniform 10\nmodes fastest\n");
    let o = vlantree(&["run", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let unseeded = write(dir.path(), "u.txt", "grid 3 100\nuniform 1\nfail link 0 1 at 0\nmonitor 4\n");
    let o = vlantree(&["run", &unseeded, "--check"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("needs a seed"));
    assert_eq!(vlantree(&["run", &unseeded, "--check", "--seed", "3"]).status.code(), Some(0));
}

#[test]
fn invariant_violations_exit_3() {
    let report = Report {
        files: Vec::new(),
        violations: vec![Violation { property: "capacity", detail: "0>1 carries 120 of 100".into() }],
    };
    let e = report.status().unwrap_err();
    assert_eq!(e.exit_code(), 3);
    assert_eq!(e.to_string(), "invariant `capacity` violated: 0>1 carries 120 of 100");
}

#[test]
fn check_mode_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let sc = write(dir.path(), "s.txt", "grid 3 100\nuniform 5\n");
    let o = vlantree(&["run", &sc, "--check"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let text = "\
grid 4 100
uniform 10
fail link 5 6 at 0
fail switch 9 at 20
monitor 0 15
rampup 300 400
group 1 root 0 members 3 5 10 15
group 2 root 7 members 0 1 2
loss 0.05
trials 25
profile * rate 60 burst 4000 action remark
seed 99
";
    let sc = write(dir.path(), "s.txt", text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = vlantree(&["run", &sc, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for name in [THROUGHPUT_CSV, FAILOVER_CSV, MULTICAST_CSV, POLICING_CSV, "summary.txt"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let o = vlantree(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "");
    // a different seed changes the stochastic reports only
    let c = dir.path().join("c");
    vlantree(&["run", &sc, "--out", c.to_str().unwrap(), "--seed", "100"]);
    assert_eq!(std::fs::read(a.join(THROUGHPUT_CSV)).unwrap(), std::fs::read(c.join(THROUGHPUT_CSV)).unwrap());
    assert_ne!(std::fs::read(a.join(FAILOVER_CSV)).unwrap(), std::fs::read(c.join(FAILOVER_CSV)).unwrap());
}

#[test]
fn doubling_capacity_never_lowers_aggregates() {
    let dir = TempDir::new().unwrap();
    for cap in [100, 200] {
        let sc = write(dir.path(), &format!("s{cap}.txt"), &format!("grid 5 {cap}\nuniform 8\nout r{cap}\n"));
        assert_eq!(vlantree(&["run", &sc]).status.code(), Some(0));
    }
    let deltas = compare_paths(&dir.path().join("r100"), &dir.path().join("r200")).unwrap();
    let agg: Vec<_> = deltas.iter().filter(|d| d.column == "aggregate_mbps").collect();
    assert_eq!(agg.len(), 3);
    assert!(agg.iter().all(|d| d.change() >= 0.0), "{deltas:?}");
}

#[test]
fn compare_rejects_schema_mismatch() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.csv", "size,mode,aggregate_mbps\n16,single,1\n");
    let b = write(dir.path(), "b.csv", "size,mode,admitted\n16,single,1\n");
    let o = vlantree(&["compare", &a, &b]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schemas differ"));
}

#[test]
fn files_and_failover_on_the_backup_example() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "net.txt", &write_topology(&backup_example()));
    write(dir.path(), "demands.txt", "demand 0 1 10\n");
    let sc = write(
        dir.path(),
        "s.txt",
        "topology net.txt\ntraffic demands.txt\nmodes multi+backup\nfail link 3 6 at 0\nmonitor 2\ntrials 200\nseed 1\n",
    );
    let o = vlantree(&["run", &sc]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out").join(FAILOVER_CSV)).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 200);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[0], "link 3 6");
        let downtime: f64 = f[7].parse().unwrap();
        assert!(downtime > 400.0 && downtime < 600.0, "{r}");
        assert_eq!(f[8], "recovered");
    }
    let demands_in_topology = write(dir.path(), "mixed.txt", "switch 0\nswitch 1\nlink 0 1 10\nhost 0 0\nhost 1 1\ndemand 0 1 1\n");
    let s = Scenario::parse(&format!("topology {demands_in_topology}\nuniform 1\n")).unwrap();
    assert!(matches!(run(&s, dir.path(), None), Err(CliError::Scenario(_))));
}

#[test]
fn missing_profile_is_reported() {
    let s = Scenario::parse("grid 2 100\nuniform 1\nprofile 0 rate 1 burst 2000 action drop\n").unwrap();
    let e = run(&s, Path::new("."), None).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(e.to_string().contains("host 1"));
}

fn arb_scenario() -> impl Strategy<Value = Scenario> {
    let topo = prop_oneof![
        (2usize..9, 1u32..1000).prop_map(|(side, c)| TopologySource::Grid { side, capacity_mbps: c as f64 / 4.0 }),
        "[a-z]{1,8}\\.txt".prop_map(|p| TopologySource::File(p.into())),
    ];
    let traffic = prop_oneof![
        (1u32..400).prop_map(|r| TrafficSource::Uniform(r as f64 / 8.0)),
        "[a-z]{1,8}\\.dem".prop_map(|p| TrafficSource::File(p.into())),
    ];
    let failure = (any::<bool>(), 0u32..20, 1u32..20, 0u32..5000).prop_map(|(link, a, b, at)| Failure {
        element: if link { Element::Link(Link::between(a, a + b)) } else { Element::Switch(SwitchId(a)) },
        at_ms: at as f64 / 2.0,
    });
    let group = (any::<u32>(), 0u32..30, prop::collection::btree_set(0u32..30, 1..6))
        .prop_map(|(id, root, m)| MulticastGroup::new(id % 50, root, m).unwrap());
    let profile = (prop::option::of(0u32..30), 1u32..500, 1522u64..100_000, any::<bool>(), 1u8..8)
        .prop_map(|(h, r, b, drop, base)| {
            let action = if drop { ExcessAction::Drop } else { ExcessAction::Remark };
            let p = RateProfile::new(r as f64 / 2.0, b, action).unwrap().with_classes(base, base - 1).unwrap();
            (h.map(HostId), p)
        });
    (
        (topo, traffic, prop::collection::btree_set(0usize..3, 0..4), prop::collection::vec(failure, 0..4)),
        ((0u32..500, 0u32..500), 0u32..10, 0u32..10, 0u8..3, prop::collection::btree_set(0u32..30, 0..4)),
        (prop::collection::vec(group, 0..4), 0u8..3, 1u32..200, prop::option::of(0u32..100), 1usize..1000, 1u32..500),
        (prop::collection::vec(profile, 0..4), any::<bool>(), prop::option::of(any::<u64>()), prop::option::of("[a-z]{1,6}")),
    )
        .prop_map(|((topo, traffic, modes, failures), (det, hop, lookup, ramp, mons), grp, pol)| {
            let mut s = Scenario::new(topo, traffic);
            if !modes.is_empty() {
                s.modes = modes.into_iter().map(|i| Mode::ALL[i]).collect();
            }
            s.failures = failures;
            s.detection_ms = (det.0.min(det.1) as f64, det.0.max(det.1) as f64);
            s.hop_latency_ms = hop as f64 / 4.0;
            s.lookup_ms = lookup as f64;
            s.ramp_up = match ramp {
                0 => RampUp::Off,
                1 => RampUp::Fixed(350.5),
                _ => RampUp::Uniform { lo: 300.0, hi: 400.0 },
            };
            s.monitors = mons.into_iter().map(SwitchId).collect();
            let (groups, loss, p, retries, limit, trials) = grp;
            let mut by_id = std::collections::BTreeMap::new();
            for g in groups {
                by_id.insert(g.id, g);
            }
            s.groups = by_id.into_values().collect();
            s.loss = match loss {
                0 => LossModel::Lossless,
                1 => LossModel::Bernoulli { p: p as f64 / 1000.0 },
                _ => LossModel::PerHop { p: p as f64 / 1000.0 },
            };
            s.max_retries = retries;
            s.group_limit = limit;
            s.trials = trials;
            let (profiles, all, seed, out) = pol;
            s.profiles = profiles.into_iter().collect();
            s.scope = if all { PolicingScope::AllSwitches } else { PolicingScope::Edge };
            s.seed = seed;
            s.out = out.map(Into::into);
            s
        })
}

proptest! {
    #[test]
    fn scenario_round_trip(s in arb_scenario()) {
        let text = s.to_string();
        let back = Scenario::parse(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.to_string(), text);
    }
}

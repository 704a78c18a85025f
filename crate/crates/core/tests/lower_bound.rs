use std::collections::BTreeSet;

use fastbft::checker::{check, Check};
use fastbft::lower_bound::{
    first_difference, generate_rho_schedule, generate_tfaulty, is_degenerate, receive_sequence, rho_family,
    rho_simulation, tfaulty_sets, GroupPartition, LowerBoundError,
};
use fastbft::quorum::{Mode, QuorumConfig};
use fastbft::sim::SimOutcome;
use fastbft::types::{ProcessId, Value};

const D: u64 = 1000;

fn cfg(n: u32, f: u32, t: u32) -> QuorumConfig {
    let mode = if f == t && n >= 5 * f - 1 { Mode::Vanilla } else { Mode::Generalized };
    QuorumConfig::new(n, f, t, mode).unwrap()
}

fn ids(ps: &[ProcessId]) -> Vec<u32> {
    ps.iter().map(|p| p.0).collect()
}

#[test]
fn partition_for_minimum_configs() {
    let part = GroupPartition::new(&cfg(9, 2, 2)).unwrap();
    assert_eq!(part.p, ProcessId(2));
    assert_eq!(ids(part.group(1)), vec![1, 3]);
    assert_eq!(ids(part.group(2)), vec![4, 9]);
    assert_eq!(ids(part.group(3)), vec![5]);
    assert_eq!(ids(part.group(4)), vec![6]);
    assert_eq!(ids(part.group(5)), vec![7, 8]);
    assert_eq!(ids(&part.extra), vec![9]);
    assert_eq!(ids(part.group(2).iter().copied().filter(|q| !part.extra.contains(q)).collect::<Vec<_>>().as_slice()), vec![4]);

    let part = GroupPartition::new(&cfg(12, 3, 2)).unwrap();
    let sizes: Vec<usize> = (1..=5).map(|i| part.group(i).len()).collect();
    assert_eq!(sizes, vec![2, 3, 2, 2, 2]);
    assert_eq!(part.extra.len(), 1);
    let all: BTreeSet<ProcessId> = (1..=5).flat_map(|i| part.group(i).to_vec()).chain([part.p]).collect();
    assert_eq!(all.len(), 12);
}

#[test]
fn tfaulty_sets_cover_all_subsets_without_leader() {
    for (n, f, t) in [(4, 1, 1), (9, 2, 2), (7, 2, 1)] {
        let c = cfg(n, f, t);
        let sets = tfaulty_sets(&c);
        let binom = |a: u64, b: u64| (0..b).fold(1u64, |acc, i| acc * (a - i) / (i + 1));
        assert_eq!(sets.len() as u64, binom(n as u64 - 1, t as u64));
        assert!(sets.iter().all(|s| s.len() == t as usize && !s.contains(&ProcessId(2))));
        assert_eq!(sets.iter().collect::<BTreeSet<_>>().len(), sets.len());
    }
}

#[test]
fn tfaulty_runs_decide_at_two_delta() {
    for (n, f, t) in [(4, 1, 1), (9, 2, 2), (7, 2, 1)] {
        let c = cfg(n, f, t);
        for set in tfaulty_sets(&c) {
            let s = generate_tfaulty(&c, &set, vec![Value::from("A"); n as usize]).unwrap();
            let out = s.run().unwrap();
            let d = out.decisions();
            assert_eq!(d.len(), (n - t) as usize, "{}", s.name);
            assert!(d.iter().all(|(_, at, _)| *at == 2 * D), "{}", s.name);
        }
    }
}

#[test]
fn tfaulty_set_containing_leader() {
    // The leader's proposal goes out at time 0, before the crash, so the fast path still
    // completes. A leader that crashes at 0 forces a view change instead.
    let c = cfg(9, 2, 2);
    let set: BTreeSet<ProcessId> = [ProcessId(2), ProcessId(5)].into();
    let mut s = generate_tfaulty(&c, &set, vec![Value::from("A"); 9]).unwrap();
    let d = s.run().unwrap().decisions();
    assert_eq!(d.len(), 7);
    assert!(d.iter().all(|(_, at, v)| *at == 2 * D && *v == Value::from("A")));
    s.script = fastbft::scenario::Script::Crash { at: 0 };
    let d = s.run().unwrap().decisions();
    assert_eq!(d.len(), 7);
    assert!(d.iter().all(|(_, at, v)| *at > 2 * D && *v == Value::from("A")));
}

#[test]
fn bad_tfaulty_sets_are_rejected() {
    let c = cfg(9, 2, 2);
    let one: BTreeSet<ProcessId> = [ProcessId(3)].into();
    assert_eq!(generate_tfaulty(&c, &one, vec![Value::from("A"); 9]).unwrap_err(), LowerBoundError::BadFaultySet { t: 2 });
}

#[test]
fn degenerate_configs_only_have_rho1() {
    let (v0, v1) = (Value::from("0"), Value::from("1"));
    let c = cfg(4, 1, 1);
    assert!(is_degenerate(&c));
    assert_eq!(rho_family(&c, &v0, &v1).unwrap().len(), 1);
    assert_eq!(generate_rho_schedule(&c, 2, &v0, &v1).unwrap_err(), LowerBoundError::Degenerate);
    assert_eq!(generate_rho_schedule(&cfg(9, 2, 2), 6, &v0, &v1).unwrap_err(), LowerBoundError::NoSuchExecution(6));
    assert!(!is_degenerate(&cfg(9, 2, 2)));
}

fn run_rho(c: &QuorumConfig, which: u8) -> SimOutcome {
    let (v0, v1) = (Value::from("0"), Value::from("1"));
    let sim = generate_rho_schedule(c, which, &v0, &v1).unwrap().scenario.sim;
    rho_simulation(c, which, &v0, &v1, sim).unwrap().record_deliveries(true).run().unwrap()
}

#[test]
fn rho_family_survives_at_minimum_n() {
    for c in [cfg(9, 2, 2), cfg(12, 3, 2)] {
        let family = rho_family(&c, &Value::from("0"), &Value::from("1")).unwrap();
        assert_eq!(family.len(), 5);
        for r in family {
            let out = r.scenario.run().unwrap();
            let report = check(&out.trace, &[Check::Agreement, Check::Termination]);
            assert!(report.passed(), "{}: {}", r.scenario.name, report.summary());
        }
    }
}

#[test]
fn rho_byzantine_sets_respect_f() {
    for c in [cfg(9, 2, 2), cfg(12, 3, 2)] {
        for r in rho_family(&c, &Value::from("0"), &Value::from("1")).unwrap() {
            assert!(r.scenario.byzantine.len() <= c.f() as usize, "{}", r.scenario.name);
        }
    }
}

#[test]
fn p3_cannot_tell_rho2_from_rho1_or_rho4_from_rho5() {
    for c in [cfg(9, 2, 2), cfg(12, 3, 2)] {
        let part = GroupPartition::new(&c).unwrap();
        let p3 = part.group(3);
        let seq = |w| receive_sequence(&run_rho(&c, w), p3, 2 * D);
        let (r1, r2, r4, r5) = (seq(1), seq(2), seq(4), seq(5));
        assert!(!r1.is_empty() && !r5.is_empty());
        assert_eq!(first_difference(&r2, &r1), None, "n={}", c.n());
        assert_eq!(first_difference(&r4, &r5), None, "n={}", c.n());
        // The two reference executions themselves differ for P3.
        assert!(first_difference(&r1, &r5).is_some());
    }
}

#[test]
fn rho_scenarios_round_trip_through_text() {
    let c = cfg(9, 2, 2);
    for r in rho_family(&c, &Value::from("0"), &Value::from("1")).unwrap() {
        let text = r.scenario.to_toml();
        assert_eq!(fastbft::scenario::Scenario::parse(&text).unwrap(), r.scenario);
    }
}

use fastbft::quorum::{intersection_report, minimum_n, ConfigError, Mode, QuorumConfig};

/// All `k`-element subsets of `0..n` as bitmasks, built by recursive choice.
fn combinations(n: usize, k: usize) -> Vec<u16> {
    fn go(i: usize, n: usize, left: usize, cur: u16, out: &mut Vec<u16>) {
        if left == 0 {
            out.push(cur);
        } else if n - i >= left {
            go(i + 1, n, left - 1, cur | (1 << i), out);
            go(i + 1, n, left, cur, out);
        }
    }
    let mut out = Vec::new();
    if k <= n {
        go(0, n, k, 0, &mut out);
    }
    out
}

/// Smallest number of correct processes in `q1 ∩ q2` over every placement of at most
/// `byz` Byzantine processes with at most `byz_in_q2` of them in `q2`.
fn worst_case(n: usize, s1: usize, s2: usize, byz: usize, byz_in_q2: usize) -> Option<usize> {
    if s1 > n || s2 > n {
        return None;
    }
    let byz_sets: Vec<u16> = (0..=byz.min(n)).flat_map(|k| combinations(n, k)).collect();
    let q1s = combinations(n, s1);
    let q2s = combinations(n, s2);
    let mut worst = usize::MAX;
    for q1 in &q1s {
        for q2 in &q2s {
            for b in &byz_sets {
                if (b & q2).count_ones() as usize > byz_in_q2 {
                    continue;
                }
                worst = worst.min((q1 & q2 & !b).count_ones() as usize);
            }
        }
    }
    Some(worst)
}

struct Oracle {
    qi1: bool,
    qi2: bool,
    qi3: bool,
}

fn oracle(n: u32, f: u32) -> Oracle {
    let (n, f) = (n as usize, f as usize);
    let holds = |w: Option<usize>, need: usize| w.is_some_and(|w| w >= need);
    Oracle {
        qi1: holds(worst_case(n, n - f, n - f, f, f), 1),
        qi2: holds(worst_case(n, n - f, n - f, f, f - 1), 2 * f),
        qi3: holds(worst_case(n, n - f, 2 * f, f, f - 1), 1),
    }
}

fn valid_configs(max_n: u32) -> Vec<QuorumConfig> {
    let mut out = Vec::new();
    for f in 1..=max_n {
        for t in 1..=f {
            for n in minimum_n(f, t).max(1)..=max_n {
                let mode = if t == f && n >= 5 * f - 1 { Mode::Vanilla } else { Mode::Generalized };
                if let Ok(c) = QuorumConfig::new(n, f, t, mode) {
                    out.push(c);
                }
            }
        }
    }
    out
}

#[test]
fn closed_form_matches_independent_enumeration() {
    let configs = valid_configs(12);
    assert!(configs.len() > 20);
    for cfg in configs {
        let r = intersection_report(cfg.n(), cfg.f(), cfg.t());
        let o = oracle(cfg.n(), cfg.f());
        let ctx = format!("n={} f={} t={}", cfg.n(), cfg.f(), cfg.t());
        assert_eq!((r.qi1(), r.qi2(), r.qi3()), (o.qi1, o.qi2, o.qi3), "{ctx}");
        assert!(r.consistent(), "{ctx}");
        let e = r.enumerated.expect("n within enumeration limit");
        assert_eq!((e.qi1, e.qi2, e.qi3), (o.qi1, o.qi2, o.qi3), "{ctx}");
    }
}

#[test]
fn vanilla_configs_satisfy_all_three() {
    for cfg in valid_configs(12).into_iter().filter(|c| c.mode() == Mode::Vanilla) {
        let r = intersection_report(cfg.n(), cfg.f(), cfg.t());
        assert!(r.qi1() && r.qi2() && r.qi3(), "n={} f={}", cfg.n(), cfg.f());
    }
}

#[test]
fn generalized_counting_holds_for_valid_configs() {
    for cfg in valid_configs(12).into_iter().filter(|c| c.mode() == Mode::Generalized) {
        let (n, f, t) = (cfg.n() as usize, cfg.f() as usize, cfg.t() as usize);
        let c = cfg.commit_cert_threshold().unwrap();
        let r = intersection_report(cfg.n(), cfg.f(), cfg.t());
        let g = r.generalized_enumerated.expect("enumerated");
        assert!(r.consistent());
        assert_eq!(g.fast_vote, worst_case(n, n - f, n - t, 0, 0).unwrap() + 1 >= 2 * f + t, "n={n} f={f} t={t}");
        assert!(g.fast_vote, "n={n} f={f} t={t}");
        assert!(g.commit_commit && worst_case(n, c, c, f, f).unwrap() >= 1, "n={n} f={f} t={t}");
        assert!(2 * c > n + f, "n={n} f={f}");
    }
}

#[test]
fn examples() {
    let r = intersection_report(9, 2, 2);
    assert!(r.qi1() && r.qi2() && r.qi3() && r.consistent());
    let r = intersection_report(4, 1, 1);
    assert!(r.qi1() && r.qi2() && r.qi3() && r.consistent());
}

#[test]
fn one_below_vanilla_minimum_breaks_qi2() {
    for f in 1..=2u32 {
        let n = 5 * f - 2;
        let r = intersection_report(n, f, f);
        assert!(!r.qi2(), "n={n}");
        assert!(r.consistent());
        assert!(!oracle(n, f).qi2);
        let cx = r.counterexample("QI2").expect("counterexample");
        let byz: Vec<u32> = cx.byzantine.iter().map(|p| p.0).collect();
        let inter: Vec<u32> = cx.q1.iter().filter(|p| cx.q2.contains(p)).map(|p| p.0).collect();
        let correct = inter.iter().filter(|p| !byz.contains(p)).count() as u32;
        assert_eq!(correct, cx.correct_in_intersection);
        assert!(correct < 2 * f);
        assert!((cx.q2.iter().filter(|p| byz.contains(&p.0)).count() as u32) < f);
        assert_eq!(cx.q1.len() as u32, n - f);
        assert_eq!(cx.q2.len() as u32, n - f);
    }
}

#[test]
fn config_validation() {
    assert!(QuorumConfig::new(4, 1, 1, Mode::Vanilla).is_ok());
    assert!(QuorumConfig::new(7, 2, 1, Mode::Generalized).is_ok());
    assert!(matches!(QuorumConfig::new(8, 2, 2, Mode::Vanilla), Err(ConfigError::ResilienceViolation(_))));
    assert!(matches!(QuorumConfig::new(9, 2, 1, Mode::Vanilla), Err(ConfigError::ModeMismatch(_))));
}

//! Seeded randomized runs.
//!
//! Each seed picks a Byzantine set of at most `f` processes, a behavior for each, inputs,
//! GST, pre-GST delays and a latency model, then runs the result and checks it.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checker::{check, Check};
use crate::engine::CertificateMode;
use crate::quorum::QuorumConfig;
use crate::scenario::{BehaviorSpec, NetworkSpec, Scenario, Script};
use crate::sim::SimConfig;
use crate::time::DEFAULT_DELTA;
use crate::trace::LatencyModel;
use crate::types::{ProcessId, Value};

/// Horizon for a run with the given GST: room for `f+2` views at the longest timeout.
pub fn horizon(cfg: &QuorumConfig, gst: u64, delta: u64) -> u64 {
    gst + 60 * delta * (cfg.f() as u64 + 2) + 100 * delta
}

pub fn random_scenario(cfg: &QuorumConfig, seed: u64) -> Scenario {
    let d = DEFAULT_DELTA;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n();
    let k = if rng.gen_bool(0.2) { 0 } else { rng.gen_range(1..=cfg.f()) };
    let byzantine: BTreeSet<ProcessId> = ProcessId::all(n).choose_multiple(&mut rng, k as usize).into_iter().collect();
    let behaviors: BTreeMap<ProcessId, BehaviorSpec> = byzantine
        .iter()
        .map(|p| {
            let b = match rng.gen_range(0..5) {
                0 => BehaviorSpec::Crash(rng.gen_range(0..=10) * d / 2),
                1 => BehaviorSpec::Silent,
                2 => BehaviorSpec::Equivocate,
                3 => BehaviorSpec::Mutator(rng.gen_range(1..=9) as f64 / 10.0),
                _ => BehaviorSpec::Honest,
            };
            (*p, b)
        })
        .collect();
    let pool = [Value::from("A"), Value::from("B"), Value::from("C")];
    let inputs = if rng.gen_bool(0.3) {
        vec![pool[0].clone(); n as usize]
    } else {
        (0..n).map(|_| pool.choose(&mut rng).expect("non-empty").clone()).collect()
    };
    let gst = rng.gen_range(0..=30) * d;
    let network = if gst > 0 && rng.gen_bool(0.8) {
        NetworkSpec::Random { max_delay: rng.gen_range(1..=8) * d }
    } else {
        NetworkSpec::Default
    };
    let latency = if rng.gen_bool(0.5) { LatencyModel::Fixed(d) } else { LatencyModel::Uniform { lo: 1, hi: d } };
    Scenario {
        name: format!("fuzz_n{}_f{}_t{}_{seed}", n, cfg.f(), cfg.t()),
        description: None,
        cfg: *cfg,
        sim: SimConfig { delta: d, gst, horizon: horizon(cfg, gst, d), seed, latency },
        inputs,
        script: if byzantine.is_empty() { Script::None } else { Script::Mixed(behaviors) },
        byzantine,
        network,
        cert_mode: CertificateMode::Signed,
        checks: Check::DEFAULT.to_vec(),
    }
}

#[derive(Clone, Debug)]
pub struct FuzzFailure {
    pub seed: u64,
    pub scenario: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct FuzzSummary {
    pub runs: usize,
    pub agreement_violations: usize,
    /// Runs without faults, where validity is not vacuous.
    pub validity_checked: usize,
    pub validity_violations: usize,
    pub non_terminations: usize,
    /// Failed network audits, certificate bounds or simulator errors.
    pub other_failures: usize,
    pub failures: Vec<FuzzFailure>,
}

impl FuzzSummary {
    pub fn clean(&self) -> bool {
        self.agreement_violations + self.validity_violations + self.non_terminations + self.other_failures == 0
    }

    fn merge(&mut self, o: FuzzSummary) {
        self.runs += o.runs;
        self.agreement_violations += o.agreement_violations;
        self.validity_checked += o.validity_checked;
        self.validity_violations += o.validity_violations;
        self.non_terminations += o.non_terminations;
        self.other_failures += o.other_failures;
        self.failures.extend(o.failures);
    }
}

pub fn fuzz_one(cfg: &QuorumConfig, seed: u64) -> FuzzSummary {
    let s = random_scenario(cfg, seed);
    let mut sum = FuzzSummary { runs: 1, ..Default::default() };
    let fail = |sum: &mut FuzzSummary, reason: String| {
        sum.failures.push(FuzzFailure { seed, scenario: s.to_toml(), reason });
    };
    let out = match s.run() {
        Ok(o) => o,
        Err(e) => {
            sum.other_failures += 1;
            fail(&mut sum, e.to_string());
            return sum;
        }
    };
    let report = check(&out.trace, &s.checks);
    if s.byzantine.is_empty() {
        sum.validity_checked += 1;
    }
    for (c, v) in report.failures() {
        match c {
            Check::Agreement => sum.agreement_violations += 1,
            Check::Validity(_) => sum.validity_violations += 1,
            Check::Termination => sum.non_terminations += 1,
            _ => sum.other_failures += 1,
        }
        fail(&mut sum, format!("{c}: {}", v.witness.as_deref().unwrap_or("")));
    }
    sum
}

/// Runs seeds `base..base+runs` for every configuration on `threads` workers.
pub fn fuzz(configs: &[QuorumConfig], runs: u64, base: u64, threads: usize) -> FuzzSummary {
    let jobs: Vec<(QuorumConfig, u64)> =
        configs.iter().flat_map(|c| (base..base + runs).map(move |s| (*c, s))).collect();
    let total = Mutex::new(FuzzSummary::default());
    let threads = threads.max(1);
    std::thread::scope(|scope| {
        for w in 0..threads {
            let (jobs, total) = (&jobs, &total);
            scope.spawn(move || {
                let mut local = FuzzSummary::default();
                for (cfg, seed) in jobs.iter().skip(w).step_by(threads) {
                    local.merge(fuzz_one(cfg, *seed));
                }
                total.lock().expect("worker panicked").merge(local);
            });
        }
    });
    let mut sum = total.into_inner().expect("worker panicked");
    sum.failures.sort_by_key(|f| f.seed);
    sum
}

//! Lower-bound executions replayed against the protocol.
//!
//! Processes other than `p = leader(1)` are split, in id order, into groups P1..P5 of
//! sizes `t, f-1, f-1, f-1, t`; any processes beyond `3f+2t-2` join P2 and stay correct.
//! Every process but `p` has input `v0`.
//!
//! - ρ1: `p` has input `v1`; P1 follows the protocol until Δ, then crashes.
//! - ρ5: `p` has input `v0`; P5 crashes at Δ.
//! - ρ_i for i in 2..=4: `p` and P_i are Byzantine (P3 only crashes at Δ in ρ3). `p` runs
//!   two copies: one with input `v0` talks to the groups below `i`, one with input `v1` to
//!   the groups above `i`. In ρ3 it falls silent at Δ.
//!
//! In ρ2 and ρ4 the execution is arranged so that P3 cannot tell it apart from ρ1 and ρ5
//! respectively during the first two rounds: P_i's twins show P3 the reference execution,
//! the one group P3 would not hear from in the reference is delayed until `T = 10Δ`, and
//! P3's own messages to outsiders are held until `T`. GST is 2Δ. The extra process of P2
//! follows the `v1` side in ρ2.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::checker::Check;
use crate::engine::CertificateMode;
use crate::encoding::encode_message;
use crate::quorum::{minimum_n, QuorumConfig};
use crate::sim::adversary::{Behavior, ByzContext, CrashAt, Label, Twin, TwinCopy};
use crate::sim::schedule::NetworkSchedule;
use crate::sim::{SimConfig, SimOutcome, Simulation};
use crate::scenario::{NetworkSpec, Scenario, Script};
use crate::time::DEFAULT_DELTA;
use crate::trace::LatencyModel;
use crate::types::{Message, ProcessId, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LowerBoundError {
    #[error("n = {n} is below 3f+2t-1 = {need}")]
    ConfigTooSmall { n: u32, need: u32 },
    #[error("execution ρ{0} does not exist (expected 1..=5)")]
    NoSuchExecution(u8),
    #[error("only ρ1 exists when t ≤ 1 or f < 2")]
    Degenerate,
    #[error("T must have exactly t = {t} processes and exclude leader(1)")]
    BadFaultySet { t: u32 },
}

/// Label of the twin copy playing the `v1` side.
const SIDE_1: Label = 1;
/// Label of the twin copy playing the `v0` side.
const SIDE_5: Label = 5;

/// Time until which the delayed messages of ρ2..ρ4 are held, in Δ.
pub const HOLD_UNTIL: u64 = 10;
/// GST of ρ2..ρ4, in Δ.
pub const RHO_GST: u64 = 2;
pub const RHO_HORIZON: u64 = 400;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupPartition {
    pub p: ProcessId,
    groups: [Vec<ProcessId>; 5],
    /// Correct processes appended to P2.
    pub extra: Vec<ProcessId>,
}

impl GroupPartition {
    pub fn new(cfg: &QuorumConfig) -> Result<Self, LowerBoundError> {
        let (n, f, t) = (cfg.n(), cfg.f(), cfg.t());
        let need = minimum_n(f, t);
        if n < need {
            return Err(LowerBoundError::ConfigTooSmall { n, need });
        }
        let p = cfg.leader(crate::types::View::FIRST);
        let rest: Vec<ProcessId> = cfg.processes().filter(|q| *q != p).collect();
        let sizes = [t, f - 1, f - 1, f - 1, t].map(|s| s as usize);
        let mut groups: [Vec<ProcessId>; 5] = Default::default();
        let mut it = rest.into_iter();
        for (g, size) in groups.iter_mut().zip(sizes) {
            g.extend(it.by_ref().take(size));
        }
        let extra: Vec<ProcessId> = it.collect();
        groups[1].extend(extra.iter().copied());
        Ok(GroupPartition { p, groups, extra })
    }

    /// Members of P_i, `i` in 1..=5.
    pub fn group(&self, i: usize) -> &[ProcessId] {
        &self.groups[i - 1]
    }

    /// Group index of `q`, or `None` for `p`.
    pub fn group_of(&self, q: ProcessId) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&q)).map(|i| i + 1)
    }

    /// Members of P_i that are not extras.
    pub fn core(&self, i: usize) -> impl Iterator<Item = ProcessId> + '_ {
        self.group(i).iter().copied().filter(|q| !self.extra.contains(q))
    }
}

/// The full ρ family exists only for `f ≥ t ≥ 2`.
pub fn is_degenerate(cfg: &QuorumConfig) -> bool {
    cfg.t() <= 1 || cfg.f() < 2
}

fn base_scenario(cfg: &QuorumConfig, name: String, inputs: Vec<Value>, byzantine: BTreeSet<ProcessId>) -> Scenario {
    let d = DEFAULT_DELTA;
    Scenario {
        name,
        description: None,
        cfg: *cfg,
        sim: SimConfig { delta: d, gst: 0, horizon: RHO_HORIZON * d, seed: 1, latency: LatencyModel::Fixed(d) },
        inputs,
        byzantine,
        script: Script::None,
        network: NetworkSpec::Default,
        cert_mode: CertificateMode::Signed,
        checks: Check::DEFAULT.to_vec(),
    }
}

/// Synchronous run in which the processes in `faulty` crash at Δ. All correct processes
/// decide at 2Δ when `leader(1)` is correct.
pub fn generate_tfaulty(
    cfg: &QuorumConfig,
    faulty: &BTreeSet<ProcessId>,
    inputs: Vec<Value>,
) -> Result<Scenario, LowerBoundError> {
    if faulty.len() != cfg.t() as usize || faulty.iter().any(|q| q.0 == 0 || q.0 > cfg.n()) {
        return Err(LowerBoundError::BadFaultySet { t: cfg.t() });
    }
    let ids: Vec<String> = faulty.iter().map(|p| p.to_string()).collect();
    let name = format!("tfaulty_n{}_{}", cfg.n(), ids.join("_"));
    let mut s = base_scenario(cfg, name, inputs, faulty.clone());
    s.sim.horizon = 100 * s.sim.delta;
    s.script = Script::Crash { at: s.sim.delta };
    Ok(s)
}

/// Every `t`-subset of processes other than `leader(1)`.
pub fn tfaulty_sets(cfg: &QuorumConfig) -> Vec<BTreeSet<ProcessId>> {
    let leader = cfg.leader(crate::types::View::FIRST);
    let pool: Vec<ProcessId> = cfg.processes().filter(|q| *q != leader).collect();
    let k = cfg.t() as usize;
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > pool.len() {
        return out;
    }
    loop {
        out.push(idx.iter().map(|i| pool[*i]).collect());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + pool.len() - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[derive(Clone, Debug)]
pub struct RhoSchedule {
    pub which: u8,
    pub partition: GroupPartition,
    pub scenario: Scenario,
}

fn rho_parts(
    cfg: &QuorumConfig,
    which: u8,
    v0: &Value,
    v1: &Value,
) -> Result<(GroupPartition, Vec<Value>, BTreeSet<ProcessId>), LowerBoundError> {
    if !(1..=5).contains(&which) {
        return Err(LowerBoundError::NoSuchExecution(which));
    }
    let part = GroupPartition::new(cfg)?;
    if which != 1 && is_degenerate(cfg) {
        return Err(LowerBoundError::Degenerate);
    }
    let mut inputs = vec![v0.clone(); cfg.n() as usize];
    if which == 1 {
        inputs[part.p.0 as usize - 1] = v1.clone();
    }
    let byzantine: BTreeSet<ProcessId> = match which {
        1 => part.group(1).iter().copied().collect(),
        5 => part.group(5).iter().copied().collect(),
        i => std::iter::once(part.p).chain(part.core(i as usize)).collect(),
    };
    Ok((part, inputs, byzantine))
}

pub fn generate_rho_schedule(
    cfg: &QuorumConfig,
    which: u8,
    v0: &Value,
    v1: &Value,
) -> Result<RhoSchedule, LowerBoundError> {
    let (partition, inputs, byzantine) = rho_parts(cfg, which, v0, v1)?;
    let mut scenario = base_scenario(cfg, format!("rho{which}_n{}_f{}_t{}", cfg.n(), cfg.f(), cfg.t()), inputs, byzantine);
    if (2..=4).contains(&which) {
        scenario.sim.gst = RHO_GST * scenario.sim.delta;
    }
    scenario.script = Script::Rho { which, values: (v0.clone(), v1.clone()) };
    Ok(RhoSchedule { which, partition, scenario })
}

/// All executions of the family: ρ1..ρ5, or just ρ1 when degenerate.
pub fn rho_family(cfg: &QuorumConfig, v0: &Value, v1: &Value) -> Result<Vec<RhoSchedule>, LowerBoundError> {
    let last = if is_degenerate(cfg) { 1 } else { 5 };
    (1..=last).map(|w| generate_rho_schedule(cfg, w, v0, v1)).collect()
}

/// Delays of ρ2 and ρ4.
struct RhoNetwork {
    p3: BTreeSet<ProcessId>,
    /// Group whose round-2 messages P3 must not see before `until`.
    hidden: BTreeSet<ProcessId>,
    delta: u64,
    gst: u64,
    until: u64,
}

impl NetworkSchedule for RhoNetwork {
    fn delay(
        &mut self,
        now: u64,
        from: ProcessId,
        to: ProcessId,
        _: &Message,
        _: &mut rand_chacha::ChaCha8Rng,
    ) -> Option<u64> {
        let round2 = (self.delta..2 * self.delta).contains(&now);
        if round2 && self.hidden.contains(&from) && self.p3.contains(&to) {
            return Some(self.until - now);
        }
        if now < self.gst && self.p3.contains(&from) && !self.p3.contains(&to) {
            return Some(self.until - now);
        }
        None
    }
}

/// Builds the simulation of ρ`which` with the given timing.
pub fn rho_simulation(
    cfg: &QuorumConfig,
    which: u8,
    v0: &Value,
    v1: &Value,
    sim: SimConfig,
) -> Result<Simulation, LowerBoundError> {
    let (part, inputs, byzantine) = rho_parts(cfg, which, v0, v1)?;
    let d = sim.delta;
    let mut s = Simulation::new(*cfg, sim, inputs);
    match which {
        1 | 5 => {
            for q in &byzantine {
                s = s.byzantine(*q, Box::new(move |ctx: &ByzContext| Box::new(CrashAt::new(ctx, d)) as Box<dyn Behavior>));
            }
            return Ok(s);
        }
        _ => {}
    }
    let i = which as usize;
    let group_of = {
        let part = part.clone();
        move |q: ProcessId| part.group_of(q)
    };
    // p's copies.
    {
        let byz = byzantine.clone();
        let (v0, v1) = (v0.clone(), v1.clone());
        let extra: BTreeSet<ProcessId> = part.extra.iter().copied().collect();
        let g = group_of.clone();
        s = s.byzantine(
            part.p,
            Box::new(move |ctx: &ByzContext| {
                let silent_after = (i == 3).then_some(d);
                let side = |label: Label, input: Value| {
                    let (byz, extra, g) = (byz.clone(), extra.clone(), g.clone());
                    TwinCopy {
                        label,
                        replica: ctx.replica(input),
                        route: Box::new(move |now, to| {
                            if silent_after.is_some_and(|at| now >= at) {
                                return false;
                            }
                            let Some(j) = g(to) else { return false };
                            if byz.contains(&to) {
                                return true;
                            }
                            let to_v1_side = j > i || (i == 2 && extra.contains(&to));
                            if label == SIDE_1 {
                                to_v1_side
                            } else {
                                !to_v1_side && j < i
                            }
                        }),
                    }
                };
                Box::new(Twin::new(ctx.id, byz.clone(), vec![side(SIDE_5, v0.clone()), side(SIDE_1, v1.clone())]))
                    as Box<dyn Behavior>
            }),
        );
    }
    let p3: BTreeSet<ProcessId> = part.group(3).iter().copied().collect();
    if i == 3 {
        for q in part.group(3) {
            s = s.byzantine(*q, Box::new(move |ctx: &ByzContext| Box::new(CrashAt::new(ctx, d)) as Box<dyn Behavior>));
        }
        return Ok(s);
    }
    // P_i's twins: the copy on P3's reference side talks only to P3, the other to everyone else.
    let shown = if i == 2 { SIDE_1 } else { SIDE_5 };
    for q in part.core(i) {
        let byz = byzantine.clone();
        let p3 = p3.clone();
        s = s.byzantine(
            q,
            Box::new(move |ctx: &ByzContext| {
                let side = |label: Label| {
                    let (byz, p3) = (byz.clone(), p3.clone());
                    TwinCopy {
                        label,
                        replica: ctx.replica(ctx.input.clone()),
                        route: Box::new(move |_, to| {
                            byz.contains(&to) || (p3.contains(&to) == (label == shown))
                        }),
                    }
                };
                Box::new(Twin::new(ctx.id, byz.clone(), vec![side(SIDE_5), side(SIDE_1)])) as Box<dyn Behavior>
            }),
        );
    }
    let hidden = match i {
        2 => part.group(1).iter().copied().collect(),
        _ => part.group(5).iter().copied().collect(),
    };
    Ok(s.schedule(Box::new(RhoNetwork { p3, hidden, delta: d, gst: sim.gst, until: HOLD_UNTIL * d })))
}

/// What P3 received up to `until`: `(time, sender, receiver, encoded message)`.
pub fn receive_sequence(
    outcome: &SimOutcome,
    group: &[ProcessId],
    until: u64,
) -> Vec<(u64, ProcessId, ProcessId, Vec<u8>)> {
    outcome
        .deliveries
        .iter()
        .filter(|d| d.time <= until && group.contains(&d.to))
        .map(|d| (d.time, d.from, d.to, encode_message(&d.msg)))
        .collect()
}

/// First position where two receive sequences differ, if any.
pub fn first_difference(
    a: &[(u64, ProcessId, ProcessId, Vec<u8>)],
    b: &[(u64, ProcessId, ProcessId, Vec<u8>)],
) -> Option<usize> {
    if a == b {
        return None;
    }
    Some(a.iter().zip(b).position(|(x, y)| x != y).unwrap_or(a.len().min(b.len())))
}

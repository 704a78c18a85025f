//! Deterministic discrete-event simulation of a partially synchronous network.
//!
//! Events are ordered by `(time, class, sender, receiver, insertion)`, with crashes before
//! deliveries before timers at equal times, so same-time deliveries are processed in
//! (sender, receiver) order. Local computation is instantaneous and self-sends arrive at
//! the time they are sent.

pub mod adversary;
pub mod schedule;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::crypto::{KeyDirectory, Signature, Verifier};
use crate::encoding::{canonical_encode, Signable};
use crate::engine::{Action, CertificateMode, SelectionOutcome};
use crate::quorum::QuorumConfig;
use crate::replica::Replica;
use crate::trace::{EndStatus, Event, LatencyModel, Record, Trace, TraceEnd, TraceHeader};
use crate::types::{CommitCertificate, Message, ProcessId, ProgressCertificate, SignedVote, Value, View, Vote};

use adversary::{Behavior, ByzContext, ByzOut, Label};
use schedule::NetworkSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    /// Ticks per Δ.
    pub delta: u64,
    pub gst: u64,
    pub horizon: u64,
    pub seed: u64,
    pub latency: LatencyModel,
}

impl SimConfig {
    /// Fixed(Δ) latency, GST at 0, Δ = 1000 ticks.
    pub fn synchronous(horizon_deltas: u64, seed: u64) -> Self {
        let delta = crate::time::DEFAULT_DELTA;
        SimConfig { delta, gst: 0, horizon: horizon_deltas * delta, seed, latency: LatencyModel::Fixed(delta) }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.delta == 0 {
            return Err(SimError::InvalidConfig("delta must be positive".into()));
        }
        match self.latency {
            LatencyModel::Fixed(d) if d == 0 || d > self.delta => {
                Err(SimError::InvalidConfig(format!("fixed latency {d} outside (0, Δ]")))
            }
            LatencyModel::Uniform { lo, hi } if lo == 0 || lo > hi || hi > self.delta => {
                Err(SimError::InvalidConfig(format!("uniform latency [{lo}, {hi}] outside (0, Δ]")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("illegal delay {delay} for message {from} → {to} sent at {sent}")]
    IllegalDelay { from: ProcessId, to: ProcessId, sent: u64, delay: u64 },
    #[error("{sender} sent a signature of {signer} it cannot have produced")]
    IllegalForgery { sender: ProcessId, signer: ProcessId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Decided,
    HorizonExceeded,
}

/// A delivered message with its full payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub time: u64,
    pub from: ProcessId,
    pub to: ProcessId,
    pub msg: Message,
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub trace: Trace,
    pub status: RunStatus,
    /// Filled only when recording was requested.
    pub deliveries: Vec<Delivery>,
    /// Every selection run by a correct leader, in order.
    pub selections: Vec<(ProcessId, View, SelectionOutcome)>,
}

impl SimOutcome {
    /// `(process, time, value)` of each correct decision.
    pub fn decisions(&self) -> Vec<(ProcessId, u64, Value)> {
        self.trace.correct_decisions().map(|(r, v, _, _)| (r.actor, r.time, v.clone())).collect()
    }
}

pub type BehaviorFactory = Box<dyn FnOnce(&ByzContext) -> Box<dyn Behavior> + Send>;

enum Kind {
    Crash,
    Deliver { id: u64, msg: Message, label: Option<Label> },
    Timer,
}

struct Queued {
    key: (u64, u8, u32, u32, u64),
    kind: Kind,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

enum Node {
    Correct(Box<Replica>),
    Byzantine(Box<dyn Behavior>),
}

/// A configured simulation; consume with [`Simulation::run`].
pub struct Simulation {
    cfg: QuorumConfig,
    sim: SimConfig,
    inputs: Vec<Value>,
    factories: BTreeMap<ProcessId, BehaviorFactory>,
    schedule: Option<Box<dyn NetworkSchedule>>,
    cert_mode: CertificateMode,
    record: bool,
}

impl fmt::Debug for Simulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulation")
            .field("cfg", &self.cfg)
            .field("sim", &self.sim)
            .field("byzantine", &self.factories.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Simulation {
    pub fn new(cfg: QuorumConfig, sim: SimConfig, inputs: Vec<Value>) -> Self {
        Simulation {
            cfg,
            sim,
            inputs,
            factories: BTreeMap::new(),
            schedule: None,
            cert_mode: CertificateMode::Signed,
            record: false,
        }
    }

    pub fn byzantine(mut self, id: ProcessId, factory: BehaviorFactory) -> Self {
        self.factories.insert(id, factory);
        self
    }

    pub fn schedule(mut self, schedule: Box<dyn NetworkSchedule>) -> Self {
        self.schedule = Some(schedule);
        self
    }

    pub fn cert_mode(mut self, mode: CertificateMode) -> Self {
        self.cert_mode = mode;
        self
    }

    /// Keep every delivered message in [`SimOutcome::deliveries`].
    pub fn record_deliveries(mut self, on: bool) -> Self {
        self.record = on;
        self
    }

    pub fn byzantine_ids(&self) -> Vec<ProcessId> {
        self.factories.keys().copied().collect()
    }

    pub fn run(self) -> Result<SimOutcome, SimError> {
        self.sim.validate()?;
        let n = self.cfg.n();
        if self.inputs.len() != n as usize {
            return Err(SimError::InvalidConfig(format!("{} inputs for {n} processes", self.inputs.len())));
        }
        if let Some(p) = self.factories.keys().find(|p| p.0 == 0 || p.0 > n) {
            return Err(SimError::InvalidConfig(format!("byzantine id {p} outside 1..={n}")));
        }
        let (keys, signing) = KeyDirectory::generate(n, self.sim.seed);
        let keys = Arc::new(keys);
        let byzantine: BTreeSet<ProcessId> = self.factories.keys().copied().collect();
        let header = TraceHeader {
            n,
            f: self.cfg.f(),
            t: self.cfg.t(),
            mode: self.cfg.mode(),
            delta: self.sim.delta,
            gst: self.sim.gst,
            horizon: self.sim.horizon,
            seed: self.sim.seed,
            latency: self.sim.latency,
            inputs: self.inputs.clone(),
            byzantine: byzantine.iter().copied().collect(),
        };
        let mut factories = self.factories;
        let mut nodes = Vec::with_capacity(n as usize);
        for id in ProcessId::all(n) {
            let input = self.inputs[id.0 as usize - 1].clone();
            let key = signing[id.0 as usize - 1].clone();
            nodes.push(match factories.remove(&id) {
                Some(factory) => {
                    let ctx = ByzContext {
                        id,
                        cfg: self.cfg,
                        delta: self.sim.delta,
                        input,
                        key,
                        keys: keys.clone(),
                        cert_mode: self.cert_mode,
                        seed: self.sim.seed,
                    };
                    Node::Byzantine(factory(&ctx))
                }
                None => Node::Correct(Box::new(Replica::new(
                    id,
                    self.cfg,
                    self.sim.delta,
                    input,
                    key,
                    keys.clone(),
                    self.cert_mode,
                ))),
            });
        }
        let mut state = State {
            cfg: self.cfg,
            sim: self.sim,
            keys,
            byzantine,
            schedule: self.schedule,
            rng: ChaCha8Rng::seed_from_u64(self.sim.seed),
            heap: BinaryHeap::new(),
            seq: 0,
            next_id: 0,
            timers: vec![BTreeSet::new(); n as usize],
            registry: HashSet::new(),
            trace: Trace::new(header),
            deliveries: Vec::new(),
            record: self.record,
            undecided: 0,
        };
        state.undecided = nodes.iter().filter(|n| matches!(n, Node::Correct(_))).count();
        state.execute(nodes)
    }
}

struct State {
    cfg: QuorumConfig,
    sim: SimConfig,
    keys: Arc<KeyDirectory>,
    byzantine: BTreeSet<ProcessId>,
    schedule: Option<Box<dyn NetworkSchedule>>,
    rng: ChaCha8Rng,
    heap: BinaryHeap<Reverse<Queued>>,
    seq: u64,
    next_id: u64,
    timers: Vec<BTreeSet<u64>>,
    /// Signatures that correct processes have put on the wire.
    registry: HashSet<Vec<u8>>,
    trace: Trace,
    deliveries: Vec<Delivery>,
    record: bool,
    undecided: usize,
}

const CLASS_CRASH: u8 = 0;
const CLASS_DELIVER: u8 = 1;
const CLASS_TIMER: u8 = 2;

impl State {
    fn push(&mut self, time: u64, class: u8, from: ProcessId, to: ProcessId, kind: Kind) {
        self.seq += 1;
        self.heap.push(Reverse(Queued { key: (time, class, from.0, to.0, self.seq), kind }));
    }

    fn record(&mut self, time: u64, actor: ProcessId, event: Event) {
        self.trace.records.push(Record { time, actor, event });
    }

    fn execute(mut self, mut nodes: Vec<Node>) -> Result<SimOutcome, SimError> {
        for (i, node) in nodes.iter().enumerate() {
            if let Node::Byzantine(b) = node {
                if let Some(at) = b.crash_time().filter(|at| *at <= self.sim.horizon) {
                    let id = ProcessId(i as u32 + 1);
                    self.push(at, CLASS_CRASH, id, id, Kind::Crash);
                }
            }
        }
        for (i, node) in nodes.iter_mut().enumerate() {
            let id = ProcessId(i as u32 + 1);
            match node {
                Node::Correct(r) => {
                    let actions = r.start(0);
                    self.correct_actions(0, id, actions)?;
                }
                Node::Byzantine(b) => {
                    let outs = b.start(0);
                    self.byzantine_outs(0, id, outs)?;
                }
            }
        }

        let mut stop_at = None;
        while let Some(Reverse(ev)) = self.heap.pop() {
            let (now, _, from, to, _) = ev.key;
            if now > self.sim.horizon || stop_at.is_some_and(|s| now > s) {
                break;
            }
            let (from, to) = (ProcessId(from), ProcessId(to));
            match ev.kind {
                Kind::Crash => self.record(now, to, Event::Crash),
                Kind::Timer => {
                    self.timers[to.0 as usize - 1].remove(&now);
                    match &mut nodes[to.0 as usize - 1] {
                        Node::Correct(r) => {
                            let actions = r.on_timer(now);
                            self.correct_actions(now, to, actions)?;
                        }
                        Node::Byzantine(b) => {
                            let outs = b.on_timer(now);
                            self.byzantine_outs(now, to, outs)?;
                        }
                    }
                }
                Kind::Deliver { id, msg, label } => {
                    self.record(
                        now,
                        to,
                        Event::Deliver { id, from, kind: msg.kind(), digest: crate::trace::digest(&msg) },
                    );
                    if self.record {
                        self.deliveries.push(Delivery { time: now, from, to, msg: msg.clone() });
                    }
                    match &mut nodes[to.0 as usize - 1] {
                        Node::Correct(r) => {
                            let actions = r.on_message(now, from, msg);
                            self.correct_actions(now, to, actions)?;
                        }
                        Node::Byzantine(b) => {
                            let outs = b.on_message(now, from, label, msg);
                            self.byzantine_outs(now, to, outs)?;
                        }
                    }
                }
            }
            if self.undecided == 0 && stop_at.is_none() {
                stop_at = Some(now);
            }
        }
        let (status, end) = match stop_at {
            Some(t) => (RunStatus::Decided, TraceEnd { time: t, status: EndStatus::Decided }),
            None => (RunStatus::HorizonExceeded, TraceEnd { time: self.sim.horizon, status: EndStatus::Horizon }),
        };
        self.trace.end = Some(end);
        let selections = nodes
            .iter()
            .filter_map(|n| match n {
                Node::Correct(r) => Some(r),
                Node::Byzantine(_) => None,
            })
            .flat_map(|r| r.engine().selections().iter().map(|(v, o)| (r.id(), *v, o.clone())))
            .collect();
        Ok(SimOutcome { trace: self.trace, status, deliveries: self.deliveries, selections })
    }

    fn set_timer(&mut self, id: ProcessId, at: u64) {
        if self.timers[id.0 as usize - 1].insert(at) {
            self.push(at, CLASS_TIMER, id, id, Kind::Timer);
        }
    }

    fn correct_actions(&mut self, now: u64, id: ProcessId, actions: Vec<Action>) -> Result<(), SimError> {
        for a in actions {
            match a {
                Action::Send { to, msg } => {
                    self.register(&msg);
                    self.send(now, id, to, msg, None, None)?;
                }
                Action::Decide { value, view, path } => {
                    self.undecided -= 1;
                    self.record(now, id, Event::Decide { value, view, path });
                }
                Action::EnterView { view } => self.record(now, id, Event::EnterView { view }),
                Action::SetTimer { at } => self.set_timer(id, at),
                Action::Drop { from, kind, view, reason } => {
                    self.record(now, id, Event::Drop { from, kind, view, reason })
                }
            }
        }
        Ok(())
    }

    fn byzantine_outs(&mut self, now: u64, id: ProcessId, outs: Vec<ByzOut>) -> Result<(), SimError> {
        for o in outs {
            match o {
                ByzOut::Send { to, msg, delay, label } => {
                    self.check_forgery(id, &msg)?;
                    let label = label.filter(|_| self.byzantine.contains(&to));
                    self.send(now, id, to, msg, delay, label)?;
                }
                ByzOut::Timer { at } => {
                    if at > now {
                        self.set_timer(id, at)
                    }
                }
            }
        }
        Ok(())
    }

    fn send(
        &mut self,
        now: u64,
        from: ProcessId,
        to: ProcessId,
        msg: Message,
        byz_delay: Option<u64>,
        label: Option<Label>,
    ) -> Result<(), SimError> {
        if to.0 == 0 || to.0 > self.cfg.n() {
            return Ok(());
        }
        let delay = if from == to {
            0
        } else {
            let scripted = match byz_delay {
                Some(d) => Some(d),
                None => match self.schedule.as_mut() {
                    Some(s) => s.delay(now, from, to, &msg, &mut self.rng),
                    None => None,
                },
            };
            let d = match scripted {
                Some(d) => d,
                None => match self.sim.latency {
                    LatencyModel::Fixed(d) => d,
                    LatencyModel::Uniform { lo, hi } => self.rng.gen_range(lo..=hi),
                    LatencyModel::Scripted => self.sim.delta,
                },
            };
            let both_correct = !self.byzantine.contains(&from) && !self.byzantine.contains(&to);
            if d == 0 || (both_correct && now >= self.sim.gst && d > self.sim.delta) {
                return Err(SimError::IllegalDelay { from, to, sent: now, delay: d });
            }
            d
        };
        let id = self.next_id;
        self.next_id += 1;
        let at = now.saturating_add(delay);
        self.record(now, from, Event::send(id, to, at, &msg));
        self.push(at, CLASS_DELIVER, from, to, Kind::Deliver { id, msg, label });
        Ok(())
    }

    fn register(&mut self, msg: &Message) {
        let sig = match msg {
            Message::Propose { leader_sig, .. } => leader_sig,
            Message::Sig { ack_sig, .. } => ack_sig,
            Message::Vote(sv) => &sv.sig,
            Message::CertAck { sig, .. } => sig,
            _ => return,
        };
        if !self.registry.contains(sig.as_bytes()) {
            self.registry.insert(sig.as_bytes().to_vec());
        }
    }

    fn check_forgery(&self, sender: ProcessId, msg: &Message) -> Result<(), SimError> {
        let mut parts = Vec::new();
        signed_parts(&self.cfg, sender, msg, &mut parts);
        for (signer, bytes, sig) in parts {
            if !self.byzantine.contains(&signer)
                && !self.registry.contains(sig.as_bytes())
                && self.keys.verify(signer, &bytes, sig)
            {
                return Err(SimError::IllegalForgery { sender, signer });
            }
        }
        Ok(())
    }
}

/// Every signature in `msg` with its claimed signer and the bytes it should cover.
fn signed_parts<'a>(
    cfg: &QuorumConfig,
    sender: ProcessId,
    msg: &'a Message,
    out: &mut Vec<(ProcessId, Vec<u8>, &'a Signature)>,
) {
    match msg {
        Message::Propose { value, view, cert, leader_sig } => {
            out.push((sender, canonical_encode(&Signable::Propose { value, view: *view }), leader_sig));
            cert_parts(cfg, cert, out);
        }
        Message::Sig { value, view, ack_sig } => {
            out.push((sender, canonical_encode(&Signable::Ack { value, view: *view }), ack_sig))
        }
        Message::Vote(sv) => vote_parts(cfg, sv, out),
        Message::CertRequest { votes, .. } => votes.iter().for_each(|v| vote_parts(cfg, v, out)),
        Message::CertAck { value, view, sig } => {
            out.push((sender, canonical_encode(&Signable::CertAck { value, view: *view }), sig))
        }
        Message::Commit { cc, .. } => commit_parts(cc, out),
        Message::Ack { .. } | Message::NewView { .. } => {}
    }
}

fn vote_parts<'a>(cfg: &QuorumConfig, sv: &'a SignedVote, out: &mut Vec<(ProcessId, Vec<u8>, &'a Signature)>) {
    out.push((sv.sender, canonical_encode(&Signable::Vote { vote: &sv.vote, view: sv.view }), &sv.sig));
    if let Vote::Cast(c) = &sv.vote {
        out.push((
            cfg.leader(c.view),
            canonical_encode(&Signable::Propose { value: &c.value, view: c.view }),
            &c.leader_sig,
        ));
        cert_parts(cfg, &c.cert, out);
    }
    if let Some(cc) = &sv.commit_cert {
        commit_parts(cc, out);
    }
}

fn cert_parts<'a>(cfg: &QuorumConfig, cert: &'a ProgressCertificate, out: &mut Vec<(ProcessId, Vec<u8>, &'a Signature)>) {
    match cert {
        ProgressCertificate::Bottom => {}
        ProgressCertificate::Signed(set) => {
            let bytes = canonical_encode(&Signable::CertAck { value: &set.value, view: set.view });
            out.extend(set.sigs.iter().map(|s| (s.signer, bytes.clone(), &s.sig)));
        }
        ProgressCertificate::VoteSet(votes) => votes.iter().for_each(|v| vote_parts(cfg, v, out)),
    }
}

fn commit_parts<'a>(cc: &'a CommitCertificate, out: &mut Vec<(ProcessId, Vec<u8>, &'a Signature)>) {
    let bytes = canonical_encode(&Signable::Ack { value: &cc.value, view: cc.view });
    out.extend(cc.sigs.iter().map(|s| (s.signer, bytes.clone(), &s.sig)));
}

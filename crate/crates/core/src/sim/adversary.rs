//! Byzantine behaviors.
//!
//! A behavior drives one Byzantine process. It is handed that process's own signing key and
//! nothing else, so it can sign only as itself; everything it sends still goes through the
//! simulator, which rejects forged signatures.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::crypto::{KeyDirectory, Signer, SigningKey};
use crate::encoding::{canonical_encode, Signable};
use crate::engine::{Action, CertificateMode};
use crate::quorum::QuorumConfig;
use crate::replica::Replica;
use crate::types::{Message, ProcessId, Value, View, Vote};

/// Out-of-band tag on messages between Byzantine processes, so that twin copies of
/// colluding processes can keep to their own side of a split.
pub type Label = u8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ByzOut {
    Send { to: ProcessId, msg: Message, delay: Option<u64>, label: Option<Label> },
    Timer { at: u64 },
}

impl ByzOut {
    pub fn send(to: ProcessId, msg: Message) -> ByzOut {
        ByzOut::Send { to, msg, delay: None, label: None }
    }
}

pub trait Behavior: Send {
    fn start(&mut self, now: u64) -> Vec<ByzOut>;
    fn on_message(&mut self, now: u64, from: ProcessId, label: Option<Label>, msg: Message) -> Vec<ByzOut>;
    fn on_timer(&mut self, now: u64) -> Vec<ByzOut>;
    /// When set, the simulator records a crash at this time.
    fn crash_time(&self) -> Option<u64> {
        None
    }
}

/// What a behavior is built from.
#[derive(Clone)]
pub struct ByzContext {
    pub id: ProcessId,
    pub cfg: QuorumConfig,
    pub delta: u64,
    pub input: Value,
    pub key: SigningKey,
    pub keys: Arc<KeyDirectory>,
    pub cert_mode: CertificateMode,
    pub seed: u64,
}

impl fmt::Debug for ByzContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ByzContext").field("id", &self.id).field("input", &self.input).finish()
    }
}

impl ByzContext {
    pub fn replica(&self, input: Value) -> Replica {
        Replica::new(self.id, self.cfg, self.delta, input, self.key.clone(), self.keys.clone(), self.cert_mode)
    }
}

fn convert(actions: Vec<Action>) -> Vec<ByzOut> {
    actions
        .into_iter()
        .filter_map(|a| match a {
            Action::Send { to, msg } => Some(ByzOut::send(to, msg)),
            Action::SetTimer { at } => Some(ByzOut::Timer { at }),
            _ => None,
        })
        .collect()
}

/// Runs the protocol faithfully.
pub struct Honest {
    replica: Replica,
}

impl Honest {
    pub fn new(ctx: &ByzContext) -> Self {
        Honest { replica: ctx.replica(ctx.input.clone()) }
    }
}

impl Behavior for Honest {
    fn start(&mut self, now: u64) -> Vec<ByzOut> {
        convert(self.replica.start(now))
    }

    fn on_message(&mut self, now: u64, from: ProcessId, _: Option<Label>, msg: Message) -> Vec<ByzOut> {
        convert(self.replica.on_message(now, from, msg))
    }

    fn on_timer(&mut self, now: u64) -> Vec<ByzOut> {
        convert(self.replica.on_timer(now))
    }
}

/// Follows the protocol before `at`, then takes no further steps. `at = Δ` is the T-faulty
/// behavior; `at = 0` is a process that never sends anything.
pub struct CrashAt {
    replica: Replica,
    at: u64,
}

impl CrashAt {
    pub fn new(ctx: &ByzContext, at: u64) -> Self {
        CrashAt { replica: ctx.replica(ctx.input.clone()), at }
    }
}

impl Behavior for CrashAt {
    fn start(&mut self, now: u64) -> Vec<ByzOut> {
        if now >= self.at {
            return Vec::new();
        }
        convert(self.replica.start(now))
    }

    fn on_message(&mut self, now: u64, from: ProcessId, _: Option<Label>, msg: Message) -> Vec<ByzOut> {
        if now >= self.at {
            return Vec::new();
        }
        convert(self.replica.on_message(now, from, msg))
    }

    fn on_timer(&mut self, now: u64) -> Vec<ByzOut> {
        if now >= self.at {
            return Vec::new();
        }
        convert(self.replica.on_timer(now))
    }

    fn crash_time(&self) -> Option<u64> {
        Some(self.at)
    }
}

/// Never sends anything.
pub struct Silent;

impl Behavior for Silent {
    fn start(&mut self, _: u64) -> Vec<ByzOut> {
        Vec::new()
    }

    fn on_message(&mut self, _: u64, _: ProcessId, _: Option<Label>, _: Message) -> Vec<ByzOut> {
        Vec::new()
    }

    fn on_timer(&mut self, _: u64) -> Vec<ByzOut> {
        Vec::new()
    }
}

/// Honest except as leader: proposes `a` to the processes in `split` and `b` to everyone
/// else, signing both.
pub struct Equivocate {
    replica: Replica,
    key: SigningKey,
    a: Value,
    b: Value,
    split: BTreeSet<ProcessId>,
}

impl Equivocate {
    pub fn new(ctx: &ByzContext, a: Value, b: Value, split: BTreeSet<ProcessId>) -> Self {
        Equivocate { replica: ctx.replica(a.clone()), key: ctx.key.clone(), a, b, split }
    }

    /// The first half of the processes (by id) get `a`.
    pub fn default_split(n: u32) -> BTreeSet<ProcessId> {
        ProcessId::all(n).take(n.div_ceil(2) as usize).collect()
    }

    fn rewrite(&self, actions: Vec<Action>) -> Vec<ByzOut> {
        convert(actions)
            .into_iter()
            .map(|o| match o {
                ByzOut::Send { to, msg: Message::Propose { view, cert, .. }, delay, label } => {
                    let value = if self.split.contains(&to) { self.a.clone() } else { self.b.clone() };
                    let leader_sig = self.key.sign(&canonical_encode(&Signable::Propose { value: &value, view }));
                    ByzOut::Send { to, msg: Message::Propose { value, view, cert, leader_sig }, delay, label }
                }
                o => o,
            })
            .collect()
    }
}

impl Behavior for Equivocate {
    fn start(&mut self, now: u64) -> Vec<ByzOut> {
        let a = self.replica.start(now);
        self.rewrite(a)
    }

    fn on_message(&mut self, now: u64, from: ProcessId, _: Option<Label>, msg: Message) -> Vec<ByzOut> {
        let a = self.replica.on_message(now, from, msg);
        self.rewrite(a)
    }

    fn on_timer(&mut self, now: u64) -> Vec<ByzOut> {
        let a = self.replica.on_timer(now);
        self.rewrite(a)
    }
}

/// Runs the protocol and randomly tampers with what it sends: drops, duplicates, extra
/// delays, other values (re-signed where the signature is its own), nil votes, corrupted
/// signatures and spurious view announcements.
pub struct Mutator {
    replica: Replica,
    key: SigningKey,
    delta: u64,
    n: u32,
    rng: ChaCha8Rng,
    /// Probability that any given send is tampered with.
    intensity: f64,
    values: Vec<Value>,
}

impl Mutator {
    pub fn new(ctx: &ByzContext, intensity: f64, values: Vec<Value>) -> Self {
        let mut values = values;
        if values.is_empty() {
            values.push(ctx.input.clone());
        }
        Mutator {
            replica: ctx.replica(ctx.input.clone()),
            key: ctx.key.clone(),
            delta: ctx.delta,
            n: ctx.cfg.n(),
            rng: ChaCha8Rng::seed_from_u64(ctx.seed ^ (ctx.id.0 as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
            intensity,
            values,
        }
    }

    fn other_value(&mut self) -> Value {
        self.values.choose(&mut self.rng).expect("non-empty").clone()
    }

    fn tamper(&mut self, actions: Vec<Action>) -> Vec<ByzOut> {
        let mut out = Vec::new();
        for o in convert(actions) {
            let ByzOut::Send { to, msg, .. } = o else {
                out.push(o);
                continue;
            };
            if !self.rng.gen_bool(self.intensity) {
                out.push(ByzOut::send(to, msg));
                continue;
            }
            match self.rng.gen_range(0..7) {
                0 => {}
                1 => {
                    out.push(ByzOut::send(to, msg.clone()));
                    out.push(ByzOut::send(to, msg));
                }
                2 => {
                    let delay = self.rng.gen_range(1..=3 * self.delta);
                    out.push(ByzOut::Send { to, msg, delay: Some(delay), label: None });
                }
                3 => {
                    let value = self.other_value();
                    let msg = self.revalue(msg, value);
                    out.push(ByzOut::send(to, msg));
                }
                4 => {
                    let msg = self.corrupt(msg);
                    out.push(ByzOut::send(to, msg));
                }
                5 => {
                    let ahead = self.rng.gen_range(1..=3);
                    let view = View(msg.view().0 + ahead);
                    out.push(ByzOut::send(to, msg));
                    for p in ProcessId::all(self.n) {
                        out.push(ByzOut::send(p, Message::NewView { view }));
                    }
                }
                _ => {
                    let msg = self.nil_vote(msg);
                    out.push(ByzOut::send(to, msg));
                }
            }
        }
        out
    }

    fn revalue(&self, msg: Message, value: Value) -> Message {
        match msg {
            Message::Propose { view, cert, .. } => {
                let leader_sig = self.key.sign(&canonical_encode(&Signable::Propose { value: &value, view }));
                Message::Propose { value, view, cert, leader_sig }
            }
            Message::Ack { view, .. } => Message::Ack { value, view },
            Message::Sig { view, .. } => {
                let ack_sig = self.key.sign(&canonical_encode(&Signable::Ack { value: &value, view }));
                Message::Sig { value, view, ack_sig }
            }
            Message::CertAck { view, .. } => {
                let sig = self.key.sign(&canonical_encode(&Signable::CertAck { value: &value, view }));
                Message::CertAck { value, view, sig }
            }
            Message::CertRequest { view, votes, .. } => Message::CertRequest { value, view, votes },
            m => m,
        }
    }

    fn corrupt(&mut self, msg: Message) -> Message {
        let flip = |sig: &mut crate::crypto::Signature, rng: &mut ChaCha8Rng| {
            if !sig.0.is_empty() {
                let i = rng.gen_range(0..sig.0.len());
                sig.0[i] ^= 1;
            }
        };
        match msg {
            Message::Propose { value, view, cert, mut leader_sig } => {
                flip(&mut leader_sig, &mut self.rng);
                Message::Propose { value, view, cert, leader_sig }
            }
            Message::Sig { value, view, mut ack_sig } => {
                flip(&mut ack_sig, &mut self.rng);
                Message::Sig { value, view, ack_sig }
            }
            Message::CertAck { value, view, mut sig } => {
                flip(&mut sig, &mut self.rng);
                Message::CertAck { value, view, sig }
            }
            Message::Vote(mut sv) => {
                flip(&mut sv.sig, &mut self.rng);
                Message::Vote(sv)
            }
            m => m,
        }
    }

    fn nil_vote(&self, msg: Message) -> Message {
        match msg {
            Message::Vote(mut sv) => {
                sv.vote = Vote::Nil;
                sv.sig = self.key.sign(&canonical_encode(&Signable::Vote { vote: &sv.vote, view: sv.view }));
                Message::Vote(sv)
            }
            m => m,
        }
    }
}

impl Behavior for Mutator {
    fn start(&mut self, now: u64) -> Vec<ByzOut> {
        let a = self.replica.start(now);
        self.tamper(a)
    }

    fn on_message(&mut self, now: u64, from: ProcessId, _: Option<Label>, msg: Message) -> Vec<ByzOut> {
        let a = self.replica.on_message(now, from, msg);
        self.tamper(a)
    }

    fn on_timer(&mut self, now: u64) -> Vec<ByzOut> {
        let a = self.replica.on_timer(now);
        self.tamper(a)
    }
}

/// Decides whether a twin copy's send to `to` at `now` goes out.
pub type RouteFn = Box<dyn Fn(u64, ProcessId) -> bool + Send>;

pub struct TwinCopy {
    pub label: Label,
    pub replica: Replica,
    pub route: RouteFn,
}

/// Several honest copies of one process with different inputs or views of the world.
///
/// Messages from correct processes reach every copy; messages from Byzantine peers reach
/// only the copy with the matching label. Each copy's sends go out only where its route
/// allows, tagged with its label.
pub struct Twin {
    id: ProcessId,
    byzantine: BTreeSet<ProcessId>,
    copies: Vec<TwinCopy>,
}

impl Twin {
    pub fn new(id: ProcessId, byzantine: BTreeSet<ProcessId>, copies: Vec<TwinCopy>) -> Self {
        Twin { id, byzantine, copies }
    }

    fn collect(id: ProcessId, copy: &TwinCopy, now: u64, actions: Vec<Action>, out: &mut Vec<ByzOut>) {
        for o in convert(actions) {
            match o {
                ByzOut::Send { to, msg, delay, .. } => {
                    if to == id || (copy.route)(now, to) {
                        out.push(ByzOut::Send { to, msg, delay, label: Some(copy.label) });
                    }
                }
                t => out.push(t),
            }
        }
    }
}

impl Behavior for Twin {
    fn start(&mut self, now: u64) -> Vec<ByzOut> {
        let mut out = Vec::new();
        for c in &mut self.copies {
            let a = c.replica.start(now);
            Self::collect(self.id, c, now, a, &mut out);
        }
        out
    }

    fn on_message(&mut self, now: u64, from: ProcessId, label: Option<Label>, msg: Message) -> Vec<ByzOut> {
        let mut out = Vec::new();
        let from_peer = self.byzantine.contains(&from);
        for c in &mut self.copies {
            if from_peer && label.is_some_and(|l| l != c.label) {
                continue;
            }
            let a = c.replica.on_message(now, from, msg.clone());
            Self::collect(self.id, c, now, a, &mut out);
        }
        out
    }

    fn on_timer(&mut self, now: u64) -> Vec<ByzOut> {
        let mut out = Vec::new();
        for c in &mut self.copies {
            let a = c.replica.on_timer(now);
            Self::collect(self.id, c, now, a, &mut out);
        }
        out
    }
}

#![allow(dead_code)]

use std::sync::Arc;

use fastbft::crypto::{KeyDirectory, Signature, Signer, SigningKey};
use fastbft::encoding::{canonical_encode, Signable};
use fastbft::engine::{Action, CertificateMode, DropReason, Engine};
use fastbft::quorum::{Mode, QuorumConfig};
use fastbft::types::{
    CastVote, CertAckSet, CommitCertificate, DecisionPath, Message, ProcessId, ProgressCertificate, SignedVote,
    SignerEntry, Value, View, Vote,
};

pub const SEED: u64 = 7;

pub fn v(s: &str) -> Value {
    Value::from(s)
}

pub fn p(i: u32) -> ProcessId {
    ProcessId(i)
}

pub struct Fixture {
    pub cfg: QuorumConfig,
    pub keys: Arc<KeyDirectory>,
    pub signing: Vec<SigningKey>,
}

impl Fixture {
    pub fn new(n: u32, f: u32, t: u32, mode: Mode) -> Self {
        let cfg = QuorumConfig::new(n, f, t, mode).unwrap();
        let (keys, signing) = KeyDirectory::generate(n, SEED);
        Fixture { cfg, keys: Arc::new(keys), signing }
    }

    pub fn vanilla(n: u32, f: u32) -> Self {
        Self::new(n, f, f, Mode::Vanilla)
    }

    pub fn key(&self, i: u32) -> &SigningKey {
        &self.signing[i as usize - 1]
    }

    pub fn engine(&self, i: u32, input: &str) -> Engine {
        Engine::new(p(i), self.cfg, v(input), self.key(i).clone(), self.keys.clone(), CertificateMode::Signed)
    }

    pub fn leader_sig(&self, value: &str, view: u64) -> Signature {
        let leader = self.cfg.leader(View(view));
        self.key(leader.0).sign(&canonical_encode(&Signable::Propose { value: &v(value), view: View(view) }))
    }

    pub fn propose(&self, value: &str, view: u64, cert: ProgressCertificate) -> Message {
        Message::Propose { value: v(value), view: View(view), cert, leader_sig: self.leader_sig(value, view) }
    }

    pub fn cert(&self, value: &str, view: u64, signers: &[u32]) -> ProgressCertificate {
        let msg = canonical_encode(&Signable::CertAck { value: &v(value), view: View(view) });
        ProgressCertificate::Signed(CertAckSet {
            value: v(value),
            view: View(view),
            sigs: signers.iter().map(|i| SignerEntry { signer: p(*i), sig: self.key(*i).sign(&msg) }).collect(),
        })
    }

    pub fn cast(&self, value: &str, view: u64, cert: ProgressCertificate) -> Vote {
        Vote::Cast(Box::new(CastVote { value: v(value), view: View(view), cert, leader_sig: self.leader_sig(value, view) }))
    }

    /// A view-1 vote for `value`.
    pub fn cast1(&self, value: &str) -> Vote {
        self.cast(value, 1, ProgressCertificate::Bottom)
    }

    pub fn signed_vote(&self, sender: u32, vote: Vote, view: u64) -> SignedVote {
        let sig = self.key(sender).sign(&canonical_encode(&Signable::Vote { vote: &vote, view: View(view) }));
        SignedVote { sender: p(sender), vote, view: View(view), commit_cert: None, sig }
    }

    pub fn ack_sig(&self, signer: u32, value: &str, view: u64) -> Signature {
        self.key(signer).sign(&canonical_encode(&Signable::Ack { value: &v(value), view: View(view) }))
    }

    pub fn cc(&self, value: &str, view: u64, signers: &[u32]) -> CommitCertificate {
        CommitCertificate {
            value: v(value),
            view: View(view),
            sigs: signers.iter().map(|i| SignerEntry { signer: p(*i), sig: self.ack_sig(*i, value, view) }).collect(),
        }
    }
}

pub fn sends(actions: &[Action]) -> Vec<(ProcessId, Message)> {
    actions
        .iter()
        .filter_map(|a| match a {
            Action::Send { to, msg } => Some((*to, msg.clone())),
            _ => None,
        })
        .collect()
}

pub fn decisions(actions: &[Action]) -> Vec<(Value, View, DecisionPath)> {
    actions
        .iter()
        .filter_map(|a| match a {
            Action::Decide { value, view, path } => Some((value.clone(), *view, *path)),
            _ => None,
        })
        .collect()
}

pub fn drops(actions: &[Action]) -> Vec<DropReason> {
    actions
        .iter()
        .filter_map(|a| match a {
            Action::Drop { reason, .. } => Some(*reason),
            _ => None,
        })
        .collect()
}

/// Feeds messages addressed to `engine` back into it until none remain.
pub fn loopback(engine: &mut Engine, actions: Vec<Action>) -> Vec<Action> {
    let mut all = Vec::new();
    let mut queue = actions;
    while !queue.is_empty() {
        let mut next = Vec::new();
        for a in queue {
            if let Action::Send { to, msg } = &a {
                if *to == engine.id() {
                    next.extend(engine.on_message(*to, msg.clone()));
                }
            }
            all.push(a);
        }
        queue = next;
    }
    all
}

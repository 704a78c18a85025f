//! Per-process consensus state machine.
//!
//! Event in, actions out: the engine owns no clock and no network. Broadcasts are emitted as
//! `n` point-to-point sends, the engine's own id included.

mod selection;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

pub use selection::{run_selection, SelectionBasis, SelectionError, SelectionOutcome};

use crate::crypto::{KeyDirectory, Signature, Signer, SigningKey, Verifier};
use crate::encoding::{canonical_encode, Signable};
use crate::quorum::{Mode, QuorumConfig};
use crate::types::{
    CastVote, CertAckSet, CommitCertificate, DecisionPath, Message, MessageKind, ProcessId, ProgressCertificate,
    SignedVote, SignerEntry, Value, View, Vote,
};

/// Future-view messages kept per sender.
pub const FUTURE_BUFFER_PER_SENDER: usize = 32;

/// Output of the engine and of a [`crate::replica::Replica`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Send { to: ProcessId, msg: Message },
    Decide { value: Value, view: View, path: DecisionPath },
    EnterView { view: View },
    /// Ask to be woken at absolute time `at` (ticks).
    SetTimer { at: u64 },
    /// A received message was ignored.
    Drop { from: ProcessId, kind: MessageKind, view: View, reason: DropReason },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum DropReason {
    WrongView,
    NotLeader,
    DuplicatePropose,
    BadCertificate,
    BadSignature,
    InvalidVote,
    SelectionMismatch,
    InvalidEnclosedVote,
    BadCommitCertificate,
    Duplicate,
    Unexpected,
    BufferFull,
}

impl DropReason {
    pub const ALL: [DropReason; 12] = [
        DropReason::WrongView,
        DropReason::NotLeader,
        DropReason::DuplicatePropose,
        DropReason::BadCertificate,
        DropReason::BadSignature,
        DropReason::InvalidVote,
        DropReason::SelectionMismatch,
        DropReason::InvalidEnclosedVote,
        DropReason::BadCommitCertificate,
        DropReason::Duplicate,
        DropReason::Unexpected,
        DropReason::BufferFull,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::WrongView => "wrong_view",
            DropReason::NotLeader => "not_leader",
            DropReason::DuplicatePropose => "duplicate_propose",
            DropReason::BadCertificate => "bad_certificate",
            DropReason::BadSignature => "bad_signature",
            DropReason::InvalidVote => "invalid_vote",
            DropReason::SelectionMismatch => "selection_mismatch",
            DropReason::InvalidEnclosedVote => "invalid_enclosed_vote",
            DropReason::BadCommitCertificate => "bad_commit_certificate",
            DropReason::Duplicate => "duplicate",
            DropReason::Unexpected => "unexpected",
            DropReason::BufferFull => "buffer_full",
        }
    }

    pub fn parse(s: &str) -> Option<DropReason> {
        DropReason::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a leader proves its proposal safe.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash)]
pub enum CertificateMode {
    /// `f+1` CertAck signatures (bounded size).
    #[default]
    Signed,
    /// The whole vote set the leader selected from. Grows with every view change; exists only
    /// as a reference point for the certificate-size check.
    VoteSet,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Follower,
    LeaderCollectingVotes,
    LeaderAwaitingCertAcks,
    LeaderProposed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decision {
    pub value: Value,
    pub view: View,
    pub path: DecisionPath,
}

/// Read-only context for validity checks.
#[derive(Copy, Clone)]
pub struct Validator<'a> {
    pub cfg: &'a QuorumConfig,
    pub keys: &'a KeyDirectory,
    pub mode: CertificateMode,
}

impl<'a> Validator<'a> {
    pub fn new(cfg: &'a QuorumConfig, keys: &'a KeyDirectory, mode: CertificateMode) -> Self {
        Validator { cfg, keys, mode }
    }

    /// `Bottom` in view 1, otherwise a certificate of the configured kind for `(value, view)`.
    pub fn progress_certificate(&self, value: &Value, view: View, cert: &ProgressCertificate) -> bool {
        match cert {
            ProgressCertificate::Bottom => view == View::FIRST,
            ProgressCertificate::Signed(set) => {
                self.mode == CertificateMode::Signed
                    && view > View::FIRST
                    && set.value == *value
                    && set.view == view
                    && set.sigs.len() == self.cfg.cert_ack_threshold()
                    && self.distinct_valid(&set.sigs, &canonical_encode(&Signable::CertAck { value, view }))
            }
            ProgressCertificate::VoteSet(votes) => {
                if self.mode != CertificateMode::VoteSet || view == View::FIRST {
                    return false;
                }
                let senders: BTreeSet<ProcessId> = votes.iter().map(|v| v.sender).collect();
                senders.len() == votes.len()
                    && votes.iter().all(|v| v.view == view && self.signed_vote(v))
                    && run_selection(self.cfg, votes, value, None)
                        .is_ok_and(|o| o.selected() == Some(value))
            }
        }
    }

    /// `nil`, or a vote whose certificate and leader signature both verify.
    pub fn vote(&self, vote: &Vote) -> bool {
        match vote {
            Vote::Nil => true,
            Vote::Cast(c) => self.cast_vote(c),
        }
    }

    fn cast_vote(&self, c: &CastVote) -> bool {
        self.progress_certificate(&c.value, c.view, &c.cert)
            && self.keys.verify(
                self.cfg.leader(c.view),
                &canonical_encode(&Signable::Propose { value: &c.value, view: c.view }),
                &c.leader_sig,
            )
    }

    /// A vote message: sender signature, vote validity, vote older than the message view, and
    /// (generalized mode only) a valid attached commit certificate.
    pub fn signed_vote(&self, sv: &SignedVote) -> bool {
        if sv.vote.position().is_some_and(|(_, u)| u >= sv.view) {
            return false;
        }
        let cc_ok = match &sv.commit_cert {
            None => true,
            Some(cc) => self.cfg.mode() == Mode::Generalized && cc.view < sv.view && self.commit_certificate(cc),
        };
        cc_ok
            && self.keys.verify(sv.sender, &canonical_encode(&Signable::Vote { vote: &sv.vote, view: sv.view }), &sv.sig)
            && self.vote(&sv.vote)
    }

    /// At least `⌈(n+f+1)/2⌉` distinct valid ack signatures.
    pub fn commit_certificate(&self, cc: &CommitCertificate) -> bool {
        let Ok(need) = self.cfg.commit_cert_threshold() else { return false };
        cc.sigs.len() >= need
            && self.distinct_valid(&cc.sigs, &canonical_encode(&Signable::Ack { value: &cc.value, view: cc.view }))
    }

    fn distinct_valid(&self, sigs: &[SignerEntry], msg: &[u8]) -> bool {
        let signers: BTreeSet<ProcessId> = sigs.iter().map(|s| s.signer).collect();
        signers.len() == sigs.len() && sigs.iter().all(|s| self.keys.verify(s.signer, msg, &s.sig))
    }
}

pub fn vote_is_valid(cfg: &QuorumConfig, keys: &KeyDirectory, vote: &Vote) -> bool {
    Validator::new(cfg, keys, CertificateMode::Signed).vote(vote)
}

pub fn verify_progress_certificate(
    cfg: &QuorumConfig,
    keys: &KeyDirectory,
    value: &Value,
    view: View,
    cert: &ProgressCertificate,
) -> bool {
    Validator::new(cfg, keys, CertificateMode::Signed).progress_certificate(value, view, cert)
}

/// Per-view bookkeeping, reset on every view change.
#[derive(Debug)]
struct ViewBook {
    phase: Phase,
    accepted_propose: bool,
    acks: BTreeMap<ProcessId, Value>,
    ack_sigs: BTreeMap<ProcessId, (Value, Signature)>,
    commit_sent: bool,
    votes: BTreeMap<ProcessId, SignedVote>,
    anchor: Option<View>,
    selected: Option<Value>,
    cert_acks: BTreeMap<ProcessId, Signature>,
    cert_request_answered: bool,
}

impl ViewBook {
    fn new(phase: Phase) -> Self {
        ViewBook {
            phase,
            accepted_propose: false,
            acks: BTreeMap::new(),
            ack_sigs: BTreeMap::new(),
            commit_sent: false,
            votes: BTreeMap::new(),
            anchor: None,
            selected: None,
            cert_acks: BTreeMap::new(),
            cert_request_answered: false,
        }
    }
}

pub struct Engine {
    id: ProcessId,
    cfg: QuorumConfig,
    input: Value,
    key: SigningKey,
    keys: Arc<KeyDirectory>,
    cert_mode: CertificateMode,
    view: View,
    vote: Vote,
    decided: Option<Decision>,
    best_cc: Option<CommitCertificate>,
    book: ViewBook,
    commits: BTreeMap<View, BTreeMap<ProcessId, Value>>,
    future: BTreeMap<ProcessId, Vec<Message>>,
    selections: Vec<(View, SelectionOutcome)>,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("id", &self.id)
            .field("view", &self.view)
            .field("phase", &self.book.phase)
            .field("decided", &self.decided)
            .finish()
    }
}

impl Engine {
    pub fn new(
        id: ProcessId,
        cfg: QuorumConfig,
        input: Value,
        key: SigningKey,
        keys: Arc<KeyDirectory>,
        cert_mode: CertificateMode,
    ) -> Self {
        assert_eq!(key.owner(), id, "signing key belongs to another process");
        Engine {
            id,
            cfg,
            input,
            key,
            keys,
            cert_mode,
            view: View::FIRST,
            vote: Vote::Nil,
            decided: None,
            best_cc: None,
            book: ViewBook::new(Phase::Follower),
            commits: BTreeMap::new(),
            future: BTreeMap::new(),
            selections: Vec::new(),
        }
    }

    pub fn id(&self) -> ProcessId {
        self.id
    }

    pub fn config(&self) -> &QuorumConfig {
        &self.cfg
    }

    pub fn input(&self) -> &Value {
        &self.input
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn vote(&self) -> &Vote {
        &self.vote
    }

    pub fn decided(&self) -> Option<&Decision> {
        self.decided.as_ref()
    }

    pub fn phase(&self) -> Phase {
        self.book.phase
    }

    pub fn best_commit_certificate(&self) -> Option<&CommitCertificate> {
        self.best_cc.as_ref()
    }

    /// Every selection run by this engine as leader, in order.
    pub fn selections(&self) -> &[(View, SelectionOutcome)] {
        &self.selections
    }

    fn validator(&self) -> Validator<'_> {
        Validator::new(&self.cfg, &self.keys, self.cert_mode)
    }

    /// Initial actions: the leader of view 1 proposes its input.
    pub fn start(&mut self) -> Vec<Action> {
        let mut out = Vec::new();
        if self.cfg.leader(View::FIRST) == self.id && self.view == View::FIRST {
            self.book.phase = Phase::LeaderProposed;
            let value = self.input.clone();
            self.propose(value, ProgressCertificate::Bottom, &mut out);
        }
        out
    }

    pub fn on_enter_view(&mut self, view: View) -> Vec<Action> {
        let mut out = Vec::new();
        if view <= self.view {
            return out;
        }
        self.view = view;
        let leader = self.cfg.leader(view);
        self.book = ViewBook::new(if leader == self.id { Phase::LeaderCollectingVotes } else { Phase::Follower });
        let sig = self.key.sign(&canonical_encode(&Signable::Vote { vote: &self.vote, view }));
        let vote = SignedVote {
            sender: self.id,
            vote: self.vote.clone(),
            view,
            commit_cert: if self.cfg.is_generalized() { self.best_cc.clone() } else { None },
            sig,
        };
        out.push(Action::Send { to: leader, msg: Message::Vote(vote) });

        let mut replay = Vec::new();
        for msgs in self.future.values_mut() {
            let (now, later): (Vec<_>, Vec<_>) = msgs.drain(..).filter(|m| m.view() >= view).partition(|m| m.view() == view);
            *msgs = later;
            replay.push(now);
        }
        let senders: Vec<ProcessId> = self.future.keys().copied().collect();
        self.future.retain(|_, m| !m.is_empty());
        for (from, msgs) in senders.into_iter().zip(replay) {
            for msg in msgs {
                out.extend(self.on_message(from, msg));
            }
        }
        out
    }

    pub fn on_message(&mut self, from: ProcessId, msg: Message) -> Vec<Action> {
        let mut out = Vec::new();
        let view = msg.view();
        if view > self.view && !matches!(msg, Message::NewView { .. }) {
            self.buffer(from, msg, &mut out);
            return out;
        }
        if view < self.view {
            if let Message::Commit { value, view, cc } = msg {
                self.on_commit(from, value, view, cc, &mut out);
            } else {
                out.push(drop_of(from, &msg, DropReason::WrongView));
            }
            return out;
        }
        match msg {
            Message::Propose { value, view, cert, leader_sig } => {
                self.on_propose(from, value, view, cert, leader_sig, &mut out)
            }
            Message::Ack { value, view } => self.on_ack(from, value, view, &mut out),
            Message::Sig { value, view, ack_sig } => self.on_sig(from, value, view, ack_sig, &mut out),
            Message::Vote(sv) => self.on_vote(from, sv, &mut out),
            Message::CertRequest { value, view, votes } => self.on_cert_request(from, value, view, votes, &mut out),
            Message::CertAck { value, view, sig } => self.on_cert_ack(from, value, view, sig, &mut out),
            Message::Commit { value, view, cc } => self.on_commit(from, value, view, cc, &mut out),
            m @ Message::NewView { .. } => out.push(drop_of(from, &m, DropReason::Unexpected)),
        }
        out
    }

    fn buffer(&mut self, from: ProcessId, msg: Message, out: &mut Vec<Action>) {
        let queue = self.future.entry(from).or_default();
        queue.push(msg);
        if queue.len() > FUTURE_BUFFER_PER_SENDER {
            let lowest = queue.iter().enumerate().min_by_key(|(_, m)| m.view()).map(|(i, _)| i).expect("non-empty");
            let evicted = queue.remove(lowest);
            out.push(drop_of(from, &evicted, DropReason::BufferFull));
        }
    }

    fn broadcast(&self, msg: Message, out: &mut Vec<Action>) {
        for to in self.cfg.processes() {
            out.push(Action::Send { to, msg: msg.clone() });
        }
    }

    fn propose(&mut self, value: Value, cert: ProgressCertificate, out: &mut Vec<Action>) {
        let view = self.view;
        let leader_sig = self.key.sign(&canonical_encode(&Signable::Propose { value: &value, view }));
        self.broadcast(Message::Propose { value, view, cert, leader_sig }, out);
    }

    fn decide(&mut self, value: Value, view: View, path: DecisionPath, out: &mut Vec<Action>) {
        if self.decided.is_none() {
            self.decided = Some(Decision { value: value.clone(), view, path });
            out.push(Action::Decide { value, view, path });
        }
    }

    fn on_propose(
        &mut self,
        from: ProcessId,
        value: Value,
        view: View,
        cert: ProgressCertificate,
        leader_sig: Signature,
        out: &mut Vec<Action>,
    ) {
        let kind = MessageKind::Propose;
        if from != self.cfg.leader(view) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::NotLeader });
        }
        if self.book.accepted_propose {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::DuplicatePropose });
        }
        let v = self.validator();
        if !v.progress_certificate(&value, view, &cert) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::BadCertificate });
        }
        if !self.keys.verify(from, &canonical_encode(&Signable::Propose { value: &value, view }), &leader_sig) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::BadSignature });
        }
        self.book.accepted_propose = true;
        self.vote = Vote::Cast(Box::new(CastVote { value: value.clone(), view, cert, leader_sig }));
        if self.cfg.is_generalized() {
            let ack_sig = self.key.sign(&canonical_encode(&Signable::Ack { value: &value, view }));
            self.broadcast(Message::Ack { value: value.clone(), view }, out);
            self.broadcast(Message::Sig { value, view, ack_sig }, out);
        } else {
            self.broadcast(Message::Ack { value, view }, out);
        }
    }

    fn on_ack(&mut self, from: ProcessId, value: Value, view: View, out: &mut Vec<Action>) {
        if self.book.acks.contains_key(&from) {
            return out.push(Action::Drop { from, kind: MessageKind::Ack, view, reason: DropReason::Duplicate });
        }
        self.book.acks.insert(from, value.clone());
        let count = self.book.acks.values().filter(|x| **x == value).count();
        if count >= self.cfg.fast_decide_quorum() {
            self.decide(value, view, DecisionPath::Fast, out);
        }
    }

    fn on_sig(&mut self, from: ProcessId, value: Value, view: View, ack_sig: Signature, out: &mut Vec<Action>) {
        let kind = MessageKind::Sig;
        let Ok(need) = self.cfg.commit_cert_threshold() else {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::Unexpected });
        };
        if self.book.ack_sigs.contains_key(&from) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::Duplicate });
        }
        if !self.keys.verify(from, &canonical_encode(&Signable::Ack { value: &value, view }), &ack_sig) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::BadSignature });
        }
        self.book.ack_sigs.insert(from, (value.clone(), ack_sig));
        if self.book.commit_sent {
            return;
        }
        let sigs: Vec<SignerEntry> = self
            .book
            .ack_sigs
            .iter()
            .filter(|(_, (x, _))| *x == value)
            .map(|(p, (_, s))| SignerEntry { signer: *p, sig: s.clone() })
            .take(need)
            .collect();
        if sigs.len() >= need {
            self.book.commit_sent = true;
            let cc = CommitCertificate { value: value.clone(), view, sigs };
            self.adopt_commit_certificate(&cc);
            self.broadcast(Message::Commit { value, view, cc }, out);
        }
    }

    fn adopt_commit_certificate(&mut self, cc: &CommitCertificate) {
        if self.best_cc.as_ref().is_none_or(|b| cc.view > b.view) {
            self.best_cc = Some(cc.clone());
        }
    }

    fn on_commit(&mut self, from: ProcessId, value: Value, view: View, cc: CommitCertificate, out: &mut Vec<Action>) {
        let kind = MessageKind::Commit;
        let Ok(need) = self.cfg.commit_cert_threshold() else {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::Unexpected });
        };
        if cc.value != value || cc.view != view || !self.validator().commit_certificate(&cc) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::BadCommitCertificate });
        }
        let book = self.commits.entry(view).or_default();
        if book.contains_key(&from) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::Duplicate });
        }
        book.insert(from, value.clone());
        let count = book.values().filter(|x| **x == value).count();
        self.adopt_commit_certificate(&cc);
        if count >= need {
            self.decide(value, view, DecisionPath::Slow, out);
        }
    }

    fn on_vote(&mut self, from: ProcessId, sv: SignedVote, out: &mut Vec<Action>) {
        let kind = MessageKind::Vote;
        let view = sv.view;
        if self.cfg.leader(view) != self.id {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::NotLeader });
        }
        if sv.sender != from || !self.validator().signed_vote(&sv) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::InvalidVote });
        }
        if self.book.votes.contains_key(&from) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::Duplicate });
        }
        self.book.votes.insert(from, sv);
        self.try_select(out);
    }

    fn try_select(&mut self, out: &mut Vec<Action>) {
        if self.book.phase != Phase::LeaderCollectingVotes || self.book.votes.len() < self.cfg.vote_quorum() {
            return;
        }
        let votes: Vec<SignedVote> = self.book.votes.values().cloned().collect();
        loop {
            let outcome = run_selection(&self.cfg, &votes, &self.input, self.book.anchor).expect("quorum checked above");
            self.selections.push((self.view, outcome.clone()));
            match outcome {
                SelectionOutcome::RestartRequired => self.book.anchor = None,
                SelectionOutcome::NeedVoteExcluding(_) => {
                    self.book.anchor = votes.iter().filter_map(|v| v.vote.position()).map(|(_, u)| u).max();
                    return;
                }
                SelectionOutcome::Selected { value, .. } => {
                    self.book.selected = Some(value.clone());
                    match self.cert_mode {
                        CertificateMode::Signed => {
                            self.book.phase = Phase::LeaderAwaitingCertAcks;
                            self.broadcast(Message::CertRequest { value, view: self.view, votes }, out);
                        }
                        CertificateMode::VoteSet => {
                            self.book.phase = Phase::LeaderProposed;
                            self.propose(value, ProgressCertificate::VoteSet(votes), out);
                        }
                    }
                    return;
                }
            }
        }
    }

    fn on_cert_request(
        &mut self,
        from: ProcessId,
        value: Value,
        view: View,
        votes: Vec<SignedVote>,
        out: &mut Vec<Action>,
    ) {
        let kind = MessageKind::CertRequest;
        if from != self.cfg.leader(view) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::NotLeader });
        }
        if self.book.cert_request_answered {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::Duplicate });
        }
        let senders: BTreeSet<ProcessId> = votes.iter().map(|v| v.sender).collect();
        let v = self.validator();
        if senders.len() != votes.len() || !votes.iter().all(|sv| sv.view == view && v.signed_vote(sv)) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::InvalidEnclosedVote });
        }
        match run_selection(&self.cfg, &votes, &value, None) {
            Err(_) => out.push(Action::Drop { from, kind, view, reason: DropReason::InvalidEnclosedVote }),
            Ok(o) if o.selected() == Some(&value) => {
                self.book.cert_request_answered = true;
                let sig = self.key.sign(&canonical_encode(&Signable::CertAck { value: &value, view }));
                out.push(Action::Send { to: from, msg: Message::CertAck { value, view, sig } });
            }
            Ok(_) => out.push(Action::Drop { from, kind, view, reason: DropReason::SelectionMismatch }),
        }
    }

    fn on_cert_ack(&mut self, from: ProcessId, value: Value, view: View, sig: Signature, out: &mut Vec<Action>) {
        let kind = MessageKind::CertAck;
        if self.book.phase != Phase::LeaderAwaitingCertAcks || self.book.selected.as_ref() != Some(&value) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::Unexpected });
        }
        if self.book.cert_acks.contains_key(&from) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::Duplicate });
        }
        if !self.keys.verify(from, &canonical_encode(&Signable::CertAck { value: &value, view }), &sig) {
            return out.push(Action::Drop { from, kind, view, reason: DropReason::BadSignature });
        }
        self.book.cert_acks.insert(from, sig);
        if self.book.cert_acks.len() >= self.cfg.cert_ack_threshold() {
            self.book.phase = Phase::LeaderProposed;
            let sigs = self
                .book
                .cert_acks
                .iter()
                .take(self.cfg.cert_ack_threshold())
                .map(|(p, s)| SignerEntry { signer: *p, sig: s.clone() })
                .collect();
            let cert = ProgressCertificate::Signed(CertAckSet { value: value.clone(), view, sigs });
            self.propose(value, cert, out);
        }
    }
}

fn drop_of(from: ProcessId, msg: &Message, reason: DropReason) -> Action {
    Action::Drop { from, kind: msg.kind(), view: msg.view(), reason }
}

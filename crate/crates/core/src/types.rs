//! Domain types shared by the engine, the simulator and the checker.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::Signature;

/// Index of a process, `1..=n`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl ProcessId {
    pub fn index(self) -> u32 {
        self.0
    }

    /// All ids of an `n`-process system, in ascending order.
    pub fn all(n: u32) -> impl Iterator<Item = ProcessId> {
        (1..=n).map(ProcessId)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A view number. Views start at 1.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct View(pub u64);

impl View {
    pub const FIRST: View = View(1);

    pub fn next(self) -> View {
        View(self.0 + 1)
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An opaque consensus value. Equality is byte equality; ordering is lexicographic.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Value(pub Vec<u8>);

impl Value {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        Value(bytes.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// Parses the hex form used in trace files.
    pub fn from_hex(s: &str) -> Option<Value> {
        hex::decode(s).ok().map(Value)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value(s.as_bytes().to_vec())
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match std::str::from_utf8(&self.0) {
            Ok(s) if s.chars().all(|c| c.is_ascii_graphic()) => write!(f, "{s:?}"),
            _ => write!(f, "0x{}", self.to_hex()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A signature over a value and view, tagged with its signer.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignerEntry {
    pub signer: ProcessId,
    pub sig: Signature,
}

/// `f+1` CertAck signatures over `(CERTACK, value, view)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CertAckSet {
    pub value: Value,
    pub view: View,
    pub sigs: Vec<SignerEntry>,
}

/// Proof that a value is safe to propose in a view.
///
/// `Bottom` is only meaningful for view 1, where every value is safe. `VoteSet` is the
/// unbounded certificate that ships the whole vote set the leader selected from; it is kept
/// for comparison against the bounded `Signed` form and is only produced when an engine is
/// configured with [`crate::engine::CertificateMode::VoteSet`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ProgressCertificate {
    Bottom,
    Signed(CertAckSet),
    VoteSet(Vec<SignedVote>),
}

impl ProgressCertificate {
    /// Total number of signatures carried, counting nested certificates.
    pub fn signature_count(&self) -> usize {
        match self {
            ProgressCertificate::Bottom => 0,
            ProgressCertificate::Signed(set) => set.sigs.len(),
            ProgressCertificate::VoteSet(votes) => votes.iter().map(SignedVote::signature_count).sum(),
        }
    }
}

/// At least `⌈(n+f+1)/2⌉` signatures over `(ACK, value, view)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CommitCertificate {
    pub value: Value,
    pub view: View,
    pub sigs: Vec<SignerEntry>,
}

/// A vote that is not nil: the latest proposal a process acknowledged.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CastVote {
    pub value: Value,
    pub view: View,
    pub cert: ProgressCertificate,
    /// The leader's signature over `(PROPOSE, value, view)`.
    pub leader_sig: Signature,
}

/// The per-process vote variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub enum Vote {
    #[default]
    Nil,
    Cast(Box<CastVote>),
}

impl Vote {
    pub fn is_nil(&self) -> bool {
        matches!(self, Vote::Nil)
    }

    pub fn cast(&self) -> Option<&CastVote> {
        match self {
            Vote::Nil => None,
            Vote::Cast(c) => Some(c),
        }
    }

    /// `(value, view)` of a non-nil vote.
    pub fn position(&self) -> Option<(&Value, View)> {
        self.cast().map(|c| (&c.value, c.view))
    }
}

/// A vote as sent to the leader of `view`, signed by `sender`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignedVote {
    pub sender: ProcessId,
    pub vote: Vote,
    /// The view this vote was sent for (the new view, not the view inside the vote).
    pub view: View,
    /// Latest commit certificate the sender holds. Only used in generalized mode; it is
    /// self-authenticating and therefore not covered by `sig`.
    pub commit_cert: Option<CommitCertificate>,
    /// `sign_sender((VOTE, vote, view))`.
    pub sig: Signature,
}

impl SignedVote {
    pub fn signature_count(&self) -> usize {
        let inner = match &self.vote {
            Vote::Nil => 0,
            Vote::Cast(c) => 1 + c.cert.signature_count(),
        };
        1 + inner + self.commit_cert.as_ref().map_or(0, |cc| cc.sigs.len())
    }
}

/// Every message exchanged by replicas.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Message {
    Propose {
        value: Value,
        view: View,
        cert: ProgressCertificate,
        leader_sig: Signature,
    },
    Ack {
        value: Value,
        view: View,
    },
    Sig {
        value: Value,
        view: View,
        ack_sig: Signature,
    },
    Vote(SignedVote),
    CertRequest {
        value: Value,
        view: View,
        votes: Vec<SignedVote>,
    },
    CertAck {
        value: Value,
        view: View,
        sig: Signature,
    },
    Commit {
        value: Value,
        view: View,
        cc: CommitCertificate,
    },
    /// View-synchronizer announcement.
    NewView {
        view: View,
    },
}

/// Discriminant of [`Message`], used in traces and drop annotations.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    Propose,
    Ack,
    Sig,
    Vote,
    CertRequest,
    CertAck,
    Commit,
    NewView,
}

impl MessageKind {
    pub const ALL: [MessageKind; 8] = [
        MessageKind::Propose,
        MessageKind::Ack,
        MessageKind::Sig,
        MessageKind::Vote,
        MessageKind::CertRequest,
        MessageKind::CertAck,
        MessageKind::Commit,
        MessageKind::NewView,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Propose => "PROPOSE",
            MessageKind::Ack => "ACK",
            MessageKind::Sig => "SIG",
            MessageKind::Vote => "VOTE",
            MessageKind::CertRequest => "CERTREQ",
            MessageKind::CertAck => "CERTACK",
            MessageKind::Commit => "COMMIT",
            MessageKind::NewView => "NEWVIEW",
        }
    }

    pub fn parse(s: &str) -> Option<MessageKind> {
        MessageKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Propose { .. } => MessageKind::Propose,
            Message::Ack { .. } => MessageKind::Ack,
            Message::Sig { .. } => MessageKind::Sig,
            Message::Vote(_) => MessageKind::Vote,
            Message::CertRequest { .. } => MessageKind::CertRequest,
            Message::CertAck { .. } => MessageKind::CertAck,
            Message::Commit { .. } => MessageKind::Commit,
            Message::NewView { .. } => MessageKind::NewView,
        }
    }

    pub fn view(&self) -> View {
        match self {
            Message::Propose { view, .. }
            | Message::Ack { view, .. }
            | Message::Sig { view, .. }
            | Message::CertRequest { view, .. }
            | Message::CertAck { view, .. }
            | Message::Commit { view, .. }
            | Message::NewView { view } => *view,
            Message::Vote(v) => v.view,
        }
    }

    /// The value this message is about, if any.
    pub fn value(&self) -> Option<&Value> {
        match self {
            Message::Propose { value, .. }
            | Message::Ack { value, .. }
            | Message::Sig { value, .. }
            | Message::CertRequest { value, .. }
            | Message::CertAck { value, .. }
            | Message::Commit { value, .. } => Some(value),
            Message::Vote(v) => v.vote.position().map(|(x, _)| x),
            Message::NewView { .. } => None,
        }
    }

    /// Signature counts of every non-bottom progress certificate carried by the message.
    pub fn progress_cert_sizes(&self) -> Vec<usize> {
        fn of_vote(v: &SignedVote, out: &mut Vec<usize>) {
            if let Vote::Cast(c) = &v.vote {
                if !matches!(c.cert, ProgressCertificate::Bottom) {
                    out.push(c.cert.signature_count());
                }
            }
        }
        let mut out = Vec::new();
        match self {
            Message::Propose { cert, .. } if !matches!(cert, ProgressCertificate::Bottom) => {
                out.push(cert.signature_count())
            }
            Message::Vote(v) => of_vote(v, &mut out),
            Message::CertRequest { votes, .. } => votes.iter().for_each(|v| of_vote(v, &mut out)),
            _ => {}
        }
        out
    }

    /// Signature counts of every commit certificate carried by the message.
    pub fn commit_cert_sizes(&self) -> Vec<usize> {
        match self {
            Message::Commit { cc, .. } => vec![cc.sigs.len()],
            Message::Vote(v) => v.commit_cert.iter().map(|cc| cc.sigs.len()).collect(),
            Message::CertRequest { votes, .. } => votes
                .iter()
                .filter_map(|v| v.commit_cert.as_ref())
                .map(|cc| cc.sigs.len())
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Total number of signatures in the message, nested ones included.
    pub fn signature_count(&self) -> usize {
        match self {
            Message::Propose { cert, .. } => 1 + cert.signature_count(),
            Message::Ack { .. } | Message::NewView { .. } => 0,
            Message::Sig { .. } | Message::CertAck { .. } => 1,
            Message::Vote(v) => v.signature_count(),
            Message::CertRequest { votes, .. } => votes.iter().map(SignedVote::signature_count).sum(),
            Message::Commit { cc, .. } => cc.sigs.len(),
        }
    }
}

/// How a decision was reached.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum DecisionPath {
    /// `n-f` (vanilla) or `n-t` (generalized) matching acks.
    Fast,
    /// `⌈(n+f+1)/2⌉` commit messages carrying commit certificates.
    Slow,
}

impl DecisionPath {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionPath::Fast => "fast",
            DecisionPath::Slow => "slow",
        }
    }
}

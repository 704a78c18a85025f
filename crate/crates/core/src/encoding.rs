//! Canonical byte encoding of signable payloads and of whole messages.
//!
//! Layout: one tag byte, then every field as a 4-byte big-endian length followed by the
//! field bytes, in declaration order. View numbers are 8-byte big-endian, process ids
//! 4-byte big-endian. Nested structures are encoded recursively and then length-prefixed
//! like any other field, so the encoding is prefix-free and injective.

use crate::types::{
    CertAckSet, CommitCertificate, Message, ProgressCertificate, SignedVote, SignerEntry, Value, View, Vote,
};

pub const TAG_PROPOSE: u8 = 0x01;
pub const TAG_VOTE: u8 = 0x02;
pub const TAG_CERTACK: u8 = 0x03;
pub const TAG_ACK: u8 = 0x04;

/// The four payload shapes that processes sign.
#[derive(Copy, Clone, Debug)]
pub enum Signable<'a> {
    Propose { value: &'a Value, view: View },
    Vote { vote: &'a Vote, view: View },
    CertAck { value: &'a Value, view: View },
    Ack { value: &'a Value, view: View },
}

pub fn canonical_encode(payload: &Signable<'_>) -> Vec<u8> {
    match *payload {
        Signable::Propose { value, view } => value_view(TAG_PROPOSE, value, view),
        Signable::CertAck { value, view } => value_view(TAG_CERTACK, value, view),
        Signable::Ack { value, view } => value_view(TAG_ACK, value, view),
        Signable::Vote { vote, view } => {
            let mut e = Encoder::new(TAG_VOTE);
            e.nested(|e| vote_body(e, vote));
            e.u64(view.0);
            e.finish()
        }
    }
}

fn value_view(tag: u8, value: &Value, view: View) -> Vec<u8> {
    let mut e = Encoder::new(tag);
    e.bytes(value.as_bytes());
    e.u64(view.0);
    e.finish()
}

struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn new(tag: u8) -> Self {
        Encoder { buf: vec![tag] }
    }

    fn bytes(&mut self, b: &[u8]) {
        let len = u32::try_from(b.len()).expect("field longer than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(b);
    }

    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_be_bytes());
    }

    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_be_bytes());
    }

    fn nested(&mut self, body: impl FnOnce(&mut Encoder)) {
        let mut inner = Encoder { buf: Vec::new() };
        body(&mut inner);
        self.bytes(&inner.buf);
    }

    fn finish(self) -> Vec<u8> {
        self.buf
    }
}

fn vote_body(e: &mut Encoder, vote: &Vote) {
    match vote {
        Vote::Nil => e.u32(0),
        Vote::Cast(c) => {
            e.u32(1);
            e.bytes(c.value.as_bytes());
            e.u64(c.view.0);
            e.nested(|e| cert_body(e, &c.cert));
            e.bytes(c.leader_sig.as_bytes());
        }
    }
}

fn entries(e: &mut Encoder, sigs: &[SignerEntry]) {
    e.u32(sigs.len() as u32);
    for s in sigs {
        e.u32(s.signer.0);
        e.bytes(s.sig.as_bytes());
    }
}

fn cert_body(e: &mut Encoder, cert: &ProgressCertificate) {
    match cert {
        ProgressCertificate::Bottom => e.u32(0),
        ProgressCertificate::Signed(CertAckSet { value, view, sigs }) => {
            e.u32(1);
            e.bytes(value.as_bytes());
            e.u64(view.0);
            e.nested(|e| entries(e, sigs));
        }
        ProgressCertificate::VoteSet(votes) => {
            e.u32(2);
            e.u32(votes.len() as u32);
            for v in votes {
                e.nested(|e| signed_vote_body(e, v));
            }
        }
    }
}

fn commit_cert_body(e: &mut Encoder, cc: &CommitCertificate) {
    e.bytes(cc.value.as_bytes());
    e.u64(cc.view.0);
    e.nested(|e| entries(e, &cc.sigs));
}

fn signed_vote_body(e: &mut Encoder, v: &SignedVote) {
    e.u32(v.sender.0);
    e.nested(|e| vote_body(e, &v.vote));
    e.u64(v.view.0);
    match &v.commit_cert {
        None => e.u32(0),
        Some(cc) => {
            e.u32(1);
            e.nested(|e| commit_cert_body(e, cc));
        }
    }
    e.bytes(v.sig.as_bytes());
}

/// Full, injective encoding of a message. Used for trace digests, not for signing.
pub fn encode_message(msg: &Message) -> Vec<u8> {
    let mut e = Encoder::new(0x10 + msg.kind() as u8);
    match msg {
        Message::Propose { value, view, cert, leader_sig } => {
            e.bytes(value.as_bytes());
            e.u64(view.0);
            e.nested(|e| cert_body(e, cert));
            e.bytes(leader_sig.as_bytes());
        }
        Message::Ack { value, view } => {
            e.bytes(value.as_bytes());
            e.u64(view.0);
        }
        Message::Sig { value, view, ack_sig: sig } | Message::CertAck { value, view, sig } => {
            e.bytes(value.as_bytes());
            e.u64(view.0);
            e.bytes(sig.as_bytes());
        }
        Message::Vote(v) => signed_vote_body(&mut e, v),
        Message::CertRequest { value, view, votes } => {
            e.bytes(value.as_bytes());
            e.u64(view.0);
            e.u32(votes.len() as u32);
            for v in votes {
                e.nested(|e| signed_vote_body(e, v));
            }
        }
        Message::Commit { value, view, cc } => {
            e.bytes(value.as_bytes());
            e.u64(view.0);
            e.nested(|e| commit_cert_body(e, cc));
        }
        Message::NewView { view } => e.u64(view.0),
    }
    e.finish()
}

mod common;

use common::*;
use fastbft::crypto::{keygen, sign, verify, Signature};
use fastbft::encoding::{canonical_encode, Signable};
use fastbft::engine::vote_is_valid;
use fastbft::types::{CastVote, ProgressCertificate, SignerEntry, Value, View, Vote};
use proptest::prelude::*;

#[derive(Clone, Debug, PartialEq)]
enum Tuple {
    Propose(Value, u64),
    CertAck(Value, u64),
    Ack(Value, u64),
    Vote(Vote, u64),
}

impl Tuple {
    fn encode(&self) -> Vec<u8> {
        match self {
            Tuple::Propose(x, v) => canonical_encode(&Signable::Propose { value: x, view: View(*v) }),
            Tuple::CertAck(x, v) => canonical_encode(&Signable::CertAck { value: x, view: View(*v) }),
            Tuple::Ack(x, v) => canonical_encode(&Signable::Ack { value: x, view: View(*v) }),
            Tuple::Vote(x, v) => canonical_encode(&Signable::Vote { vote: x, view: View(*v) }),
        }
    }
}

fn value() -> impl Strategy<Value = Value> {
    proptest::collection::vec(0u8..3, 0..3).prop_map(Value::new)
}

fn sig() -> impl Strategy<Value = Signature> {
    proptest::collection::vec(0u8..2, 0..3).prop_map(Signature)
}

fn cert() -> impl Strategy<Value = ProgressCertificate> {
    prop_oneof![
        Just(ProgressCertificate::Bottom),
        (value(), 0u64..3, proptest::collection::vec((1u32..4, sig()), 0..3)).prop_map(|(value, v, sigs)| {
            ProgressCertificate::Signed(fastbft::types::CertAckSet {
                value,
                view: View(v),
                sigs: sigs.into_iter().map(|(s, sig)| SignerEntry { signer: p(s), sig }).collect(),
            })
        }),
    ]
}

fn vote() -> impl Strategy<Value = Vote> {
    prop_oneof![
        Just(Vote::Nil),
        (value(), 0u64..3, cert(), sig()).prop_map(|(value, v, cert, leader_sig)| {
            Vote::Cast(Box::new(CastVote { value, view: View(v), cert, leader_sig }))
        }),
    ]
}

fn tuple() -> impl Strategy<Value = Tuple> {
    prop_oneof![
        (value(), 0u64..3).prop_map(|(x, v)| Tuple::Propose(x, v)),
        (value(), 0u64..3).prop_map(|(x, v)| Tuple::CertAck(x, v)),
        (value(), 0u64..3).prop_map(|(x, v)| Tuple::Ack(x, v)),
        (vote(), 0u64..3).prop_map(|(x, v)| Tuple::Vote(x, v)),
    ]
}

/// Every signature inside a vote, as mutable references.
fn vote_sigs(v: &mut Vote) -> Vec<&mut Signature> {
    let Vote::Cast(c) = v else { return Vec::new() };
    let mut out = vec![&mut c.leader_sig];
    if let ProgressCertificate::Signed(set) = &mut c.cert {
        out.extend(set.sigs.iter_mut().map(|e| &mut e.sig));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn encoding_is_injective(a in tuple(), b in tuple()) {
        prop_assert_eq!(a == b, a.encode() == b.encode());
    }

    #[test]
    fn signature_bit_flip_fails(msg in proptest::collection::vec(any::<u8>(), 0..64), bit in 0usize..256, id in 1u32..10) {
        let k = keygen(p(id), 11);
        let mut s = sign(&k.signing, &msg);
        prop_assert!(verify(&k.public, &msg, &s));
        let bit = bit % (s.0.len() * 8);
        s.0[bit / 8] ^= 1 << (bit % 8);
        prop_assert!(!verify(&k.public, &msg, &s));
    }

    #[test]
    fn message_bit_flip_fails(msg in proptest::collection::vec(any::<u8>(), 1..64), bit in 0usize..512) {
        let k = keygen(p(1), 11);
        let s = sign(&k.signing, &msg);
        let mut m = msg.clone();
        let bit = bit % (m.len() * 8);
        m[bit / 8] ^= 1 << (bit % 8);
        prop_assert!(!verify(&k.public, &m, &s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn corrupting_any_vote_signature_invalidates(view in 1u64..6, which in 0usize..8, byte in 0usize..32, x in 1u8..=255) {
        let fx = Fixture::vanilla(9, 2);
        let mut vote = if view == 1 { fx.cast1("A") } else { fx.cast("A", view, fx.cert("A", view, &[1, 5, 9])) };
        prop_assert!(vote_is_valid(&fx.cfg, &fx.keys, &vote));
        let mut sigs = vote_sigs(&mut vote);
        let k = which % sigs.len();
        let s = &mut sigs[k];
        let i = byte % s.0.len();
        s.0[i] ^= x;
        prop_assert!(!vote_is_valid(&fx.cfg, &fx.keys, &vote));
    }
}

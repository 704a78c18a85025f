mod common;

use common::*;
use fastbft::engine::{verify_progress_certificate, vote_is_valid, Action, DropReason, Engine, Phase, SelectionOutcome};
use fastbft::quorum::{leader_of, Mode};
use fastbft::types::{DecisionPath, Message, ProgressCertificate, View, Vote};

#[test]
fn init_leader_proposes_to_all() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(2, "A");
    let out = e.start();
    let s = sends(&out);
    assert_eq!(s.len(), 4);
    assert!(s.iter().all(|(_, m)| matches!(m, Message::Propose { view: View(1), cert: ProgressCertificate::Bottom, .. })));
    assert_eq!(e.view(), View(1));
    assert!(e.vote().is_nil());
    assert!(e.decided().is_none());
}

#[test]
fn init_follower_is_silent() {
    let fx = Fixture::vanilla(4, 1);
    for i in [1, 3, 4] {
        let mut e = fx.engine(i, "A");
        assert!(e.start().is_empty());
        assert_eq!(e.phase(), Phase::Follower);
        assert!(e.decided().is_none());
    }
}

#[test]
fn leader_formula() {
    assert_eq!(leader_of(4, View(1)), p(2));
    assert_eq!(leader_of(4, View(4)), p(1));
    assert_eq!(leader_of(7, View(9)), p(3));
}

#[test]
fn view1_propose_adopts_vote_then_acks() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(3, "B");
    let out = e.on_message(p(2), fx.propose("A", 1, ProgressCertificate::Bottom));
    let s = sends(&out);
    assert_eq!(s.len(), 4);
    assert!(s.iter().all(|(_, m)| *m == Message::Ack { value: v("A"), view: View(1) }));
    assert_eq!(e.vote().position(), Some((&v("A"), View(1))));
}

#[test]
fn propose_from_non_leader_or_twice_is_dropped() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(3, "B");
    let forged = Message::Propose {
        value: v("A"),
        view: View(1),
        cert: ProgressCertificate::Bottom,
        leader_sig: fx.leader_sig("A", 1),
    };
    assert_eq!(drops(&e.on_message(p(4), forged)), vec![DropReason::NotLeader]);
    e.on_message(p(2), fx.propose("A", 1, ProgressCertificate::Bottom));
    assert_eq!(drops(&e.on_message(p(2), fx.propose("B", 1, ProgressCertificate::Bottom))), vec![DropReason::DuplicatePropose]);
    assert_eq!(e.vote().position(), Some((&v("A"), View(1))));
}

#[test]
fn propose_with_bad_leader_signature_is_dropped() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(3, "B");
    let msg = Message::Propose {
        value: v("A"),
        view: View(1),
        cert: ProgressCertificate::Bottom,
        leader_sig: fx.leader_sig("B", 1),
    };
    assert_eq!(drops(&e.on_message(p(2), msg)), vec![DropReason::BadSignature]);
    assert!(e.vote().is_nil());
}

#[test]
fn future_view_propose_is_held_back() {
    // Not processed in view 2; replayed once the engine reaches view 3.
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(1, "B");
    e.on_enter_view(View(2));
    let out = e.on_message(p(4), fx.propose("A", 3, fx.cert("A", 3, &[1, 2])));
    assert!(sends(&out).is_empty());
    assert!(e.vote().is_nil());
    let out = e.on_enter_view(View(3));
    assert!(sends(&out).iter().any(|(_, m)| matches!(m, Message::Ack { view: View(3), .. })));
    assert_eq!(e.vote().position(), Some((&v("A"), View(3))));
}

#[test]
fn stale_propose_is_wrong_view() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(1, "B");
    e.on_enter_view(View(2));
    assert_eq!(drops(&e.on_message(p(2), fx.propose("A", 1, ProgressCertificate::Bottom))), vec![DropReason::WrongView]);
}

#[test]
fn propose_with_f_signature_certificate_is_rejected() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(1, "B");
    e.on_enter_view(View(2));
    let out = e.on_message(p(3), fx.propose("A", 2, fx.cert("A", 2, &[4])));
    assert_eq!(drops(&out), vec![DropReason::BadCertificate]);
    assert!(e.vote().is_nil());
    let out = e.on_message(p(3), fx.propose("A", 2, fx.cert("A", 2, &[1, 4])));
    assert!(drops(&out).is_empty());
    assert_eq!(e.vote().position(), Some((&v("A"), View(2))));
}

#[test]
fn bottom_certificate_outside_view1_is_rejected() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(1, "B");
    e.on_enter_view(View(2));
    assert_eq!(drops(&e.on_message(p(3), fx.propose("A", 2, ProgressCertificate::Bottom))), vec![DropReason::BadCertificate]);
}

#[test]
fn acks_from_n_minus_f_senders_decide() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(1, "A");
    let ack = Message::Ack { value: v("A"), view: View(1) };
    assert!(decisions(&e.on_message(p(2), ack.clone())).is_empty());
    assert!(decisions(&e.on_message(p(3), ack.clone())).is_empty());
    assert_eq!(decisions(&e.on_message(p(4), ack)), vec![(v("A"), View(1), DecisionPath::Fast)]);
}

#[test]
fn duplicate_ack_counted_once() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(1, "A");
    let ack = Message::Ack { value: v("A"), view: View(1) };
    e.on_message(p(2), ack.clone());
    e.on_message(p(3), ack.clone());
    let out = e.on_message(p(3), ack);
    assert_eq!(drops(&out), vec![DropReason::Duplicate]);
    assert!(e.decided().is_none());
}

#[test]
fn split_acks_do_not_decide() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(1, "A");
    e.on_message(p(2), Message::Ack { value: v("A"), view: View(1) });
    e.on_message(p(3), Message::Ack { value: v("B"), view: View(1) });
    e.on_message(p(4), Message::Ack { value: v("A"), view: View(1) });
    assert!(e.decided().is_none());
}

#[test]
fn generalized_fast_path_needs_n_minus_t() {
    let fx = Fixture::new(7, 2, 1, Mode::Generalized);
    let mut e = fx.engine(1, "A");
    let ack = Message::Ack { value: v("A"), view: View(1) };
    for i in 2..=6 {
        assert!(decisions(&e.on_message(p(i), ack.clone())).is_empty(), "decided after {} acks", i - 1);
    }
    assert_eq!(decisions(&e.on_message(p(7), ack)), vec![(v("A"), View(1), DecisionPath::Fast)]);
}

#[test]
fn generalized_propose_also_sends_sig() {
    let fx = Fixture::new(7, 2, 1, Mode::Generalized);
    let mut e = fx.engine(1, "B");
    let s = sends(&e.on_message(p(2), fx.propose("A", 1, ProgressCertificate::Bottom)));
    assert_eq!(s.iter().filter(|(_, m)| matches!(m, Message::Ack { .. })).count(), 7);
    assert_eq!(s.iter().filter(|(_, m)| matches!(m, Message::Sig { .. })).count(), 7);
}

#[test]
fn five_sigs_build_commit_certificate() {
    let fx = Fixture::new(7, 2, 1, Mode::Generalized);
    let mut e = fx.engine(1, "A");
    let mut commits = Vec::new();
    for i in 1..=5 {
        let out = e.on_message(p(i), Message::Sig { value: v("A"), view: View(1), ack_sig: fx.ack_sig(i, "A", 1) });
        commits.extend(sends(&out));
    }
    assert_eq!(commits.len(), 7);
    for (_, m) in &commits {
        let Message::Commit { cc, .. } = m else { panic!("expected commit, got {m:?}") };
        assert_eq!(cc.sigs.len(), 5);
    }
    assert_eq!(e.best_commit_certificate().map(|cc| cc.sigs.len()), Some(5));
    // A sixth signature does not trigger a second broadcast.
    let out = e.on_message(p(6), Message::Sig { value: v("A"), view: View(1), ack_sig: fx.ack_sig(6, "A", 1) });
    assert!(sends(&out).is_empty());
}

#[test]
fn forged_sig_is_dropped() {
    let fx = Fixture::new(7, 2, 1, Mode::Generalized);
    let mut e = fx.engine(1, "A");
    let out = e.on_message(p(3), Message::Sig { value: v("A"), view: View(1), ack_sig: fx.ack_sig(4, "A", 1) });
    assert_eq!(drops(&out), vec![DropReason::BadSignature]);
}

#[test]
fn five_commits_decide_slow() {
    let fx = Fixture::new(7, 2, 1, Mode::Generalized);
    let mut e = fx.engine(1, "B");
    let cc = fx.cc("A", 1, &[1, 2, 3, 4, 5]);
    for i in 1..=4 {
        let out = e.on_message(p(i), Message::Commit { value: v("A"), view: View(1), cc: cc.clone() });
        assert!(decisions(&out).is_empty());
    }
    let out = e.on_message(p(5), Message::Commit { value: v("A"), view: View(1), cc });
    assert_eq!(decisions(&out), vec![(v("A"), View(1), DecisionPath::Slow)]);
}

#[test]
fn commit_with_four_signatures_is_ignored() {
    let fx = Fixture::new(7, 2, 1, Mode::Generalized);
    let mut e = fx.engine(1, "B");
    let cc = fx.cc("A", 1, &[1, 2, 3, 4]);
    let out = e.on_message(p(2), Message::Commit { value: v("A"), view: View(1), cc });
    assert_eq!(drops(&out), vec![DropReason::BadCommitCertificate]);
    assert!(e.best_commit_certificate().is_none());
}

#[test]
fn follower_enters_view_and_votes() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(1, "A");
    let s = sends(&e.on_enter_view(View(2)));
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].0, p(3));
    let Message::Vote(sv) = &s[0].1 else { panic!() };
    assert_eq!((sv.sender, sv.view, sv.vote.clone()), (p(1), View(2), Vote::Nil));
    assert!(e.on_enter_view(View(2)).is_empty());
    assert!(e.on_enter_view(View(1)).is_empty());
    assert_eq!(e.view(), View(2));
}

#[test]
fn leader_enters_view_votes_for_itself() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(3, "A");
    let s = sends(&e.on_enter_view(View(2)));
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].0, p(3));
    assert_eq!(e.phase(), Phase::LeaderCollectingVotes);
}

/// Runs a view-2 leader (p3 for n=4) over the given votes, looping its own messages back.
fn leader_view2(fx: &Fixture, input: &str, others: Vec<(u32, Vote)>) -> (Engine, Vec<Action>) {
    let mut e = fx.engine(3, input);
    let start = e.on_enter_view(View(2));
    let mut all = loopback(&mut e, start);
    for (i, vote) in others {
        let out = e.on_message(p(i), Message::Vote(fx.signed_vote(i, vote, 2)));
        all.extend(loopback(&mut e, out));
    }
    (e, all)
}

fn cert_request_value(actions: &[Action]) -> Option<fastbft::types::Value> {
    sends(actions).into_iter().find_map(|(_, m)| match m {
        Message::CertRequest { value, .. } => Some(value),
        _ => None,
    })
}

#[test]
fn all_nil_votes_select_leader_input() {
    let fx = Fixture::vanilla(4, 1);
    let (e, out) = leader_view2(&fx, "L", vec![(1, Vote::Nil), (2, Vote::Nil)]);
    assert_eq!(cert_request_value(&out), Some(v("L")));
    assert_eq!(e.phase(), Phase::LeaderAwaitingCertAcks);
}

#[test]
fn unique_vote_at_highest_view_selected() {
    let fx = Fixture::vanilla(4, 1);
    let (_, out) = leader_view2(&fx, "L", vec![(1, Vote::Nil), (2, fx.cast1("A"))]);
    assert_eq!(cert_request_value(&out), Some(v("A")));
}

#[test]
fn invalid_vote_is_dropped() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = fx.engine(3, "L");
    e.on_enter_view(View(2));
    let mut sv = fx.signed_vote(1, Vote::Nil, 2);
    sv.sig = fx.signed_vote(2, Vote::Nil, 2).sig;
    assert_eq!(drops(&e.on_message(p(1), Message::Vote(sv))), vec![DropReason::InvalidVote]);
    let follower_vote = fx.signed_vote(1, Vote::Nil, 2);
    let mut f = fx.engine(4, "L");
    f.on_enter_view(View(2));
    assert_eq!(drops(&f.on_message(p(1), Message::Vote(follower_vote))), vec![DropReason::NotLeader]);
}

#[test]
fn equivocation_waits_for_votes_excluding_leader() {
    // n=9: leader(1)=p2 signed both A and B in view 1. leader(2)=p3 collects.
    let fx = Fixture::vanilla(9, 2);
    let mut e = fx.engine(3, "L");
    let start = e.on_enter_view(View(2));
    let mut out = loopback(&mut e, start);
    let senders_votes: Vec<(u32, Vote)> = vec![
        (2, fx.cast1("A")),
        (1, fx.cast1("B")),
        (4, fx.cast1("A")),
        (5, fx.cast1("A")),
        (6, fx.cast1("A")),
        (7, Vote::Nil),
    ];
    for (i, vote) in senders_votes {
        let o = e.on_message(p(i), Message::Vote(fx.signed_vote(i, vote, 2)));
        out.extend(loopback(&mut e, o));
    }
    // 7 votes including p2's: selection must wait.
    assert_eq!(cert_request_value(&out), None);
    assert!(matches!(e.selections().last(), Some((_, SelectionOutcome::NeedVoteExcluding(q))) if *q == p(2)));
    let o = e.on_message(p(8), Message::Vote(fx.signed_vote(8, fx.cast1("A"), 2)));
    let out = loopback(&mut e, o);
    assert_eq!(cert_request_value(&out), Some(v("A")));
}

#[test]
fn honest_cert_request_is_acknowledged() {
    let fx = Fixture::vanilla(4, 1);
    let votes = vec![
        fx.signed_vote(1, Vote::Nil, 2),
        fx.signed_vote(2, fx.cast1("A"), 2),
        fx.signed_vote(3, Vote::Nil, 2),
    ];
    let mut e = fx.engine(4, "X");
    e.on_enter_view(View(2));
    let out = e.on_message(p(3), Message::CertRequest { value: v("A"), view: View(2), votes: votes.clone() });
    let s = sends(&out);
    assert_eq!(s.len(), 1);
    assert!(matches!(&s[0], (to, Message::CertAck { value, .. }) if *to == p(3) && *value == v("A")));
    let again = e.on_message(p(3), Message::CertRequest { value: v("A"), view: View(2), votes });
    assert_eq!(drops(&again), vec![DropReason::Duplicate]);
}

#[test]
fn cert_request_for_wrong_value_is_refused() {
    let fx = Fixture::vanilla(4, 1);
    let votes = vec![
        fx.signed_vote(1, Vote::Nil, 2),
        fx.signed_vote(2, fx.cast1("A"), 2),
        fx.signed_vote(3, Vote::Nil, 2),
    ];
    let mut e = fx.engine(4, "X");
    e.on_enter_view(View(2));
    let out = e.on_message(p(3), Message::CertRequest { value: v("B"), view: View(2), votes });
    assert!(sends(&out).is_empty());
    assert_eq!(drops(&out), vec![DropReason::SelectionMismatch]);
}

#[test]
fn cert_request_with_bad_vote_signature_is_refused() {
    let fx = Fixture::vanilla(4, 1);
    let mut bad = fx.signed_vote(1, Vote::Nil, 2);
    bad.sig = fx.signed_vote(4, Vote::Nil, 2).sig;
    let votes = vec![bad, fx.signed_vote(2, Vote::Nil, 2), fx.signed_vote(3, Vote::Nil, 2)];
    let mut e = fx.engine(4, "X");
    e.on_enter_view(View(2));
    let out = e.on_message(p(3), Message::CertRequest { value: v("L"), view: View(2), votes });
    assert_eq!(drops(&out), vec![DropReason::InvalidEnclosedVote]);
}

#[test]
fn too_few_enclosed_votes_are_refused() {
    let fx = Fixture::vanilla(4, 1);
    let votes = vec![fx.signed_vote(1, Vote::Nil, 2), fx.signed_vote(2, Vote::Nil, 2)];
    let mut e = fx.engine(4, "X");
    e.on_enter_view(View(2));
    let out = e.on_message(p(3), Message::CertRequest { value: v("L"), view: View(2), votes });
    assert_eq!(drops(&out), vec![DropReason::InvalidEnclosedVote]);
}

fn awaiting_leader(fx: &Fixture) -> Engine {
    let mut e = fx.engine(3, "L");
    let o = e.on_enter_view(View(2));
    loopback(&mut e, o);
    for i in [1, 2] {
        let o = e.on_message(p(i), Message::Vote(fx.signed_vote(i, Vote::Nil, 2)));
        // Drop the leader's own CertAck so the test controls which acks arrive.
        for a in o {
            if let Action::Send { to, msg: Message::Vote(sv) } = a {
                e.on_message(to, Message::Vote(sv));
            }
        }
    }
    assert_eq!(e.phase(), Phase::LeaderAwaitingCertAcks);
    e
}

fn cert_ack(fx: &Fixture, signer: u32, value: &str) -> Message {
    let ProgressCertificate::Signed(set) = fx.cert(value, 2, &[signer]) else { unreachable!() };
    Message::CertAck { value: v(value), view: View(2), sig: set.sigs[0].sig.clone() }
}

#[test]
fn f_plus_one_cert_acks_trigger_propose() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = awaiting_leader(&fx);
    assert!(sends(&e.on_message(p(1), cert_ack(&fx, 1, "L"))).is_empty());
    let out = e.on_message(p(2), cert_ack(&fx, 2, "L"));
    let s = sends(&out);
    assert_eq!(s.len(), 4);
    let Message::Propose { cert, .. } = &s[0].1 else { panic!() };
    assert!(verify_progress_certificate(&fx.cfg, &fx.keys, &v("L"), View(2), cert));
    assert_eq!(cert.signature_count(), 2);
    assert_eq!(e.phase(), Phase::LeaderProposed);
}

#[test]
fn duplicate_cert_ack_keeps_waiting() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = awaiting_leader(&fx);
    e.on_message(p(1), cert_ack(&fx, 1, "L"));
    let out = e.on_message(p(1), cert_ack(&fx, 1, "L"));
    assert_eq!(drops(&out), vec![DropReason::Duplicate]);
    assert_eq!(e.phase(), Phase::LeaderAwaitingCertAcks);
}

#[test]
fn cert_ack_for_wrong_value_is_ignored() {
    let fx = Fixture::vanilla(4, 1);
    let mut e = awaiting_leader(&fx);
    assert_eq!(drops(&e.on_message(p(1), cert_ack(&fx, 1, "Z"))), vec![DropReason::Unexpected]);
    assert_eq!(drops(&e.on_message(p(2), cert_ack(&fx, 4, "L"))), vec![DropReason::BadSignature]);
}

#[test]
fn vote_validity_examples() {
    let fx = Fixture::vanilla(4, 1);
    assert!(vote_is_valid(&fx.cfg, &fx.keys, &Vote::Nil));
    assert!(vote_is_valid(&fx.cfg, &fx.keys, &fx.cast1("A")));
    assert!(!vote_is_valid(&fx.cfg, &fx.keys, &fx.cast("A", 2, fx.cert("A", 2, &[1]))));
    assert!(vote_is_valid(&fx.cfg, &fx.keys, &fx.cast("A", 2, fx.cert("A", 2, &[1, 4]))));
    let fx9 = Fixture::vanilla(9, 2);
    assert!(!vote_is_valid(&fx9.cfg, &fx9.keys, &fx9.cast("A", 2, fx9.cert("A", 2, &[1, 4]))));
    assert!(vote_is_valid(&fx9.cfg, &fx9.keys, &fx9.cast("A", 2, fx9.cert("A", 2, &[1, 4, 9]))));
}

#[test]
fn progress_certificate_examples() {
    let fx = Fixture::vanilla(9, 2);
    let (cfg, keys) = (&fx.cfg, &*fx.keys);
    assert!(verify_progress_certificate(cfg, keys, &v("A"), View(1), &ProgressCertificate::Bottom));
    assert!(!verify_progress_certificate(cfg, keys, &v("A"), View(2), &ProgressCertificate::Bottom));
    assert!(!verify_progress_certificate(cfg, keys, &v("A"), View(2), &fx.cert("A", 2, &[1, 2])));
    assert!(verify_progress_certificate(cfg, keys, &v("A"), View(2), &fx.cert("A", 2, &[1, 2, 3])));
    assert!(!verify_progress_certificate(cfg, keys, &v("B"), View(2), &fx.cert("A", 2, &[1, 2, 3])));
    assert!(!verify_progress_certificate(cfg, keys, &v("A"), View(3), &fx.cert("A", 2, &[1, 2, 3])));
    assert!(!verify_progress_certificate(cfg, keys, &v("A"), View(2), &fx.cert("A", 2, &[1, 1, 2])));
}

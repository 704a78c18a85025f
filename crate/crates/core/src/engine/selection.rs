//! The view-change selection algorithm.
//!
//! Pure over `(cfg, votes, fallback, anchor)`. The leader passes its own input as
//! `fallback`; a CertRequest verifier passes the value the leader claims, so every outcome
//! that leaves the choice free accepts whatever the leader picked.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::quorum::{Mode, QuorumConfig};
use crate::types::{ProcessId, SignedVote, Value, View};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum SelectionBasis {
    AllNil,
    UniqueAtHighestView,
    EquivocationQuorum,
    CommitCertificate,
    EquivocationFreeChoice,
}

impl SelectionBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionBasis::AllNil => "all_nil",
            SelectionBasis::UniqueAtHighestView => "unique_at_highest_view",
            SelectionBasis::EquivocationQuorum => "equivocation_quorum",
            SelectionBasis::CommitCertificate => "commit_certificate",
            SelectionBasis::EquivocationFreeChoice => "equivocation_free_choice",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SelectionOutcome {
    Selected { value: Value, basis: SelectionBasis },
    /// `leader(w)` equivocated and fewer than `n-f` votes from other senders are held.
    NeedVoteExcluding(ProcessId),
    /// A vote above the anchored highest view arrived; start over.
    RestartRequired,
}

impl SelectionOutcome {
    pub fn selected(&self) -> Option<&Value> {
        match self {
            SelectionOutcome::Selected { value, .. } => Some(value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("selection needs {need} votes, got {have}")]
    PreconditionViolation { have: usize, need: usize },
}

/// Runs selection over `votes`, which must be valid and from distinct senders.
///
/// `anchor` is the highest view `w` seen by an earlier run that returned
/// [`SelectionOutcome::NeedVoteExcluding`]; if the votes now reach above it the outcome is
/// [`SelectionOutcome::RestartRequired`].
pub fn run_selection(
    cfg: &QuorumConfig,
    votes: &[SignedVote],
    fallback: &Value,
    anchor: Option<View>,
) -> Result<SelectionOutcome, SelectionError> {
    let need = cfg.vote_quorum();
    if votes.len() < need {
        return Err(SelectionError::PreconditionViolation { have: votes.len(), need });
    }
    let Some(w) = votes.iter().filter_map(|v| v.vote.position()).map(|(_, u)| u).max() else {
        return Ok(SelectionOutcome::Selected { value: fallback.clone(), basis: SelectionBasis::AllNil });
    };
    if anchor.is_some_and(|a| w > a) {
        return Ok(SelectionOutcome::RestartRequired);
    }
    let at_w: BTreeSet<&Value> =
        votes.iter().filter_map(|v| v.vote.position()).filter(|(_, u)| *u == w).map(|(x, _)| x).collect();
    if at_w.len() == 1 {
        let value = (*at_w.first().expect("non-empty")).clone();
        return Ok(SelectionOutcome::Selected { value, basis: SelectionBasis::UniqueAtHighestView });
    }

    let q = cfg.leader(w);
    let rest: Vec<&SignedVote> = votes.iter().filter(|v| v.sender != q).collect();
    if rest.len() < need {
        return Ok(SelectionOutcome::NeedVoteExcluding(q));
    }

    if cfg.mode() == Mode::Generalized {
        let certified = rest
            .iter()
            .filter_map(|v| v.commit_cert.as_ref())
            .filter(|cc| cc.view == w)
            .map(|cc| &cc.value)
            .min();
        if let Some(value) = certified {
            return Ok(SelectionOutcome::Selected { value: value.clone(), basis: SelectionBasis::CommitCertificate });
        }
    }

    let mut counts: BTreeMap<&Value, usize> = BTreeMap::new();
    for (x, _) in rest.iter().filter_map(|v| v.vote.position()).filter(|(_, u)| *u == w) {
        *counts.entry(x).or_default() += 1;
    }
    // BTreeMap iterates in byte order, so the first hit is the smallest qualifying value.
    let threshold = cfg.equivocation_vote_threshold();
    if let Some((x, _)) = counts.iter().find(|(_, c)| **c >= threshold) {
        return Ok(SelectionOutcome::Selected { value: (*x).clone(), basis: SelectionBasis::EquivocationQuorum });
    }
    Ok(SelectionOutcome::Selected { value: fallback.clone(), basis: SelectionBasis::EquivocationFreeChoice })
}

//! Threshold arithmetic and quorum-intersection checks.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ProcessId, View};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `t = f`, `n ≥ 5f-1`, fast path only.
    Vanilla,
    /// `n ≥ 3f+2t-1`, fast path with `n-t` acks plus a commit-certificate slow path.
    Generalized,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Vanilla => "vanilla",
            Mode::Generalized => "generalized",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "vanilla" => Some(Mode::Vanilla),
            "generalized" => Some(Mode::Generalized),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("resilience violation: {0}")]
    ResilienceViolation(String),
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
}

/// A validated `(n, f, t, mode)` tuple.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuorumConfig {
    n: u32,
    f: u32,
    t: u32,
    mode: Mode,
}

impl QuorumConfig {
    pub fn new(n: u32, f: u32, t: u32, mode: Mode) -> Result<Self, ConfigError> {
        if f < 1 {
            return Err(ConfigError::ResilienceViolation(format!("f = {f}, need f ≥ 1")));
        }
        if t < 1 || t > f {
            return Err(ConfigError::ResilienceViolation(format!("t = {t}, need 1 ≤ t ≤ f = {f}")));
        }
        if mode == Mode::Vanilla && t != f {
            return Err(ConfigError::ModeMismatch(format!("vanilla mode requires t = f, got t = {t}, f = {f}")));
        }
        let min = minimum_n(f, t);
        if n < min {
            let rule = match mode {
                Mode::Vanilla => "5f-1",
                Mode::Generalized => "3f+2t-1",
            };
            return Err(ConfigError::ResilienceViolation(format!("n = {n} < {rule} = {min}")));
        }
        Ok(QuorumConfig { n, f, t, mode })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn f(&self) -> u32 {
        self.f
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_generalized(&self) -> bool {
        self.mode == Mode::Generalized
    }

    pub fn processes(&self) -> impl Iterator<Item = ProcessId> {
        ProcessId::all(self.n)
    }

    /// Votes a new leader waits for: `n-f`.
    pub fn vote_quorum(&self) -> usize {
        (self.n - self.f) as usize
    }

    /// Matching acks needed to decide: `n-f` in vanilla mode, `n-t` in generalized mode.
    pub fn fast_decide_quorum(&self) -> usize {
        match self.mode {
            Mode::Vanilla => (self.n - self.f) as usize,
            Mode::Generalized => (self.n - self.t) as usize,
        }
    }

    /// CertAck signatures in a progress certificate: `f+1`.
    pub fn cert_ack_threshold(&self) -> usize {
        (self.f + 1) as usize
    }

    /// Minimum number of processes a CertRequest must reach: `2f+1`.
    pub fn cert_fanout(&self) -> usize {
        (2 * self.f + 1) as usize
    }

    /// Ack signatures in a commit certificate: `⌈(n+f+1)/2⌉`. Generalized mode only.
    pub fn commit_cert_threshold(&self) -> Result<usize, ConfigError> {
        match self.mode {
            Mode::Vanilla => Err(ConfigError::ModeMismatch("commit certificates exist only in generalized mode".into())),
            Mode::Generalized => Ok(commit_threshold(self.n, self.f)),
        }
    }

    /// Votes for one value among non-equivocator votes that make it the selection:
    /// `2f` in vanilla mode, `f+t` in generalized mode.
    pub fn equivocation_vote_threshold(&self) -> usize {
        match self.mode {
            Mode::Vanilla => (2 * self.f) as usize,
            Mode::Generalized => (self.f + self.t) as usize,
        }
    }

    /// `leader(v) = p_((v mod n) + 1)`.
    pub fn leader(&self, view: View) -> ProcessId {
        leader_of(self.n, view)
    }
}

/// Smallest `n` accepted for `(f, t)`.
pub fn minimum_n(f: u32, t: u32) -> u32 {
    (3 * f + 2 * t).saturating_sub(1)
}

pub fn leader_of(n: u32, view: View) -> ProcessId {
    ProcessId((view.0 % n as u64) as u32 + 1)
}

fn commit_threshold(n: u32, f: u32) -> usize {
    (n + f + 1).div_ceil(2) as usize
}

/// Verdicts for the three intersection properties.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct QiVerdicts {
    /// Any two `(n-f)`-sets share a correct process.
    pub qi1: bool,
    /// An `(n-f)`-set and an `(n-f)`-set holding at most `f-1` Byzantine processes share `2f`
    /// correct processes.
    pub qi2: bool,
    /// An `(n-f)`-set and a `2f`-set holding at most `f-1` Byzantine processes share a
    /// correct process.
    pub qi3: bool,
}

/// Verdicts for the counting facts the generalized slow path relies on.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct GeneralizedVerdicts {
    /// `|Q_{n-f} ∩ Q_{n-t}| ≥ (f-1) + (f+t)`.
    pub fast_vote: bool,
    /// Two commit-certificate quorums share a correct process.
    pub commit_commit: bool,
    /// A commit-certificate quorum and an `(n-t)`-set share a correct process.
    pub commit_fast: bool,
    /// A commit-certificate quorum and an `(n-f)`-set share a correct process.
    pub commit_vote: bool,
}

/// A placement that violates a property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub property: &'static str,
    pub q1: Vec<ProcessId>,
    pub q2: Vec<ProcessId>,
    pub byzantine: Vec<ProcessId>,
    /// Correct processes in `q1 ∩ q2`.
    pub correct_in_intersection: u32,
}

#[derive(Clone, Debug)]
pub struct IntersectionReport {
    pub n: u32,
    pub f: u32,
    pub t: u32,
    pub closed_form: QiVerdicts,
    /// Present when `n ≤ ENUMERATION_LIMIT`.
    pub enumerated: Option<QiVerdicts>,
    pub generalized_closed_form: GeneralizedVerdicts,
    pub generalized_enumerated: Option<GeneralizedVerdicts>,
    /// One witness per property that fails under enumeration.
    pub counterexamples: Vec<Counterexample>,
}

impl IntersectionReport {
    pub fn qi1(&self) -> bool {
        self.closed_form.qi1
    }

    pub fn qi2(&self) -> bool {
        self.closed_form.qi2
    }

    pub fn qi3(&self) -> bool {
        self.closed_form.qi3
    }

    /// Closed-form and enumerated verdicts agree (vacuously true above the enumeration limit).
    pub fn consistent(&self) -> bool {
        self.enumerated.is_none_or(|e| e == self.closed_form)
            && self.generalized_enumerated.is_none_or(|e| e == self.generalized_closed_form)
    }

    pub fn counterexample(&self, property: &str) -> Option<&Counterexample> {
        self.counterexamples.iter().find(|c| c.property == property)
    }
}

pub const ENUMERATION_LIMIT: u32 = 12;

pub fn check_intersection_properties(cfg: &QuorumConfig) -> IntersectionReport {
    intersection_report(cfg.n, cfg.f, cfg.t)
}

/// Intersection verdicts for raw parameters, valid configuration or not.
#[allow(clippy::int_plus_one)]
pub fn intersection_report(n: u32, f: u32, t: u32) -> IntersectionReport {
    let (ni, fi, ti) = (n as i64, f as i64, t as i64);
    let closed_form = QiVerdicts {
        qi1: 2 * (ni - fi) - ni >= fi + 1,
        qi2: 2 * (ni - fi) - ni >= (fi - 1) + 2 * fi,
        qi3: 2 * fi <= ni && (ni - fi) + 2 * fi - ni >= (fi - 1) + 1,
    };
    let c = commit_threshold(n, f) as i64;
    let generalized_closed_form = GeneralizedVerdicts {
        fast_vote: (ni - fi) + (ni - ti) - ni >= (fi - 1) + (fi + ti),
        commit_commit: 2 * c - ni >= fi + 1,
        commit_fast: c + (ni - ti) - ni >= fi + 1,
        commit_vote: c + (ni - fi) - ni >= fi + 1,
    };
    let mut counterexamples = Vec::new();
    let (enumerated, generalized_enumerated) = if n <= ENUMERATION_LIMIT && f <= n {
        let e = Enumerator::new(n);
        let nf = n - f;
        let qi1 = e.check("QI1", nf, nf, f, f, 1, &mut counterexamples);
        let qi2 = f >= 1 && e.check("QI2", nf, nf, f, f - 1, 2 * f, &mut counterexamples);
        let qi3 = 2 * f <= n && f >= 1 && e.check("QI3", nf, 2 * f, f, f - 1, 1, &mut counterexamples);
        let c = commit_threshold(n, f) as u32;
        let nt = n.saturating_sub(t);
        let fast_vote = e.check("GEN_FAST_VOTE", nf, nt, 0, 0, (2 * f + t).saturating_sub(1), &mut counterexamples);
        let commit_commit = c <= n && e.check("GEN_COMMIT_COMMIT", c, c, f, f, 1, &mut counterexamples);
        let commit_fast = c <= n && e.check("GEN_COMMIT_FAST", c, nt, f, f, 1, &mut counterexamples);
        let commit_vote = c <= n && e.check("GEN_COMMIT_VOTE", c, nf, f, f, 1, &mut counterexamples);
        (
            Some(QiVerdicts { qi1, qi2, qi3 }),
            Some(GeneralizedVerdicts { fast_vote, commit_commit, commit_fast, commit_vote }),
        )
    } else {
        (None, None)
    };
    IntersectionReport {
        n,
        f,
        t,
        closed_form,
        enumerated,
        generalized_closed_form,
        generalized_enumerated,
        counterexamples,
    }
}

/// Exhaustive search over subsets of `{1..n}` encoded as bitmasks.
struct Enumerator {
    n: u32,
}

impl Enumerator {
    fn new(n: u32) -> Self {
        assert!(n <= 16);
        Enumerator { n }
    }

    fn subsets(&self, k: u32) -> Vec<u32> {
        (0u32..(1 << self.n)).filter(|m| m.count_ones() == k).collect()
    }

    fn subsets_up_to(&self, k: u32) -> Vec<u32> {
        (0u32..(1 << self.n)).filter(|m| m.count_ones() <= k).collect()
    }

    /// For every `q1` of size `s1`, `q2` of size `s2` and Byzantine set `b` with `|b| ≤ max_byz`
    /// and `|b ∩ q2| ≤ max_byz_in_q2`: at least `need` correct processes lie in `q1 ∩ q2`.
    #[allow(clippy::too_many_arguments)]
    fn check(
        &self,
        property: &'static str,
        s1: u32,
        s2: u32,
        max_byz: u32,
        max_byz_in_q2: u32,
        need: u32,
        out: &mut Vec<Counterexample>,
    ) -> bool {
        if s1 > self.n || s2 > self.n {
            return false;
        }
        let q1s = self.subsets(s1);
        let q2s = self.subsets(s2);
        let byz = self.subsets_up_to(max_byz);
        for &q1 in &q1s {
            for &q2 in &q2s {
                let inter = q1 & q2;
                for &b in &byz {
                    if (b & q2).count_ones() > max_byz_in_q2 {
                        continue;
                    }
                    let correct = (inter & !b).count_ones();
                    if correct < need {
                        out.push(Counterexample {
                            property,
                            q1: mask_ids(q1),
                            q2: mask_ids(q2),
                            byzantine: mask_ids(b),
                            correct_in_intersection: correct,
                        });
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn mask_ids(mask: u32) -> Vec<ProcessId> {
    (0..32).filter(|i| mask & (1 << i) != 0).map(|i| ProcessId(i + 1)).collect()
}

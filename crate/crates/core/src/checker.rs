//! Trace analysis.
//!
//! Every check is a pure function of a [`Trace`]; re-checking a stored trace gives the same
//! report. Only correct processes' events count, except in the network audits, which look
//! at every message between two correct processes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use crate::quorum::Mode;
use crate::time::format_time;
use crate::trace::{EndStatus, Event, LatencyModel, Trace};
use crate::types::{DecisionPath, MessageKind, ProcessId, Value, View};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Validity {
    /// If every process is correct and all inputs are equal, that input is decided.
    Weak,
    /// If every process is correct, the decided value is someone's input.
    Extended,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    Agreement,
    Validity(Validity),
    Termination,
    TwoStep,
    /// Every correct process decides at exactly this time (ticks).
    DecisionAt(u64),
    CertificateBound,
    DeliveryBound,
    Reliability,
    MonotoneViews,
    AckUnique,
}

impl Check {
    /// Run when a scenario names no checks.
    pub const DEFAULT: [Check; 8] = [
        Check::Agreement,
        Check::Validity(Validity::Extended),
        Check::Termination,
        Check::CertificateBound,
        Check::DeliveryBound,
        Check::Reliability,
        Check::MonotoneViews,
        Check::AckUnique,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Agreement => "agreement",
            Check::Validity(Validity::Extended) => "validity",
            Check::Validity(Validity::Weak) => "weak_validity",
            Check::Termination => "termination",
            Check::TwoStep => "two_step",
            Check::DecisionAt(_) => "decision_at",
            Check::CertificateBound => "certificate_bound",
            Check::DeliveryBound => "delivery_bound",
            Check::Reliability => "reliability",
            Check::MonotoneViews => "monotone_views",
            Check::AckUnique => "ack_unique",
        }
    }

    /// Parses a check name. `decision_at` needs a time and is not accepted here.
    pub fn parse(s: &str) -> Option<Check> {
        Some(match s {
            "agreement" => Check::Agreement,
            "validity" => Check::Validity(Validity::Extended),
            "weak_validity" => Check::Validity(Validity::Weak),
            "termination" => Check::Termination,
            "two_step" => Check::TwoStep,
            "certificate_bound" => Check::CertificateBound,
            "delivery_bound" => Check::DeliveryBound,
            "reliability" => Check::Reliability,
            "monotone_views" => Check::MonotoneViews,
            "ack_unique" => Check::AckUnique,
            _ => return None,
        })
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub pass: bool,
    /// Present iff the check failed.
    pub witness: Option<String>,
}

impl Verdict {
    pub fn pass() -> Self {
        Verdict { pass: true, witness: None }
    }

    pub fn fail(witness: impl Into<String>) -> Self {
        Verdict { pass: false, witness: Some(witness.into()) }
    }
}

fn first_failure(mut failures: impl Iterator<Item = String>) -> Verdict {
    failures.next().map_or_else(Verdict::pass, Verdict::fail)
}

fn t(ticks: u64, trace: &Trace) -> String {
    format_time(ticks, trace.header.delta)
}

pub fn check_agreement(trace: &Trace) -> Verdict {
    let mut first: Option<(ProcessId, u64, &Value)> = None;
    for (r, v, _, _) in trace.correct_decisions() {
        match first {
            None => first = Some((r.actor, r.time, v)),
            Some((p, at, x)) if x != v => {
                return Verdict::fail(format!(
                    "{p} decided 0x{} at {}, {} decided 0x{} at {}",
                    x.to_hex(),
                    t(at, trace),
                    r.actor,
                    v.to_hex(),
                    t(r.time, trace)
                ))
            }
            _ => {}
        }
    }
    Verdict::pass()
}

pub fn check_validity(trace: &Trace, flavor: Validity) -> Verdict {
    let h = &trace.header;
    if !h.byzantine.is_empty() {
        return Verdict::pass();
    }
    let inputs: BTreeSet<&Value> = h.inputs.iter().collect();
    if flavor == Validity::Weak && inputs.len() != 1 {
        return Verdict::pass();
    }
    first_failure(trace.correct_decisions().filter(|(_, v, _, _)| !inputs.contains(v)).map(|(r, v, _, _)| {
        format!("{} decided 0x{} at {}, which is no process's input", r.actor, v.to_hex(), t(r.time, trace))
    }))
}

/// Every correct process decided before the trace ended.
pub fn check_termination(trace: &Trace) -> Verdict {
    let decided: BTreeSet<ProcessId> = trace.correct_decisions().map(|(r, ..)| r.actor).collect();
    let missing: Vec<String> = trace.header.correct().filter(|p| !decided.contains(p)).map(|p| p.to_string()).collect();
    if missing.is_empty() {
        Verdict::pass()
    } else {
        let end = trace.end.map_or("no end marker".to_string(), |e| format!("ended at {}", t(e.time, trace)));
        Verdict::fail(format!("undecided: {} ({end})", missing.join(",")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatencyRow {
    pub process: ProcessId,
    pub time: u64,
    pub view: View,
    pub path: DecisionPath,
}

/// First decision of each correct process.
pub fn latency_table(trace: &Trace) -> Vec<LatencyRow> {
    let mut rows: BTreeMap<ProcessId, LatencyRow> = BTreeMap::new();
    for (r, _, view, path) in trace.correct_decisions() {
        rows.entry(r.actor).or_insert(LatencyRow { process: r.actor, time: r.time, view, path });
    }
    rows.into_values().collect()
}

/// Every correct process decides, and no later than 2Δ.
pub fn check_two_step(trace: &Trace) -> Verdict {
    let rows = latency_table(trace);
    let limit = 2 * trace.header.delta;
    let done = check_termination(trace);
    if !done.pass {
        return done;
    }
    first_failure(
        rows.iter()
            .filter(|r| r.time > limit)
            .map(|r| format!("{} decided at {} in view {}", r.process, t(r.time, trace), r.view)),
    )
}

pub fn check_decision_at(trace: &Trace, at: u64) -> Verdict {
    let done = check_termination(trace);
    if !done.pass {
        return done;
    }
    first_failure(latency_table(trace).iter().filter(|r| r.time != at).map(|r| {
        format!("{} decided at {}, expected {}", r.process, t(r.time, trace), t(at, trace))
    }))
}

/// Largest total signature count a message of `kind` may carry.
pub fn signature_bound(kind: MessageKind, n: usize, f: usize) -> usize {
    let vote = 2 + (f + 1) + n;
    match kind {
        MessageKind::Propose => 1 + (f + 1),
        MessageKind::Ack | MessageKind::NewView => 0,
        MessageKind::Sig | MessageKind::CertAck => 1,
        MessageKind::Vote => vote,
        MessageKind::CertRequest => n * vote,
        MessageKind::Commit => n,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertificateStats {
    pub max_progress: usize,
    pub max_commit: usize,
    /// Highest view of any message carrying a progress certificate.
    pub max_certified_view: View,
    pub certificates_seen: usize,
}

pub fn certificate_stats(trace: &Trace) -> CertificateStats {
    let mut s = CertificateStats { max_progress: 0, max_commit: 0, max_certified_view: View(0), certificates_seen: 0 };
    for r in trace.records.iter().filter(|r| !trace.header.is_byzantine(r.actor)) {
        if let Event::Send { pc, cc, view, .. } = &r.event {
            if let Some(m) = pc.iter().max() {
                s.max_progress = s.max_progress.max(*m);
                s.max_certified_view = s.max_certified_view.max(*view);
            }
            s.certificates_seen += pc.len();
            if let Some(m) = cc.iter().max() {
                s.max_commit = s.max_commit.max(*m);
            }
        }
    }
    s
}

/// Every progress certificate sent by a correct process has exactly f+1 signatures, and
/// no message exceeds its kind's signature bound.
pub fn check_certificate_bound(trace: &Trace) -> Verdict {
    let h = &trace.header;
    let (n, f) = (h.n as usize, h.f as usize);
    first_failure(trace.records.iter().filter(|r| !h.is_byzantine(r.actor)).filter_map(|r| match &r.event {
        Event::Send { kind, view, pc, sigs, id, .. } => {
            if let Some(bad) = pc.iter().find(|s| **s != f + 1) {
                Some(format!(
                    "{} sent {kind} id={id} in view {view} with a {bad}-signature progress certificate (expected {})",
                    r.actor,
                    f + 1
                ))
            } else if *sigs > signature_bound(*kind, n, f) {
                Some(format!(
                    "{} sent {kind} id={id} in view {view} with {sigs} signatures (bound {})",
                    r.actor,
                    signature_bound(*kind, n, f)
                ))
            } else {
                None
            }
        }
        _ => None,
    }))
}

/// Messages between distinct correct processes sent at or after GST arrive within Δ.
pub fn audit_delivery_bound(trace: &Trace) -> Verdict {
    let h = &trace.header;
    first_failure(trace.records.iter().filter_map(|r| match &r.event {
        Event::Send { id, to, at, .. }
            if r.actor != *to
                && !h.is_byzantine(r.actor)
                && !h.is_byzantine(*to)
                && r.time >= h.gst
                && (*at <= r.time || *at - r.time > h.delta) =>
        {
            Some(format!("id={id} {} → {to} sent at {} arrives at {}", r.actor, t(r.time, trace), t(*at, trace)))
        }
        _ => None,
    }))
}

/// Between correct processes nothing is lost, duplicated or created: every message due by
/// the end of the trace is delivered once, at its announced time, unchanged.
pub fn audit_reliability(trace: &Trace) -> Verdict {
    let h = &trace.header;
    let end = trace.end.map_or(h.horizon, |e| e.time);
    let mut sends: HashMap<u64, (ProcessId, ProcessId, u64, &str)> = HashMap::new();
    for r in &trace.records {
        if let Event::Send { id, to, at, digest, .. } = &r.event {
            if !h.is_byzantine(r.actor) && !h.is_byzantine(*to) {
                sends.insert(*id, (r.actor, *to, *at, digest.as_str()));
            }
        }
    }
    let mut seen = BTreeSet::new();
    for r in &trace.records {
        if let Event::Deliver { id, from, digest, .. } = &r.event {
            if h.is_byzantine(*from) || h.is_byzantine(r.actor) {
                continue;
            }
            match sends.get(id) {
                None => return Verdict::fail(format!("id={id} delivered to {} was never sent", r.actor)),
                Some(&(src, dst, at, d)) => {
                    if src != *from || dst != r.actor || at != r.time || d != digest {
                        return Verdict::fail(format!("id={id} delivered to {} does not match its send", r.actor));
                    }
                }
            }
            if !seen.insert(*id) {
                return Verdict::fail(format!("id={id} delivered twice"));
            }
        }
    }
    let mut lost: Vec<_> = sends.iter().filter(|(id, s)| s.2 <= end && !seen.contains(*id)).map(|(id, _)| *id).collect();
    lost.sort_unstable();
    match lost.first() {
        Some(id) => Verdict::fail(format!("id={id} was due by {} but never delivered", t(end, trace))),
        None => Verdict::pass(),
    }
}

pub fn check_monotone_views(trace: &Trace) -> Verdict {
    let mut last: HashMap<ProcessId, View> = HashMap::new();
    first_failure(trace.records.iter().filter(|r| !trace.header.is_byzantine(r.actor)).filter_map(|r| match r.event {
        Event::EnterView { view } => {
            let prev = last.insert(r.actor, view).unwrap_or(View::FIRST);
            (view <= prev).then(|| format!("{} entered view {view} after view {prev} at {}", r.actor, t(r.time, trace)))
        }
        _ => None,
    }))
}

/// A correct process acknowledges at most one value per view, once per recipient.
pub fn check_ack_unique(trace: &Trace) -> Verdict {
    let mut values: HashMap<(ProcessId, View), &Value> = HashMap::new();
    let mut sent: BTreeSet<(ProcessId, View, ProcessId)> = BTreeSet::new();
    for r in trace.records.iter().filter(|r| !trace.header.is_byzantine(r.actor)) {
        if let Event::Send { kind: MessageKind::Ack, value: Some(v), view, to, .. } = &r.event {
            if let Some(prev) = values.insert((r.actor, *view), v) {
                if prev != v {
                    return Verdict::fail(format!(
                        "{} acknowledged 0x{} and 0x{} in view {view}",
                        r.actor,
                        prev.to_hex(),
                        v.to_hex()
                    ));
                }
            }
            if !sent.insert((r.actor, *view, *to)) {
                return Verdict::fail(format!("{} sent two acks to {to} in view {view}", r.actor));
            }
        }
    }
    Verdict::pass()
}

pub fn run_check(trace: &Trace, check: Check) -> Verdict {
    match check {
        Check::Agreement => check_agreement(trace),
        Check::Validity(v) => check_validity(trace, v),
        Check::Termination => check_termination(trace),
        Check::TwoStep => check_two_step(trace),
        Check::DecisionAt(at) => check_decision_at(trace, at),
        Check::CertificateBound => check_certificate_bound(trace),
        Check::DeliveryBound => audit_delivery_bound(trace),
        Check::Reliability => audit_reliability(trace),
        Check::MonotoneViews => check_monotone_views(trace),
        Check::AckUnique => check_ack_unique(trace),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub results: Vec<(Check, Verdict)>,
    pub latencies: Vec<LatencyRow>,
    pub certificates: CertificateStats,
    pub max_view: View,
    pub status: Option<EndStatus>,
    delta: u64,
    hops: bool,
    mode: Mode,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|(_, v)| v.pass)
    }

    pub fn verdict(&self, check: Check) -> Option<&Verdict> {
        self.results.iter().find(|(c, _)| *c == check).map(|(_, v)| v)
    }

    pub fn failures(&self) -> impl Iterator<Item = &(Check, Verdict)> {
        self.results.iter().filter(|(_, v)| !v.pass)
    }

    /// Machine-readable `key=value` records, one per line.
    pub fn to_records(&self) -> String {
        let d = self.delta;
        let mut out = String::new();
        let _ = writeln!(out, "result={}", if self.passed() { "pass" } else { "fail" });
        let status = match self.status {
            Some(EndStatus::Decided) => "decided",
            Some(EndStatus::Horizon) => "horizon",
            None => "-",
        };
        let _ = writeln!(out, "status={status}");
        let _ = writeln!(out, "mode={}", self.mode);
        for (c, v) in &self.results {
            let name = match c {
                Check::DecisionAt(at) => format!("decision_at[{}]", format_time(*at, d)),
                c => c.name().to_string(),
            };
            match &v.witness {
                None => writeln!(out, "check.{name}=pass"),
                Some(w) => writeln!(out, "check.{name}=fail witness=\"{}\"", w.replace('"', "'")),
            }
            .expect("writing to a String cannot fail");
        }
        for r in &self.latencies {
            let _ = write!(
                out,
                "latency.{}={} view={} path={}",
                r.process,
                format_time(r.time, d),
                r.view,
                r.path.as_str()
            );
            if self.hops {
                let _ = write!(out, " hops={}", format_time(r.time, d));
            }
            out.push('\n');
        }
        let c = &self.certificates;
        let _ = writeln!(out, "max_progress_cert={}", c.max_progress);
        let _ = writeln!(out, "max_commit_cert={}", c.max_commit);
        let _ = writeln!(out, "progress_certs_seen={}", c.certificates_seen);
        let _ = writeln!(out, "max_view={}", self.max_view);
        out
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let d = self.delta;
        let mut out = String::new();
        let passed = self.results.iter().filter(|(_, v)| v.pass).count();
        let _ = writeln!(
            out,
            "{} ({passed}/{} checks passed, max view {})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.results.len(),
            self.max_view
        );
        if let (Some(lo), Some(hi)) =
            (self.latencies.iter().map(|r| r.time).min(), self.latencies.iter().map(|r| r.time).max())
        {
            let span = if lo == hi {
                format!("{}Δ", format_time(lo, d))
            } else {
                format!("{}Δ..{}Δ", format_time(lo, d), format_time(hi, d))
            };
            let _ = writeln!(out, "decisions: {} at {span}", self.latencies.len());
        } else {
            let _ = writeln!(out, "decisions: none");
        }
        for (c, v) in self.failures() {
            let _ = writeln!(out, "  {c}: {}", v.witness.as_deref().unwrap_or(""));
        }
        out
    }
}

pub fn check(trace: &Trace, checks: &[Check]) -> CheckReport {
    let max_view = trace
        .records
        .iter()
        .filter(|r| !trace.header.is_byzantine(r.actor))
        .filter_map(|r| match r.event {
            Event::EnterView { view } => Some(view),
            _ => None,
        })
        .max()
        .unwrap_or(View::FIRST);
    CheckReport {
        results: checks.iter().map(|c| (*c, run_check(trace, *c))).collect(),
        latencies: latency_table(trace),
        certificates: certificate_stats(trace),
        max_view,
        status: trace.end.map(|e| e.status),
        delta: trace.header.delta,
        hops: trace.header.latency == LatencyModel::Fixed(trace.header.delta),
        mode: trace.header.mode,
    }
}

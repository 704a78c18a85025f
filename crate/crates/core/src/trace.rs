//! Execution traces and their line-oriented text form.
//!
//! ```text
//! # fastbft-trace v1
//! # n=4 f=1 t=1 mode=vanilla
//! # delta=1000 gst=0 horizon=100 seed=1 latency=fixed:1
//! # inputs=0x41,0x41,0x41,0x41
//! # byzantine=-
//! 0 SEND p2 id=0 to=p1 at=1 kind=PROPOSE value=0x41 view=1 pc=- cc=- sigs=1 digest=…
//! 1 DELIVER p1 id=0 from=p2 kind=PROPOSE digest=…
//! 2 DECIDE p1 value=0x41 view=1 path=fast
//! 6 ENTER_VIEW p1 view=2
//! 1 CRASH p3
//! 7 DROP p1 from=p4 kind=VOTE view=2 reason=not_leader
//! # end time=2 status=decided
//! ```
//!
//! Times (and `gst`, `horizon`, `at`) are reduced fractions of Δ; `delta` is ticks per Δ.
//! Record order is the total order of the execution. `pc` and `cc` list the signature
//! counts of progress and commit certificates carried by a message; `sigs` counts every
//! signature in it; `digest` is the first 8 bytes of SHA-256 over the message encoding.

use std::fmt::{self, Write as _};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encoding::encode_message;
use crate::engine::DropReason;
use crate::quorum::Mode;
use crate::time::{format_time, parse_time};
use crate::types::{DecisionPath, Message, MessageKind, ProcessId, Value, View};

pub const MAGIC: &str = "# fastbft-trace v1";

/// Delivery delay model for messages without a scripted delay.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatencyModel {
    Fixed(u64),
    Uniform { lo: u64, hi: u64 },
    /// Every delay comes from the network schedule; unscripted messages take Δ.
    Scripted,
}

impl LatencyModel {
    pub fn format(&self, delta: u64) -> String {
        match *self {
            LatencyModel::Fixed(d) => format!("fixed:{}", format_time(d, delta)),
            LatencyModel::Uniform { lo, hi } => format!("uniform:{}:{}", format_time(lo, delta), format_time(hi, delta)),
            LatencyModel::Scripted => "scripted".into(),
        }
    }

    pub fn parse(s: &str, delta: u64) -> Option<LatencyModel> {
        let mut parts = s.split(':');
        match parts.next()? {
            "fixed" => {
                let d = parse_time(parts.next()?, delta)?;
                parts.next().is_none().then_some(LatencyModel::Fixed(d))
            }
            "uniform" => {
                let lo = parse_time(parts.next()?, delta)?;
                let hi = parse_time(parts.next()?, delta)?;
                parts.next().is_none().then_some(LatencyModel::Uniform { lo, hi })
            }
            "scripted" => parts.next().is_none().then_some(LatencyModel::Scripted),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceHeader {
    pub n: u32,
    pub f: u32,
    pub t: u32,
    pub mode: Mode,
    pub delta: u64,
    pub gst: u64,
    pub horizon: u64,
    pub seed: u64,
    pub latency: LatencyModel,
    pub inputs: Vec<Value>,
    pub byzantine: Vec<ProcessId>,
}

impl TraceHeader {
    pub fn is_byzantine(&self, p: ProcessId) -> bool {
        self.byzantine.contains(&p)
    }

    pub fn correct(&self) -> impl Iterator<Item = ProcessId> + '_ {
        ProcessId::all(self.n).filter(|p| !self.is_byzantine(*p))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Send {
        id: u64,
        to: ProcessId,
        at: u64,
        kind: MessageKind,
        value: Option<Value>,
        view: View,
        pc: Vec<usize>,
        cc: Vec<usize>,
        sigs: usize,
        digest: String,
    },
    Deliver {
        id: u64,
        from: ProcessId,
        kind: MessageKind,
        digest: String,
    },
    Decide {
        value: Value,
        view: View,
        path: DecisionPath,
    },
    EnterView {
        view: View,
    },
    Crash,
    Drop {
        from: ProcessId,
        kind: MessageKind,
        view: View,
        reason: DropReason,
    },
}

impl Event {
    pub fn send(id: u64, to: ProcessId, at: u64, msg: &Message) -> Event {
        Event::Send {
            id,
            to,
            at,
            kind: msg.kind(),
            value: msg.value().cloned(),
            view: msg.view(),
            pc: msg.progress_cert_sizes(),
            cc: msg.commit_cert_sizes(),
            sigs: msg.signature_count(),
            digest: digest(msg),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub time: u64,
    pub actor: ProcessId,
    pub event: Event,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum EndStatus {
    Decided,
    Horizon,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct TraceEnd {
    pub time: u64,
    pub status: EndStatus,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<Record>,
    pub end: Option<TraceEnd>,
}

pub fn digest(msg: &Message) -> String {
    let h = Sha256::digest(encode_message(msg));
    hex::encode(&h[..8])
}

fn fmt_value(v: &Value) -> String {
    format!("0x{}", v.to_hex())
}

fn fmt_sizes(sizes: &[usize]) -> String {
    if sizes.is_empty() {
        "-".into()
    } else {
        sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    }
}

impl Trace {
    pub fn new(header: TraceHeader) -> Self {
        Trace { header, records: Vec::new(), end: None }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_to(&mut out).expect("writing to a String cannot fail");
        out
    }

    fn write_to(&self, out: &mut String) -> fmt::Result {
        let h = &self.header;
        let d = h.delta;
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "# n={} f={} t={} mode={}", h.n, h.f, h.t, h.mode)?;
        writeln!(
            out,
            "# delta={} gst={} horizon={} seed={} latency={}",
            d,
            format_time(h.gst, d),
            format_time(h.horizon, d),
            h.seed,
            h.latency.format(d)
        )?;
        let inputs: Vec<String> = h.inputs.iter().map(fmt_value).collect();
        writeln!(out, "# inputs={}", inputs.join(","))?;
        let byz: Vec<String> = h.byzantine.iter().map(|p| p.to_string()).collect();
        writeln!(out, "# byzantine={}", if byz.is_empty() { "-".to_string() } else { byz.join(",") })?;
        for r in &self.records {
            write!(out, "{} ", format_time(r.time, d))?;
            match &r.event {
                Event::Send { id, to, at, kind, value, view, pc, cc, sigs, digest } => writeln!(
                    out,
                    "SEND {} id={id} to={to} at={} kind={kind} value={} view={view} pc={} cc={} sigs={sigs} digest={digest}",
                    r.actor,
                    format_time(*at, d),
                    value.as_ref().map_or("-".to_string(), fmt_value),
                    fmt_sizes(pc),
                    fmt_sizes(cc),
                )?,
                Event::Deliver { id, from, kind, digest } => {
                    writeln!(out, "DELIVER {} id={id} from={from} kind={kind} digest={digest}", r.actor)?
                }
                Event::Decide { value, view, path } => {
                    writeln!(out, "DECIDE {} value={} view={view} path={}", r.actor, fmt_value(value), path.as_str())?
                }
                Event::EnterView { view } => writeln!(out, "ENTER_VIEW {} view={view}", r.actor)?,
                Event::Crash => writeln!(out, "CRASH {}", r.actor)?,
                Event::Drop { from, kind, view, reason } => {
                    writeln!(out, "DROP {} from={from} kind={kind} view={view} reason={reason}", r.actor)?
                }
            }
        }
        if let Some(end) = self.end {
            let status = match end.status {
                EndStatus::Decided => "decided",
                EndStatus::Horizon => "horizon",
            };
            writeln!(out, "# end time={} status={status}", format_time(end.time, d))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Trace, TraceParseError> {
        Parser::default().parse(text)
    }

    /// Decisions of correct processes, in trace order.
    pub fn correct_decisions(&self) -> impl Iterator<Item = (&Record, &Value, View, DecisionPath)> {
        self.records.iter().filter(|r| !self.header.is_byzantine(r.actor)).filter_map(|r| match &r.event {
            Event::Decide { value, view, path } => Some((r, value, *view, *path)),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Default)]
struct Parser {
    line: usize,
}

impl Parser {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, TraceParseError> {
        Err(TraceParseError { line: self.line, message: message.into() })
    }

    fn fields<'a>(&self, tokens: &[&'a str]) -> Result<Vec<(&'a str, &'a str)>, TraceParseError> {
        tokens
            .iter()
            .map(|t| t.split_once('=').map_or_else(|| self.err(format!("expected key=value, got `{t}`")), Ok))
            .collect()
    }

    fn get<'a>(&self, fields: &[(&'a str, &'a str)], key: &str) -> Result<&'a str, TraceParseError> {
        fields.iter().find(|(k, _)| *k == key).map_or_else(|| self.err(format!("missing `{key}`")), |(_, v)| Ok(*v))
    }

    fn num<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T, TraceParseError> {
        s.parse().map_or_else(|_| self.err(format!("bad {what} `{s}`")), Ok)
    }

    fn time(&self, s: &str, delta: u64) -> Result<u64, TraceParseError> {
        parse_time(s, delta).map_or_else(|| self.err(format!("bad time `{s}`")), Ok)
    }

    fn pid(&self, s: &str) -> Result<ProcessId, TraceParseError> {
        match s.strip_prefix('p').and_then(|x| x.parse::<u32>().ok()) {
            Some(i) if i >= 1 => Ok(ProcessId(i)),
            _ => self.err(format!("bad process id `{s}`")),
        }
    }

    fn value(&self, s: &str) -> Result<Value, TraceParseError> {
        s.strip_prefix("0x").and_then(Value::from_hex).map_or_else(|| self.err(format!("bad value `{s}`")), Ok)
    }

    fn kind(&self, s: &str) -> Result<MessageKind, TraceParseError> {
        MessageKind::parse(s).map_or_else(|| self.err(format!("bad message kind `{s}`")), Ok)
    }

    fn view(&self, s: &str) -> Result<View, TraceParseError> {
        let v: u64 = self.num(s, "view")?;
        if v == 0 {
            return self.err("view 0");
        }
        Ok(View(v))
    }

    fn sizes(&self, s: &str) -> Result<Vec<usize>, TraceParseError> {
        if s == "-" {
            return Ok(Vec::new());
        }
        s.split(',').map(|x| self.num(x, "size")).collect()
    }

    fn parse(mut self, text: &str) -> Result<Trace, TraceParseError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next_header = |p: &mut Parser, prefix: &str| -> Result<String, TraceParseError> {
            match lines.next() {
                Some((i, l)) => {
                    p.line = i;
                    match l.strip_prefix(prefix) {
                        Some(rest) => Ok(rest.to_string()),
                        None => p.err(format!("expected `{prefix}…`")),
                    }
                }
                None => p.err("truncated header"),
            }
        };
        let magic = next_header(&mut self, "#")?;
        if format!("#{magic}") != MAGIC {
            return self.err("not a fastbft trace");
        }
        let l2 = next_header(&mut self, "# ")?;
        let f2 = self.fields(&l2.split_whitespace().collect::<Vec<_>>())?;
        let n: u32 = self.num(self.get(&f2, "n")?, "n")?;
        let f: u32 = self.num(self.get(&f2, "f")?, "f")?;
        let t: u32 = self.num(self.get(&f2, "t")?, "t")?;
        let mode = Mode::parse(self.get(&f2, "mode")?).map_or_else(|| self.err("bad mode"), Ok)?;
        let l3 = next_header(&mut self, "# ")?;
        let f3 = self.fields(&l3.split_whitespace().collect::<Vec<_>>())?;
        let delta: u64 = self.num(self.get(&f3, "delta")?, "delta")?;
        if delta == 0 {
            return self.err("delta must be positive");
        }
        let gst = self.time(self.get(&f3, "gst")?, delta)?;
        let horizon = self.time(self.get(&f3, "horizon")?, delta)?;
        let seed: u64 = self.num(self.get(&f3, "seed")?, "seed")?;
        let latency = LatencyModel::parse(self.get(&f3, "latency")?, delta).map_or_else(|| self.err("bad latency"), Ok)?;
        let l4 = next_header(&mut self, "# inputs=")?;
        let inputs = if l4.is_empty() {
            Vec::new()
        } else {
            l4.split(',').map(|v| self.value(v)).collect::<Result<Vec<_>, _>>()?
        };
        let l5 = next_header(&mut self, "# byzantine=")?;
        let byzantine = if l5 == "-" {
            Vec::new()
        } else {
            l5.split(',').map(|p| self.pid(p)).collect::<Result<Vec<_>, _>>()?
        };
        let header = TraceHeader { n, f, t, mode, delta, gst, horizon, seed, latency, inputs, byzantine };

        let mut trace = Trace::new(header);
        for (i, line) in lines {
            self.line = i;
            if line.trim().is_empty() {
                continue;
            }
            if trace.end.is_some() {
                return self.err("content after end marker");
            }
            if let Some(rest) = line.strip_prefix("# end ") {
                let fs = self.fields(&rest.split_whitespace().collect::<Vec<_>>())?;
                let time = self.time(self.get(&fs, "time")?, delta)?;
                let status = match self.get(&fs, "status")? {
                    "decided" => EndStatus::Decided,
                    "horizon" => EndStatus::Horizon,
                    s => return self.err(format!("bad status `{s}`")),
                };
                trace.end = Some(TraceEnd { time, status });
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() < 3 {
                return self.err("expected `<time> <KIND> <actor> …`");
            }
            let time = self.time(tokens[0], delta)?;
            let actor = self.pid(tokens[2])?;
            if actor.0 > n {
                return self.err(format!("actor {actor} outside 1..={n}"));
            }
            let fs = self.fields(&tokens[3..])?;
            let event = match tokens[1] {
                "SEND" => {
                    let value = match self.get(&fs, "value")? {
                        "-" => None,
                        v => Some(self.value(v)?),
                    };
                    Event::Send {
                        id: self.num(self.get(&fs, "id")?, "id")?,
                        to: self.pid(self.get(&fs, "to")?)?,
                        at: self.time(self.get(&fs, "at")?, delta)?,
                        kind: self.kind(self.get(&fs, "kind")?)?,
                        value,
                        view: self.view(self.get(&fs, "view")?)?,
                        pc: self.sizes(self.get(&fs, "pc")?)?,
                        cc: self.sizes(self.get(&fs, "cc")?)?,
                        sigs: self.num(self.get(&fs, "sigs")?, "sigs")?,
                        digest: self.get(&fs, "digest")?.to_string(),
                    }
                }
                "DELIVER" => Event::Deliver {
                    id: self.num(self.get(&fs, "id")?, "id")?,
                    from: self.pid(self.get(&fs, "from")?)?,
                    kind: self.kind(self.get(&fs, "kind")?)?,
                    digest: self.get(&fs, "digest")?.to_string(),
                },
                "DECIDE" => Event::Decide {
                    value: self.value(self.get(&fs, "value")?)?,
                    view: self.view(self.get(&fs, "view")?)?,
                    path: match self.get(&fs, "path")? {
                        "fast" => DecisionPath::Fast,
                        "slow" => DecisionPath::Slow,
                        s => return self.err(format!("bad path `{s}`")),
                    },
                },
                "ENTER_VIEW" => Event::EnterView { view: self.view(self.get(&fs, "view")?)? },
                "CRASH" => Event::Crash,
                "DROP" => Event::Drop {
                    from: self.pid(self.get(&fs, "from")?)?,
                    kind: self.kind(self.get(&fs, "kind")?)?,
                    view: self.view(self.get(&fs, "view")?)?,
                    reason: DropReason::parse(self.get(&fs, "reason")?)
                        .map_or_else(|| self.err("bad drop reason"), Ok)?,
                },
                other => return self.err(format!("unknown record kind `{other}`")),
            };
            trace.records.push(Record { time, actor, event });
        }
        Ok(trace)
    }
}

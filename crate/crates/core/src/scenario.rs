//! Scenario files.
//!
//! A scenario is a TOML document naming the configuration, the network, the Byzantine set
//! and what it does, and the checks to run. Times are strings in units of Δ (`"2"`,
//! `"5/2"`); `delta` is ticks per Δ.
//!
//! ```toml
//! name = "equivocating_leader_n9"
//! n = 9
//! f = 2
//! mode = "vanilla"
//! horizon = "100"
//! seed = 1
//! inputs = "0x41"
//! byzantine = [2]
//! checks = ["agreement", "validity", "termination"]
//!
//! [adversary]
//! script = "equivocate"
//! values = ["0x41", "0x42"]
//! ```
//!
//! `script = "rho"` with `which = 1..5` regenerates the whole lower-bound execution from
//! `n`, `f` and `t`; `inputs`, `byzantine`, `gst` and `latency` are then ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::Check;
use crate::engine::CertificateMode;
use crate::lower_bound::{self, LowerBoundError};
use crate::quorum::{ConfigError, Mode, QuorumConfig};
use crate::sim::adversary::{Behavior, ByzContext, CrashAt, Equivocate, Honest, Mutator, Silent};
use crate::sim::schedule::{HoldUntilGst, PreGstChaos};
use crate::sim::{SimConfig, SimError, SimOutcome, Simulation};
use crate::time::{format_time, parse_time, DEFAULT_DELTA};
use crate::trace::LatencyModel;
use crate::types::{MessageKind, ProcessId, Value};

/// What one Byzantine process does.
#[derive(Clone, Debug, PartialEq)]
pub enum BehaviorSpec {
    Honest,
    Crash(u64),
    Silent,
    Equivocate,
    Mutator(f64),
}

impl BehaviorSpec {
    fn format(&self, delta: u64) -> String {
        match self {
            BehaviorSpec::Honest => "honest".into(),
            BehaviorSpec::Crash(at) => format!("crash:{}", format_time(*at, delta)),
            BehaviorSpec::Silent => "silent".into(),
            BehaviorSpec::Equivocate => "equivocate".into(),
            BehaviorSpec::Mutator(i) => format!("mutator:{i}"),
        }
    }

    fn parse(s: &str, delta: u64) -> Option<BehaviorSpec> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        Some(match (head, arg) {
            ("honest", None) => BehaviorSpec::Honest,
            ("crash", Some(a)) => BehaviorSpec::Crash(parse_time(a, delta)?),
            ("silent", None) => BehaviorSpec::Silent,
            ("equivocate", None) => BehaviorSpec::Equivocate,
            ("mutator", Some(a)) => BehaviorSpec::Mutator(a.parse().ok().filter(|i: &f64| (0.0..=1.0).contains(i))?),
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Script {
    None,
    Crash { at: u64 },
    Silent,
    Equivocate { values: (Value, Value), split: Option<BTreeSet<ProcessId>> },
    Mutator { intensity: f64, values: Vec<Value> },
    Mixed(BTreeMap<ProcessId, BehaviorSpec>),
    Rho { which: u8, values: (Value, Value) },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NetworkSpec {
    Default,
    /// Pre-GST delays uniform in `[1, max_delay]` ticks.
    Random { max_delay: u64 },
    /// Pre-GST acks, ack signatures and commits are held until GST.
    HoldAcks,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub cfg: QuorumConfig,
    pub sim: SimConfig,
    pub inputs: Vec<Value>,
    pub byzantine: BTreeSet<ProcessId>,
    pub script: Script,
    pub network: NetworkSpec,
    pub cert_mode: CertificateMode,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Syntax(String),
    #[error("{}", field_message(.field, .line, .message))]
    Field { field: String, line: Option<usize>, message: String },
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    LowerBound(#[from] LowerBoundError),
}

fn field_message(field: &str, line: &Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("line {l}: `{field}`: {message}"),
        None => format!("`{field}`: {message}"),
    }
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(untagged)]
enum TimeField {
    Whole(u64),
    Text(String),
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(untagged)]
enum InputsField {
    Uniform(String),
    PerProcess(Vec<String>),
}

#[derive(Serialize, Deserialize, Default, Clone, Debug)]
#[serde(deny_unknown_fields)]
struct RawAdversary {
    script: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    at: Option<TimeField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    which: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intensity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    network: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    behaviors: Option<BTreeMap<String, String>>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    n: u32,
    f: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<u32>,
    mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gst: Option<TimeField>,
    horizon: TimeField,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    latency: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inputs: Option<InputsField>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    byzantine: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    checks: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expect_decision_at: Option<TimeField>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificates: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adversary: Option<RawAdversary>,
}

struct Ctx<'a> {
    text: &'a str,
    delta: u64,
}

impl Ctx<'_> {
    fn line_of(&self, field: &str) -> Option<usize> {
        let key = field.rsplit('.').next().unwrap_or(field);
        self.text.lines().position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
    }

    fn err<T>(&self, field: &str, message: impl Into<String>) -> Result<T, ScenarioError> {
        Err(ScenarioError::Field { field: field.into(), line: self.line_of(field), message: message.into() })
    }

    fn time(&self, field: &str, v: &TimeField) -> Result<u64, ScenarioError> {
        match v {
            TimeField::Whole(x) => x.checked_mul(self.delta).map_or_else(|| self.err(field, "time overflows"), Ok),
            TimeField::Text(s) => {
                parse_time(s, self.delta).map_or_else(|| self.err(field, format!("bad time `{s}`")), Ok)
            }
        }
    }

    fn value(&self, field: &str, s: &str) -> Result<Value, ScenarioError> {
        let hex = s.strip_prefix("0x").unwrap_or(s);
        Value::from_hex(hex).map_or_else(|| self.err(field, format!("bad value `{s}` (expected hex like 0x41)")), Ok)
    }

    fn process(&self, field: &str, n: u32, i: u32) -> Result<ProcessId, ScenarioError> {
        if i == 0 || i > n {
            return self.err(field, format!("process {i} outside 1..={n}"));
        }
        Ok(ProcessId(i))
    }

    fn processes(&self, field: &str, n: u32, ids: &[u32]) -> Result<BTreeSet<ProcessId>, ScenarioError> {
        ids.iter().map(|i| self.process(field, n, *i)).collect()
    }
}

fn hex(v: &Value) -> String {
    format!("0x{}", v.to_hex())
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
        let cx = Ctx { text, delta: raw.delta.unwrap_or(DEFAULT_DELTA) };
        if cx.delta == 0 {
            return cx.err("delta", "must be positive");
        }
        let Some(mode) = Mode::parse(&raw.mode) else {
            return cx.err("mode", format!("unknown mode `{}` (vanilla or generalized)", raw.mode));
        };
        let t = raw.t.unwrap_or(raw.f);
        let cfg = QuorumConfig::new(raw.n, raw.f, t, mode)?;
        let n = cfg.n();
        let gst = raw.gst.as_ref().map_or(Ok(0), |g| cx.time("gst", g))?;
        let horizon = cx.time("horizon", &raw.horizon)?;
        let latency = match &raw.latency {
            None => LatencyModel::Fixed(cx.delta),
            Some(s) => LatencyModel::parse(s, cx.delta)
                .map_or_else(|| cx.err("latency", format!("bad latency `{s}` (fixed:<Δ>, uniform:<lo>:<hi>, scripted)")), Ok)?,
        };
        let sim = SimConfig { delta: cx.delta, gst, horizon, seed: raw.seed, latency };
        if let Err(e) = sim.validate() {
            return cx.err("latency", e.to_string());
        }
        let inputs = match &raw.inputs {
            None => vec![Value::from("A"); n as usize],
            Some(InputsField::Uniform(s)) => vec![cx.value("inputs", s)?; n as usize],
            Some(InputsField::PerProcess(v)) => {
                if v.len() != n as usize {
                    return cx.err("inputs", format!("{} inputs for {n} processes", v.len()));
                }
                v.iter().map(|s| cx.value("inputs", s)).collect::<Result<_, _>>()?
            }
        };
        let byzantine = cx.processes("byzantine", n, &raw.byzantine)?;
        if byzantine.len() > cfg.f() as usize {
            return cx.err("byzantine", format!("{} Byzantine processes exceed f = {}", byzantine.len(), cfg.f()));
        }
        let mut checks = Vec::new();
        for c in &raw.checks {
            match Check::parse(c) {
                Some(c) => checks.push(c),
                None => return cx.err("checks", format!("unknown check `{c}`")),
            }
        }
        if checks.is_empty() {
            checks.extend(Check::DEFAULT);
        }
        if let Some(at) = &raw.expect_decision_at {
            checks.push(Check::DecisionAt(cx.time("expect_decision_at", at)?));
        }
        let cert_mode = match raw.certificates.as_deref() {
            None | Some("signed") => CertificateMode::Signed,
            Some("vote_set") => CertificateMode::VoteSet,
            Some(s) => return cx.err("certificates", format!("unknown certificate mode `{s}` (signed or vote_set)")),
        };
        let adv = raw.adversary.clone().unwrap_or_else(|| RawAdversary { script: "none".into(), ..Default::default() });
        let network = match adv.network.as_deref() {
            None => NetworkSpec::Default,
            Some("hold_acks") => NetworkSpec::HoldAcks,
            Some(s) => match s.strip_prefix("random:").and_then(|d| parse_time(d, cx.delta)) {
                Some(max_delay) if max_delay > 0 => NetworkSpec::Random { max_delay },
                _ => return cx.err("adversary.network", format!("bad network `{s}` (random:<maxΔ> or hold_acks)")),
            },
        };
        let values = |cx: &Ctx, min: usize| -> Result<Vec<Value>, ScenarioError> {
            let v = adv.values.clone().unwrap_or_else(|| vec!["0x41".into(), "0x42".into()]);
            if v.len() < min {
                return cx.err("adversary.values", format!("need at least {min} values"));
            }
            v.iter().map(|s| cx.value("adversary.values", s)).collect()
        };
        let script = match adv.script.as_str() {
            "none" => Script::None,
            "crash" => Script::Crash {
                at: adv.at.as_ref().map_or(Ok(cx.delta), |a| cx.time("adversary.at", a))?,
            },
            "silent" => Script::Silent,
            "equivocate" => {
                let v = values(&cx, 2)?;
                let split = adv.split.as_ref().map(|s| cx.processes("adversary.split", n, s)).transpose()?;
                Script::Equivocate { values: (v[0].clone(), v[1].clone()), split }
            }
            "mutator" => {
                let intensity = adv.intensity.unwrap_or(0.3);
                if !(0.0..=1.0).contains(&intensity) {
                    return cx.err("adversary.intensity", "must be within [0, 1]");
                }
                Script::Mutator { intensity, values: values(&cx, 1)? }
            }
            "mixed" => {
                let mut map = BTreeMap::new();
                for (k, v) in adv.behaviors.clone().unwrap_or_default() {
                    let id = k.strip_prefix('p').unwrap_or(&k).parse::<u32>().ok();
                    let Some(id) = id else {
                        return cx.err("adversary.behaviors", format!("bad process `{k}`"));
                    };
                    let id = cx.process("adversary.behaviors", n, id)?;
                    if !byzantine.contains(&id) {
                        return cx.err("adversary.behaviors", format!("{id} is not Byzantine"));
                    }
                    match BehaviorSpec::parse(&v, cx.delta) {
                        Some(b) => map.insert(id, b),
                        None => return cx.err("adversary.behaviors", format!("bad behavior `{v}`")),
                    };
                }
                Script::Mixed(map)
            }
            "rho" => {
                let which = adv.which.unwrap_or(0);
                let v = adv.values.clone().unwrap_or_else(|| vec!["0x00".into(), "0x01".into()]);
                if v.len() != 2 {
                    return cx.err("adversary.values", "rho takes exactly two values");
                }
                let v0 = cx.value("adversary.values", &v[0])?;
                let v1 = cx.value("adversary.values", &v[1])?;
                let mut s = lower_bound::generate_rho_schedule(&cfg, which, &v0, &v1)?.scenario;
                s.name = raw.name.clone();
                s.description = raw.description.clone();
                s.sim.seed = raw.seed;
                s.checks = checks;
                let mut s = s.with_delta(cx.delta);
                s.sim.horizon = horizon.max(s.sim.gst);
                return Ok(s);
            }
            s => return cx.err("adversary.script", format!("unknown script `{s}`")),
        };
        if script != Script::None && byzantine.is_empty() {
            return cx.err("byzantine", format!("script `{}` needs Byzantine processes", adv.script));
        }
        Ok(Scenario {
            name: raw.name,
            description: raw.description,
            cfg,
            sim,
            inputs,
            byzantine,
            script,
            network,
            cert_mode,
            checks,
        })
    }

    /// Rescales every time in the scenario to `delta` ticks per Δ.
    fn with_delta(mut self, delta: u64) -> Self {
        let old = self.sim.delta;
        if old == delta {
            return self;
        }
        let scale = |x: u64| x / old * delta + x % old * delta / old;
        self.sim.delta = delta;
        self.sim.gst = scale(self.sim.gst);
        self.sim.latency = match self.sim.latency {
            LatencyModel::Fixed(d) => LatencyModel::Fixed(scale(d)),
            LatencyModel::Uniform { lo, hi } => LatencyModel::Uniform { lo: scale(lo), hi: scale(hi) },
            LatencyModel::Scripted => LatencyModel::Scripted,
        };
        self
    }

    pub fn to_toml(&self) -> String {
        let d = self.sim.delta;
        let time = |x: u64| TimeField::Text(format_time(x, d));
        let uniform = self.inputs.windows(2).all(|w| w[0] == w[1]);
        let mut expect = None;
        let checks: Vec<String> = self
            .checks
            .iter()
            .filter_map(|c| match c {
                Check::DecisionAt(at) => {
                    expect = Some(time(*at));
                    None
                }
                c => Some(c.name().to_string()),
            })
            .collect();
        let mut adv = RawAdversary::default();
        let rho = matches!(self.script, Script::Rho { .. });
        adv.script = match &self.script {
            Script::None => "none",
            Script::Crash { at } => {
                adv.at = Some(time(*at));
                "crash"
            }
            Script::Silent => "silent",
            Script::Equivocate { values, split } => {
                adv.values = Some(vec![hex(&values.0), hex(&values.1)]);
                adv.split = split.as_ref().map(|s| s.iter().map(|p| p.0).collect());
                "equivocate"
            }
            Script::Mutator { intensity, values } => {
                adv.intensity = Some(*intensity);
                adv.values = Some(values.iter().map(hex).collect());
                "mutator"
            }
            Script::Mixed(m) => {
                adv.behaviors = Some(m.iter().map(|(p, b)| (p.to_string(), b.format(d))).collect());
                "mixed"
            }
            Script::Rho { which, values } => {
                adv.which = Some(*which);
                adv.values = Some(vec![hex(&values.0), hex(&values.1)]);
                "rho"
            }
        }
        .to_string();
        adv.network = match self.network {
            NetworkSpec::Default => None,
            NetworkSpec::Random { max_delay } => Some(format!("random:{}", format_time(max_delay, d))),
            NetworkSpec::HoldAcks => Some("hold_acks".into()),
        };
        let raw = RawScenario {
            name: self.name.clone(),
            description: self.description.clone(),
            n: self.cfg.n(),
            f: self.cfg.f(),
            t: Some(self.cfg.t()),
            mode: self.cfg.mode().as_str().into(),
            delta: Some(d),
            gst: (!rho).then(|| time(self.sim.gst)),
            horizon: time(self.sim.horizon),
            seed: self.sim.seed,
            latency: (!rho).then(|| self.sim.latency.format(d)),
            inputs: (!rho).then(|| {
                if uniform {
                    InputsField::Uniform(hex(&self.inputs[0]))
                } else {
                    InputsField::PerProcess(self.inputs.iter().map(hex).collect())
                }
            }),
            byzantine: if rho { Vec::new() } else { self.byzantine.iter().map(|p| p.0).collect() },
            checks,
            expect_decision_at: expect,
            certificates: (self.cert_mode == CertificateMode::VoteSet).then(|| "vote_set".into()),
            adversary: (self.script != Script::None || self.network != NetworkSpec::Default).then_some(adv),
        };
        toml::to_string(&raw).expect("scenario serializes")
    }

    fn behavior(&self, p: ProcessId, ctx: &ByzContext) -> Box<dyn Behavior> {
        let spec = match &self.script {
            Script::Crash { at } => BehaviorSpec::Crash(*at),
            Script::Silent => BehaviorSpec::Silent,
            Script::Equivocate { .. } => BehaviorSpec::Equivocate,
            Script::Mutator { intensity, .. } => BehaviorSpec::Mutator(*intensity),
            Script::Mixed(m) => m.get(&p).cloned().unwrap_or(BehaviorSpec::Honest),
            Script::None | Script::Rho { .. } => BehaviorSpec::Honest,
        };
        let (a, b) = match &self.script {
            Script::Equivocate { values, .. } => values.clone(),
            _ => (Value::from("A"), Value::from("B")),
        };
        let values = match &self.script {
            Script::Mutator { values, .. } => values.clone(),
            _ => vec![a.clone(), b.clone()],
        };
        match spec {
            BehaviorSpec::Honest => Box::new(Honest::new(ctx)),
            BehaviorSpec::Crash(at) => Box::new(CrashAt::new(ctx, at)),
            BehaviorSpec::Silent => Box::new(Silent),
            BehaviorSpec::Equivocate => {
                let split = match &self.script {
                    Script::Equivocate { split: Some(s), .. } => s.clone(),
                    _ => Equivocate::default_split(self.cfg.n()),
                };
                Box::new(Equivocate::new(ctx, a, b, split))
            }
            BehaviorSpec::Mutator(i) => Box::new(Mutator::new(ctx, i, values)),
        }
    }

    pub fn simulation(&self) -> Simulation {
        if let Script::Rho { which, values } = &self.script {
            return lower_bound::rho_simulation(&self.cfg, *which, &values.0, &values.1, self.sim)
                .expect("rho scenarios are validated when built")
                .cert_mode(self.cert_mode);
        }
        let mut sim = Simulation::new(self.cfg, self.sim, self.inputs.clone()).cert_mode(self.cert_mode);
        for p in &self.byzantine {
            let this = self.clone();
            let p = *p;
            sim = sim.byzantine(p, Box::new(move |ctx: &ByzContext| this.behavior(p, ctx)));
        }
        match self.network {
            NetworkSpec::Default => sim,
            NetworkSpec::Random { max_delay } => {
                sim.schedule(Box::new(PreGstChaos { gst: self.sim.gst, max_delay }))
            }
            NetworkSpec::HoldAcks => sim.schedule(Box::new(HoldUntilGst {
                gst: self.sim.gst,
                kinds: vec![MessageKind::Ack, MessageKind::Sig, MessageKind::Commit],
            })),
        }
    }

    pub fn run(&self) -> Result<SimOutcome, SimError> {
        self.simulation().run()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (n={} f={} t={} {}, byzantine={})",
            self.name,
            self.cfg.n(),
            self.cfg.f(),
            self.cfg.t(),
            self.cfg.mode(),
            self.byzantine.len()
        )
    }
}

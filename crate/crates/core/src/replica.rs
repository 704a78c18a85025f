//! A correct process: engine plus view synchronizer.

use std::sync::Arc;

use crate::crypto::{KeyDirectory, SigningKey};
use crate::engine::{Action, CertificateMode, Engine};
use crate::quorum::QuorumConfig;
use crate::sync::{SyncState, SyncStep};
use crate::types::{Message, ProcessId, Value};

#[derive(Debug)]
pub struct Replica {
    engine: Engine,
    sync: SyncState,
}

impl Replica {
    pub fn new(
        id: ProcessId,
        cfg: QuorumConfig,
        delta: u64,
        input: Value,
        key: SigningKey,
        keys: Arc<KeyDirectory>,
        cert_mode: CertificateMode,
    ) -> Self {
        Replica {
            engine: Engine::new(id, cfg, input, key, keys, cert_mode),
            sync: SyncState::new(id, cfg.n(), cfg.f(), delta),
        }
    }

    pub fn id(&self) -> ProcessId {
        self.engine.id()
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn sync(&self) -> &SyncState {
        &self.sync
    }

    pub fn start(&mut self, now: u64) -> Vec<Action> {
        let mut out = self.engine.start();
        let step = self.sync.start(now);
        self.apply(step, &mut out);
        out
    }

    pub fn on_message(&mut self, now: u64, from: ProcessId, msg: Message) -> Vec<Action> {
        let mut out = Vec::new();
        match msg {
            Message::NewView { view } => {
                let step = self.sync.on_new_view(now, from, view, self.decided());
                self.apply(step, &mut out);
            }
            msg => out.extend(self.engine.on_message(from, msg)),
        }
        out
    }

    pub fn on_timer(&mut self, now: u64) -> Vec<Action> {
        let mut out = Vec::new();
        let step = self.sync.on_timer(now, self.decided());
        self.apply(step, &mut out);
        out
    }

    fn decided(&self) -> bool {
        self.engine.decided().is_some()
    }

    fn apply(&mut self, step: SyncStep, out: &mut Vec<Action>) {
        for view in step.announce {
            for to in self.engine.config().processes() {
                out.push(Action::Send { to, msg: Message::NewView { view } });
            }
        }
        if let Some(view) = step.enter {
            out.push(Action::EnterView { view });
            out.extend(self.engine.on_enter_view(view));
        }
        if let Some(at) = step.set_timer {
            out.push(Action::SetTimer { at });
        }
    }
}

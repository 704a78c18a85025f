//! Adversarial control over message delays.
//!
//! A schedule may override the delay of any message. The simulator enforces the network
//! model on the result: every non-self delay is at least one tick, and a message between
//! correct processes sent at or after GST arrives within Δ.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::types::{Message, MessageKind, ProcessId};

pub trait NetworkSchedule: Send {
    /// Delay in ticks for a message sent at `now`, or `None` for the latency model's choice.
    fn delay(&mut self, now: u64, from: ProcessId, to: ProcessId, msg: &Message, rng: &mut ChaCha8Rng) -> Option<u64>;
}

/// Messages sent before GST take a uniformly random delay in `[1, max_delay]` ticks.
#[derive(Clone, Debug)]
pub struct PreGstChaos {
    pub gst: u64,
    pub max_delay: u64,
}

impl NetworkSchedule for PreGstChaos {
    fn delay(&mut self, now: u64, _: ProcessId, _: ProcessId, _: &Message, rng: &mut ChaCha8Rng) -> Option<u64> {
        (now < self.gst).then(|| rng.gen_range(1..=self.max_delay.max(1)))
    }
}

/// Messages of the listed kinds sent before GST are held until GST.
#[derive(Clone, Debug)]
pub struct HoldUntilGst {
    pub gst: u64,
    pub kinds: Vec<MessageKind>,
}

impl NetworkSchedule for HoldUntilGst {
    fn delay(&mut self, now: u64, _: ProcessId, _: ProcessId, msg: &Message, _: &mut ChaCha8Rng) -> Option<u64> {
        (now < self.gst && self.kinds.contains(&msg.kind())).then(|| self.gst - now)
    }
}

/// Asks each schedule in turn; the first override wins.
pub struct Layered(pub Vec<Box<dyn NetworkSchedule>>);

impl NetworkSchedule for Layered {
    fn delay(&mut self, now: u64, from: ProcessId, to: ProcessId, msg: &Message, rng: &mut ChaCha8Rng) -> Option<u64> {
        self.0.iter_mut().find_map(|s| s.delay(now, from, to, msg, rng))
    }
}

//! View synchronizer.
//!
//! Announcements are counted as "highest view announced by each sender". A process echoes
//! the `(f+1)`-th highest announcement and enters the `(n-f)`-th highest, so views can be
//! skipped. It announces `view+1` on its own after `timeout` in a view; the timeout starts at
//! 5Δ and doubles on every such announcement up to a cap. A process never leaves a view
//! less than 5Δ after entering it.
//!
//! A decided process does not time out on its own, but once it has seen any announcement
//! for a view above its own it behaves like an undecided one, so processes that are still
//! undecided can gather `n-f` announcers.

use crate::types::{ProcessId, View};

/// Multiples of Δ.
pub const BASE_TIMEOUT: u64 = 5;
pub const MAX_TIMEOUT: u64 = 40;
pub const MIN_DWELL: u64 = 5;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SyncStep {
    /// Views to announce, in order.
    pub announce: Vec<View>,
    pub enter: Option<View>,
    pub set_timer: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct SyncState {
    id: ProcessId,
    n: u32,
    f: u32,
    delta: u64,
    view: View,
    entered_at: u64,
    timeout: u64,
    announced: View,
    highest: Vec<View>,
    laggard_seen: bool,
    timer_at: Option<u64>,
}

impl SyncState {
    pub fn new(id: ProcessId, n: u32, f: u32, delta: u64) -> Self {
        SyncState {
            id,
            n,
            f,
            delta,
            view: View::FIRST,
            entered_at: 0,
            timeout: BASE_TIMEOUT * delta,
            announced: View::FIRST,
            highest: vec![View::FIRST; n as usize],
            laggard_seen: false,
            timer_at: None,
        }
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn entered_at(&self) -> u64 {
        self.entered_at
    }

    /// Current timeout in ticks.
    pub fn timeout(&self) -> u64 {
        self.timeout
    }

    pub fn start(&mut self, now: u64) -> SyncStep {
        self.entered_at = now;
        let mut step = SyncStep::default();
        self.schedule(now, &mut step);
        step
    }

    pub fn on_timer(&mut self, now: u64, decided: bool) -> SyncStep {
        self.evaluate(now, decided)
    }

    pub fn on_new_view(&mut self, now: u64, from: ProcessId, view: View, decided: bool) -> SyncStep {
        if let Some(slot) = self.highest.get_mut(from.0 as usize - 1) {
            *slot = (*slot).max(view);
        }
        if from != self.id && view > self.view {
            self.laggard_seen = true;
        }
        self.evaluate(now, decided)
    }

    fn kth_highest(&self, k: usize) -> View {
        let mut views = self.highest.clone();
        views.sort_unstable_by(|a, b| b.cmp(a));
        views[k - 1]
    }

    fn announce(&mut self, view: View, step: &mut SyncStep) {
        self.announced = view;
        let me = self.id.0 as usize - 1;
        self.highest[me] = self.highest[me].max(view);
        step.announce.push(view);
    }

    fn evaluate(&mut self, now: u64, decided: bool) -> SyncStep {
        let mut step = SyncStep::default();
        if self.announced <= self.view
            && now >= self.entered_at + self.timeout
            && (!decided || self.laggard_seen)
        {
            self.announce(self.view.next(), &mut step);
            self.timeout = (self.timeout * 2).min(MAX_TIMEOUT * self.delta);
        }
        let echo = self.kth_highest(self.f as usize + 1);
        if echo > self.view && echo > self.announced {
            self.announce(echo, &mut step);
        }
        let target = self.kth_highest((self.n - self.f) as usize);
        if target > self.view && now >= self.entered_at + MIN_DWELL * self.delta {
            self.view = target;
            self.entered_at = now;
            self.laggard_seen = false;
            step.enter = Some(target);
        }
        self.schedule(now, &mut step);
        step
    }

    fn schedule(&mut self, now: u64, step: &mut SyncStep) {
        let mut deadline = None;
        if self.announced <= self.view {
            deadline = Some(self.entered_at + self.timeout);
        }
        if self.kth_highest((self.n - self.f) as usize) > self.view {
            let dwell = self.entered_at + MIN_DWELL * self.delta;
            deadline = Some(deadline.map_or(dwell, |d: u64| d.min(dwell)));
        }
        if let Some(at) = deadline.filter(|at| *at > now) {
            if self.timer_at.is_none_or(|t| t <= now || t > at) {
                self.timer_at = Some(at);
                step.set_timer = Some(at);
            }
        }
    }
}

//! Link state, FIFO queue and the time-advancing primitives shared by all
//! strategies. Every primitive is clamped to the trace horizon.

use std::collections::VecDeque;

use super::{advance_state, Delivery, LinkEvent, LinkParams, LinkState, Residency, SimError};
use crate::time::{serialization_nanos, Nanos};
use crate::traffic::{PacketEvent, TrafficTrace};

#[derive(Debug, Clone, Copy)]
struct Queued {
    seq: usize,
    arrival_ns: Nanos,
    size_bits: u64,
    /// Left over from a predictive tail.
    carried: bool,
}

pub(super) struct Engine<'a> {
    events: &'a [PacketEvent],
    params: &'a LinkParams,
    horizon: Nanos,
    cursor: usize,
    queue: VecDeque<Queued>,
    pub now: Nanos,
    pub state: LinkState,
    pub residency: Residency,
    refresh: bool,
    quiet_since_refresh: Nanos,
    refresh_left: Nanos,
    pub transmitted_bits: u64,
    pub packets: u64,
    pub max_delay: Nanos,
    delay_sum: u128,
    pub overloaded_units: u64,
    log: Option<Vec<Delivery>>,
}

impl<'a> Engine<'a> {
    pub fn new(
        trace: &'a TrafficTrace,
        params: &'a LinkParams,
        initial: LinkState,
        refresh: bool,
        record: bool,
    ) -> Self {
        Self {
            events: trace.events(),
            params,
            horizon: trace.duration_ns(),
            cursor: 0,
            queue: VecDeque::new(),
            now: 0,
            state: initial,
            residency: Residency::default(),
            refresh: refresh && params.t_r > 0 && params.refresh_period > 0,
            quiet_since_refresh: 0,
            refresh_left: 0,
            transmitted_bits: 0,
            packets: 0,
            max_delay: 0,
            delay_sum: 0,
            overloaded_units: 0,
            log: record.then(Vec::new),
        }
    }

    pub fn horizon(&self) -> Nanos {
        self.horizon
    }

    pub fn mean_delay_ns(&self) -> f64 {
        if self.packets == 0 {
            0.0
        } else {
            self.delay_sum as f64 / self.packets as f64
        }
    }

    pub fn take_log(&mut self) -> Vec<Delivery> {
        self.log.take().unwrap_or_default()
    }

    /// Bits not yet transmitted: the queue plus arrivals not yet admitted.
    pub fn backlog_bits(&self) -> u64 {
        self.queue.iter().map(|q| q.size_bits).sum::<u64>()
            + self.events[self.cursor..]
                .iter()
                .map(|e| e.size_bits)
                .sum::<u64>()
    }

    /// Queued bits, admitting everything that arrived before `before` first.
    pub fn queued_bits_before(&mut self, before: Nanos) -> u64 {
        self.admit(before);
        self.queue
            .iter()
            .filter(|q| q.arrival_ns < before)
            .map(|q| q.size_bits)
            .sum()
    }

    /// Marks everything currently queued as carry-over.
    pub fn mark_carried(&mut self) {
        for q in &mut self.queue {
            q.carried = true;
        }
    }

    fn admit(&mut self, before: Nanos) {
        while let Some(ev) = self.events.get(self.cursor) {
            if ev.arrival_ns >= before {
                break;
            }
            self.queue.push_back(Queued {
                seq: self.cursor,
                arrival_ns: ev.arrival_ns,
                size_bits: ev.size_bits,
                carried: false,
            });
            self.cursor += 1;
        }
    }

    fn transition(&mut self, event: LinkEvent) -> Result<(), SimError> {
        self.state = advance_state(self.state, event)?;
        Ok(())
    }

    /// Stays in the current state for `ns`, clamped to the horizon.
    fn spend(&mut self, ns: Nanos) -> Nanos {
        let ns = ns.min(self.horizon - self.now);
        self.residency.add(self.state, ns);
        self.now += ns;
        ns
    }

    fn spend_until(&mut self, t: Nanos) {
        if t > self.now {
            self.spend(t - self.now);
        }
    }

    /// Transmits queued packets FIFO. Only packets arriving before
    /// `eligible_before` are considered, and a packet is started only if it
    /// finishes by `deadline`. With `idle_wait` the link idles in `Active`
    /// for packets that have not arrived yet and until `deadline`.
    pub fn serve(&mut self, eligible_before: Nanos, deadline: Nanos, idle_wait: bool) {
        debug_assert_eq!(self.state, LinkState::Active);
        let deadline = deadline.min(self.horizon);
        loop {
            self.admit(eligible_before);
            let Some(head) = self.queue.front().copied() else {
                break;
            };
            let start = self.now.max(head.arrival_ns);
            if start > self.now && !idle_wait {
                break;
            }
            let finish = start + serialization_nanos(head.size_bits, self.params.line_rate_bps);
            if finish > deadline {
                break;
            }
            self.spend_until(start);
            self.spend_until(finish);
            self.queue.pop_front();
            let delay = finish - head.arrival_ns;
            self.transmitted_bits += head.size_bits;
            self.packets += 1;
            self.max_delay = self.max_delay.max(delay);
            self.delay_sum += delay as u128;
            if let Some(log) = &mut self.log {
                log.push(Delivery {
                    seq: head.seq,
                    arrival_ns: head.arrival_ns,
                    start_ns: start,
                    finish_ns: finish,
                    size_bits: head.size_bits,
                });
            }
        }
        if idle_wait {
            self.spend_until(deadline);
        }
    }

    pub fn sleep(&mut self) -> Result<(), SimError> {
        self.transition(LinkEvent::SleepRequest)?;
        self.spend(self.params.t_s);
        self.transition(LinkEvent::SleepDone)?;
        self.quiet_since_refresh = 0;
        Ok(())
    }

    pub fn wake(&mut self) -> Result<(), SimError> {
        if self.state == LinkState::Refresh {
            self.transition(LinkEvent::RefreshEnd)?;
            self.refresh_left = 0;
        }
        self.transition(LinkEvent::WakeRequest)?;
        self.spend(self.params.t_w);
        self.transition(LinkEvent::WakeDone)
    }

    pub fn is_low_power(&self) -> bool {
        matches!(self.state, LinkState::Quiet | LinkState::Refresh)
    }

    /// Stays in low power until `t`. With refresh enabled, every
    /// `refresh_period` of quiet time is followed by `t_r` of refresh; a
    /// refresh may span several calls and is cut short by a wake.
    pub fn dwell(&mut self, t: Nanos) -> Result<(), SimError> {
        debug_assert!(self.is_low_power());
        let t = t.min(self.horizon);
        while self.now < t {
            if !self.refresh {
                self.spend_until(t);
                break;
            }
            if self.state == LinkState::Refresh {
                let d = self.spend(self.refresh_left.min(t - self.now));
                self.refresh_left -= d;
                if self.refresh_left == 0 {
                    self.transition(LinkEvent::RefreshEnd)?;
                }
                continue;
            }
            let quiet = (self.params.refresh_period - self.quiet_since_refresh).min(t - self.now);
            self.spend(quiet);
            self.quiet_since_refresh += quiet;
            if self.quiet_since_refresh == self.params.refresh_period {
                self.transition(LinkEvent::RefreshStart)?;
                self.refresh_left = self.params.t_r;
                self.quiet_since_refresh = 0;
            }
        }
        Ok(())
    }

    /// Service time of the fresh (non-carried) burst waiting at `u0`.
    fn fresh_burst_nanos(&self, u0: Nanos) -> Nanos {
        let bits = self
            .queue
            .iter()
            .filter(|q| !q.carried && q.arrival_ns < u0)
            .map(|q| q.size_bits)
            .sum();
        serialization_nanos(bits, self.params.line_rate_bps)
    }

    /// One EEE burst unit `[u0, u1)`: send what arrived before `u0`, sleep,
    /// and wake so the link is active again at `u1`. Without `faithful` an
    /// idle link stays quiet through units that have nothing to send.
    pub fn eee_unit(&mut self, u0: Nanos, u1: Nanos, faithful: bool) -> Result<(), SimError> {
        let u1 = u1.min(self.horizon);
        debug_assert_eq!(self.now, u0);
        let full = u1 - u0;
        let t_s = self.params.t_s;
        let t_w = self.params.t_w;
        if self.state == LinkState::Active {
            self.admit(u0);
            let burst = self.fresh_burst_nanos(u0);
            if full > self.params.t_trans() && burst > full - self.params.t_trans() {
                self.overloaded_units += 1;
            }
            self.serve(u0, u1, false);
            if self.now + t_s + t_w <= u1 {
                self.sleep()?;
            } else {
                self.spend_until(u1);
                return Ok(());
            }
        }
        let busy = !self.queue.is_empty() || self.has_arrivals(u0, u1);
        if faithful || busy {
            self.dwell(u1 - t_w)?;
            self.wake()?;
        } else {
            self.dwell(u1)?;
        }
        debug_assert_eq!(self.now, u1);
        Ok(())
    }

    fn has_arrivals(&self, from: Nanos, to: Nanos) -> bool {
        let rest = &self.events[self.cursor..];
        let i = rest.partition_point(|e| e.arrival_ns < from);
        rest.get(i).is_some_and(|e| e.arrival_ns < to)
    }

    /// Predictive tail of a window: from `now` (the end of the learning
    /// interval) sleep until the link can be active at `tail_start`, then
    /// serve everything arriving before `w1` until `w1`.
    pub fn eeep_tail(&mut self, tail_start: Nanos, w1: Nanos) -> Result<(), SimError> {
        let now = self.now;
        let t_s = self.params.t_s;
        let t_w = self.params.t_w;
        if self.state == LinkState::Active {
            self.serve(now, w1, false);
            if self.now + t_s + t_w <= tail_start {
                self.sleep()?;
            }
        }
        if self.is_low_power() {
            let wake_at = tail_start.saturating_sub(t_w).max(self.now);
            self.dwell(wake_at)?;
            self.wake()?;
        }
        self.serve(w1, w1, true);
        Ok(())
    }

    /// Always-On: active for the whole horizon, sending on arrival.
    pub fn always_on(&mut self) {
        let end = self.horizon;
        self.serve(end, end, true);
    }

    /// Advances through the remaining time in the current state.
    pub fn finish(&mut self) {
        let end = self.horizon;
        self.spend_until(end);
    }
}

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ChannelModel, Endpoint, JamWindow, NetError, RegionLookup, Tier};
use crate::ids::RegionId;
use crate::sensors::{AttackKind, AttackScenario};

pub type EventId = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Timer,
    Message {
        tier: Tier,
        src: Endpoint,
        dst: Endpoint,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimEvent<P> {
    pub fire_at_ms: u64,
    pub sequence: u64,
    pub kind: EventKind,
    pub payload: P,
}

struct Queued<P>(SimEvent<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<P> Eq for Queued<P> {}
impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<P> Ord for Queued<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0.fire_at_ms, self.0.sequence).cmp(&(other.0.fire_at_ms, other.0.sequence))
    }
}

/// Message accounting. `sent = delivered + dropped + in_flight` at all times.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetCounters {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

impl NetCounters {
    pub fn in_flight(&self) -> u64 {
        self.sent - self.delivered - self.dropped
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_ms: u64,
    pub kind: String,
    pub src: String,
    pub dst: String,
    pub outcome: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Delivery {
    Scheduled {
        id: EventId,
        arrive_at_ms: u64,
        latency_ms: u64,
    },
    Dropped,
}

pub struct Engine<P> {
    now_ms: u64,
    next_sequence: u64,
    queue: BinaryHeap<Reverse<Queued<P>>>,
    jams: Vec<JamWindow>,
    counters: BTreeMap<Tier, NetCounters>,
    trace: Option<Vec<TraceRecord>>,
}

impl<P> Default for Engine<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Engine<P> {
    pub fn new() -> Self {
        Engine {
            now_ms: 0,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            jams: Vec::new(),
            counters: BTreeMap::new(),
            trace: None,
        }
    }

    /// Records every send, drop, delivery and timer in memory.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn jams(&self) -> &[JamWindow] {
        &self.jams
    }

    pub fn counters(&self, tier: Tier) -> NetCounters {
        self.counters.get(&tier).copied().unwrap_or_default()
    }

    pub fn total_counters(&self) -> NetCounters {
        self.counters
            .values()
            .fold(NetCounters::default(), |a, c| NetCounters {
                sent: a.sent + c.sent,
                delivered: a.delivered + c.delivered,
                dropped: a.dropped + c.dropped,
            })
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.trace.as_deref()
    }

    pub fn write_trace_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for r in self.trace.iter().flatten() {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    fn record(&mut self, time_ms: u64, kind: EventKind, outcome: &str) {
        if let Some(t) = self.trace.as_mut() {
            let (kind, src, dst) = match kind {
                EventKind::Timer => ("timer".to_string(), String::new(), String::new()),
                EventKind::Message { tier, src, dst } => {
                    (tier.to_string(), src.to_string(), dst.to_string())
                }
            };
            t.push(TraceRecord {
                time_ms,
                kind,
                src,
                dst,
                outcome: outcome.to_string(),
            });
        }
    }

    fn push(&mut self, at: u64, kind: EventKind, payload: P) -> EventId {
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Reverse(Queued(SimEvent {
            fire_at_ms: at,
            sequence,
            kind,
            payload,
        })));
        sequence
    }

    /// Enqueues a timer at `now + delay_ms`.
    pub fn schedule(&mut self, delay_ms: i64, payload: P) -> Result<EventId, NetError> {
        if delay_ms < 0 {
            return Err(NetError::NegativeDelay(delay_ms));
        }
        Ok(self.push(self.now_ms + delay_ms as u64, EventKind::Timer, payload))
    }

    /// Enqueues a timer at an absolute time, clamped to the present.
    pub fn schedule_at(&mut self, at_ms: u64, payload: P) -> EventId {
        self.push(at_ms.max(self.now_ms), EventKind::Timer, payload)
    }

    /// Sends `payload` over `channel`. Active jam windows on the channel's
    /// tier (and `region`) raise the loss to `1 − (1 − p)(1 − b)` with `b`
    /// the largest active boost, and add the largest active delay boost.
    /// Latency is rounded to whole milliseconds.
    pub fn deliver<R: Rng + ?Sized>(
        &mut self,
        channel: &ChannelModel,
        region: Option<RegionId>,
        src: Endpoint,
        dst: Endpoint,
        payload: P,
        rng: &mut R,
    ) -> Delivery {
        let now = self.now_ms;
        let (boost, delay) = self
            .jams
            .iter()
            .filter(|j| j.affects(channel.tier, region, now))
            .fold((0.0f64, 0.0f64), |(b, d), j| {
                (b.max(j.loss_boost), d.max(j.delay_boost_ms))
            });
        let loss = 1.0 - (1.0 - channel.loss_probability) * (1.0 - boost);
        let kind = EventKind::Message {
            tier: channel.tier,
            src,
            dst,
        };
        let c = self.counters.entry(channel.tier).or_default();
        c.sent += 1;
        if loss > 0.0 && rng.random::<f64>() < loss {
            c.dropped += 1;
            self.record(now, kind, "dropped");
            return Delivery::Dropped;
        }
        let latency = (channel.sample_latency(rng) + delay).round() as u64;
        let id = self.push(now + latency, kind, payload);
        self.record(now, kind, "sent");
        Delivery::Scheduled {
            id,
            arrive_at_ms: now + latency,
            latency_ms: latency,
        }
    }

    /// Registers a jam window directly.
    pub fn add_jam(&mut self, jam: JamWindow) -> Result<(), NetError> {
        jam.validate()?;
        self.jams.push(jam);
        Ok(())
    }

    /// Turns a CommJam campaign into jam windows on `tiers`, one per region
    /// containing a targeted vehicle. Times before zero are clipped.
    pub fn apply_jam(
        &mut self,
        scenario: &AttackScenario,
        tiers: &[Tier],
        region_of: &(impl RegionLookup + ?Sized),
        loss_boost: f64,
        delay_boost_ms: f64,
    ) -> Result<Vec<JamWindow>, NetError> {
        if scenario.kind != AttackKind::CommJam {
            return Err(NetError::NotCommJam(scenario.kind));
        }
        let regions: std::collections::BTreeSet<RegionId> = scenario
            .target_vehicles
            .iter()
            .filter_map(|v| region_of.region_of(*v))
            .collect();
        let mut out = Vec::new();
        for &tier in tiers {
            for &r in &regions {
                let jam = JamWindow {
                    tier,
                    region: Some(r),
                    start_ms: scenario.start_ms.max(0) as u64,
                    end_ms: scenario.end_ms.max(0) as u64,
                    loss_boost,
                    delay_boost_ms,
                };
                self.add_jam(jam.clone())?;
                out.push(jam);
            }
        }
        Ok(out)
    }

    /// Removes and returns the next event if it fires at or before `t_end`,
    /// advancing the clock to its time.
    pub fn pop_until(&mut self, t_end: u64) -> Option<SimEvent<P>> {
        if self
            .queue
            .peek()
            .is_none_or(|Reverse(Queued(e))| e.fire_at_ms > t_end)
        {
            return None;
        }
        let Reverse(Queued(ev)) = self.queue.pop()?;
        self.now_ms = ev.fire_at_ms;
        match ev.kind {
            EventKind::Message { tier, .. } => {
                self.counters.entry(tier).or_default().delivered += 1;
                self.record(ev.fire_at_ms, ev.kind, "delivered");
            }
            EventKind::Timer => self.record(ev.fire_at_ms, ev.kind, "fired"),
        }
        Some(ev)
    }

    /// Dispatches every event due by `t_end` to `handler`, which may schedule
    /// more. Leaves the clock at `t_end` and returns the number dispatched.
    pub fn run_until<F: FnMut(&mut Self, SimEvent<P>)>(
        &mut self,
        t_end: u64,
        mut handler: F,
    ) -> Result<u64, NetError> {
        if t_end < self.now_ms {
            return Err(NetError::TimeInPast {
                now: self.now_ms,
                target: t_end,
            });
        }
        let mut n = 0;
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev);
            n += 1;
        }
        self.now_ms = t_end;
        Ok(n)
    }
}

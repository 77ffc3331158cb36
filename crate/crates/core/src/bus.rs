//! Slot-based frame transport on a millisecond clock.
//!
//! A frame occupies one transmission slot of `t_msg` milliseconds and is
//! delivered at the start of its slot. Broadcast frames reach every module in
//! the same millisecond; sequential frames reach only the module named by
//! their identifier.

use crate::approx::Term;
use crate::frame::{decode_frame, Frame, FrameContext, FrameError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BusError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("slot conflict at {time_ms} ms")]
    SlotConflict { time_ms: u64 },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BusMode {
    Sequential,
    Broadcast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusConfig {
    pub t_msg_ms: u64,
    pub mode: BusMode,
}

impl BusConfig {
    pub fn new(t_msg_ms: u64, mode: BusMode) -> Result<Self, BusError> {
        if t_msg_ms == 0 {
            return Err(BusError::InvalidInput("t_msg must be positive".into()));
        }
        Ok(BusConfig { t_msg_ms, mode })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Recipients {
    All,
    Module(usize),
}

/// Anything the bus can carry. Frames are the wire format; exact terms let
/// unquantized runs share the same delivery path.
pub trait Payload: Clone {
    fn seq_id(&self) -> Option<usize>;
    fn term(&self, ctx: &FrameContext) -> Result<Term, FrameError>;
}

impl Payload for Frame {
    fn seq_id(&self) -> Option<usize> {
        self.seq_id.map(usize::from)
    }

    fn term(&self, ctx: &FrameContext) -> Result<Term, FrameError> {
        decode_frame(self, ctx)
    }
}

impl Payload for Term {
    fn seq_id(&self) -> Option<usize> {
        match self {
            Term::Seq(s) => Some(s.module),
            _ => None,
        }
    }

    fn term(&self, _ctx: &FrameContext) -> Result<Term, FrameError> {
        Ok(*self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusEvent<P> {
    pub send_time: u64,
    pub arrival_time: u64,
    pub slot_ms: u64,
    pub payload: P,
    pub recipients: Recipients,
}

/// Events ordered by arrival time, with non-overlapping slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline<P> {
    events: Vec<BusEvent<P>>,
    horizon: u64,
}

impl<P> Default for Timeline<P> {
    fn default() -> Self {
        Timeline {
            events: Vec::new(),
            horizon: 0,
        }
    }
}

impl<P: Payload> Timeline<P> {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[BusEvent<P>] {
        &self.events
    }

    /// End of the last occupied slot.
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Combines two timelines in global time order; overlapping slots are
    /// rejected.
    pub fn merge(mut self, other: Timeline<P>) -> Result<Self, BusError> {
        self.events.extend(other.events);
        self.events.sort_by_key(|e| e.send_time);
        let mut busy_until = 0;
        for (i, e) in self.events.iter().enumerate() {
            if i > 0 && e.send_time < busy_until {
                return Err(BusError::SlotConflict {
                    time_ms: e.send_time,
                });
            }
            busy_until = e.send_time + e.slot_ms;
        }
        self.horizon = self.horizon.max(other.horizon);
        Ok(self)
    }

    /// Arrival times of every event that reaches `module`.
    pub fn arrivals_for(&self, module: usize) -> Vec<u64> {
        self.events
            .iter()
            .filter(|e| reaches(e.recipients, module))
            .map(|e| e.arrival_time)
            .collect()
    }
}

fn reaches(r: Recipients, module: usize) -> bool {
    match r {
        Recipients::All => true,
        Recipients::Module(m) => m == module,
    }
}

/// Frame `i` goes out at `start + i·t_msg` and arrives in the same slot.
pub fn schedule<P: Payload>(frames: &[P], config: BusConfig, start: u64) -> Result<Timeline<P>, BusError> {
    if frames.is_empty() {
        return Err(BusError::InvalidInput("nothing to schedule".into()));
    }
    let events = frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let recipients = match config.mode {
                BusMode::Broadcast => Recipients::All,
                BusMode::Sequential => Recipients::Module(f.seq_id().ok_or_else(|| {
                    BusError::Protocol(format!("sequential frame {i} has no identifier"))
                })?),
            };
            let send_time = start + i as u64 * config.t_msg_ms;
            Ok(BusEvent {
                send_time,
                arrival_time: send_time,
                slot_ms: config.t_msg_ms,
                payload: f.clone(),
                recipients,
            })
        })
        .collect::<Result<Vec<_>, BusError>>()?;
    let horizon = start + frames.len() as u64 * config.t_msg_ms;
    Ok(Timeline { events, horizon })
}

/// Receives one delivered payload.
pub trait FrameSink<P> {
    fn on_frame(&mut self, time_ms: u64, module: usize, payload: &P) -> Result<(), BusError>;
}

impl<P, F> FrameSink<P> for F
where
    F: FnMut(u64, usize, &P) -> Result<(), BusError>,
{
    fn on_frame(&mut self, time_ms: u64, module: usize, payload: &P) -> Result<(), BusError> {
        self(time_ms, module, payload)
    }
}

/// Hands one event to every module it reaches, in module order.
pub fn deliver<P, S: FrameSink<P>>(event: &BusEvent<P>, n_modules: usize, sink: &mut S) -> Result<(), BusError> {
    match event.recipients {
        Recipients::All => {
            for m in 0..n_modules {
                sink.on_frame(event.arrival_time, m, &event.payload)?;
            }
            Ok(())
        }
        Recipients::Module(m) if m < n_modules => sink.on_frame(event.arrival_time, m, &event.payload),
        Recipients::Module(m) => Err(BusError::InvalidInput(format!(
            "recipient {m} outside 0..{n_modules}"
        ))),
    }
}

pub fn replay<P: Payload, S: FrameSink<P>>(
    timeline: &Timeline<P>,
    n_modules: usize,
    sink: &mut S,
) -> Result<(), BusError> {
    timeline
        .events
        .iter()
        .try_for_each(|e| deliver(e, n_modules, sink))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{DctTerm, SeqRef};
    use crate::frame::{encode_seq_ref, encode_term};
    use proptest::prelude::*;

    fn ctx() -> FrameContext {
        FrameContext::new(16, 70.0)
    }

    fn seq_frames(n: usize) -> Vec<Frame> {
        (0..n).map(|i| encode_seq_ref(i, 35.0, &ctx()).unwrap()).collect()
    }

    fn bcast(a: f64) -> Frame {
        encode_term(&DctTerm { index: 0, amplitude: a }.into(), &ctx()).unwrap()
    }

    fn record<P: Payload>(tl: &Timeline<P>, n: usize) -> Vec<(u64, usize)> {
        let mut calls = Vec::new();
        replay(tl, n, &mut |t: u64, m: usize, _: &P| {
            calls.push((t, m));
            Ok(())
        })
        .unwrap();
        calls
    }

    #[test]
    fn single_broadcast_reaches_everyone_at_start() {
        let cfg = BusConfig::new(5, BusMode::Broadcast).unwrap();
        let tl = schedule(&[bcast(1.0)], cfg, 100).unwrap();
        let calls = record(&tl, 16);
        assert_eq!(calls, (0..16).map(|m| (100, m)).collect::<Vec<_>>());
        assert_eq!(tl.horizon(), 105);
    }

    #[test]
    fn sequential_refresh_spans_n_minus_one_slots() {
        let cfg = BusConfig::new(5, BusMode::Sequential).unwrap();
        let tl = schedule(&seq_frames(16), cfg, 0).unwrap();
        let first = tl.arrivals_for(0)[0];
        let last = tl.arrivals_for(15)[0];
        assert_eq!(last - first, 75);
        let calls = record(&tl, 16);
        for m in 0..16 {
            assert_eq!(calls.iter().filter(|c| c.1 == m).count(), 1);
        }
    }

    #[test]
    fn broadcast_slot_arithmetic() {
        let cfg = BusConfig::new(10, BusMode::Broadcast).unwrap();
        let tl = schedule(&[bcast(0.1), bcast(0.2), bcast(0.3)], cfg, 7).unwrap();
        let times: Vec<_> = tl.events().iter().map(|e| e.arrival_time).collect();
        assert_eq!(times, [7, 17, 27]);
        assert!(tl.events().iter().all(|e| e.recipients == Recipients::All));
    }

    #[test]
    fn sequential_needs_identifier() {
        let cfg = BusConfig::new(5, BusMode::Sequential).unwrap();
        assert!(matches!(schedule(&[bcast(1.0)], cfg, 0), Err(BusError::Protocol(_))));
        assert!(BusConfig::new(0, BusMode::Broadcast).is_err());
        assert!(schedule::<Frame>(&[], cfg, 0).is_err());
    }

    #[test]
    fn empty_timeline_calls_nothing() {
        assert!(record(&Timeline::<Frame>::empty(), 16).is_empty());
    }

    #[test]
    fn terms_travel_like_frames() {
        let cfg = BusConfig::new(5, BusMode::Sequential).unwrap();
        let terms: Vec<Term> = (0..4)
            .map(|m| SeqRef { module: m, height: 10.0 }.into())
            .collect();
        let tl = schedule(&terms, cfg, 0).unwrap();
        assert_eq!(record(&tl, 4), [(0, 0), (5, 1), (10, 2), (15, 3)]);
    }

    #[test]
    fn merge_interleaves_and_rejects_overlap() {
        let cfg = BusConfig::new(10, BusMode::Broadcast).unwrap();
        let a = schedule(&[bcast(0.1), bcast(0.2)], cfg, 0).unwrap();
        let b = schedule(&[bcast(0.3), bcast(0.4)], cfg, 100).unwrap();
        let merged = b.clone().merge(a.clone()).unwrap();
        let times: Vec<_> = merged.events().iter().map(|e| e.arrival_time).collect();
        assert_eq!(times, [0, 10, 100, 110]);
        let clash = schedule(&[bcast(0.5)], cfg, 15).unwrap();
        assert_eq!(a.merge(clash), Err(BusError::SlotConflict { time_ms: 15 }));
    }

    #[test]
    fn out_of_range_recipient() {
        let cfg = BusConfig::new(5, BusMode::Sequential).unwrap();
        let tl = schedule(&seq_frames(4), cfg, 0).unwrap();
        let mut sink = |_: u64, _: usize, _: &Frame| Ok(());
        assert!(replay(&tl, 3, &mut sink).is_err());
    }

    proptest! {
        #[test]
        fn spreads(n in 2usize..=16, t_msg in 1u64..50, start in 0u64..1000) {
            let b = BusConfig::new(t_msg, BusMode::Broadcast).unwrap();
            let tl = schedule(&[bcast(1.0)], b, start).unwrap();
            let calls = record(&tl, n);
            prop_assert!(calls.iter().all(|c| c.0 == start));
            prop_assert_eq!(calls.len(), n);

            let s = BusConfig::new(t_msg, BusMode::Sequential).unwrap();
            let tl = schedule(&seq_frames(n), s, start).unwrap();
            let arrivals: Vec<u64> = (0..n).map(|m| tl.arrivals_for(m)[0]).collect();
            prop_assert_eq!(arrivals[n - 1] - arrivals[0], (n as u64 - 1) * t_msg);
            prop_assert_eq!(schedule(&seq_frames(n), s, start).unwrap(), tl);
        }

        #[test]
        fn merged_bursts_stay_time_ordered(starts in prop::collection::btree_set(0u64..50, 1..6)) {
            let cfg = BusConfig::new(3, BusMode::Broadcast).unwrap();
            let mut tl = Timeline::empty();
            for s in starts.iter().rev() {
                let burst = schedule(&[bcast(0.5), bcast(-0.5)], cfg, s * 10).unwrap();
                tl = tl.merge(burst).unwrap();
            }
            let mut oracle: Vec<u64> = starts.iter().flat_map(|s| [s * 10, s * 10 + 3]).collect();
            oracle.sort();
            let times: Vec<u64> = record(&tl, 1).into_iter().map(|c| c.0).collect();
            prop_assert_eq!(times, oracle);
        }
    }
}

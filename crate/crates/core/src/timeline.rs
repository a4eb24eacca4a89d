//! Minute-resolution activity timelines and their hourly expansion.
//!
//! Generators describe an EV as a sorted list of [`Segment`]s. Hour `k` of a
//! day covers the clock interval `[k-1:00, k:00)` and gets one label:
//!
//! 1. an hour in which the car reaches the tracked charger is incoming (2);
//! 2. otherwise any driving away from the charger makes it in transit (3);
//! 3. otherwise any part of an incoming leg makes it incoming (2);
//! 4. otherwise any connected time makes it connected (1);
//! 5. an hour with none of these is away (3).
//!
//! Rule 1 keeps every away period closed by at least one incoming hour, so
//! the state machine never jumps from 3 straight to 1.

use serde::{Deserialize, Serialize};

use crate::calendar::{Calendar, SimDay, MINUTES_PER_DAY};
use crate::config::ChargerId;

pub const HOURS_PER_DAY: usize = 24;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TimelineError {
    #[error("segment [{start}, {end}) is empty")]
    Empty { start: i64, end: i64 },
    #[error("segment starting at minute {start} overlaps the previous one ending at {prev_end}")]
    Overlap { start: i64, prev_end: i64 },
    #[error("inconsistent timeline at hour {hour}: {reason}")]
    Inconsistent { hour: i64, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvState {
    Connected = 1,
    Incoming = 2,
    Away = 3,
}

impl EvState {
    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(EvState::Connected),
            2 => Some(EvState::Incoming),
            3 => Some(EvState::Away),
            _ => None,
        }
    }

    /// Legal hour-to-hour moves.
    pub fn can_follow(self, prev: EvState) -> bool {
        use EvState::*;
        matches!(
            (prev, self),
            (Connected, Connected)
                | (Connected, Incoming)
                | (Connected, Away)
                | (Away, Away)
                | (Away, Incoming)
                | (Incoming, Incoming)
                | (Incoming, Connected)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentKind {
    /// Plugged in at the tracked charger until `end`.
    Connected { charger: ChargerId, required_soc: f64 },
    /// Driving away from the tracked charger.
    Outbound,
    /// Parked elsewhere, or not tracked.
    Away,
    /// Driving toward the tracked charger, arriving at `end`.
    Incoming { charger: ChargerId, arrival_soc: f64 },
}

/// Half-open minute interval measured from the start of the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: i64,
    pub end: i64,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn new(start: i64, end: i64, kind: SegmentKind) -> Self {
        Self { start, end, kind }
    }

    fn overlaps(&self, lo: i64, hi: i64) -> bool {
        self.start < hi && self.end > lo
    }
}

/// Sorted, non-overlapping segments. Gaps read as [`SegmentKind::Away`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timeline {
    segments: Vec<Segment>,
}

impl Timeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, segment: Segment) -> Result<(), TimelineError> {
        if segment.start >= segment.end {
            return Err(TimelineError::Empty {
                start: segment.start,
                end: segment.end,
            });
        }
        if let Some(prev) = self.segments.last() {
            if segment.start < prev.end {
                return Err(TimelineError::Overlap {
                    start: segment.start,
                    prev_end: prev.end,
                });
            }
        }
        self.segments.push(segment);
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Segments touching `[lo, hi)`.
    pub fn window(&self, lo: i64, hi: i64) -> &[Segment] {
        let first = self.segments.partition_point(|s| s.end <= lo);
        let last = self.segments.partition_point(|s| s.start < hi);
        &self.segments[first..last.max(first)]
    }

    /// Hourly records for the first `days` days of the calendar.
    pub fn expand(&self, calendar: &Calendar, days: u32) -> Result<Vec<EvHourRecord>, TimelineError> {
        let mut out = Vec::with_capacity(days as usize * HOURS_PER_DAY);
        for day in calendar.days(days) {
            let lo = day.start_minute();
            out.extend(expand_day(&day, self.window(lo, lo + MINUTES_PER_DAY))?);
        }
        Ok(out)
    }
}

/// One row of an EV profile. Integers stay raw so that foreign files can be
/// loaded and then judged by the validator.
#[derive(Debug, Clone, PartialEq)]
pub struct EvHourRecord {
    pub month: u32,
    pub hour: u32,
    pub day_type: u32,
    pub ev_state: u32,
    pub charger: Option<String>,
    pub est_departure: Option<u32>,
    pub required_soc_departure: Option<f64>,
    pub est_arrival: Option<u32>,
    pub est_soc_arrival: Option<f64>,
}

impl EvHourRecord {
    pub fn state(&self) -> Option<EvState> {
        EvState::from_code(self.ev_state)
    }
}

/// SoC values are emitted with one decimal. Flooring keeps them inside the
/// `[0, cap]` range the generator guarantees; the epsilon absorbs float noise
/// such as 72.49999999.
pub fn quantize_soc(pct: f64) -> f64 {
    (pct * 10.0 + 1e-6).floor().max(0.0) / 10.0
}

/// Label for absolute hour `hour` given the segments that touch it.
pub fn label_hour(hour: i64, segments: &[Segment]) -> EvState {
    let (lo, hi) = (hour * 60, hour * 60 + 60);
    let touching = || segments.iter().filter(move |s| s.overlaps(lo, hi));
    let arrives = touching().any(|s| matches!(s.kind, SegmentKind::Incoming { .. }) && s.end <= hi);
    if arrives {
        return EvState::Incoming;
    }
    if touching().any(|s| matches!(s.kind, SegmentKind::Outbound)) {
        return EvState::Away;
    }
    if touching().any(|s| matches!(s.kind, SegmentKind::Incoming { .. })) {
        return EvState::Incoming;
    }
    if touching().any(|s| matches!(s.kind, SegmentKind::Connected { .. })) {
        return EvState::Connected;
    }
    EvState::Away
}

/// Expands the segments touching one day into its 24 hourly records.
///
/// `segments` must be sorted and non-overlapping; they may start before and
/// end after the day (the carry from neighbouring days).
pub fn expand_day(day: &SimDay, segments: &[Segment]) -> Result<Vec<EvHourRecord>, TimelineError> {
    for pair in segments.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(TimelineError::Overlap {
                start: pair[1].start,
                prev_end: pair[0].end,
            });
        }
    }
    let first_hour = i64::from(day.index) * HOURS_PER_DAY as i64;
    let mut records = Vec::with_capacity(HOURS_PER_DAY);
    for k in 0..HOURS_PER_DAY as i64 {
        let hour = first_hour + k;
        let (lo, hi) = (hour * 60, hour * 60 + 60);
        let state = label_hour(hour, segments);
        let mut record = EvHourRecord {
            month: u32::from(day.date.month()),
            hour: k as u32 + 1,
            day_type: u32::from(day.day_type()),
            ev_state: state.code(),
            charger: None,
            est_departure: None,
            required_soc_departure: None,
            est_arrival: None,
            est_soc_arrival: None,
        };
        match state {
            EvState::Connected => {
                let (end, charger, required_soc) = segments
                    .iter()
                    .filter(|s| s.overlaps(lo, hi))
                    .find_map(|s| match s.kind {
                        SegmentKind::Connected { charger, required_soc } => Some((s.end, charger, required_soc)),
                        _ => None,
                    })
                    .ok_or(TimelineError::Inconsistent {
                        hour,
                        reason: "connected hour without a connected segment",
                    })?;
                // the departure hour itself is in transit, so the last
                // connected hour is the one before it
                let remaining = end.div_euclid(60) - hour;
                if remaining < 1 {
                    return Err(TimelineError::Inconsistent {
                        hour,
                        reason: "connected session ends inside a connected hour",
                    });
                }
                record.charger = Some(charger.to_string());
                record.est_departure = Some(remaining as u32);
                record.required_soc_departure = Some(quantize_soc(required_soc));
            }
            EvState::Incoming => {
                let (end, charger, arrival_soc) = segments
                    .iter()
                    .filter(|s| s.overlaps(lo, hi))
                    .find_map(|s| match s.kind {
                        SegmentKind::Incoming { charger, arrival_soc } => Some((s.end, charger, arrival_soc)),
                        _ => None,
                    })
                    .ok_or(TimelineError::Inconsistent {
                        hour,
                        reason: "incoming hour without an incoming segment",
                    })?;
                // the hour containing the arrival reads 1
                let remaining = (end + 59).div_euclid(60) - hour;
                record.charger = Some(charger.to_string());
                record.est_arrival = Some(remaining as u32);
                record.est_soc_arrival = Some(quantize_soc(arrival_soc));
            }
            EvState::Away => {}
        }
        records.push(record);
    }
    Ok(records)
}

//! Summary statistics over hourly records and trip logs.

use std::collections::BTreeMap;

use crate::timeline::{EvHourRecord, EvState, HOURS_PER_DAY};

/// Maximal runs of consecutive connected hours, by length.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunLengthHistogram(pub BTreeMap<u32, u64>);

impl RunLengthHistogram {
    pub fn total_hours(&self) -> u64 {
        self.0.iter().map(|(len, n)| u64::from(*len) * n).sum()
    }

    pub fn runs(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn longest(&self) -> Option<u32> {
        self.0.keys().next_back().copied()
    }

    /// Most frequent length; the shorter one wins a tie.
    pub fn modal_length(&self) -> Option<u32> {
        let best = self.0.values().copied().max()?;
        self.0.iter().find(|(_, n)| **n == best).map(|(len, _)| *len)
    }

    pub fn merge(&mut self, other: &RunLengthHistogram) {
        for (len, n) in &other.0 {
            *self.0.entry(*len).or_default() += n;
        }
    }
}

pub fn connection_run_lengths(records: &[EvHourRecord]) -> RunLengthHistogram {
    let mut hist = RunLengthHistogram::default();
    let mut run = 0u32;
    for r in records {
        if r.state() == Some(EvState::Connected) {
            run += 1;
        } else if run > 0 {
            *hist.0.entry(run).or_default() += 1;
            run = 0;
        }
    }
    if run > 0 {
        *hist.0.entry(run).or_default() += 1;
    }
    hist
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DayClass {
    /// Day types 1 to 5.
    Weekday,
    /// Day types 6 and 7, and holidays (8).
    Weekend,
}

impl DayClass {
    pub fn of(day_type: u32) -> Self {
        if (1..=5).contains(&day_type) {
            DayClass::Weekday
        } else {
            DayClass::Weekend
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DayClass::Weekday => "weekday",
            DayClass::Weekend => "weekend",
        }
    }
}

/// Share of days on which the EV is connected at each hour.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HourlyConnectionProfile {
    /// Connected counts per class, indexed by `hour - 1`.
    connected: BTreeMap<DayClass, [u64; HOURS_PER_DAY]>,
    /// Observed hours per class, indexed the same way.
    observed: BTreeMap<DayClass, [u64; HOURS_PER_DAY]>,
}

impl HourlyConnectionProfile {
    /// Fraction for the 1-based `hour` column value; 0 when never observed.
    pub fn fraction(&self, class: DayClass, hour: u32) -> f64 {
        let i = hour as usize - 1;
        let seen = self.observed.get(&class).map_or(0, |a| a[i]);
        if seen == 0 {
            return 0.0;
        }
        self.connected.get(&class).map_or(0, |a| a[i]) as f64 / seen as f64
    }

    /// Fraction at clock time `h:00`, which falls in hour `h + 1`.
    pub fn at_clock(&self, class: DayClass, clock_hour: u32) -> f64 {
        self.fraction(class, clock_hour + 1)
    }

    pub fn days(&self, class: DayClass) -> u64 {
        self.observed.get(&class).map_or(0, |a| a[0])
    }

    pub fn merge(&mut self, other: &HourlyConnectionProfile) {
        for (target, source) in [
            (&mut self.connected, &other.connected),
            (&mut self.observed, &other.observed),
        ] {
            for (class, counts) in source {
                let row = target.entry(*class).or_insert([0; HOURS_PER_DAY]);
                for (a, b) in row.iter_mut().zip(counts) {
                    *a += b;
                }
            }
        }
    }
}

pub fn hourly_profile(records: &[EvHourRecord]) -> HourlyConnectionProfile {
    let mut p = HourlyConnectionProfile::default();
    for r in records {
        if !(1..=HOURS_PER_DAY as u32).contains(&r.hour) {
            continue;
        }
        let class = DayClass::of(r.day_type);
        let i = r.hour as usize - 1;
        p.observed.entry(class).or_insert([0; HOURS_PER_DAY])[i] += 1;
        let connected = p.connected.entry(class).or_insert([0; HOURS_PER_DAY]);
        if r.state() == Some(EvState::Connected) {
            connected[i] += 1;
        }
    }
    p
}

pub const TRIP_BIN_MINUTES: u32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TripDurationSummary {
    pub count: usize,
    pub min: Option<u32>,
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
    pub max: Option<u32>,
    /// Share of trips lasting 10 to 60 minutes inclusive.
    pub share_10_60: Option<f64>,
    /// Trips per 10-minute bin, keyed by the bin's first minute.
    pub histogram: BTreeMap<u32, u64>,
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[u32], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    f64::from(sorted[lo]) * (1.0 - frac) + f64::from(sorted[hi]) * frac
}

pub fn trip_duration_stats(durations: &[u32]) -> TripDurationSummary {
    let mut sorted = durations.to_vec();
    sorted.sort_unstable();
    let mut histogram = BTreeMap::new();
    for d in &sorted {
        *histogram.entry(d / TRIP_BIN_MINUTES * TRIP_BIN_MINUTES).or_default() += 1;
    }
    if sorted.is_empty() {
        return TripDurationSummary {
            count: 0,
            min: None,
            q25: None,
            median: None,
            q75: None,
            max: None,
            share_10_60: None,
            histogram,
        };
    }
    let in_band = sorted.iter().filter(|d| (10..=60).contains(*d)).count();
    TripDurationSummary {
        count: sorted.len(),
        min: sorted.first().copied(),
        q25: Some(quantile(&sorted, 0.25)),
        median: Some(quantile(&sorted, 0.5)),
        q75: Some(quantile(&sorted, 0.75)),
        max: sorted.last().copied(),
        share_10_60: Some(in_band as f64 / sorted.len() as f64),
        histogram,
    }
}

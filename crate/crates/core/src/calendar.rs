//! Synthetic 365-day calendar.
//!
//! The output schema has no day-of-month column, so only the month label and
//! the weekday phase matter. Every simulated year has exactly 365 days with
//! February fixed at 28; the horizon simply wraps from 31 December to
//! 1 January.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const DAYS_PER_YEAR: u32 = 365;
pub const MINUTES_PER_DAY: i64 = 1440;

const MONTH_LENGTHS: [u8; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid month-day `{0}` (expected MM-DD within a 365-day year)")]
pub struct MonthDayError(pub String);

/// A calendar date without a year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthDay {
    month: u8,
    day: u8,
}

impl MonthDay {
    pub fn new(month: u8, day: u8) -> Result<Self, MonthDayError> {
        if (1..=12).contains(&month) && day >= 1 && day <= MONTH_LENGTHS[usize::from(month) - 1] {
            Ok(Self { month, day })
        } else {
            Err(MonthDayError(format!("{month:02}-{day:02}")))
        }
    }

    pub fn month(self) -> u8 {
        self.month
    }

    pub fn day(self) -> u8 {
        self.day
    }

    /// Zero-based position within the year.
    pub fn ordinal(self) -> u32 {
        let before: u32 = MONTH_LENGTHS[..usize::from(self.month) - 1]
            .iter()
            .map(|&d| u32::from(d))
            .sum();
        before + u32::from(self.day) - 1
    }

    pub fn from_ordinal(ordinal: u32) -> Self {
        let mut rest = ordinal % DAYS_PER_YEAR;
        for (i, &len) in MONTH_LENGTHS.iter().enumerate() {
            if rest < u32::from(len) {
                return Self {
                    month: i as u8 + 1,
                    day: rest as u8 + 1,
                };
            }
            rest -= u32::from(len);
        }
        unreachable!("ordinal reduced modulo 365")
    }
}

impl Default for MonthDay {
    fn default() -> Self {
        Self { month: 1, day: 1 }
    }
}

impl fmt::Display for MonthDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}-{:02}", self.month, self.day)
    }
}

impl FromStr for MonthDay {
    type Err = MonthDayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || MonthDayError(s.to_string());
        let (m, d) = s.trim().split_once('-').ok_or_else(err)?;
        let month = m.parse().map_err(|_| err())?;
        let day = d.parse().map_err(|_| err())?;
        Self::new(month, day).map_err(|_| err())
    }
}

impl Serialize for MonthDay {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthDay {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// ISO weekday, 1 = Monday ... 7 = Sunday.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weekday(u8);

impl Weekday {
    pub const MONDAY: Weekday = Weekday(1);
    pub const SATURDAY: Weekday = Weekday(6);
    pub const SUNDAY: Weekday = Weekday(7);

    pub fn new(iso: u8) -> Option<Self> {
        (1..=7).contains(&iso).then_some(Self(iso))
    }

    pub fn iso(self) -> u8 {
        self.0
    }

    pub fn is_weekend(self) -> bool {
        self.0 >= 6
    }

    fn advance(self, days: u32) -> Self {
        Self(((u32::from(self.0) - 1 + days) % 7) as u8 + 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HolidayCalendar(BTreeSet<MonthDay>);

impl HolidayCalendar {
    pub fn contains(&self, date: MonthDay) -> bool {
        self.0.contains(&date)
    }
}

impl FromIterator<MonthDay> for HolidayCalendar {
    fn from_iter<I: IntoIterator<Item = MonthDay>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// One day of the simulation horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimDay {
    pub index: u32,
    pub date: MonthDay,
    pub weekday: Weekday,
    pub holiday: bool,
}

impl SimDay {
    pub fn start_minute(&self) -> i64 {
        i64::from(self.index) * MINUTES_PER_DAY
    }

    /// Weekends and holidays follow the weekend routine.
    pub fn is_rest_day(&self) -> bool {
        self.holiday || self.weekday.is_weekend()
    }

    pub fn day_type(&self) -> u8 {
        if self.holiday {
            8
        } else {
            self.weekday.iso()
        }
    }
}

/// Day type column value: 8 for holidays, otherwise the ISO weekday.
pub fn day_type_of(date: MonthDay, weekday: Weekday, holidays: &HolidayCalendar) -> u8 {
    if holidays.contains(date) {
        8
    } else {
        weekday.iso()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Calendar {
    start: MonthDay,
    start_weekday: Weekday,
    holidays: HolidayCalendar,
}

impl Calendar {
    pub fn new(start: MonthDay, start_weekday: Weekday, holidays: HolidayCalendar) -> Self {
        Self {
            start,
            start_weekday,
            holidays,
        }
    }

    pub fn day(&self, index: u32) -> SimDay {
        let date = MonthDay::from_ordinal(self.start.ordinal() + index);
        SimDay {
            index,
            date,
            weekday: self.start_weekday.advance(index),
            holiday: self.holidays.contains(date),
        }
    }

    pub fn days(&self, count: u32) -> impl Iterator<Item = SimDay> + '_ {
        (0..count).map(|i| self.day(i))
    }
}

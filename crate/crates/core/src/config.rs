//! Scenario configuration: parsing, normalization and validation.
//!
//! A scenario is a single TOML document. See `docs/config-reference.md` for
//! the grammar and `examples/portugal.toml` for a commented example.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::calendar::{Calendar, HolidayCalendar, MonthDay, Weekday};
use crate::report::{Finding, FindingCode, ValidationReport};

/// Sums within this distance of 1 are accepted as-is.
pub const SUM_EPSILON: f64 = 1e-9;
/// Sums within this distance of 1 are normalized with a warning; anything
/// further out is fatal.
pub const NORMALIZE_TOLERANCE: f64 = 0.15;

/// Upper-case variable names used by the original tool, mapped to the
/// document key that carries each of them.
pub const VARIABLE_KEYS: [(&str, &str); 18] = [
    ("ROTINA_CHANGE", "routine_change"),
    ("MAX_BATTERY_CAPACITY", "max_soc_cap"),
    ("CHARGER_CHANGE", "charge_during_travel"),
    ("YEARS", "years"),
    ("CHARGER_EX", "bindings"),
    ("DAY_WEEK", "day_week"),
    ("NIGHT_WEEK", "night_week"),
    ("WEEKENDS", "weekends"),
    ("DIST", "dist"),
    ("DIST_WEEKEND", "dist_weekend"),
    ("TRAFFIC_WEEK", "traffic_week"),
    ("TRAFFIC_WEEKEND", "traffic_weekend"),
    ("WORK_WEEKEND_CONSTANT", "work_weekend_constant"),
    ("WORK_WEEKEND_RAND_1", "work_weekend_rand_sat"),
    ("WORK_WEEKEND_RAND_2", "work_weekend_rand_sun"),
    ("CHARGE_BAT", "charge_bat"),
    ("CARS", "cars"),
    ("CHARGERS_ALL", "chargers"),
];

pub fn key_for_variable(name: &str) -> Option<&'static str> {
    VARIABLE_KEYS.iter().find(|(var, _)| *var == name).map(|(_, key)| *key)
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown key{}: {message}", fmt_line(*.line))]
    UnknownKey { line: Option<usize>, message: String },
    #[error("missing mandatory table{}: {message}", fmt_line(*.line))]
    MissingTable { line: Option<usize>, message: String },
    #[error("type mismatch{}: {message}", fmt_line(*.line))]
    TypeMismatch { line: Option<usize>, message: String },
    #[error("cannot serialize config: {0}")]
    Serialize(String),
}

fn fmt_line(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

/// Anything drawn from a probability table.
pub trait Weighted {
    fn probability(&self) -> f64;
    fn set_probability(&mut self, p: f64);
}

/// `"HH:MM"` in documents, minutes after midnight in memory. `"24:00"` is
/// accepted as the end of the day.
mod clock {
    use super::*;

    pub fn serialize<S: Serializer>(minutes: &u32, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&format_args!("{:02}:{:02}", minutes / 60, minutes % 60))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).ok_or_else(|| serde::de::Error::custom(format!("invalid time of day `{text}` (expected HH:MM)")))
    }

    pub fn parse(text: &str) -> Option<u32> {
        let (h, m) = text.trim().split_once(':')?;
        let h: u32 = h.parse().ok()?;
        let m: u32 = m.parse().ok()?;
        (m < 60 && h * 60 + m <= 1440).then_some(h * 60 + m)
    }
}

/// A time-of-day window with its probability. Windows are half-open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutineBucket {
    #[serde(rename = "p")]
    pub probability: f64,
    #[serde(rename = "from", with = "clock")]
    pub hour_min: u32,
    #[serde(rename = "to", with = "clock")]
    pub hour_max: u32,
}

impl RoutineBucket {
    pub fn new(probability: f64, hour_min: u32, hour_max: u32) -> Self {
        Self {
            probability,
            hour_min,
            hour_max,
        }
    }

    pub fn hours(probability: f64, from_hour: u32, to_hour: u32) -> Self {
        Self::new(probability, from_hour * 60, to_hour * 60)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceBucket {
    #[serde(rename = "p")]
    pub probability: f64,
    pub min_km: f64,
    pub max_km: f64,
}

/// Extra travel time as a fraction: 0.10 means +10%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficBucket {
    #[serde(rename = "p")]
    pub probability: f64,
    pub min_increase: f64,
    pub max_increase: f64,
}

macro_rules! weighted {
    ($($ty:ty),*) => {$(
        impl Weighted for $ty {
            fn probability(&self) -> f64 {
                self.probability
            }
            fn set_probability(&mut self, p: f64) {
                self.probability = p;
            }
        }
    )*};
}
weighted!(RoutineBucket, DistanceBucket, TrafficBucket);

/// Routine tables for the two charging contexts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextRoutines {
    pub home: Vec<RoutineBucket>,
    pub office: Vec<RoutineBucket>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeekendRoutine {
    /// Chance that the car does not leave home on a rest day.
    pub stay_home: f64,
    /// Leisure activity windows, conditional on leaving.
    pub activities: Vec<RoutineBucket>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeBand {
    pub min_pct: f64,
    pub max_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Car {
    pub id: String,
    pub battery_kwh: f64,
    pub consumption_kwh_per_km: f64,
}

/// Charger plug identity, rendered `EVC_{building}_{number}_{plug}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChargerId {
    pub building: u32,
    pub number: u32,
    pub plug: u32,
}

impl ChargerId {
    pub fn new(building: u32, number: u32, plug: u32) -> Self {
        Self { building, number, plug }
    }
}

impl fmt::Display for ChargerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EVC_{}_{}_{}", self.building, self.number, self.plug)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid charger id `{0}` (expected EVC_<building>_<number>_<plug>)")]
pub struct ChargerIdError(pub String);

impl FromStr for ChargerId {
    type Err = ChargerIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ChargerIdError(s.to_string());
        let rest = s.strip_prefix("EVC_").ok_or_else(err)?;
        let mut parts = rest.split('_');
        let mut next = || -> Result<u32, ChargerIdError> {
            let part = parts.next().ok_or_else(err)?;
            // reject "+1", "01" and friends so the rendering stays canonical
            if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) || (part.len() > 1 && part.starts_with('0'))
            {
                return Err(err());
            }
            part.parse().map_err(|_| err())
        };
        let id = ChargerId::new(next()?, next()?, next()?);
        if parts.next().is_some() {
            return Err(err());
        }
        Ok(id)
    }
}

impl Serialize for ChargerId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChargerId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Charger {
    pub building: u32,
    pub number: u32,
    pub plug: u32,
    pub power_kw: f64,
}

impl Charger {
    pub fn id(&self) -> ChargerId {
        ChargerId::new(self.building, self.number, self.plug)
    }
}

/// Binds a car to the charger it is tracked at: its home plug, an office
/// building, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBinding {
    pub car: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_charger: Option<ChargerId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub office_building: Option<u32>,
}

/// Parameters the generator needs that have no counterpart among the
/// original input variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Extensions {
    pub average_speed_kmh: f64,
    /// Share of extra travel time that turns into extra energy.
    pub traffic_energy_coupling: f64,
    /// SoC percent below which an en-route charge is forced.
    pub reserve_soc: f64,
    /// Turning this off lets infeasible trips fail with a depletion error.
    pub forced_charge: bool,
    /// Relative spread of the return-leg distance around the outbound one.
    pub distance_jitter: f64,
    pub holidays: Vec<MonthDay>,
    pub seed: u64,
    pub start_date: MonthDay,
    /// ISO weekday of the first simulated day (1 = Monday).
    pub start_weekday: u8,
}

impl Default for Extensions {
    fn default() -> Self {
        Self {
            average_speed_kmh: 50.0,
            traffic_energy_coupling: 0.5,
            reserve_soc: 10.0,
            forced_charge: true,
            distance_jitter: 0.05,
            holidays: Vec::new(),
            seed: 0,
            start_date: MonthDay::default(),
            start_weekday: 1,
        }
    }
}

/// A table whose probabilities were rescaled on load.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub table: String,
    pub original_sum: f64,
}

/// How the document was read. Never part of config equality.
#[derive(Debug, Clone, Default)]
pub struct LoadNotes(pub Vec<Normalization>);

impl PartialEq for LoadNotes {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub years: u32,
    pub routine_change: f64,
    pub charge_during_travel: f64,
    /// Global SoC ceiling in percent.
    pub max_soc_cap: f64,
    pub work_weekend_constant: f64,
    pub work_weekend_rand_sat: f64,
    pub work_weekend_rand_sun: f64,
    pub charge_bat: ChargeBand,
    pub day_week: ContextRoutines,
    pub night_week: ContextRoutines,
    pub weekends: WeekendRoutine,
    pub dist: Vec<DistanceBucket>,
    pub dist_weekend: Vec<DistanceBucket>,
    pub traffic_week: Vec<TrafficBucket>,
    pub traffic_weekend: Vec<TrafficBucket>,
    pub cars: Vec<Car>,
    pub chargers: Vec<Charger>,
    pub bindings: Vec<ScenarioBinding>,
    #[serde(default)]
    pub extensions: Extensions,
    #[serde(skip)]
    pub notes: LoadNotes,
}

fn default_name() -> String {
    "scenario".to_string()
}

impl GenerationConfig {
    pub fn car(&self, id: &str) -> Option<&Car> {
        self.cars.iter().find(|c| c.id == id)
    }

    pub fn charger(&self, id: ChargerId) -> Option<&Charger> {
        self.chargers.iter().find(|c| c.id() == id)
    }

    pub fn horizon_days(&self) -> u32 {
        self.years * crate::calendar::DAYS_PER_YEAR
    }

    pub fn calendar(&self) -> Calendar {
        let ext = &self.extensions;
        Calendar::new(
            ext.start_date,
            Weekday::new(ext.start_weekday).unwrap_or(Weekday::MONDAY),
            ext.holidays.iter().copied().collect::<HolidayCalendar>(),
        )
    }

    /// Plugs of one office building in allocation order.
    pub fn building_plugs(&self, building: u32) -> Vec<ChargerId> {
        let mut plugs: Vec<ChargerId> = self
            .chargers
            .iter()
            .filter(|c| c.building == building)
            .map(Charger::id)
            .collect();
        plugs.sort();
        plugs
    }

    /// Every probability table with a stable name, for normalization and
    /// validation.
    fn tables_mut(&mut self) -> Vec<(&'static str, Vec<&mut dyn Weighted>)> {
        fn items<T: Weighted>(v: &mut [T]) -> Vec<&mut dyn Weighted> {
            v.iter_mut().map(|b| b as &mut dyn Weighted).collect()
        }
        vec![
            ("day_week.home", items(&mut self.day_week.home)),
            ("day_week.office", items(&mut self.day_week.office)),
            ("night_week.home", items(&mut self.night_week.home)),
            ("night_week.office", items(&mut self.night_week.office)),
            ("weekends.activities", items(&mut self.weekends.activities)),
            ("dist", items(&mut self.dist)),
            ("dist_weekend", items(&mut self.dist_weekend)),
            ("traffic_week", items(&mut self.traffic_week)),
            ("traffic_weekend", items(&mut self.traffic_weekend)),
        ]
    }

    fn table_sums(&self) -> Vec<(&'static str, usize, f64)> {
        fn sum<T: Weighted>(v: &[T]) -> f64 {
            v.iter().map(Weighted::probability).sum()
        }
        vec![
            ("day_week.home", self.day_week.home.len(), sum(&self.day_week.home)),
            (
                "day_week.office",
                self.day_week.office.len(),
                sum(&self.day_week.office),
            ),
            (
                "night_week.home",
                self.night_week.home.len(),
                sum(&self.night_week.home),
            ),
            (
                "night_week.office",
                self.night_week.office.len(),
                sum(&self.night_week.office),
            ),
            (
                "weekends.activities",
                self.weekends.activities.len(),
                sum(&self.weekends.activities),
            ),
            ("dist", self.dist.len(), sum(&self.dist)),
            ("dist_weekend", self.dist_weekend.len(), sum(&self.dist_weekend)),
            ("traffic_week", self.traffic_week.len(), sum(&self.traffic_week)),
            (
                "traffic_weekend",
                self.traffic_weekend.len(),
                sum(&self.traffic_weekend),
            ),
        ]
    }

    /// Rescales near-miss tables so they sum to one, recording each one in
    /// [`GenerationConfig::notes`]. Tables further than
    /// [`NORMALIZE_TOLERANCE`] from one are left for the validator.
    pub fn normalize(&mut self) {
        let mut notes = Vec::new();
        for (name, mut rows) in self.tables_mut() {
            let total: f64 = rows.iter().map(|r| r.probability()).sum();
            let off = (total - 1.0).abs();
            if off > SUM_EPSILON && off <= NORMALIZE_TOLERANCE && total > 0.0 {
                for row in rows.iter_mut() {
                    let p = row.probability();
                    row.set_probability(p / total);
                }
                notes.push(Normalization {
                    table: name.to_string(),
                    original_sum: total,
                });
            }
        }
        self.notes.0.extend(notes);
    }

    pub fn to_document(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }
}

/// Parses a scenario document and normalizes near-miss probability tables.
///
/// Missing extension keys take their defaults. The returned config has not
/// been validated; run [`validate_config`] before generating.
pub fn parse_config(document: &str) -> Result<GenerationConfig, ConfigError> {
    // syntax first, so structural problems get a precise position
    if let Err(e) = document.parse::<toml::Table>() {
        let (line, column) = e.span().map(|s| line_col(document, s.start)).unwrap_or((0, 0));
        return Err(ConfigError::Syntax {
            line,
            column,
            message: e.message().trim().to_string(),
        });
    }
    let mut cfg: GenerationConfig = toml::from_str(document).map_err(|e| {
        let line = e.span().map(|s| line_col(document, s.start).0);
        let message = e.message().trim().to_string();
        if message.starts_with("unknown field") {
            ConfigError::UnknownKey { line, message }
        } else if message.starts_with("missing field") {
            ConfigError::MissingTable { line, message }
        } else {
            ConfigError::TypeMismatch { line, message }
        }
    })?;
    cfg.normalize();
    Ok(cfg)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, column)
}

/// Checks every config invariant. Findings are data: this never fails.
pub fn validate_config(cfg: &GenerationConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    macro_rules! fatal {
        ($code:expr, $msg:expr $(,)?) => {
            report.push(Finding::fatal($code, $msg))
        };
    }

    if cfg.years < 1 {
        fatal!(FindingCode::Years, "years must be at least 1");
    }
    for (name, p) in [
        ("routine_change", cfg.routine_change),
        ("charge_during_travel", cfg.charge_during_travel),
        ("work_weekend_constant", cfg.work_weekend_constant),
        ("work_weekend_rand_sat", cfg.work_weekend_rand_sat),
        ("work_weekend_rand_sun", cfg.work_weekend_rand_sun),
        ("weekends.stay_home", cfg.weekends.stay_home),
    ] {
        if !(0.0..=1.0).contains(&p) {
            fatal!(
                FindingCode::ProbabilityRange,
                format!("{name} = {p} is not a probability")
            );
        }
    }
    if !(cfg.max_soc_cap > 0.0 && cfg.max_soc_cap <= 100.0) {
        fatal!(
            FindingCode::SocCap,
            format!("max_soc_cap = {} must lie in (0, 100]", cfg.max_soc_cap)
        );
    }
    let band = cfg.charge_bat;
    if band.min_pct > band.max_pct {
        fatal!(
            FindingCode::ChargeBand,
            format!("charge_bat: min exceeds max ({} > {})", band.min_pct, band.max_pct),
        );
    }
    if band.min_pct < 0.0 {
        fatal!(
            FindingCode::ChargeBand,
            format!("charge_bat: min {} is negative", band.min_pct)
        );
    }
    if band.max_pct > cfg.max_soc_cap {
        fatal!(
            FindingCode::ChargeBand,
            format!(
                "charge_bat: max {} exceeds max_soc_cap {}",
                band.max_pct, cfg.max_soc_cap
            ),
        );
    }

    for (name, len, sum) in cfg.table_sums() {
        if len == 0 {
            fatal!(FindingCode::EmptyTable, format!("{name} has no rows"));
            continue;
        }
        let off = (sum - 1.0).abs();
        if off > NORMALIZE_TOLERANCE {
            fatal!(
                FindingCode::ProbabilitySum,
                format!("{name} probabilities sum to {sum}")
            );
        } else if off > SUM_EPSILON {
            report.push(Finding::warning(
                FindingCode::ProbabilitySum,
                format!("{name} probabilities sum to {sum}; normalize before use"),
            ));
        }
    }
    for note in &cfg.notes.0 {
        report.push(Finding::warning(
            FindingCode::ProbabilitySum,
            format!(
                "{} probabilities summed to {:.4}; normalized on load",
                note.table, note.original_sum
            ),
        ));
    }

    let negative = |p: f64| !(p >= 0.0);
    for (name, table) in [
        ("day_week.home", &cfg.day_week.home),
        ("day_week.office", &cfg.day_week.office),
        ("night_week.home", &cfg.night_week.home),
        ("night_week.office", &cfg.night_week.office),
        ("weekends.activities", &cfg.weekends.activities),
    ] {
        for (i, b) in table.iter().enumerate() {
            if negative(b.probability) {
                fatal!(
                    FindingCode::ProbabilityRange,
                    format!("{name}[{i}] has negative probability")
                );
            }
            if b.hour_min >= b.hour_max || b.hour_max > 1440 {
                fatal!(
                    FindingCode::BucketBounds,
                    format!(
                        "{name}[{i}] window {}..{} is empty or out of the day",
                        b.hour_min, b.hour_max
                    ),
                );
            }
        }
        let mut windows: Vec<(u32, u32)> = table.iter().map(|b| (b.hour_min, b.hour_max)).collect();
        windows.sort_unstable();
        for pair in windows.windows(2) {
            if pair[1].0 < pair[0].1 {
                fatal!(
                    FindingCode::BucketOverlap,
                    format!("{name}: windows {:?} and {:?} overlap", pair[0], pair[1]),
                );
            }
        }
    }
    for (name, table) in [("dist", &cfg.dist), ("dist_weekend", &cfg.dist_weekend)] {
        for (i, b) in table.iter().enumerate() {
            if negative(b.probability) {
                fatal!(
                    FindingCode::ProbabilityRange,
                    format!("{name}[{i}] has negative probability")
                );
            }
            if !(b.min_km > 0.0 && b.min_km <= b.max_km) {
                fatal!(
                    FindingCode::BucketBounds,
                    format!("{name}[{i}] needs 0 < min_km <= max_km, got {}..{}", b.min_km, b.max_km),
                );
            }
        }
    }
    for (name, table) in [
        ("traffic_week", &cfg.traffic_week),
        ("traffic_weekend", &cfg.traffic_weekend),
    ] {
        for (i, b) in table.iter().enumerate() {
            if negative(b.probability) {
                fatal!(
                    FindingCode::ProbabilityRange,
                    format!("{name}[{i}] has negative probability")
                );
            }
            if !(b.min_increase >= 0.0 && b.min_increase <= b.max_increase) {
                fatal!(
                    FindingCode::BucketBounds,
                    format!(
                        "{name}[{i}] needs 0 <= min_increase <= max_increase, got {}..{}",
                        b.min_increase, b.max_increase
                    ),
                );
            }
        }
    }

    let mut car_ids = BTreeSet::new();
    for car in &cfg.cars {
        if !car_ids.insert(car.id.as_str()) {
            fatal!(FindingCode::Fleet, format!("car id `{}` is duplicated", car.id));
        }
        if car.id.is_empty() || car.id.contains(['/', '\\']) || car.id.starts_with('.') {
            fatal!(
                FindingCode::Fleet,
                format!("car id `{}` cannot be used as a file name", car.id)
            );
        }
        if !(car.battery_kwh > 0.0 && car.consumption_kwh_per_km > 0.0) {
            fatal!(
                FindingCode::Fleet,
                format!("car `{}` needs positive battery capacity and consumption", car.id),
            );
        }
    }
    let mut charger_ids = BTreeMap::new();
    for charger in &cfg.chargers {
        if charger_ids.insert(charger.id(), ()).is_some() {
            fatal!(FindingCode::Fleet, format!("charger {} is duplicated", charger.id()));
        }
        if !(charger.power_kw > 0.0) {
            fatal!(
                FindingCode::Fleet,
                format!("charger {} needs positive power", charger.id())
            );
        }
    }
    let mut home_plugs = BTreeMap::new();
    for binding in &cfg.bindings {
        if !car_ids.contains(binding.car.as_str()) {
            fatal!(
                FindingCode::Binding,
                format!("binding references unknown car `{}`", binding.car)
            );
        }
        if binding.home_charger.is_none() && binding.office_building.is_none() {
            fatal!(
                FindingCode::Binding,
                format!(
                    "binding for `{}` names neither a home charger nor an office building",
                    binding.car
                ),
            );
        }
        if let Some(id) = binding.home_charger {
            if !charger_ids.contains_key(&id) {
                fatal!(
                    FindingCode::Binding,
                    format!("binding for `{}` references unknown charger {id}", binding.car)
                );
            }
            if let Some(other) = home_plugs.insert(id, binding.car.as_str()) {
                fatal!(
                    FindingCode::Binding,
                    format!("home charger {id} is shared by `{other}` and `{}`", binding.car),
                );
            }
        }
    }
    let mut bound = BTreeSet::new();
    for binding in &cfg.bindings {
        if !bound.insert(binding.car.as_str()) {
            fatal!(
                FindingCode::Binding,
                format!("car `{}` has more than one binding", binding.car)
            );
        }
    }

    let ext = &cfg.extensions;
    if !(ext.average_speed_kmh > 0.0) {
        fatal!(FindingCode::Extension, "average_speed_kmh must be positive");
    }
    if !(0.0..=1.0).contains(&ext.traffic_energy_coupling) {
        fatal!(FindingCode::Extension, "traffic_energy_coupling must lie in [0, 1]");
    }
    if !(ext.reserve_soc >= 0.0 && ext.reserve_soc < cfg.max_soc_cap) {
        fatal!(FindingCode::Extension, "reserve_soc must lie in [0, max_soc_cap)");
    }
    if !(0.0..1.0).contains(&ext.distance_jitter) {
        fatal!(FindingCode::Extension, "distance_jitter must lie in [0, 1)");
    }
    if Weekday::new(ext.start_weekday).is_none() {
        fatal!(FindingCode::Extension, "start_weekday must lie in 1..=7");
    }
    report
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const PORTUGAL: &str = include_str!("../../../docs/scenarios/portugal.toml");

    #[test]
    fn parses_the_shipped_example() {
        let cfg = parse_config(PORTUGAL).unwrap();
        let office = &cfg.day_week.office;
        assert_eq!(office.len(), 4);
        let expect = [(0.40, 420, 480), (0.50, 480, 540), (0.05, 300, 360), (0.05, 540, 840)];
        for (b, (p, lo, hi)) in office.iter().zip(expect) {
            assert!((b.probability - p).abs() < 1e-12);
            assert_eq!((b.hour_min, b.hour_max), (lo, hi));
        }
    }

    #[test]
    fn traffic_week_is_normalized_with_one_warning() {
        let cfg = parse_config(PORTUGAL).unwrap();
        let raw = [0.03, 0.20, 0.50, 0.17];
        for (b, p) in cfg.traffic_week.iter().zip(raw) {
            assert!((b.probability - p / 0.90).abs() < 1e-12);
        }
        let sum: f64 = cfg.traffic_week.iter().map(|b| b.probability).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert_eq!(cfg.notes.0.len(), 1);
        assert_eq!(cfg.notes.0[0].table, "traffic_week");
        assert!((cfg.notes.0[0].original_sum - 0.90).abs() < 1e-12);

        let report = validate_config(&cfg);
        assert_eq!(report.warning_count(), 1, "{report}");
        assert_eq!(report.fatal_count(), 0, "{report}");
    }

    #[test]
    fn degenerate_single_bucket_config_is_valid() {
        let cfg = parse_config(&minimal_document()).unwrap();
        assert_eq!(cfg.years, 1);
        assert_eq!(cfg.cars.len(), 1);
        assert!(validate_config(&cfg).is_clean());
        // omitted extensions take their documented defaults
        assert_eq!(cfg.extensions, Extensions::default());
        assert_eq!(cfg.extensions.average_speed_kmh, 50.0);
        assert_eq!(cfg.extensions.traffic_energy_coupling, 0.5);
        assert_eq!(cfg.extensions.reserve_soc, 10.0);
        assert!(cfg.extensions.holidays.is_empty());
        assert_eq!(cfg.extensions.seed, 0);
    }

    #[test]
    fn inverted_charge_band_is_fatal() {
        let mut cfg = parse_config(&minimal_document()).unwrap();
        cfg.charge_bat = ChargeBand {
            min_pct: 80.0,
            max_pct: 60.0,
        };
        let report = validate_config(&cfg);
        assert!(report.has_fatal());
        assert!(report
            .with_code(FindingCode::ChargeBand)
            .any(|f| f.message.contains("min exceeds max")));
    }

    #[test]
    fn overlapping_routine_windows_are_fatal() {
        let mut cfg = parse_config(&minimal_document()).unwrap();
        cfg.day_week.home = vec![RoutineBucket::hours(0.5, 7, 9), RoutineBucket::hours(0.5, 8, 10)];
        let report = validate_config(&cfg);
        assert_eq!(report.with_code(FindingCode::BucketOverlap).count(), 1);
        assert!(report.has_fatal());
        // adjacent half-open windows do not overlap
        cfg.day_week.home = vec![RoutineBucket::hours(0.5, 7, 8), RoutineBucket::hours(0.5, 8, 9)];
        assert!(validate_config(&cfg).is_clean());
    }

    #[test]
    fn far_off_sum_is_fatal_and_left_alone() {
        let doc = minimal_document().replace(
            "dist = [{ p = 1.0, min_km = 20.0, max_km = 20.0 }]",
            "dist = [{ p = 0.5, min_km = 20.0, max_km = 20.0 }]",
        );
        let cfg = parse_config(&doc).unwrap();
        assert_eq!(cfg.dist[0].probability, 0.5);
        let report = validate_config(&cfg);
        assert!(report
            .with_code(FindingCode::ProbabilitySum)
            .any(|f| f.severity == crate::report::Severity::Fatal));
    }

    #[test]
    fn syntax_errors_report_position() {
        let doc = "years = 1\nroutine_change = = 0.1\n";
        match parse_config(doc) {
            Err(ConfigError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_missing_table_and_type_mismatch() {
        let doc = format!("bogus = 3\n{}", minimal_document());
        assert!(matches!(parse_config(&doc), Err(ConfigError::UnknownKey { .. })));

        let doc = minimal_document().replace("dist_weekend = [{ p = 1.0, min_km = 5.0, max_km = 5.0 }]\n", "");
        match parse_config(&doc) {
            Err(ConfigError::MissingTable { message, .. }) => assert!(message.contains("dist_weekend")),
            other => panic!("expected missing table, got {other:?}"),
        }

        let doc = minimal_document().replace("years = 1", "years = \"one\"");
        assert!(matches!(parse_config(&doc), Err(ConfigError::TypeMismatch { .. })));
    }

    #[test]
    fn serialize_round_trip() {
        for doc in [PORTUGAL.to_string(), minimal_document()] {
            let cfg = parse_config(&doc).unwrap();
            let again = parse_config(&cfg.to_document().unwrap()).unwrap();
            assert_eq!(cfg, again);
            assert!(again.notes.0.is_empty());
        }
    }

    #[test]
    fn every_variable_maps_to_one_document_key() {
        let cfg = parse_config(PORTUGAL).unwrap();
        let doc: toml::Table = cfg.to_document().unwrap().parse().unwrap();
        let mut seen = BTreeSet::new();
        for (var, key) in VARIABLE_KEYS {
            assert!(doc.contains_key(key), "{var} -> {key} missing from serialized config");
            assert!(seen.insert(key), "{key} mapped twice");
            assert_eq!(key_for_variable(var), Some(key));
        }
        assert_eq!(seen.len(), 18);
    }

    #[test]
    fn validation_is_pure() {
        let mut cfg = parse_config(PORTUGAL).unwrap();
        cfg.charge_bat.min_pct = 95.0;
        assert_eq!(validate_config(&cfg), validate_config(&cfg));
    }

    #[test]
    fn charger_ids_render_and_parse() {
        let id = ChargerId::new(1, 12, 3);
        assert_eq!(id.to_string(), "EVC_1_12_3");
        assert_eq!("EVC_1_12_3".parse::<ChargerId>().unwrap(), id);
        for bad in [
            "EVC_1_2",
            "EVC_1_2_3_4",
            "evc_1_1_1",
            "EVC_01_1_1",
            "EVC_a_1_1",
            "EVC__1_1",
        ] {
            assert!(bad.parse::<ChargerId>().is_err(), "{bad}");
        }
    }

    pub(crate) fn minimal_document() -> String {
        r#"
years = 1
routine_change = 0.0
charge_during_travel = 0.0
max_soc_cap = 100.0
work_weekend_constant = 0.0
work_weekend_rand_sat = 0.0
work_weekend_rand_sun = 0.0
dist = [{ p = 1.0, min_km = 20.0, max_km = 20.0 }]
dist_weekend = [{ p = 1.0, min_km = 5.0, max_km = 5.0 }]
traffic_week = [{ p = 1.0, min_increase = 0.0, max_increase = 0.0 }]
traffic_weekend = [{ p = 1.0, min_increase = 0.0, max_increase = 0.0 }]
cars = [{ id = "car_1", battery_kwh = 60.0, consumption_kwh_per_km = 0.18 }]
chargers = [{ building = 1, number = 1, plug = 1, power_kw = 7.4 }]
bindings = [{ car = "car_1", home_charger = "EVC_1_1_1" }]

[charge_bat]
min_pct = 80.0
max_pct = 80.0

[day_week]
home = [{ p = 1.0, from = "08:10", to = "08:11" }]
office = [{ p = 1.0, from = "08:00", to = "09:00" }]

[night_week]
home = [{ p = 1.0, from = "18:40", to = "18:41" }]
office = [{ p = 1.0, from = "17:00", to = "18:00" }]

[weekends]
stay_home = 1.0
activities = [{ p = 1.0, from = "14:00", to = "18:00" }]
"#
        .to_string()
    }
}

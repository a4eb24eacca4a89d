//! Whole-scenario generation and the on-disk layout.
//!
//! A run writes `<out>/<name>_<mode>/` containing one `<car_id>.csv` per EV,
//! an auxiliary `<car_id>.trips.csv` minute-level trip log, and
//! `manifest.json`. Nothing time-dependent is written, so identical inputs
//! give identical bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    connection_run_lengths, hourly_profile, trip_duration_stats, DayClass, HourlyConnectionProfile, RunLengthHistogram,
    TripDurationSummary, TRIP_BIN_MINUTES,
};
use crate::calendar::MINUTES_PER_DAY;
use crate::config::{validate_config, ConfigError, GenerationConfig, ScenarioBinding};
use crate::dataset::{check_file, read_csv, write_csv, DatasetError, RowExpectation};
use crate::home::generate_home_profile;
use crate::mobility::{Place, TripLeg};
use crate::office::generate_office_profiles;
use crate::profile::{Profile, ProfileError};
use crate::report::ValidationReport;
use crate::timeline::HOURS_PER_DAY;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRIP_LOG_SUFFIX: &str = ".trips.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Home,
    Office,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Home => "home",
            Mode::Office => "office",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "home" => Ok(Mode::Home),
            "office" => Ok(Mode::Office),
            other => Err(format!("unknown mode `{other}`, expected home or office")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("configuration has fatal findings:\n{0}")]
    InvalidConfig(ValidationReport),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("trip log: {0}")]
    TripLog(#[from] csv::Error),
    #[error("no profiles found under {0}")]
    NoProfiles(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GenerateError + '_ {
    move |source| GenerateError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Bindings that take part in `mode`, sorted by car id.
pub fn mode_bindings(cfg: &GenerationConfig, mode: Mode) -> Vec<&ScenarioBinding> {
    let mut out: Vec<&ScenarioBinding> = cfg
        .bindings
        .iter()
        .filter(|b| match mode {
            Mode::Home => b.home_charger.is_some(),
            Mode::Office => b.office_building.is_some(),
        })
        .collect();
    out.sort_by(|a, b| a.car.cmp(&b.car));
    out
}

/// Profiles for every binding of the mode, sorted by car id. The config is
/// validated first.
pub fn generate_profiles(cfg: &GenerationConfig, mode: Mode, seed: u64) -> Result<Vec<Profile>, GenerateError> {
    let report = validate_config(cfg);
    if report.has_fatal() {
        return Err(GenerateError::InvalidConfig(report));
    }
    let horizon = cfg.horizon_days();
    let bindings = mode_bindings(cfg, mode);
    let mut profiles = match mode {
        Mode::Home => bindings
            .iter()
            .map(|b| generate_home_profile(seed, cfg, b, horizon))
            .collect::<Result<Vec<_>, _>>()?,
        Mode::Office => {
            let mut by_building: BTreeMap<u32, Vec<ScenarioBinding>> = BTreeMap::new();
            for b in bindings {
                by_building
                    .entry(b.office_building.unwrap_or_default())
                    .or_default()
                    .push(b.clone());
            }
            let mut all = Vec::new();
            for group in by_building.values() {
                all.extend(generate_office_profiles(seed, cfg, group, horizon)?);
            }
            all
        }
    };
    profiles.sort_by(|a, b| a.car_id.cmp(&b.car_id));
    Ok(profiles)
}

/// SHA-256 of the canonical serialized config.
pub fn config_hash(cfg: &GenerationConfig) -> Result<String, ConfigError> {
    Ok(hex::encode(Sha256::digest(cfg.to_document()?.as_bytes())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub car_id: String,
    pub file: String,
    pub trip_log: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    pub config_hash: String,
    pub horizon_days: u32,
    pub profiles: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn expected_rows(&self) -> usize {
        self.horizon_days as usize * HOURS_PER_DAY
    }

    pub fn load(dir: &Path) -> Result<Option<Manifest>, GenerateError> {
        let path = dir.join(MANIFEST_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(Some(serde_json::from_str(&text)?))
    }
}

/// One row of the auxiliary trip log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripLogRow {
    pub day: i64,
    pub origin: Place,
    pub destination: Place,
    /// Minute of the day the leg starts; may be negative or past 1440 when a
    /// leg belongs to the neighbouring day.
    pub depart_minute: i64,
    pub distance_km: f64,
    pub traffic_factor: f64,
    pub duration_min: u32,
    pub energy_kwh: f64,
    pub mid_trip_charge: Option<f64>,
}

impl From<&TripLeg> for TripLogRow {
    fn from(leg: &TripLeg) -> Self {
        let day = leg.depart_minute.div_euclid(MINUTES_PER_DAY);
        let round = |x: f64| (x * 1e4).round() / 1e4;
        TripLogRow {
            day,
            origin: leg.origin,
            destination: leg.destination,
            depart_minute: leg.depart_minute - day * MINUTES_PER_DAY,
            distance_km: round(leg.distance_km),
            traffic_factor: round(leg.traffic_factor),
            duration_min: leg.duration_min,
            energy_kwh: round(leg.energy_kwh),
            mid_trip_charge: leg.mid_trip_charge.map(round),
        }
    }
}

pub fn write_trip_log(trips: &[TripLeg], path: &Path) -> Result<(), GenerateError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(std::io::BufWriter::new(file));
    for leg in trips {
        w.serialize(TripLogRow::from(leg))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_trip_log(path: &Path) -> Result<Vec<TripLogRow>, GenerateError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

pub fn scenario_dir(out_root: &Path, cfg: &GenerationConfig, mode: Mode) -> PathBuf {
    out_root.join(format!("{}_{mode}", cfg.name))
}

/// Generates and writes a whole scenario.
pub fn write_scenario(
    cfg: &GenerationConfig,
    mode: Mode,
    seed: u64,
    out_root: &Path,
) -> Result<ScenarioOutput, GenerateError> {
    let profiles = generate_profiles(cfg, mode, seed)?;
    let dir = scenario_dir(out_root, cfg, mode);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut entries = Vec::with_capacity(profiles.len());
    for p in &profiles {
        let file = format!("{}.csv", p.car_id);
        let trip_log = format!("{}{TRIP_LOG_SUFFIX}", p.car_id);
        write_csv(&p.records, &dir.join(&file))?;
        write_trip_log(&p.trips, &dir.join(&trip_log))?;
        entries.push(ManifestEntry {
            car_id: p.car_id.clone(),
            file,
            trip_log,
        });
    }
    let manifest = Manifest {
        scenario: cfg.name.clone(),
        mode,
        seed,
        config_hash: config_hash(cfg)?,
        horizon_days: cfg.horizon_days(),
        profiles: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(ScenarioOutput { dir, manifest })
}

/// Profile CSVs under `input` in filename order, with the row count each one
/// must have. A directory with a manifest uses its file list and horizon;
/// otherwise every non-trip-log CSV must hold whole years.
pub fn profile_files(input: &Path) -> Result<Vec<(PathBuf, RowExpectation)>, GenerateError> {
    if input.is_file() {
        let manifest = match input.parent() {
            Some(dir) => Manifest::load(dir)?,
            None => None,
        };
        let name = input.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let expect = manifest
            .filter(|m| m.profiles.iter().any(|p| p.file == name))
            .map_or(RowExpectation::WholeYears, |m| RowExpectation::Exact(m.expected_rows()));
        return Ok(vec![(input.to_path_buf(), expect)]);
    }
    let mut files = Vec::new();
    if let Some(m) = Manifest::load(input)? {
        for p in &m.profiles {
            files.push((input.join(&p.file), RowExpectation::Exact(m.expected_rows())));
        }
    } else {
        let entries = fs::read_dir(input).map_err(io_err(input))?;
        for entry in entries {
            let path = entry.map_err(io_err(input))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name.ends_with(".csv") && !name.ends_with(TRIP_LOG_SUFFIX) {
                files.push((path, RowExpectation::WholeYears));
            }
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    if files.is_empty() {
        return Err(GenerateError::NoProfiles(input.to_path_buf()));
    }
    Ok(files)
}

pub fn validate_path(input: &Path) -> Result<Vec<(PathBuf, ValidationReport)>, GenerateError> {
    profile_files(input)?
        .into_iter()
        .map(|(path, expect)| {
            let report = check_file(&path, expect).map_err(|e| match e {
                DatasetError::Io(source) => GenerateError::Io {
                    path: path.clone(),
                    source,
                },
                other => other.into(),
            })?;
            Ok((path, report))
        })
        .collect()
}

/// Per-profile statistics plus their pooled totals.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub profiles: Vec<ProfileAnalysis>,
    pub run_lengths: RunLengthHistogram,
    pub hourly: HourlyConnectionProfile,
    pub trips: TripDurationSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileAnalysis {
    pub name: String,
    pub run_lengths: RunLengthHistogram,
    pub hourly: HourlyConnectionProfile,
    pub trips: TripDurationSummary,
}

pub fn analyze_path(input: &Path) -> Result<Analysis, GenerateError> {
    let mut profiles = Vec::new();
    let mut run_lengths = RunLengthHistogram::default();
    let mut hourly = HourlyConnectionProfile::default();
    let mut all_durations = Vec::new();
    for (path, _) in profile_files(input)? {
        let records = read_csv(&path)?;
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .map(|n| n.trim_end_matches(".csv").to_string())
            .unwrap_or_default();
        let log = path.with_file_name(format!("{name}{TRIP_LOG_SUFFIX}"));
        let durations: Vec<u32> = if log.is_file() {
            read_trip_log(&log)?.iter().map(|t| t.duration_min).collect()
        } else {
            Vec::new()
        };
        let p = ProfileAnalysis {
            name,
            run_lengths: connection_run_lengths(&records),
            hourly: hourly_profile(&records),
            trips: trip_duration_stats(&durations),
        };
        run_lengths.merge(&p.run_lengths);
        hourly.merge(&p.hourly);
        all_durations.extend(durations);
        profiles.push(p);
    }
    Ok(Analysis {
        profiles,
        run_lengths,
        hourly,
        trips: trip_duration_stats(&all_durations),
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, GenerateError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| x.to_string())
}

/// Writes `run_lengths.csv`, `hourly_profile.csv`, `trip_durations.csv` and
/// `trip_summary.csv`. Each holds one block per profile followed by `all`.
pub fn write_analysis(analysis: &Analysis, out: &Path) -> Result<Vec<PathBuf>, GenerateError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let pooled = ProfileAnalysis {
        name: "all".into(),
        run_lengths: analysis.run_lengths.clone(),
        hourly: analysis.hourly.clone(),
        trips: analysis.trips.clone(),
    };
    let blocks: Vec<&ProfileAnalysis> = analysis.profiles.iter().chain([&pooled]).collect();

    let runs = out.join("run_lengths.csv");
    let mut w = csv_writer(&runs)?;
    w.write_record(["profile", "length_hours", "count"])?;
    for b in &blocks {
        for (len, n) in &b.run_lengths.0 {
            w.write_record([b.name.clone(), len.to_string(), n.to_string()])?;
        }
    }
    w.flush().map_err(io_err(&runs))?;

    let hourly = out.join("hourly_profile.csv");
    let mut w = csv_writer(&hourly)?;
    w.write_record(["profile", "day_class", "hour", "fraction", "days"])?;
    for b in &blocks {
        for class in [DayClass::Weekday, DayClass::Weekend] {
            for hour in 1..=HOURS_PER_DAY as u32 {
                w.write_record([
                    b.name.clone(),
                    class.name().to_string(),
                    hour.to_string(),
                    format!("{:.4}", b.hourly.fraction(class, hour)),
                    b.hourly.days(class).to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(io_err(&hourly))?;

    let durations = out.join("trip_durations.csv");
    let mut w = csv_writer(&durations)?;
    w.write_record(["profile", "bin_start_min", "bin_end_min", "count"])?;
    for b in &blocks {
        for (start, n) in &b.trips.histogram {
            w.write_record([
                b.name.clone(),
                start.to_string(),
                (start + TRIP_BIN_MINUTES).to_string(),
                n.to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(&durations))?;

    let summary = out.join("trip_summary.csv");
    let mut w = csv_writer(&summary)?;
    w.write_record(["profile", "trips", "min", "q25", "median", "q75", "max", "share_10_60"])?;
    for b in &blocks {
        let t = &b.trips;
        w.write_record([
            b.name.clone(),
            t.count.to_string(),
            opt(t.min),
            opt(t.q25),
            opt(t.median),
            opt(t.q75),
            opt(t.max),
            opt(t.share_10_60.map(|s| format!("{s:.4}"))),
        ])?;
    }
    w.flush().map_err(io_err(&summary))?;
    Ok(vec![runs, hourly, durations, summary])
}

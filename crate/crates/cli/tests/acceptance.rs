//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS or FAIL line; the process fails if any
//! criterion does.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use flexigen_core::calendar::SimDay;
use flexigen_core::config::{ContextRoutines, WeekendRoutine};
use flexigen_core::dataset::{validate_dataset, write_records, RowExpectation};
use flexigen_core::home::{generate_home_profile, plan_weekday, plan_weekend_day};
use flexigen_core::office::{generate_office_profiles, plan_office_day, EmployeeProfile};
use flexigen_core::scenario::{analyze_path, read_trip_log, validate_path, Manifest};
use flexigen_core::{
    generate_profiles, parse_config, validate_config, Car, ChargeBand, Charger, ChargerId, DayClass, DistanceBucket,
    EvState, GenerateError, GenerationConfig, MobilityError, Mode, PlanKind, ProfileError, RngStream, RoutineBucket,
    ScenarioBinding, TrafficBucket, Weekday,
};

const SCENARIO: &str = include_str!("../../../docs/scenarios/portugal.toml");
const SCENARIO_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/scenarios/portugal.toml");
const DEGENERATE: &str = include_str!("golden/degenerate_home.toml");
const GOLDEN: &str = include_str!("golden/degenerate_home_3day.csv");
const SEED: u64 = 0;

type Outcome = Result<String, String>;
type Check = fn(&Path) -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let criteria: [(&str, Check); 10] = [
        ("determinism and runtime", determinism),
        ("schema conformance", schema),
        ("distribution reproduction", distributions),
        ("trip durations", trip_durations),
        ("office session lengths", office_sessions),
        ("long home sessions", long_home_sessions),
        ("home/office connection pattern", connection_pattern),
        ("plug exclusivity", plug_exclusivity),
        ("SoC safety", soc_safety),
        ("oracle equivalence", oracle_equivalence),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let dir = work.path().join(format!("c{}", i + 1));
        std::fs::create_dir_all(&dir).expect("criterion dir");
        match check(&dir) {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn scenario() -> GenerationConfig {
    parse_config(SCENARIO).expect("scenario parses")
}

fn run_generate(mode: Mode, out: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_flexigen"))
        .args([
            "generate",
            "--config",
            SCENARIO_PATH,
            "--mode",
            &mode.to_string(),
            "--seed",
            &SEED.to_string(),
        ])
        .arg("--out")
        .arg(out)
        .env_remove("FLEXIGEN_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(
        status.status.success(),
        "generate --mode {mode} failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    Ok(elapsed)
}

/// Generates both modes of the example scenario under `root`.
fn generate_both(root: &Path) -> Result<(PathBuf, PathBuf, Duration), String> {
    let a = run_generate(Mode::Home, root)?;
    let b = run_generate(Mode::Office, root)?;
    Ok((root.join("portugal_home"), root.join("portugal_office"), a + b))
}

fn files_in(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        out.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn determinism(dir: &Path) -> Outcome {
    let (home_a, office_a, elapsed) = generate_both(&dir.join("a"))?;
    let (home_b, office_b, _) = generate_both(&dir.join("b"))?;
    let mut compared = 0;
    for (x, y) in [(home_a, home_b), (office_a, office_b)] {
        let (fx, fy) = (files_in(&x)?, files_in(&y)?);
        ensure!(fx.keys().eq(fy.keys()), "file sets differ in {}", x.display());
        for (name, bytes) in &fx {
            ensure!(*bytes == fy[name], "{name} differs between runs");
            compared += 1;
        }
        ensure!(fx.contains_key("manifest.json"), "no manifest in {}", x.display());
    }
    ensure!(elapsed < Duration::from_secs(5), "6 EV-years took {elapsed:?}");
    Ok(format!(
        "{compared} files byte-identical; 6 EV-years in {:.0} ms",
        elapsed.as_secs_f64() * 1e3
    ))
}

fn schema(dir: &Path) -> Outcome {
    let (home, office, _) = generate_both(dir)?;
    let mut files = 0;
    for d in [&home, &office] {
        let out = Command::new(env!("CARGO_BIN_EXE_flexigen"))
            .args(["validate", "--input"])
            .arg(d)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            out.status.success(),
            "validate {} failed: {}",
            d.display(),
            String::from_utf8_lossy(&out.stdout)
        );
        let manifest = Manifest::load(d)
            .map_err(|e| e.to_string())?
            .ok_or("missing manifest")?;
        ensure!(
            manifest.expected_rows() == 8760,
            "manifest horizon is {} days",
            manifest.horizon_days
        );
        for (path, report) in validate_path(d).map_err(|e| e.to_string())? {
            ensure!(report.findings.is_empty(), "{}: {report}", path.display());
            let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
            let rows = text.lines().count() - 1;
            ensure!(rows == 8760, "{} has {rows} rows", path.display());
            files += 1;
        }
    }
    ensure!(files == 6, "expected 6 profiles, found {files}");
    Ok(format!("{files} profiles, 8760 rows each, zero findings"))
}

/// Share of values falling in each `[lo, hi)` bucket.
fn bucket_shares(values: &[f64], buckets: &[(f64, f64)]) -> Vec<f64> {
    let n = values.len() as f64;
    buckets
        .iter()
        .map(|&(lo, hi)| values.iter().filter(|&&v| v >= lo && v < hi).count() as f64 / n)
        .collect()
}

fn compare(table: &str, observed: &[f64], expected: &[f64], tol: f64, worst: &mut f64) -> Result<(), String> {
    for (i, (o, e)) in observed.iter().zip(expected).enumerate() {
        *worst = worst.max((o - e).abs());
        ensure!(
            (o - e).abs() <= tol,
            "{table} bucket {i}: observed {o:.4}, expected {e:.4}"
        );
    }
    Ok(())
}

fn windows(table: &[RoutineBucket]) -> Vec<(f64, f64)> {
    table
        .iter()
        .map(|b| (f64::from(b.hour_min), f64::from(b.hour_max)))
        .collect()
}

fn weights<T>(table: &[T], p: impl Fn(&T) -> f64) -> Vec<f64> {
    table.iter().map(p).collect()
}

fn sim_day(index: u32, weekday: u8) -> SimDay {
    SimDay {
        index,
        date: Default::default(),
        weekday: Weekday::new(weekday).unwrap(),
        holiday: false,
    }
}

fn distributions(_: &Path) -> Outcome {
    const N: u32 = 10_000;
    const TOL: f64 = 0.02;
    let cfg = scenario();
    let mut worst: f64 = 0.0;

    // office arrivals and departures
    let car = cfg.car("office_1").unwrap().clone();
    let mut employee = EmployeeProfile::new(SEED, &cfg, &car).map_err(|e| e.to_string())?;
    let (mut arrivals, mut departures) = (Vec::new(), Vec::new());
    for i in 0..N {
        let day = sim_day(i, (i % 5 + 1) as u8);
        let visit = plan_office_day(&cfg, &mut employee, &day).map_err(|e| e.to_string())?;
        let day0 = day.start_minute();
        arrivals.push((visit.arrival_minute() - day0) as f64);
        departures.push((visit.departure_minute() - day0) as f64);
    }
    let office_in = &cfg.day_week.office;
    compare(
        "day_week.office",
        &bucket_shares(&arrivals, &windows(office_in)),
        &weights(office_in, |b| b.probability),
        TOL,
        &mut worst,
    )?;
    let office_out = &cfg.night_week.office;
    compare(
        "night_week.office",
        &bucket_shares(&departures, &windows(office_out)),
        &weights(office_out, |b| b.probability),
        TOL,
        &mut worst,
    )?;

    // home weekdays: departures, arrivals, commute distance, weekday traffic
    let car = cfg.car("house_1").unwrap().clone();
    let mut rng = RngStream::derive(SEED, "acceptance/home-weekdays");
    let (mut leave, mut back, mut dist, mut traffic) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..N {
        let day = sim_day(i, (i % 5 + 1) as u8);
        let plan = plan_weekday(&mut rng, &cfg, &car, &day).map_err(|e| e.to_string())?;
        let day0 = day.start_minute();
        if let (Some(out), Some(ret)) = (&plan.departure, &plan.return_leg) {
            leave.push((out.depart_minute - day0) as f64);
            back.push((ret.arrive_minute() - day0) as f64);
            dist.push(out.distance_km);
            traffic.extend([out.traffic_factor - 1.0, ret.traffic_factor - 1.0]);
        } else {
            ensure!(
                plan.kind == PlanKind::StayHome,
                "weekday without legs is {:?}",
                plan.kind
            );
        }
    }
    let home_out = &cfg.day_week.home;
    compare(
        "day_week.home",
        &bucket_shares(&leave, &windows(home_out)),
        &weights(home_out, |b| b.probability),
        TOL,
        &mut worst,
    )?;
    let home_in = &cfg.night_week.home;
    compare(
        "night_week.home",
        &bucket_shares(&back, &windows(home_in)),
        &weights(home_in, |b| b.probability),
        TOL,
        &mut worst,
    )?;
    let dist_buckets: Vec<(f64, f64)> = cfg.dist.iter().map(|b| (b.min_km, b.max_km)).collect();
    compare(
        "dist",
        &bucket_shares(&dist, &dist_buckets),
        &weights(&cfg.dist, |b| b.probability),
        TOL,
        &mut worst,
    )?;
    let week_buckets: Vec<(f64, f64)> = cfg
        .traffic_week
        .iter()
        .map(|b| (b.min_increase, b.max_increase))
        .collect();
    compare(
        "traffic_week",
        &bucket_shares(&traffic, &week_buckets),
        &weights(&cfg.traffic_week, |b| b.probability),
        TOL,
        &mut worst,
    )?;
    let normalized: f64 = cfg.traffic_week.iter().map(|b| b.probability).sum();
    ensure!(
        (normalized - 1.0).abs() < 1e-9,
        "traffic_week sums to {normalized} after loading"
    );

    // weekend traffic
    let mut rng = RngStream::derive(SEED, "acceptance/home-weekends");
    let mut weekend = Vec::new();
    let mut i = 0;
    while weekend.len() < N as usize {
        let day = sim_day(i, 6 + (i % 2) as u8);
        i += 1;
        let plan = plan_weekend_day(&mut rng, &cfg, &car, &day).map_err(|e| e.to_string())?;
        weekend.extend(plan.legs().map(|l| l.traffic_factor - 1.0));
    }
    let end_buckets: Vec<(f64, f64)> = cfg
        .traffic_weekend
        .iter()
        .map(|b| (b.min_increase, b.max_increase))
        .collect();
    compare(
        "traffic_weekend",
        &bucket_shares(&weekend, &end_buckets),
        &weights(&cfg.traffic_weekend, |b| b.probability),
        TOL,
        &mut worst,
    )?;

    Ok(format!("8 tables over 10^4 draws each, worst deviation {worst:.4}"))
}

fn trip_durations(dir: &Path) -> Outcome {
    let (home, office, _) = generate_both(dir)?;
    let mut durations = Vec::new();
    for d in [&home, &office] {
        let manifest = Manifest::load(d)
            .map_err(|e| e.to_string())?
            .ok_or("missing manifest")?;
        for entry in &manifest.profiles {
            let log = read_trip_log(&d.join(&entry.trip_log)).map_err(|e| e.to_string())?;
            durations.extend(log.iter().map(|t| t.duration_min));
        }
    }
    let stats = flexigen_core::trip_duration_stats(&durations);
    let median = stats.median.ok_or("no trips")?;
    let share = stats.share_10_60.ok_or("no trips")?;
    let detail = format!(
        "{} trips, median {median:.1} min, {:.1}% in [10, 60] min",
        stats.count,
        share * 100.0
    );
    ensure!((10.0..=60.0).contains(&median), "{detail}");
    ensure!(share >= 0.5, "{detail}");
    Ok(detail)
}

fn office_sessions(dir: &Path) -> Outcome {
    run_generate(Mode::Office, dir)?;
    let analysis = analyze_path(&dir.join("portugal_office")).map_err(|e| e.to_string())?;
    let modal = analysis.run_lengths.modal_length().ok_or("no connected runs")?;
    ensure!((8..=12).contains(&modal), "modal office run is {modal} h");
    Ok(format!(
        "modal run {modal} h over {} sessions",
        analysis.run_lengths.runs()
    ))
}

fn long_home_sessions(dir: &Path) -> Outcome {
    run_generate(Mode::Home, dir)?;
    let analysis = analyze_path(&dir.join("portugal_home")).map_err(|e| e.to_string())?;
    let longest = analysis.run_lengths.longest().ok_or("no connected runs")?;
    let per_profile: Vec<String> = analysis
        .profiles
        .iter()
        .map(|p| format!("{} {}", p.name, p.run_lengths.longest().unwrap_or(0)))
        .collect();
    ensure!(longest >= 60, "longest home run is {longest} h");
    Ok(format!("longest run {longest} h ({})", per_profile.join(", ")))
}

fn connection_pattern(dir: &Path) -> Outcome {
    let (home, office, _) = generate_both(dir)?;
    let h = analyze_path(&home).map_err(|e| e.to_string())?.hourly;
    let o = analyze_path(&office).map_err(|e| e.to_string())?.hourly;
    let home_margin = h.at_clock(DayClass::Weekday, 3) - h.at_clock(DayClass::Weekday, 11);
    let office_margin = o.at_clock(DayClass::Weekday, 11) - o.at_clock(DayClass::Weekday, 3);
    let detail = format!("home 03:00 - 11:00 = {home_margin:.3}, office 11:00 - 03:00 = {office_margin:.3}");
    ensure!(home_margin >= 0.3 && office_margin >= 0.3, "{detail}");
    Ok(detail)
}

// Random configurations

fn uniform(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    rng.sample_uniform(lo, hi).unwrap()
}

fn int(rng: &mut RngStream, lo: u32, hi_inclusive: u32) -> u32 {
    uniform(rng, f64::from(lo), f64::from(hi_inclusive + 1)).floor() as u32
}

/// Random weights summing to one.
fn simplex(rng: &mut RngStream, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| uniform(rng, 0.05, 1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Disjoint windows inside `[lo, hi)` minutes, on a 10-minute grid.
fn random_windows(rng: &mut RngStream, lo: u32, hi: u32) -> Vec<RoutineBucket> {
    let n = int(rng, 1, 4) as usize;
    let slots = (hi - lo) / 10;
    let mut cuts: Vec<u32> = Vec::new();
    while cuts.len() < 2 * n {
        let c = lo + 10 * int(rng, 0, slots);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let p = simplex(rng, n);
    cuts.chunks(2)
        .zip(p)
        .map(|(c, p)| RoutineBucket::new(p, c[0], c[1]))
        .collect()
}

fn random_distances(rng: &mut RngStream, max_km: f64) -> Vec<DistanceBucket> {
    let n = int(rng, 1, 3) as usize;
    simplex(rng, n)
        .into_iter()
        .map(|p| {
            let min_km = uniform(rng, 1.0, max_km * 0.6);
            DistanceBucket {
                probability: p,
                min_km,
                max_km: uniform(rng, min_km, max_km),
            }
        })
        .collect()
}

fn random_traffic(rng: &mut RngStream) -> Vec<TrafficBucket> {
    let n = int(rng, 1, 4) as usize;
    simplex(rng, n)
        .into_iter()
        .map(|p| {
            let min_increase = uniform(rng, 0.0, 0.5);
            TrafficBucket {
                probability: p,
                min_increase,
                max_increase: uniform(rng, min_increase, 1.5),
            }
        })
        .collect()
}

/// A valid config with `homes` home-bound EVs and `commuters` EVs sharing
/// `plugs` plugs in building 100. Batteries are sized so that one leg never
/// needs more than 90% of the window between the reserve and the SoC cap;
/// a longer leg cannot be driven under any charging policy.
fn random_config(rng: &mut RngStream, homes: u32, commuters: u32, plugs: u32) -> GenerationConfig {
    let mut cfg = scenario();
    cfg.name = "random".into();
    cfg.routine_change = uniform(rng, 0.0, 0.5);
    cfg.charge_during_travel = uniform(rng, 0.0, 0.5);
    cfg.max_soc_cap = uniform(rng, 60.0, 100.0);
    cfg.work_weekend_constant = uniform(rng, 0.0, 0.3);
    cfg.work_weekend_rand_sat = uniform(rng, 0.0, 0.5);
    cfg.work_weekend_rand_sun = uniform(rng, 0.0, 0.5);
    let min_pct = uniform(rng, 10.0, cfg.max_soc_cap * 0.8);
    cfg.charge_bat = ChargeBand {
        min_pct,
        max_pct: uniform(rng, min_pct, cfg.max_soc_cap),
    };
    cfg.day_week = ContextRoutines {
        home: random_windows(rng, 240, 720),
        office: random_windows(rng, 240, 720),
    };
    cfg.night_week = ContextRoutines {
        home: random_windows(rng, 840, 1440),
        office: random_windows(rng, 840, 1440),
    };
    cfg.weekends = WeekendRoutine {
        stay_home: uniform(rng, 0.0, 1.0),
        activities: random_windows(rng, 480, 1320),
    };
    cfg.dist = random_distances(rng, 80.0);
    cfg.dist_weekend = random_distances(rng, 60.0);
    cfg.traffic_week = random_traffic(rng);
    cfg.traffic_weekend = random_traffic(rng);

    let ext = &mut cfg.extensions;
    ext.traffic_energy_coupling = uniform(rng, 0.0, 1.0);
    ext.reserve_soc = uniform(rng, 0.0, 20.0);
    ext.distance_jitter = uniform(rng, 0.0, 0.2);
    ext.average_speed_kmh = uniform(rng, 30.0, 80.0);
    ext.start_weekday = int(rng, 1, 7) as u8;
    ext.start_date = flexigen_core::MonthDay::from_ordinal(int(rng, 1, 365));
    ext.forced_charge = true;

    let longest_km = cfg
        .dist
        .iter()
        .chain(&cfg.dist_weekend)
        .map(|b| b.max_km)
        .fold(0.0, f64::max);
    let worst_factor = 1.0
        + ext.traffic_energy_coupling
            * cfg
                .traffic_week
                .iter()
                .chain(&cfg.traffic_weekend)
                .map(|b| b.max_increase)
                .fold(0.0, f64::max);
    let worst_km = longest_km * (1.0 + ext.distance_jitter);

    cfg.cars.clear();
    cfg.chargers.clear();
    cfg.bindings.clear();
    for i in 0..homes + commuters {
        let consumption = uniform(rng, 0.10, 0.30);
        let usable = (cfg.max_soc_cap - cfg.extensions.reserve_soc) / 100.0;
        let needed = worst_km * consumption * worst_factor / (0.9 * usable);
        let battery_kwh = uniform(rng, 20.0, 100.0).max(needed);
        let id = format!("ev_{i:02}");
        cfg.cars.push(Car {
            id: id.clone(),
            battery_kwh,
            consumption_kwh_per_km: consumption,
        });
        if i < homes {
            cfg.chargers.push(Charger {
                building: i + 1,
                number: 1,
                plug: 1,
                power_kw: 7.4,
            });
            cfg.bindings.push(ScenarioBinding {
                car: id,
                home_charger: Some(ChargerId::new(i + 1, 1, 1)),
                office_building: None,
            });
        } else {
            cfg.bindings.push(ScenarioBinding {
                car: id,
                home_charger: None,
                office_building: Some(100),
            });
        }
    }
    for p in 0..plugs {
        cfg.chargers.push(Charger {
            building: 100,
            number: p / 2 + 1,
            plug: p % 2 + 1,
            power_kw: 22.0,
        });
    }
    cfg
}

fn plug_exclusivity(_: &Path) -> Outcome {
    const DAYS: u32 = 60;
    let mut rng = RngStream::derive(SEED, "acceptance/office-configs");
    let mut checked_hours = 0u64;
    let mut shared = 0u64;
    for n in 0..100 {
        let evs = int(&mut rng, 2, 10);
        let plugs = int(&mut rng, 1, 5);
        let cfg = random_config(&mut rng, 0, evs, plugs);
        let report = validate_config(&cfg);
        ensure!(!report.has_fatal(), "config {n} is invalid: {report}");
        let profiles =
            generate_office_profiles(n, &cfg, &cfg.bindings, DAYS).map_err(|e| format!("config {n}: {e}"))?;
        ensure!(
            profiles.len() == evs as usize,
            "config {n}: {} profiles for {evs} EVs",
            profiles.len()
        );
        for hour in 0..(DAYS as usize * 24) {
            let mut holders: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
            for p in &profiles {
                let r = &p.records[hour];
                match (r.state(), r.charger.as_deref()) {
                    (Some(EvState::Connected | EvState::Incoming), Some(c)) => {
                        holders.entry(c).or_default().push(&p.car_id);
                    }
                    (Some(EvState::Away), None) => {}
                    other => return Err(format!("config {n} hour {hour}: {} has {other:?}", p.car_id)),
                }
            }
            for (plug, cars) in &holders {
                ensure!(cars.len() == 1, "config {n} hour {hour}: {plug} held by {cars:?}");
            }
            shared += holders.len() as u64;
            checked_hours += 1;
        }
    }
    Ok(format!(
        "100 configs, {checked_hours} building-hours, {shared} plug-hours, no conflicts"
    ))
}

fn soc_bounds(cfg: &GenerationConfig, profiles: &[flexigen_core::Profile]) -> Result<usize, String> {
    let cap = cfg.max_soc_cap + 1e-9;
    let ok = |x: f64| (0.0..=cap).contains(&x);
    let mut values = 0;
    for p in profiles {
        for r in &p.records {
            for x in [r.required_soc_departure, r.est_soc_arrival].into_iter().flatten() {
                ensure!(ok(x), "{}: emitted SoC {x} outside [0, {}]", p.car_id, cfg.max_soc_cap);
                values += 1;
            }
        }
        for t in &p.trips {
            for x in [t.start_soc, t.arrival_soc].into_iter().chain(t.mid_trip_charge) {
                ensure!(ok(x), "{}: trip SoC {x} outside [0, {}]", p.car_id, cfg.max_soc_cap);
            }
        }
    }
    Ok(values)
}

fn soc_safety(_: &Path) -> Outcome {
    const DAYS: u32 = 30;
    let mut rng = RngStream::derive(SEED, "acceptance/soc-configs");
    let mut values = 0;
    for n in 0..1000u64 {
        let homes = int(&mut rng, 1, 3);
        let commuters = int(&mut rng, 2, 4);
        let plugs = int(&mut rng, 1, 3);
        let cfg = random_config(&mut rng, homes, commuters, plugs);
        let report = validate_config(&cfg);
        ensure!(!report.has_fatal(), "config {n} is invalid: {report}");
        let home: Vec<_> = cfg.bindings.iter().filter(|b| b.home_charger.is_some()).collect();
        let office: Vec<_> = cfg
            .bindings
            .iter()
            .filter(|b| b.office_building.is_some())
            .cloned()
            .collect();
        let mut profiles = Vec::new();
        for b in home {
            profiles.push(generate_home_profile(n, &cfg, b, DAYS).map_err(|e| format!("config {n}: {e}"))?);
        }
        profiles.extend(generate_office_profiles(n, &cfg, &office, DAYS).map_err(|e| format!("config {n}: {e}"))?);
        values += soc_bounds(&cfg, &profiles)?;
        for p in &profiles {
            let report = validate_dataset(&p.records, RowExpectation::Exact(DAYS as usize * 24));
            ensure!(report.is_clean(), "config {n} {}: {report}", p.car_id);
        }
    }

    // without forced charging a battery too small for the commute must fail
    let mut cfg = parse_config(DEGENERATE).map_err(|e| e.to_string())?;
    cfg.dist = vec![DistanceBucket {
        probability: 1.0,
        min_km: 50.0,
        max_km: 50.0,
    }];
    cfg.cars[0].battery_kwh = 12.0;
    let safe = generate_profiles(&cfg, Mode::Home, SEED).map_err(|e| format!("forced charging on: {e}"))?;
    soc_bounds(&cfg, &safe)?;
    cfg.extensions.forced_charge = false;
    match generate_profiles(&cfg, Mode::Home, SEED) {
        Err(GenerateError::Profile(ProfileError::Mobility(MobilityError::Depletion { .. }))) => {}
        other => return Err(format!("expected a depletion error, got {:?}", other.map(|p| p.len()))),
    }
    Ok(format!(
        "1000 configs x {DAYS} days, {values} emitted SoC values in range, all profiles valid; depletion error raised"
    ))
}

fn oracle_equivalence(dir: &Path) -> Outcome {
    let cfg = parse_config(DEGENERATE).map_err(|e| e.to_string())?;
    let report = validate_config(&cfg);
    ensure!(report.is_clean(), "degenerate config has findings: {report}");
    let profile = generate_home_profile(SEED, &cfg, &cfg.bindings[0], 3).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    write_records(&profile.records, &mut bytes).map_err(|e| e.to_string())?;
    let produced = String::from_utf8(bytes).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("produced.csv"), &produced).map_err(|e| e.to_string())?;
    for (i, (got, want)) in produced.lines().zip(GOLDEN.lines()).enumerate() {
        ensure!(got == want, "line {}: got `{got}`, want `{want}`", i + 1);
    }
    ensure!(
        produced == GOLDEN,
        "{} lines produced, golden has {}",
        produced.lines().count(),
        GOLDEN.lines().count()
    );
    Ok(format!("{} rows match the hand-computed file", profile.records.len()))
}

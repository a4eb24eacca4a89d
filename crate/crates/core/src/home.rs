//! Household EV tracked at its home charger.
//!
//! Each day is planned on its own: the SoC when leaving home equals the
//! required SoC of the session that ends there, so a plan never depends on
//! earlier days except through the earliest allowed departure.

use serde::{Deserialize, Serialize};

use crate::calendar::SimDay;
use crate::config::{Car, ChargerId, GenerationConfig, RoutineBucket, ScenarioBinding, TrafficBucket};
use crate::mobility::{
    decide_mid_trip_charge, sample_distance, sample_required_soc, MobilityError, Place, SocState, StopPolicy, TripLeg,
};
use crate::profile::{ceil_hour, Profile, ProfileError, LOOKAHEAD_DAYS};
use crate::rng::{RngStream, SampleError};
use crate::timeline::{Segment, SegmentKind, Timeline};

/// Attempts at drawing a home arrival that leaves room for the return leg.
const MAX_RESAMPLES: usize = 100;
/// Stay at the destination when resampling gives up.
const FALLBACK_STAY_MIN: i64 = 480;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Commute,
    WeekendTrip,
    StayHome,
    Deviated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayPlan {
    pub day: u32,
    pub kind: PlanKind,
    pub departure: Option<TripLeg>,
    pub return_leg: Option<TripLeg>,
    /// Required SoC of the session that ends at `departure`.
    pub required_soc: f64,
    /// Target of a charge taken at the destination.
    pub away_charge: Option<f64>,
}

impl DayPlan {
    fn stay_home(day: &SimDay, required_soc: f64) -> Self {
        Self {
            day: day.index,
            kind: PlanKind::StayHome,
            departure: None,
            return_leg: None,
            required_soc,
            away_charge: None,
        }
    }

    pub fn legs(&self) -> impl Iterator<Item = &TripLeg> {
        self.departure.iter().chain(self.return_leg.iter())
    }
}

/// Minute drawn uniformly from the union of the windows.
fn sample_union(rng: &mut RngStream, windows: &[RoutineBucket]) -> Result<u32, SampleError> {
    let total: u32 = windows.iter().map(|b| b.hour_max - b.hour_min).sum();
    if total == 0 {
        return Err(SampleError::Empty);
    }
    let mut offset = rng.sample_uniform(0.0, f64::from(total))?.floor() as u32;
    for b in windows {
        let len = b.hour_max - b.hour_min;
        if offset < len {
            return Ok(b.hour_min + offset);
        }
        offset -= len;
    }
    Ok(windows.last().map_or(0, |b| b.hour_max - 1))
}

struct Outing<'a> {
    kind: PlanKind,
    destination: Place,
    depart: i64,
    distance_km: f64,
    traffic: &'a [TrafficBucket],
}

/// Times the round trip, drives both legs and applies away charging.
/// `arrival(rng, earliest_return, return_minutes)` proposes a home-arrival
/// minute; it is retried until the return leg can leave after the outbound
/// one has arrived.
fn round_trip(
    rng: &mut RngStream,
    cfg: &GenerationConfig,
    car: &Car,
    day: &SimDay,
    required_soc: f64,
    outing: Outing<'_>,
    mut arrival: impl FnMut(&mut RngStream, i64, i64) -> Result<i64, SampleError>,
) -> Result<DayPlan, MobilityError> {
    let mut out = TripLeg::sample(
        rng,
        cfg,
        car,
        (Place::Home, outing.destination),
        outing.distance_km,
        outing.traffic,
    )?
    .depart_at(outing.depart);
    let jitter = cfg.extensions.distance_jitter;
    let back_km = outing.distance_km * (1.0 + rng.sample_uniform(-jitter, jitter)?);
    let back = TripLeg::sample(
        rng,
        cfg,
        car,
        (outing.destination, Place::Home),
        back_km,
        outing.traffic,
    )?;

    let earliest_return = out.arrive_minute();
    let mut back_depart = None;
    for _ in 0..MAX_RESAMPLES {
        let home_at = arrival(rng, earliest_return, i64::from(back.duration_min))?;
        let d = home_at - i64::from(back.duration_min);
        if d >= earliest_return {
            back_depart = Some(d);
            break;
        }
    }
    let back_depart = back_depart.unwrap_or(earliest_return + FALLBACK_STAY_MIN);
    let mut back = back.depart_at(back_depart);

    let at_destination = out.drive(rng, cfg, car, SocState::new(required_soc), StopPolicy::ForcedOnly)?;
    let away_charge = decide_away_charge(rng, cfg, car, at_destination, &back)?;
    let start = away_charge.map_or(at_destination, |t| SocState::new(t.max(at_destination.pct())));
    back.drive(rng, cfg, car, start, StopPolicy::ForcedOnly)?;
    Ok(DayPlan {
        day: day.index,
        kind: outing.kind,
        departure: Some(out),
        return_leg: Some(back),
        required_soc,
        away_charge,
    })
}

/// Charge target taken at the destination before heading home: chosen with
/// probability `charge_during_travel`, or forced when the return would end
/// below the reserve.
pub fn decide_away_charge(
    rng: &mut RngStream,
    cfg: &GenerationConfig,
    car: &Car,
    at_destination: SocState,
    return_leg: &TripLeg,
) -> Result<Option<f64>, SampleError> {
    let projected = at_destination.pct() - return_leg.energy_pct(car);
    decide_mid_trip_charge(rng, projected, cfg)
}

/// Monday to Friday outside holidays.
pub fn plan_weekday(
    rng: &mut RngStream,
    cfg: &GenerationConfig,
    car: &Car,
    day: &SimDay,
) -> Result<DayPlan, MobilityError> {
    let required_soc = sample_required_soc(rng, cfg.charge_bat)?;
    let day0 = day.start_minute();
    if rng.bernoulli(cfg.routine_change)? {
        if rng.bernoulli(0.5)? {
            return Ok(DayPlan::stay_home(day, required_soc));
        }
        let union: Vec<RoutineBucket> = cfg.day_week.home.iter().chain(&cfg.night_week.home).copied().collect();
        let a = sample_union(rng, &union)?;
        let b = sample_union(rng, &union)?;
        let (depart, home_at) = (a.min(b), a.max(b));
        let distance_km = sample_distance(rng, &cfg.dist)?;
        let mut first = Some(day0 + i64::from(home_at));
        let outing = Outing {
            kind: PlanKind::Deviated,
            destination: Place::Work,
            depart: day0 + i64::from(depart),
            distance_km,
            traffic: &cfg.traffic_week,
        };
        return round_trip(rng, cfg, car, day, required_soc, outing, |rng, _, _| {
            Ok(match first.take() {
                Some(m) => m,
                None => day0 + i64::from(sample_union(rng, &union)?),
            })
        });
    }
    let bucket = rng.pick(&cfg.day_week.home)?;
    let depart = day0 + i64::from(rng.sample_time_in(bucket)?);
    let distance_km = sample_distance(rng, &cfg.dist)?;
    let outing = Outing {
        kind: PlanKind::Commute,
        destination: Place::Work,
        depart,
        distance_km,
        traffic: &cfg.traffic_week,
    };
    round_trip(rng, cfg, car, day, required_soc, outing, |rng, _, _| {
        let bucket = rng.pick(&cfg.night_week.home)?;
        Ok(day0 + i64::from(rng.sample_time_in(bucket)?))
    })
}

/// Saturdays, Sundays and holidays.
pub fn plan_weekend_day(
    rng: &mut RngStream,
    cfg: &GenerationConfig,
    car: &Car,
    day: &SimDay,
) -> Result<DayPlan, MobilityError> {
    let required_soc = sample_required_soc(rng, cfg.charge_bat)?;
    if rng.bernoulli(cfg.weekends.stay_home)? {
        return Ok(DayPlan::stay_home(day, required_soc));
    }
    let day0 = day.start_minute();
    let bucket = *rng.pick(&cfg.weekends.activities)?;
    let depart = day0 + i64::from(rng.sample_time_in(&bucket)?);
    let distance_km = sample_distance(rng, &cfg.dist_weekend)?;
    let window_end = day0 + i64::from(bucket.hour_max);
    let outing = Outing {
        kind: PlanKind::WeekendTrip,
        destination: Place::Leisure,
        depart,
        distance_km,
        traffic: &cfg.traffic_weekend,
    };
    round_trip(
        rng,
        cfg,
        car,
        day,
        required_soc,
        outing,
        |rng, earliest, back_minutes| {
            // leave the activity somewhere before its window closes
            let hi = window_end.max(earliest);
            let leave = rng.sample_uniform(earliest as f64, hi as f64)?.floor() as i64;
            Ok(leave + back_minutes)
        },
    )
}

pub fn plan_day(
    rng: &mut RngStream,
    cfg: &GenerationConfig,
    car: &Car,
    day: &SimDay,
    not_before: i64,
) -> Result<DayPlan, MobilityError> {
    let plan = if day.is_rest_day() {
        plan_weekend_day(rng, cfg, car, day)?
    } else {
        plan_weekday(rng, cfg, car, day)?
    };
    // a departure must leave at least one whole connected hour after the
    // previous arrival, otherwise the hourly states would jump from 2 to 3
    match &plan.departure {
        Some(leg) if leg.depart_minute < not_before => Ok(DayPlan::stay_home(day, plan.required_soc)),
        _ => Ok(plan),
    }
}

/// All day plans for the horizon plus the lookahead.
pub fn plan_home_days(
    rng: &mut RngStream,
    cfg: &GenerationConfig,
    car: &Car,
    days: u32,
) -> Result<Vec<DayPlan>, MobilityError> {
    let calendar = cfg.calendar();
    let mut not_before = 0;
    let mut plans = Vec::with_capacity(days as usize);
    for day in calendar.days(days) {
        let plan = plan_day(rng, cfg, car, &day, not_before)?;
        if let Some(back) = &plan.return_leg {
            not_before = ceil_hour(back.arrive_minute()) + 60;
        }
        plans.push(plan);
    }
    Ok(plans)
}

/// Segments seen from the home charger. The car starts plugged in.
pub fn home_timeline(
    plans: &[DayPlan],
    charger: ChargerId,
    end_minute: i64,
    tail_required_soc: f64,
) -> Result<Timeline, ProfileError> {
    let mut timeline = Timeline::new();
    let mut session_start = 0;
    for plan in plans {
        let (Some(out), Some(back)) = (&plan.departure, &plan.return_leg) else {
            continue;
        };
        let segments = [
            (
                session_start,
                out.depart_minute,
                SegmentKind::Connected {
                    charger,
                    required_soc: plan.required_soc,
                },
            ),
            (out.depart_minute, out.arrive_minute(), SegmentKind::Outbound),
            (out.arrive_minute(), back.depart_minute, SegmentKind::Away),
            (
                back.depart_minute,
                back.arrive_minute(),
                SegmentKind::Incoming {
                    charger,
                    arrival_soc: back.arrival_soc,
                },
            ),
        ];
        for (start, end, kind) in segments {
            if start < end {
                timeline.push(Segment::new(start, end, kind))?;
            }
        }
        session_start = back.arrive_minute();
    }
    if session_start < end_minute {
        timeline.push(Segment::new(
            session_start,
            end_minute,
            SegmentKind::Connected {
                charger,
                required_soc: tail_required_soc,
            },
        ))?;
    }
    Ok(timeline)
}

pub fn stream_label(car_id: &str) -> String {
    format!("home/{car_id}")
}

pub fn generate_home_profile(
    master_seed: u64,
    cfg: &GenerationConfig,
    binding: &ScenarioBinding,
    horizon_days: u32,
) -> Result<Profile, ProfileError> {
    let car = cfg
        .car(&binding.car)
        .ok_or_else(|| ProfileError::Binding(format!("unknown car `{}`", binding.car)))?;
    let charger = binding
        .home_charger
        .ok_or_else(|| ProfileError::Binding(format!("car `{}` has no home charger", binding.car)))?;
    if cfg.charger(charger).is_none() {
        return Err(ProfileError::Binding(format!("unknown charger {charger}")));
    }
    let mut rng = RngStream::derive(master_seed, &stream_label(&car.id));
    let planned = horizon_days + LOOKAHEAD_DAYS;
    let plans = plan_home_days(&mut rng, cfg, car, planned)?;
    let tail_required_soc = sample_required_soc(&mut rng, cfg.charge_bat)?;
    let end = i64::from(planned) * crate::calendar::MINUTES_PER_DAY;
    let timeline = home_timeline(&plans, charger, end, tail_required_soc)?;
    let records = timeline.expand(&cfg.calendar(), horizon_days)?;
    let horizon_end = i64::from(horizon_days) * crate::calendar::MINUTES_PER_DAY;
    let trips = plans
        .iter()
        .flat_map(DayPlan::legs)
        .filter(|leg| leg.depart_minute < horizon_end)
        .cloned()
        .collect();
    Ok(Profile {
        car_id: car.id.clone(),
        records,
        trips,
    })
}

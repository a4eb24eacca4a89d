//! Commuter fleet tracked at the shared chargers of one office building.
//!
//! Every EV plans all of its visits from its own stream first. Plugs are then
//! handed out first come, first served over the whole horizon, and only after
//! that are the evening legs driven. Allocation sees nothing but the plans, so
//! an EV's output does not depend on the order the bindings are listed in.

use std::collections::BTreeMap;

use crate::calendar::{SimDay, Weekday, MINUTES_PER_DAY};
use crate::config::{Car, ChargerId, GenerationConfig, ScenarioBinding};
use crate::mobility::{sample_distance, sample_required_soc, MobilityError, Place, SocState, StopPolicy, TripLeg};
use crate::profile::{ceil_hour, Profile, ProfileError, LOOKAHEAD_DAYS};
use crate::rng::RngStream;
use crate::timeline::{Segment, SegmentKind, Timeline};

const MAX_RESAMPLES: usize = 100;
const FALLBACK_STAY_MIN: i64 = 480;

/// Per-employee traits drawn once, plus the employee's stream.
#[derive(Debug, Clone)]
pub struct EmployeeProfile {
    pub car: Car,
    pub weekend_worker: bool,
    pub commute_distance: f64,
    pub stream: RngStream,
}

impl EmployeeProfile {
    pub fn new(master_seed: u64, cfg: &GenerationConfig, car: &Car) -> Result<Self, MobilityError> {
        let mut stream = RngStream::derive(master_seed, &stream_label(&car.id));
        let weekend_worker = stream.bernoulli(cfg.work_weekend_constant)?;
        let commute_distance = sample_distance(&mut stream, &cfg.dist)?;
        Ok(Self {
            car: car.clone(),
            weekend_worker,
            commute_distance,
            stream,
        })
    }
}

pub fn stream_label(car_id: &str) -> String {
    format!("office/{car_id}")
}

/// Regular weekend workers always work; others work a given Saturday or
/// Sunday with the configured random-day probability.
pub fn decide_weekend_work(
    cfg: &GenerationConfig,
    employee: &mut EmployeeProfile,
    day: &SimDay,
) -> Result<bool, MobilityError> {
    if employee.weekend_worker {
        return Ok(true);
    }
    let p = if day.weekday == Weekday::SATURDAY {
        cfg.work_weekend_rand_sat
    } else {
        cfg.work_weekend_rand_sun
    };
    Ok(employee.stream.bernoulli(p)?)
}

/// One day at the office, before plugs are allocated.
#[derive(Debug, Clone, PartialEq)]
pub struct OfficeVisit {
    pub day: u32,
    /// Home to office, already driven.
    pub inbound: TripLeg,
    /// Office to home; timed but driven only after allocation.
    pub outbound: TripLeg,
    pub required_soc: f64,
    pub wants_charge: bool,
}

impl OfficeVisit {
    pub fn arrival_minute(&self) -> i64 {
        self.inbound.arrive_minute()
    }

    pub fn departure_minute(&self) -> i64 {
        self.outbound.depart_minute
    }

    /// Hours during which the charger column names the plug: from the hour
    /// the EV leaves home to the last whole hour before it leaves the office.
    pub fn plug_hours(&self) -> (i64, i64) {
        (
            self.inbound.depart_minute.div_euclid(60),
            self.departure_minute().div_euclid(60) - 1,
        )
    }
}

pub fn plan_office_day(
    cfg: &GenerationConfig,
    employee: &mut EmployeeProfile,
    day: &SimDay,
) -> Result<OfficeVisit, MobilityError> {
    let day0 = day.start_minute();
    let car = employee.car.clone();
    let rng = &mut employee.stream;

    let bucket = rng.pick(&cfg.day_week.office)?;
    let arrival = day0 + i64::from(rng.sample_time_in(bucket)?);
    let mut inbound = TripLeg::sample(
        rng,
        cfg,
        &car,
        (Place::Home, Place::Work),
        employee.commute_distance,
        &cfg.traffic_week,
    )?;
    inbound.depart_minute = arrival - i64::from(inbound.duration_min);

    // at least one whole hour plugged in after the arrival hour
    let earliest = ceil_hour(arrival) + 60;
    let mut departure = None;
    for _ in 0..MAX_RESAMPLES {
        let bucket = rng.pick(&cfg.night_week.office)?;
        let d = day0 + i64::from(rng.sample_time_in(bucket)?);
        if d >= earliest {
            departure = Some(d);
            break;
        }
    }
    let departure = departure.unwrap_or(arrival + FALLBACK_STAY_MIN);

    let jitter = cfg.extensions.distance_jitter;
    let back_km = employee.commute_distance * (1.0 + rng.sample_uniform(-jitter, jitter)?);
    let outbound =
        TripLeg::sample(rng, cfg, &car, (Place::Work, Place::Home), back_km, &cfg.traffic_week)?.depart_at(departure);

    let leave_home = sample_required_soc(rng, cfg.charge_bat)?;
    let at_office = inbound.drive(rng, cfg, &car, SocState::new(leave_home), StopPolicy::ForcedOnly)?;
    let required_soc = sample_required_soc(rng, cfg.charge_bat)?;
    let wants_charge = wants_charge(rng, cfg, at_office.pct(), required_soc)?;
    Ok(OfficeVisit {
        day: day.index,
        inbound,
        outbound,
        required_soc,
        wants_charge,
    })
}

/// Certain when the arrival SoC is short of the evening requirement plus the
/// reserve margin, otherwise the general charging propensity.
pub fn wants_charge(
    rng: &mut RngStream,
    cfg: &GenerationConfig,
    arrival_soc: f64,
    required_soc: f64,
) -> Result<bool, MobilityError> {
    if arrival_soc < required_soc + cfg.extensions.reserve_soc {
        return Ok(true);
    }
    Ok(rng.bernoulli(cfg.charge_during_travel)?)
}

/// All visits of one employee over `days` days.
pub fn plan_office_visits(
    cfg: &GenerationConfig,
    employee: &mut EmployeeProfile,
    days: u32,
) -> Result<Vec<OfficeVisit>, MobilityError> {
    let calendar = cfg.calendar();
    let mut visits: Vec<OfficeVisit> = Vec::new();
    for day in calendar.days(days) {
        let works = if day.holiday {
            false
        } else if day.weekday.is_weekend() {
            decide_weekend_work(cfg, employee, &day)?
        } else {
            true
        };
        if !works {
            continue;
        }
        let visit = plan_office_day(cfg, employee, &day)?;
        // the previous evening drive must be over, with an hour to spare
        let clash = visits
            .last()
            .is_some_and(|prev| visit.inbound.depart_minute < prev.outbound.arrive_minute() + 60);
        if !clash {
            visits.push(visit);
        }
    }
    Ok(visits)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlugRequest {
    pub car_id: String,
    pub arrival_minute: i64,
    /// Inclusive hour span the plug is held for.
    pub first_hour: i64,
    pub last_hour: i64,
}

/// Result of first-come-first-served allocation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlugAssignment {
    /// Plug granted to each request, in request order.
    pub granted: Vec<Option<ChargerId>>,
    /// Per plug: first hour -> (last hour, request index).
    by_plug: BTreeMap<ChargerId, BTreeMap<i64, (i64, usize)>>,
}

impl PlugAssignment {
    /// Request index holding `plug` during `hour`.
    pub fn occupant(&self, plug: ChargerId, hour: i64) -> Option<usize> {
        let (_, &(last, idx)) = self.by_plug.get(&plug)?.range(..=hour).next_back()?;
        (hour <= last).then_some(idx)
    }

    pub fn assigned_count(&self) -> usize {
        self.granted.iter().flatten().count()
    }

    fn is_free(&self, plug: ChargerId, first: i64, last: i64) -> bool {
        let Some(held) = self.by_plug.get(&plug) else {
            return true;
        };
        // reservations on one plug are disjoint, so only the latest one
        // starting at or before `last` can overlap
        match held.range(..=last).next_back() {
            Some((_, &(end, _))) => end < first,
            None => true,
        }
    }
}

/// Each request, in order of (arrival minute, car id), takes the lowest free
/// plug for its whole span or goes without.
pub fn allocate_plugs(requests: &[PlugRequest], plugs: &[ChargerId]) -> PlugAssignment {
    let mut plugs = plugs.to_vec();
    plugs.sort_unstable();
    plugs.dedup();
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&requests[a], &requests[b]);
        (ra.arrival_minute, &ra.car_id).cmp(&(rb.arrival_minute, &rb.car_id))
    });
    let mut out = PlugAssignment {
        granted: vec![None; requests.len()],
        by_plug: BTreeMap::new(),
    };
    for idx in order {
        let r = &requests[idx];
        if r.last_hour < r.first_hour {
            continue;
        }
        if let Some(&plug) = plugs.iter().find(|&&p| out.is_free(p, r.first_hour, r.last_hour)) {
            out.by_plug
                .entry(plug)
                .or_default()
                .insert(r.first_hour, (r.last_hour, idx));
            out.granted[idx] = Some(plug);
        }
    }
    out
}

/// Segments seen from the office. Only visits with a plug show up; the rest
/// of the time reads as away.
pub fn office_timeline(visits: &[(OfficeVisit, Option<ChargerId>)]) -> Result<Timeline, ProfileError> {
    let mut timeline = Timeline::new();
    for (visit, plug) in visits {
        let Some(charger) = *plug else { continue };
        let (a, d) = (visit.arrival_minute(), visit.departure_minute());
        timeline.push(Segment::new(
            visit.inbound.depart_minute,
            a,
            SegmentKind::Incoming {
                charger,
                arrival_soc: visit.inbound.arrival_soc,
            },
        ))?;
        timeline.push(Segment::new(
            a,
            d,
            SegmentKind::Connected {
                charger,
                required_soc: visit.required_soc,
            },
        ))?;
        timeline.push(Segment::new(d, visit.outbound.arrive_minute(), SegmentKind::Outbound))?;
    }
    Ok(timeline)
}

/// One profile per binding, sorted by car id.
pub fn generate_office_profiles(
    master_seed: u64,
    cfg: &GenerationConfig,
    bindings: &[ScenarioBinding],
    horizon_days: u32,
) -> Result<Vec<Profile>, ProfileError> {
    let mut building = None;
    for b in bindings {
        let Some(this) = b.office_building else {
            return Err(ProfileError::Binding(format!("car `{}` has no office building", b.car)));
        };
        if building.is_some_and(|other| other != this) {
            return Err(ProfileError::Binding(
                "bindings span more than one office building".into(),
            ));
        }
        building = Some(this);
    }
    let Some(building) = building else {
        return Ok(Vec::new());
    };
    let mut sorted: Vec<&ScenarioBinding> = bindings.iter().collect();
    sorted.sort_by(|a, b| a.car.cmp(&b.car));

    let planned = horizon_days + LOOKAHEAD_DAYS;
    let mut fleet = Vec::with_capacity(sorted.len());
    for b in &sorted {
        let car = cfg
            .car(&b.car)
            .ok_or_else(|| ProfileError::Binding(format!("unknown car `{}`", b.car)))?;
        let mut employee = EmployeeProfile::new(master_seed, cfg, car)?;
        let visits = plan_office_visits(cfg, &mut employee, planned)?;
        fleet.push((employee, visits));
    }

    let mut requests = Vec::new();
    let mut owners = Vec::new();
    for (e, (employee, visits)) in fleet.iter().enumerate() {
        for (v, visit) in visits.iter().enumerate() {
            if visit.wants_charge {
                let (first_hour, last_hour) = visit.plug_hours();
                requests.push(PlugRequest {
                    car_id: employee.car.id.clone(),
                    arrival_minute: visit.arrival_minute(),
                    first_hour,
                    last_hour,
                });
                owners.push((e, v));
            }
        }
    }
    let assignment = allocate_plugs(&requests, &cfg.building_plugs(building));
    let mut plug_of: Vec<Vec<Option<ChargerId>>> = fleet.iter().map(|(_, v)| vec![None; v.len()]).collect();
    for (&(e, v), plug) in owners.iter().zip(&assignment.granted) {
        plug_of[e][v] = *plug;
    }

    let calendar = cfg.calendar();
    let horizon_end = i64::from(horizon_days) * MINUTES_PER_DAY;
    let mut profiles = Vec::with_capacity(fleet.len());
    for ((mut employee, visits), plugs) in fleet.into_iter().zip(plug_of) {
        let car = employee.car.clone();
        let mut placed = Vec::with_capacity(visits.len());
        for (mut visit, plug) in visits.into_iter().zip(plugs) {
            let at_office = visit.inbound.arrival_soc;
            let leave = if plug.is_some() {
                at_office.max(visit.required_soc)
            } else {
                at_office
            };
            visit.outbound.drive(
                &mut employee.stream,
                cfg,
                &car,
                SocState::new(leave),
                StopPolicy::ForcedOnly,
            )?;
            placed.push((visit, plug));
        }
        let records = office_timeline(&placed)?.expand(&calendar, horizon_days)?;
        let trips = placed
            .iter()
            .flat_map(|(v, _)| [&v.inbound, &v.outbound])
            .filter(|leg| leg.depart_minute < horizon_end)
            .cloned()
            .collect();
        profiles.push(Profile {
            car_id: car.id,
            records,
            trips,
        });
    }
    Ok(profiles)
}

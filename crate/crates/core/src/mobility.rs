//! Trip physics: travel time, traffic, energy and state-of-charge bookkeeping.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{Car, ChargeBand, DistanceBucket, GenerationConfig, TrafficBucket};
use crate::rng::{RngStream, SampleError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MobilityError {
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("traffic factor must be at least 1, got {0}")]
    Factor(f64),
    #[error("battery depleted: {soc:.3}% cannot cover {needed:.3}% for this trip")]
    Depletion { soc: f64, needed: f64 },
    #[error(transparent)]
    Sample(#[from] SampleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Place {
    Home,
    Work,
    Leisure,
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Place::Home => "home",
            Place::Work => "work",
            Place::Leisure => "leisure",
        })
    }
}

/// State of charge in percent of battery capacity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SocState(f64);

impl SocState {
    pub fn new(pct: f64) -> Self {
        Self(pct)
    }

    pub fn pct(self) -> f64 {
        self.0
    }

    /// Subtracts the trip's energy. Never clamps: a negative result is a
    /// depletion error.
    pub fn apply_trip(self, energy_kwh: f64, capacity_kwh: f64) -> Result<SocState, MobilityError> {
        positive("battery capacity", capacity_kwh)?;
        let needed = energy_kwh / capacity_kwh * 100.0;
        let left = self.0 - needed;
        if left < -1e-9 {
            return Err(MobilityError::Depletion { soc: self.0, needed });
        }
        Ok(SocState(left.max(0.0)))
    }

    pub fn recharge(self, energy_kwh: f64, capacity_kwh: f64) -> SocState {
        SocState(self.0 + energy_kwh / capacity_kwh * 100.0)
    }
}

fn positive(what: &'static str, value: f64) -> Result<f64, MobilityError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(MobilityError::NonPositive { what, value })
    }
}

/// `1 + increase`, with the increase drawn uniformly inside a row picked by
/// probability.
pub fn sample_traffic_factor(rng: &mut RngStream, table: &[TrafficBucket]) -> Result<f64, SampleError> {
    let bucket = rng.pick(table)?;
    Ok(1.0 + rng.sample_uniform(bucket.min_increase, bucket.max_increase)?)
}

pub fn sample_distance(rng: &mut RngStream, table: &[DistanceBucket]) -> Result<f64, SampleError> {
    let bucket = rng.pick(table)?;
    rng.sample_uniform(bucket.min_km, bucket.max_km)
}

/// Travel time in minutes before rounding.
pub fn trip_minutes(distance_km: f64, speed_kmh: f64, factor: f64) -> Result<f64, MobilityError> {
    positive("distance", distance_km)?;
    positive("speed", speed_kmh)?;
    if !(factor >= 1.0) {
        return Err(MobilityError::Factor(factor));
    }
    Ok(distance_km / speed_kmh * 60.0 * factor)
}

/// Travel time rounded to whole minutes, at least one.
pub fn trip_duration(distance_km: f64, speed_kmh: f64, factor: f64) -> Result<u32, MobilityError> {
    Ok((trip_minutes(distance_km, speed_kmh, factor)?.round() as u32).max(1))
}

/// Energy grows linearly with the extra travel time, scaled by `coupling`.
pub fn trip_energy(distance_km: f64, consumption_kwh_per_km: f64, factor: f64, coupling: f64) -> f64 {
    distance_km * consumption_kwh_per_km * (1.0 + coupling * (factor - 1.0))
}

/// Charge target for an en-route stop, if one happens: either the driver
/// chooses to (`charge_during_travel`) or the projected arrival SoC is under
/// the reserve and forced charging is enabled.
pub fn decide_mid_trip_charge(
    rng: &mut RngStream,
    projected_soc: f64,
    cfg: &GenerationConfig,
) -> Result<Option<f64>, SampleError> {
    let chosen = rng.bernoulli(cfg.charge_during_travel)?;
    let forced = cfg.extensions.forced_charge && projected_soc < cfg.extensions.reserve_soc;
    if chosen || forced {
        Ok(Some(rng.sample_uniform(cfg.charge_bat.min_pct, cfg.max_soc_cap)?))
    } else {
        Ok(None)
    }
}

/// Which en-route stops a leg may make.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopPolicy {
    /// Chosen stops (`charge_during_travel`) and forced ones.
    Voluntary,
    /// Only the reserve-protecting forced stop. Generators that apply the
    /// charging propensity elsewhere use this so it is not counted twice.
    ForcedOnly,
}

/// Target of a forced stop; draws nothing when no stop is needed.
pub fn forced_mid_trip_charge(
    rng: &mut RngStream,
    projected_soc: f64,
    cfg: &GenerationConfig,
) -> Result<Option<f64>, SampleError> {
    if cfg.extensions.forced_charge && projected_soc < cfg.extensions.reserve_soc {
        Ok(Some(rng.sample_uniform(cfg.charge_bat.min_pct, cfg.max_soc_cap)?))
    } else {
        Ok(None)
    }
}

pub fn sample_required_soc(rng: &mut RngStream, band: ChargeBand) -> Result<f64, SampleError> {
    rng.sample_uniform(band.min_pct, band.max_pct)
}

/// One drive between two places.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripLeg {
    pub origin: Place,
    pub destination: Place,
    /// Minutes since the start of the horizon.
    pub depart_minute: i64,
    pub distance_km: f64,
    pub traffic_factor: f64,
    pub duration_min: u32,
    pub energy_kwh: f64,
    pub start_soc: f64,
    pub arrival_soc: f64,
    pub mid_trip_charge: Option<f64>,
}

impl TripLeg {
    /// Draws traffic and derives duration and energy. Departure time and SoC
    /// are filled in later by [`TripLeg::depart_at`] and [`TripLeg::drive`].
    pub fn sample(
        rng: &mut RngStream,
        cfg: &GenerationConfig,
        car: &Car,
        (origin, destination): (Place, Place),
        distance_km: f64,
        traffic: &[TrafficBucket],
    ) -> Result<TripLeg, MobilityError> {
        let traffic_factor = sample_traffic_factor(rng, traffic)?;
        let ext = &cfg.extensions;
        Ok(TripLeg {
            origin,
            destination,
            depart_minute: 0,
            distance_km,
            traffic_factor,
            duration_min: trip_duration(distance_km, ext.average_speed_kmh, traffic_factor)?,
            energy_kwh: trip_energy(
                distance_km,
                car.consumption_kwh_per_km,
                traffic_factor,
                ext.traffic_energy_coupling,
            ),
            start_soc: 0.0,
            arrival_soc: 0.0,
            mid_trip_charge: None,
        })
    }

    pub fn depart_at(mut self, minute: i64) -> Self {
        self.depart_minute = minute;
        self
    }

    pub fn arrive_minute(&self) -> i64 {
        self.depart_minute + i64::from(self.duration_min)
    }

    pub fn energy_pct(&self, car: &Car) -> f64 {
        self.energy_kwh / car.battery_kwh * 100.0
    }

    /// Drives the leg from `start`, possibly stopping to charge on the way.
    ///
    /// A stop happens halfway, or earlier if the SoC would cross the reserve
    /// before the halfway point. The car leaves the stop with the larger of
    /// the target and what it arrived with; with forced charging on, also
    /// with at least enough to finish above the reserve, up to the cap.
    pub fn drive(
        &mut self,
        rng: &mut RngStream,
        cfg: &GenerationConfig,
        car: &Car,
        start: SocState,
        policy: StopPolicy,
    ) -> Result<SocState, MobilityError> {
        let pct = self.energy_pct(car);
        self.start_soc = start.pct();
        let projected = start.pct() - pct;
        let stop = match policy {
            StopPolicy::Voluntary => decide_mid_trip_charge(rng, projected, cfg)?,
            StopPolicy::ForcedOnly => forced_mid_trip_charge(rng, projected, cfg)?,
        };
        let arrival = match stop {
            None => start.apply_trip(self.energy_kwh, car.battery_kwh)?,
            Some(target) => {
                let reserve = cfg.extensions.reserve_soc;
                let share = if pct > 0.0 {
                    ((start.pct() - reserve) / pct).clamp(0.0, 0.5)
                } else {
                    0.5
                };
                let at_stop = start.apply_trip(self.energy_kwh * share, car.battery_kwh)?;
                let mut level = target.max(at_stop.pct());
                if cfg.extensions.forced_charge {
                    // enough for the rest of the leg with the reserve intact
                    let rest = pct * (1.0 - share) + reserve;
                    level = level.max(rest.min(cfg.max_soc_cap));
                }
                let charged = SocState::new(level);
                self.mid_trip_charge = Some(target);
                charged.apply_trip(self.energy_kwh * (1.0 - share), car.battery_kwh)?
            }
        };
        self.arrival_soc = arrival.pct();
        Ok(arrival)
    }
}

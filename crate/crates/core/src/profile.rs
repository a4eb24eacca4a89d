//! What a generator hands back for one EV.

use crate::mobility::{MobilityError, TripLeg};
use crate::rng::SampleError;
use crate::timeline::{EvHourRecord, TimelineError};

/// Extra days planned past the horizon so that countdowns in the last
/// emitted hours point at real future events.
pub const LOOKAHEAD_DAYS: u32 = 14;

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error("binding problem: {0}")]
    Binding(String),
}

impl From<SampleError> for ProfileError {
    fn from(e: SampleError) -> Self {
        ProfileError::Mobility(e.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub car_id: String,
    pub records: Vec<EvHourRecord>,
    /// Minute-resolution log of every leg driven inside the horizon.
    pub trips: Vec<TripLeg>,
}

/// Start of the hour after `minute`, or `minute` itself on a boundary.
pub fn ceil_hour(minute: i64) -> i64 {
    (minute + 59).div_euclid(60) * 60
}

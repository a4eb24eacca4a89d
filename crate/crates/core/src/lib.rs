//! Synthetic EV charging-flexibility profiles.
//!
//! The crate turns a scenario configuration into hourly per-EV records for
//! home chargers or shared office chargers, validates such records and
//! summarizes them.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod calendar;
pub mod config;
pub mod dataset;
pub mod home;
pub mod mobility;
pub mod office;
pub mod profile;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod timeline;

pub use analysis::{
    connection_run_lengths, hourly_profile, trip_duration_stats, DayClass, HourlyConnectionProfile, RunLengthHistogram,
    TripDurationSummary,
};
pub use calendar::{day_type_of, Calendar, HolidayCalendar, MonthDay, SimDay, Weekday};
pub use config::{
    parse_config, validate_config, Car, ChargeBand, Charger, ChargerId, ConfigError, DistanceBucket, GenerationConfig,
    RoutineBucket, ScenarioBinding, TrafficBucket,
};
pub use dataset::{read_csv, validate_dataset, write_csv, DatasetError, RowExpectation};
pub use home::{generate_home_profile, DayPlan, PlanKind};
pub use mobility::{MobilityError, Place, SocState, StopPolicy, TripLeg};
pub use office::{allocate_plugs, generate_office_profiles, EmployeeProfile, PlugAssignment, PlugRequest};
pub use profile::{Profile, ProfileError};
pub use report::{Finding, FindingCode, Severity, ValidationReport};
pub use rng::{RngStream, SampleError};
pub use scenario::{generate_profiles, write_scenario, GenerateError, Manifest, Mode};
pub use timeline::{EvHourRecord, EvState, Segment, SegmentKind, Timeline, TimelineError};

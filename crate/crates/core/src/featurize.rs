//! Vehicle-level telematics features and the time-leap / distance-leap
//! datasets.
//!
//! A *leap* truncates a vehicle's departure-ordered trips to a prefix:
//! the first `k` months (TL) or the first `1000 k` kilometres (DL), for
//! `k = 1..=12`. `k = 0` is the classical-only dataset.
//!
//! Every trip is assigned wholly to the time windows of its departure
//! instant. Windows are half-open hour ranges:
//!
//! | feature | window |
//! |---|---|
//! | `frac_expo_night` | 00h-06h |
//! | `frac_expo_noon` | 11h-14h |
//! | `frac_expo_evening` | 20h-24h |
//! | `frac_expo_peak_morning` | 07h-09h, Monday-Friday |
//! | `frac_expo_peak_evening` | 17h-20h, Monday-Friday |
//! | `frac_expo_mon_to_thu` | Monday-Thursday |
//! | `frac_expo_fri_sat` | Friday-Saturday |

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Timelike, Weekday};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::keyed_hash;
use crate::stats::median_sorted;
use crate::table::{Column, ColumnOrigin, FeatureTable, TableError};
use crate::trip_store::{
    ClassicalValue, TripRecord, VehicleContract, Vin, CLASSICAL_COLUMNS,
};

/// Days in the nominal observed year.
pub const YEAR_DAYS: f64 = 365.25;
/// One time leap.
pub const MONTH_DAYS: f64 = YEAR_DAYS / 12.0;
/// One distance leap, km.
pub const LEAP_KM: f64 = 1000.0;
pub const MAX_LEAP: u8 = 12;
/// A trip longer than this (km) is a long trip.
pub const LONG_TRIP_KM: f64 = 100.0;

pub const TELEMATICS_COLUMNS: [&str; 14] = [
    "avg_daily_distance",
    "avg_daily_nb_trips",
    "med_trip_avg_speed",
    "med_trip_distance",
    "med_trip_max_speed",
    "max_trip_max_speed",
    "prop_long_trip",
    "frac_expo_night",
    "frac_expo_noon",
    "frac_expo_evening",
    "frac_expo_peak_morning",
    "frac_expo_peak_evening",
    "frac_expo_mon_to_thu",
    "frac_expo_fri_sat",
];

/// Telematics features whose claimant/non-claimant means differ
/// significantly in the reference portfolio; with the ten classical columns
/// they are the default interaction sources.
pub const SIGNIFICANT_TELEMATICS: [&str; 7] = [
    "avg_daily_distance",
    "avg_daily_nb_trips",
    "med_trip_avg_speed",
    "max_trip_max_speed",
    "frac_expo_noon",
    "frac_expo_evening",
    "frac_expo_peak_evening",
];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("telematics features are undefined for vin {vin} (no trips in {spec})")]
    NoTrips { vin: Vin, spec: LeapSpec },
    #[error("telematics features need at least one trip")]
    EmptyTrips,
    #[error("exposure must be positive, got {0} days")]
    NonPositiveExposure(f64),
    #[error("leap index {0} is outside 0..=12")]
    BadLeap(u8),
    #[error("truncation needs k >= 1")]
    ClassicalOnly,
    #[error("no contracts to build a dataset from")]
    NoContracts,
    #[error("train fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeapMethod {
    #[serde(rename = "tl")]
    TimeLeap,
    #[serde(rename = "dl")]
    DistanceLeap,
}

impl LeapMethod {
    pub fn code(self) -> &'static str {
        match self {
            LeapMethod::TimeLeap => "tl",
            LeapMethod::DistanceLeap => "dl",
        }
    }
}

impl fmt::Display for LeapMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LeapMethod::TimeLeap => "TL",
            LeapMethod::DistanceLeap => "DL",
        })
    }
}

impl FromStr for LeapMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "tl" | "time" => Ok(LeapMethod::TimeLeap),
            "dl" | "distance" => Ok(LeapMethod::DistanceLeap),
            other => Err(format!("unknown leap method '{other}' (expected tl or dl)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LeapSpec {
    pub method: LeapMethod,
    pub k: u8,
}

impl LeapSpec {
    pub fn new(method: LeapMethod, k: u8) -> Result<Self, FeatureError> {
        if k > MAX_LEAP {
            return Err(FeatureError::BadLeap(k));
        }
        Ok(LeapSpec { method, k })
    }

    pub fn has_telematics(&self) -> bool {
        self.k > 0
    }

    /// `D3_TL` style identifier.
    pub fn id(&self) -> String {
        format!("D{}_{}", self.k, self.method)
    }
}

impl fmt::Display for LeapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// The trips and exposure a leap retains for one vehicle.
#[derive(Clone, Copy, Debug)]
pub struct Truncation<'a> {
    pub trips: &'a [TripRecord],
    pub exposure_days: f64,
}

/// Trips used by a leap. Both schemes keep a prefix of the departure order.
pub fn truncate_trips<'a>(
    contract: &'a VehicleContract,
    spec: LeapSpec,
) -> Result<&'a [TripRecord], FeatureError> {
    Ok(truncate(contract, spec)?.trips)
}

/// [`truncate_trips`] together with the exposure used for the daily averages:
/// TL uses `k` months (365.25 days at `k = 12`); DL uses the days elapsed
/// until the first trip beyond the budget, or the full year when the budget
/// is never reached.
pub fn truncate(contract: &VehicleContract, spec: LeapSpec) -> Result<Truncation<'_>, FeatureError> {
    if spec.k == 0 {
        return Err(FeatureError::ClassicalOnly);
    }
    if spec.k > MAX_LEAP {
        return Err(FeatureError::BadLeap(spec.k));
    }
    let trips = &contract.trips;
    match spec.method {
        LeapMethod::TimeLeap => {
            let horizon = f64::from(spec.k) * MONTH_DAYS;
            let end = if spec.k == MAX_LEAP {
                trips.len()
            } else {
                trips.partition_point(|t| contract.elapsed_days(t.departure) < horizon)
            };
            Ok(Truncation {
                trips: &trips[..end],
                exposure_days: horizon,
            })
        }
        LeapMethod::DistanceLeap => {
            let budget = f64::from(spec.k) * LEAP_KM;
            let mut cum = 0.0;
            let mut end = trips.len();
            for (i, t) in trips.iter().enumerate() {
                cum += t.distance;
                if cum > budget {
                    end = i;
                    break;
                }
            }
            let exposure_days = if end == trips.len() {
                YEAR_DAYS
            } else {
                contract.elapsed_days(trips[end].departure).max(1.0)
            };
            Ok(Truncation {
                trips: &trips[..end],
                exposure_days,
            })
        }
    }
}

/// The 14 vehicle-level telematics features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelematicsFeatures {
    pub avg_daily_distance: f64,
    pub avg_daily_nb_trips: f64,
    pub med_trip_avg_speed: f64,
    pub med_trip_distance: f64,
    pub med_trip_max_speed: f64,
    pub max_trip_max_speed: f64,
    pub prop_long_trip: f64,
    pub frac_expo_night: f64,
    pub frac_expo_noon: f64,
    pub frac_expo_evening: f64,
    pub frac_expo_peak_morning: f64,
    pub frac_expo_peak_evening: f64,
    pub frac_expo_mon_to_thu: f64,
    pub frac_expo_fri_sat: f64,
}

impl TelematicsFeatures {
    /// Values in [`TELEMATICS_COLUMNS`] order.
    pub fn values(&self) -> [f64; 14] {
        [
            self.avg_daily_distance,
            self.avg_daily_nb_trips,
            self.med_trip_avg_speed,
            self.med_trip_distance,
            self.med_trip_max_speed,
            self.max_trip_max_speed,
            self.prop_long_trip,
            self.frac_expo_night,
            self.frac_expo_noon,
            self.frac_expo_evening,
            self.frac_expo_peak_morning,
            self.frac_expo_peak_evening,
            self.frac_expo_mon_to_thu,
            self.frac_expo_fri_sat,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        TELEMATICS_COLUMNS
            .iter()
            .position(|c| *c == name)
            .map(|i| self.values()[i])
    }
}

fn is_weekday(d: Weekday) -> bool {
    !matches!(d, Weekday::Sat | Weekday::Sun)
}

/// Window membership flags of a departure, in exposure-column order.
fn windows(trip: &TripRecord) -> [bool; 7] {
    let h = trip.departure.hour();
    let day = trip.departure.weekday();
    [
        h < 6,
        (11..14).contains(&h),
        h >= 20,
        (7..9).contains(&h) && is_weekday(day),
        (17..20).contains(&h) && is_weekday(day),
        matches!(day, Weekday::Mon | Weekday::Tue | Weekday::Wed | Weekday::Thu),
        matches!(day, Weekday::Fri | Weekday::Sat),
    ]
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

pub fn telematics_features(
    trips: &[TripRecord],
    exposure_days: f64,
) -> Result<TelematicsFeatures, FeatureError> {
    if trips.is_empty() {
        return Err(FeatureError::EmptyTrips);
    }
    if !(exposure_days > 0.0) {
        return Err(FeatureError::NonPositiveExposure(exposure_days));
    }
    let n = trips.len() as f64;
    let total: f64 = trips.iter().map(|t| t.distance).sum();

    let mut expo = [0.0f64; 7];
    for t in trips {
        for (acc, inside) in expo.iter_mut().zip(windows(t)) {
            if inside {
                *acc += t.distance;
            }
        }
    }
    let frac = |x: f64| if total > 0.0 { x / total } else { 0.0 };

    // zero-duration trips have no meaningful average speed
    let speeds = sorted(
        trips
            .iter()
            .filter(|t| t.duration_hours() > 0.0)
            .map(TripRecord::avg_speed)
            .collect(),
    );
    let distances = sorted(trips.iter().map(|t| t.distance).collect());
    let max_speeds = sorted(trips.iter().map(|t| t.max_speed).collect());

    Ok(TelematicsFeatures {
        avg_daily_distance: total / exposure_days,
        avg_daily_nb_trips: n / exposure_days,
        med_trip_avg_speed: if speeds.is_empty() { 0.0 } else { median_sorted(&speeds) },
        med_trip_distance: median_sorted(&distances),
        med_trip_max_speed: median_sorted(&max_speeds),
        max_trip_max_speed: *max_speeds.last().expect("nonempty"),
        prop_long_trip: trips.iter().filter(|t| t.distance > LONG_TRIP_KM).count() as f64 / n,
        frac_expo_night: frac(expo[0]),
        frac_expo_noon: frac(expo[1]),
        frac_expo_evening: frac(expo[2]),
        frac_expo_peak_morning: frac(expo[3]),
        frac_expo_peak_evening: frac(expo[4]),
        frac_expo_mon_to_thu: frac(expo[5]),
        frac_expo_fri_sat: frac(expo[6]),
    })
}

/// Features of one vehicle under a leap.
pub fn vehicle_features(
    contract: &VehicleContract,
    spec: LeapSpec,
) -> Result<TelematicsFeatures, FeatureError> {
    let t = truncate(contract, spec)?;
    telematics_features(t.trips, t.exposure_days).map_err(|e| match e {
        FeatureError::EmptyTrips => FeatureError::NoTrips {
            vin: contract.vin.clone(),
            spec,
        },
        other => other,
    })
}

/// The classical columns `x^c` shared by every dataset.
pub fn classical_columns(contracts: &[VehicleContract]) -> Vec<Column> {
    (0..CLASSICAL_COLUMNS.len())
        .map(|j| {
            let name = CLASSICAL_COLUMNS[j];
            match contracts.first().map(|c| c.classical.values()[j].clone()) {
                Some(ClassicalValue::Categorical(_)) => Column::categorical(
                    name,
                    ColumnOrigin::Classical,
                    contracts
                        .iter()
                        .map(|c| match &c.classical.values()[j] {
                            ClassicalValue::Categorical(s) => s.to_string(),
                            ClassicalValue::Numeric(_) => unreachable!("fixed schema"),
                        })
                        .collect(),
                ),
                _ => Column::numeric(
                    name,
                    ColumnOrigin::Classical,
                    contracts
                        .iter()
                        .map(|c| match c.classical.values()[j] {
                            ClassicalValue::Numeric(v) => v.unwrap_or(f64::NAN),
                            ClassicalValue::Categorical(_) => unreachable!("fixed schema"),
                        })
                        .collect(),
                ),
            }
        })
        .collect()
}

/// Builds `D_k` for one method: the ten classical columns, then (for `k >= 1`)
/// the fourteen telematics columns. Rows follow `contracts` order.
pub fn build_dataset(
    contracts: &[VehicleContract],
    spec: LeapSpec,
) -> Result<FeatureTable, FeatureError> {
    if contracts.is_empty() {
        return Err(FeatureError::NoContracts);
    }
    let mut columns = classical_columns(contracts);
    if spec.has_telematics() {
        let features: Vec<TelematicsFeatures> = contracts
            .par_iter()
            .map(|c| vehicle_features(c, spec))
            .collect::<Result<_, _>>()?;
        for (j, name) in TELEMATICS_COLUMNS.iter().enumerate() {
            columns.push(Column::numeric(
                *name,
                ColumnOrigin::Telematics,
                features.iter().map(|f| f.values()[j]).collect(),
            ));
        }
    }
    let ids = contracts.iter().map(|c| c.vin.clone()).collect();
    let y = contracts.iter().map(|c| u8::from(c.claimed)).collect();
    Ok(FeatureTable::new(ids, columns, y)?)
}

/// Splits contracts into those with at least one trip under every leap of
/// both methods and the vins that lack one. Only the first group can feed
/// all 26 datasets with a common row set.
pub fn observable_contracts(contracts: Vec<VehicleContract>) -> (Vec<VehicleContract>, Vec<Vin>) {
    let keep: Vec<bool> = contracts
        .par_iter()
        .map(|c| {
            // the k = 1 prefixes are the shortest of each method
            [LeapMethod::TimeLeap, LeapMethod::DistanceLeap]
                .iter()
                .all(|&m| {
                    truncate(c, LeapSpec { method: m, k: 1 })
                        .map(|t| !t.trips.is_empty())
                        .unwrap_or(false)
                })
        })
        .collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (c, ok) in contracts.into_iter().zip(keep) {
        if ok {
            kept.push(c);
        } else {
            dropped.push(c.vin);
        }
    }
    (kept, dropped)
}

/// A vin-level train/test partition that is reused for every dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VinPartition {
    pub seed: u64,
    pub train: BTreeSet<Vin>,
    pub test: BTreeSet<Vin>,
}

impl VinPartition {
    /// Draws `round(train_frac * n)` training vins. The draw ranks vins by a
    /// seeded hash, so it does not depend on their input order.
    pub fn draw(ids: &[Vin], train_frac: f64, seed: u64) -> Result<Self, FeatureError> {
        if !(train_frac > 0.0 && train_frac < 1.0) {
            return Err(FeatureError::BadFraction(train_frac));
        }
        let mut ranked: Vec<&Vin> = ids.iter().collect();
        ranked.sort_by_key(|v| (keyed_hash(seed, v.as_str()), (*v).clone()));
        let n_train = (train_frac * ids.len() as f64).round() as usize;
        Ok(VinPartition {
            seed,
            train: ranked[..n_train].iter().map(|v| (*v).clone()).collect(),
            test: ranked[n_train..].iter().map(|v| (*v).clone()).collect(),
        })
    }

    /// Train and test rows of `table`, each in table order. Rows whose vin
    /// is in neither set are dropped.
    pub fn apply(&self, table: &FeatureTable) -> (FeatureTable, FeatureTable) {
        let ids = table.row_ids();
        let train: Vec<usize> = (0..ids.len()).filter(|&i| self.train.contains(&ids[i])).collect();
        let test: Vec<usize> = (0..ids.len()).filter(|&i| self.test.contains(&ids[i])).collect();
        (table.select_rows(&train), table.select_rows(&test))
    }
}

pub fn split_train_test(
    table: &FeatureTable,
    train_frac: f64,
    seed: u64,
) -> Result<(FeatureTable, FeatureTable), FeatureError> {
    Ok(VinPartition::draw(table.row_ids(), train_frac, seed)?.apply(table))
}

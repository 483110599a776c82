//! Trip summaries, contract rows and per-vehicle contract assembly.
//!
//! Trip CSV header: `vin,trip_number,departure,arrival,distance,max_speed`
//! with datetimes written `yyyy-mm-dd HH:MM:SS` (naive local time).
//!
//! Contract CSV header: `vin,contract_start,contract_end,claimed,` followed by
//! the ten classical columns in [`CLASSICAL_COLUMNS`] order. A missing
//! `commute_distance` is an empty field.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRIP_HEADER: [&str; 6] = [
    "vin",
    "trip_number",
    "departure",
    "arrival",
    "distance",
    "max_speed",
];

/// Classical contract features, in file order.
pub const CLASSICAL_COLUMNS: [&str; 10] = [
    "annual_distance",
    "commute_distance",
    "conv_count_3_yrs_minor",
    "gender",
    "marital_status",
    "pmt_plan",
    "veh_age",
    "veh_use",
    "years_claim_free",
    "years_licensed",
];

/// Which classical columns are categorical.
pub const CLASSICAL_CATEGORICAL: [&str; 4] = ["gender", "marital_status", "pmt_plan", "veh_use"];

pub const DATETIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";
pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Accepted contract lengths (days) for a "one-year" contract.
pub const FULL_YEAR_DAYS: std::ops::RangeInclusive<i64> = 364..=366;

#[derive(Debug, Error)]
pub enum TripStoreError {
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("duplicate contract row for vin {vin} ({start} to {end})")]
    DuplicateContract {
        vin: Vin,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("vin {vin}: duplicate trip number {trip_number}")]
    DuplicateTripNumber { vin: Vin, trip_number: u32 },
    #[error("vin {vin}: two trips depart at {departure}")]
    DuplicateDeparture { vin: Vin, departure: NaiveDateTime },
    #[error("invalid trip record: {0}")]
    InvalidTrip(String),
}

/// Opaque vehicle identifier. Cheap to clone; every trip carries one.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vin(Arc<str>);

impl Vin {
    pub fn new(id: &str) -> Self {
        Vin(Arc::from(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Vin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Vin {
    fn from(s: &str) -> Self {
        Vin::new(s)
    }
}

/// One trip summary row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub vin: Vin,
    pub trip_number: u32,
    pub departure: NaiveDateTime,
    pub arrival: NaiveDateTime,
    /// Kilometres.
    pub distance: f64,
    /// km/h.
    pub max_speed: f64,
}

impl TripRecord {
    pub fn new(
        vin: Vin,
        trip_number: u32,
        departure: NaiveDateTime,
        arrival: NaiveDateTime,
        distance: f64,
        max_speed: f64,
    ) -> Result<Self, TripStoreError> {
        let trip = TripRecord {
            vin,
            trip_number,
            departure,
            arrival,
            distance,
            max_speed,
        };
        trip.validate().map_err(TripStoreError::InvalidTrip)?;
        Ok(trip)
    }

    fn validate(&self) -> Result<(), String> {
        if self.trip_number == 0 {
            return Err("trip_number must be positive".into());
        }
        if !self.distance.is_finite() || self.distance < 0.0 {
            return Err(format!("negative or non-finite distance {}", self.distance));
        }
        if !self.max_speed.is_finite() || self.max_speed < 0.0 {
            return Err(format!(
                "negative or non-finite max_speed {}",
                self.max_speed
            ));
        }
        if self.arrival < self.departure {
            return Err("non-positive duration: arrival before departure".into());
        }
        Ok(())
    }

    pub fn duration_hours(&self) -> f64 {
        (self.arrival - self.departure).num_seconds() as f64 / 3600.0
    }

    /// Average speed in km/h; zero for zero-duration trips.
    pub fn avg_speed(&self) -> f64 {
        let hours = self.duration_hours();
        if hours > 0.0 {
            self.distance / hours
        } else {
            0.0
        }
    }
}

/// A rejected input row. `line` is the 1-based line number in the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedTrips {
    pub trips: Vec<TripRecord>,
    pub rejected: Vec<RowError>,
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), TripStoreError> {
    let matches = found.len() == expected.len()
        && found.iter().zip(expected).all(|(a, b)| a.trim() == *b);
    if matches {
        Ok(())
    } else {
        Err(TripStoreError::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        })
    }
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_f64(field: &str, name: &str) -> Result<f64, String> {
    let value: f64 = field
        .parse()
        .map_err(|_| format!("malformed {name} '{field}'"))?;
    if !value.is_finite() {
        return Err(format!("non-finite {name} '{field}'"));
    }
    Ok(value)
}

fn parse_datetime(field: &str, name: &str) -> Result<NaiveDateTime, String> {
    NaiveDateTime::parse_from_str(field, DATETIME_FORMAT)
        .map_err(|_| format!("malformed {name} timestamp '{field}'"))
}

fn parse_date(field: &str, name: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(field, DATE_FORMAT)
        .map_err(|_| format!("malformed {name} date '{field}'"))
}

fn trip_from_record(record: &csv::StringRecord) -> Result<TripRecord, String> {
    if record.len() != TRIP_HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            TRIP_HEADER.len(),
            record.len()
        ));
    }
    let vin = record[0].trim();
    if vin.is_empty() {
        return Err("empty vin".into());
    }
    let trip_number: u32 = record[1]
        .trim()
        .parse()
        .map_err(|_| format!("malformed trip_number '{}'", &record[1]))?;
    let departure = parse_datetime(record[2].trim(), "departure")?;
    let arrival = parse_datetime(record[3].trim(), "arrival")?;
    let distance = parse_f64(record[4].trim(), "distance")?;
    let max_speed = parse_f64(record[5].trim(), "max_speed")?;
    let trip = TripRecord {
        vin: Vin::new(vin),
        trip_number,
        departure,
        arrival,
        distance,
        max_speed,
    };
    trip.validate()?;
    Ok(trip)
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

/// Parses a trip CSV stream. Bad rows are collected with their line numbers;
/// only a header mismatch or an I/O failure aborts the parse.
pub fn parse_trips<R: Read>(source: R) -> Result<ParsedTrips, TripStoreError> {
    let mut rdr = reader(source);
    check_header(rdr.headers()?, &TRIP_HEADER)?;
    let mut out = ParsedTrips::default();
    for result in rdr.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.rejected.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match trip_from_record(&record) {
            Ok(trip) => out.trips.push(trip),
            Err(message) => out.rejected.push(RowError {
                line: record_line(&record),
                message,
            }),
        }
    }
    Ok(out)
}

/// Shortest round-trip decimal representation.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_trips<W: Write>(sink: W, trips: &[TripRecord]) -> Result<(), TripStoreError> {
    let mut wtr = csv::Writer::from_writer(sink);
    wtr.write_record(TRIP_HEADER)?;
    for t in trips {
        wtr.write_record([
            t.vin.as_str(),
            &t.trip_number.to_string(),
            &t.departure.format(DATETIME_FORMAT).to_string(),
            &t.arrival.format(DATETIME_FORMAT).to_string(),
            &fmt_f64(t.distance),
            &fmt_f64(t.max_speed),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// The ten classical rating features of a contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalProfile {
    pub annual_distance: f64,
    pub commute_distance: Option<f64>,
    pub conv_count_3_yrs_minor: f64,
    pub gender: String,
    pub marital_status: String,
    pub pmt_plan: String,
    pub veh_age: f64,
    pub veh_use: String,
    pub years_claim_free: f64,
    pub years_licensed: f64,
}

/// Classical column value: numeric (`None` = missing) or categorical.
#[derive(Clone, Debug, PartialEq)]
pub enum ClassicalValue<'a> {
    Numeric(Option<f64>),
    Categorical(&'a str),
}

impl ClassicalProfile {
    /// Values in [`CLASSICAL_COLUMNS`] order.
    pub fn values(&self) -> [ClassicalValue<'_>; 10] {
        use ClassicalValue::*;
        [
            Numeric(Some(self.annual_distance)),
            Numeric(self.commute_distance),
            Numeric(Some(self.conv_count_3_yrs_minor)),
            Categorical(&self.gender),
            Categorical(&self.marital_status),
            Categorical(&self.pmt_plan),
            Numeric(Some(self.veh_age)),
            Categorical(&self.veh_use),
            Numeric(Some(self.years_claim_free)),
            Numeric(Some(self.years_licensed)),
        ]
    }

    fn validate(&self) -> Result<(), String> {
        let numeric = [
            ("annual_distance", Some(self.annual_distance)),
            ("commute_distance", self.commute_distance),
            ("conv_count_3_yrs_minor", Some(self.conv_count_3_yrs_minor)),
            ("veh_age", Some(self.veh_age)),
            ("years_claim_free", Some(self.years_claim_free)),
            ("years_licensed", Some(self.years_licensed)),
        ];
        for (name, v) in numeric {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(format!("{name} must be a non-negative number, got {v}"));
                }
            }
        }
        for (name, v) in [
            ("gender", &self.gender),
            ("marital_status", &self.marital_status),
            ("pmt_plan", &self.pmt_plan),
            ("veh_use", &self.veh_use),
        ] {
            if v.is_empty() {
                return Err(format!("{name} is missing"));
            }
        }
        Ok(())
    }
}

/// One row of the contract CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractRow {
    pub vin: Vin,
    pub contract_start: NaiveDate,
    pub contract_end: NaiveDate,
    pub claimed: bool,
    pub classical: ClassicalProfile,
}

impl ContractRow {
    pub fn length_days(&self) -> i64 {
        (self.contract_end - self.contract_start).num_days()
    }

    pub fn is_full_year(&self) -> bool {
        FULL_YEAR_DAYS.contains(&self.length_days())
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParsedContracts {
    pub contracts: Vec<ContractRow>,
    pub rejected: Vec<RowError>,
}

pub fn contract_header() -> Vec<&'static str> {
    let mut h = vec!["vin", "contract_start", "contract_end", "claimed"];
    h.extend(CLASSICAL_COLUMNS);
    h
}

fn contract_from_record(record: &csv::StringRecord) -> Result<ContractRow, String> {
    if record.len() != 14 {
        return Err(format!("expected 14 fields, found {}", record.len()));
    }
    let vin = record[0].trim();
    if vin.is_empty() {
        return Err("empty vin".into());
    }
    let contract_start = parse_date(&record[1], "contract_start")?;
    let contract_end = parse_date(&record[2], "contract_end")?;
    if contract_end <= contract_start {
        return Err("contract_end must be after contract_start".into());
    }
    let claimed = match &record[3] {
        "0" => false,
        "1" => true,
        other => return Err(format!("claimed must be 0 or 1, got '{other}'")),
    };
    let num = |i: usize| parse_f64(&record[i], CLASSICAL_COLUMNS[i - 4]);
    let commute_distance = if record[5].is_empty() {
        None
    } else {
        Some(num(5)?)
    };
    let classical = ClassicalProfile {
        annual_distance: num(4)?,
        commute_distance,
        conv_count_3_yrs_minor: num(6)?,
        gender: record[7].to_string(),
        marital_status: record[8].to_string(),
        pmt_plan: record[9].to_string(),
        veh_age: num(10)?,
        veh_use: record[11].to_string(),
        years_claim_free: num(12)?,
        years_licensed: num(13)?,
    };
    classical.validate()?;
    Ok(ContractRow {
        vin: Vin::new(vin),
        contract_start,
        contract_end,
        claimed,
        classical,
    })
}

pub fn parse_contracts<R: Read>(source: R) -> Result<ParsedContracts, TripStoreError> {
    let mut rdr = reader(source);
    check_header(rdr.headers()?, &contract_header())?;
    let mut out = ParsedContracts::default();
    for result in rdr.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.rejected.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match contract_from_record(&record) {
            Ok(row) => out.contracts.push(row),
            Err(message) => out.rejected.push(RowError {
                line: record_line(&record),
                message,
            }),
        }
    }
    Ok(out)
}

pub fn write_contracts<W: Write>(sink: W, rows: &[ContractRow]) -> Result<(), TripStoreError> {
    let mut wtr = csv::Writer::from_writer(sink);
    wtr.write_record(contract_header())?;
    for r in rows {
        let c = &r.classical;
        wtr.write_record([
            r.vin.as_str().to_string(),
            r.contract_start.format(DATE_FORMAT).to_string(),
            r.contract_end.format(DATE_FORMAT).to_string(),
            if r.claimed { "1" } else { "0" }.to_string(),
            fmt_f64(c.annual_distance),
            c.commute_distance.map(fmt_f64).unwrap_or_default(),
            fmt_f64(c.conv_count_3_yrs_minor),
            c.gender.clone(),
            c.marital_status.clone(),
            c.pmt_plan.clone(),
            fmt_f64(c.veh_age),
            c.veh_use.clone(),
            fmt_f64(c.years_claim_free),
            fmt_f64(c.years_licensed),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One vehicle's observed year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleContract {
    pub vin: Vin,
    pub contract_start: NaiveDate,
    pub contract_end: NaiveDate,
    /// Ordered by departure.
    pub trips: Vec<TripRecord>,
    pub classical: ClassicalProfile,
    pub claimed: bool,
}

impl VehicleContract {
    pub fn window_start(&self) -> NaiveDateTime {
        self.contract_start.and_hms_opt(0, 0, 0).expect("midnight")
    }

    pub fn window_end(&self) -> NaiveDateTime {
        self.contract_end.and_hms_opt(0, 0, 0).expect("midnight")
    }

    pub fn length_days(&self) -> i64 {
        (self.contract_end - self.contract_start).num_days()
    }

    /// Days elapsed between contract start and `t`.
    pub fn elapsed_days(&self, t: NaiveDateTime) -> f64 {
        (t - self.window_start()).num_seconds() as f64 / 86_400.0
    }

    pub fn offset(&self, days: f64) -> NaiveDateTime {
        self.window_start() + Duration::milliseconds((days * 86_400_000.0).round() as i64)
    }

    pub fn total_distance(&self) -> f64 {
        self.trips.iter().map(|t| t.distance).sum()
    }

    pub fn to_row(&self) -> ContractRow {
        ContractRow {
            vin: self.vin.clone(),
            contract_start: self.contract_start,
            contract_end: self.contract_end,
            claimed: self.claimed,
            classical: self.classical.clone(),
        }
    }
}

/// Result of [`assemble_contracts`].
#[derive(Clone, Debug, Default)]
pub struct Assembly {
    /// Sorted by vin.
    pub contracts: Vec<VehicleContract>,
    /// Vins kept with an empty trip list; their telematics features are undefined.
    pub no_trip_vins: Vec<Vin>,
    /// Vins without any full-year contract.
    pub excluded_vins: Vec<Vin>,
    /// Trips not attached to a selected contract (wrong vin or outside the window).
    pub dropped_trips: usize,
}

/// Selects each vehicle's earliest full-year contract and attaches the trips
/// departing inside its window `[start 00:00, end 00:00]`.
pub fn assemble_contracts(
    trips: &[TripRecord],
    contracts: &[ContractRow],
) -> Result<Assembly, TripStoreError> {
    let mut seen = HashSet::new();
    for c in contracts {
        if !seen.insert((c.vin.clone(), c.contract_start, c.contract_end)) {
            return Err(TripStoreError::DuplicateContract {
                vin: c.vin.clone(),
                start: c.contract_start,
                end: c.contract_end,
            });
        }
    }

    let mut by_vin: BTreeMap<&Vin, Vec<&ContractRow>> = BTreeMap::new();
    for c in contracts {
        by_vin.entry(&c.vin).or_default().push(c);
    }

    let mut trips_by_vin: BTreeMap<&Vin, Vec<&TripRecord>> = BTreeMap::new();
    for t in trips {
        trips_by_vin.entry(&t.vin).or_default().push(t);
    }

    let mut out = Assembly::default();
    let mut attached = 0usize;
    for (vin, rows) in by_vin {
        let selected = rows
            .iter()
            .filter(|r| r.is_full_year())
            .min_by_key(|r| (r.contract_start, r.contract_end));
        let Some(row) = selected else {
            out.excluded_vins.push(vin.clone());
            continue;
        };
        let start = row.contract_start.and_hms_opt(0, 0, 0).expect("midnight");
        let end = row.contract_end.and_hms_opt(0, 0, 0).expect("midnight");
        let mut own: Vec<TripRecord> = trips_by_vin
            .get(vin)
            .map(|ts| {
                ts.iter()
                    .filter(|t| t.departure >= start && t.departure <= end)
                    .map(|t| (*t).clone())
                    .collect()
            })
            .unwrap_or_default();
        own.sort_by(|a, b| {
            a.departure
                .cmp(&b.departure)
                .then(a.trip_number.cmp(&b.trip_number))
        });
        let mut numbers = HashSet::with_capacity(own.len());
        for t in &own {
            if !numbers.insert(t.trip_number) {
                return Err(TripStoreError::DuplicateTripNumber {
                    vin: vin.clone(),
                    trip_number: t.trip_number,
                });
            }
        }
        if let Some(w) = own.windows(2).find(|w| w[0].departure == w[1].departure) {
            return Err(TripStoreError::DuplicateDeparture {
                vin: vin.clone(),
                departure: w[0].departure,
            });
        }
        attached += own.len();
        if own.is_empty() {
            out.no_trip_vins.push(vin.clone());
        }
        out.contracts.push(VehicleContract {
            vin: vin.clone(),
            contract_start: row.contract_start,
            contract_end: row.contract_end,
            trips: own,
            classical: row.classical.clone(),
            claimed: row.claimed,
        });
    }
    out.dropped_trips = trips.len() - attached;
    Ok(out)
}

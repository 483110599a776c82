//! Synthetic fleets with a planted claim signal.
//!
//! Each vehicle belongs to a latent driver class and gets its own trip rate,
//! distance scale, speed scale and hour-of-day profile. Trips are drawn day
//! by day for a *pattern period*; with a saturation horizon of `K` months the
//! period is `K` months rounded to whole weeks and the pattern is replayed
//! for the rest of the contract, so telematics features computed from
//! `k >= K` months carry no information beyond the first `K`.
//!
//! Claims are Bernoulli with `logit p = b0 + sum_f c_f z_f`, where `z_f` is
//! feature `f` of the vehicle's pattern standardized over the fleet (or the
//! 0/1 indicator for `column=level` keys). `b0` is solved by bisection so the
//! mean claim probability equals the target rate.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featurize::{telematics_features, MONTH_DAYS, TELEMATICS_COLUMNS};
use crate::linear_models::sigmoid;
use crate::rng;
use crate::trip_store::{
    write_contracts, write_trips, ClassicalProfile, ContractRow, TripRecord, TripStoreError, Vin,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("target claim rate {0} cannot be reached")]
    Infeasible(f64),
    #[error(transparent)]
    Write(#[from] TripStoreError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriverClass {
    pub name: String,
    pub weight: f64,
    /// Mean trips per day.
    pub trips_per_day: f64,
    /// Median trip distance, km, and log-sd of trip distances.
    pub distance_median: f64,
    pub distance_log_sd: f64,
    /// Median average speed, km/h.
    pub speed_median: f64,
    pub speed_log_sd: f64,
    /// Relative departure-hour weights.
    pub hours: Vec<f64>,
    /// Relative trip-rate weights Monday..Sunday.
    pub weekdays: Vec<f64>,
    /// Optional full departure grid, 7 weekday rows of 24 hour weights.
    /// Replaces `hours` and `weekdays`: row sums set the daily rates.
    pub grid: Option<Vec<Vec<f64>>>,
}

impl DriverClass {
    /// Departure weights per weekday and hour, rows scaled to mean sum 1.
    pub fn departure_grid(&self) -> Vec<Vec<f64>> {
        let raw: Vec<Vec<f64>> = match &self.grid {
            Some(g) => g.clone(),
            None => {
                let hs: f64 = self.hours.iter().sum();
                self.weekdays.iter().map(|d| self.hours.iter().map(|h| d * h / hs).collect()).collect()
            }
        };
        let mean = raw.iter().map(|r| r.iter().sum::<f64>()).sum::<f64>() / 7.0;
        raw.into_iter().map(|r| r.into_iter().map(|v| v / mean).collect()).collect()
    }
}

impl Default for DriverClass {
    fn default() -> Self {
        DriverClass {
            name: "default".into(),
            weight: 1.0,
            trips_per_day: 2.2,
            distance_median: 10.0,
            distance_log_sd: 0.9,
            speed_median: 50.0,
            speed_log_sd: 0.25,
            hours: vec![1.0; 24],
            weekdays: vec![1.0; 7],
            grid: None,
        }
    }
}

fn hours(peaks: &[(usize, f64)], base: f64) -> Vec<f64> {
    let mut h = vec![base; 24];
    for &(i, w) in peaks {
        h[i] += w;
    }
    h
}

pub fn default_classes() -> Vec<DriverClass> {
    vec![
        DriverClass {
            name: "commuter".into(),
            weight: 0.5,
            trips_per_day: 2.4,
            distance_median: 12.0,
            distance_log_sd: 0.9,
            speed_median: 55.0,
            speed_log_sd: 0.25,
            hours: hours(&[(7, 4.0), (8, 3.0), (12, 1.0), (16, 2.0), (17, 4.0), (18, 2.0)], 0.3),
            weekdays: vec![1.2, 1.2, 1.2, 1.2, 1.2, 0.6, 0.4],
            grid: None,
        },
        DriverClass {
            name: "urban".into(),
            weight: 0.3,
            trips_per_day: 2.8,
            distance_median: 6.0,
            distance_log_sd: 0.8,
            speed_median: 35.0,
            speed_log_sd: 0.25,
            hours: hours(&[(9, 1.5), (10, 1.5), (11, 2.0), (12, 2.0), (13, 2.0), (14, 1.5), (15, 1.5), (19, 1.0)], 0.2),
            weekdays: vec![1.0, 1.0, 1.0, 1.0, 1.1, 1.2, 0.7],
            grid: None,
        },
        DriverClass {
            name: "night".into(),
            weight: 0.2,
            trips_per_day: 1.6,
            distance_median: 20.0,
            distance_log_sd: 1.0,
            speed_median: 70.0,
            speed_log_sd: 0.25,
            hours: hours(&[(0, 1.5), (1, 1.0), (2, 0.8), (3, 0.5), (20, 1.5), (21, 2.0), (22, 2.0), (23, 2.0)], 0.3),
            weekdays: vec![0.8, 0.8, 0.9, 1.0, 1.2, 1.4, 0.9],
            grid: None,
        },
    ]
}

/// Spread of vehicle-level parameters around their class values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Heterogeneity {
    pub rate_log_sd: f64,
    pub distance_log_sd: f64,
    pub speed_log_sd: f64,
    /// Log-sd of multiplicative noise on each hour weight.
    pub hour_log_sd: f64,
}

impl Default for Heterogeneity {
    fn default() -> Self {
        Heterogeneity {
            rate_log_sd: 0.1,
            distance_log_sd: 0.1,
            speed_log_sd: 0.05,
            hour_log_sd: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClaimModel {
    pub target_rate: f64,
    /// Coefficients on fleet-standardized pattern features (telematics or
    /// numeric classical names) or on `column=level` indicators.
    pub coefficients: BTreeMap<String, f64>,
}

impl Default for ClaimModel {
    fn default() -> Self {
        ClaimModel {
            target_rate: 0.053,
            coefficients: BTreeMap::from([
                ("avg_daily_distance".to_string(), 0.45),
                ("avg_daily_nb_trips".to_string(), 0.3),
                ("frac_expo_night".to_string(), 0.4),
                ("med_trip_avg_speed".to_string(), 0.3),
                ("frac_expo_peak_evening".to_string(), 0.2),
            ]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_vehicles: usize,
    pub seed: u64,
    /// Earliest contract start; starts are spread over the following year.
    pub first_start: NaiveDate,
    pub start_spread_days: i64,
    pub contract_days: i64,
    /// Months after which behaviour repeats; `None` never repeats.
    pub saturation_months: Option<f64>,
    pub classes: Vec<DriverClass>,
    pub heterogeneity: Heterogeneity,
    pub claims: ClaimModel,
    pub commute_missing_rate: f64,
    /// Longest trip drawn, km.
    pub max_trip_km: f64,
    /// Elasticity of the declared annual distance with respect to the
    /// driven one; 0 makes it independent of driving.
    pub annual_distance_link: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_vehicles: 3000,
            seed: 0,
            first_start: NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date"),
            start_spread_days: 365,
            contract_days: 365,
            saturation_months: Some(3.0),
            classes: default_classes(),
            heterogeneity: Heterogeneity::default(),
            claims: ClaimModel::default(),
            commute_missing_rate: 0.223,
            max_trip_km: 800.0,
            annual_distance_link: 0.0,
        }
    }
}

const NUMERIC_CLASSICAL: [&str; 6] = [
    "annual_distance",
    "commute_distance",
    "conv_count_3_yrs_minor",
    "veh_age",
    "years_claim_free",
    "years_licensed",
];

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.n_vehicles == 0 {
            return bad("n_vehicles must be positive".into());
        }
        if self.classes.is_empty() {
            return bad("at least one driver class is required".into());
        }
        let w: f64 = self.classes.iter().map(|c| c.weight).sum();
        if (w - 1.0).abs() > 1e-9 || self.classes.iter().any(|c| c.weight < 0.0) {
            return bad(format!("class weights must be nonnegative and sum to 1 (sum {w})"));
        }
        for c in &self.classes {
            match &c.grid {
                Some(g) => {
                    if g.len() != 7 || g.iter().any(|r| r.len() != 24) {
                        return bad(format!("class {} grid must be 7 rows of 24 weights", c.name));
                    }
                    if g.iter().flatten().any(|v| !(*v >= 0.0)) || g.iter().flatten().sum::<f64>() <= 0.0 {
                        return bad(format!("class {} has invalid grid weights", c.name));
                    }
                }
                None => {
                    if c.hours.len() != 24 || c.weekdays.len() != 7 {
                        return bad(format!("class {} needs 24 hour and 7 weekday weights", c.name));
                    }
                    if c.hours.iter().chain(&c.weekdays).any(|v| !(*v >= 0.0))
                        || c.hours.iter().sum::<f64>() <= 0.0
                        || c.weekdays.iter().sum::<f64>() <= 0.0
                    {
                        return bad(format!("class {} has invalid weights", c.name));
                    }
                }
            }
            if !(c.trips_per_day > 0.0 && c.distance_median > 0.0 && c.speed_median > 0.0) {
                return bad(format!("class {} needs positive rates and medians", c.name));
            }
        }
        if !(364..=366).contains(&self.contract_days) {
            return bad("contract_days must be a full year (364..=366)".into());
        }
        if let Some(k) = self.saturation_months {
            if !(k > 0.0) {
                return bad("saturation_months must be positive".into());
            }
        }
        if !(0.0..1.0).contains(&self.commute_missing_rate) {
            return bad("commute_missing_rate must be in [0, 1)".into());
        }
        for key in self.claims.coefficients.keys() {
            let known = TELEMATICS_COLUMNS.contains(&key.as_str())
                || NUMERIC_CLASSICAL.contains(&key.as_str())
                || key.split_once('=').is_some_and(|(c, _)| crate::trip_store::CLASSICAL_CATEGORICAL.contains(&c));
            if !known {
                return bad(format!("unknown claim-model feature '{key}'"));
            }
        }
        Ok(())
    }

    /// Days in one replayed pattern.
    pub fn pattern_days(&self) -> i64 {
        match self.saturation_months {
            Some(k) => (((k * MONTH_DAYS) / 7.0).round() as i64).max(1) * 7,
            None => self.contract_days + 1,
        }
        .min(self.contract_days + 1)
    }
}

/// Ground truth kept for each generated vehicle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleTruth {
    pub vin: Vin,
    pub class: String,
    pub claim_probability: f64,
    pub pattern_features: [f64; 14],
}

#[derive(Clone, Debug)]
pub struct SyntheticFleet {
    pub trips: Vec<TripRecord>,
    pub contracts: Vec<ContractRow>,
    pub truth: Vec<VehicleTruth>,
    pub intercept: f64,
}

impl SyntheticFleet {
    pub fn write_csv<W1: Write, W2: Write>(&self, trips: W1, contracts: W2) -> Result<(), SynthError> {
        write_trips(trips, &self.trips)?;
        write_contracts(contracts, &self.contracts)?;
        Ok(())
    }

    pub fn claim_rate(&self) -> f64 {
        self.contracts.iter().filter(|c| c.claimed).count() as f64 / self.contracts.len() as f64
    }
}

fn pick(weights: &[f64], r: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = r.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn choose<'a>(options: &[(&'a str, f64)], r: &mut ChaCha8Rng) -> &'a str {
    let w: Vec<f64> = options.iter().map(|o| o.1).collect();
    options[pick(&w, r)].0
}

struct Vehicle {
    vin: Vin,
    class: usize,
    start: NaiveDate,
    trips: Vec<TripRecord>,
    pattern_len: usize,
    classical: ClassicalProfile,
}

fn vehicle(config: &GeneratorConfig, i: usize) -> Vehicle {
    let mut r = rng::stream(config.seed, i as u64);
    let vin = Vin::new(&format!("V{i:06}"));
    let weights: Vec<f64> = config.classes.iter().map(|c| c.weight).collect();
    let ci = pick(&weights, &mut r);
    let class = &config.classes[ci];
    let het = &config.heterogeneity;
    let ln = |sd: f64, r: &mut ChaCha8Rng| {
        if sd > 0.0 {
            LogNormal::new(-sd * sd / 2.0, sd).expect("positive sd").sample(r)
        } else {
            1.0
        }
    };
    let rate = class.trips_per_day * ln(het.rate_log_sd, &mut r);
    let dist_median = class.distance_median * ln(het.distance_log_sd, &mut r);
    let speed_median = class.speed_median * ln(het.speed_log_sd, &mut r);
    let hour_noise: Vec<f64> = (0..24).map(|_| ln(het.hour_log_sd, &mut r)).collect();
    let grid: Vec<Vec<f64>> = class
        .departure_grid()
        .into_iter()
        .map(|row| row.iter().zip(&hour_noise).map(|(h, e)| h * e).collect())
        .collect();
    let dist = LogNormal::new(dist_median.ln(), class.distance_log_sd).expect("valid");
    let speed = LogNormal::new(speed_median.ln(), class.speed_log_sd).expect("valid");

    let start = config.first_start + Duration::days(r.random_range(0..config.start_spread_days.max(1)));
    let midnight = start.and_hms_opt(0, 0, 0).expect("midnight");
    let period = config.pattern_days();
    let mut pattern: Vec<(i64, f64, f64, f64)> = Vec::new(); // (offset seconds, km, avg speed, max factor)
    for d in 0..period {
        let row = &grid[(start + Duration::days(d)).weekday_index()];
        let mean = rate * row.iter().sum::<f64>();
        let n = if mean > 0.0 {
            Poisson::new(mean).expect("positive mean").sample(&mut r) as usize
        } else {
            0
        };
        for _ in 0..n {
            let h = pick(row, &mut r) as i64;
            let secs = d * 86_400 + h * 3600 + r.random_range(0..3600);
            let km = dist.sample(&mut r).clamp(0.2, config.max_trip_km);
            let v = speed.sample(&mut r).clamp(5.0, 140.0);
            pattern.push((secs, km, v, r.random_range(1.2..1.8)));
        }
    }
    if pattern.is_empty() {
        pattern.push((12 * 3600, dist.sample(&mut r).clamp(0.2, config.max_trip_km), speed_median, 1.5));
    }
    pattern.sort_by_key(|t| t.0);
    pattern.dedup_by_key(|t| t.0);
    let pattern_len = pattern.len();

    let end_secs = config.contract_days * 86_400;
    let mut trips = Vec::new();
    'outer: for cycle in 0.. {
        for &(s, km, v, f) in &pattern {
            let t = s + cycle * period * 86_400;
            if t > end_secs {
                break 'outer;
            }
            let dep = midnight + Duration::seconds(t);
            let dur = ((km / v) * 3600.0).round().max(1.0) as i64;
            let max_speed = (v * f * 10.0).round() / 10.0;
            let km = (km * 10.0).round() / 10.0;
            let number = trips.len() as u32 + 1;
            trips.push(
                TripRecord::new(vin.clone(), number, dep, dep + Duration::seconds(dur), km, max_speed)
                    .expect("generated trips are valid"),
            );
        }
        if config.saturation_months.is_none() {
            break;
        }
    }

    let daily_km: f64 = pattern.iter().map(|t| t.1).sum::<f64>() / period as f64;
    let link = config.annual_distance_link;
    let declared = daily_km.powf(link) * 30f64.powf(1.0 - link) * 365.0 * ln(0.4, &mut r);
    let annual = (declared / 100.0).round() * 100.0;
    let commute = (LogNormal::new(15f64.ln(), 0.6).expect("valid").sample(&mut r) * 10.0).round() / 10.0;
    let missing = r.random::<f64>() < config.commute_missing_rate;
    let years_claim_free = r.random_range(0..30) as f64;
    let classical = ClassicalProfile {
        annual_distance: annual.max(100.0),
        commute_distance: (!missing).then_some(commute),
        conv_count_3_yrs_minor: choose(&[("0", 0.8), ("1", 0.15), ("2", 0.05)], &mut r).parse().expect("digit"),
        gender: choose(&[("M", 0.5), ("F", 0.5)], &mut r).into(),
        marital_status: choose(&[("married", 0.55), ("single", 0.35), ("divorced", 0.07), ("widowed", 0.03)], &mut r).into(),
        pmt_plan: choose(&[("monthly", 0.6), ("annual", 0.37), ("quarterly", 0.03)], &mut r).into(),
        veh_age: r.random_range(0..16) as f64,
        veh_use: choose(&[("commute", 0.5), ("pleasure", 0.4), ("business", 0.1)], &mut r).into(),
        years_claim_free,
        years_licensed: years_claim_free + r.random_range(0..20) as f64,
    };
    Vehicle {
        vin,
        class: ci,
        start,
        trips,
        pattern_len,
        classical,
    }
}

trait WeekdayIndex {
    fn weekday_index(&self) -> usize;
}

impl WeekdayIndex for NaiveDate {
    fn weekday_index(&self) -> usize {
        use chrono::Datelike;
        self.weekday().num_days_from_monday() as usize
    }
}

fn standardize(v: &mut [f64]) {
    let m = crate::stats::mean(v);
    let s = crate::stats::sd(v);
    for x in v.iter_mut() {
        *x = if s > 0.0 { (*x - m) / s } else { 0.0 };
    }
}

/// Generates a fleet: trips (sorted by vin, then departure), one full-year
/// contract per vehicle, and the ground truth.
pub fn generate(config: &GeneratorConfig) -> Result<SyntheticFleet, SynthError> {
    config.validate()?;
    let target = config.claims.target_rate;
    if !(target > 0.0 && target < 1.0) {
        return Err(SynthError::Infeasible(target));
    }
    let vehicles: Vec<Vehicle> = (0..config.n_vehicles).into_par_iter().map(|i| vehicle(config, i)).collect();
    let period = config.pattern_days() as f64;
    let features: Vec<[f64; 14]> = vehicles
        .par_iter()
        .map(|v| {
            telematics_features(&v.trips[..v.pattern_len.min(v.trips.len())], period)
                .expect("every vehicle has a trip")
                .values()
        })
        .collect();

    // linear predictor without intercept
    let n = vehicles.len();
    let mut eta = vec![0.0; n];
    for (key, &c) in &config.claims.coefficients {
        if c == 0.0 {
            continue;
        }
        let mut z: Vec<f64> = if let Some(j) = TELEMATICS_COLUMNS.iter().position(|t| t == key) {
            features.iter().map(|f| f[j]).collect()
        } else if let Some((col, level)) = key.split_once('=') {
            vehicles
                .iter()
                .map(|v| {
                    let value = v
                        .classical
                        .values()
                        .into_iter()
                        .zip(crate::trip_store::CLASSICAL_COLUMNS)
                        .find(|(_, name)| *name == col)
                        .map(|(val, _)| val);
                    match value {
                        Some(crate::trip_store::ClassicalValue::Categorical(s)) if s == level => 1.0,
                        _ => 0.0,
                    }
                })
                .collect()
        } else {
            vehicles
                .iter()
                .map(|v| match key.as_str() {
                    "annual_distance" => v.classical.annual_distance,
                    "commute_distance" => v.classical.commute_distance.unwrap_or(15.0),
                    "conv_count_3_yrs_minor" => v.classical.conv_count_3_yrs_minor,
                    "veh_age" => v.classical.veh_age,
                    "years_claim_free" => v.classical.years_claim_free,
                    _ => v.classical.years_licensed,
                })
                .collect()
        };
        if !key.contains('=') {
            standardize(&mut z);
        }
        for (e, zi) in eta.iter_mut().zip(z) {
            *e += c * zi;
        }
    }
    let mean_p = |b0: f64| eta.iter().map(|e| sigmoid(b0 + e)).sum::<f64>() / n as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    if !(mean_p(lo) < target && target < mean_p(hi)) {
        return Err(SynthError::Infeasible(target));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < target { lo = mid } else { hi = mid }
    }
    let b0 = 0.5 * (lo + hi);

    let claim_seed = rng::derive(config.seed, 0xC1A1);
    let mut trips = Vec::new();
    let mut contracts = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for (i, v) in vehicles.into_iter().enumerate() {
        let p = sigmoid(b0 + eta[i]);
        let claimed = rng::stream(claim_seed, i as u64).random::<f64>() < p;
        contracts.push(ContractRow {
            vin: v.vin.clone(),
            contract_start: v.start,
            contract_end: v.start + Duration::days(config.contract_days),
            claimed,
            classical: v.classical,
        });
        truth.push(VehicleTruth {
            vin: v.vin,
            class: config.classes[v.class].name.clone(),
            claim_probability: p,
            pattern_features: features[i],
        });
        trips.extend(v.trips);
    }
    Ok(SyntheticFleet {
        trips,
        contracts,
        truth,
        intercept: b0,
    })
}

#![allow(dead_code)]

use chrono::NaiveDateTime;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use telerisk::featurize::observable_contracts;
use telerisk::forest::{Node, Tree};
use telerisk::linear_models::sigmoid;
use telerisk::rng;
use telerisk::synth::{generate, GeneratorConfig};
use telerisk::table::Design;
use telerisk::trip_store::{assemble_contracts, TripRecord, VehicleContract, Vin};

pub const PRESET: &str = include_str!("../../../../configs/redundancy.toml");

#[derive(Deserialize)]
struct Preset {
    synth: GeneratorConfig,
}

/// Generator settings of the shipped redundancy preset.
pub fn preset_generator(seed: u64) -> GeneratorConfig {
    let p: Preset = toml::from_str(PRESET).expect("preset parses");
    GeneratorConfig { seed, ..p.synth }
}

pub fn dt(s: &str) -> NaiveDateTime {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M").expect("fixture time")
}

/// Five trips over the week starting Monday 2016-04-04.
pub fn worked_example_trips() -> Vec<TripRecord> {
    let rows = [
        ("2016-04-04 17:40", "2016-04-04 17:54", 9.0, 70.0),
        ("2016-04-04 18:20", "2016-04-04 18:28", 8.0, 73.0),
        ("2016-04-05 09:35", "2016-04-05 09:48", 17.0, 102.0),
        ("2016-04-07 07:30", "2016-04-07 07:37", 9.0, 92.0),
        ("2016-04-09 12:20", "2016-04-09 13:35", 109.0, 120.0),
    ];
    rows.iter()
        .enumerate()
        .map(|(i, &(d, a, km, vmax))| TripRecord::new(Vin::new("EX"), i as u32 + 1, dt(d), dt(a), km, vmax).unwrap())
        .collect()
}

/// Expected worked-example values with their displayed decimals.
pub const WORKED_EXPECTED: [(&str, f64, i32); 14] = [
    ("avg_daily_distance", 21.7, 1),
    ("avg_daily_nb_trips", 0.71, 2),
    ("med_trip_avg_speed", 77.0, 0),
    ("med_trip_distance", 9.0, 0),
    ("med_trip_max_speed", 92.0, 0),
    ("max_trip_max_speed", 120.0, 0),
    ("prop_long_trip", 0.2, 1),
    ("frac_expo_night", 0.0, 0),
    ("frac_expo_noon", 0.72, 2),
    ("frac_expo_evening", 0.0, 0),
    ("frac_expo_peak_morning", 0.06, 2),
    ("frac_expo_peak_evening", 0.11, 2),
    ("frac_expo_mon_to_thu", 0.28, 2),
    ("frac_expo_fri_sat", 0.72, 2),
];

pub fn round_to(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

/// Logistic data with standard-normal columns and the given coefficients.
pub fn logistic_design(seed: u64, n: usize, intercept: f64, beta: &[f64]) -> Design {
    let mut r = rng::stream(seed, 0);
    let p = beta.len();
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut r)).collect())
        .collect();
    let y = (0..n)
        .map(|i| {
            let eta = intercept + (0..p).map(|j| beta[j] * columns[j][i]).sum::<f64>();
            f64::from(r.random::<f64>() < sigmoid(eta))
        })
        .collect();
    Design {
        names: (0..p).map(|j| format!("x{j}")).collect(),
        columns,
        y,
    }
}

pub fn fleet_contracts(config: &GeneratorConfig) -> Vec<VehicleContract> {
    let fleet = generate(config).expect("generator config is valid");
    let a = assemble_contracts(&fleet.trips, &fleet.contracts).expect("generated data assembles");
    observable_contracts(a.contracts).0
}

/// Pairwise AUC: wins plus half ties over all positive-negative pairs.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1;
            twice += if si > sj {
                2
            } else if si == sj {
                1
            } else {
                0
            };
        }
    }
    twice as f64 * 0.5 / pairs as f64
}

/// Tree shape independent of node numbering.
#[derive(Debug, PartialEq)]
pub enum Shape {
    Leaf(f64),
    Split(usize, f64, Box<Shape>, Box<Shape>),
}

pub fn shape(tree: &Tree) -> Shape {
    fn walk(t: &Tree, i: usize) -> Shape {
        match &t.nodes[i] {
            Node::Leaf { value, .. } => Shape::Leaf(*value),
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => Shape::Split(*feature, *threshold, Box::new(walk(t, *left)), Box::new(walk(t, *right))),
        }
    }
    walk(tree, 0)
}

fn gini_of(rows: &[usize], y: &[f64]) -> f64 {
    let n = rows.len() as f64;
    let ones = rows.iter().filter(|&&i| y[i] == 1.0).count() as f64;
    1.0 - (ones / n).powi(2) - ((n - ones) / n).powi(2)
}

/// Exhaustive CART on Gini: every feature, every cut between distinct
/// sorted values; ties keep the first (feature, threshold).
pub fn brute_force_tree(x: &[Vec<f64>], y: &[f64], rows: &[usize], n_star: usize) -> Shape {
    let n = rows.len() as f64;
    let ones = rows.iter().filter(|&&i| y[i] == 1.0).count() as f64;
    let g = gini_of(rows, y);
    if rows.len() < n_star || g <= 0.0 {
        return Shape::Leaf(ones / n);
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for (f, col) in x.iter().enumerate() {
        let mut vals: Vec<f64> = rows.iter().map(|&i| col[i]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= t);
            let score = g - l.len() as f64 / n * gini_of(&l, y) - r.len() as f64 / n * gini_of(&r, y);
            if score > 1e-9 && best.is_none_or(|(b, _, _)| score > b + 1e-9) {
                best = Some((score, f, t));
            }
        }
    }
    match best {
        None => Shape::Leaf(ones / n),
        Some((_, f, t)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[f][i] <= t);
            Shape::Split(
                f,
                t,
                Box::new(brute_force_tree(x, y, &l, n_star)),
                Box::new(brute_force_tree(x, y, &r, n_star)),
            )
        }
    }
}

/// Minimizes `f` over `[lo, hi]` by repeated dense grids, each zooming to
/// two cells around the previous best.
pub fn grid_minimize(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, points: usize, resolution: f64) -> f64 {
    let mut best = lo;
    while hi - lo > resolution {
        let step = (hi - lo) / points as f64;
        let mut fb = f64::INFINITY;
        for k in 0..=points {
            let t = lo + step * k as f64;
            let v = f(t);
            if v < fb {
                fb = v;
                best = t;
            }
        }
        lo = best - step;
        hi = best + step;
    }
    best
}

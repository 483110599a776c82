//! Run configuration: a TOML file, then `TELEM_*` environment overrides,
//! then command-line flags.
//!
//! Environment keys map onto the file's key paths: `TELEM_SEED=7` sets
//! `seed`, `TELEM_STUDY__B=200` sets `study.b`. Values are parsed as TOML
//! scalars, falling back to plain strings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use telerisk::featurize::LeapMethod;
use telerisk::synth::GeneratorConfig;
use toml::{Table, Value};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "TELEM_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub trips: PathBuf,
    pub contracts: PathBuf,
    /// Directory receiving every artifact.
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            trips: "trips.csv".into(),
            contracts: "contracts.csv".into(),
            output: "out".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub method: LeapMethod,
    pub b: usize,
    pub delta: f64,
    pub train_frac: f64,
    pub folds: usize,
    /// Explicit penalty grid; the 100-point default when absent.
    pub lambdas: Option<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub interactions: Option<Vec<String>>,
    pub lump_threshold: f64,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            method: LeapMethod::TimeLeap,
            b: 500,
            delta: 0.005,
            train_frac: 0.7,
            folds: 5,
            lambdas: None,
            alphas: vec![1.0],
            interactions: None,
            lump_threshold: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: usize,
    pub p_star: (usize, usize),
    pub n_star: (usize, usize),
    pub budget: usize,
    pub n_initial: usize,
}

impl Default for ForestSection {
    fn default() -> Self {
        ForestSection {
            n_trees: 200,
            p_star: (1, 24),
            n_star: (2, 100),
            budget: 25,
            n_initial: 5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub synth: GeneratorConfig,
    pub study: StudySection,
    pub forest: ForestSection,
}

fn env_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

/// Applies `(TELEM_A__B, value)` pairs onto a TOML table.
pub fn apply_env<I: IntoIterator<Item = (String, String)>>(table: &mut Table, vars: I) -> Result<(), CliError> {
    let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(CliError::usage(format!("malformed environment override {key}")));
        }
        let mut node = &mut *table;
        for part in &path[..path.len() - 1] {
            let entry = node.entry(part.clone()).or_insert_with(|| Value::Table(Table::new()));
            node = entry
                .as_table_mut()
                .ok_or_else(|| CliError::usage(format!("{key}: '{part}' is not a section")))?;
        }
        node.insert(path[path.len() - 1].clone(), env_value(&raw));
    }
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if given) and applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<Table>()
                    .map_err(|e| CliError::usage(format!("invalid config {}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        apply_env(&mut table, std::env::vars())?;
        Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::usage(format!("invalid configuration: {e}")))
    }
}

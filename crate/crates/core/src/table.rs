//! Rectangular feature tables (rows = vehicles) with a binary response.
//!
//! On disk a table is a CSV (`vin`, feature columns, `claimed`) plus a JSON
//! sidecar that records column descriptors and the vin to row map.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trip_store::{fmt_f64, Vin};

pub const RESPONSE_COLUMN: &str = "claimed";
pub const ID_COLUMN: &str = "vin";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("column `{name}` has {found} values, expected {expected}")]
    Ragged {
        name: String,
        found: usize,
        expected: usize,
    },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("duplicate row id `{0}`")]
    DuplicateRow(Vin),
    #[error("response must be 0/1, found {0}")]
    BadResponse(u8),
    #[error("no column named `{0}`")]
    MissingColumn(String),
    #[error("column `{0}` is categorical where a numeric column is required")]
    NotNumeric(String),
    #[error("column `{name}` has a missing value at row {row}")]
    MissingValue { name: String, row: usize },
    #[error("column contract mismatch: expected {expected:?}, found {found:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("malformed table file: {0}")]
    Format(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnOrigin {
    Classical,
    Telematics,
    Interaction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDescriptor {
    pub name: String,
    pub kind: ColumnKind,
    pub origin: ColumnOrigin,
}

/// Numeric columns use `NaN` for a missing value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ColumnValues {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Numeric(v) => v.len(),
            ColumnValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn kind(&self) -> ColumnKind {
        match self {
            ColumnValues::Numeric(_) => ColumnKind::Numeric,
            ColumnValues::Categorical(_) => ColumnKind::Categorical,
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnValues {
        match self {
            ColumnValues::Numeric(v) => ColumnValues::Numeric(rows.iter().map(|&i| v[i]).collect()),
            ColumnValues::Categorical(v) => {
                ColumnValues::Categorical(rows.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub origin: ColumnOrigin,
    pub values: ColumnValues,
}

impl Column {
    pub fn numeric(name: impl Into<String>, origin: ColumnOrigin, values: Vec<f64>) -> Self {
        Column {
            name: name.into(),
            origin,
            values: ColumnValues::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, origin: ColumnOrigin, values: Vec<String>) -> Self {
        Column {
            name: name.into(),
            origin,
            values: ColumnValues::Categorical(values),
        }
    }

    pub fn descriptor(&self) -> ColumnDescriptor {
        ColumnDescriptor {
            name: self.name.clone(),
            kind: self.values.kind(),
            origin: self.origin,
        }
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.values {
            ColumnValues::Numeric(v) => Some(v),
            ColumnValues::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[String]> {
        match &self.values {
            ColumnValues::Categorical(v) => Some(v),
            ColumnValues::Numeric(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    row_ids: Vec<Vin>,
    columns: Vec<Column>,
    response: Vec<u8>,
}

impl FeatureTable {
    pub fn new(
        row_ids: Vec<Vin>,
        columns: Vec<Column>,
        response: Vec<u8>,
    ) -> Result<Self, TableError> {
        let n = row_ids.len();
        if response.len() != n {
            return Err(TableError::Ragged {
                name: RESPONSE_COLUMN.into(),
                found: response.len(),
                expected: n,
            });
        }
        if let Some(&bad) = response.iter().find(|&&y| y > 1) {
            return Err(TableError::BadResponse(bad));
        }
        let mut names = HashSet::new();
        for c in &columns {
            if c.values.len() != n {
                return Err(TableError::Ragged {
                    name: c.name.clone(),
                    found: c.values.len(),
                    expected: n,
                });
            }
            if !names.insert(c.name.as_str())
                || c.name == ID_COLUMN
                || c.name == RESPONSE_COLUMN
            {
                return Err(TableError::DuplicateColumn(c.name.clone()));
            }
        }
        let mut ids = HashSet::new();
        for id in &row_ids {
            if !ids.insert(id) {
                return Err(TableError::DuplicateRow(id.clone()));
            }
        }
        Ok(FeatureTable {
            row_ids,
            columns,
            response,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row_ids(&self) -> &[Vin] {
        &self.row_ids
    }

    pub fn response(&self) -> &[u8] {
        &self.response
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn descriptors(&self) -> Vec<ColumnDescriptor> {
        self.columns.iter().map(Column::descriptor).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64], TableError> {
        let col = self
            .column(name)
            .ok_or_else(|| TableError::MissingColumn(name.into()))?;
        col.as_numeric()
            .ok_or_else(|| TableError::NotNumeric(name.into()))
    }

    pub fn positives(&self) -> usize {
        self.response.iter().filter(|&&y| y == 1).count()
    }

    /// Rows in the given order (indices may repeat only if ids stay unique,
    /// so callers pass distinct indices).
    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    origin: c.origin,
                    values: c.values.select(rows),
                })
                .collect(),
            response: rows.iter().map(|&i| self.response[i]).collect(),
        }
    }

    /// Same rows, a subset of columns in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureTable, TableError> {
        let columns = names
            .iter()
            .map(|n| {
                self.column(n)
                    .cloned()
                    .ok_or_else(|| TableError::MissingColumn(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        FeatureTable::new(self.row_ids.clone(), columns, self.response.clone())
    }

    pub fn push_column(&mut self, column: Column) -> Result<(), TableError> {
        if column.values.len() != self.n_rows() {
            return Err(TableError::Ragged {
                name: column.name,
                found: column.values.len(),
                expected: self.n_rows(),
            });
        }
        if self.column(&column.name).is_some() {
            return Err(TableError::DuplicateColumn(column.name));
        }
        self.columns.push(column);
        Ok(())
    }

    /// A new table with the same ids/response and the given columns.
    pub fn with_columns(&self, columns: Vec<Column>) -> Result<FeatureTable, TableError> {
        FeatureTable::new(self.row_ids.clone(), columns, self.response.clone())
    }

    /// Column-major numeric design; fails on categorical or missing values.
    pub fn design(&self) -> Result<Design, TableError> {
        let mut columns = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            let v = c
                .as_numeric()
                .ok_or_else(|| TableError::NotNumeric(c.name.clone()))?;
            if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                return Err(TableError::MissingValue {
                    name: c.name.clone(),
                    row,
                });
            }
            columns.push(v.to_vec());
        }
        Ok(Design {
            names: self.column_names(),
            columns,
            y: self.response.iter().map(|&y| f64::from(y)).collect(),
        })
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), TableError> {
        let mut wtr = csv::Writer::from_writer(sink);
        let mut header = vec![ID_COLUMN.to_string()];
        header.extend(self.column_names());
        header.push(RESPONSE_COLUMN.to_string());
        wtr.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(self.row_ids[i].as_str().to_string());
            for c in &self.columns {
                rec.push(match &c.values {
                    ColumnValues::Numeric(v) if v[i].is_nan() => String::new(),
                    ColumnValues::Numeric(v) => fmt_f64(v[i]),
                    ColumnValues::Categorical(v) => v[i].clone(),
                });
            }
            rec.push(self.response[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn sidecar(&self) -> TableSidecar {
        TableSidecar {
            columns: self.descriptors(),
            rows: self
                .row_ids
                .iter()
                .enumerate()
                .map(|(i, v)| (v.as_str().to_string(), i))
                .collect(),
        }
    }

    pub fn read<R1: Read, R2: Read>(csv_src: R1, sidecar_src: R2) -> Result<Self, TableError> {
        let sidecar: TableSidecar = serde_json::from_reader(sidecar_src)?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(csv_src);
        let header = rdr.headers()?.clone();
        let expected: Vec<&str> = std::iter::once(ID_COLUMN)
            .chain(sidecar.columns.iter().map(|c| c.name.as_str()))
            .chain(std::iter::once(RESPONSE_COLUMN))
            .collect();
        if header.iter().ne(expected.iter().copied()) {
            return Err(TableError::Format(format!(
                "csv header does not match sidecar columns: {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let p = sidecar.columns.len();
        let mut ids = Vec::new();
        let mut response = Vec::new();
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); p];
        for rec in rdr.records() {
            let rec = rec?;
            ids.push(Vin::new(&rec[0]));
            for (j, col) in raw.iter_mut().enumerate() {
                col.push(rec[j + 1].to_string());
            }
            let y: u8 = rec[p + 1]
                .parse()
                .map_err(|_| TableError::Format(format!("bad response '{}'", &rec[p + 1])))?;
            response.push(y);
        }
        let mut columns = Vec::with_capacity(p);
        for (d, values) in sidecar.columns.iter().zip(raw) {
            let values = match d.kind {
                ColumnKind::Categorical => ColumnValues::Categorical(values),
                ColumnKind::Numeric => ColumnValues::Numeric(
                    values
                        .iter()
                        .map(|s| {
                            if s.is_empty() {
                                Ok(f64::NAN)
                            } else {
                                s.parse::<f64>().map_err(|_| {
                                    TableError::Format(format!("bad number '{s}' in {}", d.name))
                                })
                            }
                        })
                        .collect::<Result<_, _>>()?,
                ),
            };
            columns.push(Column {
                name: d.name.clone(),
                origin: d.origin,
                values,
            });
        }
        let table = FeatureTable::new(ids, columns, response)?;
        for (i, id) in table.row_ids.iter().enumerate() {
            if sidecar.rows.get(id.as_str()) != Some(&i) {
                return Err(TableError::Format(format!("row map disagrees for vin {id}")));
            }
        }
        Ok(table)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSidecar {
    pub columns: Vec<ColumnDescriptor>,
    pub rows: BTreeMap<String, usize>,
}

/// Dense numeric design matrix, stored by column.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Design {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn check_names(&self, expected: &[String]) -> Result<(), TableError> {
        if self.names != expected {
            return Err(TableError::ColumnMismatch {
                expected: expected.to_vec(),
                found: self.names.clone(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FeatureTable {
        FeatureTable::new(
            vec![Vin::new("a"), Vin::new("b"), Vin::new("c")],
            vec![
                Column::numeric("x", ColumnOrigin::Classical, vec![1.0, f64::NAN, 3.5]),
                Column::categorical(
                    "g",
                    ColumnOrigin::Classical,
                    vec!["F".into(), "M".into(), "F".into()],
                ),
            ],
            vec![0, 1, 0],
        )
        .unwrap()
    }

    #[test]
    fn rejects_duplicate_names_and_ragged_columns() {
        let dup = FeatureTable::new(
            vec![Vin::new("a")],
            vec![
                Column::numeric("x", ColumnOrigin::Classical, vec![1.0]),
                Column::numeric("x", ColumnOrigin::Classical, vec![1.0]),
            ],
            vec![0],
        );
        assert!(matches!(dup, Err(TableError::DuplicateColumn(_))));
        let ragged = FeatureTable::new(
            vec![Vin::new("a")],
            vec![Column::numeric("x", ColumnOrigin::Classical, vec![1.0, 2.0])],
            vec![0],
        );
        assert!(matches!(ragged, Err(TableError::Ragged { .. })));
    }

    #[test]
    fn csv_and_sidecar_roundtrip() {
        let t = toy();
        let mut csv_buf = Vec::new();
        t.write_csv(&mut csv_buf).unwrap();
        let side = serde_json::to_vec(&t.sidecar()).unwrap();
        let back = FeatureTable::read(csv_buf.as_slice(), side.as_slice()).unwrap();
        assert_eq!(back.row_ids(), t.row_ids());
        assert_eq!(back.descriptors(), t.descriptors());
        let x = back.numeric("x").unwrap();
        assert_eq!(x[0], 1.0);
        assert!(x[1].is_nan());
        assert_eq!(back.response(), t.response());
    }

    #[test]
    fn design_requires_complete_numeric() {
        let t = toy();
        assert!(matches!(t.design(), Err(TableError::MissingValue { .. })));
        let sub = t.select_rows(&[0, 2]).select_columns(&["x".into()]).unwrap();
        let d = sub.design().unwrap();
        assert_eq!(d.columns, vec![vec![1.0, 3.5]]);
        assert_eq!(d.y, vec![0.0, 0.0]);
    }
}

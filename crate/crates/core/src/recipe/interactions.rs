//! Pairwise product features.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::RecipeError;
use crate::table::{Column, ColumnOrigin, FeatureTable};

/// Unordered source pairs `(a, b)` with `a < b`, in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionSet {
    pub pairs: Vec<(String, String)>,
}

impl InteractionSet {
    pub fn new(sources: &[String]) -> Result<Self, RecipeError> {
        let unique: BTreeSet<&String> = sources.iter().collect();
        if unique.len() != sources.len() {
            let mut seen = BTreeSet::new();
            let dup = sources.iter().find(|s| !seen.insert(*s)).expect("duplicate exists");
            return Err(RecipeError::DuplicateSource(dup.clone()));
        }
        let sorted: Vec<&String> = unique.into_iter().collect();
        let mut pairs = Vec::new();
        for i in 0..sorted.len() {
            for j in i + 1..sorted.len() {
                pairs.push((sorted[i].clone(), sorted[j].clone()));
            }
        }
        Ok(InteractionSet { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.pairs.iter().map(|(a, b)| format!("{a}:{b}")).collect()
    }

    /// The product columns for `table`, named `a:b`.
    pub fn columns(&self, table: &FeatureTable) -> Result<Vec<Column>, RecipeError> {
        self.pairs
            .iter()
            .map(|(a, b)| {
                let xa = table.numeric(a)?;
                let xb = table.numeric(b)?;
                Ok(Column::numeric(
                    format!("{a}:{b}"),
                    ColumnOrigin::Interaction,
                    xa.iter().zip(xb).map(|(u, v)| u * v).collect(),
                ))
            })
            .collect()
    }
}

/// Appends one product column per unordered pair of `sources`.
pub fn expand_interactions(table: &FeatureTable, sources: &[String]) -> Result<FeatureTable, RecipeError> {
    let set = InteractionSet::new(sources)?;
    let mut columns = table.columns().to_vec();
    columns.extend(set.columns(table)?);
    Ok(table.with_columns(columns)?)
}

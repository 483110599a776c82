//! Bagged regression-tree imputation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RecipeError;
use crate::forest::{fit_tree, Criterion, Tree, TreeParams};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BagSpec {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub seed: u64,
    /// Fit each tree on all observed rows instead of a bootstrap.
    #[serde(default = "yes")]
    pub bootstrap: bool,
    /// Only grow trees to this many splits deep; `None` is unlimited.
    #[serde(default)]
    pub max_depth: Option<usize>,
}

fn yes() -> bool {
    true
}

impl Default for BagSpec {
    fn default() -> Self {
        BagSpec {
            n_trees: 25,
            min_leaf: 5,
            seed: 0,
            bootstrap: true,
            max_depth: None,
        }
    }
}

/// Imputation model for one column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaggedImputer {
    pub target: String,
    pub predictors: Vec<String>,
    pub trees: Vec<Tree>,
}

impl BaggedImputer {
    /// Fits on the rows where `target` is observed; `predictors` are
    /// column-major and complete.
    pub fn fit(
        target: &str,
        y: &[f64],
        predictor_names: Vec<String>,
        predictors: &[Vec<f64>],
        spec: &BagSpec,
    ) -> Result<Self, RecipeError> {
        let observed: Vec<usize> = (0..y.len()).filter(|&i| y[i].is_finite()).collect();
        if observed.is_empty() {
            return Err(RecipeError::NoObserved(target.to_string()));
        }
        let params = TreeParams {
            criterion: Criterion::Variance,
            min_split: 2 * spec.min_leaf.max(1),
            min_leaf: spec.min_leaf.max(1),
        };
        let features: Vec<usize> = (0..predictors.len()).collect();
        let m = observed.len();
        let trees = (0..spec.n_trees.max(1))
            .into_par_iter()
            .map(|b| {
                let rows: Vec<usize> = if spec.bootstrap {
                    let mut r = rng::stream(spec.seed, b as u64);
                    (0..m).map(|_| observed[r.random_range(0..m)]).collect()
                } else {
                    observed.clone()
                };
                let mut tree = fit_tree(predictors, y, &rows, &features, &params)
                    .map_err(|e| RecipeError::Impute(e.to_string()))?;
                if let Some(d) = spec.max_depth {
                    prune_to_depth(&mut tree, d);
                }
                Ok(tree)
            })
            .collect::<Result<Vec<_>, RecipeError>>()?;
        Ok(BaggedImputer {
            target: target.to_string(),
            predictors: predictor_names,
            trees,
        })
    }

    /// Mean of the tree predictions for row `i` of the column-major inputs.
    pub fn predict_row(&self, predictors: &[&[f64]], i: usize) -> f64 {
        self.trees
            .iter()
            .map(|t| t.predict_row(|f| predictors[f][i]))
            .sum::<f64>()
            / self.trees.len() as f64
    }

    /// Fills the missing entries of `y`.
    pub fn impute(&self, y: &[f64], predictors: &[&[f64]]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, &v)| if v.is_finite() { v } else { self.predict_row(predictors, i) })
            .collect()
    }
}

// Collapses nodes deeper than `depth` into leaves carrying the mean of the
// leaves below them (weighted by row count).
fn prune_to_depth(tree: &mut Tree, depth: usize) {
    use crate::forest::Node;
    fn summarize(nodes: &[Node], i: usize) -> (f64, usize) {
        match nodes[i] {
            Node::Leaf { value, n } => (value * n as f64, n),
            Node::Split { left, right, .. } => {
                let (a, na) = summarize(nodes, left);
                let (b, nb) = summarize(nodes, right);
                (a + b, na + nb)
            }
        }
    }
    let mut stack = vec![(0usize, 0usize)];
    while let Some((i, d)) = stack.pop() {
        if let Node::Split { left, right, .. } = tree.nodes[i] {
            if d >= depth {
                let (s, n) = summarize(&tree.nodes, i);
                tree.nodes[i] = Node::Leaf { value: s / n as f64, n };
            } else {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
    }
}

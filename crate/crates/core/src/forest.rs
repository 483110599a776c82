//! CART trees and random forests.
//!
//! A forest grows `B` trees. Tree `b` is fit on an `n`-row bootstrap of the
//! training rows using `p*` features drawn once for that tree. Trees are
//! grown without a depth limit: a node is split only when it holds at least
//! `n*` rows, is impure, and some split decreases impurity.
//!
//! The same builder also grows the regression trees used for imputation
//! (variance criterion, minimum leaf size).

use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::table::{Design, FeatureTable, TableError};

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("impurity of an empty node is undefined")]
    EmptyNode,
    #[error("invalid forest spec: {0}")]
    BadSpec(String),
    #[error("cannot fit a tree on zero rows")]
    NoRows,
    #[error("malformed binary forest: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Gini impurity `1 - sum_c (n_c / n)^2`.
pub fn gini(counts: &[usize]) -> Result<f64, ForestError> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(ForestError::EmptyNode);
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Binary response; impurity `2 p (1 - p)`.
    Gini,
    /// Real response; impurity is the node variance.
    Variance,
}

impl Criterion {
    fn impurity(self, n: f64, sum: f64, sumsq: f64) -> f64 {
        let m = sum / n;
        match self {
            Criterion::Gini => 2.0 * m * (1.0 - m),
            Criterion::Variance => (sumsq / n - m * m).max(0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    /// Nodes with fewer rows are not split.
    pub min_split: usize,
    pub min_leaf: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted impurity decrease `(n_t / N) (G_t - n_L/n_t G_L - n_R/n_t G_R)`.
        decrease: f64,
        n: usize,
    },
    Leaf {
        value: f64,
        n: usize,
    },
}

/// A fitted tree: node 0 is the root; `features` are the columns it may use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub features: Vec<usize>,
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, design: &Design) -> Vec<f64> {
        (0..design.n_rows())
            .map(|i| self.predict_row(|f| design.columns[f][i]))
            .collect()
    }

    /// Distinct features used by split nodes.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

struct Split {
    /// Position of the feature within the tree's feature list.
    slot: usize,
    threshold: f64,
    score: f64,
}

/// Grows a tree on `rows` (repeats allowed) of the column-major `x`,
/// considering only `features`.
pub fn fit_tree(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    params: &TreeParams,
) -> Result<Tree, ForestError> {
    if rows.is_empty() {
        return Err(ForestError::NoRows);
    }
    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();
    let total = rows.len() as f64;
    // values gathered per sampled row, and every feature presorted once;
    // splits partition the sorted lists stably
    let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let xs: Vec<Vec<f64>> = features.iter().map(|&f| rows.iter().map(|&i| x[f][i]).collect()).collect();
    let all: Vec<u32> = (0..rows.len() as u32).collect();
    let sorted: Vec<Vec<u32>> = if xs.is_empty() {
        vec![all]
    } else {
        xs.iter()
            .map(|col| {
                let mut o = all.clone();
                o.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                o
            })
            .collect()
    };
    let mut goes_left = vec![false; rows.len()];
    let mut nodes = vec![Node::Leaf { value: 0.0, n: 0 }];
    let mut stack = vec![(sorted, 0usize)];
    while let Some((lists, id)) = stack.pop() {
        let members = &lists[0];
        let n = members.len();
        let nf = n as f64;
        let (sum, sumsq) = members
            .iter()
            .fold((0.0, 0.0), |(s, q), &i| (s + ys[i as usize], q + ys[i as usize] * ys[i as usize]));
        let impurity = params.criterion.impurity(nf, sum, sumsq);
        let leaf = Node::Leaf { value: sum / nf, n };
        if xs.is_empty() || n < params.min_split || impurity <= 0.0 || n < 2 * params.min_leaf.max(1) {
            nodes[id] = leaf;
            continue;
        }
        match best_split(&xs, &ys, &lists, params, (sum, sumsq), impurity) {
            Some(s) => {
                for &i in &lists[s.slot] {
                    goes_left[i as usize] = xs[s.slot][i as usize] <= s.threshold;
                }
                let (l, r): (Vec<Vec<u32>>, Vec<Vec<u32>>) = lists
                    .iter()
                    .map(|o| o.iter().partition::<Vec<u32>, _>(|&&i| goes_left[i as usize]))
                    .unzip();
                if l[0].is_empty() || r[0].is_empty() {
                    nodes[id] = leaf;
                    continue;
                }
                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node::Leaf { value: 0.0, n: 0 });
                nodes.push(Node::Leaf { value: 0.0, n: 0 });
                nodes[id] = Node::Split {
                    feature: features[s.slot],
                    threshold: s.threshold,
                    left,
                    right,
                    decrease: nf / total * s.score,
                    n,
                };
                stack.push((r, right));
                stack.push((l, left));
            }
            None => nodes[id] = leaf,
        }
    }
    Ok(Tree { features, nodes })
}

// Best split of one node. Score is the unweighted decrease
// `G_t - n_L/n G_L - n_R/n G_R`; ties (within 1e-12 of the node impurity)
// keep the lowest feature index, then the lowest threshold.
fn best_split(
    xs: &[Vec<f64>],
    ys: &[f64],
    lists: &[Vec<u32>],
    params: &TreeParams,
    (tot, totsq): (f64, f64),
    impurity: f64,
) -> Option<Split> {
    let n = lists[0].len();
    let nf = n as f64;
    let min_leaf = params.min_leaf.max(1);
    let mut best: Option<Split> = None;
    for (slot, order) in lists.iter().enumerate() {
        let col = &xs[slot];
        let (mut s, mut q) = (0.0, 0.0);
        for pos in 0..n - 1 {
            let i = order[pos] as usize;
            s += ys[i];
            q += ys[i] * ys[i];
            let nl = pos + 1;
            let (lo, hi) = (col[i], col[order[pos + 1] as usize]);
            if lo == hi || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let (nlf, nrf) = (nl as f64, (n - nl) as f64);
            let gl = params.criterion.impurity(nlf, s, q);
            let gr = params.criterion.impurity(nrf, tot - s, totsq - q);
            let score = impurity - nlf / nf * gl - nrf / nf * gr;
            if score > 1e-12 * impurity && best.as_ref().is_none_or(|b| score > b.score + 1e-12 * impurity) {
                // adjacent floats can have a midpoint that rounds up to `hi`
                let mid = 0.5 * (lo + hi);
                best = Some(Split {
                    slot,
                    threshold: if mid < hi { mid } else { lo },
                    score,
                });
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestSpec {
    pub n_trees: usize,
    pub p_star: usize,
    pub n_star: usize,
    pub seed: u64,
    /// Fit every tree on the original rows instead of a bootstrap.
    #[serde(default = "yes")]
    pub bootstrap: bool,
}

fn yes() -> bool {
    true
}

impl ForestSpec {
    pub fn new(n_trees: usize, p_star: usize, n_star: usize, seed: u64) -> Self {
        ForestSpec {
            n_trees,
            p_star,
            n_star,
            seed,
            bootstrap: true,
        }
    }

    fn validate(&self, p: usize) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::BadSpec("B must be at least 1".into()));
        }
        if self.p_star == 0 || self.p_star > p {
            return Err(ForestError::BadSpec(format!(
                "p* = {} outside 1..={p}",
                self.p_star
            )));
        }
        if self.n_star < 2 {
            return Err(ForestError::BadSpec("n* must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub columns: Vec<String>,
    pub spec: ForestSpec,
    pub trees: Vec<Tree>,
    /// Mean decrease in Gini per column, in column order.
    pub importance: Vec<f64>,
}

pub fn fit_forest(table: &FeatureTable, spec: &ForestSpec) -> Result<ForestModel, ForestError> {
    fit_forest_design(&table.design()?, spec)
}

pub fn fit_forest_design(design: &Design, spec: &ForestSpec) -> Result<ForestModel, ForestError> {
    let n = design.n_rows();
    let p = design.n_cols();
    spec.validate(p)?;
    if n == 0 {
        return Err(ForestError::NoRows);
    }
    let params = TreeParams {
        criterion: Criterion::Gini,
        min_split: spec.n_star,
        min_leaf: 1,
    };
    let trees: Vec<Tree> = (0..spec.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(spec.seed, b as u64);
            let rows: Vec<usize> = if spec.bootstrap {
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let features = sample(&mut r, p, spec.p_star).into_vec();
            fit_tree(&design.columns, &design.y, &rows, &features, &params)
        })
        .collect::<Result<_, _>>()?;
    let mut importance = vec![0.0; p];
    for t in &trees {
        for node in &t.nodes {
            if let Node::Split { feature, decrease, .. } = node {
                importance[*feature] += decrease;
            }
        }
    }
    for v in &mut importance {
        *v /= trees.len() as f64;
    }
    Ok(ForestModel {
        columns: design.names.clone(),
        spec: *spec,
        trees,
        importance,
    })
}

impl ForestModel {
    pub fn predict_design(&self, design: &Design) -> Result<Vec<f64>, ForestError> {
        design.check_names(&self.columns)?;
        let b = self.trees.len() as f64;
        Ok((0..design.n_rows())
            .into_par_iter()
            .map(|i| {
                self.trees
                    .iter()
                    .map(|t| t.predict_row(|f| design.columns[f][i]))
                    .sum::<f64>()
                    / b
            })
            .collect())
    }

    /// Flat little-endian layout:
    /// `u32 n_columns`, then per column `u32 len` + UTF-8 bytes;
    /// `u64 n_trees, u64 p_star, u64 n_star, u64 seed, u8 bootstrap`;
    /// per tree `u32 n_features`, `u32` feature indices, `u32 n_nodes`, then
    /// per node `u8 kind (0 leaf, 1 split), u32 feature, f64 threshold,
    /// u32 left, u32 right, f64 decrease_or_value, u32 n`;
    /// finally `n_columns` `f64` importances.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), ForestError> {
        let u32w = |w: &mut W, v: usize| w.write_all(&(v as u32).to_le_bytes());
        u32w(&mut w, self.columns.len())?;
        for c in &self.columns {
            u32w(&mut w, c.len())?;
            w.write_all(c.as_bytes())?;
        }
        for v in [self.spec.n_trees, self.spec.p_star, self.spec.n_star] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&self.spec.seed.to_le_bytes())?;
        w.write_all(&[u8::from(self.spec.bootstrap)])?;
        for t in &self.trees {
            u32w(&mut w, t.features.len())?;
            for &f in &t.features {
                u32w(&mut w, f)?;
            }
            u32w(&mut w, t.nodes.len())?;
            for node in &t.nodes {
                let (kind, feature, threshold, left, right, val, n) = match *node {
                    Node::Leaf { value, n } => (0u8, 0, 0.0, 0, 0, value, n),
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                        decrease,
                        n,
                    } => (1u8, feature, threshold, left, right, decrease, n),
                };
                w.write_all(&[kind])?;
                u32w(&mut w, feature)?;
                w.write_all(&threshold.to_le_bytes())?;
                u32w(&mut w, left)?;
                u32w(&mut w, right)?;
                w.write_all(&val.to_le_bytes())?;
                u32w(&mut w, n)?;
            }
        }
        for v in &self.importance {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, ForestError> {
        fn u32r<R: Read>(r: &mut R) -> Result<usize, ForestError> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b) as usize)
        }
        fn u64r<R: Read>(r: &mut R) -> Result<u64, ForestError> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        }
        fn f64r<R: Read>(r: &mut R) -> Result<f64, ForestError> {
            Ok(f64::from_bits(u64r(r)?))
        }
        let nc = u32r(&mut r)?;
        let mut columns = Vec::with_capacity(nc);
        for _ in 0..nc {
            let len = u32r(&mut r)?;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            columns.push(String::from_utf8(buf).map_err(|e| ForestError::Format(e.to_string()))?);
        }
        let n_trees = u64r(&mut r)? as usize;
        let p_star = u64r(&mut r)? as usize;
        let n_star = u64r(&mut r)? as usize;
        let seed = u64r(&mut r)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let spec = ForestSpec {
            n_trees,
            p_star,
            n_star,
            seed,
            bootstrap: flag[0] != 0,
        };
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let nfeat = u32r(&mut r)?;
            let features = (0..nfeat).map(|_| u32r(&mut r)).collect::<Result<Vec<_>, _>>()?;
            let nn = u32r(&mut r)?;
            let mut nodes = Vec::with_capacity(nn);
            for _ in 0..nn {
                r.read_exact(&mut flag)?;
                let feature = u32r(&mut r)?;
                let threshold = f64r(&mut r)?;
                let left = u32r(&mut r)?;
                let right = u32r(&mut r)?;
                let val = f64r(&mut r)?;
                let n = u32r(&mut r)?;
                nodes.push(match flag[0] {
                    0 => Node::Leaf { value: val, n },
                    1 => {
                        if left >= nn || right >= nn || feature >= nc {
                            return Err(ForestError::Format("node index out of range".into()));
                        }
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                            decrease: val,
                            n,
                        }
                    }
                    k => return Err(ForestError::Format(format!("unknown node kind {k}"))),
                });
            }
            trees.push(Tree { features, nodes });
        }
        let importance = (0..nc).map(|_| f64r(&mut r)).collect::<Result<Vec<_>, _>>()?;
        Ok(ForestModel {
            columns,
            spec,
            trees,
            importance,
        })
    }
}

pub fn forest_predict(model: &ForestModel, table: &FeatureTable) -> Result<Vec<f64>, ForestError> {
    model.predict_design(&table.design()?)
}

/// Columns by mean decrease in Gini, largest first; ties in name order.
pub fn forest_importance(model: &ForestModel) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = model
        .columns
        .iter()
        .cloned()
        .zip(model.importance.iter().copied())
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gini_params(n_star: usize) -> TreeParams {
        TreeParams {
            criterion: Criterion::Gini,
            min_split: n_star,
            min_leaf: 1,
        }
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[4, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[5, 5]).unwrap(), 0.5);
        assert_eq!(gini(&[3, 1]).unwrap(), 0.375);
        assert!(gini(&[0, 0]).is_err());
    }

    #[test]
    fn separable_data_fits_perfectly() {
        let x = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]];
        let y = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let t = fit_tree(&x, &y, &(0..6).collect::<Vec<_>>(), &[0], &gini_params(2)).unwrap();
        let d = Design {
            names: vec!["a".into()],
            columns: x,
            y: y.clone(),
        };
        assert_eq!(t.predict(&d), y);
        assert_eq!(t.nodes.len(), 3);
    }

    #[test]
    fn identical_features_give_one_leaf() {
        let x = vec![vec![1.0; 4]];
        let y = vec![0.0, 1.0, 1.0, 0.0];
        let t = fit_tree(&x, &y, &[0, 1, 2, 3], &[0], &gini_params(2)).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { value: 0.5, n: 4 }]);
    }

    #[test]
    fn node_size_below_n_star_is_not_split() {
        let x = vec![vec![1.0, 2.0, 3.0]];
        let y = vec![0.0, 1.0, 1.0];
        let t = fit_tree(&x, &y, &[0, 1, 2], &[0], &gini_params(4)).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn single_split_importance_equals_decrease() {
        let d = Design {
            names: vec!["a".into(), "b".into()],
            columns: vec![vec![0.0, 0.0, 1.0, 1.0], vec![5.0, 5.0, 5.0, 5.0]],
            y: vec![0.0, 0.0, 1.0, 1.0],
        };
        let mut spec = ForestSpec::new(1, 2, 2, 0);
        spec.bootstrap = false;
        let f = fit_forest_design(&d, &spec).unwrap();
        assert_eq!(f.importance, vec![0.5, 0.0]);
        let ranked = forest_importance(&f);
        assert_eq!(ranked[0].0, "a");
    }

    #[test]
    fn binary_round_trip() {
        let d = Design {
            names: vec!["a".into(), "b".into()],
            columns: vec![
                vec![0.1, 0.5, 0.2, 0.9, 0.3, 0.7],
                vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0],
            ],
            y: vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
        };
        let f = fit_forest_design(&d, &ForestSpec::new(5, 1, 2, 9)).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(ForestModel::read_binary(&buf[..]).unwrap(), f);
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<ForestModel>(&json).unwrap(), f);
    }

    #[test]
    fn spec_validation() {
        let d = Design {
            names: vec!["a".into()],
            columns: vec![vec![0.0, 1.0]],
            y: vec![0.0, 1.0],
        };
        assert!(fit_forest_design(&d, &ForestSpec::new(0, 1, 2, 0)).is_err());
        assert!(fit_forest_design(&d, &ForestSpec::new(1, 2, 2, 0)).is_err());
        assert!(fit_forest_design(&d, &ForestSpec::new(1, 1, 1, 0)).is_err());
    }
}

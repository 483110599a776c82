//! Rare-category lumping and GLM target encoding.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::linear_models::logit;

/// Category that absorbs rare levels.
pub const OTHER: &str = "other";

/// Replaces categories whose frequency is at most `threshold` by [`OTHER`].
/// Returns the new column and the set of lumped categories.
pub fn lump_rare(values: &[String], threshold: f64) -> (Vec<String>, BTreeSet<String>) {
    let counts = counts(values);
    let n = values.len() as f64;
    let lumped: BTreeSet<String> = counts
        .iter()
        .filter(|(_, &c)| c as f64 / n <= threshold)
        .map(|(k, _)| k.clone())
        .collect();
    let out = values
        .iter()
        .map(|v| if lumped.contains(v) { OTHER.to_string() } else { v.clone() })
        .collect();
    (out, lumped)
}

pub(crate) fn counts(values: &[String]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for v in values {
        *m.entry(v.clone()).or_insert(0) += 1;
    }
    m
}

/// Coefficients of the intercept-free one-hot logistic regression of `y` on
/// the column. The design is saturated, so category `j` gets the logit of
/// its response mean; a pure category is clamped to the logit of `0.5/n_j`
/// (or `1 - 0.5/n_j`).
pub fn target_encode_fit(values: &[String], y: &[u8]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (v, &yi) in values.iter().zip(y) {
        let e = acc.entry(v.clone()).or_insert((0, 0));
        e.0 += 1;
        e.1 += usize::from(yi);
    }
    acc.into_iter()
        .map(|(k, (n, pos))| {
            let nf = n as f64;
            let m = (pos as f64 / nf).clamp(0.5 / nf, 1.0 - 0.5 / nf);
            (k, logit(m))
        })
        .collect()
}

/// Frozen lumping + encoding for one categorical column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalStep {
    pub column: String,
    pub lumped: BTreeSet<String>,
    pub encoding: BTreeMap<String, f64>,
    /// Encoding of categories never seen in training.
    pub unseen: f64,
}

impl CategoricalStep {
    pub fn fit(column: &str, values: &[String], y: &[u8], threshold: f64) -> Self {
        let (lumped_values, lumped) = lump_rare(values, threshold);
        let encoding = target_encode_fit(&lumped_values, y);
        let unseen = match encoding.get(OTHER) {
            Some(&v) => v,
            None => {
                let c = counts(&lumped_values);
                let n = lumped_values.len() as f64;
                encoding.iter().map(|(k, v)| v * c[k] as f64 / n).sum()
            }
        };
        CategoricalStep {
            column: column.to_string(),
            lumped,
            encoding,
            unseen,
        }
    }

    pub fn encode(&self, value: &str) -> f64 {
        let key = if self.lumped.contains(value) { OTHER } else { value };
        self.encoding.get(key).copied().unwrap_or(self.unseen)
    }

    pub fn apply(&self, values: &[String]) -> Vec<f64> {
        values.iter().map(|v| self.encode(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(spec: &[(&str, usize)]) -> Vec<String> {
        spec.iter()
            .flat_map(|(k, n)| std::iter::repeat_n(k.to_string(), *n))
            .collect()
    }

    #[test]
    fn lumps_below_threshold() {
        let (out, lumped) = lump_rare(&column(&[("A", 90), ("B", 6), ("C", 4)]), 0.05);
        assert_eq!(lumped, BTreeSet::from(["C".to_string()]));
        assert_eq!(out.iter().filter(|v| *v == OTHER).count(), 4);
    }

    #[test]
    fn frequent_categories_unchanged() {
        let v = column(&[("A", 50), ("B", 50)]);
        let (out, lumped) = lump_rare(&v, 0.05);
        assert!(lumped.is_empty());
        assert_eq!(out, v);
    }

    #[test]
    fn two_rare_categories_share_one_level() {
        let (out, lumped) = lump_rare(&column(&[("A", 95), ("B", 3), ("C", 2)]), 0.05);
        assert_eq!(lumped.len(), 2);
        let c = counts(&out);
        assert_eq!(c[OTHER] as f64 / 100.0, 0.05);
    }

    #[test]
    fn half_mean_encodes_to_zero() {
        let v = column(&[("A", 4)]);
        let e = target_encode_fit(&v, &[1, 0, 1, 0]);
        assert_eq!(e["A"], 0.0);
    }

    #[test]
    fn pure_category_is_clamped() {
        let v = column(&[("A", 4), ("B", 2)]);
        let e = target_encode_fit(&v, &[0, 0, 0, 0, 1, 1]);
        assert!((e["A"] - logit(0.125)).abs() < 1e-15);
        assert!((e["B"] - logit(0.75)).abs() < 1e-15);
    }

    #[test]
    fn unseen_category_fallbacks() {
        let v = column(&[("A", 90), ("B", 6), ("C", 4)]);
        let mut y = vec![0u8; 100];
        y[0] = 1;
        y[95] = 1;
        let step = CategoricalStep::fit("c", &v, &y, 0.05);
        assert_eq!(step.encode("Z"), step.encoding[OTHER]);
        assert_eq!(step.encode("C"), step.encoding[OTHER]);

        let v = column(&[("A", 50), ("B", 50)]);
        let mut y = vec![0u8; 100];
        y[0] = 1;
        y[60] = 1;
        y[61] = 1;
        let step = CategoricalStep::fit("c", &v, &y, 0.05);
        let expected = 0.5 * step.encoding["A"] + 0.5 * step.encoding["B"];
        assert!((step.encode("Z") - expected).abs() < 1e-15);
    }
}

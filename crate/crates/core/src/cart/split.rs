use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Gini impurity `1 - p0² - p1²` of a two-class node.
pub fn gini_impurity(counts: (u64, u64)) -> Result<f64> {
    let n = counts.0 + counts.1;
    if n == 0 {
        return Err(Error::domain("Gini impurity of an empty node"));
    }
    let n = n as f64;
    let p0 = counts.0 as f64 / n;
    let p1 = counts.1 as f64 / n;
    Ok(1.0 - p0 * p0 - p1 * p1)
}

/// How split thresholds are placed between consecutive distinct values
/// `a < b` of a column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdRule {
    /// `(a + b) / 2`
    Midpoint,
    /// `b` itself; used for binned columns where `b` is a bin edge, so the
    /// threshold routes raw values exactly like binned ones.
    UpperValue,
}

/// Column-major feature matrix with binary labels (`true` = split).
#[derive(Clone, Debug)]
pub struct TrainingMatrix {
    pub columns: Vec<Vec<f64>>,
    pub rules: Vec<ThresholdRule>,
    pub labels: Vec<bool>,
}

impl TrainingMatrix {
    pub fn new(columns: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        let rules = vec![ThresholdRule::Midpoint; columns.len()];
        Self::with_rules(columns, rules, labels)
    }

    pub fn with_rules(
        columns: Vec<Vec<f64>>,
        rules: Vec<ThresholdRule>,
        labels: Vec<bool>,
    ) -> Result<Self> {
        if rules.len() != columns.len() {
            return Err(Error::domain("one threshold rule per column required"));
        }
        if columns.iter().any(|c| c.len() != labels.len()) {
            return Err(Error::domain("feature columns and labels differ in length"));
        }
        if columns.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::domain("NaN feature value"));
        }
        Ok(TrainingMatrix {
            columns,
            rules,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn counts(&self, indices: &[usize]) -> (u64, u64) {
        let split = indices.iter().filter(|&&i| self.labels[i]).count() as u64;
        (indices.len() as u64 - split, split)
    }
}

/// Best admissible split of a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Sample-weighted mean of the two child Gini values.
    pub weighted_gini: f64,
    pub left: (u64, u64),
    pub right: (u64, u64),
}

/// `Σ (n0² + n1²) / n` over the children as an exact fraction. Maximising it
/// minimises the weighted child Gini.
#[derive(Clone, Copy, Debug)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of_node(c: (u64, u64)) -> Self {
        let (a, b) = (c.0 as u128, c.1 as u128);
        Purity {
            num: a * a + b * b,
            den: a + b,
        }
    }

    fn of_split(l: (u64, u64), r: (u64, u64)) -> Self {
        let pl = Purity::of_node(l);
        let pr = Purity::of_node(r);
        Purity {
            num: pl.num * pr.den + pr.num * pl.den,
            den: pl.den * pr.den,
        }
    }

    fn cmp(&self, other: &Purity) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

fn weighted_gini(l: (u64, u64), r: (u64, u64)) -> f64 {
    let n = (l.0 + l.1 + r.0 + r.1) as f64;
    let part = |c: (u64, u64)| {
        let m = (c.0 + c.1) as f64;
        m / n * gini_impurity(c).expect("children are non-empty")
    };
    part(l) + part(r)
}

/// Searches every feature and every threshold between consecutive distinct
/// values for the split with the lowest weighted child Gini. A split is
/// admissible when both children hold at least `min_leaf` samples and the
/// impurity strictly drops. Ties go to the lowest feature, then the lowest
/// threshold.
pub fn best_split(
    matrix: &TrainingMatrix,
    indices: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    if indices.is_empty() {
        return None;
    }
    let total = matrix.counts(indices);
    if total.0 == 0 || total.1 == 0 {
        return None;
    }
    let parent = Purity::of_node(total);
    let min_leaf = min_leaf.max(1);
    let mut best: Option<(Purity, SplitCandidate)> = None;
    let mut order = indices.to_vec();

    for (feature, column) in matrix.columns.iter().enumerate() {
        order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
        let mut left = (0u64, 0u64);
        for k in 0..order.len() - 1 {
            if matrix.labels[order[k]] {
                left.1 += 1;
            } else {
                left.0 += 1;
            }
            let (lo, hi) = (column[order[k]], column[order[k + 1]]);
            if lo == hi {
                continue;
            }
            let n_left = k + 1;
            if n_left < min_leaf || order.len() - n_left < min_leaf {
                continue;
            }
            let right = (total.0 - left.0, total.1 - left.1);
            let purity = Purity::of_split(left, right);
            if purity.cmp(&parent) != Ordering::Greater {
                continue;
            }
            if best
                .as_ref()
                .is_some_and(|(b, _)| purity.cmp(b) != Ordering::Greater)
            {
                continue;
            }
            let threshold = match matrix.rules[feature] {
                ThresholdRule::UpperValue => hi,
                ThresholdRule::Midpoint => {
                    let mid = lo + (hi - lo) / 2.0;
                    if mid > lo {
                        mid
                    } else {
                        hi
                    }
                }
            };
            best = Some((
                purity,
                SplitCandidate {
                    feature,
                    threshold,
                    weighted_gini: weighted_gini(left, right),
                    left,
                    right,
                },
            ));
        }
    }
    best.map(|(_, c)| c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_reference_values() {
        assert_eq!(gini_impurity((100, 0)).unwrap(), 0.0);
        assert_eq!(gini_impurity((0, 7)).unwrap(), 0.0);
        assert_eq!(gini_impurity((50, 50)).unwrap(), 0.5);
        assert!((gini_impurity((90, 10)).unwrap() - 0.18).abs() < 1e-15);
        assert!(gini_impurity((0, 0)).is_err());
    }

    #[test]
    fn separable_column_splits_between_classes() {
        let m = TrainingMatrix::new(
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            vec![false, false, true, true],
        )
        .unwrap();
        let s = best_split(&m, &[0, 1, 2, 3], 1).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 2.5);
        assert_eq!(s.weighted_gini, 0.0);
        assert_eq!((s.left, s.right), ((2, 0), (0, 2)));
    }

    #[test]
    fn pure_node_has_no_split() {
        let m = TrainingMatrix::new(vec![vec![1.0, 2.0, 3.0]], vec![true; 3]).unwrap();
        assert!(best_split(&m, &[0, 1, 2], 1).is_none());
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let m = TrainingMatrix::new(
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            vec![false, true, true, true],
        )
        .unwrap();
        assert_eq!(best_split(&m, &[0, 1, 2, 3], 1).unwrap().threshold, 1.5);
        // Only the balanced 2/2 split remains admissible.
        assert_eq!(best_split(&m, &[0, 1, 2, 3], 2).unwrap().threshold, 2.5);
        assert!(best_split(&m, &[0, 1, 2, 3], 3).is_none());
    }

    #[test]
    fn ties_prefer_lowest_feature_then_threshold() {
        // Both columns separate identically.
        let m = TrainingMatrix::new(
            vec![vec![0.0, 0.0, 1.0, 1.0], vec![5.0, 5.0, 9.0, 9.0]],
            vec![false, false, true, true],
        )
        .unwrap();
        assert_eq!(best_split(&m, &[0, 1, 2, 3], 1).unwrap().feature, 0);
        // Symmetric labels: thresholds 1.5 and 3.5 score equally.
        let m = TrainingMatrix::new(
            vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]],
            vec![true, false, false, false, true],
        )
        .unwrap();
        let s = best_split(&m, &[0, 1, 2, 3, 4], 1).unwrap();
        assert_eq!(s.threshold, 1.5);
    }

    #[test]
    fn upper_value_rule_uses_bin_edge() {
        let m = TrainingMatrix::with_rules(
            vec![vec![1.0, 1.0, 4.0, 4.0]],
            vec![ThresholdRule::UpperValue],
            vec![false, false, true, true],
        )
        .unwrap();
        assert_eq!(best_split(&m, &[0, 1, 2, 3], 1).unwrap().threshold, 4.0);
    }
}

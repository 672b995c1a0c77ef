//! Column-wise element importance, min-max normalization and cut-off selection.

use super::CutoffRule;
use crate::model::Factor;

/// Selected rows of one factor column, optionally with the normalized
/// importances they were chosen from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnSelection {
    pub selected: Vec<usize>,
    /// Empty unless the caller asked for it.
    pub normalized: Vec<f64>,
}

/// Per-column selections made during one Cut-CD pass over a factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMask {
    pub target: Factor,
    pub columns: Vec<ColumnSelection>,
}

impl SelectionMask {
    pub fn total_selected(&self) -> usize {
        self.columns.iter().map(|c| c.selected.len()).sum()
    }
}

/// `e[j] = −u[j]·g[j] − ½·h·u[j]²`: the estimated objective change from
/// updating element `j` of the column; larger is more important.
pub fn importance_column(u_col: &[f64], g_col: &[f64], h_r: f64) -> Vec<f64> {
    debug_assert_eq!(u_col.len(), g_col.len());
    u_col.iter().zip(g_col).map(|(&u, &g)| importance(u, g, h_r)).collect()
}

#[inline]
pub(crate) fn importance(u: f64, g: f64, h: f64) -> f64 {
    -(u * g) - 0.5 * (h * u * u)
}

/// Min-max rescale to `[0, 1]`. A constant column maps to all ones.
pub fn normalize_column(e: &[f64]) -> Vec<f64> {
    let mut out = e.to_vec();
    normalize_in_place(&mut out);
    out
}

pub(crate) fn normalize_in_place(e: &mut [f64]) {
    let (lo, hi) = e.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        e.iter_mut().for_each(|v| *v = 1.0);
        return;
    }
    e.iter_mut().for_each(|v| *v = (*v - lo) / span);
}

/// Rows whose normalized importance reaches the cut-off (ties included),
/// in ascending order.
pub fn select_cutoff(n: &[f64], rule: CutoffRule) -> Vec<usize> {
    let mut out = Vec::new();
    select_into(n, rule, &mut out);
    out
}

pub(crate) fn select_into(n: &[f64], rule: CutoffRule, out: &mut Vec<usize>) {
    out.clear();
    if n.is_empty() {
        return;
    }
    let cut = match rule {
        CutoffRule::Mean => n.iter().sum::<f64>() / n.len() as f64,
        CutoffRule::Fixed(c) => c,
    };
    out.extend(n.iter().enumerate().filter(|(_, &v)| v >= cut).map(|(j, _)| j));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn importance_examples() {
        assert_eq!(importance_column(&[0.0, 0.0], &[3.0, -1.0], 2.0), vec![0.0, 0.0]);
        assert_eq!(importance_column(&[1.0], &[-2.0], 1.0), vec![1.5]);
        assert_eq!(importance_column(&[1.0], &[2.0], 1.0), vec![-2.5]);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_column(&[0.0, 0.5, 1.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(normalize_column(&[0.3, 0.3, 0.3]), vec![1.0, 1.0, 1.0]);
        assert_eq!(normalize_column(&[-2.0, 0.0, 2.0]), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(select_cutoff(&[0.0, 0.5, 1.0], CutoffRule::Mean), vec![1, 2]);
        assert_eq!(select_cutoff(&[1.0, 1.0, 1.0], CutoffRule::Mean), vec![0, 1, 2]);
        assert_eq!(select_cutoff(&[0.0, 0.5, 1.0], CutoffRule::Fixed(0.9)), vec![2]);
        assert!(select_cutoff(&[], CutoffRule::Mean).is_empty());
    }

    #[test]
    fn cutoff_matches_loop_on_uniform_randoms() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let n: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        let mut mean = 0.0;
        for v in &n {
            mean += v;
        }
        mean /= 100.0;
        let mut want = Vec::new();
        for (j, v) in n.iter().enumerate() {
            if *v >= mean {
                want.push(j);
            }
        }
        assert_eq!(select_cutoff(&n, CutoffRule::Mean), want);
    }

    proptest! {
        #[test]
        fn normalized_values_lie_in_unit_interval(e in prop::collection::vec(-1e6f64..1e6, 1..50)) {
            let n = normalize_column(&e);
            prop_assert!(n.iter().all(|v| (0.0..=1.0).contains(v)));
            let sel = select_cutoff(&n, CutoffRule::Mean);
            prop_assert!(!sel.is_empty());
        }
    }
}

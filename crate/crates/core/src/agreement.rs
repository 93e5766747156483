//! Fleiss' kappa for a fixed number of raters per item.
//!
//! With `n_ij` raters assigning item `i` to category `j`, `n` raters and `N`
//! items:
//!
//! ```text
//! P_i  = (sum_j n_ij^2 - n) / (n (n - 1))      P  = mean_i P_i
//! p_j  = sum_i n_ij / (N n)                    Pe = sum_j p_j^2
//! kappa = (P - Pe) / (1 - Pe)
//! ```
//!
//! Everything is derived from integer count sums, so the same multiset of
//! raters always yields a bit-identical kappa regardless of the order in
//! which they were added.

use serde::Serialize;

use crate::corpus::{AnnotationMatrix, Label};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaValue {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    /// Every label in the matrix is one category; `kappa` is 1 by convention.
    pub degenerate: bool,
}

/// Item × category count table, grown one rater at a time.
#[derive(Debug, Clone)]
pub struct CategoryCounts {
    categories: usize,
    items: usize,
    raters: u64,
    counts: Vec<u32>,
    // sum_i sum_j n_ij^2
    sum_sq: u64,
    column_totals: Vec<u64>,
}

impl CategoryCounts {
    pub fn new(items: usize, categories: usize) -> Self {
        CategoryCounts {
            categories,
            items,
            raters: 0,
            counts: vec![0; items * categories],
            sum_sq: 0,
            column_totals: vec![0; categories],
        }
    }

    pub fn raters(&self) -> usize {
        self.raters as usize
    }

    /// Add one rater's labels (one per item, in item order).
    pub fn add_rater(&mut self, labels: &[Label]) {
        assert_eq!(labels.len(), self.items, "rater must label every item");
        for (i, l) in labels.iter().enumerate() {
            let j = l.index();
            let cell = &mut self.counts[i * self.categories + j];
            self.sum_sq += 2 * u64::from(*cell) + 1;
            *cell += 1;
            self.column_totals[j] += 1;
        }
        self.raters += 1;
    }

    /// Kappa of the raters added so far; needs at least two.
    pub fn kappa(&self) -> KappaValue {
        assert!(self.raters >= 2, "Fleiss' kappa needs at least 2 raters");
        let n = self.raters;
        let total = self.items as u64 * n;
        let observed = (self.sum_sq - total) as f64 / (total * (n - 1)) as f64;
        let col_sq: u128 = self
            .column_totals
            .iter()
            .map(|&t| u128::from(t) * u128::from(t))
            .sum();
        let expected = col_sq as f64 / (u128::from(total) * u128::from(total)) as f64;
        if self.column_totals.iter().any(|&t| t == total) {
            return KappaValue {
                kappa: 1.0,
                observed_agreement: 1.0,
                expected_agreement: 1.0,
                degenerate: true,
            };
        }
        KappaValue {
            kappa: (observed - expected) / (1.0 - expected),
            observed_agreement: observed,
            expected_agreement: expected,
            degenerate: false,
        }
    }
}

pub fn fleiss_kappa(matrix: &AnnotationMatrix) -> KappaValue {
    let all: Vec<usize> = (0..matrix.n_raters()).collect();
    fleiss_kappa_subset(matrix, &all)
}

/// Kappa of the listed raters only. Panics on fewer than two raters or an
/// index outside the matrix.
pub fn fleiss_kappa_subset(matrix: &AnnotationMatrix, raters: &[usize]) -> KappaValue {
    let mut counts = CategoryCounts::new(matrix.n_items(), matrix.n_categories());
    for &r in raters {
        counts.add_rater(matrix.rater_labels(r));
    }
    counts.kappa()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn two_by_two_hand_case() {
        let m = AnnotationMatrix::from_tokens(
            ids("p", 2),
            ids("s", 2),
            &[vec!["positive", "positive"], vec!["positive", "negative"]],
        )
        .unwrap();
        let k = fleiss_kappa(&m);
        assert!((k.observed_agreement - 0.5).abs() < 1e-15);
        assert!((k.expected_agreement - 0.625).abs() < 1e-15);
        assert!((k.kappa + 1.0 / 3.0).abs() < 1e-15);
        assert!(!k.degenerate);
    }

    #[test]
    fn unanimous_items_give_one() {
        let cats = ["positive", "neutral", "negative"];
        let row: Vec<&str> = (0..10).map(|i| cats[i % 3]).collect();
        let m = AnnotationMatrix::from_tokens(ids("p", 4), ids("s", 10), &vec![row; 4]).unwrap();
        let k = fleiss_kappa(&m);
        assert_eq!(k.kappa, 1.0);
        assert!(!k.degenerate);
    }

    #[test]
    fn single_category_everywhere_is_degenerate() {
        let m = AnnotationMatrix::from_tokens(ids("p", 3), ids("s", 4), &vec![vec!["neutral"; 4]; 3]).unwrap();
        let k = fleiss_kappa(&m);
        assert_eq!(k.kappa, 1.0);
        assert!(k.degenerate);
    }

    #[test]
    fn order_of_addition_is_irrelevant() {
        let m = crate::corpus::generate_synthetic(9, 40, 3, 0.6, 3).unwrap();
        let a = fleiss_kappa_subset(&m, &[0, 1, 2, 3, 4, 5, 6, 7, 8]);
        let b = fleiss_kappa_subset(&m, &[8, 3, 5, 0, 2, 7, 1, 6, 4]);
        assert_eq!(a.kappa.to_bits(), b.kappa.to_bits());
    }
}

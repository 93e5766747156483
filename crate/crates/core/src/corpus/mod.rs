//! Rater × item annotation matrices and the ways to obtain them.

mod matrix_io;
mod survey;
mod synth;

use std::collections::HashSet;

pub use matrix_io::{read_matrix, read_matrix_with_categories, write_matrix, write_matrix_to};
pub use survey::{
    filter_respondents, load_raw, preprocess, ColumnMapping, Encodings, PreprocessReport,
    RawRecord, RawSurveyTable,
};
pub use synth::generate_synthetic;

use crate::error::{Error, Result};

/// Sentiment polarity tokens, in the canonical category order.
pub const SENTIMENT_CATEGORIES: [&str; 3] = ["positive", "neutral", "negative"];

/// Index of a category within a matrix's category set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(pub u16);

impl Label {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub(crate) fn sentiment_categories() -> Vec<String> {
    SENTIMENT_CATEGORIES.iter().map(|s| s.to_string()).collect()
}

/// A complete grid of categorical labels: every rater labelled every item.
///
/// Construction enforces the invariants Fleiss' kappa relies on, so any
/// value of this type can be passed to the agreement routines directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationMatrix {
    raters: Vec<String>,
    items: Vec<String>,
    categories: Vec<String>,
    // rater-major: labels[r * items.len() + i]
    labels: Vec<Label>,
}

impl AnnotationMatrix {
    /// `rows[r][i]` is the label rater `r` gave item `i`.
    pub fn new(
        raters: Vec<String>,
        items: Vec<String>,
        categories: Vec<String>,
        rows: Vec<Vec<Label>>,
    ) -> Result<Self> {
        if raters.len() < 2 {
            return Err(Error::InvalidMatrix(format!(
                "need at least 2 raters, got {}",
                raters.len()
            )));
        }
        if items.is_empty() {
            return Err(Error::InvalidMatrix("need at least 1 item".into()));
        }
        if categories.len() < 2 {
            return Err(Error::InvalidMatrix(format!(
                "need at least 2 categories, got {}",
                categories.len()
            )));
        }
        if categories.len() > u16::MAX as usize {
            return Err(Error::InvalidMatrix("too many categories".into()));
        }
        check_unique("rater", &raters)?;
        check_unique("item", &items)?;
        check_unique("category", &categories)?;
        if rows.len() != raters.len() {
            return Err(Error::IncompleteMatrix(format!(
                "{} label rows for {} raters",
                rows.len(),
                raters.len()
            )));
        }
        let mut labels = Vec::with_capacity(raters.len() * items.len());
        for (rater, row) in raters.iter().zip(rows) {
            if row.len() != items.len() {
                return Err(Error::IncompleteMatrix(format!(
                    "rater `{rater}` has {} labels for {} items",
                    row.len(),
                    items.len()
                )));
            }
            if let Some(bad) = row.iter().find(|l| l.index() >= categories.len()) {
                return Err(Error::InvalidMatrix(format!(
                    "label index {} outside {} categories",
                    bad.0,
                    categories.len()
                )));
            }
            labels.extend(row);
        }
        Ok(AnnotationMatrix {
            raters,
            items,
            categories,
            labels,
        })
    }

    /// Build from category tokens, with the sentiment category set.
    pub fn from_tokens<S: AsRef<str>>(
        raters: Vec<String>,
        items: Vec<String>,
        rows: &[Vec<S>],
    ) -> Result<Self> {
        let categories = sentiment_categories();
        let rows = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t| label_for(&categories, t.as_ref()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        AnnotationMatrix::new(raters, items, categories, rows)
    }

    pub fn n_raters(&self) -> usize {
        self.raters.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn label(&self, rater: usize, item: usize) -> Label {
        self.labels[rater * self.items.len() + item]
    }

    pub fn token(&self, rater: usize, item: usize) -> &str {
        &self.categories[self.label(rater, item).index()]
    }

    /// All labels of one rater, in item order.
    pub fn rater_labels(&self, rater: usize) -> &[Label] {
        let n = self.items.len();
        &self.labels[rater * n..(rater + 1) * n]
    }

    pub fn rater_index(&self, id: &str) -> Option<usize> {
        self.raters.iter().position(|r| r == id)
    }

    /// Sub-matrix of the given raters, in the given order.
    pub fn select_raters(&self, raters: &[usize]) -> Result<AnnotationMatrix> {
        let ids = raters
            .iter()
            .map(|&r| {
                self.raters
                    .get(r)
                    .cloned()
                    .ok_or_else(|| Error::UnknownRater(format!("#{r}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = raters.iter().map(|&r| self.rater_labels(r).to_vec()).collect();
        AnnotationMatrix::new(ids, self.items.clone(), self.categories.clone(), rows)
    }

    /// Replace one rater's labels; used to probe prefix locality.
    pub fn with_rater_labels(&self, rater: usize, labels: &[Label]) -> Result<AnnotationMatrix> {
        let mut rows: Vec<Vec<Label>> = (0..self.n_raters())
            .map(|r| self.rater_labels(r).to_vec())
            .collect();
        *rows
            .get_mut(rater)
            .ok_or_else(|| Error::UnknownRater(format!("#{rater}")))? = labels.to_vec();
        AnnotationMatrix::new(
            self.raters.clone(),
            self.items.clone(),
            self.categories.clone(),
            rows,
        )
    }
}

pub(crate) fn label_for(categories: &[String], token: &str) -> Result<Label> {
    categories
        .iter()
        .position(|c| c == token)
        .map(|i| Label(i as u16))
        .ok_or_else(|| Error::UnknownLabel(token.to_string()))
}

fn check_unique(what: &str, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidMatrix(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(())
}

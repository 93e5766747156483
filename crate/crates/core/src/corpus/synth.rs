use rand::Rng;

use super::{sentiment_categories, AnnotationMatrix, Label};
use crate::error::{Error, Result};
use crate::rng::root_stream;

/// Synthetic cohort from a truth-plus-uniform-noise model.
///
/// Each item gets one ground-truth category drawn uniformly. Every rater
/// keeps the truth with probability `1 - noise` and otherwise draws a label
/// uniformly over all `categories`. With three categories the sentiment
/// tokens are used, otherwise `c1..cK`.
pub fn generate_synthetic(
    raters: usize,
    items: usize,
    categories: usize,
    noise: f64,
    seed: u64,
) -> Result<AnnotationMatrix> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::out_of_range("noise", noise, "must lie in [0, 1]"));
    }
    if raters < 2 {
        return Err(Error::out_of_range("raters", raters, "at least 2"));
    }
    if items < 1 {
        return Err(Error::out_of_range("items", items, "at least 1"));
    }
    if !(2..=u16::MAX as usize).contains(&categories) {
        return Err(Error::out_of_range("categories", categories, "at least 2"));
    }
    let mut rng = root_stream(seed);
    let truth: Vec<u16> = (0..items)
        .map(|_| rng.random_range(0..categories as u16))
        .collect();
    let rows = (0..raters)
        .map(|_| {
            truth
                .iter()
                .map(|&t| {
                    if rng.random::<f64>() < noise {
                        Label(rng.random_range(0..categories as u16))
                    } else {
                        Label(t)
                    }
                })
                .collect()
        })
        .collect();
    let cats = if categories == 3 {
        sentiment_categories()
    } else {
        (1..=categories).map(|c| format!("c{c}")).collect()
    };
    AnnotationMatrix::new(
        padded_ids("r", raters),
        padded_ids("s", items),
        cats,
        rows,
    )
}

fn padded_ids(prefix: &str, n: usize) -> Vec<String> {
    let width = n.to_string().len();
    (1..=n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

//! Long-format matrix files: `rater,item,label`, one row per cell.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{label_for, sentiment_categories, AnnotationMatrix, Label};
use crate::error::{Error, Result};

const HEADER: [&str; 3] = ["rater", "item", "label"];

/// Write `matrix` rater-major, preserving rater and item order.
pub fn write_matrix(matrix: &AnnotationMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_matrix_to(matrix, file)
}

pub fn write_matrix_to<W: Write>(matrix: &AnnotationMatrix, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(HEADER)?;
    for (r, rater) in matrix.raters().iter().enumerate() {
        for (i, item) in matrix.items().iter().enumerate() {
            out.write_record([rater.as_str(), item.as_str(), matrix.token(r, i)])?;
        }
    }
    out.flush().map_err(|e| Error::io("<matrix output>", e))?;
    Ok(())
}

/// Read a matrix whose labels are sentiment tokens.
pub fn read_matrix(path: &Path) -> Result<AnnotationMatrix> {
    read_matrix_with_categories(path, &sentiment_categories())
}

/// Read a matrix with an explicitly declared category set.
///
/// Rows may come in any order; raters and items are numbered by first
/// appearance. Tokens are matched exactly (case-sensitive).
pub fn read_matrix_with_categories(path: &Path, categories: &[String]) -> Result<AnnotationMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix_from(file, categories)
}

pub(crate) fn read_matrix_from<R: Read>(reader: R, categories: &[String]) -> Result<AnnotationMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != 3 || header.iter().zip(HEADER).any(|(h, e)| h.trim() != e) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header `rater,item,label`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut raters: Vec<String> = Vec::new();
    let mut rater_ix: HashMap<String, usize> = HashMap::new();
    let mut items: Vec<String> = Vec::new();
    let mut item_ix: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), Label> = HashMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let (rater, item, token) = (&record[0], &record[1], &record[2]);
        if rater.is_empty() || item.is_empty() {
            return Err(Error::MalformedRow {
                line,
                reason: "empty rater or item identifier".into(),
            });
        }
        let label = label_for(categories, token)?;
        let r = *rater_ix.entry(rater.to_string()).or_insert_with(|| {
            raters.push(rater.to_string());
            raters.len() - 1
        });
        let i = *item_ix.entry(item.to_string()).or_insert_with(|| {
            items.push(item.to_string());
            items.len() - 1
        });
        if cells.insert((r, i), label).is_some() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("duplicate cell for rater `{rater}`, item `{item}`"),
            });
        }
    }

    let mut rows = Vec::with_capacity(raters.len());
    for (r, rater) in raters.iter().enumerate() {
        let mut row = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            match cells.get(&(r, i)) {
                Some(&l) => row.push(l),
                None => {
                    return Err(Error::IncompleteMatrix(format!(
                        "rater `{rater}` has no label for item `{item}`"
                    )))
                }
            }
        }
        rows.push(row);
    }
    AnnotationMatrix::new(raters, items, categories.to_vec(), rows)
}

//! Raw survey ingestion and the two respondent filters.
//!
//! The raw export is a delimiter-separated table with one respondent per row.
//! Which columns hold the screening questions and the statement labels, and
//! how raw answers translate into sentiment tokens, is configured through a
//! [`ColumnMapping`] rather than hard-coded.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{sentiment_categories, AnnotationMatrix, Label};
use crate::error::{Error, Result};

/// Raw answer values per sentiment category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Encodings {
    pub positive: Vec<String>,
    pub neutral: Vec<String>,
    pub negative: Vec<String>,
    /// Values meaning "not answered". The empty cell always counts as missing.
    #[serde(default)]
    pub missing: Vec<String>,
}

/// Column layout of a raw survey export.
///
/// Statement columns are listed either explicitly (`label_cols`) or through
/// `label_col_template`, where `{i}` is replaced by `1..=statements`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    pub id_col: String,
    pub computer_scientist_col: String,
    pub programming_experience_col: String,
    #[serde(default = "default_no_values")]
    pub no_values: Vec<String>,
    #[serde(default)]
    pub label_cols: Vec<String>,
    #[serde(default)]
    pub label_col_template: Option<String>,
    #[serde(default)]
    pub statements: Option<usize>,
    /// Item identifiers for the output matrix; defaults to the column names.
    #[serde(default)]
    pub item_ids: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub encodings: Encodings,
}

fn default_no_values() -> Vec<String> {
    vec!["No".to_string()]
}

fn default_delimiter() -> char {
    ','
}

enum Cell {
    Label(Label),
    Missing,
}

impl ColumnMapping {
    pub fn load(path: &Path) -> Result<ColumnMapping> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ColumnMapping::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<ColumnMapping> {
        let mapping: ColumnMapping = toml::from_str(text).map_err(|e| Error::Mapping(e.to_string()))?;
        mapping.validate()?;
        Ok(mapping)
    }

    /// Statement columns in item order.
    pub fn label_columns(&self) -> Result<Vec<String>> {
        let cols = match (&self.label_cols[..], &self.label_col_template) {
            ([], Some(template)) => {
                if !template.contains("{i}") {
                    return Err(Error::Mapping("label_col_template must contain `{i}`".into()));
                }
                let n = self.statements.ok_or_else(|| {
                    Error::Mapping("label_col_template requires `statements`".into())
                })?;
                (1..=n).map(|i| template.replace("{i}", &i.to_string())).collect()
            }
            ([], None) => {
                return Err(Error::Mapping(
                    "one of label_cols or label_col_template is required".into(),
                ))
            }
            (cols, None) => cols.to_vec(),
            (_, Some(_)) => {
                return Err(Error::Mapping(
                    "label_cols and label_col_template are mutually exclusive".into(),
                ))
            }
        };
        if let Some(n) = self.statements {
            if cols.len() != n {
                return Err(Error::Mapping(format!(
                    "{} label columns but statements = {n}",
                    cols.len()
                )));
            }
        }
        Ok(cols)
    }

    fn validate(&self) -> Result<()> {
        let cols = self.label_columns()?;
        if cols.is_empty() {
            return Err(Error::Mapping("no label columns".into()));
        }
        let unique: HashSet<&String> = cols.iter().collect();
        if unique.len() != cols.len() {
            return Err(Error::Mapping("label columns are not unique".into()));
        }
        if !self.item_ids.is_empty() && self.item_ids.len() != cols.len() {
            return Err(Error::Mapping(format!(
                "{} item_ids for {} label columns",
                self.item_ids.len(),
                cols.len()
            )));
        }
        let mut owner: HashMap<&str, &str> = HashMap::new();
        let groups = [
            ("positive", &self.encodings.positive),
            ("neutral", &self.encodings.neutral),
            ("negative", &self.encodings.negative),
            ("missing", &self.encodings.missing),
        ];
        for (name, values) in groups {
            for v in values {
                if let Some(prev) = owner.insert(v.trim(), name) {
                    if prev != name {
                        return Err(Error::Mapping(format!(
                            "raw value `{v}` encodes both {prev} and {name}"
                        )));
                    }
                }
            }
        }
        for (name, values) in &groups[..3] {
            if values.is_empty() {
                return Err(Error::Mapping(format!("no raw values encode {name}")));
            }
        }
        Ok(())
    }

    fn decode(&self, raw: &str) -> Option<Cell> {
        let raw = raw.trim();
        if raw.is_empty() || self.encodings.missing.iter().any(|m| m.trim() == raw) {
            return Some(Cell::Missing);
        }
        let hit = |vals: &[String]| vals.iter().any(|v| v.trim() == raw);
        if hit(&self.encodings.positive) {
            Some(Cell::Label(Label(0)))
        } else if hit(&self.encodings.neutral) {
            Some(Cell::Label(Label(1)))
        } else if hit(&self.encodings.negative) {
            Some(Cell::Label(Label(2)))
        } else {
            None
        }
    }

    fn is_no(&self, raw: &str) -> bool {
        let raw = raw.trim();
        self.no_values.iter().any(|v| v.trim() == raw)
    }
}

/// One respondent: identifier plus the untranslated values of every column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RawSurveyTable {
    pub header: Vec<String>,
    pub rows: Vec<RawRecord>,
    pub mapping: ColumnMapping,
    cs_col: usize,
    prog_col: usize,
    label_cols: Vec<usize>,
}

impl RawSurveyTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn with_rows(&self, rows: Vec<RawRecord>) -> RawSurveyTable {
        RawSurveyTable {
            rows,
            ..self.clone()
        }
    }
}

/// Respondent counts before and after filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PreprocessReport {
    pub total_in: usize,
    pub removed_non_developers: usize,
    pub removed_incomplete: usize,
    pub retained: usize,
}

pub fn load_raw(path: &Path, mapping: &ColumnMapping) -> Result<RawSurveyTable> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    load_raw_from(text.as_slice(), mapping)
}

pub(crate) fn load_raw_from<R: std::io::Read>(reader: R, mapping: &ColumnMapping) -> Result<RawSurveyTable> {
    if !mapping.delimiter.is_ascii() {
        return Err(Error::Mapping("delimiter must be a single ASCII character".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = find(&mapping.id_col)?;
    let cs_col = find(&mapping.computer_scientist_col)?;
    let prog_col = find(&mapping.programming_experience_col)?;
    let label_cols = mapping
        .label_columns()?
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let id = record.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(Error::MalformedRow {
                line: record.position().map(|p| p.line()).unwrap_or(0),
                reason: "empty respondent id".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateRespondent(id));
        }
        rows.push(RawRecord {
            id,
            values: record.iter().map(str::to_string).collect(),
        });
    }
    Ok(RawSurveyTable {
        header,
        rows,
        mapping: mapping.clone(),
        cs_col,
        prog_col,
        label_cols,
    })
}

/// Apply both respondent filters, returning the retained rows.
///
/// Filter 1 drops anyone answering "No" to either screening question; filter 2
/// then drops anyone with a missing statement label. A respondent failing both
/// is counted under filter 1 only. Labels of respondents that survive filter 1
/// must decode; unknown raw values are an error.
pub fn filter_respondents(raw: &RawSurveyTable) -> Result<(RawSurveyTable, PreprocessReport)> {
    let m = &raw.mapping;
    let mut removed_non_developers = 0;
    let mut removed_incomplete = 0;
    let mut kept = Vec::new();
    for row in &raw.rows {
        if m.is_no(&row.values[raw.cs_col]) || m.is_no(&row.values[raw.prog_col]) {
            removed_non_developers += 1;
            continue;
        }
        let mut complete = true;
        for &c in &raw.label_cols {
            match m.decode(&row.values[c]) {
                Some(Cell::Label(_)) => {}
                Some(Cell::Missing) => complete = false,
                None => {
                    return Err(Error::UnmappableLabel {
                        column: raw.header[c].clone(),
                        value: row.values[c].clone(),
                    })
                }
            }
        }
        if complete {
            kept.push(row.clone());
        } else {
            removed_incomplete += 1;
        }
    }
    let report = PreprocessReport {
        total_in: raw.rows.len(),
        removed_non_developers,
        removed_incomplete,
        retained: kept.len(),
    };
    Ok((raw.with_rows(kept), report))
}

/// Filter respondents and build the retained respondents × statements matrix.
pub fn preprocess(raw: &RawSurveyTable) -> Result<(AnnotationMatrix, PreprocessReport)> {
    let (kept, report) = filter_respondents(raw)?;
    if report.retained < 2 {
        return Err(Error::TooFewRetained(report.retained));
    }
    let items = if raw.mapping.item_ids.is_empty() {
        raw.mapping.label_columns()?
    } else {
        raw.mapping.item_ids.clone()
    };
    let mut raters = Vec::with_capacity(kept.len());
    let mut rows = Vec::with_capacity(kept.len());
    for row in &kept.rows {
        let labels = raw
            .label_cols
            .iter()
            .map(|&c| match raw.mapping.decode(&row.values[c]) {
                Some(Cell::Label(l)) => l,
                _ => unreachable!("filter 2 retains only fully labelled rows"),
            })
            .collect();
        raters.push(row.id.clone());
        rows.push(labels);
    }
    let matrix = AnnotationMatrix::new(raters, items, sentiment_categories(), rows)?;
    Ok((matrix, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAPPING: &str = r#"
id_col = "id"
computer_scientist_col = "cs"
programming_experience_col = "prog"
label_col_template = "q{i}"
statements = 3

[encodings]
positive = ["pos"]
neutral = ["neu"]
negative = ["neg"]
missing = ["-99"]
"#;

    fn mapping() -> ColumnMapping {
        ColumnMapping::from_toml_str(MAPPING).unwrap()
    }

    fn table(body: &str) -> Result<RawSurveyTable> {
        let text = format!("id,cs,prog,q1,q2,q3,age\n{body}");
        load_raw_from(text.as_bytes(), &mapping())
    }

    #[test]
    fn empty_table() {
        let t = table("").unwrap();
        assert!(t.is_empty());
        let (_, report) = filter_respondents(&t).unwrap();
        assert_eq!(report, PreprocessReport { total_in: 0, removed_non_developers: 0, removed_incomplete: 0, retained: 0 });
    }

    #[test]
    fn missing_mapped_column() {
        let text = "id,cs,q1,q2,q3\n1,Yes,pos,neu,neg\n";
        let err = load_raw_from(text.as_bytes(), &mapping()).unwrap_err();
        assert!(err.to_string().contains("missing mapped column"), "{err}");
        assert!(err.to_string().contains("prog"));
    }

    #[test]
    fn duplicate_respondent() {
        let err = table("1,Yes,Yes,pos,neu,neg,30\n1,Yes,Yes,pos,neu,neg,31\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateRespondent(id) if id == "1"));
    }

    #[test]
    fn all_clean_is_noop() {
        let t = table("a,Yes,Yes,pos,neu,neg,30\nb,Yes,Yes,neg,neu,neg,31\n").unwrap();
        let (m, report) = preprocess(&t).unwrap();
        assert_eq!((report.removed_non_developers, report.removed_incomplete), (0, 0));
        assert_eq!(report.retained, report.total_in);
        assert_eq!(m.n_raters(), 2);
        assert_eq!(m.n_items(), 3);
        assert_eq!(m.token(1, 0), "negative");
    }

    #[test]
    fn too_few_retained() {
        let t = table("a,No,Yes,pos,neu,neg,30\nb,Yes,Yes,pos,,neg,31\nc,Yes,Yes,pos,neu,neg,32\n").unwrap();
        let err = preprocess(&t).unwrap_err();
        assert!(err.to_string().contains("fewer than 2 retained"), "{err}");
    }

    #[test]
    fn failing_both_filters_counts_once_under_first() {
        let t = table(
            "a,No,Yes,pos,,neg,30\nb,Yes,No,pos,neu,neg,31\nc,Yes,Yes,-99,neu,neg,32\nd,Yes,Yes,pos,neu,neg,33\ne,Yes,Yes,neu,neu,neu,34\n",
        )
        .unwrap();
        let (_, report) = filter_respondents(&t).unwrap();
        assert_eq!(report.removed_non_developers, 2);
        assert_eq!(report.removed_incomplete, 1);
        assert_eq!(report.retained, 2);
    }

    #[test]
    fn unmappable_label() {
        let t = table("a,Yes,Yes,pos,maybe,neg,30\nb,Yes,Yes,pos,neu,neg,31\n").unwrap();
        let err = preprocess(&t).unwrap_err();
        assert!(matches!(err, Error::UnmappableLabel { ref value, .. } if value == "maybe"));
        // a non-developer's labels are never decoded
        let t = table("a,No,Yes,pos,maybe,neg,30\nb,Yes,Yes,pos,neu,neg,31\nc,Yes,Yes,pos,neu,neg,32\n").unwrap();
        assert!(preprocess(&t).is_ok());
    }

    #[test]
    fn mapping_validation() {
        let dup = MAPPING.replace(r#"neutral = ["neu"]"#, r#"neutral = ["pos"]"#);
        assert!(ColumnMapping::from_toml_str(&dup).is_err());
        let wrong_count = MAPPING.replace("statements = 3", "statements = 3\nlabel_cols = [\"q1\"]");
        assert!(ColumnMapping::from_toml_str(&wrong_count).is_err());
        let explicit = MAPPING
            .replace("label_col_template = \"q{i}\"", "label_cols = [\"q1\", \"q2\", \"q3\"]");
        assert_eq!(ColumnMapping::from_toml_str(&explicit).unwrap().label_columns().unwrap().len(), 3);
    }

    #[test]
    fn semicolon_delimiter() {
        let mut m = mapping();
        m.delimiter = ';';
        let text = "id;cs;prog;q1;q2;q3\na;Yes;Yes;pos;neu;neg\nb;Yes;Yes;pos;pos;neg\n";
        let t = load_raw_from(text.as_bytes(), &m).unwrap();
        assert_eq!(preprocess(&t).unwrap().1.retained, 2);
    }
}

//! Comma-separated output files and the readers the CLI needs to chain
//! subcommands. Real values are written in fixed notation with 6 decimals.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::corpus::PreprocessReport;
use crate::dispersion::{cv_percent, IntervalEstimate, Level, VariationRow, VariationTable};
use crate::error::{Error, Result};
use crate::mc::{RunSet, SubsetRow, SubsetStats};
use crate::minfit::MinPoints;
use crate::stats::Summary;

pub const UNDEFINED: &str = "undefined";

/// Fixed 6-decimal notation; negative zero prints as zero.
pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn flush<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<output>", e))
}

/// `run_id,n,kappa`, run-major.
pub fn write_runs<W: Write>(runs: &RunSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run_id", "n", "kappa"])?;
    for run in &runs.runs {
        for (i, kappa) in run.kappas.iter().enumerate() {
            w.write_record([run.run_id.to_string(), (i + 2).to_string(), fmt6(*kappa)])?;
        }
    }
    flush(w)
}

/// `n,min,q1,median,q3,max,mean,std`.
pub fn write_stats<W: Write>(stats: &SubsetStats, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "min", "q1", "median", "q3", "max", "mean", "std"])?;
    for row in &stats.rows {
        let s = row.summary;
        let mut rec = vec![row.n.to_string()];
        rec.extend([s.min, s.q1, s.median, s.q3, s.max, s.mean, s.std].map(fmt6));
        w.write_record(rec)?;
    }
    flush(w)
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    rec.get(i)
        .ok_or_else(|| Error::MalformedRow {
            line,
            reason: format!("missing field `{what}`"),
        })?
        .trim()
        .parse()
        .map_err(|_| Error::MalformedRow {
            line,
            reason: format!("cannot parse `{what}` from `{}`", &rec[i]),
        })
}

fn expect_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    if header.len() != expected.len() || header.iter().zip(expected).any(|(h, e)| h.trim() != *e) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

pub fn read_stats<R: Read>(input: R) -> Result<SubsetStats> {
    let mut rdr = csv::Reader::from_reader(input);
    expect_header(&mut rdr, &["n", "min", "q1", "median", "q3", "max", "mean", "std"])?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v = |i: usize, what: &str| parse_field::<f64>(&rec, i, what);
        rows.push(SubsetRow {
            n: parse_field(&rec, 0, "n")?,
            summary: Summary {
                min: v(1, "min")?,
                q1: v(2, "q1")?,
                median: v(3, "median")?,
                q3: v(4, "q3")?,
                max: v(5, "max")?,
                mean: v(6, "mean")?,
                std: v(7, "std")?,
            },
        });
    }
    let k = rows.iter().map(|r| r.n).max().ok_or(Error::Empty("stats file has no rows"))?;
    Ok(SubsetStats { k, rows })
}

/// Rebuild per-n summaries from a runs file.
pub fn read_runs_as_stats<R: Read>(input: R) -> Result<SubsetStats> {
    let mut rdr = csv::Reader::from_reader(input);
    expect_header(&mut rdr, &["run_id", "n", "kappa"])?;
    let mut columns: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let _run: usize = parse_field(&rec, 0, "run_id")?;
        let n: usize = parse_field(&rec, 1, "n")?;
        columns.entry(n).or_default().push(parse_field(&rec, 2, "kappa")?);
    }
    let k = *columns.keys().last().ok_or(Error::Empty("runs file has no rows"))?;
    let rows = columns
        .into_iter()
        .map(|(n, v)| SubsetRow {
            n,
            summary: Summary::of(&v).expect("non-empty column"),
        })
        .collect();
    Ok(SubsetStats { k, rows })
}

/// `n,min_kappa`.
pub fn write_minima<W: Write>(points: &MinPoints, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "min_kappa"])?;
    for &(n, y) in points.points() {
        w.write_record([n.to_string(), fmt6(y)])?;
    }
    flush(w)
}

/// `n,mu_bar,sigma_bar,cv,cv_percent`; undefined cv rows carry `undefined`.
pub fn write_variation<W: Write>(table: &VariationTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "mu_bar", "sigma_bar", "cv", "cv_percent"])?;
    for row in &table.rows {
        let (cv, pct) = match row.cv {
            Some(cv) => (fmt6(cv), format!("{:.2}", cv_percent(cv))),
            None => (UNDEFINED.to_string(), UNDEFINED.to_string()),
        };
        w.write_record([row.n.to_string(), fmt6(row.mu_bar), fmt6(row.sigma_bar), cv, pct])?;
    }
    flush(w)
}

pub fn read_variation<R: Read>(input: R) -> Result<Vec<VariationRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    expect_header(&mut rdr, &["n", "mu_bar", "sigma_bar", "cv", "cv_percent"])?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let cv = if rec.get(3).map(str::trim) == Some(UNDEFINED) {
            None
        } else {
            Some(parse_field(&rec, 3, "cv")?)
        };
        rows.push(VariationRow {
            n: parse_field(&rec, 0, "n")?,
            mu_bar: parse_field(&rec, 1, "mu_bar")?,
            sigma_bar: parse_field(&rec, 2, "sigma_bar")?,
            cv,
        });
    }
    Ok(rows)
}

/// One interval row; `estimate` is `None` where cv is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalRow {
    pub n: usize,
    pub level: Level,
    pub estimate: Option<IntervalEstimate>,
}

/// Interval estimates for z = 1, 2, 3 at every row of a variation table.
pub fn interval_rows(rows: &[VariationRow], kappa_hat: f64) -> Result<Vec<IntervalRow>> {
    let mut out = Vec::with_capacity(rows.len() * 3);
    for row in rows {
        for z in 1..=3 {
            let level = Level::from_z(z)?;
            let estimate = row
                .cv
                .map(|cv| crate::dispersion::interval_estimate(kappa_hat, cv, z))
                .transpose()?;
            out.push(IntervalRow {
                n: row.n,
                level,
                estimate,
            });
        }
    }
    Ok(out)
}

/// `n,level,lower,upper`.
pub fn write_intervals<W: Write>(rows: &[IntervalRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "level", "lower", "upper"])?;
    for row in rows {
        let (lo, hi) = match row.estimate {
            Some(e) => (fmt6(e.lower), fmt6(e.upper)),
            None => (UNDEFINED.to_string(), UNDEFINED.to_string()),
        };
        w.write_record([row.n.to_string(), row.level.label().to_string(), lo, hi])?;
    }
    flush(w)
}

/// `total_in,removed_non_developers,removed_incomplete,retained`.
pub fn write_preprocess_report<W: Write>(report: &PreprocessReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["total_in", "removed_non_developers", "removed_incomplete", "retained"])?;
    w.write_record([
        report.total_in,
        report.removed_non_developers,
        report.removed_incomplete,
        report.retained,
    ]
    .map(|c| c.to_string()))?;
    flush(w)
}

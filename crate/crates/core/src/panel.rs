//! Validated return panels and their CSV representation.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Months, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x p` matrix of per-period log-returns: rows are time, columns are assets.
///
/// Immutable once validated; every entry is finite, asset ids are unique and
/// time ids strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    values: DMatrix<f64>,
    asset_ids: Vec<String>,
    time_ids: Vec<NaiveDate>,
}

impl ReturnPanel {
    /// Validates a raw matrix and its labels.
    pub fn new(values: DMatrix<f64>, asset_ids: Vec<String>, time_ids: Vec<NaiveDate>) -> Result<Self> {
        let (n, p) = values.shape();
        if asset_ids.len() != p {
            return Err(Error::Shape(format!("{} asset ids for {} columns", asset_ids.len(), p)));
        }
        if time_ids.len() != n {
            return Err(Error::Shape(format!("{} time ids for {} rows", time_ids.len(), n)));
        }
        if p == 0 {
            return Err(Error::Shape("panel has no assets".into()));
        }
        if n < 2 {
            return Err(Error::TooShort { needed: 2, got: n });
        }
        for col in 0..p {
            for row in 0..n {
                if !values[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        let mut seen = HashSet::with_capacity(p);
        for id in &asset_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateAsset(id.clone()));
            }
        }
        for (i, pair) in time_ids.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::UnorderedTime(i + 1));
            }
        }
        Ok(Self { values, asset_ids, time_ids })
    }

    /// Builds a panel from row-major nested rows.
    pub fn from_rows(rows: &[Vec<f64>], asset_ids: Vec<String>, time_ids: Vec<NaiveDate>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Shape("rows have different lengths".into()));
        }
        let values = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Self::new(values, asset_ids, time_ids)
    }

    /// Panel with generated labels `A1..Ap` and monthly dates from 2000-01-01.
    pub fn with_default_labels(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        Self::new(values, default_asset_ids(p), monthly_dates(n))
    }

    /// Same labels, new values. Used by resamplers whose rows are copies or
    /// model-driven recursions of an already validated panel.
    pub(crate) fn with_values(&self, values: DMatrix<f64>) -> Self {
        debug_assert_eq!(values.shape(), self.values.shape());
        Self { values, asset_ids: self.asset_ids.clone(), time_ids: self.time_ids.clone() }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn time_ids(&self) -> &[NaiveDate] {
        &self.time_ids
    }

    pub fn row(&self, t: usize) -> DVector<f64> {
        self.values.row(t).transpose()
    }

    pub fn last_row(&self) -> DVector<f64> {
        self.row(self.n() - 1)
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.column(i).iter().copied().collect()
    }

    /// Rows `start..end`.
    pub fn rows(&self, start: usize, end: usize) -> Result<Self> {
        if end > self.n() || start >= end {
            return Err(Error::InvalidArgument(format!("row range {start}..{end} out of 0..{}", self.n())));
        }
        if end - start < 2 {
            return Err(Error::TooShort { needed: 2, got: end - start });
        }
        Ok(Self {
            values: self.values.rows(start, end - start).into_owned(),
            asset_ids: self.asset_ids.clone(),
            time_ids: self.time_ids[start..end].to_vec(),
        })
    }

    /// Columns picked by index, in the given order.
    pub fn select_assets(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.p()) {
            return Err(Error::InvalidArgument(format!("asset index {bad} out of range")));
        }
        let values = DMatrix::from_fn(self.n(), idx.len(), |t, j| self.values[(t, idx[j])]);
        let ids = idx.iter().map(|&i| self.asset_ids[i].clone()).collect();
        Self::new(values, ids, self.time_ids.clone())
    }

    pub fn asset_index(&self, id: &str) -> Option<usize> {
        self.asset_ids.iter().position(|a| a == id)
    }

    /// `(1/n) sum_t r_t`.
    pub fn sample_mean(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(self.p(), self.values.column_iter().map(|c| c.sum() / n))
    }

    /// `(1/n) sum_t r_t r_t^T`.
    pub fn sample_second_moment(&self) -> DMatrix<f64> {
        let m = self.values.transpose() * &self.values / self.n() as f64;
        symmetrize(m)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (ids, dates, rows) = read_labeled_csv(reader)?;
        Self::from_rows(&rows, ids, dates)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::read_csv(f)
    }

    /// Header `date,<asset1>,...`; values use the shortest representation
    /// that round-trips exactly.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_labeled_csv(writer, &self.asset_ids, &self.time_ids, &self.values)
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

pub fn default_asset_ids(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("A{i}")).collect()
}

pub fn monthly_dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    (0..n).map(|i| start + Months::new(i as u32)).collect()
}

/// Parses a `date,<id>...` table without any validation beyond parsing.
/// Empty and `NA` cells become NaN.
pub fn read_labeled_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<NaiveDate>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || !headers[0].eq_ignore_ascii_case("date") {
        return Err(Error::Csv("header must be `date,<asset1>,...`".into()));
    }
    let ids: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
            .map_err(|e| Error::Csv(format!("row {}: bad date `{}`: {e}", line + 1, &rec[0])))?;
        let row = rec
            .iter()
            .skip(1)
            .map(|s| {
                if s.is_empty() || s.eq_ignore_ascii_case("na") {
                    return Ok(f64::NAN);
                }
                s.parse::<f64>()
                    .map_err(|e| Error::Csv(format!("row {}: bad number `{s}`: {e}", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != ids.len() {
            return Err(Error::Csv(format!("row {} has {} values, expected {}", line + 1, row.len(), ids.len())));
        }
        dates.push(date);
        rows.push(row);
    }
    Ok((ids, dates, rows))
}

pub fn write_labeled_csv<W: Write>(
    writer: W,
    ids: &[String],
    dates: &[NaiveDate],
    values: &DMatrix<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(ids.iter().cloned());
    w.write_record(&header)?;
    for (t, d) in dates.iter().enumerate() {
        let mut rec = vec![d.format("%Y-%m-%d").to_string()];
        rec.extend(values.row(t).iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

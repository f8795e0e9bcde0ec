//! Raw series, lag embedding and ingestion of price data.
//!
//! A [`Series`] is an ordered list of finite observations `Y_1, …, Y_n`.
//! [`embed`] turns it into supervised pairs `(X_t, Y_t)` with
//! `X_t = (Y_{t-1}, …, Y_{t-p})`, most recent lag first. The first usable
//! time index is `t = p + 1`; earlier observations only serve as history.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    values: Vec<f64>,
    label: Option<String>,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Series {
            values,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Chronological split: the first `n_head` values and the rest.
    pub fn split_at(&self, n_head: usize) -> Result<(Series, Series)> {
        if n_head == 0 || n_head >= self.len() {
            return Err(Error::param(format!(
                "split point {n_head} must lie strictly inside a series of length {}",
                self.len()
            )));
        }
        let (a, b) = self.values.split_at(n_head);
        Ok((Series::new(a.to_vec())?, Series::new(b.to_vec())?))
    }
}

/// Lag-embedded supervised pairs.
///
/// Covariates are stored row-major, `p` values per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagDataset {
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    t_index: Vec<usize>,
}

impl LagDataset {
    /// Builds a dataset from explicit rows. `t_index` must be strictly increasing.
    pub fn from_rows(
        p: usize,
        rows: Vec<Vec<f64>>,
        y: Vec<f64>,
        t_index: Vec<usize>,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::param("lag order p must be positive"));
        }
        if rows.len() != y.len() {
            return Err(Error::LengthMismatch(rows.len(), y.len()));
        }
        if t_index.len() != y.len() {
            return Err(Error::LengthMismatch(t_index.len(), y.len()));
        }
        if t_index.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("t_index must be strictly increasing"));
        }
        let mut x = Vec::with_capacity(rows.len() * p);
        for row in &rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: row.len(),
                });
            }
            x.extend_from_slice(row);
        }
        if let Some(pos) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(LagDataset { p, x, y, t_index })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    /// Original (1-based) time index of pair `i`.
    pub fn t(&self, i: usize) -> usize {
        self.t_index[i]
    }

    pub fn t_index(&self) -> &[usize] {
        &self.t_index
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.x.chunks_exact(self.p)
    }

    /// Pairs `range` as a new dataset, keeping their original time indices.
    pub fn slice(&self, range: std::ops::Range<usize>) -> LagDataset {
        LagDataset {
            p: self.p,
            x: self.x[range.start * self.p..range.end * self.p].to_vec(),
            y: self.y[range.clone()].to_vec(),
            t_index: self.t_index[range].to_vec(),
        }
    }

    /// Same covariates, responses replaced.
    pub fn with_responses(&self, y: Vec<f64>) -> Result<LagDataset> {
        if y.len() != self.len() {
            return Err(Error::LengthMismatch(y.len(), self.len()));
        }
        Ok(LagDataset { y, ..self.clone() })
    }

    /// Per-dimension `(min, max)` over all covariate rows.
    pub fn covariate_range(&self) -> Vec<(f64, f64)> {
        let mut range = vec![(f64::INFINITY, f64::NEG_INFINITY); self.p];
        for row in self.rows() {
            for (r, &v) in range.iter_mut().zip(row) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        range
    }
}

/// Lag-embeds `series` with order `p`, producing `len - p` pairs.
pub fn embed(series: &Series, p: usize) -> Result<LagDataset> {
    if p == 0 {
        return Err(Error::param("lag order p must be positive"));
    }
    let values = series.values();
    if values.len() <= p {
        return Err(Error::InsufficientHistory {
            p,
            len: values.len(),
        });
    }
    let n = values.len() - p;
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    let mut t_index = Vec::with_capacity(n);
    // zero-based position `pos` is time t = pos + 1
    for pos in p..values.len() {
        x.extend((1..=p).map(|j| values[pos - j]));
        y.push(values[pos]);
        t_index.push(pos + 1);
    }
    Ok(LagDataset { p, x, y, t_index })
}

/// `r_t = ln p_t - ln p_{t-1}`.
pub fn log_returns(prices: &Series) -> Result<Series> {
    let values = prices.values();
    if values.len() < 2 {
        return Err(Error::param("log returns need at least two prices"));
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositivePrice { index, value });
    }
    let returns = values.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
    let mut out = Series::new(returns)?;
    out.label = prices.label.clone();
    Ok(out)
}

/// Reads one column of a headed CSV file.
///
/// With `drop_missing`, rows whose cell is empty or unparseable are skipped
/// in place; otherwise the first such row is an error.
pub fn load_series_csv(path: impl AsRef<Path>, column: &str, drop_missing: bool) -> Result<Series> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: column.to_string(),
        })?;

    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = record.get(col).unwrap_or("");
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ if drop_missing => {}
            _ => {
                return Err(Error::BadValue {
                    path: path.to_path_buf(),
                    row: row + 1,
                    value: cell.to_string(),
                })
            }
        }
    }
    Ok(Series::new(values)?.with_label(column))
}

use std::collections::HashSet;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 6] = ["Date", "Open", "High", "Low", "Close", "Volume"];
pub const PRICE_COLUMNS: [&str; 5] = ["open", "high", "low", "close", "volume"];
pub const CLOSE: usize = 3;

/// Daily rows in ascending date order; each cell may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvSeries {
    pub dates: Vec<NaiveDate>,
    /// Columns in [`PRICE_COLUMNS`] order.
    pub columns: [Vec<Option<f64>>; 5],
}

impl OhlcvSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn close(&self) -> &[Option<f64>] {
        &self.columns[CLOSE]
    }

    pub fn missing_counts(&self) -> [usize; 5] {
        std::array::from_fn(|c| self.columns[c].iter().filter(|v| v.is_none()).count())
    }

    /// Builds a complete series from dense columns, mainly for synthetic data.
    pub fn from_complete(dates: Vec<NaiveDate>, columns: [Vec<f64>; 5]) -> Result<Self> {
        let columns = columns.map(|c| c.into_iter().map(Some).collect::<Vec<_>>());
        let s = OhlcvSeries { dates, columns };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.columns.iter().any(|c| c.len() != self.dates.len()) {
            return Err(Error::InvalidArgument("ragged OHLCV columns".into()));
        }
        if self.dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("dates must be strictly increasing".into()));
        }
        if self.close().iter().all(Option::is_none) {
            return Err(Error::EmptyColumn("close".into()));
        }
        Ok(())
    }

    /// Writes the series in the `Date,Open,High,Low,Close,Volume` format.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for (r, date) in self.dates.iter().enumerate() {
            out.push_str(&date.format("%Y-%m-%d").to_string());
            for col in &self.columns {
                out.push(',');
                if let Some(v) = col[r] {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_ohlcv(path: impl AsRef<Path>) -> Result<OhlcvSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ohlcv(file, path)
}

/// Parses CSV text. `origin` is only used in error messages.
pub fn read_ohlcv<R: Read>(reader: R, origin: &Path) -> Result<OhlcvSeries> {
    let origin = PathBuf::from(origin);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let csv_err = |line: usize, e: csv::Error| Error::Csv {
        path: origin.clone(),
        line,
        detail: e.to_string(),
    };

    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_err(1, e))?,
        None => {
            return Err(Error::Header {
                path: origin,
                expected: CSV_HEADER.join(","),
                found: String::new(),
            })
        }
    };
    let found: Vec<&str> = header.iter().collect();
    if found != CSV_HEADER {
        return Err(Error::Header {
            path: origin,
            expected: CSV_HEADER.join(","),
            found: found.join(","),
        });
    }

    let mut rows: Vec<(NaiveDate, [Option<f64>; 5])> = Vec::new();
    let mut seen = HashSet::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            csv_err(line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Csv {
                path: origin,
                line,
                detail: format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()),
            });
        }
        let date_str = &rec[0];
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|_| Error::ParseValue {
            path: origin.clone(),
            line,
            column: "Date".into(),
            value: date_str.to_string(),
        })?;
        if !seen.insert(date) {
            return Err(Error::DuplicateDate {
                path: origin,
                line,
                date: date_str.to_string(),
            });
        }
        let mut values = [None; 5];
        for (c, slot) in values.iter_mut().enumerate() {
            let cell = &rec[c + 1];
            if cell.is_empty() {
                continue;
            }
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::ParseValue {
                    path: origin.clone(),
                    line,
                    column: CSV_HEADER[c + 1].into(),
                    value: cell.to_string(),
                })?;
            *slot = Some(v);
        }
        rows.push((date, values));
    }
    rows.sort_by_key(|(d, _)| *d);

    let series = OhlcvSeries {
        dates: rows.iter().map(|(d, _)| *d).collect(),
        columns: std::array::from_fn(|c| rows.iter().map(|(_, v)| v[c]).collect()),
    };
    series.validate()?;
    Ok(series)
}

fn observed(col: &[Option<f64>]) -> Vec<f64> {
    col.iter().flatten().copied().collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Replaces every cell farther than three sample standard deviations from its
/// column mean with a missing marker. Rows are never removed.
pub fn clean_three_sigma(series: &OhlcvSeries) -> Result<OhlcvSeries> {
    let mut out = series.clone();
    for (c, col) in out.columns.iter_mut().enumerate() {
        let values = observed(col);
        if values.len() < 2 {
            return Err(if values.is_empty() {
                Error::EmptyColumn(PRICE_COLUMNS[c].into())
            } else {
                Error::TooShort {
                    what: format!("three-sigma statistics of `{}`", PRICE_COLUMNS[c]),
                    length: values.len(),
                    required: 2,
                }
            });
        }
        let mu = mean(&values);
        let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (values.len() - 1) as f64;
        let limit = 3.0 * var.sqrt();
        for cell in col.iter_mut() {
            if matches!(cell, Some(v) if (*v - mu).abs() > limit) {
                *cell = None;
            }
        }
    }
    Ok(out)
}

/// Fills missing cells with the mean of the observed cells in the same column.
pub fn impute_mean(series: &OhlcvSeries) -> Result<OhlcvSeries> {
    let mut out = series.clone();
    for (c, col) in out.columns.iter_mut().enumerate() {
        let values = observed(col);
        if values.is_empty() {
            return Err(Error::EmptyColumn(PRICE_COLUMNS[c].into()));
        }
        let mu = mean(&values);
        for cell in col.iter_mut() {
            cell.get_or_insert(mu);
        }
    }
    Ok(out)
}

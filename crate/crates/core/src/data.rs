//! CSV ingestion and per-column transforms for monthly macro panels.
//!
//! Input files carry a header row, a date column (`YYYY-MM` or
//! `YYYY-MM-DD`), and numeric columns. Columns are transformed
//! independently, rows lost to differencing are dropped, and the panel is
//! restricted to the configured sample window. Any missing value surviving
//! those steps is an error.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::DatasetConfig;
use crate::error::{Error, Result};

/// Calendar month, the panel's time index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::data(format!("month {month} out of range")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            YearMonth {
                year: self.year + 1,
                month: 1,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month + 1,
            }
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    /// Accepts `YYYY-MM` and `YYYY-MM-DD` (the day is ignored).
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split('-');
        let year = parts
            .next()
            .and_then(|p| p.parse::<i32>().ok())
            .ok_or_else(|| Error::data(format!("unparseable date '{s}'")))?;
        let month = parts
            .next()
            .and_then(|p| p.parse::<u8>().ok())
            .ok_or_else(|| Error::data(format!("unparseable date '{s}'")))?;
        YearMonth::new(year, month)
    }
}

impl TryFrom<String> for YearMonth {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<YearMonth> for String {
    fn from(ym: YearMonth) -> String {
        ym.to_string()
    }
}

/// Per-column transform applied at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// Identity passthrough.
    Level,
    /// Monthly percent growth, `100 * (ln x_t - ln x_{t-1})`.
    LogDiffPct,
    /// First difference.
    Diff,
}

impl Transform {
    /// Leading rows consumed by the transform.
    pub fn rows_lost(self) -> usize {
        match self {
            Transform::Level => 0,
            Transform::LogDiffPct | Transform::Diff => 1,
        }
    }
}

/// Aligned numeric panel with its time index.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub columns: Vec<String>,
    pub dates: Vec<YearMonth>,
    /// `T x N`, column order matching `columns`.
    pub values: Array2<f64>,
}

impl Panel {
    pub fn n_periods(&self) -> usize {
        self.values.nrows()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::data(format!("panel has no column '{name}'")))
    }
}

/// Load the CSV named by `cfg`, apply the configured transforms, and return
/// the aligned panel over the requested sample window.
pub fn load_and_transform(cfg: &DatasetConfig) -> Result<Panel> {
    let raw = read_csv(Path::new(&cfg.csv_path), &cfg.date_column, &cfg.variable_order)?;
    transform_panel(cfg, raw)
}

struct RawPanel {
    dates: Vec<YearMonth>,
    /// Column-major raw cells; `None` marks a missing value.
    cells: Vec<Vec<Option<f64>>>,
}

fn read_csv(path: &Path, date_column: &str, columns: &[String]) -> Result<RawPanel> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::data(format!("cannot read header row: {e}")))?
        .clone();
    let header_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("missing column '{name}' in {}", path.display())))
    };
    let date_idx = header_index(date_column)?;
    let col_idx: Vec<usize> = columns
        .iter()
        .map(|c| header_index(c))
        .collect::<Result<_>>()?;

    let mut dates = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); columns.len()];
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::data(format!("row {}: {e}", row_no + 2)))?;
        let date_str = record.get(date_idx).unwrap_or("");
        let date: YearMonth = date_str
            .parse()
            .map_err(|_| Error::data(format!("row {}: unparseable date '{date_str}'", row_no + 2)))?;
        dates.push(date);
        for (c, &idx) in col_idx.iter().enumerate() {
            let cell = record.get(idx).unwrap_or("").trim();
            let value = if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| {
                    Error::data(format!(
                        "row {}, column '{}': unparseable number '{cell}'",
                        row_no + 2,
                        columns[c]
                    ))
                })?)
            };
            cells[c].push(value);
        }
    }
    if dates.is_empty() {
        return Err(Error::data(format!("{} contains no data rows", path.display())));
    }
    Ok(RawPanel { dates, cells })
}

fn transform_panel(cfg: &DatasetConfig, raw: RawPanel) -> Result<Panel> {
    let columns = cfg.variable_order.clone();
    let transforms: Vec<Transform> = columns
        .iter()
        .map(|c| {
            cfg.transforms.get(c).copied().ok_or_else(|| {
                Error::config(format!("no transform configured for column '{c}'"))
            })
        })
        .collect::<Result<_>>()?;

    let lost = transforms
        .iter()
        .map(|t| t.rows_lost())
        .max()
        .unwrap_or(0);
    let t_raw = raw.dates.len();
    if t_raw <= lost {
        return Err(Error::data("panel has no rows left after differencing"));
    }

    let mut transformed: Vec<Vec<Option<f64>>> = Vec::with_capacity(columns.len());
    for (c, transform) in transforms.iter().enumerate() {
        let column = &raw.cells[c];
        let mut out = Vec::with_capacity(t_raw - lost);
        for t in lost..t_raw {
            let value = match transform {
                Transform::Level => column[t],
                Transform::Diff => match (column[t], column[t - 1]) {
                    (Some(a), Some(b)) => Some(a - b),
                    _ => None,
                },
                Transform::LogDiffPct => match (column[t], column[t - 1]) {
                    (Some(a), Some(b)) => {
                        if a <= 0.0 || b <= 0.0 {
                            return Err(Error::data(format!(
                                "column '{}': log transform needs positive values, got {a} at {}",
                                columns[c], raw.dates[t]
                            )));
                        }
                        Some(100.0 * (a.ln() - b.ln()))
                    }
                    _ => None,
                },
            };
            out.push(value);
        }
        transformed.push(out);
    }
    let dates: Vec<YearMonth> = raw.dates[lost..].to_vec();

    // Sample window.
    let start = cfg.sample_start.unwrap_or(dates[0]);
    let end = cfg.sample_end.unwrap_or(*dates.last().unwrap());
    let keep: Vec<usize> = (0..dates.len())
        .filter(|&t| dates[t] >= start && dates[t] <= end)
        .collect();
    if keep.is_empty() {
        return Err(Error::data(format!(
            "sample window {start}..{end} is outside the file range {}..{}",
            dates[0],
            dates.last().unwrap()
        )));
    }

    let mut values = Array2::<f64>::zeros((keep.len(), columns.len()));
    for (r, &t) in keep.iter().enumerate() {
        for c in 0..columns.len() {
            match transformed[c][t] {
                Some(v) if v.is_finite() => values[[r, c]] = v,
                _ => {
                    return Err(Error::data(format!(
                        "missing value in column '{}' at {}",
                        columns[c], dates[t]
                    )))
                }
            }
        }
    }
    Ok(Panel {
        columns,
        dates: keep.iter().map(|&t| dates[t]).collect(),
        values,
    })
}

/// Write a panel to CSV in the same schema `load_and_transform` reads.
pub fn write_panel_csv(panel: &Panel, date_column: &str, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))?;
    let mut header = vec![date_column.to_string()];
    header.extend(panel.columns.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| Error::data(e.to_string()))?;
    for t in 0..panel.n_periods() {
        let mut record = vec![panel.dates[t].to_string()];
        for c in 0..panel.columns.len() {
            record.push(format!("{:.10}", panel.values[[t, c]]));
        }
        writer
            .write_record(&record)
            .map_err(|e| Error::data(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Monthly date index of length `n` starting at `start`.
pub fn month_range(start: YearMonth, n: usize) -> Vec<YearMonth> {
    let mut out = Vec::with_capacity(n);
    let mut current = start;
    for _ in 0..n {
        out.push(current);
        current = current.next();
    }
    out
}

pub fn default_transform_map(columns: &[String]) -> BTreeMap<String, Transform> {
    columns
        .iter()
        .map(|c| (c.clone(), Transform::Level))
        .collect()
}

//! Date-indexed series, aligned panels and the preprocessing shared by every
//! analysis: negative-price filtering, log transforms, normality testing,
//! rolling windows and correlation matrices.
//!
//! Series are evenly spaced in observation index. Calendar gaps (weekends,
//! holidays) are not resampled; a rolling window of 75 means 75 observations.

mod ingest;
mod rolling;
mod stats;

pub use ingest::{load_csv, read_csv, ColumnSchema};
pub use rolling::{rolling_apply, RollingGap, RollingSeries, RollingWindowSpec};
pub use stats::{
    jarque_bera, mean, pearson, pearson_correlation_matrix, std_dev, variance, CorrelationMatrix,
    JarqueBera,
};

use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("input file not found: {0}")]
    MissingFile(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("duplicate date {date} at line {line}")]
    DuplicateDate { date: NaiveDate, line: usize },
    #[error("column {0:?} not present in header")]
    MissingColumn(String),
    #[error("series {0:?}: dates must be strictly increasing")]
    UnorderedDates(String),
    #[error("series {0:?}: non-finite value")]
    NonFinite(String),
    #[error("series {0:?}: every value is non-positive")]
    AllDropped(String),
    #[error("series {id:?}: non-positive value {value} on {date}")]
    NonPositiveValue {
        id: String,
        date: NaiveDate,
        value: f64,
    },
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("window of {window} exceeds series length {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error("invalid window specification: {0}")]
    InvalidWindow(String),
    #[error("series {0:?} has zero variance")]
    ZeroVariance(String),
    #[error("sequences must share one length")]
    LengthMismatch,
    #[error("expected transform {expected}, found {found}")]
    WrongTransform {
        expected: Transform,
        found: Transform,
    },
    #[error("panel has no series")]
    EmptyPanel,
    #[error("series {0:?} not found in panel")]
    UnknownSeries(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, SeriesError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Raw,
    Log,
    LogReturn,
    SignedLogReturn,
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Transform::Raw => "raw",
            Transform::Log => "log",
            Transform::LogReturn => "log_return",
            Transform::SignedLogReturn => "signed_log_return",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Transform::Raw),
            "log" => Ok(Transform::Log),
            "log_return" => Ok(Transform::LogReturn),
            "signed_log_return" => Ok(Transform::SignedLogReturn),
            other => Err(format!("unknown transform {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub date: NaiveDate,
    pub value: f64,
}

/// An ordered, strictly date-increasing sequence of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    id: String,
    points: Vec<TimePoint>,
    transform: Transform,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, points: Vec<TimePoint>) -> Result<Self> {
        Self::with_transform(id, points, Transform::Raw)
    }

    pub fn with_transform(
        id: impl Into<String>,
        points: Vec<TimePoint>,
        transform: Transform,
    ) -> Result<Self> {
        let id = id.into();
        if points.windows(2).any(|w| w[0].date >= w[1].date) {
            return Err(SeriesError::UnorderedDates(id));
        }
        if points.iter().any(|p| !p.value.is_finite()) {
            return Err(SeriesError::NonFinite(id));
        }
        Ok(Self {
            id,
            points,
            transform,
        })
    }

    /// Builds a series on consecutive days starting at `start`. Handy for
    /// synthetic data where only the observation index matters.
    pub fn from_values(id: impl Into<String>, start: NaiveDate, values: &[f64]) -> Result<Self> {
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &value)| TimePoint {
                date: start + chrono::Duration::days(i as i64),
                value,
            })
            .collect();
        Self::new(id, points)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[TimePoint] {
        &self.points
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.points.iter().map(|p| p.date).collect()
    }

    pub fn rename(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Keeps the points whose date lies in `[from, to]`.
    pub fn slice_dates(&self, from: NaiveDate, to: NaiveDate) -> TimeSeries {
        TimeSeries {
            id: self.id.clone(),
            points: self
                .points
                .iter()
                .filter(|p| p.date >= from && p.date <= to)
                .copied()
                .collect(),
            transform: self.transform,
        }
    }
}

/// Result of [`drop_negative_prices`]: the filtered series and how many
/// points were removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub series: TimeSeries,
    pub dropped: usize,
}

/// Removes every point with value ≤ 0. Log returns are undefined across
/// non-positive prices, so those dates are ignored rather than imputed.
pub fn drop_negative_prices(s: &TimeSeries) -> Result<Filtered> {
    if s.transform != Transform::Raw {
        return Err(SeriesError::WrongTransform {
            expected: Transform::Raw,
            found: s.transform,
        });
    }
    let points: Vec<TimePoint> = s.points.iter().filter(|p| p.value > 0.0).copied().collect();
    if points.is_empty() {
        return Err(SeriesError::AllDropped(s.id.clone()));
    }
    let dropped = s.len() - points.len();
    Ok(Filtered {
        series: TimeSeries {
            id: s.id.clone(),
            points,
            transform: Transform::Raw,
        },
        dropped,
    })
}

fn check_positive(s: &TimeSeries) -> Result<()> {
    match s.points.iter().find(|p| p.value <= 0.0) {
        Some(p) => Err(SeriesError::NonPositiveValue {
            id: s.id.clone(),
            date: p.date,
            value: p.value,
        }),
        None => Ok(()),
    }
}

pub fn log_prices(s: &TimeSeries) -> Result<TimeSeries> {
    check_positive(s)?;
    let points = s
        .points
        .iter()
        .map(|p| TimePoint {
            date: p.date,
            value: p.value.ln(),
        })
        .collect();
    TimeSeries::with_transform(s.id.clone(), points, Transform::Log)
}

/// `r_i = ln v_i − ln v_{i−1}`, stamped at date `i`.
pub fn log_returns(s: &TimeSeries) -> Result<TimeSeries> {
    if s.len() < 2 {
        return Err(SeriesError::TooShort {
            needed: 2,
            got: s.len(),
        });
    }
    check_positive(s)?;
    let points = s
        .points
        .windows(2)
        .map(|w| TimePoint {
            date: w[1].date,
            value: w[1].value.ln() - w[0].value.ln(),
        })
        .collect();
    TimeSeries::with_transform(s.id.clone(), points, Transform::LogReturn)
}

/// Applies `t` to a raw series. `SignedLogReturn` is an ordinary log return
/// carrying its own tag.
pub fn apply_transform(s: &TimeSeries, t: Transform) -> Result<TimeSeries> {
    match t {
        Transform::Raw => Ok(s.clone()),
        Transform::Log => log_prices(s),
        Transform::LogReturn => log_returns(s),
        Transform::SignedLogReturn => {
            let mut r = log_returns(s)?;
            r.transform = Transform::SignedLogReturn;
            Ok(r)
        }
    }
}

/// Series sharing a single date axis. Construction inner-joins the inputs,
/// so every member has a value at every axis date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    dates: Vec<NaiveDate>,
    series: Vec<TimeSeries>,
}

impl Panel {
    pub fn new(series: Vec<TimeSeries>) -> Result<Self> {
        if series.is_empty() {
            return Err(SeriesError::EmptyPanel);
        }
        let mut common: BTreeSet<NaiveDate> = series[0].points.iter().map(|p| p.date).collect();
        for s in &series[1..] {
            let dates: BTreeSet<NaiveDate> = s.points.iter().map(|p| p.date).collect();
            common = common.intersection(&dates).copied().collect();
        }
        let series = series
            .into_iter()
            .map(|s| TimeSeries {
                points: s
                    .points
                    .into_iter()
                    .filter(|p| common.contains(&p.date))
                    .collect(),
                ..s
            })
            .collect();
        Ok(Self {
            dates: common.into_iter().collect(),
            series,
        })
    }

    /// Builds a panel from equal-length value columns on consecutive days.
    pub fn from_columns(start: NaiveDate, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let len = columns.first().map(|c| c.1.len()).unwrap_or(0);
        if columns.iter().any(|c| c.1.len() != len) {
            return Err(SeriesError::LengthMismatch);
        }
        let series = columns
            .into_iter()
            .map(|(id, v)| TimeSeries::from_values(id, start, &v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(series)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn width(&self) -> usize {
        self.series.len()
    }

    pub fn ids(&self) -> Vec<String> {
        self.series.iter().map(|s| s.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Result<&TimeSeries> {
        self.series
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| SeriesError::UnknownSeries(id.to_string()))
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.series
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| SeriesError::UnknownSeries(id.to_string()))
    }

    /// Value columns in series order.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        self.series.iter().map(|s| s.values()).collect()
    }

    pub fn select(&self, ids: &[String]) -> Result<Panel> {
        let series = ids
            .iter()
            .map(|id| self.get(id).cloned())
            .collect::<Result<Vec<_>>>()?;
        Panel::new(series)
    }

    /// Rows `start..end` of every member.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Panel> {
        if start >= end || end > self.len() {
            return Err(SeriesError::InvalidWindow(format!(
                "rows {start}..{end} of {}",
                self.len()
            )));
        }
        Ok(Panel {
            dates: self.dates[start..end].to_vec(),
            series: self
                .series
                .iter()
                .map(|s| TimeSeries {
                    points: s.points[start..end].to_vec(),
                    ..s.clone()
                })
                .collect(),
        })
    }

    /// Applies `f` to every member and re-aligns the result.
    pub fn map_series<F>(&self, f: F) -> Result<Panel>
    where
        F: Fn(&TimeSeries) -> Result<TimeSeries>,
    {
        Panel::new(self.series.iter().map(f).collect::<Result<Vec<_>>>()?)
    }
}

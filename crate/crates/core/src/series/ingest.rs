use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;

use super::{Panel, Result, SeriesError, TimePoint, TimeSeries};

/// Which value columns to read. `None` reads every column after the date.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnSchema {
    pub columns: Option<Vec<String>>,
}

impl ColumnSchema {
    pub fn all() -> Self {
        Self { columns: None }
    }

    pub fn only<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: Some(columns.iter().map(|c| c.as_ref().to_string()).collect()),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<Panel> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(SeriesError::MissingFile(path.display().to_string()));
    }
    let file = std::fs::File::open(path).map_err(|e| SeriesError::Io(e.to_string()))?;
    read_csv(file, schema)
}

/// Reads comma-separated UTF-8 text: a header row, ISO-8601 dates in the
/// first column, `.` decimals elsewhere. Any unparseable cell aborts with
/// its 1-based line number.
pub fn read_csv<R: Read>(reader: R, schema: &ColumnSchema) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| SeriesError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    if header.len() < 2 {
        return Err(SeriesError::MalformedRow {
            line: 1,
            reason: "header needs a date column and at least one value column".into(),
        });
    }

    let wanted: Vec<(usize, String)> = match &schema.columns {
        None => header
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, h)| (i, h.to_string()))
            .collect(),
        Some(cols) => cols
            .iter()
            .map(|c| {
                header
                    .iter()
                    .skip(1)
                    .position(|h| h == c)
                    .map(|i| (i + 1, c.clone()))
                    .ok_or_else(|| SeriesError::MissingColumn(c.clone()))
            })
            .collect::<Result<_>>()?,
    };

    let mut seen = HashSet::new();
    let mut columns: Vec<Vec<TimePoint>> = vec![Vec::new(); wanted.len()];
    for (row_idx, record) in rdr.records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| SeriesError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(SeriesError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| {
            SeriesError::MalformedRow {
                line,
                reason: format!("date {:?}: {e}", &record[0]),
            }
        })?;
        if !seen.insert(date) {
            return Err(SeriesError::DuplicateDate { date, line });
        }
        for (slot, (col, name)) in wanted.iter().enumerate() {
            let cell = &record[*col];
            let value: f64 = cell.parse().map_err(|_| SeriesError::MalformedRow {
                line,
                reason: format!("column {name:?}: cannot parse {cell:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(SeriesError::MalformedRow {
                    line,
                    reason: format!("column {name:?}: non-finite value"),
                });
            }
            columns[slot].push(TimePoint { date, value });
        }
    }

    let series = wanted
        .into_iter()
        .zip(columns)
        .map(|((_, name), mut points)| {
            points.sort_by_key(|p| p.date);
            TimeSeries::new(name, points)
        })
        .collect::<Result<Vec<_>>>()?;
    Panel::new(series)
}

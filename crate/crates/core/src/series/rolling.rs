use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Result, SeriesError, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingWindowSpec {
    pub window_len: usize,
    pub step: usize,
}

impl RollingWindowSpec {
    pub fn new(window_len: usize, step: usize) -> Result<Self> {
        if window_len == 0 || step == 0 {
            return Err(SeriesError::InvalidWindow(format!(
                "window {window_len}, step {step}: both must be positive"
            )));
        }
        Ok(Self { window_len, step })
    }

    /// floor((n − w)/step) + 1, or 0 when the window does not fit.
    pub fn output_len(&self, n: usize) -> usize {
        if n < self.window_len {
            0
        } else {
            (n - self.window_len) / self.step + 1
        }
    }
}

/// A window whose statistic could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingGap {
    pub date: NaiveDate,
    pub reason: String,
}

/// A derived statistic stamped at the last date of each window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingSeries {
    pub source_id: String,
    pub statistic: String,
    pub points: Vec<(NaiveDate, f64)>,
    pub gaps: Vec<RollingGap>,
}

impl RollingSeries {
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Evaluates `f` on every contiguous window. Windows are evaluated in
/// parallel; the output order is the window order regardless.
pub fn rolling_apply<F, E>(
    s: &TimeSeries,
    spec: RollingWindowSpec,
    statistic: &str,
    f: F,
) -> Result<RollingSeries>
where
    F: Fn(&[f64]) -> std::result::Result<f64, E> + Sync,
    E: std::fmt::Display,
{
    let n = s.len();
    if spec.window_len > n {
        return Err(SeriesError::WindowTooLong {
            window: spec.window_len,
            len: n,
        });
    }
    let values = s.values();
    let dates = s.dates();
    let starts: Vec<usize> = (0..spec.output_len(n)).map(|i| i * spec.step).collect();
    let results: Vec<(NaiveDate, std::result::Result<f64, String>)> = starts
        .par_iter()
        .map(|&start| {
            let end = start + spec.window_len;
            let r = match f(&values[start..end]) {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(format!("non-finite statistic {v}")),
                Err(e) => Err(e.to_string()),
            };
            (dates[end - 1], r)
        })
        .collect();

    let mut out = RollingSeries {
        source_id: s.id().to_string(),
        statistic: statistic.to_string(),
        points: Vec::with_capacity(results.len()),
        gaps: Vec::new(),
    };
    for (date, r) in results {
        match r {
            Ok(v) => out.points.push((date, v)),
            Err(reason) => out.gaps.push(RollingGap { date, reason }),
        }
    }
    Ok(out)
}

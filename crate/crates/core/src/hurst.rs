//! Hurst exponents: classical rescaled range with the small-sample
//! Anis–Lloyd/Peters correction, and the generalized Hurst exponent (GHE)
//! from the scaling of absolute increments, plus rolling and summary
//! helpers built on them.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::series::{
    mean, pearson_correlation_matrix, rolling_apply, CorrelationMatrix, RollingSeries,
    RollingWindowSpec, SeriesError, TimeSeries,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HurstError {
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("subseries length {0} below the minimum of 8")]
    ScaleTooSmall(usize),
    #[error("every subseries of length {0} is constant")]
    DegenerateSubseries(usize),
    #[error("need at least 4 scales, got {0}")]
    InsufficientScales(usize),
    #[error("increments are all zero")]
    DegenerateSeries,
    #[error("moment of order {0} is not finite")]
    NonFiniteMoment(f64),
    #[error("moment order must be positive, got {0}")]
    InvalidMoment(f64),
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

pub type Result<T> = std::result::Result<T, HurstError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HurstMethod {
    Rs,
    Ghe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    /// Estimate clamped to [0, 1].
    pub h: f64,
    /// Estimate before clamping.
    pub raw: f64,
    pub clamped: bool,
    pub method: HurstMethod,
    pub q: f64,
    pub fit_r2: f64,
    pub n_scales: usize,
}

impl HurstEstimate {
    fn new(raw: f64, method: HurstMethod, q: f64, fit_r2: f64, n_scales: usize) -> Self {
        let h = raw.clamp(0.0, 1.0);
        HurstEstimate {
            h,
            raw,
            clamped: h != raw,
            method,
            q,
            fit_r2,
            n_scales,
        }
    }
}

/// Scale/statistic pairs behind a log-log fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCurve {
    pub scales: Vec<usize>,
    pub statistic: Vec<f64>,
}

/// OLS fit of y on x; returns (slope, r²).
fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    (slope, r2)
}

/// Mean rescaled range over the floor(len/n) complete subseries of length `n`.
pub fn rs_statistic(x: &[f64], n: usize) -> Result<f64> {
    if n < 8 {
        return Err(HurstError::ScaleTooSmall(n));
    }
    if x.len() < 2 * n {
        return Err(HurstError::TooShort {
            needed: 2 * n,
            got: x.len(),
        });
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for chunk in x.chunks_exact(n) {
        let m = mean(chunk);
        let s = (chunk.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        if s == 0.0 {
            continue;
        }
        let (mut y, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in chunk {
            y += v - m;
            lo = lo.min(y);
            hi = hi.max(y);
        }
        total += (hi - lo) / s;
        used += 1;
    }
    if used == 0 {
        return Err(HurstError::DegenerateSubseries(n));
    }
    Ok(total / used as f64)
}

fn rs_sum(n: usize) -> f64 {
    let nf = n as f64;
    (nf - 0.5) / nf
        * (1..n)
            .map(|i| ((nf - i as f64) / i as f64).sqrt())
            .sum::<f64>()
}

/// Anis–Lloyd expected R/S with the exact gamma ratio.
pub fn expected_rs_exact(n: usize) -> f64 {
    assert!(n >= 2, "expected_rs needs n >= 2");
    let nf = n as f64;
    let ratio =
        (ln_gamma((nf - 1.0) / 2.0) - ln_gamma(nf / 2.0)).exp() / std::f64::consts::PI.sqrt();
    ratio * rs_sum(n)
}

/// Anis–Lloyd expected R/S with the large-n limit of the gamma ratio.
pub fn expected_rs_asymptotic(n: usize) -> f64 {
    assert!(n >= 2, "expected_rs needs n >= 2");
    rs_sum(n) / (n as f64 * std::f64::consts::FRAC_PI_2).sqrt()
}

/// Expected R/S of white noise for subseries length `n` (Anis–Lloyd with
/// the Peters factor). The gamma ratio switches to its large-n limit above
/// 340, where the gamma values themselves would overflow.
pub fn expected_rs(n: usize) -> f64 {
    if n <= 340 {
        expected_rs_exact(n)
    } else {
        expected_rs_asymptotic(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RsMode {
    /// Plain regression of log (R/S)_n on log n.
    Raw,
    /// Regress log (R/S)_n − log E(R/S)_n and add 0.5.
    #[default]
    AnisLloyd,
}

/// Powers of two from 8 up to half the sample length.
pub fn default_rs_scales(len: usize) -> Vec<usize> {
    std::iter::successors(Some(8usize), |s| Some(s * 2))
        .take_while(|s| 2 * s <= len)
        .collect()
}

pub fn rs_curve(x: &[f64], scales: &[usize]) -> Result<ScaleCurve> {
    let statistic = scales
        .iter()
        .map(|&n| rs_statistic(x, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScaleCurve {
        scales: scales.to_vec(),
        statistic,
    })
}

/// Hurst exponent from the R/S scaling of `x` (returns, not levels).
pub fn hurst_rs(x: &[f64], scales: &[usize], mode: RsMode) -> Result<HurstEstimate> {
    let mut scales = scales.to_vec();
    scales.sort_unstable();
    scales.dedup();
    if scales.len() < 4 {
        return Err(HurstError::InsufficientScales(scales.len()));
    }
    let curve = rs_curve(x, &scales)?;
    let lx: Vec<f64> = scales.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = curve
        .statistic
        .iter()
        .zip(&scales)
        .map(|(rs, &n)| match mode {
            RsMode::Raw => rs.ln(),
            RsMode::AnisLloyd => rs.ln() - expected_rs(n).ln(),
        })
        .collect();
    let (slope, r2) = ols(&lx, &ly);
    let raw = match mode {
        RsMode::Raw => slope,
        RsMode::AnisLloyd => slope + 0.5,
    };
    Ok(HurstEstimate::new(
        raw,
        HurstMethod::Rs,
        1.0,
        r2,
        scales.len(),
    ))
}

/// τ_max values averaged over by default.
pub fn default_tau_max_set() -> Vec<usize> {
    (5..=19).collect()
}

/// ⟨|X(t+τ) − X(t)|^q⟩ for τ = 1..=tau_max.
pub fn increment_moments(x: &[f64], q: f64, tau_max: usize) -> Result<ScaleCurve> {
    let mut statistic = Vec::with_capacity(tau_max);
    for tau in 1..=tau_max {
        let k = x
            .windows(tau + 1)
            .map(|w| (w[tau] - w[0]).abs().powf(q))
            .sum::<f64>()
            / (x.len() - tau) as f64;
        if !k.is_finite() {
            return Err(HurstError::NonFiniteMoment(q));
        }
        if k == 0.0 {
            return Err(HurstError::DegenerateSeries);
        }
        statistic.push(k);
    }
    Ok(ScaleCurve {
        scales: (1..=tau_max).collect(),
        statistic,
    })
}

/// Generalized Hurst exponent of the level series `x`.
///
/// For each τ_max the slope of log K_q(τ) against log τ over τ = 1..τ_max
/// is q·H(q); the estimate is the mean of H(q) over `tau_max_set`, and
/// `fit_r2` the mean r² of those fits. Only the increment moment is fitted:
/// any τ-independent normalisation would shift the intercept and leave the
/// slope untouched.
pub fn ghe(x: &[f64], q: f64, tau_max_set: &[usize]) -> Result<HurstEstimate> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(HurstError::InvalidMoment(q));
    }
    let max_tau = tau_max_set.iter().copied().max().unwrap_or(0);
    if tau_max_set.is_empty() || tau_max_set.contains(&0) || tau_max_set.contains(&1) {
        return Err(HurstError::InsufficientScales(tau_max_set.len()));
    }
    let needed = 3 * max_tau;
    if x.len() < needed {
        return Err(HurstError::TooShort {
            needed,
            got: x.len(),
        });
    }
    let curve = increment_moments(x, q, max_tau)?;
    let lx: Vec<f64> = curve.scales.iter().map(|&t| (t as f64).ln()).collect();
    let ly: Vec<f64> = curve.statistic.iter().map(|k| k.ln()).collect();
    let (mut h_sum, mut r2_sum) = (0.0, 0.0);
    for &tm in tau_max_set {
        let (slope, r2) = ols(&lx[..tm], &ly[..tm]);
        h_sum += slope / q;
        r2_sum += r2;
    }
    let m = tau_max_set.len() as f64;
    Ok(HurstEstimate::new(
        h_sum / m,
        HurstMethod::Ghe,
        q,
        r2_sum / m,
        max_tau,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingGhe {
    pub series: RollingSeries,
    pub warnings: Vec<String>,
}

/// GHE over sliding windows of a level series (e.g. log prices).
pub fn rolling_ghe(s: &TimeSeries, spec: RollingWindowSpec, q: f64) -> Result<RollingGhe> {
    const ADVISED_WINDOW: usize = 60;
    let mut warnings = Vec::new();
    if spec.window_len < ADVISED_WINDOW {
        warnings.push(format!(
            "window of {} observations is below the advised {ADVISED_WINDOW}",
            spec.window_len
        ));
    }
    let taus = default_tau_max_set();
    let series = rolling_apply(s, spec, "ghe", |w| ghe(w, q, &taus).map(|e| e.h))?;
    Ok(RollingGhe { series, warnings })
}

pub fn fractal_dimension(h: f64) -> Result<f64> {
    check_unit(h)?;
    Ok(2.0 - h)
}

pub fn spectral_exponent(h: f64) -> Result<f64> {
    check_unit(h)?;
    Ok(2.0 * h + 1.0)
}

fn check_unit(h: f64) -> Result<()> {
    if (0.0..=1.0).contains(&h) {
        Ok(())
    } else {
        Err(HurstError::OutOfRange(h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Efficiency {
    AntiPersistent,
    EfficientBand,
    Persistent,
}

pub const DEFAULT_EFFICIENCY_BAND: f64 = 0.05;

pub fn classify_efficiency(h: f64, band: f64) -> Efficiency {
    if h < 0.5 - band {
        Efficiency::AntiPersistent
    } else if h > 0.5 + band {
        Efficiency::Persistent
    } else {
        Efficiency::EfficientBand
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualMean {
    pub year: i32,
    pub mean: f64,
    pub count: usize,
}

/// Calendar-year means of a rolling curve.
pub fn annual_means(curve: &RollingSeries) -> Vec<AnnualMean> {
    let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for (d, v) in &curve.points {
        by_year.entry(d.year()).or_default().push(*v);
    }
    by_year
        .into_iter()
        .map(|(year, v)| AnnualMean {
            year,
            mean: mean(&v),
            count: v.len(),
        })
        .collect()
}

/// Pearson correlations between rolling curves over the dates they share.
pub fn hurst_correlation_matrix(curves: &[RollingSeries]) -> Result<CorrelationMatrix> {
    let maps: Vec<BTreeMap<NaiveDate, f64>> = curves
        .iter()
        .map(|c| c.points.iter().copied().collect())
        .collect();
    let shared: Vec<NaiveDate> = match maps.first() {
        Some(first) => first
            .keys()
            .filter(|d| maps.iter().all(|m| m.contains_key(d)))
            .copied()
            .collect(),
        None => Vec::new(),
    };
    if shared.len() < 3 {
        return Err(HurstError::TooShort {
            needed: 3,
            got: shared.len(),
        });
    }
    let columns: Vec<(String, Vec<f64>)> = curves
        .iter()
        .zip(&maps)
        .map(|(c, m)| (c.source_id.clone(), shared.iter().map(|d| m[d]).collect()))
        .collect();
    Ok(pearson_correlation_matrix(&columns)?)
}

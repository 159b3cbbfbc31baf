use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ksg::{mi_knn, KsgConfig};
use super::{default_bins, mi_binned, InfoError, Result};
use crate::series::{RollingGap, RollingSeries, RollingWindowSpec, SeriesError, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MiEstimator {
    Knn(KsgConfig),
    /// `None` picks floor(sqrt(n/5)) bins per window.
    Binned(Option<usize>),
}

impl Default for MiEstimator {
    fn default() -> Self {
        MiEstimator::Knn(KsgConfig::default())
    }
}

impl MiEstimator {
    pub fn estimate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            MiEstimator::Knn(cfg) => mi_knn(x, y, *cfg).map(|e| e.value),
            MiEstimator::Binned(bins) => {
                mi_binned(x, y, bins.unwrap_or_else(|| default_bins(x.len()))).map(|e| e.value)
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            MiEstimator::Knn(_) => "mi_knn",
            MiEstimator::Binned(_) => "mi_binned",
        }
    }
}

/// MI of two aligned series over sliding windows, stamped at window end.
pub fn rolling_mi(
    a: &TimeSeries,
    b: &TimeSeries,
    spec: RollingWindowSpec,
    estimator: MiEstimator,
) -> Result<RollingSeries> {
    if a.dates() != b.dates() {
        return Err(InfoError::LengthMismatch);
    }
    let n = a.len();
    if spec.window_len > n {
        return Err(SeriesError::WindowTooLong {
            window: spec.window_len,
            len: n,
        }
        .into());
    }
    let (x, y, dates) = (a.values(), b.values(), a.dates());
    let results: Vec<(NaiveDate, Result<f64>)> = (0..spec.output_len(n))
        .into_par_iter()
        .map(|w| {
            let start = w * spec.step;
            let end = start + spec.window_len;
            (
                dates[end - 1],
                estimator.estimate(&x[start..end], &y[start..end]),
            )
        })
        .collect();
    let mut out = RollingSeries {
        source_id: format!("{}~{}", a.id(), b.id()),
        statistic: estimator.tag().to_string(),
        points: Vec::new(),
        gaps: Vec::new(),
    };
    for (date, r) in results {
        match r {
            Ok(v) => out.points.push((date, v)),
            Err(e) => out.gaps.push(RollingGap {
                date,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingEvent {
    pub onset: NaiveDate,
    pub peak_date: NaiveDate,
    pub peak_gap: f64,
}

/// Finds maximal runs of at least `run_len` shared dates where
/// |a − b| > `gap_threshold`, each directly preceded by at least `run_len`
/// dates where the gap stayed at or below the threshold.
pub fn mi_decoupling(
    curve_a: &RollingSeries,
    curve_b: &RollingSeries,
    gap_threshold: f64,
    run_len: usize,
) -> Result<Vec<DecouplingEvent>> {
    let b: BTreeMap<NaiveDate, f64> = curve_b.points.iter().copied().collect();
    let gaps: Vec<(NaiveDate, f64)> = curve_a
        .points
        .iter()
        .filter_map(|(d, va)| b.get(d).map(|vb| (*d, (va - vb).abs())))
        .collect();
    if gaps.is_empty() {
        return Err(InfoError::NoOverlap);
    }
    let run_len = run_len.max(1);

    // (above?, start, end) for each maximal run of equal state
    let mut runs: Vec<(bool, usize, usize)> = Vec::new();
    for (i, (_, g)) in gaps.iter().enumerate() {
        let above = *g > gap_threshold;
        match runs.last_mut() {
            Some(last) if last.0 == above => last.2 = i + 1,
            _ => runs.push((above, i, i + 1)),
        }
    }

    let mut events = Vec::new();
    for pair in runs.windows(2) {
        let (calm, run) = (pair[0], pair[1]);
        if calm.0 || !run.0 || calm.2 - calm.1 < run_len || run.2 - run.1 < run_len {
            continue;
        }
        let (peak_idx, peak_gap) =
            (run.1..run.2)
                .map(|i| (i, gaps[i].1))
                .fold(
                    (run.1, f64::NEG_INFINITY),
                    |a, b| if b.1 > a.1 { b } else { a },
                );
        events.push(DecouplingEvent {
            onset: gaps[run.1].0,
            peak_date: gaps[peak_idx].0,
            peak_gap,
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn day(i: usize) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Duration::days(i as i64)
    }

    fn curve(values: &[f64]) -> RollingSeries {
        RollingSeries {
            source_id: "c".into(),
            statistic: "mi".into(),
            points: values
                .iter()
                .enumerate()
                .map(|(i, v)| (day(i), *v))
                .collect(),
            gaps: vec![],
        }
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn identical_curves_no_events() {
        let c = curve(&[0.2; 50]);
        assert!(mi_decoupling(&c, &c, 0.1, 5).unwrap().is_empty());
    }

    #[test]
    fn linear_divergence_onset_closed_form() {
        let a = curve(&[0.3; 200]);
        let b: Vec<f64> = (0..200)
            .map(|i| {
                0.3 + if i >= 100 {
                    0.003 * (i - 100) as f64
                } else {
                    0.0
                }
            })
            .collect();
        let events = mi_decoupling(&a, &curve(&b), 0.1, 5).unwrap();
        assert_eq!(events.len(), 1);
        // first i with 0.003·(i − 100) > 0.1
        assert_eq!(events[0].onset, day(134));
        assert_eq!(events[0].peak_date, day(199));
    }

    #[test]
    fn short_runs_ignored() {
        let mut v = vec![0.0; 30];
        v[10] = 1.0;
        v[11] = 1.0;
        let events = mi_decoupling(&curve(&[0.0; 30]), &curve(&v), 0.1, 5).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn no_overlap() {
        let a = curve(&[0.0; 5]);
        let mut b = curve(&[0.0; 5]);
        for p in &mut b.points {
            p.0 += chrono::Duration::days(100);
        }
        assert_eq!(mi_decoupling(&a, &b, 0.1, 2), Err(InfoError::NoOverlap));
    }

    #[test]
    fn rolling_mi_identity_is_high() {
        let x = noise(200, 1);
        let s = TimeSeries::from_values("a", day(0), &x).unwrap();
        let r = rolling_mi(
            &s,
            &s,
            RollingWindowSpec::new(60, 1).unwrap(),
            MiEstimator::default(),
        )
        .unwrap();
        assert_eq!(r.len(), 141);
        assert!(r.values().iter().all(|&v| v > 1.5));
    }

    #[test]
    fn coupling_onset_shows_as_level_shift() {
        let n = 400;
        let t_switch = 200;
        let x = noise(n, 3);
        let e = noise(n, 4);
        let y: Vec<f64> = (0..n)
            .map(|t| {
                if t < t_switch {
                    e[t]
                } else {
                    x[t] + 0.3 * e[t]
                }
            })
            .collect();
        let a = TimeSeries::from_values("a", day(0), &x).unwrap();
        let b = TimeSeries::from_values("b", day(0), &y).unwrap();
        let window = 60;
        let r = rolling_mi(
            &a,
            &b,
            RollingWindowSpec::new(window, 1).unwrap(),
            MiEstimator::default(),
        )
        .unwrap();
        let mut flat = r.clone();
        for p in &mut flat.points {
            p.1 = 0.0;
        }
        let events = mi_decoupling(&flat, &r, 0.5, 5).unwrap();
        assert!(!events.is_empty());
        let onset_idx = (events[0].onset - day(0)).num_days();
        assert!(
            (onset_idx - t_switch as i64).abs() <= window as i64,
            "{onset_idx}"
        );
    }
}

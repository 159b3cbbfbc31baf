//! Directed coupling from lagged information flow: transfer entropy,
//! partial transfer entropy and the partial mutual information from mixed
//! embedding (PMIME).
//!
//! PMIME builds, for each target series, a small set of lagged variables
//! drawn from every series that best explains the target's next value.
//! A driver gets a non-zero entry only if at least one of its lags made it
//! into that set, so weak or indirect couplings come out as exact zeros.

mod network;

pub use network::{causality_network, CausalityNetwork, NetworkEdge};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::infotheory::ksg::{jitter_column, ksg_cmi, ksg_mi};
use crate::infotheory::InfoError;
use crate::series::{std_dev, Panel, RollingWindowSpec, SeriesError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmimeError {
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series {0} is constant")]
    DegenerateDimension(String),
    #[error("series index {index} out of range for a panel of width {width}")]
    InvalidIndex { index: usize, width: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

pub type Result<T> = std::result::Result<T, PmimeError>;

/// A lagged copy of one panel series. `lag` counts steps back from the
/// predicted time point, so with target x_{t+1} lag 1 is the value at t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LagVariable {
    pub series_index: usize,
    pub lag: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedEmbedding {
    pub target_index: usize,
    /// In the order they were selected.
    pub selected: Vec<LagVariable>,
    /// MI gain contributed by each accepted variable.
    pub cycle_gains: Vec<f64>,
    /// I(x_target,t+1; w) for the final embedding, 0 when empty.
    pub total_information: f64,
}

impl MixedEmbedding {
    pub fn contains_series(&self, series: usize) -> bool {
        self.selected.iter().any(|v| v.series_index == series)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StopRule {
    /// Accept a candidate only if its gain beats the upper quantile of
    /// gains obtained from circularly time-shifted copies of it.
    Surrogate { alpha: f64, surrogates: usize },
    /// Stop once I(y; w_old) / I(y; w_new) exceeds `threshold`.
    Ratio { threshold: f64 },
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::Surrogate {
            alpha: 0.05,
            surrogates: 100,
        }
    }
}

impl StopRule {
    pub fn name(&self) -> &'static str {
        match self {
            StopRule::Surrogate { .. } => "surrogate",
            StopRule::Ratio { .. } => "ratio",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmimeConfig {
    pub l_max: usize,
    pub k: usize,
    pub stop: StopRule,
    pub seed: u64,
    /// Relative tie-breaking jitter, see [`jitter_column`].
    pub jitter: f64,
}

impl Default for PmimeConfig {
    fn default() -> Self {
        PmimeConfig {
            l_max: 5,
            k: 4,
            stop: StopRule::default(),
            seed: 0,
            jitter: 1e-10,
        }
    }
}

impl PmimeConfig {
    fn validate(&self) -> Result<()> {
        if self.l_max == 0 {
            return Err(PmimeError::InvalidParams("L_max must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(PmimeError::InvalidParams("k must be at least 1".into()));
        }
        match self.stop {
            StopRule::Surrogate { alpha, surrogates } => {
                if !(alpha > 0.0 && alpha < 1.0) || surrogates < 2 {
                    return Err(PmimeError::InvalidParams(
                        "surrogate rule needs 0 < alpha < 1 and at least 2 surrogates".into(),
                    ));
                }
            }
            StopRule::Ratio { threshold } => {
                if !(threshold > 0.0 && threshold <= 1.0) {
                    return Err(PmimeError::InvalidParams(
                        "ratio threshold must lie in (0, 1]".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Diagnostics for one ordered pair driver → target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostic {
    pub driver: usize,
    pub target: usize,
    /// Information the driver lags add given the rest of the embedding.
    pub numerator: f64,
    /// Information of the whole embedding about the target's next value.
    pub denominator: f64,
    pub raw_ratio: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmimeResult {
    pub ids: Vec<String>,
    /// `matrix[i][j]` is the PMIME of driver `i` on target `j`.
    pub matrix: Vec<Vec<f64>>,
    pub adjacency: Vec<Vec<bool>>,
    pub embeddings: Vec<MixedEmbedding>,
    pub diagnostics: Vec<PairDiagnostic>,
    pub stop_rule: StopRule,
    pub warnings: Vec<String>,
}

impl PmimeResult {
    pub fn entry(&self, driver: usize, target: usize) -> f64 {
        self.matrix[driver][target]
    }
}

/// Jittered copies of every panel series plus the lag bookkeeping.
struct LaggedData {
    cols: Vec<Vec<f64>>,
    n: usize,
    l_max: usize,
}

impl LaggedData {
    fn new(panel: &Panel, l_max: usize, seed: u64, jitter: f64) -> Result<Self> {
        let ids = panel.ids();
        let cols: Vec<Vec<f64>> = panel
            .columns()
            .into_iter()
            .zip(&ids)
            .map(|(c, id)| {
                if std_dev(&c) == 0.0 {
                    Err(PmimeError::DegenerateDimension(id.to_string()))
                } else {
                    Ok(jitter_column(&c, seed, jitter))
                }
            })
            .collect::<Result<_>>()?;
        Ok(LaggedData {
            cols,
            n: panel.len(),
            l_max,
        })
    }

    fn samples(&self) -> usize {
        self.n - self.l_max
    }

    fn future(&self, target: usize) -> &[f64] {
        &self.cols[target][self.l_max..]
    }

    fn lagged(&self, v: LagVariable) -> &[f64] {
        &self.cols[v.series_index][self.l_max - v.lag..self.n - v.lag]
    }

    fn candidates(&self) -> Vec<LagVariable> {
        (0..self.cols.len())
            .flat_map(|s| {
                (1..=self.l_max).map(move |lag| LagVariable {
                    series_index: s,
                    lag,
                })
            })
            .collect()
    }
}

fn mi_with(y: &[f64], vars: &[&[f64]], k: usize) -> f64 {
    if vars.is_empty() {
        0.0
    } else {
        ksg_mi(&[y], vars, k)
    }
}

fn check_index(panel: &Panel, index: usize) -> Result<()> {
    if index >= panel.width() {
        Err(PmimeError::InvalidIndex {
            index,
            width: panel.width(),
        })
    } else {
        Ok(())
    }
}

fn check_length(panel: &Panel, needed: usize) -> Result<()> {
    if panel.len() < needed {
        Err(PmimeError::TooShort {
            needed,
            got: panel.len(),
        })
    } else {
        Ok(())
    }
}

/// Type-7 (linear interpolation) sample quantile.
fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = (values.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(values.len() - 1);
    values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
}

/// Sequential surrogate test at one-sided level `p`.
///
/// Under the null the observed gain is one more draw from the surrogate
/// distribution, so (gain − mean) / (sd·√(1 + 1/r)) follows a Student t
/// with r − 1 degrees of freedom. The test looks every [`LOOK_EVERY`]
/// draws and spends `p / looks` at each look, which keeps the overall
/// false-accept rate at `p` while letting clear cases stop early.
fn surrogate_test(gain: f64, r_max: usize, p: f64, mut draw: impl FnMut() -> f64) -> bool {
    let looks = r_max.div_ceil(LOOK_EVERY).max(1);
    let p_look = p / looks as f64;
    let mut values = Vec::with_capacity(r_max);
    for _ in 0..r_max {
        values.push(draw());
        let r = values.len();
        let last = r == r_max;
        if !last && r % LOOK_EVERY != 0 {
            continue;
        }
        let m = values.iter().sum::<f64>() / r as f64;
        let sd = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (r - 1) as f64).sqrt();
        let t = if sd > 0.0 {
            (gain - m) / (sd * (1.0 + 1.0 / r as f64).sqrt())
        } else if gain > m {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        let crit = t_critical(p_look, r - 1);
        if t > crit {
            return true;
        }
        // far below even the least demanding bound: further draws cannot help
        if last || t < normal_critical(p) - (LOOK_EVERY as f64 / r as f64).sqrt() {
            return false;
        }
    }
    false
}

const LOOK_EVERY: usize = 20;

/// One-sided standard normal critical value for tail probability `p`.
fn normal_critical(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0)
        .expect("unit normal")
        .inverse_cdf(1.0 - p)
}

/// One-sided Student t critical value with `dof` degrees of freedom.
fn t_critical(p: f64, dof: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    StudentsT::new(0.0, 1.0, dof.max(1) as f64)
        .expect("valid t distribution")
        .inverse_cdf(1.0 - p)
}

fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [a, b] {
        h = (h ^ v).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

/// `family` scales the multiple-comparison correction: the number of
/// targets whose embeddings are judged together.
fn greedy_embedding(
    data: &LaggedData,
    target: usize,
    cfg: &PmimeConfig,
    family: usize,
) -> MixedEmbedding {
    let y = data.future(target);
    let n = data.samples();
    let mut remaining = data.candidates();
    let mut selected: Vec<LagVariable> = Vec::new();
    let mut gains = Vec::new();
    let mut current = 0.0;

    while !remaining.is_empty() {
        let base: Vec<&[f64]> = selected.iter().map(|v| data.lagged(*v)).collect();
        let scores: Vec<f64> = remaining
            .par_iter()
            .map(|c| {
                let mut vars = base.clone();
                vars.push(data.lagged(*c));
                mi_with(y, &vars, cfg.k)
            })
            .collect();
        // first maximum wins so ties resolve in candidate order
        let (best, best_score) =
            scores
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc },
                );
        let gain = best_score - current;
        if gain <= 0.0 {
            break;
        }
        let accept = match cfg.stop {
            StopRule::Ratio { threshold } => current / best_score <= threshold,
            StopRule::Surrogate { alpha, surrogates } => {
                let p = alpha / (family * remaining.len()) as f64;
                let cand = data.lagged(remaining[best]);
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
                    cfg.seed,
                    target as u64,
                    selected.len() as u64,
                ));
                let margin = (n / 10).max(1);
                surrogate_test(gain, surrogates, p, || {
                    let shift = rng.gen_range(margin..=n - margin);
                    let shifted: Vec<f64> = cand[shift..]
                        .iter()
                        .chain(&cand[..shift])
                        .copied()
                        .collect();
                    let mut vars = base.clone();
                    vars.push(&shifted);
                    mi_with(y, &vars, cfg.k) - current
                })
            }
        };
        if !accept {
            break;
        }
        selected.push(remaining.remove(best));
        gains.push(gain);
        current = best_score;
    }

    MixedEmbedding {
        target_index: target,
        selected,
        cycle_gains: gains,
        total_information: current,
    }
}

/// Greedily selects the lagged variables that best predict the next value
/// of series `target`.
pub fn build_mixed_embedding(
    panel: &Panel,
    target: usize,
    cfg: &PmimeConfig,
) -> Result<MixedEmbedding> {
    cfg.validate()?;
    check_index(panel, target)?;
    check_length(panel, 20 * cfg.l_max)?;
    let data = LaggedData::new(panel, cfg.l_max, cfg.seed, cfg.jitter)?;
    Ok(greedy_embedding(&data, target, cfg, 1))
}

fn attribute(data: &LaggedData, emb: &MixedEmbedding, driver: usize, k: usize) -> PairDiagnostic {
    let target = emb.target_index;
    let zero = PairDiagnostic {
        driver,
        target,
        numerator: 0.0,
        denominator: emb.total_information,
        raw_ratio: 0.0,
        clamped: false,
    };
    if driver == target || !emb.contains_series(driver) {
        return zero;
    }
    let y = data.future(target);
    let rest: Vec<&[f64]> = emb
        .selected
        .iter()
        .filter(|v| v.series_index != driver)
        .map(|v| data.lagged(*v))
        .collect();
    // chain rule: I(y; w_driver | w_rest) = I(y; w) − I(y; w_rest)
    let numerator = emb.total_information - mi_with(y, &rest, k);
    let denominator = emb.total_information;
    if denominator <= 0.0 {
        return PairDiagnostic {
            clamped: true,
            ..zero
        };
    }
    let raw = numerator / denominator;
    PairDiagnostic {
        numerator,
        raw_ratio: raw,
        clamped: !(0.0..=1.0).contains(&raw),
        ..zero
    }
}

/// PMIME of every ordered pair of panel series.
pub fn pmime(panel: &Panel, cfg: &PmimeConfig) -> Result<PmimeResult> {
    pmime_targets(panel, &(0..panel.width()).collect::<Vec<_>>(), cfg)
}

/// As [`pmime`], but only builds embeddings for the listed targets; the
/// other columns of the matrix stay zero.
pub fn pmime_targets(panel: &Panel, targets: &[usize], cfg: &PmimeConfig) -> Result<PmimeResult> {
    cfg.validate()?;
    let kdim = panel.width();
    for &t in targets {
        check_index(panel, t)?;
    }
    check_length(panel, 20 * cfg.l_max)?;
    let mut warnings = Vec::new();
    let recommended = 20 * cfg.l_max * kdim;
    if panel.len() < recommended {
        warnings.push(format!(
            "{} observations is below the recommended {recommended} for {kdim} series at L_max = {}",
            panel.len(),
            cfg.l_max
        ));
    }
    let data = LaggedData::new(panel, cfg.l_max, cfg.seed, cfg.jitter)?;
    let per_target: Vec<(MixedEmbedding, Vec<PairDiagnostic>)> = targets
        .par_iter()
        .map(|&t| {
            let emb = greedy_embedding(&data, t, cfg, kdim);
            let diags = (0..kdim)
                .map(|d| attribute(&data, &emb, d, cfg.k))
                .collect();
            (emb, diags)
        })
        .collect();

    let mut matrix = vec![vec![0.0; kdim]; kdim];
    let mut embeddings = Vec::with_capacity(targets.len());
    let mut diagnostics = Vec::new();
    for (emb, diags) in per_target {
        for d in diags {
            matrix[d.driver][d.target] = d.raw_ratio.clamp(0.0, 1.0);
            diagnostics.push(d);
        }
        embeddings.push(emb);
    }
    let adjacency = matrix
        .iter()
        .map(|r| r.iter().map(|&v| v > 0.0).collect())
        .collect();
    Ok(PmimeResult {
        ids: panel.ids().iter().map(|s| s.to_string()).collect(),
        matrix,
        adjacency,
        embeddings,
        diagnostics,
        stop_rule: cfg.stop,
        warnings,
    })
}

/// Full-sample PMIME on sliding windows, stamped at each window's last date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingPmime {
    pub windows: Vec<(NaiveDate, PmimeResult)>,
    pub warnings: Vec<String>,
}

pub fn rolling_pmime(
    panel: &Panel,
    spec: RollingWindowSpec,
    cfg: &PmimeConfig,
) -> Result<RollingPmime> {
    const ADVISED_WINDOW: usize = 500;
    if spec.window_len > panel.len() {
        return Err(SeriesError::WindowTooLong {
            window: spec.window_len,
            len: panel.len(),
        }
        .into());
    }
    let mut warnings = Vec::new();
    if spec.window_len < ADVISED_WINDOW {
        warnings.push(format!(
            "window of {} samples is below {ADVISED_WINDOW}; PMIME estimates will be noisy",
            spec.window_len
        ));
    }
    let dates = panel.dates();
    let windows = (0..spec.output_len(panel.len()))
        .map(|w| {
            let start = w * spec.step;
            let end = start + spec.window_len;
            let sub = panel.slice_rows(start, end)?;
            Ok((dates[end - 1], pmime(&sub, cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RollingPmime { windows, warnings })
}

/// Uniform lags 1..=L of series `s`.
fn uniform_lags(data: &LaggedData, s: usize, l: usize) -> Vec<&[f64]> {
    (1..=l)
        .map(|lag| {
            data.lagged(LagVariable {
                series_index: s,
                lag,
            })
        })
        .collect()
}

fn te_inputs(panel: &Panel, from: usize, to: usize, l: usize) -> Result<LaggedData> {
    check_index(panel, from)?;
    check_index(panel, to)?;
    if from == to {
        return Err(PmimeError::InvalidParams(
            "driver and target must differ".into(),
        ));
    }
    if l == 0 {
        return Err(PmimeError::InvalidParams(
            "embedding length must be at least 1".into(),
        ));
    }
    check_length(panel, 20 * l)?;
    LaggedData::new(panel, l, 0, 1e-10)
}

/// TE(from → to) = I(x_to,t+1; lags of `from` | lags of `to`), both with
/// `l` uniform lags. Other panel series are ignored.
pub fn transfer_entropy(panel: &Panel, from: usize, to: usize, l: usize) -> Result<f64> {
    let data = te_inputs(panel, from, to, l)?;
    Ok(ksg_cmi(
        &[data.future(to)],
        &uniform_lags(&data, from, l),
        &uniform_lags(&data, to, l),
        4,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PteEstimate {
    pub value: f64,
    /// Set when K·L exceeds a tenth of the sample, where the conditional
    /// MI estimate becomes unreliable.
    pub dimensionality_warning: bool,
}

/// TE(from → to) additionally conditioned on `l` lags of every other series.
pub fn partial_transfer_entropy(
    panel: &Panel,
    from: usize,
    to: usize,
    l: usize,
) -> Result<PteEstimate> {
    let data = te_inputs(panel, from, to, l)?;
    let mut cond = uniform_lags(&data, to, l);
    for s in (0..panel.width()).filter(|&s| s != from && s != to) {
        cond.extend(uniform_lags(&data, s, l));
    }
    let value = ksg_cmi(&[data.future(to)], &uniform_lags(&data, from, l), &cond, 4);
    Ok(PteEstimate {
        value,
        dimensionality_warning: panel.width() * l > panel.len() / 10,
    })
}

/// Upper `q` quantile of TE(from → to) over `r` circular time shifts of the
/// driver, i.e. the null band for an uncoupled pair.
pub fn transfer_entropy_null_band(
    panel: &Panel,
    from: usize,
    to: usize,
    l: usize,
    r: usize,
    q: f64,
    seed: u64,
) -> Result<f64> {
    let data = te_inputs(panel, from, to, l)?;
    let n = panel.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = (n / 10).max(1);
    let source = &data.cols[from];
    let mut values: Vec<f64> = (0..r.max(2))
        .map(|_| {
            let shift = rng.gen_range(margin..=n - margin);
            let rotated: Vec<f64> = source[shift..]
                .iter()
                .chain(&source[..shift])
                .copied()
                .collect();
            let lags: Vec<&[f64]> = (1..=l).map(|lag| &rotated[l - lag..n - lag]).collect();
            ksg_cmi(&[data.future(to)], &lags, &uniform_lags(&data, to, l), 4)
        })
        .collect();
    Ok(quantile(&mut values, q))
}

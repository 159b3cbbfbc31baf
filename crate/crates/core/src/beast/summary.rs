//! Running the chains and reducing retained samples to posterior summaries.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis;
use super::sampler::{MoveKind, StructureSampler};
use super::{BeastError, Hyperparams, Result, SeasonMode};
use crate::series::{mean, pearson_correlation_matrix, std_dev, CorrelationMatrix, TimeSeries};

/// Pointwise posterior mean with a 95% credible band.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlopeSign {
    pub positive: f64,
    pub zero: f64,
    pub negative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Changepoint {
    pub index: usize,
    pub date: NaiveDate,
    /// Posterior probability of a knot within half a minimum segment.
    pub probability: f64,
    /// Mean trend change across the knot in original units; seasonal
    /// changepoints report zero.
    pub jump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveStats {
    pub kind: MoveKind,
    pub proposed: u64,
    pub accepted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub chains: usize,
    pub retained_per_chain: usize,
    /// Split-chain potential scale reduction of the log evidence.
    pub rhat: f64,
    pub converged: bool,
    pub min_seg: usize,
    pub cp_max_effective: usize,
    pub order_max_effective: usize,
    pub moves: Vec<MoveStats>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub series_id: String,
    pub dates: Vec<NaiveDate>,
    pub observed: Vec<f64>,
    pub season_mode: SeasonMode,
    pub trend_cp_prob: Vec<f64>,
    pub seasonal_cp_prob: Vec<f64>,
    /// Probability of each trend knot count 0..=cp_max.
    pub ncp_trend_dist: Vec<f64>,
    pub ncp_seasonal_dist: Vec<f64>,
    /// Pr(number of trend changepoints ≥ k) for k = 0..=cp_max.
    pub cumulative_ncp_dist: Vec<f64>,
    pub slope_sign: Vec<SlopeSign>,
    pub fitted_trend: Band,
    pub fitted_seasonal: Band,
    /// Posterior mean harmonic order at each time.
    pub seasonal_order: Vec<f64>,
    pub residual: Vec<f64>,
    pub extracted_cps: Vec<Changepoint>,
    pub extracted_seasonal_cps: Vec<Changepoint>,
    /// Jump of each extracted trend changepoint, in the same order.
    pub jumps: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl PosteriorSummary {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Most probable number of trend changepoints; ties go to fewer.
    pub fn ncp_trend_mode(&self) -> usize {
        argmax(&self.ncp_trend_dist)
    }

    pub fn ncp_seasonal_mode(&self) -> usize {
        argmax(&self.ncp_seasonal_dist)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Everything one chain contributes; all counts are over retained sweeps.
struct ChainOutput {
    trend_hits: Vec<u64>,
    seasonal_hits: Vec<u64>,
    ncp_trend: Vec<u64>,
    ncp_seasonal: Vec<u64>,
    trend_sum: Vec<f64>,
    seasonal_sum: Vec<f64>,
    order_sum: Vec<f64>,
    slope: Vec<[u64; 3]>,
    trend_draws: Vec<Vec<f64>>,
    seasonal_draws: Vec<Vec<f64>>,
    /// (knot, trend change across it) for every retained trend knot.
    knot_jumps: Vec<(usize, f64)>,
    log_evidence: Vec<f64>,
    moves: Vec<(u64, u64)>,
}

const KEEP_CURVES: usize = 200;
/// Inverse temperature at the first sweep of an annealed burn-in.
const START_HEAT: f64 = 1e-3;

fn chain_seed(seed: u64, chain: usize) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    h = (h ^ chain as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 31;
    h.wrapping_mul(0x94d0_49bb_1331_11eb) ^ (h >> 29)
}

fn run_chain(sampler: &StructureSampler, hyper: &Hyperparams, chain: usize) -> Result<ChainOutput> {
    let n = sampler.len();
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(hyper.seed, chain));
    let mut state = sampler.initial_state(chain, &mut rng)?;
    let retained = hyper.samples - hyper.burn_in;
    let thin = (retained / KEEP_CURVES).max(1);
    let mut out = ChainOutput {
        trend_hits: vec![0; n],
        seasonal_hits: vec![0; n],
        ncp_trend: vec![0; hyper.cp_max + 1],
        ncp_seasonal: vec![0; hyper.cp_max + 1],
        trend_sum: vec![0.0; n],
        seasonal_sum: vec![0.0; n],
        order_sum: vec![0.0; n],
        slope: vec![[0; 3]; n],
        trend_draws: Vec::new(),
        seasonal_draws: Vec::new(),
        knot_jumps: Vec::new(),
        log_evidence: Vec::with_capacity(retained),
        moves: vec![(0, 0); MoveKind::ALL.len()],
    };
    // slope_eps · sd / n in original units is slope_eps / n per step here
    let zero_slope = hyper.slope_eps / n as f64;
    let anneal_len = if hyper.options.anneal {
        hyper.burn_in / 2
    } else {
        0
    };
    for sweep in 0..hyper.samples {
        let heat = if sweep < anneal_len {
            START_HEAT.powf(1.0 - sweep as f64 / anneal_len as f64)
        } else {
            1.0
        };
        if let Some((kind, accepted)) = sampler.step_tempered(&mut state, &mut rng, heat) {
            let m = &mut out.moves[kind.index()];
            m.0 += 1;
            m.1 += accepted as u64;
        }
        if sweep < hyper.burn_in {
            continue;
        }
        let s = &state.structure;
        out.log_evidence.push(state.log_evidence);
        out.ncp_trend[s.trend_knots.len()] += 1;
        for &k in &s.trend_knots {
            out.trend_hits[k] += 1;
        }
        let trend = sampler.trend_curve(&state);
        for &k in &s.trend_knots {
            out.knot_jumps
                .push((k, trend[(k + 1).min(n - 1)] - trend[k - 1]));
        }
        for ((a, b), &(_, slope)) in
            basis::segments(&s.trend_knots, n).zip(&state.coefficients.trend)
        {
            let class = if slope.abs() < zero_slope {
                1
            } else if slope > 0.0 {
                0
            } else {
                2
            };
            for t in a..b {
                out.slope[t][class] += 1;
            }
        }
        for (acc, v) in out.trend_sum.iter_mut().zip(&trend) {
            *acc += v;
        }
        if s.season_mode == SeasonMode::Harmonic {
            out.ncp_seasonal[s.seasonal_knots.len()] += 1;
            for &k in &s.seasonal_knots {
                out.seasonal_hits[k] += 1;
            }
            for ((a, b), &l) in basis::segments(&s.seasonal_knots, n).zip(&s.harmonic_orders) {
                for t in a..b {
                    out.order_sum[t] += l as f64;
                }
            }
        } else {
            out.ncp_seasonal[0] += 1;
        }
        let seasonal = sampler.seasonal_curve(&state);
        for (acc, v) in out.seasonal_sum.iter_mut().zip(&seasonal) {
            *acc += v;
        }
        if (sweep - hyper.burn_in).is_multiple_of(thin) {
            out.trend_draws.push(trend);
            out.seasonal_draws.push(seasonal);
        }
    }
    Ok(out)
}

/// Split-chain potential scale reduction.
fn split_rhat(traces: &[Vec<f64>]) -> f64 {
    let half = traces.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if half < 2 {
        return f64::NAN;
    }
    let pieces: Vec<&[f64]> = traces
        .iter()
        .flat_map(|t| [&t[..half], &t[half..2 * half]])
        .collect();
    let l = half as f64;
    let means: Vec<f64> = pieces.iter().map(|p| mean(p)).collect();
    let within = pieces
        .iter()
        .zip(&means)
        .map(|(p, m)| p.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (l - 1.0))
        .sum::<f64>()
        / pieces.len() as f64;
    let grand = mean(&means);
    let between =
        l * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (pieces.len() as f64 - 1.0);
    if within <= 0.0 {
        return if between <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (l - 1.0) / l * within + between / l;
    (var_plus / within).sqrt()
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn band(sum: &[f64], total: f64, draws: &[&Vec<f64>], scale: f64, shift: f64) -> Band {
    let n = sum.len();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut column = Vec::with_capacity(draws.len());
    for t in 0..n {
        column.clear();
        column.extend(draws.iter().map(|d| d[t]));
        column.sort_by(f64::total_cmp);
        lower.push(shift + scale * quantile_sorted(&column, 0.025));
        upper.push(shift + scale * quantile_sorted(&column, 0.975));
    }
    Band {
        mean: sum.iter().map(|s| shift + scale * s / total).collect(),
        lower,
        upper,
    }
}

/// Greedy peak picking on the windowed probability curve.
fn extract(prob: &[f64], min_seg: usize, threshold: f64, limit: usize) -> Vec<(usize, f64)> {
    let n = prob.len();
    let h = min_seg / 2;
    let window = |t: usize| -> f64 {
        prob[t.saturating_sub(h)..(t + h + 1).min(n)]
            .iter()
            .sum::<f64>()
            .min(1.0)
    };
    let mut w: Vec<f64> = (0..n).map(window).collect();
    let mut found = Vec::new();
    while found.len() < limit {
        let peak = argmax(&w);
        if !(w[peak] >= threshold) || w[peak] <= 0.0 {
            break;
        }
        let lo = peak.saturating_sub(h);
        let hi = (peak + h + 1).min(n);
        let loc = lo + argmax(&prob[lo..hi]);
        found.push((loc, window(loc)));
        for v in &mut w[loc.saturating_sub(min_seg)..(loc + min_seg + 1).min(n)] {
            *v = f64::NEG_INFINITY;
        }
    }
    found.sort_by_key(|c| c.0);
    found
}

fn median_count(dist: &[f64]) -> usize {
    let mut acc = 0.0;
    for (k, p) in dist.iter().enumerate() {
        acc += p;
        if acc >= 0.5 - 1e-12 {
            return k;
        }
    }
    dist.len().saturating_sub(1)
}

fn normalise(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Runs all chains on `y` and reduces the pooled samples.
pub fn run_sampler(y: &TimeSeries, hyper: &Hyperparams) -> Result<PosteriorSummary> {
    let observed = y.values();
    if let Some(i) = observed.iter().position(|v| !v.is_finite()) {
        return Err(BeastError::NonFinite(i));
    }
    hyper.validate()?;
    let n = observed.len();
    let min_seg = hyper.effective_min_seg(n);
    if n < 4 * min_seg {
        return Err(BeastError::TooShort {
            needed: 4 * min_seg,
            got: n,
        });
    }
    let centre = mean(&observed);
    let sd = std_dev(&observed);
    if !(sd > 0.0) {
        return Err(BeastError::ZeroVariance);
    }
    let z: Vec<f64> = observed.iter().map(|v| (v - centre) / sd).collect();
    let sampler = StructureSampler::new(&z, hyper)?;

    let outputs = (0..hyper.chains)
        .into_par_iter()
        .map(|c| run_chain(&sampler, hyper, c))
        .collect::<Result<Vec<_>>>()?;

    let retained = hyper.samples - hyper.burn_in;
    let total = (retained * hyper.chains) as f64;
    let sum_u64 = |f: &dyn Fn(&ChainOutput) -> &Vec<u64>| -> Vec<u64> {
        let mut acc = vec![0u64; f(&outputs[0]).len()];
        for o in &outputs {
            for (a, v) in acc.iter_mut().zip(f(o)) {
                *a += v;
            }
        }
        acc
    };
    let sum_f64 = |f: &dyn Fn(&ChainOutput) -> &Vec<f64>| -> Vec<f64> {
        let mut acc = vec![0.0; n];
        for o in &outputs {
            for (a, v) in acc.iter_mut().zip(f(o)) {
                *a += v;
            }
        }
        acc
    };

    let trend_cp_prob: Vec<f64> = sum_u64(&|o| &o.trend_hits)
        .iter()
        .map(|&c| c as f64 / total)
        .collect();
    let seasonal_cp_prob: Vec<f64> = sum_u64(&|o| &o.seasonal_hits)
        .iter()
        .map(|&c| c as f64 / total)
        .collect();
    let trend_counts = sum_u64(&|o| &o.ncp_trend);
    let ncp_trend_dist = normalise(&trend_counts);
    let ncp_seasonal_dist = normalise(&sum_u64(&|o| &o.ncp_seasonal));
    let all: u64 = trend_counts.iter().sum();
    let mut tail = 0u64;
    let mut cumulative_ncp_dist = vec![0.0; trend_counts.len()];
    for k in (0..trend_counts.len()).rev() {
        tail += trend_counts[k];
        cumulative_ncp_dist[k] = tail as f64 / all as f64;
    }

    let mut slope_counts = vec![[0u64; 3]; n];
    for o in &outputs {
        for (acc, c) in slope_counts.iter_mut().zip(&o.slope) {
            for i in 0..3 {
                acc[i] += c[i];
            }
        }
    }
    let slope_sign = slope_counts
        .iter()
        .map(|c| {
            let t = (c[0] + c[1] + c[2]) as f64;
            SlopeSign {
                positive: c[0] as f64 / t,
                zero: c[1] as f64 / t,
                negative: c[2] as f64 / t,
            }
        })
        .collect();

    let trend_draws: Vec<&Vec<f64>> = outputs.iter().flat_map(|o| &o.trend_draws).collect();
    let seasonal_draws: Vec<&Vec<f64>> = outputs.iter().flat_map(|o| &o.seasonal_draws).collect();
    let fitted_trend = band(&sum_f64(&|o| &o.trend_sum), total, &trend_draws, sd, centre);
    let fitted_seasonal = band(
        &sum_f64(&|o| &o.seasonal_sum),
        total,
        &seasonal_draws,
        sd,
        0.0,
    );
    let seasonal_order: Vec<f64> = sum_f64(&|o| &o.order_sum)
        .iter()
        .map(|s| s / total)
        .collect();
    let residual = observed
        .iter()
        .zip(fitted_trend.mean.iter().zip(&fitted_seasonal.mean))
        .map(|(y, (t, s))| y - t - s)
        .collect();

    let dates = y.dates();
    let half = min_seg / 2;
    let trend_peaks = extract(
        &trend_cp_prob,
        min_seg,
        hyper.cp_prob_min,
        median_count(&ncp_trend_dist),
    );
    let extracted_cps: Vec<Changepoint> = trend_peaks
        .iter()
        .map(|&(index, probability)| {
            let (mut s, mut c) = (0.0, 0usize);
            for o in &outputs {
                for &(k, j) in &o.knot_jumps {
                    if k.abs_diff(index) <= half {
                        s += j;
                        c += 1;
                    }
                }
            }
            Changepoint {
                index,
                date: dates[index],
                probability,
                jump: if c > 0 { sd * s / c as f64 } else { 0.0 },
            }
        })
        .collect();
    let jumps = extracted_cps.iter().map(|c| c.jump).collect();
    let extracted_seasonal_cps = extract(
        &seasonal_cp_prob,
        min_seg,
        hyper.cp_prob_min,
        median_count(&ncp_seasonal_dist),
    )
    .into_iter()
    .map(|(index, probability)| Changepoint {
        index,
        date: dates[index],
        probability,
        jump: 0.0,
    })
    .collect();

    let traces: Vec<Vec<f64>> = outputs.iter().map(|o| o.log_evidence.clone()).collect();
    let rhat = split_rhat(&traces);
    let converged = rhat.is_finite() && rhat <= 1.2 || !hyper.options.likelihood;
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "not converged: split potential scale reduction of the log evidence is {rhat:.3}"
        ));
    }
    if sampler.cp_max() < hyper.cp_max {
        warnings.push(format!(
            "at most {} changepoints fit with minimum segment {min_seg}",
            sampler.cp_max()
        ));
    }
    if sampler.order_max() < hyper.order_max && hyper.season_mode == SeasonMode::Harmonic {
        warnings.push(format!(
            "harmonic order capped at {} by the period",
            sampler.order_max()
        ));
    }
    let moves = MoveKind::ALL
        .iter()
        .enumerate()
        .map(|(i, &kind)| MoveStats {
            kind,
            proposed: outputs.iter().map(|o| o.moves[i].0).sum(),
            accepted: outputs.iter().map(|o| o.moves[i].1).sum(),
        })
        .collect();

    Ok(PosteriorSummary {
        series_id: y.id().to_string(),
        dates,
        observed,
        season_mode: hyper.season_mode,
        trend_cp_prob,
        seasonal_cp_prob,
        ncp_trend_dist,
        ncp_seasonal_dist,
        cumulative_ncp_dist,
        slope_sign,
        fitted_trend,
        fitted_seasonal,
        seasonal_order,
        residual,
        extracted_cps,
        extracted_seasonal_cps,
        jumps,
        diagnostics: Diagnostics {
            chains: hyper.chains,
            retained_per_chain: retained,
            rhat,
            converged,
            min_seg,
            cp_max_effective: sampler.cp_max(),
            order_max_effective: sampler.order_max(),
            moves,
            warnings,
        },
    })
}

/// Stored (positive, zero, negative) slope probabilities at `t`.
pub fn classify_slope_sign(summary: &PosteriorSummary, t: usize) -> Result<(f64, f64, f64)> {
    let s = summary.slope_sign.get(t).ok_or(BeastError::OutOfAxis {
        index: t,
        len: summary.slope_sign.len(),
    })?;
    Ok((s.positive, s.zero, s.negative))
}

/// Pearson matrix of the posterior-mean trend curves.
pub fn trend_correlation_matrix(summaries: &[PosteriorSummary]) -> Result<CorrelationMatrix> {
    if let Some(first) = summaries.first() {
        if summaries.iter().any(|s| s.dates != first.dates) {
            return Err(BeastError::AxisMismatch);
        }
    }
    let rows: Vec<(String, Vec<f64>)> = summaries
        .iter()
        .map(|s| (s.series_id.clone(), s.fitted_trend.mean.clone()))
        .collect();
    Ok(pearson_correlation_matrix(&rows)?)
}

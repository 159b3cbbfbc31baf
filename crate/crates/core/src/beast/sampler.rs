//! Reversible-jump structure moves on the collapsed posterior, followed by
//! Gibbs refreshes of the coefficients, noise variance and ν.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use super::basis::{self, backward, posterior, Basis, Conjugate, Posterior};
use super::{BeastError, GammaPrior, Hyperparams, ModelStructure, Result, SeasonMode};

/// Switches used by tests and diagnostics to reduce the sampler to simpler
/// special cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerOptions {
    /// When false the structure never changes.
    pub structure_moves: bool,
    /// When false the evidence is treated as constant, so the chain samples
    /// the structural prior.
    pub likelihood: bool,
    /// Holds ν at this value instead of sampling it.
    pub fixed_nu: Option<f64>,
    /// Anneals the likelihood over the first half of burn-in so chains can
    /// leave poor starting configurations.
    pub anneal: bool,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            structure_moves: true,
            likelihood: true,
            fixed_nu: None,
            anneal: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    TrendBirth,
    TrendDeath,
    TrendMove,
    TrendMerge,
    TrendSplit,
    SeasonalBirth,
    SeasonalDeath,
    SeasonalMove,
    OrderChange,
}

impl MoveKind {
    pub const ALL: [MoveKind; 9] = [
        MoveKind::TrendBirth,
        MoveKind::TrendDeath,
        MoveKind::TrendMove,
        MoveKind::TrendMerge,
        MoveKind::TrendSplit,
        MoveKind::SeasonalBirth,
        MoveKind::SeasonalDeath,
        MoveKind::SeasonalMove,
        MoveKind::OrderChange,
    ];

    pub fn index(self) -> usize {
        MoveKind::ALL.iter().position(|&k| k == self).unwrap_or(0)
    }
}

/// A concrete structure change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proposal {
    TrendBirth {
        at: usize,
    },
    TrendDeath {
        index: usize,
    },
    TrendMove {
        index: usize,
        to: usize,
    },
    /// Replaces knots `index` and `index + 1` by one knot at `at`.
    TrendMerge {
        index: usize,
        at: usize,
    },
    /// Replaces knot `index` by the pair `left`, `right` around it.
    TrendSplit {
        index: usize,
        left: usize,
        right: usize,
    },
    /// The new knot splits a segment; the right half gets `order`.
    SeasonalBirth {
        at: usize,
        order: usize,
    },
    /// Merges segments `index` and `index + 1`, keeping the left order.
    SeasonalDeath {
        index: usize,
    },
    SeasonalMove {
        index: usize,
        to: usize,
    },
    OrderChange {
        segment: usize,
        order: usize,
    },
}

/// Coefficients in standardised units per observation step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SegmentCoefficients {
    /// (level at segment start, slope per step) per trend segment.
    pub trend: Vec<(f64, f64)>,
    /// (sine, cosine) amplitudes per seasonal segment and harmonic.
    pub seasonal: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub structure: ModelStructure,
    pub coefficients: SegmentCoefficients,
    pub sigma2: f64,
    pub nu: f64,
    /// Collapsed log evidence of the current structure at the current ν.
    pub log_evidence: f64,
    post: Option<Posterior>,
}

/// Everything needed to advance chains on one (already scaled) series.
#[derive(Debug, Clone)]
pub struct StructureSampler {
    n: usize,
    basis: Basis,
    min_seg: usize,
    cp_max: usize,
    order_max: usize,
    period: f64,
    mode: SeasonMode,
    conj: Conjugate,
    nu_prior: GammaPrior,
    options: SamplerOptions,
    ln_configs: Vec<f64>,
    /// sin and cos of each harmonic at each time, harmonic-major.
    harmonics: Vec<Vec<f64>>,
}

/// Largest harmonic order strictly below the Nyquist rate of the period.
pub(crate) fn order_limit(period: f64, order_max: usize) -> usize {
    let nyquist = ((period - 1e-9) / 2.0).floor() as usize;
    order_max.min(nyquist).max(1)
}

impl StructureSampler {
    /// Builds a sampler for `y` exactly as given; `run_sampler` standardises
    /// before calling this.
    pub fn new(y: &[f64], hyper: &Hyperparams) -> Result<Self> {
        hyper.validate()?;
        let n = y.len();
        let min_seg = hyper.effective_min_seg(n);
        if n < 4 * min_seg {
            return Err(BeastError::TooShort {
                needed: 4 * min_seg,
                got: n,
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(BeastError::NonFinite(i));
        }
        let cp_max = hyper.cp_max.min(n / min_seg - 1);
        let order_max = order_limit(hyper.period, hyper.order_max);
        let ln_configs = (0..=cp_max)
            .map(|m| ln_binomial((n + m - (m + 1) * min_seg) as u64, m as u64))
            .collect();
        let harmonics = (1..=order_max)
            .flat_map(|l| {
                let w = 2.0 * std::f64::consts::PI * l as f64 / hyper.period;
                [
                    (0..n).map(|t| (w * t as f64).sin()).collect(),
                    (0..n).map(|t| (w * t as f64).cos()).collect(),
                ]
            })
            .collect();
        Ok(StructureSampler {
            n,
            basis: Basis::new(y, hyper.period, order_max),
            min_seg,
            cp_max,
            order_max,
            period: hyper.period,
            mode: hyper.season_mode,
            conj: Conjugate {
                a0: hyper.sigma2_prior.shape,
                b0: hyper.sigma2_prior.scale,
            },
            nu_prior: hyper.nu_prior,
            options: hyper.options,
            ln_configs,
            harmonics,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn min_seg(&self) -> usize {
        self.min_seg
    }

    /// Knot-count ceiling after accounting for the minimum segment length.
    pub fn cp_max(&self) -> usize {
        self.cp_max
    }

    pub fn order_max(&self) -> usize {
        self.order_max
    }

    pub fn season_mode(&self) -> SeasonMode {
        self.mode
    }

    /// Collapsed log evidence of a structure at precision scale `nu`.
    pub fn log_marginal_likelihood(&self, s: &ModelStructure, nu: f64) -> Result<f64> {
        self.check(s)?;
        Ok(posterior(&self.basis, s, nu, self.conj)?.log_evidence)
    }

    fn check(&self, s: &ModelStructure) -> Result<()> {
        s.validate(self.n, self.min_seg, self.cp_max, self.order_max)
    }

    fn evaluate(&self, s: &ModelStructure, nu: f64) -> Result<Option<Posterior>> {
        if self.options.likelihood {
            posterior(&self.basis, s, nu, self.conj).map(Some)
        } else {
            Ok(None)
        }
    }

    /// A state at the given structure with coefficients at their
    /// conditional posterior mean.
    pub fn state_for(&self, structure: ModelStructure, nu: f64) -> Result<ChainState> {
        self.check(&structure)?;
        let post = self.evaluate(&structure, nu)?;
        let (coefficients, sigma2, log_evidence) = match &post {
            Some(p) => (
                self.unpack(&structure, &p.mean),
                p.b_n / (p.a_n - 1.0).max(1.0),
                p.log_evidence,
            ),
            None => (
                self.unpack(&structure, &vec![0.0; structure.n_columns()]),
                1.0,
                0.0,
            ),
        };
        Ok(ChainState {
            structure,
            coefficients,
            sigma2,
            nu,
            log_evidence,
            post,
        })
    }

    /// Chain 0 starts from the simplest model; the others from random
    /// structures with about half the admissible knots.
    pub fn initial_state<R: Rng + ?Sized>(&self, chain: usize, rng: &mut R) -> Result<ChainState> {
        let nu = self.options.fixed_nu.unwrap_or(1.0);
        let mut s = ModelStructure::simplest(self.period, self.mode);
        if chain > 0 && self.options.structure_moves {
            let half = self.cp_max / 2;
            s.trend_knots = self.random_knots(half, rng);
            if self.mode == SeasonMode::Harmonic {
                s.seasonal_knots = self.random_knots(half, rng);
                s.harmonic_orders = (0..=s.seasonal_knots.len())
                    .map(|_| rng.gen_range(1..=self.order_max))
                    .collect();
            }
        }
        self.state_for(s, nu)
    }

    /// Uniform draw over admissible placements of `m` knots.
    fn random_knots<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<usize> {
        let free = self.n - (m + 1) * self.min_seg;
        let mut picks = index::sample(rng, free + m, m).into_vec();
        picks.sort_unstable();
        picks
            .iter()
            .enumerate()
            .map(|(j, &c)| (j + 1) * self.min_seg + c - j)
            .collect()
    }

    /// Number of admissible birth positions given the current knots.
    pub fn birth_slots(&self, knots: &[usize]) -> usize {
        basis::segments(knots, self.n)
            .map(|(a, b)| (b - a + 1).saturating_sub(2 * self.min_seg))
            .sum()
    }

    fn nth_birth_slot(&self, knots: &[usize], mut r: usize) -> usize {
        for (a, b) in basis::segments(knots, self.n) {
            let c = (b - a + 1).saturating_sub(2 * self.min_seg);
            if r < c {
                return a + self.min_seg + r;
            }
            r -= c;
        }
        unreachable!("birth slot index out of range")
    }

    fn ln_c(&self, m: usize) -> f64 {
        self.ln_configs[m]
    }

    /// Number of admissible (left, right) pairs that can replace knot `i`.
    fn split_pairs(&self, knots: &[usize], i: usize) -> usize {
        let (lo, hi) = self.bounds(knots, i);
        let c = knots[i];
        (lo..=c.min(hi))
            .map(|a| (hi + 1).saturating_sub(c.max(a + self.min_seg)))
            .sum()
    }

    fn bounds(&self, knots: &[usize], i: usize) -> (usize, usize) {
        let lo = if i == 0 { 0 } else { knots[i - 1] } + self.min_seg;
        let hi = knots.get(i + 1).copied().unwrap_or(self.n) - self.min_seg;
        (lo, hi)
    }

    /// Draws a concrete proposal of the given kind, or `None` when the kind
    /// has no admissible target from this state.
    pub fn propose<R: Rng + ?Sized>(
        &self,
        s: &ModelStructure,
        kind: MoveKind,
        rng: &mut R,
    ) -> Option<Proposal> {
        let seasonal = self.mode == SeasonMode::Harmonic;
        let birth = |knots: &[usize], rng: &mut R| {
            let slots = self.birth_slots(knots);
            (knots.len() < self.cp_max && slots > 0)
                .then(|| self.nth_birth_slot(knots, rng.gen_range(0..slots)))
        };
        let shift = |knots: &[usize], rng: &mut R| -> Option<(usize, usize)> {
            if knots.is_empty() {
                return None;
            }
            let i = rng.gen_range(0..knots.len());
            let (lo, hi) = self.bounds(knots, i);
            let to = if rng.gen_bool(0.5) {
                let r = (self.min_seg / 4).max(1) as i64;
                let mut d = rng.gen_range(-r..r);
                if d >= 0 {
                    d += 1;
                }
                knots[i] as i64 + d
            } else {
                rng.gen_range(lo as i64..=hi as i64)
            };
            (to >= lo as i64 && to <= hi as i64 && to as usize != knots[i])
                .then_some((i, to as usize))
        };
        match kind {
            MoveKind::TrendBirth => {
                birth(&s.trend_knots, rng).map(|at| Proposal::TrendBirth { at })
            }
            MoveKind::TrendDeath => (!s.trend_knots.is_empty()).then(|| Proposal::TrendDeath {
                index: rng.gen_range(0..s.trend_knots.len()),
            }),
            MoveKind::TrendMove => {
                shift(&s.trend_knots, rng).map(|(index, to)| Proposal::TrendMove { index, to })
            }
            MoveKind::TrendMerge => {
                let k = &s.trend_knots;
                if k.len() < 2 {
                    return None;
                }
                let index = rng.gen_range(0..k.len() - 1);
                let at = rng.gen_range(k[index]..=k[index + 1]);
                Some(Proposal::TrendMerge { index, at })
            }
            MoveKind::TrendSplit => {
                let k = &s.trend_knots;
                if k.is_empty() || k.len() >= self.cp_max {
                    return None;
                }
                let index = rng.gen_range(0..k.len());
                if self.split_pairs(k, index) == 0 {
                    return None;
                }
                let (lo, hi) = self.bounds(k, index);
                let c = k[index];
                // uniform over admissible pairs by rejection
                loop {
                    let left = rng.gen_range(lo..=c);
                    let right = rng.gen_range(c..=hi);
                    if right >= left + self.min_seg {
                        return Some(Proposal::TrendSplit { index, left, right });
                    }
                }
            }
            _ if !seasonal => None,
            MoveKind::SeasonalBirth => {
                let at = birth(&s.seasonal_knots, rng)?;
                let order = rng.gen_range(1..=self.order_max);
                Some(Proposal::SeasonalBirth { at, order })
            }
            MoveKind::SeasonalDeath => {
                (!s.seasonal_knots.is_empty()).then(|| Proposal::SeasonalDeath {
                    index: rng.gen_range(0..s.seasonal_knots.len()),
                })
            }
            MoveKind::SeasonalMove => shift(&s.seasonal_knots, rng)
                .map(|(index, to)| Proposal::SeasonalMove { index, to }),
            MoveKind::OrderChange => {
                let segment = rng.gen_range(0..s.harmonic_orders.len());
                let cur = s.harmonic_orders[segment];
                let order = if rng.gen_bool(0.5) {
                    cur + 1
                } else {
                    cur.wrapping_sub(1)
                };
                (1..=self.order_max)
                    .contains(&order)
                    .then_some(Proposal::OrderChange { segment, order })
            }
        }
    }

    /// Applies a proposal to a structure and returns the log of the
    /// prior-times-proposal ratio, excluding the likelihood.
    pub fn apply(&self, s: &ModelStructure, p: Proposal) -> Option<(ModelStructure, f64)> {
        let mut t = s.clone();
        let ratio = match p {
            Proposal::TrendBirth { at } => {
                let m = s.trend_knots.len();
                let slots = self.birth_slots(&s.trend_knots);
                if m >= self.cp_max || slots == 0 {
                    return None;
                }
                let pos = s.trend_knots.partition_point(|&k| k < at);
                t.trend_knots.insert(pos, at);
                self.ln_c(m) - self.ln_c(m + 1) + (slots as f64).ln() - ((m + 1) as f64).ln()
            }
            Proposal::TrendDeath { index } => {
                let m = s.trend_knots.len();
                if index >= m {
                    return None;
                }
                t.trend_knots.remove(index);
                let slots = self.birth_slots(&t.trend_knots);
                self.ln_c(m) - self.ln_c(m - 1) + (m as f64).ln() - (slots as f64).ln()
            }
            Proposal::TrendMove { index, to } => {
                *t.trend_knots.get_mut(index)? = to;
                0.0
            }
            Proposal::TrendMerge { index, at } => {
                let m = s.trend_knots.len();
                if index + 1 >= m {
                    return None;
                }
                let (a, b) = (s.trend_knots[index], s.trend_knots[index + 1]);
                if at < a || at > b {
                    return None;
                }
                t.trend_knots.splice(index..index + 2, [at]);
                let pairs = self.split_pairs(&t.trend_knots, index);
                self.ln_c(m) - self.ln_c(m - 1) + ((b - a + 1) as f64).ln() - (pairs as f64).ln()
            }
            Proposal::TrendSplit { index, left, right } => {
                let m = s.trend_knots.len();
                if index >= m || m >= self.cp_max {
                    return None;
                }
                let (lo, hi) = self.bounds(&s.trend_knots, index);
                let c = s.trend_knots[index];
                if left < lo || right > hi || left > c || right < c || right < left + self.min_seg {
                    return None;
                }
                let pairs = self.split_pairs(&s.trend_knots, index);
                t.trend_knots.splice(index..index + 1, [left, right]);
                self.ln_c(m) - self.ln_c(m + 1) + (pairs as f64).ln()
                    - ((right - left + 1) as f64).ln()
            }
            Proposal::SeasonalBirth { at, order } => {
                let p = s.seasonal_knots.len();
                let slots = self.birth_slots(&s.seasonal_knots);
                if p >= self.cp_max || slots == 0 || order == 0 || order > self.order_max {
                    return None;
                }
                let pos = s.seasonal_knots.partition_point(|&k| k < at);
                t.seasonal_knots.insert(pos, at);
                t.harmonic_orders.insert(pos + 1, order);
                // The new segment's order prior and its proposal draw are both
                // uniform on 1..=order_max, so they cancel.
                self.ln_c(p) - self.ln_c(p + 1) + (slots as f64).ln() - ((p + 1) as f64).ln()
            }
            Proposal::SeasonalDeath { index } => {
                let p = s.seasonal_knots.len();
                if index >= p {
                    return None;
                }
                t.seasonal_knots.remove(index);
                t.harmonic_orders.remove(index + 1);
                let slots = self.birth_slots(&t.seasonal_knots);
                self.ln_c(p) - self.ln_c(p - 1) + (p as f64).ln() - (slots as f64).ln()
            }
            Proposal::SeasonalMove { index, to } => {
                *t.seasonal_knots.get_mut(index)? = to;
                0.0
            }
            Proposal::OrderChange { segment, order } => {
                if order == 0 || order > self.order_max {
                    return None;
                }
                *t.harmonic_orders.get_mut(segment)? = order;
                0.0
            }
        };
        self.check(&t).ok()?;
        Some((t, ratio))
    }

    /// Full Metropolis–Hastings log acceptance ratio of a proposal.
    pub fn log_acceptance(&self, state: &ChainState, p: Proposal) -> Option<f64> {
        let (t, ratio) = self.apply(&state.structure, p)?;
        let post = self.evaluate(&t, state.nu).ok()?;
        let lr = post.map_or(0.0, |q| q.log_evidence - state.log_evidence);
        Some(lr + ratio)
    }

    /// One sweep: a structure move, then the Gibbs block. Returns the kind
    /// attempted and whether it was accepted.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        rng: &mut R,
    ) -> Option<(MoveKind, bool)> {
        self.step_tempered(state, rng, 1.0)
    }

    /// As [`step`](Self::step) with the evidence ratio raised to `heat`.
    /// Only `heat == 1` targets the posterior.
    pub fn step_tempered<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        rng: &mut R,
        heat: f64,
    ) -> Option<(MoveKind, bool)> {
        let mut outcome = None;
        if self.options.structure_moves {
            let kinds = if self.mode == SeasonMode::Harmonic {
                9
            } else {
                5
            };
            let kind = MoveKind::ALL[rng.gen_range(0..kinds)];
            let mut accepted = false;
            if let Some(p) = self.propose(&state.structure, kind, rng) {
                if let Some((t, ratio)) = self.apply(&state.structure, p) {
                    if let Ok(post) = self.evaluate(&t, state.nu) {
                        let lr = post
                            .as_ref()
                            .map_or(0.0, |q| q.log_evidence - state.log_evidence);
                        let u: f64 = rng.gen();
                        if u.ln() < heat * lr + ratio {
                            state.log_evidence = post.as_ref().map_or(0.0, |q| q.log_evidence);
                            state.structure = t;
                            state.post = post;
                            accepted = true;
                        }
                    }
                }
            }
            outcome = Some((kind, accepted));
        }
        self.gibbs(state, rng);
        outcome
    }

    fn gibbs<R: Rng + ?Sized>(&self, state: &mut ChainState, rng: &mut R) {
        let Some(post) = &state.post else {
            return;
        };
        let g = Gamma::new(post.a_n, 1.0).expect("positive shape");
        let sigma2 = post.b_n / g.sample(rng);
        let k = post.k;
        let mut z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        backward(&post.chol, k, &mut z);
        let sigma = sigma2.sqrt();
        let beta: Vec<f64> = post
            .mean
            .iter()
            .zip(&z)
            .map(|(m, e)| m + sigma * e)
            .collect();
        state.sigma2 = sigma2;
        state.coefficients = self.unpack(&state.structure, &beta);
        if self.options.fixed_nu.is_none() {
            let ss: f64 = beta.iter().map(|b| b * b).sum();
            let shape = self.nu_prior.shape + k as f64 / 2.0;
            let rate = self.nu_prior.rate + ss / (2.0 * sigma2);
            let nu = Gamma::new(shape, 1.0 / rate)
                .expect("positive gamma")
                .sample(rng);
            // Guard against a degenerate draw collapsing the ridge.
            let nu = nu.clamp(1e-12, 1e12);
            if let Ok(p) = posterior(&self.basis, &state.structure, nu, self.conj) {
                state.nu = nu;
                state.log_evidence = p.log_evidence;
                state.post = Some(p);
            }
        }
    }

    fn unpack(&self, s: &ModelStructure, beta: &[f64]) -> SegmentCoefficients {
        let m = s.trend_knots.len() + 1;
        let trend = (0..m).map(|j| (beta[2 * j], beta[2 * j + 1])).collect();
        let mut seasonal = Vec::new();
        if s.season_mode == SeasonMode::Harmonic {
            let mut pos = 2 * m;
            for &l in &s.harmonic_orders {
                seasonal.push(
                    (0..l)
                        .map(|h| (beta[pos + 2 * h], beta[pos + 2 * h + 1]))
                        .collect(),
                );
                pos += 2 * l;
            }
        }
        SegmentCoefficients { trend, seasonal }
    }

    /// Trend curve of a state, in the sampler's units.
    pub fn trend_curve(&self, state: &ChainState) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        for ((a, b), &(level, slope)) in
            basis::segments(&state.structure.trend_knots, self.n).zip(&state.coefficients.trend)
        {
            out.extend((a..b).map(|t| level + slope * (t - a) as f64));
        }
        out
    }

    /// Seasonal curve of a state, in the sampler's units.
    pub fn seasonal_curve(&self, state: &ChainState) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        if state.structure.season_mode == SeasonMode::None {
            return out;
        }
        for ((a, b), amps) in basis::segments(&state.structure.seasonal_knots, self.n)
            .zip(&state.coefficients.seasonal)
        {
            for (h, &(sa, ca)) in amps.iter().enumerate() {
                let (sin, cos) = (&self.harmonics[2 * h], &self.harmonics[2 * h + 1]);
                for t in a..b {
                    out[t] += sa * sin[t] + ca * cos[t];
                }
            }
        }
        out
    }
}

/// Advances a chain by one sweep and returns the new state.
pub fn rjmcmc_step<R: Rng + ?Sized>(
    sampler: &StructureSampler,
    state: &ChainState,
    rng: &mut R,
) -> ChainState {
    let mut next = state.clone();
    sampler.step(&mut next, rng);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        crate::synth::white_noise(n, 1.0, seed)
    }

    fn hyper() -> Hyperparams {
        Hyperparams {
            min_seg: Some(10),
            ..Hyperparams::default()
        }
    }

    #[test]
    fn knot_count_ceiling_respects_spacing() {
        let s = StructureSampler::new(&noise(100, 1), &hyper()).unwrap();
        assert_eq!(s.cp_max(), 9);
        assert_eq!(s.order_max(), 3);
    }

    #[test]
    fn birth_slots_count() {
        let s = StructureSampler::new(&noise(100, 1), &hyper()).unwrap();
        assert_eq!(s.birth_slots(&[]), 81);
        assert_eq!(s.birth_slots(&[50]), 31 + 31);
        assert_eq!(s.birth_slots(&[10, 20, 30, 40, 50, 60, 70, 80, 90]), 0);
    }

    #[test]
    fn split_pair_count_matches_enumeration() {
        let s = StructureSampler::new(&noise(200, 1), &hyper()).unwrap();
        let knots = [30, 55, 120, 150];
        for i in 0..knots.len() {
            let (lo, hi) = s.bounds(&knots, i);
            let mut brute = 0;
            for a in lo..=hi {
                for b in a..=hi {
                    if a <= knots[i] && knots[i] <= b && b >= a + 10 {
                        brute += 1;
                    }
                }
            }
            assert_eq!(s.split_pairs(&knots, i), brute, "knot {i}");
        }
    }

    #[test]
    fn random_knots_are_admissible() {
        let s = StructureSampler::new(&noise(200, 1), &hyper()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in 0..=s.cp_max() {
            for _ in 0..20 {
                let k = s.random_knots(m, &mut rng);
                let st = ModelStructure {
                    trend_knots: k,
                    ..ModelStructure::simplest(7.0, SeasonMode::None)
                };
                st.validate(200, 10, s.cp_max(), 3).unwrap();
            }
        }
    }

    #[test]
    fn birth_death_reciprocity() {
        let y: Vec<f64> = noise(300, 4)
            .iter()
            .enumerate()
            .map(|(t, v)| v + if t > 150 { 2.0 } else { 0.0 } + (t as f64 * 0.9).sin())
            .collect();
        let s = StructureSampler::new(&y, &hyper()).unwrap();
        let base = ModelStructure {
            trend_knots: vec![80],
            seasonal_knots: vec![120],
            harmonic_orders: vec![2, 1],
            period: 7.0,
            season_mode: SeasonMode::Harmonic,
        };
        let state = s.state_for(base.clone(), 0.8).unwrap();
        let cases = [
            (
                Proposal::TrendBirth { at: 200 },
                Proposal::TrendDeath { index: 1 },
            ),
            (
                Proposal::SeasonalBirth { at: 40, order: 3 },
                Proposal::SeasonalDeath { index: 0 },
            ),
            (
                Proposal::TrendMove { index: 0, to: 95 },
                Proposal::TrendMove { index: 0, to: 80 },
            ),
            (
                Proposal::TrendSplit {
                    index: 0,
                    left: 62,
                    right: 91,
                },
                Proposal::TrendMerge { index: 0, at: 80 },
            ),
            (
                Proposal::OrderChange {
                    segment: 1,
                    order: 2,
                },
                Proposal::OrderChange {
                    segment: 1,
                    order: 1,
                },
            ),
        ];
        for (fwd, rev) in cases {
            let there = s.log_acceptance(&state, fwd).unwrap();
            let (t, _) = s.apply(&base, fwd).unwrap();
            let other = s.state_for(t, 0.8).unwrap();
            let back = s.log_acceptance(&other, rev).unwrap();
            assert!((there + back).abs() < 1e-9, "{fwd:?}: {there} + {back}");
        }
    }

    #[test]
    fn invalid_proposals_rejected() {
        let s = StructureSampler::new(&noise(100, 2), &hyper()).unwrap();
        let st = s
            .state_for(ModelStructure::simplest(7.0, SeasonMode::Harmonic), 1.0)
            .unwrap();
        assert!(s
            .log_acceptance(&st, Proposal::TrendBirth { at: 5 })
            .is_none());
        assert!(s
            .log_acceptance(&st, Proposal::TrendDeath { index: 0 })
            .is_none());
        assert!(s
            .log_acceptance(
                &st,
                Proposal::OrderChange {
                    segment: 0,
                    order: 4
                }
            )
            .is_none());
    }

    #[test]
    fn white_noise_prefers_no_knots() {
        let y = noise(300, 11);
        let h = Hyperparams {
            season_mode: SeasonMode::None,
            ..hyper()
        };
        let s = StructureSampler::new(&y, &h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut st = s.initial_state(0, &mut rng).unwrap();
        let mut occupancy = vec![0usize; s.cp_max() + 1];
        for _ in 0..5000 {
            s.step(&mut st, &mut rng);
            occupancy[st.structure.trend_knots.len()] += 1;
        }
        let best = occupancy[1..].iter().max().copied().unwrap_or(0);
        assert!(occupancy[0] > best, "{occupancy:?}");
    }

    #[test]
    fn conjugate_reduction_matches_closed_form() {
        let n = 200;
        let y: Vec<f64> = noise(n, 21)
            .iter()
            .enumerate()
            .map(|(t, v)| 1.0 + 3.0 * t as f64 / n as f64 + 0.5 * v)
            .collect();
        let nu = 0.5;
        let h = Hyperparams {
            season_mode: SeasonMode::None,
            options: SamplerOptions {
                structure_moves: false,
                likelihood: true,
                fixed_nu: Some(nu),
                anneal: false,
            },
            ..hyper()
        };
        let s = StructureSampler::new(&y, &h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut st = s.initial_state(0, &mut rng).unwrap();

        // closed form from a dense solve
        let x = crate::beast::design_matrix(&st.structure, n).unwrap();
        let a = x.transpose() * &x + nalgebra::DMatrix::identity(2, 2) * nu;
        let yv = nalgebra::DVector::from_vec(y.clone());
        let ainv = a.clone().try_inverse().unwrap();
        let mean = &ainv * (x.transpose() * &yv);
        let an = h.sigma2_prior.shape + n as f64 / 2.0;
        let bn = h.sigma2_prior.scale + 0.5 * (yv.dot(&yv) - mean.dot(&(&a * &mean)));
        let scale = bn / (an - 1.0);

        let draws = 20_000;
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..draws {
            s.step(&mut st, &mut rng);
            let (l, b) = st.coefficients.trend[0];
            for (i, v) in [l, b].into_iter().enumerate() {
                sum[i] += v;
                sq[i] += v * v;
            }
        }
        for i in 0..2 {
            let m = sum[i] / draws as f64;
            let var = sq[i] / draws as f64 - m * m;
            let want_var = scale * ainv[(i, i)];
            let se = (want_var / draws as f64).sqrt();
            assert!(
                (m - mean[i]).abs() < 3.0 * se,
                "coef {i}: {m} vs {}",
                mean[i]
            );
            // variance of a sample variance for a near-normal variable
            let var_se = want_var * (2.0 / draws as f64).sqrt() * 1.2;
            assert!(
                (var - want_var).abs() < 3.0 * var_se,
                "var {i}: {var} vs {want_var}"
            );
        }
    }

    #[test]
    fn prior_only_chain_is_uniform_on_counts() {
        let h = Hyperparams {
            season_mode: SeasonMode::None,
            options: SamplerOptions {
                structure_moves: true,
                likelihood: false,
                fixed_nu: None,
                anneal: false,
            },
            // a ceiling well below n / min_seg keeps every count reachable
            // through many configurations
            cp_max: 8,
            ..hyper()
        };
        let s = StructureSampler::new(&noise(300, 1), &h).unwrap();
        assert_eq!(s.cp_max(), 8);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut st = s.initial_state(0, &mut rng).unwrap();
        let cells = s.cp_max() + 1;
        let mut counts = vec![0usize; cells];
        let thin = 500;
        for i in 0..(thin * 1000) {
            s.step(&mut st, &mut rng);
            if i % thin == thin - 1 {
                counts[st.structure.trend_knots.len()] += 1;
            }
        }
        let expected = 1000.0 / cells as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let crit = ChiSquared::new((cells - 1) as f64)
            .unwrap()
            .inverse_cdf(0.99);
        assert!(chi2 < crit, "chi2 {chi2} >= {crit}: {counts:?}");
    }
}

//! Bayesian model averaging over piecewise-linear trend plus
//! piecewise-harmonic seasonal decompositions.
//!
//! The number and location of changepoints in both components are unknown
//! and sampled by reversible-jump moves on the collapsed (coefficients and
//! noise variance integrated out) posterior. Coefficients, noise variance and
//! the prior precision scale ν are then refreshed by Gibbs draws so that
//! every retained sample carries a full fitted curve.
//!
//! Internally the response is standardised, which makes the ridge prior and
//! the zero-slope rule scale free. Slopes are per observation step. All
//! reported curves and jumps are mapped back to the original units.

mod basis;
mod sampler;
mod summary;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{SeriesError, TimeSeries};

pub use basis::design_matrix;
pub use sampler::{
    rjmcmc_step, ChainState, MoveKind, Proposal, SamplerOptions, SegmentCoefficients,
    StructureSampler,
};
pub use summary::{
    classify_slope_sign, run_sampler, trend_correlation_matrix, Band, Changepoint, Diagnostics,
    PosteriorSummary, SlopeSign,
};

#[derive(Debug, Error)]
pub enum BeastError {
    #[error("a segment is shorter than its own column count")]
    SingularSegment,
    #[error("evidence underflowed in the log domain")]
    NumericalUnderflow,
    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("invalid structure: {0}")]
    InvalidStructure(String),
    #[error("time index {index} is outside an axis of length {len}")]
    OutOfAxis { index: usize, len: usize },
    #[error("summaries do not share a date axis")]
    AxisMismatch,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

pub type Result<T> = std::result::Result<T, BeastError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonMode {
    #[default]
    Harmonic,
    None,
}

/// Changepoint configuration of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStructure {
    /// Interior indices where a new trend segment starts.
    pub trend_knots: Vec<usize>,
    /// Interior indices where a new seasonal segment starts.
    pub seasonal_knots: Vec<usize>,
    /// Harmonic order of each seasonal segment.
    pub harmonic_orders: Vec<usize>,
    /// Observations per seasonal cycle.
    pub period: f64,
    pub season_mode: SeasonMode,
}

impl ModelStructure {
    /// One trend line and, in harmonic mode, a first-order season.
    pub fn simplest(period: f64, season_mode: SeasonMode) -> Self {
        ModelStructure {
            trend_knots: Vec::new(),
            seasonal_knots: Vec::new(),
            harmonic_orders: vec![1],
            period,
            season_mode,
        }
    }

    pub fn n_columns(&self) -> usize {
        let trend = 2 * (self.trend_knots.len() + 1);
        match self.season_mode {
            SeasonMode::Harmonic => trend + 2 * self.harmonic_orders.iter().sum::<usize>(),
            SeasonMode::None => trend,
        }
    }

    pub(crate) fn check_segment_sizes(&self, n: usize) -> Result<()> {
        let check = |knots: &[usize]| -> Result<()> {
            let mut prev = 0;
            for &k in knots {
                if k <= prev || k >= n {
                    return Err(BeastError::InvalidStructure(format!(
                        "knot {k} is not strictly inside (0, {n}) and increasing"
                    )));
                }
                prev = k;
            }
            Ok(())
        };
        check(&self.trend_knots)?;
        if basis::segments(&self.trend_knots, n).any(|(a, b)| b - a < 2) {
            return Err(BeastError::SingularSegment);
        }
        if self.season_mode == SeasonMode::Harmonic {
            check(&self.seasonal_knots)?;
            if self.harmonic_orders.len() != self.seasonal_knots.len() + 1 {
                return Err(BeastError::InvalidStructure(
                    "one harmonic order is required per seasonal segment".into(),
                ));
            }
            if self.harmonic_orders.contains(&0) {
                return Err(BeastError::InvalidStructure("harmonic order 0".into()));
            }
            let short = basis::segments(&self.seasonal_knots, n)
                .zip(&self.harmonic_orders)
                .any(|((a, b), &l)| b - a < 2 * l);
            if short {
                return Err(BeastError::SingularSegment);
            }
        }
        Ok(())
    }

    /// Full invariant check against the hyperparameters in force.
    pub fn validate(
        &self,
        n: usize,
        min_seg: usize,
        cp_max: usize,
        order_max: usize,
    ) -> Result<()> {
        self.check_segment_sizes(n)?;
        let spaced = |knots: &[usize]| basis::segments(knots, n).all(|(a, b)| b - a >= min_seg);
        if !spaced(&self.trend_knots) || self.trend_knots.len() > cp_max {
            return Err(BeastError::InvalidStructure(
                "trend knots violate spacing or count".into(),
            ));
        }
        if self.season_mode == SeasonMode::Harmonic {
            if !spaced(&self.seasonal_knots) || self.seasonal_knots.len() > cp_max {
                return Err(BeastError::InvalidStructure(
                    "seasonal knots violate spacing or count".into(),
                ));
            }
            if self.harmonic_orders.iter().any(|&l| l > order_max) {
                return Err(BeastError::InvalidStructure(
                    "harmonic order above maximum".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub cp_max: usize,
    /// Minimum segment length; `None` means `max(10, n/20)`.
    pub min_seg: Option<usize>,
    pub order_max: usize,
    pub sigma2_prior: InverseGammaPrior,
    pub nu_prior: GammaPrior,
    pub period: f64,
    pub season_mode: SeasonMode,
    pub chains: usize,
    /// Sweeps per chain, burn-in included.
    pub samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Smallest windowed probability at which a changepoint is reported.
    pub cp_prob_min: f64,
    /// A slope counts as zero below `slope_eps · sd(y) / n` per step.
    pub slope_eps: f64,
    #[serde(default)]
    pub options: SamplerOptions,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            cp_max: 20,
            min_seg: None,
            order_max: 3,
            sigma2_prior: InverseGammaPrior {
                shape: 1e-4,
                scale: 1e-4,
            },
            nu_prior: GammaPrior {
                shape: 0.01,
                rate: 0.01,
            },
            period: 7.0,
            season_mode: SeasonMode::Harmonic,
            chains: 3,
            samples: 10_000,
            burn_in: 2_000,
            seed: 0,
            cp_prob_min: 0.18,
            slope_eps: 0.1,
            options: SamplerOptions::default(),
        }
    }
}

impl Hyperparams {
    pub fn effective_min_seg(&self, n: usize) -> usize {
        self.min_seg.unwrap_or_else(|| 10.max(n / 20))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(BeastError::InvalidHyperparams(msg.into()));
        if self.min_seg == Some(0) || self.min_seg == Some(1) {
            return bad("min_seg must be at least 2");
        }
        if self.order_max == 0 {
            return bad("order_max must be positive");
        }
        if !(self.period > 2.0) || !self.period.is_finite() {
            return bad("period must exceed 2");
        }
        let positive = [
            self.sigma2_prior.shape,
            self.sigma2_prior.scale,
            self.nu_prior.shape,
            self.nu_prior.rate,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return bad("prior parameters must be positive and finite");
        }
        if self.chains == 0 {
            return bad("at least one chain is required");
        }
        if self.burn_in >= self.samples {
            return bad("burn_in must be smaller than samples");
        }
        if !(0.0..=1.0).contains(&self.cp_prob_min) {
            return bad("cp_prob_min must lie in [0, 1]");
        }
        if !(self.slope_eps >= 0.0) {
            return bad("slope_eps must be non-negative");
        }
        if let Some(nu) = self.options.fixed_nu {
            if !(nu > 0.0) {
                return bad("fixed_nu must be positive");
            }
        }
        Ok(())
    }
}

/// Convenience wrapper that keeps dates attached to a posterior run.
pub fn run_on_values(
    id: &str,
    start: NaiveDate,
    values: &[f64],
    hyper: &Hyperparams,
) -> Result<PosteriorSummary> {
    let series = TimeSeries::from_values(id, start, values)?;
    run_sampler(&series, hyper)
}

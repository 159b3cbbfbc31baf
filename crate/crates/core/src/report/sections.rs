//! Builders that run one analysis over a panel and package its output.

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::beast::{self, Hyperparams, PosteriorSummary};
use crate::events::{self, BreakpointReport, EventCatalog, MatchConfig};
use crate::hurst::{
    self, annual_means, classify_efficiency, default_rs_scales, default_tau_max_set, AnnualMean,
    Efficiency, HurstEstimate, HurstMethod, RsMode, DEFAULT_EFFICIENCY_BAND,
};
use crate::infotheory::{mi_decoupling, rolling_mi, DecouplingEvent, KsgConfig, MiEstimator};
use crate::pmime::{self, causality_network, CausalityNetwork, PmimeConfig, PmimeResult};
use crate::series::{rolling_apply, CorrelationMatrix, Panel, RollingSeries, RollingWindowSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstOptions {
    pub window: usize,
    pub step: usize,
    pub q: f64,
    pub method: HurstMethod,
    pub per_year: bool,
    pub corr_matrix: bool,
}

impl Default for HurstOptions {
    fn default() -> Self {
        HurstOptions {
            window: 75,
            step: 1,
            q: 1.0,
            method: HurstMethod::Ghe,
            per_year: true,
            corr_matrix: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstSeriesResult {
    pub id: String,
    pub full_sample: HurstEstimate,
    pub efficiency: Efficiency,
    pub rolling: RollingSeries,
    pub annual: Vec<AnnualMean>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstSection {
    pub options: HurstOptions,
    pub series: Vec<HurstSeriesResult>,
    pub correlation: Option<CorrelationMatrix>,
}

fn estimate(x: &[f64], opts: &HurstOptions) -> hurst::Result<HurstEstimate> {
    match opts.method {
        HurstMethod::Ghe => hurst::ghe(x, opts.q, &default_tau_max_set()),
        HurstMethod::Rs => hurst::hurst_rs(x, &default_rs_scales(x.len()), RsMode::AnisLloyd),
    }
}

/// Full-sample and rolling Hurst exponents of every panel member. GHE reads
/// the series as a level path, R/S as increments, so pick the transform to
/// suit the method.
pub fn hurst_section(panel: &Panel, opts: &HurstOptions) -> Result<HurstSection, ReportError> {
    let spec = RollingWindowSpec::new(opts.window, opts.step)?;
    let mut series = Vec::new();
    for s in panel.series() {
        let values = s.values();
        let full_sample = estimate(&values, opts)?;
        let (rolling, warnings) = match opts.method {
            HurstMethod::Ghe => {
                let r = hurst::rolling_ghe(s, spec, opts.q)?;
                (r.series, r.warnings)
            }
            HurstMethod::Rs => {
                let r = rolling_apply(s, spec, "hurst_rs", |w| estimate(w, opts).map(|e| e.h))?;
                (r, Vec::new())
            }
        };
        let annual = if opts.per_year {
            annual_means(&rolling)
        } else {
            Vec::new()
        };
        series.push(HurstSeriesResult {
            id: s.id().to_string(),
            efficiency: classify_efficiency(full_sample.h, DEFAULT_EFFICIENCY_BAND),
            full_sample,
            rolling,
            annual,
            warnings,
        });
    }
    let correlation = if opts.corr_matrix && series.len() > 1 {
        let curves: Vec<RollingSeries> = series.iter().map(|s| s.rolling.clone()).collect();
        Some(hurst::hurst_correlation_matrix(&curves)?)
    } else {
        None
    };
    Ok(HurstSection {
        options: opts.clone(),
        series,
        correlation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MiEstimatorKind {
    #[default]
    Knn,
    Binned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiOptions {
    pub window: usize,
    pub step: usize,
    pub estimator: MiEstimatorKind,
    pub k: usize,
    /// Restrict to one pair; otherwise every unordered pair is analysed.
    pub pair: Option<(String, String)>,
    /// Second pair whose rolling curve is compared against the first.
    pub decouple_against: Option<(String, String)>,
    pub gap_threshold: f64,
    pub run_len: usize,
    pub seed: u64,
}

impl Default for MiOptions {
    fn default() -> Self {
        MiOptions {
            window: 60,
            step: 1,
            estimator: MiEstimatorKind::Knn,
            k: 4,
            pair: None,
            decouple_against: None,
            gap_threshold: 0.1,
            run_len: 5,
            seed: 0,
        }
    }
}

impl MiOptions {
    fn estimator(&self) -> MiEstimator {
        match self.estimator {
            MiEstimatorKind::Knn => MiEstimator::Knn(KsgConfig {
                k: self.k,
                seed: self.seed,
                ..KsgConfig::default()
            }),
            MiEstimatorKind::Binned => MiEstimator::Binned(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiPairValue {
    pub a: String,
    pub b: String,
    /// Full-sample estimate in nats.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiSection {
    pub options: MiOptions,
    pub full_sample: Vec<MiPairValue>,
    pub rolling: Vec<RollingSeries>,
    pub decoupling: Vec<DecouplingEvent>,
}

pub fn mi_section(panel: &Panel, opts: &MiOptions) -> Result<MiSection, ReportError> {
    let spec = RollingWindowSpec::new(opts.window, opts.step)?;
    let est = opts.estimator();
    let pairs: Vec<(String, String)> = match &opts.pair {
        Some(p) => vec![p.clone()],
        None => {
            let ids = panel.ids();
            let mut v = Vec::new();
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    v.push((ids[i].clone(), ids[j].clone()));
                }
            }
            v
        }
    };
    if pairs.is_empty() {
        return Err(ReportError::Invalid(
            "mutual information needs at least two series".into(),
        ));
    }
    let mut full_sample = Vec::new();
    let mut rolling = Vec::new();
    for (a, b) in &pairs {
        let (sa, sb) = (panel.get(a)?, panel.get(b)?);
        full_sample.push(MiPairValue {
            a: a.clone(),
            b: b.clone(),
            value: est.estimate(&sa.values(), &sb.values())?,
        });
        rolling.push(rolling_mi(sa, sb, spec, est)?);
    }
    let decoupling = match &opts.decouple_against {
        Some((c, d)) => {
            let other = rolling_mi(panel.get(c)?, panel.get(d)?, spec, est)?;
            mi_decoupling(&rolling[0], &other, opts.gap_threshold, opts.run_len)?
        }
        None => Vec::new(),
    };
    Ok(MiSection {
        options: opts.clone(),
        full_sample,
        rolling,
        decoupling,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmimeSection {
    pub config: PmimeConfig,
    pub result: PmimeResult,
    pub network: CausalityNetwork,
}

pub fn pmime_section(panel: &Panel, cfg: &PmimeConfig) -> Result<PmimeSection, ReportError> {
    let result = pmime::pmime(panel, cfg)?;
    let network = causality_network(&result, 0.0);
    Ok(PmimeSection {
        config: *cfg,
        result,
        network,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeastSection {
    pub hyperparams: Hyperparams,
    pub summaries: Vec<PosteriorSummary>,
    pub trend_correlation: Option<CorrelationMatrix>,
}

/// One decomposition per panel member; member `i` runs with seed `seed + i`.
pub fn beast_section(panel: &Panel, hyper: &Hyperparams) -> Result<BeastSection, ReportError> {
    let mut summaries = Vec::new();
    for (i, s) in panel.series().iter().enumerate() {
        let h = Hyperparams {
            seed: hyper.seed.wrapping_add(i as u64),
            ..hyper.clone()
        };
        summaries.push(beast::run_sampler(s, &h)?);
    }
    let trend_correlation = if summaries.len() > 1 {
        Some(beast::trend_correlation_matrix(&summaries)?)
    } else {
        None
    };
    Ok(BeastSection {
        hyperparams: hyper.clone(),
        summaries,
        trend_correlation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsSection {
    pub config: MatchConfig,
    pub catalog: EventCatalog,
    pub reports: Vec<BreakpointReport>,
}

pub fn events_section(
    beast: &BeastSection,
    catalog: &EventCatalog,
    cfg: &MatchConfig,
) -> Result<EventsSection, ReportError> {
    let reports = beast
        .summaries
        .iter()
        .map(|s| events::classify_summary(s, catalog, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EventsSection {
        config: *cfg,
        catalog: catalog.clone(),
        reports,
    })
}

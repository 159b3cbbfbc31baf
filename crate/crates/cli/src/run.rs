use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use breakscope_core::beast::{Hyperparams, SeasonMode};
use breakscope_core::events::{EventCatalog, MatchConfig};
use breakscope_core::hurst::HurstMethod;
use breakscope_core::pmime::{PmimeConfig, StopRule};
use breakscope_core::report::{
    assemble_report, beast_section, events_section, format_number, hurst_section, mi_section,
    pmime_section, to_rounded_json, HurstOptions, MiEstimatorKind, MiOptions, OutputFormat, Report,
    ReportError, ReportInputs, SectionOutcome,
};
use breakscope_core::series::{
    apply_transform, drop_negative_prices, load_csv, ColumnSchema, Panel, Transform,
};
use breakscope_core::synth::{
    chain_coupling, unidirectional_coupling, GeneratorSpec, PiecewiseSpec,
};

use crate::args::*;

/// Exit status of a finished command.
pub enum Outcome {
    Complete(Vec<PathBuf>),
    Partial(Vec<PathBuf>, String),
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth(a) => synth(g, a).map(|p| Outcome::Complete(vec![p])),
        Command::Hurst(a) => {
            let panel = load(g, Transform::Log)?;
            let opts = hurst_options(a);
            finish(
                g,
                &[g.format.into()],
                ReportInputs {
                    seed: g.seed,
                    hurst: SectionOutcome::from_result(hurst_section(&panel, &opts)),
                    ..ReportInputs::default()
                },
            )
        }
        Command::Mi(a) => {
            let panel = load(g, Transform::LogReturn)?;
            let opts = mi_options(a, g.seed)?;
            finish(
                g,
                &[g.format.into()],
                ReportInputs {
                    seed: g.seed,
                    mi: SectionOutcome::from_result(mi_section(&panel, &opts)),
                    ..ReportInputs::default()
                },
            )
        }
        Command::Pmime(a) => {
            let panel = load(g, Transform::LogReturn)?;
            let cfg = pmime_config(a, g.seed);
            finish(
                g,
                &[g.format.into()],
                ReportInputs {
                    seed: g.seed,
                    pmime: SectionOutcome::from_result(pmime_section(&panel, &cfg)),
                    ..ReportInputs::default()
                },
            )
        }
        Command::Beast(a) => {
            let panel = load(g, Transform::Raw)?;
            let hyper = hyperparams(a, g.seed);
            finish(
                g,
                &[g.format.into()],
                ReportInputs {
                    seed: g.seed,
                    beast: SectionOutcome::from_result(beast_section(&panel, &hyper)),
                    ..ReportInputs::default()
                },
            )
        }
        Command::Report(a) => report(g, a),
    }
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        }
    }
}

fn transform_of(t: TransformArg) -> Transform {
    match t {
        TransformArg::Raw => Transform::Raw,
        TransformArg::Log => Transform::Log,
        TransformArg::LogReturn => Transform::LogReturn,
        TransformArg::SignedLogReturn => Transform::SignedLogReturn,
    }
}

fn raw_panel(g: &GlobalArgs) -> Result<Panel> {
    let path = g
        .input
        .as_ref()
        .ok_or_else(|| anyhow!("--input is required for this command"))?;
    let schema = if g.columns.is_empty() {
        ColumnSchema::all()
    } else {
        ColumnSchema::only(&g.columns)
    };
    let panel = load_csv(path, &schema).with_context(|| format!("reading {}", path.display()))?;
    if g.drop_negative {
        let before = panel.len();
        let panel = panel.map_series(|s| Ok(drop_negative_prices(s)?.series))?;
        let removed = before - panel.len();
        if removed > 0 {
            eprintln!("dropped {removed} dates with non-positive prices");
        }
        return Ok(panel);
    }
    Ok(panel)
}

fn transformed(raw: &Panel, g: &GlobalArgs, default: Transform) -> Result<Panel> {
    let t = g.transform.map(transform_of).unwrap_or(default);
    Ok(raw.map_series(|s| apply_transform(s, t))?)
}

fn load(g: &GlobalArgs, default: Transform) -> Result<Panel> {
    transformed(&raw_panel(g)?, g, default)
}

fn hurst_options(a: &HurstArgs) -> HurstOptions {
    HurstOptions {
        window: a.window,
        step: a.step,
        q: a.q,
        method: match a.method {
            HurstMethodArg::Ghe => HurstMethod::Ghe,
            HurstMethodArg::Rs => HurstMethod::Rs,
        },
        per_year: a.per_year,
        corr_matrix: a.corr_matrix,
    }
}

fn parse_pair(s: &str) -> Result<(String, String)> {
    match s.split_once(',') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.trim().into(), b.trim().into())),
        _ => bail!("expected a pair written as A,B but got {s:?}"),
    }
}

fn mi_options(a: &MiArgs, seed: u64) -> Result<MiOptions> {
    Ok(MiOptions {
        window: a.window,
        step: a.step,
        estimator: match a.estimator {
            EstimatorArg::Knn => MiEstimatorKind::Knn,
            EstimatorArg::Binned => MiEstimatorKind::Binned,
        },
        k: a.k,
        pair: a.pair.as_deref().map(parse_pair).transpose()?,
        decouple_against: a.decouple_against.as_deref().map(parse_pair).transpose()?,
        gap_threshold: a.gap_threshold,
        run_len: a.run_len,
        seed,
    })
}

fn pmime_config(a: &PmimeArgs, seed: u64) -> PmimeConfig {
    PmimeConfig {
        l_max: a.lmax,
        k: a.k,
        stop: match a.stop {
            StopArg::Surrogate => StopRule::Surrogate {
                alpha: a.alpha,
                surrogates: a.surrogates,
            },
            StopArg::Ratio => StopRule::Ratio { threshold: a.ratio },
        },
        seed,
        ..PmimeConfig::default()
    }
}

fn hyperparams(a: &BeastArgs, seed: u64) -> Hyperparams {
    Hyperparams {
        period: a.period,
        season_mode: match a.season {
            SeasonArg::Harmonic => SeasonMode::Harmonic,
            SeasonArg::None => SeasonMode::None,
        },
        cp_max: a.cp_max,
        min_seg: a.min_seg,
        order_max: a.order_max,
        samples: a.samples,
        burn_in: a.burn_in,
        chains: a.chains,
        cp_prob_min: a.cp_prob_min,
        seed,
        ..Hyperparams::default()
    }
}

fn report(g: &GlobalArgs, a: &ReportArgs) -> Result<Outcome> {
    let raw = raw_panel(g)?;
    let wants = |s: SectionArg| a.sections.contains(&s);
    let mut inputs = ReportInputs {
        seed: g.seed,
        ..ReportInputs::default()
    };
    if wants(SectionArg::Hurst) {
        let opts = HurstOptions {
            window: a.hurst_window,
            ..HurstOptions::default()
        };
        inputs.hurst = SectionOutcome::from_result(
            transformed(&raw, g, Transform::Log).and_then(|p| Ok(hurst_section(&p, &opts)?)),
        );
    }
    if wants(SectionArg::Mi) {
        let opts = MiOptions {
            window: a.mi_window,
            seed: g.seed,
            ..MiOptions::default()
        };
        inputs.mi = SectionOutcome::from_result(
            transformed(&raw, g, Transform::LogReturn).and_then(|p| Ok(mi_section(&p, &opts)?)),
        );
    }
    if wants(SectionArg::Pmime) {
        let cfg = PmimeConfig {
            l_max: a.lmax,
            seed: g.seed,
            ..PmimeConfig::default()
        };
        inputs.pmime = SectionOutcome::from_result(
            transformed(&raw, g, Transform::LogReturn).and_then(|p| Ok(pmime_section(&p, &cfg)?)),
        );
    }
    let beast = if wants(SectionArg::Beast) || wants(SectionArg::Events) {
        let hyper = hyperparams(&a.beast, g.seed);
        Some(transformed(&raw, g, Transform::Raw).and_then(|p| Ok(beast_section(&p, &hyper)?)))
    } else {
        None
    };
    if wants(SectionArg::Events) {
        let cfg = MatchConfig {
            tol_days: a.tol_days,
            approximate_tol_days: a.approximate_tol_days,
            max_match_days: a.max_match_days,
        };
        let events = match &beast {
            Some(Ok(b)) => (|| -> Result<_> {
                let catalog = match &a.catalog {
                    Some(p) => EventCatalog::load(p)?,
                    None => EventCatalog::default_catalog(),
                };
                Ok(events_section(b, &catalog, &cfg)?)
            })(),
            _ => Err(anyhow!("needs a successful beast section")),
        };
        inputs.events = SectionOutcome::from_result(events);
    }
    if wants(SectionArg::Beast) {
        if let Some(b) = beast {
            inputs.beast = SectionOutcome::from_result(b);
        }
    }
    finish(g, &[OutputFormat::Json, OutputFormat::Csv], inputs)
}

fn finish(g: &GlobalArgs, formats: &[OutputFormat], inputs: ReportInputs) -> Result<Outcome> {
    match assemble_report(inputs) {
        Ok(r) => Ok(Outcome::Complete(write(&r, &g.out_dir, formats)?)),
        Err(ReportError::PartialFailure { missing, partial }) => {
            let msg = ReportError::PartialFailure {
                missing,
                partial: None,
            }
            .to_string();
            let written = match partial {
                Some(r) => write(&r, &g.out_dir, formats)?,
                None => Vec::new(),
            };
            Ok(Outcome::Partial(written, msg))
        }
        Err(e) => Err(e.into()),
    }
}

fn write(r: &Report, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    r.write_bundle(dir, formats)
        .with_context(|| format!("writing into {}", dir.display()))
}

fn synth(g: &GlobalArgs, a: &SynthArgs) -> Result<PathBuf> {
    let spec = match a.kind {
        SynthKind::Fgn => GeneratorSpec::Fgn {
            h: a.h,
            n: a.n,
            seed: g.seed,
        },
        SynthKind::Fbm => GeneratorSpec::Fbm {
            h: a.h,
            n: a.n,
            seed: g.seed,
        },
        SynthKind::WhiteNoise => GeneratorSpec::WhiteNoise {
            sd: a.sd,
            n: a.n,
            seed: g.seed,
        },
        SynthKind::VarUnidirectional => GeneratorSpec::VarCoupled {
            coupling: unidirectional_coupling(a.coupling),
            noise_sd: a.sd,
            n: a.n,
            seed: g.seed,
        },
        SynthKind::VarChain => GeneratorSpec::VarCoupled {
            coupling: chain_coupling(a.coupling),
            noise_sd: a.sd,
            n: a.n,
            seed: g.seed,
        },
        SynthKind::Piecewise => GeneratorSpec::PiecewiseTrendSeasonal {
            spec: PiecewiseSpec::two_changepoint_fixture(),
            n: a.n,
            seed: g.seed,
        },
        SynthKind::FixturePanel => GeneratorSpec::FixturePanel {
            n: a.n,
            seed: g.seed,
        },
    };
    let panel = spec.generate()?;
    let ext = match g.format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    let path = match &a.out {
        Some(p) => p.clone(),
        None => {
            let name = format!("{:?}", a.kind).to_lowercase();
            g.out_dir.join(format!("synth_{name}.{ext}"))
        }
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let text = match g.format {
        Format::Json => to_rounded_json(&panel)?,
        Format::Csv => panel_csv(&panel)?,
    };
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Wide panel CSV in the same layout the loader reads.
fn panel_csv(panel: &Panel) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["date".to_string()];
    header.extend(panel.ids());
    w.write_record(&header)?;
    let cols = panel.columns();
    for (i, d) in panel.dates().iter().enumerate() {
        let mut row = vec![d.to_string()];
        row.extend(cols.iter().map(|c| format_number(c[i])));
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

//! Report assembly: one JSON document holding every analysis that ran, plus
//! long-format CSV tables and a manifest naming the figure each table feeds.
//!
//! Numbers are written with at most nine significant digits, independent of
//! locale.

mod sections;
mod tables;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::beast::BeastError;
use crate::events::EventError;
use crate::hurst::HurstError;
use crate::infotheory::InfoError;
use crate::pmime::PmimeError;
use crate::series::SeriesError;

pub use sections::{
    beast_section, events_section, hurst_section, mi_section, pmime_section, BeastSection,
    EventsSection, HurstOptions, HurstSection, HurstSeriesResult, MiEstimatorKind, MiOptions,
    MiPairValue, MiSection, PmimeSection,
};
pub use tables::{tables, Table};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report incomplete; missing sections: {}", list_missing(.missing))]
    PartialFailure {
        missing: Vec<MissingSection>,
        /// Whatever could be assembled, when anything could.
        partial: Option<Box<Report>>,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Hurst(#[from] HurstError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Pmime(#[from] PmimeError),
    #[error(transparent)]
    Beast(#[from] BeastError),
    #[error(transparent)]
    Events(#[from] EventError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn list_missing(m: &[MissingSection]) -> String {
    if m.is_empty() {
        return "no analysis produced output".into();
    }
    m.iter()
        .map(|s| format!("{} ({})", s.section, s.reason))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingSection {
    pub section: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub section: String,
    /// The figure or table this export reproduces.
    pub figure: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Sections {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hurst: Option<HurstSection>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mi: Option<MiSection>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pmime: Option<PmimeSection>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beast: Option<BeastSection>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub events: Option<EventsSection>,
}

impl Sections {
    pub fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.hurst.is_some() {
            v.push("hurst");
        }
        if self.mi.is_some() {
            v.push("mi");
        }
        if self.pmime.is_some() {
            v.push("pmime");
        }
        if self.beast.is_some() {
            v.push("beast");
        }
        if self.events.is_some() {
            v.push("events");
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub seed: u64,
    pub sections: Sections,
    pub manifest: Vec<ManifestEntry>,
    pub missing: Vec<MissingSection>,
}

/// What happened to one analysis in a run.
#[derive(Debug, Clone, Default)]
pub enum SectionOutcome<T> {
    #[default]
    NotRequested,
    Done(T),
    Failed(String),
}

impl<T> SectionOutcome<T> {
    pub fn from_result<E: std::fmt::Display>(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => SectionOutcome::Done(v),
            Err(e) => SectionOutcome::Failed(e.to_string()),
        }
    }

    fn split(self, name: &str, missing: &mut Vec<MissingSection>) -> Option<T> {
        match self {
            SectionOutcome::Done(v) => Some(v),
            SectionOutcome::NotRequested => None,
            SectionOutcome::Failed(reason) => {
                missing.push(MissingSection {
                    section: name.to_string(),
                    reason,
                });
                None
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub seed: u64,
    pub hurst: SectionOutcome<HurstSection>,
    pub mi: SectionOutcome<MiSection>,
    pub pmime: SectionOutcome<PmimeSection>,
    pub beast: SectionOutcome<BeastSection>,
    pub events: SectionOutcome<EventsSection>,
}

/// Collects finished analyses into a report. Any failed section, or no
/// section at all, yields `PartialFailure`; the partial report rides along
/// whenever at least one section succeeded.
pub fn assemble_report(inputs: ReportInputs) -> Result<Report, ReportError> {
    let mut missing = Vec::new();
    let sections = Sections {
        hurst: inputs.hurst.split("hurst", &mut missing),
        mi: inputs.mi.split("mi", &mut missing),
        pmime: inputs.pmime.split("pmime", &mut missing),
        beast: inputs.beast.split("beast", &mut missing),
        events: inputs.events.split("events", &mut missing),
    };
    let mut report = Report {
        schema_version: SCHEMA_VERSION.to_string(),
        seed: inputs.seed,
        sections,
        manifest: Vec::new(),
        missing: missing.clone(),
    };
    report.manifest = tables(&report)
        .iter()
        .map(|t| ManifestEntry {
            file: t.file.clone(),
            section: t.section.to_string(),
            figure: t.figure.to_string(),
            columns: t.header.clone(),
        })
        .collect();
    if report.sections.present().is_empty() {
        return Err(ReportError::PartialFailure {
            missing,
            partial: None,
        });
    }
    if !missing.is_empty() {
        return Err(ReportError::PartialFailure {
            missing,
            partial: Some(Box::new(report)),
        });
    }
    Ok(report)
}

/// Rounds to nine significant digits; zero and non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Decimal text with at most nine significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    if r == 0.0 {
        "0".into()
    } else if r.abs() >= 1e15 || r.abs() < 1e-6 {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to nine significant digits.
pub fn to_rounded_json<T: Serialize>(value: &T) -> Result<String, ReportError> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl Report {
    pub fn to_json_string(&self) -> Result<String, ReportError> {
        to_rounded_json(self)
    }

    pub fn from_json_str(s: &str) -> Result<Report, ReportError> {
        Ok(serde_json::from_str(s)?)
    }

    /// Writes `report.json` and/or every CSV table plus `manifest.csv`.
    /// Returns the written paths in a fixed order.
    pub fn write_bundle(
        &self,
        dir: &Path,
        formats: &[OutputFormat],
    ) -> Result<Vec<PathBuf>, ReportError> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if formats.contains(&OutputFormat::Json) {
            let p = dir.join("report.json");
            std::fs::write(&p, self.to_json_string()?)?;
            written.push(p);
        }
        if formats.contains(&OutputFormat::Csv) {
            for t in tables(self) {
                let p = dir.join(&t.file);
                std::fs::write(&p, t.to_csv()?)?;
                written.push(p);
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["file", "section", "figure", "columns"])?;
            for m in &self.manifest {
                w.write_record([&m.file, &m.section, &m.figure, &m.columns.join(" ")])?;
            }
            let p = dir.join("manifest.csv");
            std::fs::write(&p, w.into_inner().map_err(|e| e.into_error())?)?;
            written.push(p);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{Panel, TimeSeries};
    use crate::synth::{epoch, gen_fbm};

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_number(1.0 / 3.0), "0.333333333");
        assert_eq!(format_number(2.0 / 3.0 * 1000.0), "666.666667");
        assert_eq!(format_number(123456789012.0), "123456789000");
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1.23456789123e-9), "1.23456789e-9");
        assert_eq!(format_number(f64::NAN), "NaN");
        assert_eq!(format_number(7.0), "7");
        assert_eq!(format_number(-2.5), "-2.5");
    }

    #[test]
    fn json_floats_are_rounded() {
        let s = to_rounded_json(&vec![1.0 / 3.0, 2.0]).unwrap();
        assert!(s.contains("0.333333333"), "{s}");
        assert!(!s.contains("0.3333333333"), "{s}");
    }

    #[test]
    fn empty_input_is_partial_failure() {
        match assemble_report(ReportInputs::default()) {
            Err(ReportError::PartialFailure { missing, partial }) => {
                assert!(missing.is_empty());
                assert!(partial.is_none());
            }
            other => panic!("{other:?}"),
        }
    }

    fn fbm_panel() -> Panel {
        let v: Vec<f64> = gen_fbm(0.7, 200, 1).unwrap();
        Panel::new(vec![TimeSeries::from_values("a", epoch(), &v).unwrap()]).unwrap()
    }

    #[test]
    fn hurst_only_report_has_one_section() {
        let h = hurst_section(&fbm_panel(), &HurstOptions::default()).unwrap();
        let r = assemble_report(ReportInputs {
            hurst: SectionOutcome::Done(h),
            ..ReportInputs::default()
        })
        .unwrap();
        assert_eq!(r.sections.present(), vec!["hurst"]);
        assert!(r.manifest.iter().any(|m| m.file == "hurst_rolling.csv"));
        assert!(r.manifest.iter().all(|m| m.section == "hurst"));
        assert!(r.missing.is_empty());
    }

    #[test]
    fn failed_section_is_listed() {
        let h = hurst_section(&fbm_panel(), &HurstOptions::default()).unwrap();
        let err = assemble_report(ReportInputs {
            hurst: SectionOutcome::Done(h),
            pmime: SectionOutcome::Failed("too short".into()),
            ..ReportInputs::default()
        })
        .unwrap_err();
        match err {
            ReportError::PartialFailure { missing, partial } => {
                assert_eq!(missing[0].section, "pmime");
                let p = partial.unwrap();
                assert_eq!(p.missing, missing);
                assert_eq!(p.sections.present(), vec!["hurst"]);
            }
            other => panic!("{other:?}"),
        }
    }
}

//! Dated event catalogs and lead/lag classification of detected breakpoints.

use std::collections::HashSet;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beast::{Changepoint, PosteriorSummary};

#[derive(Debug, Error)]
pub enum EventError {
    #[error("event catalog is empty")]
    EmptyCatalog,
    #[error("duplicate event symbol {0}")]
    DuplicateSymbol(String),
    #[error("event {0} is dated before its predecessor")]
    Unordered(String),
    #[error("unknown event symbol {0}")]
    UnknownEvent(String),
    #[error("invalid matching configuration: {0}")]
    InvalidConfig(String),
    #[error("could not parse event catalog: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EventError>;

const DEFAULT_CATALOG: &str = include_str!("../data/events.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub symbol: String,
    pub date: NaiveDate,
    pub description: String,
    /// The source gives only a rough date; a wider concurrency window applies.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Event>", into = "Vec<Event>")]
pub struct EventCatalog {
    events: Vec<Event>,
}

impl TryFrom<Vec<Event>> for EventCatalog {
    type Error = EventError;

    fn try_from(events: Vec<Event>) -> Result<Self> {
        EventCatalog::new(events)
    }
}

impl From<EventCatalog> for Vec<Event> {
    fn from(c: EventCatalog) -> Self {
        c.events
    }
}

impl EventCatalog {
    /// Symbols must be unique and dates nondecreasing. An empty catalog is
    /// allowed here; classification rejects it.
    pub fn new(events: Vec<Event>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, e) in events.iter().enumerate() {
            if !seen.insert(e.symbol.as_str()) {
                return Err(EventError::DuplicateSymbol(e.symbol.clone()));
            }
            if i > 0 && e.date < events[i - 1].date {
                return Err(EventError::Unordered(e.symbol.clone()));
            }
        }
        Ok(EventCatalog { events })
    }

    /// The thirteen energy-crisis events bundled with the crate.
    pub fn default_catalog() -> Self {
        Self::from_json_str(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.events).expect("events serialize")
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, symbol: &str) -> Result<&Event> {
        self.events
            .iter()
            .find(|e| e.symbol == symbol)
            .ok_or_else(|| EventError::UnknownEvent(symbol.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Lead,
    Lag,
    Concurrent,
    /// No event within the matching window: a candidate hidden event.
    #[serde(rename = "hidden")]
    Unmatched,
}

impl Relation {
    pub fn label(&self) -> &'static str {
        match self {
            Relation::Lead => "lead",
            Relation::Lag => "lag",
            Relation::Concurrent => "concurrent",
            Relation::Unmatched => "hidden",
        }
    }
}

impl std::fmt::Display for Relation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Concurrency window in days for exactly dated events.
    pub tol_days: i64,
    /// Concurrency window for events whose day is only approximate.
    pub approximate_tol_days: i64,
    /// Breakpoints further than this from every event stay unmatched.
    pub max_match_days: i64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            tol_days: 3,
            approximate_tol_days: 5,
            max_match_days: 30,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol_days < 0 || self.approximate_tol_days < self.tol_days {
            return Err(EventError::InvalidConfig(
                "tolerances must be non-negative and the approximate one no narrower".into(),
            ));
        }
        if self.max_match_days < 0 {
            return Err(EventError::InvalidConfig(
                "max_match_days must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn tolerance_for(&self, event: &Event) -> i64 {
        if event.approximate {
            self.approximate_tol_days
        } else {
            self.tol_days
        }
    }
}

/// Label a signed offset (detected minus event, in days).
pub fn classify_offset(offset_days: i64, tol_days: i64) -> Relation {
    if offset_days < -tol_days {
        Relation::Lead
    } else if offset_days > tol_days {
        Relation::Lag
    } else {
        Relation::Concurrent
    }
}

/// Relation of one detected date to a given event, ignoring the match window.
pub fn classify_pair(detected: NaiveDate, event: &Event, cfg: &MatchConfig) -> (Relation, i64) {
    let offset = (detected - event.date).num_days();
    (classify_offset(offset, cfg.tolerance_for(event)), offset)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedBreakpoint {
    pub date: NaiveDate,
    pub probability: f64,
}

impl From<&Changepoint> for DetectedBreakpoint {
    fn from(c: &Changepoint) -> Self {
        DetectedBreakpoint {
            date: c.date,
            probability: c.probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakpointMatch {
    pub date: NaiveDate,
    pub probability: f64,
    pub event: Option<String>,
    pub event_date: Option<NaiveDate>,
    pub relation: Relation,
    /// Detected minus event date; absent when unmatched.
    pub offset_days: Option<i64>,
    /// Concurrency window applied to this match.
    pub tol_days: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakpointReport {
    pub market: String,
    pub matches: Vec<BreakpointMatch>,
}

impl BreakpointReport {
    /// Re-derive every label from the stored dates and windows.
    pub fn relations_consistent(&self) -> bool {
        self.matches
            .iter()
            .all(|m| match (m.event_date, m.tol_days) {
                (Some(ev), Some(tol)) => {
                    let offset = (m.date - ev).num_days();
                    m.offset_days == Some(offset) && classify_offset(offset, tol) == m.relation
                }
                (None, None) => m.relation == Relation::Unmatched && m.offset_days.is_none(),
                _ => false,
            })
    }
}

/// Match each breakpoint to its nearest event (ties go to the earlier one)
/// within `max_match_days` and label the relation.
pub fn classify_breakpoints(
    market: &str,
    cps: &[DetectedBreakpoint],
    catalog: &EventCatalog,
    cfg: &MatchConfig,
) -> Result<BreakpointReport> {
    if catalog.is_empty() {
        return Err(EventError::EmptyCatalog);
    }
    cfg.validate()?;
    let matches = cps
        .iter()
        .map(|cp| {
            let mut best: Option<(&Event, i64)> = None;
            for e in catalog.events() {
                let off = (cp.date - e.date).num_days();
                if best.is_none_or(|(_, b)| off.abs() < b.abs()) {
                    best = Some((e, off));
                }
            }
            match best {
                Some((e, off)) if off.abs() <= cfg.max_match_days => {
                    let tol = cfg.tolerance_for(e);
                    BreakpointMatch {
                        date: cp.date,
                        probability: cp.probability,
                        event: Some(e.symbol.clone()),
                        event_date: Some(e.date),
                        relation: classify_offset(off, tol),
                        offset_days: Some(off),
                        tol_days: Some(tol),
                    }
                }
                _ => BreakpointMatch {
                    date: cp.date,
                    probability: cp.probability,
                    event: None,
                    event_date: None,
                    relation: Relation::Unmatched,
                    offset_days: None,
                    tol_days: None,
                },
            }
        })
        .collect();
    Ok(BreakpointReport {
        market: market.to_string(),
        matches,
    })
}

/// Classify the extracted trend changepoints of a posterior summary.
pub fn classify_summary(
    summary: &PosteriorSummary,
    catalog: &EventCatalog,
    cfg: &MatchConfig,
) -> Result<BreakpointReport> {
    let cps: Vec<DetectedBreakpoint> = summary.extracted_cps.iter().map(Into::into).collect();
    classify_breakpoints(&summary.series_id, &cps, catalog, cfg)
}

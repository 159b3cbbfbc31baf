use std::path::PathBuf;

use breakscope_core::events::{
    classify_breakpoints, classify_pair, BreakpointReport, DetectedBreakpoint, EventCatalog,
    MatchConfig, Relation,
};
use chrono::NaiveDate;
use serde::Deserialize;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

#[derive(Deserialize)]
struct CatalogRow {
    symbol: String,
    date: NaiveDate,
    approximate: bool,
}

#[derive(Deserialize)]
struct PairRow {
    market: String,
    event: String,
    detected: NaiveDate,
    probability: f64,
    label: String,
}

fn pairs() -> Vec<PairRow> {
    csv::Reader::from_path(data("published_pairs.csv"))
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn bundled_catalog_matches_published_dates() {
    let cat = EventCatalog::default_catalog();
    let rows: Vec<CatalogRow> = csv::Reader::from_path(data("table1_dates.csv"))
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect();
    assert_eq!(cat.len(), rows.len());
    for (e, r) in cat.events().iter().zip(&rows) {
        assert_eq!(e.symbol, r.symbol);
        assert_eq!(e.date, r.date);
        assert_eq!(e.approximate, r.approximate, "{}", e.symbol);
        assert!(!e.description.is_empty());
    }
}

#[test]
fn catalog_json_round_trips() {
    let cat = EventCatalog::default_catalog();
    let back = EventCatalog::from_json_str(&cat.to_json_string()).unwrap();
    assert_eq!(cat, back);
}

#[test]
fn published_pair_labels() {
    let cat = EventCatalog::default_catalog();
    let cfg = MatchConfig::default();
    let mut mismatched = Vec::new();
    for p in pairs() {
        let (rel, _) = classify_pair(p.detected, cat.get(&p.event).unwrap(), &cfg);
        if rel.label() != p.label {
            mismatched.push(format!("{} {} {}", p.market, p.event, rel));
        }
    }
    // 29 Nov 2021 falls nineteen days after the 10 Nov event yet is printed
    // as a lead; no window turns a positive offset into a lead.
    assert_eq!(mismatched, vec!["RO E3 lag".to_string()]);
}

#[test]
fn late_november_breakpoint_leads_the_december_event() {
    // nearest-event matching places the same date before E4
    let cat = EventCatalog::default_catalog();
    let d = NaiveDate::from_ymd_opt(2021, 11, 29).unwrap();
    let r = classify_breakpoints(
        "RO",
        &[DetectedBreakpoint {
            date: d,
            probability: 0.87,
        }],
        &cat,
        &MatchConfig::default(),
    )
    .unwrap();
    assert_eq!(r.matches[0].event.as_deref(), Some("E4"));
    assert_eq!(r.matches[0].relation, Relation::Lead);
    assert_eq!(r.matches[0].offset_days, Some(-18));
}

#[test]
fn report_labels_round_trip_through_json() {
    let cat = EventCatalog::default_catalog();
    let cfg = MatchConfig::default();
    for market in ["RO", "CZ"] {
        let cps: Vec<DetectedBreakpoint> = pairs()
            .into_iter()
            .filter(|p| p.market == market)
            .map(|p| DetectedBreakpoint {
                date: p.detected,
                probability: p.probability,
            })
            .collect();
        let report = classify_breakpoints(market, &cps, &cat, &cfg).unwrap();
        let text = serde_json::to_string(&report).unwrap();
        let back: BreakpointReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
        assert!(back.relations_consistent());
    }
}

#[test]
fn tampered_report_is_detected() {
    let cat = EventCatalog::default_catalog();
    let cps = [DetectedBreakpoint {
        date: NaiveDate::from_ymd_opt(2022, 2, 10).unwrap(),
        probability: 0.99,
    }];
    let mut r = classify_breakpoints("CZ", &cps, &cat, &MatchConfig::default()).unwrap();
    assert_eq!(r.matches[0].relation, Relation::Lead);
    r.matches[0].relation = Relation::Lag;
    assert!(!r.relations_consistent());
}

#[test]
fn far_breakpoints_are_hidden() {
    let cat = EventCatalog::default_catalog();
    let cps = [DetectedBreakpoint {
        date: NaiveDate::from_ymd_opt(2023, 6, 1).unwrap(),
        probability: 0.5,
    }];
    let r = classify_breakpoints("X", &cps, &cat, &MatchConfig::default()).unwrap();
    assert_eq!(r.matches[0].relation, Relation::Unmatched);
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["matches"][0]["relation"], "hidden");
}

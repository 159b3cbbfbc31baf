//! Long-format CSV views of a report.

use super::{format_number as num, Report, ReportError};
use crate::series::CorrelationMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub section: &'static str,
    pub figure: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(
        file: impl Into<String>,
        section: &'static str,
        figure: &'static str,
        header: &[&str],
    ) -> Self {
        Table {
            file: file.into(),
            section,
            figure,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn matrix_table(
    file: &str,
    section: &'static str,
    figure: &'static str,
    m: &CorrelationMatrix,
) -> Table {
    let mut t = Table::new(file, section, figure, &["row", "col", "value"]);
    for (i, a) in m.ids.iter().enumerate() {
        for (j, b) in m.ids.iter().enumerate() {
            t.rows.push(vec![a.clone(), b.clone(), num(m.get(i, j))]);
        }
    }
    t
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Every CSV table the report supports, in a fixed order.
pub fn tables(report: &Report) -> Vec<Table> {
    let mut out = Vec::new();
    let s = &report.sections;

    if let Some(h) = &s.hurst {
        let mut full = Table::new(
            "hurst_full_sample.csv",
            "hurst",
            "full-sample Hurst exponents and efficiency class",
            &[
                "series",
                "method",
                "q",
                "h",
                "raw",
                "clamped",
                "fit_r2",
                "efficiency",
            ],
        );
        let mut rolling = Table::new(
            "hurst_rolling.csv",
            "hurst",
            "rolling Hurst exponent curves",
            &["date", "series", "h"],
        );
        let mut annual = Table::new(
            "hurst_annual.csv",
            "hurst",
            "annual mean generalized Hurst exponents",
            &["series", "year", "mean", "count"],
        );
        for r in &h.series {
            let e = &r.full_sample;
            full.rows.push(vec![
                r.id.clone(),
                serde_json::to_value(e.method)
                    .unwrap()
                    .as_str()
                    .unwrap()
                    .to_string(),
                num(e.q),
                num(e.h),
                num(e.raw),
                e.clamped.to_string(),
                num(e.fit_r2),
                serde_json::to_value(r.efficiency)
                    .unwrap()
                    .as_str()
                    .unwrap()
                    .to_string(),
            ]);
            for (d, v) in &r.rolling.points {
                rolling
                    .rows
                    .push(vec![d.to_string(), r.id.clone(), num(*v)]);
            }
            for a in &r.annual {
                annual.rows.push(vec![
                    r.id.clone(),
                    a.year.to_string(),
                    num(a.mean),
                    a.count.to_string(),
                ]);
            }
        }
        out.push(full);
        out.push(rolling);
        if h.options.per_year {
            out.push(annual);
        }
        if let Some(m) = &h.correlation {
            out.push(matrix_table(
                "hurst_correlation.csv",
                "hurst",
                "correlation matrix of rolling Hurst exponents",
                m,
            ));
        }
    }

    if let Some(mi) = &s.mi {
        let mut full = Table::new(
            "mi_full_sample.csv",
            "mi",
            "full-sample mutual information per pair",
            &["a", "b", "mi"],
        );
        for p in &mi.full_sample {
            full.rows.push(vec![p.a.clone(), p.b.clone(), num(p.value)]);
        }
        let mut rolling = Table::new(
            "mi_rolling.csv",
            "mi",
            "rolling mutual information curves",
            &["date", "pair", "mi"],
        );
        for r in &mi.rolling {
            for (d, v) in &r.points {
                rolling
                    .rows
                    .push(vec![d.to_string(), r.source_id.clone(), num(*v)]);
            }
        }
        out.push(full);
        out.push(rolling);
        if mi.options.decouple_against.is_some() {
            let mut t = Table::new(
                "mi_decoupling.csv",
                "mi",
                "decoupling episodes between two rolling MI curves",
                &["onset", "peak_date", "peak_gap"],
            );
            for e in &mi.decoupling {
                t.rows.push(vec![
                    e.onset.to_string(),
                    e.peak_date.to_string(),
                    num(e.peak_gap),
                ]);
            }
            out.push(t);
        }
    }

    if let Some(p) = &s.pmime {
        let mut m = Table::new(
            "pmime_matrix.csv",
            "pmime",
            "PMIME heat map (driver to target)",
            &["driver", "target", "value"],
        );
        for (i, row) in p.result.matrix.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m.rows.push(vec![
                    p.result.ids[i].clone(),
                    p.result.ids[j].clone(),
                    num(*v),
                ]);
            }
        }
        let mut e = Table::new(
            "pmime_edges.csv",
            "pmime",
            "directed causality network",
            &["source", "target", "weight"],
        );
        for edge in &p.network.edges {
            e.rows.push(vec![
                edge.source.clone(),
                edge.target.clone(),
                num(edge.weight),
            ]);
        }
        out.push(m);
        out.push(e);
    }

    if let Some(b) = &s.beast {
        let mut ncp = Table::new(
            "beast_ncp.csv",
            "beast",
            "changepoint count distributions and cumulative counts",
            &[
                "series",
                "component",
                "count",
                "probability",
                "probability_at_least",
            ],
        );
        let mut cps = Table::new(
            "beast_changepoints.csv",
            "beast",
            "extracted changepoints with probabilities and jumps",
            &[
                "series",
                "component",
                "date",
                "index",
                "probability",
                "jump",
            ],
        );
        for sm in &b.summaries {
            let mut comp = Table::new(
                format!("beast_{}_components.csv", file_stem(&sm.series_id)),
                "beast",
                "nine-panel decomposition: data, season, trend, probabilities, orders, slope signs, residual",
                &[
                    "date",
                    "observed",
                    "seasonal",
                    "seasonal_lower",
                    "seasonal_upper",
                    "seasonal_cp_prob",
                    "seasonal_order",
                    "trend",
                    "trend_lower",
                    "trend_upper",
                    "trend_cp_prob",
                    "trend_order",
                    "slope_positive",
                    "slope_zero",
                    "slope_negative",
                    "residual",
                ],
            );
            for t in 0..sm.len() {
                let sl = &sm.slope_sign[t];
                comp.rows.push(vec![
                    sm.dates[t].to_string(),
                    num(sm.observed[t]),
                    num(sm.fitted_seasonal.mean[t]),
                    num(sm.fitted_seasonal.lower[t]),
                    num(sm.fitted_seasonal.upper[t]),
                    num(sm.seasonal_cp_prob[t]),
                    num(sm.seasonal_order[t]),
                    num(sm.fitted_trend.mean[t]),
                    num(sm.fitted_trend.lower[t]),
                    num(sm.fitted_trend.upper[t]),
                    num(sm.trend_cp_prob[t]),
                    // trend segments are always linear
                    "1".into(),
                    num(sl.positive),
                    num(sl.zero),
                    num(sl.negative),
                    num(sm.residual[t]),
                ]);
            }
            out.push(comp);
            for (name, dist) in [
                ("trend", &sm.ncp_trend_dist),
                ("seasonal", &sm.ncp_seasonal_dist),
            ] {
                let mut tail = 0.0;
                let mut at_least = vec![0.0; dist.len()];
                for m in (0..dist.len()).rev() {
                    tail += dist[m];
                    at_least[m] = tail;
                }
                for (m, p) in dist.iter().enumerate() {
                    ncp.rows.push(vec![
                        sm.series_id.clone(),
                        name.into(),
                        m.to_string(),
                        num(*p),
                        num(at_least[m].min(1.0)),
                    ]);
                }
            }
            for (name, list) in [
                ("trend", &sm.extracted_cps),
                ("seasonal", &sm.extracted_seasonal_cps),
            ] {
                for c in list {
                    cps.rows.push(vec![
                        sm.series_id.clone(),
                        name.into(),
                        c.date.to_string(),
                        c.index.to_string(),
                        num(c.probability),
                        num(c.jump),
                    ]);
                }
            }
        }
        out.push(ncp);
        out.push(cps);
        if let Some(m) = &b.trend_correlation {
            out.push(matrix_table(
                "beast_trend_correlation.csv",
                "beast",
                "correlation matrix of trend curves",
                m,
            ));
        }
    }

    if let Some(e) = &s.events {
        let mut t = Table::new(
            "events_breakpoints.csv",
            "events",
            "breakpoints against critical events (lead, lag, concurrent, hidden)",
            &[
                "market",
                "date",
                "probability",
                "event",
                "event_date",
                "relation",
                "offset_days",
                "tol_days",
            ],
        );
        for r in &e.reports {
            for m in &r.matches {
                t.rows.push(vec![
                    r.market.clone(),
                    m.date.to_string(),
                    num(m.probability),
                    opt(&m.event),
                    opt(&m.event_date),
                    m.relation.label().into(),
                    opt(&m.offset_days),
                    opt(&m.tol_days),
                ]);
            }
        }
        out.push(t);
    }

    out
}

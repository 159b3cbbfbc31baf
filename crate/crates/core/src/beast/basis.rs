//! Regression basis of a model structure and its conjugate evidence.
//!
//! Every column is a short linear combination of a few global base
//! functions (1, the time index t, and the sine/cosine harmonics)
//! restricted to an index range. Cross products of any two columns are
//! therefore differences of prefix sums of base-function products, so the
//! Gram matrix of a structure costs O(k²) lookups instead of O(n·k²).

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{BeastError, ModelStructure, Result, SeasonMode};

/// Up to two (base function, weight) terms on `start..end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Column {
    terms: [(usize, f64); 2],
    len: usize,
    start: usize,
    end: usize,
}

impl Column {
    fn single(base: usize, start: usize, end: usize) -> Self {
        Column {
            terms: [(base, 1.0), (0, 0.0)],
            len: 1,
            start,
            end,
        }
    }

    fn terms(&self) -> &[(usize, f64)] {
        &self.terms[..self.len]
    }
}

const ONE: usize = 0;
const TIME: usize = 1;

fn sin_base(l: usize) -> usize {
    2 + 2 * (l - 1)
}

fn cos_base(l: usize) -> usize {
    3 + 2 * (l - 1)
}

/// Columns in the order: per trend segment (intercept, slope), then per
/// seasonal segment (sin 1, cos 1, sin 2, cos 2, …).
pub(crate) fn columns(s: &ModelStructure, n: usize) -> Vec<Column> {
    let mut cols = Vec::with_capacity(s.n_columns());
    for (start, end) in segments(&s.trend_knots, n) {
        cols.push(Column::single(ONE, start, end));
        cols.push(Column {
            terms: [(TIME, 1.0), (ONE, -(start as f64))],
            len: 2,
            start,
            end,
        });
    }
    if s.season_mode == SeasonMode::Harmonic {
        for ((start, end), &order) in segments(&s.seasonal_knots, n).zip(&s.harmonic_orders) {
            for l in 1..=order {
                cols.push(Column::single(sin_base(l), start, end));
                cols.push(Column::single(cos_base(l), start, end));
            }
        }
    }
    cols
}

/// `(start, end)` of each segment delimited by `knots` on `0..n`.
pub(crate) fn segments(knots: &[usize], n: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    let starts = std::iter::once(0).chain(knots.iter().copied());
    let ends = knots.iter().copied().chain(std::iter::once(n));
    starts.zip(ends)
}

fn base_value(base: usize, t: usize, period: f64) -> f64 {
    match base {
        ONE => 1.0,
        TIME => t as f64,
        b => {
            let l = (b - 2) / 2 + 1;
            let arg = 2.0 * PI * l as f64 * t as f64 / period;
            if (b - 2) % 2 == 0 {
                arg.sin()
            } else {
                arg.cos()
            }
        }
    }
}

/// Dense n × k design matrix.
pub fn design_matrix(s: &ModelStructure, n: usize) -> Result<DMatrix<f64>> {
    s.check_segment_sizes(n)?;
    let cols = columns(s, n);
    let mut x = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        for t in c.start..c.end {
            x[(t, j)] = c
                .terms()
                .iter()
                .map(|&(b, w)| w * base_value(b, t, s.period))
                .sum();
        }
    }
    Ok(x)
}

/// Prefix sums of every pairwise product of base functions and of each base
/// function with the response.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    pub n: usize,
    n_base: usize,
    pair: Vec<Vec<f64>>,
    cross: Vec<Vec<f64>>,
    pub yy: f64,
}

fn prefix(values: impl Iterator<Item = f64>, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for v in values {
        acc += v;
        out.push(acc);
    }
    out
}

impl Basis {
    pub fn new(y: &[f64], period: f64, max_order: usize) -> Self {
        let n = y.len();
        let n_base = 2 + 2 * max_order;
        let values: Vec<Vec<f64>> = (0..n_base)
            .map(|b| (0..n).map(|t| base_value(b, t, period)).collect())
            .collect();
        let mut pair = Vec::with_capacity(n_base * (n_base + 1) / 2);
        for a in 0..n_base {
            for b in a..n_base {
                pair.push(prefix((0..n).map(|t| values[a][t] * values[b][t]), n));
            }
        }
        let cross = values
            .iter()
            .map(|v| prefix(v.iter().zip(y).map(|(f, yv)| f * yv), n))
            .collect();
        Basis {
            n,
            n_base,
            pair,
            cross,
            yy: y.iter().map(|v| v * v).sum(),
        }
    }

    fn pair_index(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        a * self.n_base - a * (a + 1) / 2 + b
    }

    fn inner(&self, c1: &Column, c2: &Column) -> f64 {
        let lo = c1.start.max(c2.start);
        let hi = c1.end.min(c2.end);
        if lo >= hi {
            return 0.0;
        }
        let mut total = 0.0;
        for &(a, wa) in c1.terms() {
            for &(b, wb) in c2.terms() {
                let p = &self.pair[self.pair_index(a, b)];
                total += wa * wb * (p[hi] - p[lo]);
            }
        }
        total
    }

    fn cross_y(&self, c: &Column) -> f64 {
        c.terms()
            .iter()
            .map(|&(a, w)| w * (self.cross[a][c.end] - self.cross[a][c.start]))
            .sum()
    }
}

/// Conjugate posterior of one structure at a fixed ν.
#[derive(Debug, Clone)]
pub(crate) struct Posterior {
    pub log_evidence: f64,
    /// Lower Cholesky factor of X'X + νI, row-major k × k.
    pub chol: Vec<f64>,
    pub mean: Vec<f64>,
    pub a_n: f64,
    pub b_n: f64,
    pub k: usize,
}

/// In-place lower Cholesky of a row-major k × k matrix.
fn cholesky(m: &mut [f64], k: usize) -> bool {
    for j in 0..k {
        let mut d = m[j * k + j];
        for p in 0..j {
            d -= m[j * k + p] * m[j * k + p];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        m[j * k + j] = d;
        for i in j + 1..k {
            let mut s = m[i * k + j];
            for p in 0..j {
                s -= m[i * k + p] * m[j * k + p];
            }
            m[i * k + j] = s / d;
        }
        for p in j + 1..k {
            m[j * k + p] = 0.0;
        }
    }
    true
}

/// Solves L x = b in place.
pub(crate) fn forward(l: &[f64], k: usize, b: &mut [f64]) {
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * k + p] * b[p];
        }
        b[i] = s / l[i * k + i];
    }
}

/// Solves Lᵀ x = b in place.
pub(crate) fn backward(l: &[f64], k: usize, b: &mut [f64]) {
    for i in (0..k).rev() {
        let mut s = b[i];
        for p in i + 1..k {
            s -= l[p * k + i] * b[p];
        }
        b[i] = s / l[i * k + i];
    }
}

/// Normal–inverse-gamma prior constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Conjugate {
    pub a0: f64,
    pub b0: f64,
}

/// log p(y | structure, ν) with β and σ² integrated out, plus the pieces
/// needed to draw from p(β, σ² | y, structure, ν).
pub(crate) fn posterior(
    basis: &Basis,
    s: &ModelStructure,
    nu: f64,
    prior: Conjugate,
) -> Result<Posterior> {
    let cols = columns(s, basis.n);
    let k = cols.len();
    let mut g = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let v = basis.inner(&cols[i], &cols[j]);
            g[i * k + j] = v;
            g[j * k + i] = v;
        }
        g[i * k + i] += nu;
    }
    let xty: Vec<f64> = cols.iter().map(|c| basis.cross_y(c)).collect();
    if !cholesky(&mut g, k) {
        return Err(BeastError::SingularSegment);
    }
    let mut mean = xty.clone();
    forward(&g, k, &mut mean);
    let quad: f64 = mean.iter().map(|v| v * v).sum();
    backward(&g, k, &mut mean);
    let log_det: f64 = (0..k).map(|i| 2.0 * g[i * k + i].ln()).sum();
    let n = basis.n as f64;
    let a_n = prior.a0 + n / 2.0;
    let b_n = prior.b0 + 0.5 * (basis.yy - quad).max(0.0);
    let log_evidence = -0.5 * n * (2.0 * PI).ln() + 0.5 * k as f64 * nu.ln() - 0.5 * log_det
        + prior.a0 * prior.b0.ln()
        - a_n * b_n.ln()
        + statrs::function::gamma::ln_gamma(a_n)
        - statrs::function::gamma::ln_gamma(prior.a0);
    if !log_evidence.is_finite() {
        return Err(BeastError::NumericalUnderflow);
    }
    Ok(Posterior {
        log_evidence,
        chol: g,
        mean,
        a_n,
        b_n,
        k,
    })
}

//! Seeded generators with known ground truth, used as oracles by the
//! estimator tests: exact fractional Gaussian noise, coupled linear VAR
//! systems, piecewise trend + seasonal series, and closed-form MI values.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::infotheory::DiscreteJoint;
use crate::series::{Panel, SeriesError, TimeSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("Hurst parameter {0} outside (0, 1)")]
    InvalidHurst(f64),
    #[error("series length {0} below the minimum of 16")]
    TooShort(usize),
    #[error("circulant embedding has negative eigenvalue {0}")]
    EmbeddingFailure(f64),
    #[error("coupling matrix has spectral radius {0} >= 1")]
    Unstable(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

pub type Result<T> = std::result::Result<T, SynthError>;

pub const MIN_LEN: usize = 16;

/// Day zero for generated series.
pub fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white_noise(n: usize, sd: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut r);
            sd * e
        })
        .collect()
}

/// Autocovariance of unit-variance fGn at lag `k`.
pub fn fgn_autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// Unit-variance fractional Gaussian noise with exact covariance, by
/// circulant embedding. Falls back to a Cholesky factorisation of the
/// Toeplitz covariance if the embedding is not non-negative definite.
pub fn gen_fgn(h: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    validate_fgn(h, n)?;
    match fgn_circulant(h, n, seed) {
        Ok(v) => Ok(v),
        Err(SynthError::EmbeddingFailure(_)) => fgn_cholesky(h, n, seed),
        Err(e) => Err(e),
    }
}

fn validate_fgn(h: f64, n: usize) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(SynthError::InvalidHurst(h));
    }
    if n < MIN_LEN {
        return Err(SynthError::TooShort(n));
    }
    Ok(())
}

pub fn fgn_circulant(h: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    validate_fgn(h, n)?;
    let half = n.next_power_of_two();
    let m = 2 * half;
    // first row of the circulant: γ(0..=half) then mirrored γ(half−1..1)
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= half { j } else { m - j };
            Complex::new(fgn_autocovariance(h, lag), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let min_eig = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 {
        return Err(SynthError::EmbeddingFailure(min_eig));
    }

    let mut r = rng(seed);
    let mut w: Vec<Complex<f64>> = row
        .iter()
        .map(|lambda| {
            let s = (lambda.re.max(0.0) / m as f64).sqrt();
            let a: f64 = StandardNormal.sample(&mut r);
            let b: f64 = StandardNormal.sample(&mut r);
            Complex::new(s * a, s * b)
        })
        .collect();
    fft.process(&mut w);
    Ok(w[..n].iter().map(|c| c.re).collect())
}

pub fn fgn_cholesky(h: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    validate_fgn(h, n)?;
    if n > 8192 {
        return Err(SynthError::InvalidParams(format!(
            "Cholesky fallback limited to n ≤ 8192, got {n}"
        )));
    }
    let cov = DMatrix::from_fn(n, n, |i, j| fgn_autocovariance(h, i.abs_diff(j)));
    let chol = cov
        .cholesky()
        .ok_or_else(|| SynthError::InvalidParams("covariance not positive definite".into()))?;
    let z = nalgebra::DVector::from_vec(white_noise(n, 1.0, seed));
    Ok((chol.l() * z).iter().copied().collect())
}

/// Fractional Brownian motion path: cumulative sum of [`gen_fgn`].
pub fn gen_fbm(h: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(cumsum(&gen_fgn(h, n, seed)?))
}

pub fn cumsum(x: &[f64]) -> Vec<f64> {
    x.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// A VAR(1) system with its true directed-coupling mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledSystem {
    pub panel: Panel,
    /// `truth[i][j]` is true when series `i` drives series `j`.
    pub truth: Vec<Vec<bool>>,
}

pub fn spectral_radius(a: &[Vec<f64>]) -> f64 {
    let k = a.len();
    if k == 0 {
        return 0.0;
    }
    let m = DMatrix::from_fn(k, k, |i, j| a[i][j]);
    if m.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    // the unbounded eigenvalue routine can spin forever on some inputs
    match nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max),
        None => gelfand_radius(m),
    }
}

/// ρ(A) = lim ‖A^(2^j)‖^(1/2^j), with per-step rescaling to avoid overflow.
fn gelfand_radius(mut m: DMatrix<f64>) -> f64 {
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..20 {
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        m /= norm;
        log_scale += norm.ln() / power;
        m = &m * &m;
        power *= 2.0;
    }
    (log_scale + m.norm().ln() / power).exp()
}

/// `x_t = A·x_{t−1} + ε_t` with i.i.d. Gaussian ε. `a[i][j]` is the effect
/// of series `j` at `t−1` on series `i` at `t`. A burn-in of 500 steps is
/// discarded.
pub fn gen_var_coupled(
    a: &[Vec<f64>],
    noise_sd: f64,
    n: usize,
    seed: u64,
) -> Result<CoupledSystem> {
    const BURN_IN: usize = 500;
    let k = a.len();
    if k == 0 || a.iter().any(|r| r.len() != k) {
        return Err(SynthError::InvalidParams(
            "coupling matrix must be square".into(),
        ));
    }
    if n < MIN_LEN {
        return Err(SynthError::TooShort(n));
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(SynthError::Unstable(rho));
    }
    let normal =
        Normal::new(0.0, noise_sd).map_err(|e| SynthError::InvalidParams(e.to_string()))?;
    let mut r = rng(seed);
    let mut x = vec![0.0; k];
    let mut cols = vec![Vec::with_capacity(n); k];
    for t in 0..n + BURN_IN {
        let next: Vec<f64> = (0..k)
            .map(|i| {
                let drift: f64 = (0..k).map(|j| a[i][j] * x[j]).sum();
                drift + normal.sample(&mut r)
            })
            .collect();
        x = next;
        if t >= BURN_IN {
            for i in 0..k {
                cols[i].push(x[i]);
            }
        }
    }
    let panel = Panel::from_columns(
        epoch(),
        cols.into_iter()
            .enumerate()
            .map(|(i, c)| (format!("x{}", i + 1), c))
            .collect(),
    )?;
    let truth = (0..k)
        .map(|i| (0..k).map(|j| i != j && a[j][i] != 0.0).collect())
        .collect();
    Ok(CoupledSystem { panel, truth })
}

/// Piecewise-linear trend plus a single sine harmonic plus noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSpec {
    /// Indices where a new trend segment starts.
    pub knots: Vec<usize>,
    /// Trend value at the first index of each segment.
    pub levels: Vec<f64>,
    /// Trend slope per observation within each segment.
    pub slopes: Vec<f64>,
    pub amplitude: f64,
    pub period: f64,
    pub noise_sd: f64,
}

impl PiecewiseSpec {
    /// Trend slope change at 200 and a level jump at 350 on 500 points,
    /// with a weekly cycle.
    ///
    /// The kink is continuous, so its location is only pinned down by the
    /// slope change: the misfit of a knot placed d steps off grows like
    /// δ²d³/(6σ²). A change of δ = 0.6 per step at σ = 0.5 makes a 3-step
    /// error cost several nats, which is what ±3 localisation needs.
    pub fn two_changepoint_fixture() -> Self {
        PiecewiseSpec {
            knots: vec![200, 350],
            levels: vec![0.0, 60.0, 18.0],
            slopes: vec![0.3, -0.3, 0.0],
            amplitude: 1.0,
            period: 7.0,
            noise_sd: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSeries {
    pub values: Vec<f64>,
    pub trend: Vec<f64>,
    pub changepoints: Vec<usize>,
}

pub fn gen_piecewise(spec: &PiecewiseSpec, n: usize, seed: u64) -> Result<PiecewiseSeries> {
    let segments = spec.knots.len() + 1;
    if spec.levels.len() != segments || spec.slopes.len() != segments {
        return Err(SynthError::InvalidParams(
            "levels and slopes need one entry per segment".into(),
        ));
    }
    if spec.knots.windows(2).any(|w| w[0] >= w[1]) || spec.knots.iter().any(|&k| k == 0 || k >= n) {
        return Err(SynthError::InvalidParams(
            "knots must be increasing and interior".into(),
        ));
    }
    if spec.period < 2.0 {
        return Err(SynthError::InvalidParams(
            "period must be at least 2".into(),
        ));
    }
    let noise = white_noise(n, spec.noise_sd, seed);
    let mut trend = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut seg = 0;
    let mut start = 0;
    for (t, e) in noise.iter().enumerate() {
        if seg < spec.knots.len() && t == spec.knots[seg] {
            seg += 1;
            start = t;
        }
        let tr = spec.levels[seg] + spec.slopes[seg] * (t - start) as f64;
        let season = spec.amplitude * (2.0 * std::f64::consts::PI * t as f64 / spec.period).sin();
        trend.push(tr);
        values.push(tr + season + e);
    }
    Ok(PiecewiseSeries {
        values,
        trend,
        changepoints: spec.knots.clone(),
    })
}

/// Everything the `synth` command can produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Fgn {
        h: f64,
        n: usize,
        seed: u64,
    },
    Fbm {
        h: f64,
        n: usize,
        seed: u64,
    },
    WhiteNoise {
        sd: f64,
        n: usize,
        seed: u64,
    },
    VarCoupled {
        coupling: Vec<Vec<f64>>,
        noise_sd: f64,
        n: usize,
        seed: u64,
    },
    PiecewiseTrendSeasonal {
        spec: PiecewiseSpec,
        n: usize,
        seed: u64,
    },
    FixturePanel {
        n: usize,
        seed: u64,
    },
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<Panel> {
        let single = |id: &str, v: Vec<f64>| -> Result<Panel> {
            Ok(Panel::new(vec![TimeSeries::from_values(id, epoch(), &v)?])?)
        };
        match self {
            GeneratorSpec::Fgn { h, n, seed } => single("fgn", gen_fgn(*h, *n, *seed)?),
            GeneratorSpec::Fbm { h, n, seed } => single("fbm", gen_fbm(*h, *n, *seed)?),
            GeneratorSpec::WhiteNoise { sd, n, seed } => {
                if *n < MIN_LEN {
                    return Err(SynthError::TooShort(*n));
                }
                single("noise", white_noise(*n, *sd, *seed))
            }
            GeneratorSpec::VarCoupled {
                coupling,
                noise_sd,
                n,
                seed,
            } => Ok(gen_var_coupled(coupling, *noise_sd, *n, *seed)?.panel),
            GeneratorSpec::PiecewiseTrendSeasonal { spec, n, seed } => {
                single("piecewise", gen_piecewise(spec, *n, *seed)?.values)
            }
            GeneratorSpec::FixturePanel { n, seed } => fixture_panel(*n, *seed),
        }
    }
}

/// Coupling matrix where series 1 drives series 2 with weight `c`.
pub fn unidirectional_coupling(c: f64) -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![c, 0.0]]
}

/// Three series in a chain 1 → 2 → 3, each link with weight `c`.
pub fn chain_coupling(c: f64) -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0, 0.0], vec![c, 0.0, 0.0], vec![0.0, c, 0.0]]
}

/// Three positive price-like series for end-to-end runs.
///
/// `A` is 100 plus the two-changepoint fixture, `B` follows `A` with a
/// one-day delay and `C` is an independent geometric fBm path (H = 0.7).
pub fn fixture_panel(n: usize, seed: u64) -> Result<Panel> {
    let spec = PiecewiseSpec::two_changepoint_fixture();
    if n <= spec.knots[1] {
        return Err(SynthError::InvalidParams(format!(
            "fixture panel needs more than {} points",
            spec.knots[1]
        )));
    }
    let a: Vec<f64> = gen_piecewise(&spec, n, seed)?
        .values
        .iter()
        .map(|v| 100.0 + v)
        .collect();
    let noise = white_noise(n, 0.5, seed.wrapping_add(1));
    let b: Vec<f64> = (0..n)
        .map(|t| {
            let prev = if t == 0 { 0.0 } else { a[t - 1] - 100.0 };
            100.0 + 0.8 * prev + noise[t]
        })
        .collect();
    let c: Vec<f64> = gen_fbm(0.7, n, seed.wrapping_add(2))?
        .iter()
        .map(|v| 100.0 * (0.01 * v).exp())
        .collect();
    Ok(Panel::from_columns(
        epoch(),
        vec![("A".into(), a), ("B".into(), b), ("C".into(), c)],
    )?)
}

/// Direct double sum Σ p(x,y) ln[p(x,y) / (p(x) p(y))].
pub fn brute_force_mi(j: &DiscreteJoint) -> f64 {
    let n = j.n() as f64;
    let counts = j.counts();
    let rows: Vec<f64> = counts
        .iter()
        .map(|r| r.iter().sum::<u64>() as f64)
        .collect();
    let cols: Vec<f64> = (0..counts[0].len())
        .map(|c| counts.iter().map(|r| r[c]).sum::<u64>() as f64)
        .collect();
    let mut total = 0.0;
    for (x, row) in counts.iter().enumerate() {
        for (y, &c) in row.iter().enumerate() {
            if c > 0 {
                let pxy = c as f64 / n;
                total += pxy * (pxy / ((rows[x] / n) * (cols[y] / n))).ln();
            }
        }
    }
    total
}

/// MI of a bivariate Gaussian with correlation `rho`, in nats.
pub fn gaussian_mi_oracle(rho: f64) -> f64 {
    -0.5 * (1.0 - rho * rho).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::mutual_information_discrete;
    use crate::series::{mean, pearson, variance};

    fn lag1_autocov(x: &[f64]) -> f64 {
        let m = mean(x);
        x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn fgn_half_is_white() {
        let n = 8192;
        let x = gen_fgn(0.5, n, 1).unwrap();
        let r = lag1_autocov(&x) / variance(&x);
        assert!(r.abs() < 3.0 / (n as f64).sqrt(), "{r}");
    }

    #[test]
    fn fgn_lag1_autocovariance() {
        let n = 8192;
        let truth = (2f64.powf(1.4) - 2.0) / 2.0;
        assert!((truth - 0.3195).abs() < 1e-4);
        // standard error of the lag-1 estimate over independent replicates
        let est: Vec<f64> = (0..40)
            .map(|s| lag1_autocov(&gen_fgn(0.7, n, s).unwrap()))
            .collect();
        let se = (variance(&est) * 40.0 / 39.0).sqrt();
        let single = est[0];
        assert!(
            (single - truth).abs() < 3.0 * se,
            "{single} vs {truth} (se {se})"
        );
        assert!((mean(&est) - truth).abs() < 3.0 * se / (40f64).sqrt() + 0.01);
    }

    #[test]
    fn fbm_variance_scaling() {
        let n = 1 << 15;
        for h in [0.3, 0.5, 0.7] {
            let path = gen_fbm(h, n, 42).unwrap();
            let taus: Vec<usize> = vec![1, 2, 4, 8, 16, 32, 64];
            let pts: Vec<(f64, f64)> = taus
                .iter()
                .map(|&tau| {
                    let inc: Vec<f64> = path.windows(tau + 1).map(|w| w[tau] - w[0]).collect();
                    ((tau as f64).ln(), variance(&inc).ln())
                })
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let (mx, my) = (mean(&xs), mean(&ys));
            let slope = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (x - mx) * (y - my))
                .sum::<f64>()
                / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
            assert!((slope - 2.0 * h).abs() < 0.05, "h={h} slope={slope}");
        }
    }

    #[test]
    fn cholesky_fallback_matches_covariance() {
        let est: Vec<f64> = (0..200)
            .map(|s| {
                let x = fgn_cholesky(0.7, 64, s).unwrap();
                x.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / 63.0
            })
            .collect();
        assert!((mean(&est) - 0.3195).abs() < 0.03);
    }

    #[test]
    fn fgn_rejects_bad_input() {
        assert_eq!(gen_fgn(1.0, 100, 0), Err(SynthError::InvalidHurst(1.0)));
        assert_eq!(gen_fgn(0.5, 8, 0), Err(SynthError::TooShort(8)));
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(gen_fgn(0.3, 500, 9).unwrap(), gen_fgn(0.3, 500, 9).unwrap());
        assert_ne!(
            gen_fgn(0.3, 500, 9).unwrap(),
            gen_fgn(0.3, 500, 10).unwrap()
        );
    }

    #[test]
    fn var_zero_coupling_is_independent() {
        let sys = gen_var_coupled(&vec![vec![0.0; 3]; 3], 1.0, 2000, 1).unwrap();
        assert_eq!(sys.panel.width(), 3);
        assert!(sys.truth.iter().flatten().all(|&t| !t));
        let cols = sys.panel.columns();
        assert!(pearson(&cols[0], &cols[1]).unwrap().abs() < 0.1);
    }

    #[test]
    fn var_single_coupling_cross_correlation() {
        let a = vec![vec![0.0, 0.0], vec![0.9, 0.0]];
        let sys = gen_var_coupled(&a, 1.0, 5000, 3).unwrap();
        assert!(sys.truth[0][1]);
        assert!(!sys.truth[1][0]);
        let cols = sys.panel.columns();
        let r = pearson(&cols[0][..4999], &cols[1][1..]).unwrap();
        // stationary value 0.9/sqrt(1.81) ≈ 0.669
        assert!(r > 0.5, "{r}");
    }

    #[test]
    fn spectral_radius_paths_agree() {
        let a = vec![vec![0.5, 0.4], vec![-0.3, 0.2]];
        // complex pair, so |λ|² equals the determinant 0.22
        let truth = 0.22f64.sqrt();
        assert!((spectral_radius(&a) - truth).abs() < 1e-12);
        let m = DMatrix::from_fn(2, 2, |i, j| a[i][j]);
        assert!((gelfand_radius(m) - truth).abs() < 1e-4);
        assert_eq!(
            spectral_radius(&[vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]]),
            0.0
        );
    }

    #[test]
    fn var_unstable_rejected() {
        let a = vec![vec![1.1, 0.0], vec![0.0, 0.2]];
        assert!(matches!(
            gen_var_coupled(&a, 1.0, 100, 0),
            Err(SynthError::Unstable(_))
        ));
    }

    #[test]
    fn piecewise_noiseless_is_exact() {
        let spec = PiecewiseSpec {
            knots: vec![50],
            levels: vec![1.0, 10.0],
            slopes: vec![0.5, -1.0],
            amplitude: 0.0,
            period: 7.0,
            noise_sd: 0.0,
        };
        let s = gen_piecewise(&spec, 100, 0).unwrap();
        assert_eq!(s.values[49], 1.0 + 0.5 * 49.0);
        assert_eq!(s.values[50], 10.0);
        assert_eq!(s.values[99], 10.0 - 49.0);
        assert_eq!(s.values, s.trend);
        assert_eq!(s.changepoints, vec![50]);
    }

    #[test]
    fn gaussian_oracle_values() {
        assert_eq!(gaussian_mi_oracle(0.0), 0.0);
        assert!((gaussian_mi_oracle(0.5) - 0.14384).abs() < 1e-5);
    }

    #[test]
    fn brute_force_matches_entropy_route() {
        let j = DiscreteJoint::new(vec![vec![40, 10], vec![10, 40]]).unwrap();
        assert!((brute_force_mi(&j) - mutual_information_discrete(&j).value).abs() < 1e-12);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = GeneratorSpec::VarCoupled {
            coupling: vec![vec![0.0, 0.0], vec![0.9, 0.0]],
            noise_sd: 1.0,
            n: 100,
            seed: 4,
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: GeneratorSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.generate().unwrap(), spec.generate().unwrap());
    }

    #[test]
    fn fixture_panel_is_positive_and_lagged() {
        let p = fixture_panel(500, 3).unwrap();
        assert_eq!(p.ids(), vec!["A", "B", "C"]);
        assert!(p
            .series()
            .iter()
            .all(|s| s.values().iter().all(|v| *v > 0.0)));
        let cols = p.columns();
        let lagged = crate::series::pearson(&cols[0][..499], &cols[1][1..]).unwrap();
        assert!(lagged > 0.95, "{lagged}");
        assert!(fixture_panel(300, 3).is_err());
    }
}

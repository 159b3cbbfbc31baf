//! Kraskov–Stögbauer–Grassberger estimators (first algorithm) under the
//! maximum norm, plus the Frenzel–Pompe conditional variant.
//!
//! For each sample the distance ε to its k-th neighbour in the joint space
//! fixes a neighbourhood; the estimators then count how many samples fall
//! strictly inside ε in each marginal subspace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EstimatorKind, InfoError, MiEstimate, Result};
use crate::neighbors::{KdTree, RangeCounter};
use crate::series::std_dev;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsgConfig {
    pub k: usize,
    pub seed: u64,
    /// Tie-breaking noise amplitude relative to each column's standard deviation.
    pub jitter: f64,
}

impl Default for KsgConfig {
    fn default() -> Self {
        Self {
            k: 4,
            seed: 0,
            jitter: 1e-10,
        }
    }
}

/// ψ(1), …, ψ(n) via ψ(m+1) = ψ(m) + 1/m. Index 0 is unused.
pub(crate) fn digamma_table(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    if n >= 1 {
        t[1] = -EULER_GAMMA;
    }
    for m in 1..n {
        t[m + 1] = t[m] + 1.0 / m as f64;
    }
    t
}

/// Content hash of a column, so the same data always receives the same
/// jitter no matter which argument slot it is passed in.
fn column_hash(x: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in x {
        h ^= v.to_bits();
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Adds uniform noise of amplitude `rel · sd(x)` to break exact ties.
pub fn jitter_column(x: &[f64], seed: u64, rel: f64) -> Vec<f64> {
    let scale = rel * std_dev(x);
    if scale == 0.0 {
        return x.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ column_hash(x));
    x.iter()
        .map(|v| v + scale * (rng.gen::<f64>() - 0.5))
        .collect()
}

/// Row-major layout of a group of equal-length columns.
pub(crate) fn to_rows(columns: &[&[f64]]) -> Vec<f64> {
    let n = columns.first().map(|c| c.len()).unwrap_or(0);
    let d = columns.len();
    let mut out = vec![0.0; n * d];
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            out[i * d + j] = *v;
        }
    }
    out
}

/// I(X;Y) for column groups `x`, `y`, no preprocessing.
pub fn ksg_mi(x: &[&[f64]], y: &[&[f64]], k: usize) -> f64 {
    let n = x[0].len();
    let (dx, dy) = (x.len(), y.len());
    let joint_cols: Vec<&[f64]> = x.iter().chain(y).copied().collect();
    let joint = to_rows(&joint_cols);
    let xr = to_rows(x);
    let yr = to_rows(y);
    let tree = KdTree::build(&joint, dx + dy);
    let cx = RangeCounter::build(&xr, dx);
    let cy = RangeCounter::build(&yr, dy);
    let psi = digamma_table(n + 1);
    let d = dx + dy;
    let mut acc = 0.0;
    for i in 0..n {
        let eps = tree.kth_distance(&joint[i * d..(i + 1) * d], k, i);
        let nx = cx
            .count_within(&xr[i * dx..(i + 1) * dx], eps)
            .saturating_sub(1);
        let ny = cy
            .count_within(&yr[i * dy..(i + 1) * dy], eps)
            .saturating_sub(1);
        acc += psi[nx + 1] + psi[ny + 1];
    }
    psi[k] + psi[n] - acc / n as f64
}

/// I(X;Y|Z). With an empty `z` this is [`ksg_mi`].
pub fn ksg_cmi(x: &[&[f64]], y: &[&[f64]], z: &[&[f64]], k: usize) -> f64 {
    if z.is_empty() {
        return ksg_mi(x, y, k);
    }
    let n = x[0].len();
    let (dx, dy, dz) = (x.len(), y.len(), z.len());
    let xz_cols: Vec<&[f64]> = x.iter().chain(z).copied().collect();
    let yz_cols: Vec<&[f64]> = y.iter().chain(z).copied().collect();
    let joint_cols: Vec<&[f64]> = x.iter().chain(y).chain(z).copied().collect();
    let joint = to_rows(&joint_cols);
    let xz = to_rows(&xz_cols);
    let yz = to_rows(&yz_cols);
    let zr = to_rows(z);
    let d = dx + dy + dz;
    let tree = KdTree::build(&joint, d);
    let cxz = RangeCounter::build(&xz, dx + dz);
    let cyz = RangeCounter::build(&yz, dy + dz);
    let cz = RangeCounter::build(&zr, dz);
    let psi = digamma_table(n + 1);
    let mut acc = 0.0;
    for i in 0..n {
        let eps = tree.kth_distance(&joint[i * d..(i + 1) * d], k, i);
        let nxz = cxz
            .count_within(&xz[i * (dx + dz)..(i + 1) * (dx + dz)], eps)
            .saturating_sub(1);
        let nyz = cyz
            .count_within(&yz[i * (dy + dz)..(i + 1) * (dy + dz)], eps)
            .saturating_sub(1);
        let nz = cz
            .count_within(&zr[i * dz..(i + 1) * dz], eps)
            .saturating_sub(1);
        acc += psi[nxz + 1] + psi[nyz + 1] - psi[nz + 1];
    }
    psi[k] - acc / n as f64
}

/// KSG mutual information of two scalar sequences with seeded tie-jitter.
pub fn mi_knn(x: &[f64], y: &[f64], cfg: KsgConfig) -> Result<MiEstimate> {
    const MIN_LEN: usize = 50;
    if x.len() != y.len() {
        return Err(InfoError::LengthMismatch);
    }
    let n = x.len();
    if n < MIN_LEN {
        return Err(InfoError::TooShort {
            needed: MIN_LEN,
            got: n,
        });
    }
    if cfg.k == 0 || 2 * cfg.k >= n {
        return Err(InfoError::InvalidK { k: cfg.k, n });
    }
    if std_dev(x) == 0.0 {
        return Err(InfoError::DegenerateDimension("x".into()));
    }
    if std_dev(y) == 0.0 {
        return Err(InfoError::DegenerateDimension("y".into()));
    }
    let xj = jitter_column(x, cfg.seed, cfg.jitter);
    let yj = jitter_column(y, cfg.seed, cfg.jitter);
    let value = ksg_mi(&[&xj], &[&yj], cfg.k);
    let psi = digamma_table(n + 1);
    let ceiling = psi[n] - psi[cfg.k];
    Ok(MiEstimate {
        value,
        estimator: EstimatorKind::Knn,
        param: cfg.k,
        negative: value < 0.0,
        near_degenerate: value >= 0.9 * ceiling,
    })
}

//! Entropy and mutual information. Plug-in estimators over contingency
//! tables, equiprobable-bin MI for continuous samples, and the Kraskov
//! k-nearest-neighbour estimators (see [`ksg`]). All values are in nats.

pub mod ksg;
mod rolling;

pub use ksg::{ksg_cmi, ksg_mi, mi_knn, KsgConfig};
pub use rolling::{mi_decoupling, rolling_mi, DecouplingEvent, MiEstimator};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("probabilities must be non-negative and sum to 1 (sum = {0})")]
    NotNormalized(f64),
    #[error("contingency table is empty")]
    EmptyTable,
    #[error("contingency table rows have unequal lengths")]
    RaggedTable,
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("input {0} is constant")]
    DegenerateDimension(String),
    #[error("neighbour count k = {k} invalid for {n} samples")]
    InvalidK { k: usize, n: usize },
    #[error("inputs have different lengths")]
    LengthMismatch,
    #[error("curves share no dates")]
    NoOverlap,
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
}

pub type Result<T> = std::result::Result<T, InfoError>;

/// `x ln x` with the `0 ln 0 = 0` convention.
fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy of a probability vector.
pub fn entropy(p: &[f64]) -> Result<f64> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(InfoError::NotNormalized(sum));
    }
    Ok(-p.iter().map(|&v| xlogx(v)).sum::<f64>())
}

/// Joint counts of two discrete variables; rows index X, columns index Y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl DiscreteJoint {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let cols = counts.first().map(|r| r.len()).unwrap_or(0);
        if counts.iter().any(|r| r.len() != cols) {
            return Err(InfoError::RaggedTable);
        }
        let n: u64 = counts.iter().flatten().sum();
        if n == 0 {
            return Err(InfoError::EmptyTable);
        }
        Ok(Self { counts, n })
    }

    /// Tallies paired labels `0..x_levels` × `0..y_levels`.
    pub fn from_labels(x: &[usize], y: &[usize], x_levels: usize, y_levels: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(InfoError::LengthMismatch);
        }
        let mut counts = vec![vec![0u64; y_levels]; x_levels];
        for (&a, &b) in x.iter().zip(y) {
            counts[a][b] += 1;
        }
        Self::new(counts)
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn joint_probabilities(&self) -> Vec<Vec<f64>> {
        let n = self.n as f64;
        self.counts
            .iter()
            .map(|r| r.iter().map(|&c| c as f64 / n).collect())
            .collect()
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.counts
            .iter()
            .map(|r| r.iter().sum::<u64>() as f64 / n)
            .collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        let n = self.n as f64;
        let cols = self.counts[0].len();
        (0..cols)
            .map(|j| self.counts.iter().map(|r| r[j]).sum::<u64>() as f64 / n)
            .collect()
    }

    pub fn transpose(&self) -> DiscreteJoint {
        let cols = self.counts[0].len();
        DiscreteJoint {
            counts: (0..cols)
                .map(|j| self.counts.iter().map(|r| r[j]).collect())
                .collect(),
            n: self.n,
        }
    }
}

pub fn joint_entropy(j: &DiscreteJoint) -> f64 {
    // summed in count order so the result does not depend on table orientation
    let mut cells: Vec<u64> = j.counts.iter().flatten().copied().collect();
    cells.sort_unstable();
    let n = j.n as f64;
    -cells.iter().map(|&c| xlogx(c as f64 / n)).sum::<f64>()
}

/// H(X|Y) = −Σ p(x,y) ln p(x|y).
pub fn conditional_entropy(j: &DiscreteJoint) -> f64 {
    let py = j.marginal_y();
    let mut h = 0.0;
    for row in j.joint_probabilities() {
        for (pxy, &p_y) in row.iter().zip(&py) {
            if *pxy > 0.0 {
                h -= pxy * (pxy / p_y).ln();
            }
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Binned,
    Knn,
}

/// A mutual-information estimate in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    pub value: f64,
    pub estimator: EstimatorKind,
    /// Bin count or neighbour count.
    pub param: usize,
    /// Set when a k-NN estimate came out below zero; the value is kept.
    pub negative: bool,
    /// Set when the k-NN estimate sits near its ψ(N) − ψ(k) ceiling, i.e.
    /// one variable is (almost) a function of the other.
    pub near_degenerate: bool,
}

impl MiEstimate {
    pub fn bits(&self) -> f64 {
        self.value / std::f64::consts::LN_2
    }
}

/// Plug-in MI from a table, computed as H(X) + H(Y) − H(X,Y).
pub fn mutual_information_discrete(j: &DiscreteJoint) -> MiEstimate {
    let hx = -j.marginal_x().iter().map(|&p| xlogx(p)).sum::<f64>();
    let hy = -j.marginal_y().iter().map(|&p| xlogx(p)).sum::<f64>();
    let value = (hx + hy - joint_entropy(j)).max(0.0);
    MiEstimate {
        value,
        estimator: EstimatorKind::Binned,
        param: j.counts.len().max(j.counts[0].len()),
        negative: false,
        near_degenerate: false,
    }
}

/// Rank-based equiprobable bin labels in `0..bins`.
pub fn equiprobable_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * bins / n;
    }
    labels
}

/// Default bin count floor(sqrt(n/5)), at least 2.
pub fn default_bins(n: usize) -> usize {
    ((n as f64 / 5.0).sqrt().floor() as usize).max(2)
}

/// MI after discretising both inputs into equiprobable bins.
pub fn mi_binned(x: &[f64], y: &[f64], bins: usize) -> Result<MiEstimate> {
    if x.len() != y.len() {
        return Err(InfoError::LengthMismatch);
    }
    if x.len() < 2 {
        return Err(InfoError::TooShort {
            needed: 2,
            got: x.len(),
        });
    }
    let j = DiscreteJoint::from_labels(
        &equiprobable_bins(x, bins),
        &equiprobable_bins(y, bins),
        bins,
        bins,
    )?;
    let mut est = mutual_information_discrete(&j);
    est.param = bins;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[0.5, 0.5]).unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]).unwrap(), 0.0);
        assert!((entropy(&[0.25; 4]).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!(matches!(
            entropy(&[0.5, 0.6]),
            Err(InfoError::NotNormalized(_))
        ));
        assert!(matches!(
            entropy(&[1.5, -0.5]),
            Err(InfoError::NotNormalized(_))
        ));
    }

    #[test]
    fn coin_tables() {
        let indep = DiscreteJoint::new(vec![vec![25, 25], vec![25, 25]]).unwrap();
        assert!(mutual_information_discrete(&indep).value.abs() < 1e-15);
        let coupled = DiscreteJoint::new(vec![vec![50, 0], vec![0, 50]]).unwrap();
        assert!((mutual_information_discrete(&coupled).value - LN_2).abs() < 1e-15);
    }

    #[test]
    fn table_40_10_by_hand() {
        // four cells: 2·0.4·ln(0.4/0.25) + 2·0.1·ln(0.1/0.25)
        let expected = 0.8 * (1.6f64).ln() + 0.2 * (0.4f64).ln();
        let j = DiscreteJoint::new(vec![vec![40, 10], vec![10, 40]]).unwrap();
        assert!((mutual_information_discrete(&j).value - expected).abs() < 1e-12);
        assert!((expected - 0.19274475702175753).abs() < 1e-12);
    }

    #[test]
    fn empty_table() {
        assert_eq!(
            DiscreteJoint::new(vec![vec![0, 0]]),
            Err(InfoError::EmptyTable)
        );
    }

    #[test]
    fn bins_are_equiprobable() {
        let x: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let labels = equiprobable_bins(&x, 4);
        for b in 0..4 {
            assert_eq!(labels.iter().filter(|&&l| l == b).count(), 25);
        }
        assert_eq!(default_bins(60), 3);
        assert_eq!(default_bins(5000), 31);
    }

    fn table() -> impl Strategy<Value = Vec<Vec<u64>>> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(proptest::collection::vec(0u64..50, c), r)
        })
    }

    proptest! {
        #[test]
        fn eq11_identity_and_symmetry(counts in table()) {
            prop_assume!(counts.iter().flatten().sum::<u64>() > 0);
            let j = DiscreteJoint::new(counts).unwrap();
            let mi = mutual_information_discrete(&j).value;
            let hx = entropy(&j.marginal_x()).unwrap();
            prop_assert!((mi - (hx - conditional_entropy(&j))).abs() < 1e-12);
            prop_assert!(mi >= 0.0);
            prop_assert_eq!(mi, mutual_information_discrete(&j.transpose()).value);
        }

        #[test]
        fn coarsening_cannot_add_information(
            pairs in proptest::collection::vec((0usize..4, 0usize..8), 1..300)
        ) {
            let x: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let y: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let z: Vec<usize> = y.iter().map(|v| v / 2).collect();
            let ixy = mutual_information_discrete(&DiscreteJoint::from_labels(&x, &y, 4, 8).unwrap()).value;
            let ixz = mutual_information_discrete(&DiscreteJoint::from_labels(&x, &z, 4, 4).unwrap()).value;
            prop_assert!(ixz <= ixy + 1e-12);
        }
    }
}

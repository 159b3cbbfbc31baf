use serde::{Deserialize, Serialize};

use super::{Result, SeriesError};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance (divides by n).
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Pearson correlation; `None` when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JarqueBera {
    pub statistic: f64,
    pub p_value: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// JB = n/6·(S² + (K−3)²/4) with population skewness and kurtosis. Under
/// normality JB is chi-square with two degrees of freedom, whose upper tail
/// is exp(−JB/2).
pub fn jarque_bera(x: &[f64]) -> Result<JarqueBera> {
    const MIN_LEN: usize = 20;
    if x.len() < MIN_LEN {
        return Err(SeriesError::TooShort {
            needed: MIN_LEN,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let m = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(SeriesError::ZeroVariance("jarque_bera input".into()));
    }
    let skewness = m3 / m2.powf(1.5);
    let kurtosis = m4 / (m2 * m2);
    let statistic = n / 6.0 * (skewness * skewness + (kurtosis - 3.0).powi(2) / 4.0);
    Ok(JarqueBera {
        statistic,
        p_value: (-statistic / 2.0).exp().clamp(0.0, 1.0),
        skewness,
        kurtosis,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }
}

/// Symmetric Pearson matrix with an exact unit diagonal.
pub fn pearson_correlation_matrix(rows: &[(String, Vec<f64>)]) -> Result<CorrelationMatrix> {
    if rows.len() < 2 {
        return Err(SeriesError::TooShort {
            needed: 2,
            got: rows.len(),
        });
    }
    let len = rows[0].1.len();
    if rows.iter().any(|r| r.1.len() != len) {
        return Err(SeriesError::LengthMismatch);
    }
    if len < 3 {
        return Err(SeriesError::TooShort {
            needed: 3,
            got: len,
        });
    }
    if let Some(r) = rows.iter().find(|r| variance(&r.1) == 0.0) {
        return Err(SeriesError::ZeroVariance(r.0.clone()));
    }
    let k = rows.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in i + 1..k {
            let r = pearson(&rows[i].1, &rows[j].1)
                .ok_or_else(|| SeriesError::ZeroVariance(rows[i].0.clone()))?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        ids: rows.iter().map(|r| r.0.clone()).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn jb_zero_for_symmetric_mesokurtic_sample() {
        // three-point law with mass 1/6 at ±1: skewness 0, kurtosis 1/(2·1/6) = 3
        let mut x = vec![0.0; 16];
        x.extend([1.0; 4]);
        x.extend([-1.0; 4]);
        let jb = jarque_bera(&x).unwrap();
        assert!(jb.statistic.abs() < 1e-12, "{jb:?}");
        assert!((jb.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jb_accepts_gaussian_noise() {
        let passes = (0..100)
            .filter(|&seed| jarque_bera(&normals(10_000, seed)).unwrap().p_value > 0.01)
            .count();
        assert!(passes >= 95, "{passes}");
    }

    #[test]
    fn jb_rejects_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let exp = Exp::new(1.0).unwrap();
        let x: Vec<f64> = (0..1000).map(|_| exp.sample(&mut rng)).collect();
        assert!(jarque_bera(&x).unwrap().p_value < 0.001);
    }

    #[test]
    fn jb_too_short() {
        assert!(matches!(
            jarque_bera(&[1.0; 10]),
            Err(SeriesError::TooShort { .. })
        ));
    }

    #[test]
    fn correlation_identities() {
        let x = normals(200, 1);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let m = pearson_correlation_matrix(&[
            ("x".into(), x.clone()),
            ("x2".into(), x.clone()),
            ("neg".into(), neg),
        ])
        .unwrap();
        assert!((m.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((m.get(0, 2) + 1.0).abs() < 1e-12);
        assert_eq!(m.get(2, 2), 1.0);
    }

    #[test]
    fn independent_noise_weakly_correlated() {
        let m = pearson_correlation_matrix(&[
            ("a".into(), normals(1000, 11)),
            ("b".into(), normals(1000, 12)),
        ])
        .unwrap();
        assert!(m.get(0, 1).abs() < 0.1);
    }

    #[test]
    fn zero_variance_is_named() {
        let r = pearson_correlation_matrix(&[
            ("a".into(), vec![1.0, 2.0, 3.0]),
            ("flat".into(), vec![2.0; 3]),
        ]);
        assert_eq!(r, Err(SeriesError::ZeroVariance("flat".into())));
    }

    proptest! {
        #[test]
        fn correlation_matrix_is_psd(k in 2usize..6, n in 5usize..40, seed in any::<u64>()) {
            let rows: Vec<(String, Vec<f64>)> = (0..k)
                .map(|i| (format!("s{i}"), normals(n, seed.wrapping_add(i as u64))))
                .collect();
            let m = pearson_correlation_matrix(&rows).unwrap();
            let mat = nalgebra::DMatrix::from_fn(k, k, |i, j| m.get(i, j));
            prop_assert!((mat.clone() - mat.transpose()).amax() == 0.0);
            let eig = nalgebra::SymmetricEigen::new(mat);
            prop_assert!(eig.eigenvalues.iter().all(|&l| l > -1e-9));
        }
    }
}

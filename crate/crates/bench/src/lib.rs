//! Shared inputs for the criterion benches.

use breakscope_core::synth::white_noise;

/// Two Gaussian series with correlation `rho`.
pub fn correlated_pair(rho: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let a = white_noise(n, 1.0, seed);
    let e = white_noise(n, 1.0, seed.wrapping_add(1));
    let c = (1.0 - rho * rho).sqrt();
    let b = a.iter().zip(&e).map(|(x, z)| rho * x + c * z).collect();
    (a, b)
}

#![allow(dead_code)]

use bspnn::sample::FeatureVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Isotropic Gaussian blobs with unit variance; class `k` is centered at
/// `spacing * k` along every axis scaled by 1/sqrt(dim), so consecutive
/// centers are exactly `spacing` apart.
pub fn blobs(per_class: usize, classes: usize, dim: usize, spacing: f64, seed: u64) -> Vec<FeatureVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let offset = spacing / (dim as f64).sqrt();
    let mut out = Vec::with_capacity(per_class * classes);
    for i in 0..per_class * classes {
        let k = i % classes;
        let values = (0..dim).map(|_| k as f64 * offset + noise.sample(&mut rng)).collect();
        out.push(FeatureVector::new(values, k));
    }
    out
}

pub fn uniform_points(n: usize, dim: usize, classes: usize, seed: u64) -> Vec<FeatureVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let values = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            FeatureVector::new(values, rng.random_range(0..classes))
        })
        .collect()
}

/// Direct Nadaraya-Watson estimate over every training point.
pub fn brute_force_grnn(train: &[FeatureVector<f64>], classes: usize, delta: f64, x: &[f64]) -> Vec<f64> {
    let mut num = vec![0.0; classes];
    let mut den = 0.0;
    for t in train {
        let d2: f64 = t.values.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let k = (-d2 / (2.0 * delta * delta)).exp();
        den += k;
        num[t.class] += k;
    }
    num.iter().map(|n| n / den).collect()
}

pub fn accuracy(data: &[FeatureVector<f64>], classify: impl Fn(&[f64]) -> usize) -> f64 {
    let hits = data.iter().filter(|d| classify(&d.values) == d.class).count();
    hits as f64 / data.len() as f64
}

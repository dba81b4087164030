//! One-class anomaly detection with a count-weighted kernel density over
//! vector-quantized normal traffic.
//!
//! A connection is flagged when its density score falls strictly below a
//! threshold calibrated as a low quantile of scores on normal data.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::FeatureVector;
use crate::scalar::{squared_distance, Scalar};
use crate::vq_grnn::{quantize, BaseParams, Cluster, RadiusRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnomalyLabel {
    Normal,
    Anomaly,
}

impl fmt::Display for AnomalyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnomalyLabel::Normal => "Normal",
            AnomalyLabel::Anomaly => "Anomaly",
        })
    }
}

/// Held-out log-likelihood bandwidth selection over a log-spaced grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DensityBandwidthSpec<T> {
    pub grid_points: usize,
    pub folds: usize,
    /// Explicit `(delta_min, delta_max)`; derived from the data spacing when unset.
    #[serde(default)]
    pub range: Option<(T, T)>,
}

impl<T: Scalar> Default for DensityBandwidthSpec<T> {
    fn default() -> Self {
        Self {
            grid_points: 20,
            folds: 5,
            range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DensityModel<T> {
    pub bandwidth: T,
    pub radius: T,
    pub clusters: Vec<Cluster<T>>,
    #[serde(default)]
    pub threshold: Option<T>,
    #[serde(default)]
    pub log_threshold: Option<T>,
    #[serde(default)]
    pub quantile: Option<T>,
}

impl<T: Scalar> DensityModel<T> {
    pub fn width(&self) -> usize {
        self.clusters[0].center.len()
    }

    pub fn total_count(&self) -> usize {
        self.clusters.iter().map(|c| c.count).sum()
    }

    pub fn is_calibrated(&self) -> bool {
        self.log_threshold.is_some()
    }

    /// `log s(x)`, finite for every finite query.
    pub fn log_density_score(&self, x: &[T]) -> Result<T> {
        if x.len() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                found: x.len(),
            });
        }
        let scale = T::one() / (T::c(2.0) * self.bandwidth * self.bandwidth);
        let logs: Vec<T> = self
            .clusters
            .iter()
            .map(|c| T::from_count(c.count).ln() - squared_distance(x, &c.center) * scale)
            .collect();
        Ok(log_sum_exp(&logs) - T::from_count(self.total_count()).ln())
    }

    /// `s(x) = (1 / sum Z_i) sum_i Z_i f(x - c_i)`, in `(0, 1]`. Scores that
    /// underflow are reported as the smallest positive normal value.
    pub fn density_score(&self, x: &[T]) -> Result<T> {
        let s = self.log_density_score(x)?.exp();
        Ok(s.max(T::min_positive_value()).min(T::one()))
    }

    pub fn classify_anomaly(&self, x: &[T]) -> Result<AnomalyLabel> {
        let tau = self.log_threshold.ok_or(Error::UncalibratedModel)?;
        Ok(if self.log_density_score(x)? < tau {
            AnomalyLabel::Anomaly
        } else {
            AnomalyLabel::Normal
        })
    }

    pub fn to_json(&self) -> Result<String> {
        crate::persist::to_json(crate::persist::DENSITY_FORMAT, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        crate::persist::from_json(crate::persist::DENSITY_FORMAT, text)
    }
}

fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let peak = values.iter().copied().fold(T::neg_infinity(), T::max);
    if !peak.is_finite() {
        return peak;
    }
    let sum = values.iter().map(|&v| (v - peak).exp()).fold(T::zero(), |a, b| a + b);
    peak + sum.ln()
}

/// Quantizes the normal data and picks the bandwidth maximizing held-out
/// log-density. The returned model is uncalibrated.
pub fn train_density<T: Scalar>(
    norm: &[FeatureVector<T>],
    radius: RadiusRule<T>,
    spec: &DensityBandwidthSpec<T>,
) -> Result<DensityModel<T>> {
    let first = norm.first().ok_or(Error::EmptyDataset)?;
    let class = first.class;
    if let Some(other) = norm.iter().find(|d| d.class != class) {
        return Err(Error::MixedLabels(other.class));
    }
    if spec.grid_points == 0 || spec.folds < 2 {
        return Err(Error::InvalidConfig(
            "density search needs grid_points >= 1 and folds >= 2".into(),
        ));
    }
    let resolved = BaseParams::new(class + 1).with_radius(radius).resolve(norm)?;
    let clusters = quantize(norm, resolved.radius, class + 1, true)?;
    let (lo, hi) = match spec.range {
        Some(r) => r,
        None => (resolved.search.delta_min, resolved.search.delta_max),
    };
    if !(lo > T::zero() && lo <= hi && hi.is_finite()) {
        return Err(Error::SearchSpaceInvalid(format!("density range [{lo}, {hi}]")));
    }
    let grid = log_grid(lo, hi, spec.grid_points);
    let bandwidth = if clusters.len() < 2 {
        // nothing to hold out; use the geometric middle of the range
        (lo * hi).sqrt()
    } else {
        let scores = held_out_log_density(&clusters, &grid, spec.folds);
        let mut best = 0;
        for (g, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = g;
            }
        }
        grid[best]
    };
    Ok(DensityModel {
        bandwidth,
        radius: resolved.radius,
        clusters,
        threshold: None,
        log_threshold: None,
        quantile: None,
    })
}

fn log_grid<T: Scalar>(lo: T, hi: T, points: usize) -> Vec<T> {
    if points == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == points - 1 {
                hi
            } else {
                (a + (b - a) * T::from_count(i) / T::from_count(points - 1)).exp()
            }
        })
        .collect()
}

/// Count-weighted mean over clusters of the normalized Gaussian mixture
/// log-density at each cluster center, using only clusters from the other
/// folds (fold of cluster `i` is `i % folds`). One value per grid bandwidth.
pub fn held_out_log_density<T: Scalar>(clusters: &[Cluster<T>], grid: &[T], folds: usize) -> Vec<T> {
    let m = clusters.len();
    let folds = folds.min(m).max(2);
    let dim = T::from_count(clusters[0].center.len());
    let half_log_two_pi = T::c(0.5 * (2.0 * std::f64::consts::PI).ln());
    let scales: Vec<T> = grid.iter().map(|&d| T::one() / (T::c(2.0) * d * d)).collect();

    let mut fold_mass = vec![T::zero(); folds];
    for (j, c) in clusters.iter().enumerate() {
        fold_mass[j % folds] = fold_mass[j % folds] + T::from_count(c.count);
    }
    let total_mass = fold_mass.iter().fold(T::zero(), |a, &b| a + b);

    let per_cluster: Vec<Option<Vec<T>>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let fold = i % folds;
            let train_mass = total_mass - fold_mass[fold];
            if !(train_mass > T::zero()) {
                return None;
            }
            let mut peak = vec![T::neg_infinity(); grid.len()];
            let mut acc = vec![T::zero(); grid.len()];
            for (j, c) in clusters.iter().enumerate() {
                if j % folds == fold {
                    continue;
                }
                let d2 = squared_distance(&clusters[i].center, &c.center);
                let lz = T::from_count(c.count).ln();
                for g in 0..grid.len() {
                    let v = lz - d2 * scales[g];
                    if v > peak[g] {
                        acc[g] = acc[g] * (peak[g] - v).exp() + T::one();
                        peak[g] = v;
                    } else {
                        acc[g] = acc[g] + (v - peak[g]).exp();
                    }
                }
            }
            let z = T::from_count(clusters[i].count);
            Some(
                (0..grid.len())
                    .map(|g| {
                        let log_mix = peak[g] + acc[g].ln() - train_mass.ln();
                        let norm = dim * (grid[g].ln() + half_log_two_pi);
                        z * (log_mix - norm)
                    })
                    .collect(),
            )
        })
        .collect();

    let mut totals = vec![T::zero(); grid.len()];
    let mut weight = T::zero();
    for (i, row) in per_cluster.into_iter().enumerate() {
        if let Some(row) = row {
            weight = weight + T::from_count(clusters[i].count);
            for (t, v) in totals.iter_mut().zip(row) {
                *t = *t + v;
            }
        }
    }
    totals.into_iter().map(|t| t / weight).collect()
}

/// Sets the threshold to the empirical `q`-quantile (order statistic
/// `floor(q N)`, zero-based) of the scores of `data`.
pub fn calibrate_threshold<T: Scalar>(
    model: &DensityModel<T>,
    data: &[FeatureVector<T>],
    q: T,
) -> Result<DensityModel<T>> {
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::QuantileOutOfRange(q.as_f64()));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut scores: Vec<T> = data
        .par_iter()
        .map(|d| model.log_density_score(&d.values))
        .collect::<Result<_>>()?;
    scores.sort_by(|a, b| a.partial_cmp(b).expect("finite log scores"));
    let idx = (q * T::from_count(scores.len()))
        .floor()
        .to_usize()
        .unwrap_or(0)
        .min(scores.len() - 1);
    let log_tau = scores[idx];
    let mut out = model.clone();
    out.log_threshold = Some(log_tau);
    out.threshold = Some(log_tau.exp().max(T::min_positive_value()).min(T::one()));
    out.quantile = Some(q);
    Ok(out)
}

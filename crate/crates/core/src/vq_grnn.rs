//! Vector-quantized GRNN base learner.
//!
//! Training vectors are grouped online into clusters (radius-threshold
//! nearest-center assignment, weighted-mean centers). Prediction is the
//! count-weighted Nadaraya-Watson mixture of the cluster outputs under a
//! shared Gaussian kernel of width `delta`, and `delta` is chosen by
//! minimizing the weighted MSE of in-sample predictions.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{one_hot, FeatureVector};
use crate::scalar::{argmax, squared_distance, Scalar};

/// Distance tables above this many entries are recomputed on the fly
/// instead of cached during the bandwidth search.
const DISTANCE_CACHE_LIMIT: usize = 1 << 25;

/// Points sampled when estimating the typical nearest-neighbor spacing.
pub const NN_SAMPLE_SIZE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Cluster<T> {
    pub center: Vec<T>,
    pub count: usize,
    pub weight_sum: T,
    pub output: Vec<T>,
}

impl<T: Scalar> Cluster<T> {
    fn found(x: &[T], weight: T, target: Vec<T>) -> Self {
        Self {
            center: x.to_vec(),
            count: 1,
            weight_sum: weight,
            output: target,
        }
    }

    /// Folds one more member into the running weighted means.
    fn absorb(&mut self, x: &[T], weight: T, target: &[T]) {
        self.count += 1;
        let total = self.weight_sum + weight;
        let step = if total > T::zero() {
            weight / total
        } else {
            T::one() / T::from_count(self.count)
        };
        self.weight_sum = total;
        for (c, &v) in self.center.iter_mut().zip(x) {
            *c = *c + (v - *c) * step;
        }
        for (o, &y) in self.output.iter_mut().zip(target) {
            *o = *o + (y - *o) * step;
        }
    }

    /// Dominant class of the cluster output.
    pub fn class(&self) -> usize {
        argmax(&self.output)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct VqGrnnModel<T> {
    pub class_count: usize,
    pub bandwidth: T,
    pub radius: T,
    pub clusters: Vec<Cluster<T>>,
}

impl<T: Scalar> VqGrnnModel<T> {
    pub fn new(clusters: Vec<Cluster<T>>, bandwidth: T, radius: T, class_count: usize) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !(bandwidth > T::zero()) {
            return Err(Error::NonPositiveBandwidth);
        }
        Ok(Self {
            class_count,
            bandwidth,
            radius,
            clusters,
        })
    }

    pub fn width(&self) -> usize {
        self.clusters[0].center.len()
    }

    /// Total member count, equal to the number of training vectors.
    pub fn total_count(&self) -> usize {
        self.clusters.iter().map(|c| c.count).sum()
    }

    /// Class-membership estimate for `x`; a point of the probability simplex.
    pub fn predict(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_width(x)?;
        let d2: Vec<T> = self
            .clusters
            .iter()
            .map(|c| squared_distance(x, &c.center))
            .collect();
        Ok(mixture(&d2, &self.clusters, self.bandwidth, self.class_count))
    }

    /// Argmax of [`predict`](Self::predict), ties to the lowest class.
    pub fn classify(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.predict(x)?))
    }

    /// Count-weighted class prior of the clusters.
    pub fn prior(&self) -> Vec<T> {
        prior(&self.clusters, self.class_count)
    }

    fn check_width(&self, x: &[T]) -> Result<()> {
        if x.len() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        crate::persist::to_json(crate::persist::VQ_GRNN_FORMAT, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        crate::persist::from_json(crate::persist::VQ_GRNN_FORMAT, text)
    }
}

/// Gaussian radial basis function `exp(-|x - c|^2 / (2 delta^2))`.
pub fn rbf_kernel<T: Scalar>(x: &[T], c: &[T], delta: T) -> Result<T> {
    if !(delta > T::zero()) {
        return Err(Error::NonPositiveBandwidth);
    }
    if x.len() != c.len() {
        return Err(Error::WidthMismatch {
            expected: c.len(),
            found: x.len(),
        });
    }
    let two = T::c(2.0);
    Ok((-squared_distance(x, c) / (two * delta * delta)).exp())
}

fn prior<T: Scalar>(clusters: &[Cluster<T>], classes: usize) -> Vec<T> {
    let mut out = vec![T::zero(); classes];
    let mut total = T::zero();
    for c in clusters {
        let z = T::from_count(c.count);
        total = total + z;
        for (o, &y) in out.iter_mut().zip(&c.output) {
            *o = *o + z * y;
        }
    }
    out.iter_mut().for_each(|o| *o = *o / total);
    out
}

/// Nadaraya-Watson mixture from precomputed squared distances.
///
/// Falls back to a max-shifted log-space sum when the plain denominator
/// underflows, and to the cluster prior when every log-kernel is -inf.
pub(crate) fn mixture<T: Scalar>(d2: &[T], clusters: &[Cluster<T>], delta: T, classes: usize) -> Vec<T> {
    let scale = T::one() / (T::c(2.0) * delta * delta);
    let cutoff = -crate::scalar::exp_underflow::<T>();
    let mut num = vec![T::zero(); classes];
    let mut den = T::zero();
    for (c, &d) in clusters.iter().zip(d2) {
        let e = d * scale;
        if e > cutoff {
            continue;
        }
        let k = T::from_count(c.count) * (-e).exp();
        den = den + k;
        for (n, &y) in num.iter_mut().zip(&c.output) {
            *n = *n + k * y;
        }
    }
    if den.is_finite() && den >= T::min_positive_value() {
        num.iter_mut().for_each(|n| *n = *n / den);
        return num;
    }

    let logs: Vec<T> = clusters
        .iter()
        .zip(d2)
        .map(|(c, &d)| T::from_count(c.count).ln() - d * scale)
        .collect();
    let peak = logs
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(T::neg_infinity(), T::max);
    if !peak.is_finite() {
        return prior(clusters, classes);
    }
    let mut num = vec![T::zero(); classes];
    let mut den = T::zero();
    for (c, &l) in clusters.iter().zip(&logs) {
        let e = l - peak;
        if -e > cutoff {
            continue;
        }
        let k = e.exp();
        den = den + k;
        for (n, &y) in num.iter_mut().zip(&c.output) {
            *n = *n + k * y;
        }
    }
    num.iter_mut().for_each(|n| *n = *n / den);
    num
}

/// Weighted mean `sum W_i x_i / sum W_i` of cluster members.
pub fn cluster_center<T: Scalar>(members: &[(&[T], T)]) -> Result<Vec<T>> {
    let (first, _) = members.first().ok_or(Error::EmptyDataset)?;
    let total: T = members.iter().map(|(_, w)| *w).sum();
    if !(total > T::zero()) {
        return Err(Error::ZeroTotalWeight);
    }
    let mut out = vec![T::zero(); first.len()];
    for (x, w) in members {
        if x.len() != out.len() {
            return Err(Error::WidthMismatch {
                expected: out.len(),
                found: x.len(),
            });
        }
        for (o, &v) in out.iter_mut().zip(x.iter()) {
            *o = *o + *w * v;
        }
    }
    out.iter_mut().for_each(|o| *o = *o / total);
    Ok(out)
}

/// Single-pass online quantization in data order.
///
/// Each vector joins the nearest existing cluster (restricted to its own
/// class when `per_class`) if that center lies within `radius`, and founds a
/// new cluster otherwise. An infinite radius always joins.
pub fn quantize<T: Scalar>(
    data: &[FeatureVector<T>],
    radius: T,
    classes: usize,
    per_class: bool,
) -> Result<Vec<Cluster<T>>> {
    let weights: Vec<T> = data.iter().map(|d| d.weight).collect();
    quantize_weighted(data, &weights, radius, classes, per_class)
}

pub(crate) fn quantize_weighted<T: Scalar>(
    data: &[FeatureVector<T>],
    weights: &[T],
    radius: T,
    classes: usize,
    per_class: bool,
) -> Result<Vec<Cluster<T>>> {
    let first = data.first().ok_or(Error::EmptyDataset)?;
    let width = first.width();
    let limit = radius * radius;
    let mut clusters: Vec<Cluster<T>> = Vec::new();
    // cluster indices per class (single bucket when not per_class)
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); if per_class { classes } else { 1 }];

    for (fv, &w) in data.iter().zip(weights) {
        if fv.width() != width {
            return Err(Error::WidthMismatch {
                expected: width,
                found: fv.width(),
            });
        }
        if fv.class >= classes {
            return Err(Error::ClassIndexOutOfRange {
                index: fv.class,
                classes,
            });
        }
        let bucket = if per_class { fv.class } else { 0 };
        let mut best: Option<(usize, T)> = None;
        for &ci in &buckets[bucket] {
            let bound = best.map_or(T::infinity(), |(_, d)| d);
            if let Some(d) = bounded_squared_distance(&fv.values, &clusters[ci].center, bound) {
                best = Some((ci, d));
            }
        }
        match best {
            Some((ci, d)) if d <= limit => {
                let target = one_hot::<T>(fv.class, classes);
                clusters[ci].absorb(&fv.values, w, &target);
            }
            _ => {
                buckets[bucket].push(clusters.len());
                clusters.push(Cluster::found(&fv.values, w, one_hot(fv.class, classes)));
            }
        }
    }
    Ok(clusters)
}

/// Squared distance if strictly below `bound` (or `bound` is infinite), with
/// early exit once the partial sum exceeds it.
#[inline]
fn bounded_squared_distance<T: Scalar>(a: &[T], b: &[T], bound: T) -> Option<T> {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc = acc + d * d;
        if acc > bound {
            return None;
        }
    }
    if acc < bound || bound.is_infinite() {
        Some(acc)
    } else {
        None
    }
}

/// Weighted mean squared error `(1/N) sum_i |W_i (yhat_i - y_i)|^2` with the
/// weights inside the square.
pub fn wmse<T: Scalar>(model: &VqGrnnModel<T>, data: &[FeatureVector<T>]) -> Result<T> {
    for fv in data {
        model.check_width(&fv.values)?;
    }
    let rows = data.iter().enumerate().map(|(i, d)| (i, d.weight * d.weight)).collect();
    let table = DistanceTable::build(&model.clusters, data, rows, 0);
    Ok(table.wmse(&model.clusters, data, model.bandwidth, model.class_count))
}

/// Representative row per distinct `(values, class)` pair with the summed
/// squared weight of its copies. Every copy has the same in-sample error,
/// so the objective only needs that sum.
fn merge_duplicates<T: Scalar>(data: &[FeatureVector<T>], weights: &[T]) -> Vec<(usize, T)> {
    let mut seen: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    let mut rows: Vec<(usize, T)> = Vec::new();
    for (i, fv) in data.iter().enumerate() {
        let key = (fv.class, fv.values.iter().map(|v| v.to_f64().unwrap_or(f64::NAN).to_bits()).collect());
        let w2 = weights[i] * weights[i];
        match seen.get(&key) {
            Some(&r) => rows[r].1 = rows[r].1 + w2,
            None => {
                seen.insert(key, rows.len());
                rows.push((i, w2));
            }
        }
    }
    rows
}

/// Squared distances from selected examples to every cluster center, cached
/// when small enough.
struct DistanceTable<T> {
    cols: usize,
    /// `(example index, squared weight)` pairs; the total is divided by `n`.
    rows: Vec<(usize, T)>,
    n: usize,
    cached: Option<Vec<T>>,
}

impl<T: Scalar> DistanceTable<T> {
    fn build(clusters: &[Cluster<T>], data: &[FeatureVector<T>], rows: Vec<(usize, T)>, limit: usize) -> Self {
        let cols = clusters.len();
        let cached = (rows.len().saturating_mul(cols) <= limit).then(|| {
            rows.par_iter()
                .flat_map_iter(|&(i, _)| {
                    let x = &data[i].values;
                    clusters.iter().map(move |c| squared_distance(x, &c.center))
                })
                .collect()
        });
        Self {
            cols,
            rows,
            n: data.len(),
            cached,
        }
    }

    fn row(&self, r: usize, clusters: &[Cluster<T>], x: &[T]) -> std::borrow::Cow<'_, [T]> {
        match &self.cached {
            Some(all) => std::borrow::Cow::Borrowed(&all[r * self.cols..(r + 1) * self.cols]),
            None => std::borrow::Cow::Owned(clusters.iter().map(|c| squared_distance(x, &c.center)).collect()),
        }
    }

    fn wmse(&self, clusters: &[Cluster<T>], data: &[FeatureVector<T>], delta: T, classes: usize) -> T {
        let terms: Vec<T> = self
            .rows
            .par_iter()
            .enumerate()
            .map(|(r, &(i, w2))| {
                let fv = &data[i];
                let d2 = self.row(r, clusters, &fv.values);
                let p = mixture(&d2, clusters, delta, classes);
                let sq: T = p
                    .iter()
                    .enumerate()
                    .map(|(k, &pk)| {
                        let e = if k == fv.class { pk - T::one() } else { pk };
                        e * e
                    })
                    .sum();
                w2 * sq
            })
            .collect();
        let total = terms.into_iter().fold(T::zero(), |a, b| a + b);
        total / T::from_count(self.n.max(1))
    }
}

/// Search range and stopping rule for the bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BandwidthSearchSpec<T> {
    pub delta_min: T,
    pub delta_max: T,
    pub tolerance: T,
    pub max_evals: usize,
}

impl<T: Scalar> BandwidthSearchSpec<T> {
    /// `[1e-2 * scale, 1e2 * scale]`, relative tolerance 1e-3, 100 evaluations.
    pub fn around(scale: T) -> Self {
        Self {
            delta_min: T::c(1e-2) * scale,
            delta_max: T::c(1e2) * scale,
            tolerance: T::c(1e-3),
            max_evals: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_range = self.delta_min > T::zero()
            && self.delta_max.is_finite()
            && self.delta_min < self.delta_max;
        if !ok_range {
            return Err(Error::SearchSpaceInvalid(format!(
                "need 0 < delta_min < delta_max, got [{}, {}]",
                self.delta_min, self.delta_max
            )));
        }
        if !(self.tolerance > T::zero()) || self.max_evals < 2 {
            return Err(Error::SearchSpaceInvalid(
                "tolerance must be positive and max_evals at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Golden-section search on `log delta` minimizing WMSE of the mixture
/// defined by `clusters` over `data` (weights taken from the vectors).
///
/// Returns the best bandwidth among all evaluated points, endpoints included.
pub fn fit_bandwidth<T: Scalar>(
    clusters: &[Cluster<T>],
    data: &[FeatureVector<T>],
    classes: usize,
    spec: &BandwidthSearchSpec<T>,
) -> Result<T> {
    let weights: Vec<T> = data.iter().map(|d| d.weight).collect();
    fit_bandwidth_weighted(clusters, data, &weights, classes, spec)
}

pub(crate) fn fit_bandwidth_weighted<T: Scalar>(
    clusters: &[Cluster<T>],
    data: &[FeatureVector<T>],
    weights: &[T],
    classes: usize,
    spec: &BandwidthSearchSpec<T>,
) -> Result<T> {
    spec.validate()?;
    if clusters.is_empty() || data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rows = merge_duplicates(data, weights);
    let table = DistanceTable::build(clusters, data, rows, DISTANCE_CACHE_LIMIT);
    let eval = |delta: T| table.wmse(clusters, data, delta, classes);
    Ok(golden_section_log(eval, spec))
}

pub(crate) fn golden_section_log<T: Scalar>(mut f: impl FnMut(T) -> T, spec: &BandwidthSearchSpec<T>) -> T {
    let ratio = T::c((5f64.sqrt() - 1.0) / 2.0);
    let stop = (T::one() + spec.tolerance).ln();
    let mut evals = 0usize;
    let mut best = (T::infinity(), spec.delta_min);
    let consider = |delta: T, value: T, best: &mut (T, T)| {
        if value < best.0 || (value == best.0 && delta < best.1) || best.0.is_nan() {
            *best = (value, delta);
        }
    };

    let (mut a, mut b) = (spec.delta_min.ln(), spec.delta_max.ln());
    for delta in [spec.delta_min, spec.delta_max] {
        let v = f(delta);
        evals += 1;
        consider(delta, v, &mut best);
    }
    if evals >= spec.max_evals {
        return best.1;
    }
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c.exp());
    consider(c.exp(), fc, &mut best);
    evals += 1;
    if evals >= spec.max_evals {
        return best.1;
    }
    let mut fd = f(d.exp());
    consider(d.exp(), fd, &mut best);
    evals += 1;

    while evals < spec.max_evals && (b - a) > stop {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c.exp());
            consider(c.exp(), fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d.exp());
            consider(d.exp(), fd, &mut best);
        }
        evals += 1;
    }
    best.1
}

/// Median distance from each of up to [`NN_SAMPLE_SIZE`] evenly strided
/// points to its nearest other sampled point, ignoring exact duplicates.
/// `None` when every sampled pair coincides.
pub fn median_nn_distance<T: Scalar>(data: &[FeatureVector<T>]) -> Option<T> {
    if data.len() < 2 {
        return None;
    }
    let stride = data.len().div_ceil(NN_SAMPLE_SIZE);
    let sample: Vec<&[T]> = data.iter().step_by(stride).map(|d| d.values.as_slice()).collect();
    let mut nn: Vec<T> = sample
        .par_iter()
        .enumerate()
        .filter_map(|(i, x)| {
            let best = sample
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, y)| squared_distance(x, y))
                .filter(|d| *d > T::zero())
                .fold(T::infinity(), T::min);
            best.is_finite().then(|| best.sqrt())
        })
        .collect();
    if nn.is_empty() {
        return None;
    }
    nn.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let m = nn.len();
    Some(if m % 2 == 1 {
        nn[m / 2]
    } else {
        (nn[m / 2 - 1] + nn[m / 2]) / T::c(2.0)
    })
}

/// How the quantization radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum RadiusRule<T> {
    Fixed(T),
    /// `factor` times the median nearest-neighbor distance.
    Auto { factor: T },
}

impl<T: Scalar> Default for RadiusRule<T> {
    fn default() -> Self {
        RadiusRule::Auto { factor: T::c(0.5) }
    }
}

/// Base-learner hyperparameters. A missing bandwidth spec is derived from
/// the effective radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BaseParams<T> {
    pub classes: usize,
    #[serde(default)]
    pub radius: RadiusRule<T>,
    #[serde(default)]
    pub bandwidth: Option<BandwidthSearchSpec<T>>,
}

impl<T: Scalar> BaseParams<T> {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            radius: RadiusRule::default(),
            bandwidth: None,
        }
    }

    pub fn with_radius(mut self, radius: RadiusRule<T>) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_bandwidth(mut self, spec: BandwidthSearchSpec<T>) -> Self {
        self.bandwidth = Some(spec);
        self
    }

    /// Fixes the radius and search range for a given training set.
    pub fn resolve(&self, data: &[FeatureVector<T>]) -> Result<ResolvedParams<T>> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let spacing = median_nn_distance(data);
        let radius = match self.radius {
            RadiusRule::Fixed(r) => r,
            RadiusRule::Auto { factor } => spacing.map_or(T::zero(), |s| s * factor),
        };
        if radius.is_nan() || radius < T::zero() {
            return Err(Error::InvalidConfig(format!("radius {radius} must be >= 0")));
        }
        let search = match self.bandwidth {
            Some(spec) => spec,
            None => {
                let scale = spacing.map_or(radius, |s| s.max(radius));
                let scale = if scale.is_finite() && scale > T::zero() {
                    scale
                } else {
                    T::one()
                };
                BandwidthSearchSpec::around(scale)
            }
        };
        search.validate()?;
        Ok(ResolvedParams {
            classes: self.classes,
            radius,
            search,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedParams<T> {
    pub classes: usize,
    pub radius: T,
    pub search: BandwidthSearchSpec<T>,
}

/// Quantize, then fit the bandwidth. Weights are renormalized to sum to one.
pub fn train_base<T: Scalar>(data: &[FeatureVector<T>], params: &BaseParams<T>) -> Result<VqGrnnModel<T>> {
    let resolved = params.resolve(data)?;
    let weights: Vec<T> = data.iter().map(|d| d.weight).collect();
    let weights = crate::booster::normalize_weights(&weights)?;
    train_resolved(data, &weights, &resolved)
}

pub(crate) fn train_resolved<T: Scalar>(
    data: &[FeatureVector<T>],
    weights: &[T],
    params: &ResolvedParams<T>,
) -> Result<VqGrnnModel<T>> {
    let clusters = quantize_weighted(data, weights, params.radius, params.classes, true)?;
    let delta = fit_bandwidth_weighted(&clusters, data, weights, params.classes, &params.search)?;
    VqGrnnModel::new(clusters, delta, params.radius, params.classes)
}

//! Diversity-weighted multiclass adaptive boosting over VQ-GRNN base learners.
//!
//! Each round trains a base learner on the current distribution, turns its
//! class-probability output into a centered log-probability vote, records
//! which examples it gets right (for the Kohavi-Wolpert variance of the
//! ensemble so far), and reweights the examples with the confidence-rated
//! multiclass update. The final decision is the argmax of the alpha-weighted
//! sum of votes.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::FeatureVector;
use crate::scalar::{argmax, Scalar};
use crate::vq_grnn::{train_resolved, BaseParams, VqGrnnModel};

/// Boosting distribution over the training examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    weights: Vec<T>,
}

impl<T: Scalar> Distribution<T> {
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.weights
    }
}

/// Uniform distribution `1/N`.
pub fn init_distribution<T: Scalar>(n: usize) -> Result<Distribution<T>> {
    if n == 0 {
        return Err(Error::ZeroSize);
    }
    Ok(Distribution {
        weights: vec![T::one() / T::from_count(n); n],
    })
}

/// `W_i / sum_j W_j`.
pub fn normalize_weights<T: Scalar>(weights: &[T]) -> Result<Vec<T>> {
    let total = weights.iter().fold(T::zero(), |a, &w| a + w);
    if !(total > T::zero()) || !total.is_finite() {
        return Err(Error::AllZeroWeights);
    }
    Ok(weights.iter().map(|&w| w / total).collect())
}

/// Kohavi-Wolpert variance `(1/(N L^2)) sum_j l_j (L - l_j)` where `l_j` is
/// how many of the `L` classifiers get example `j` right.
pub fn kw_variance<T: Scalar>(correct_counts: &[usize], classifiers: usize) -> T {
    if correct_counts.is_empty() || classifiers == 0 {
        return T::zero();
    }
    let big_l = classifiers as u128;
    let sum: u128 = correct_counts
        .iter()
        .map(|&l| {
            let l = (l as u128).min(big_l);
            l * (big_l - l)
        })
        .sum();
    let denom = correct_counts.len() as u128 * big_l * big_l;
    T::c(sum as f64 / denom as f64)
}

/// Clips to `[eps, 1]` then renormalizes, so every log is finite.
pub fn clip_probabilities<T: Scalar>(p: &[T], eps: T) -> Vec<T> {
    let clipped: Vec<T> = p
        .iter()
        .map(|&v| if v.is_nan() { eps } else { v.max(eps).min(T::one()) })
        .collect();
    let total: T = clipped.iter().copied().sum();
    clipped.into_iter().map(|v| v / total).collect()
}

/// Centered log-probability vote `(K-1) [log p_k - mean_k' log p_k']`.
///
/// `p` must be strictly positive (see [`clip_probabilities`]).
pub fn class_prob_transform<T: Scalar>(p: &[T]) -> Vec<T> {
    let k = T::from_count(p.len());
    let logs: Vec<T> = p.iter().map(|v| v.ln()).collect();
    let mean = logs.iter().copied().sum::<T>() / k;
    logs.into_iter().map(|l| (k - T::one()) * (l - mean)).collect()
}

/// Pre-normalization reweighting factor for an example of class `truth`
/// given its clipped class probabilities:
/// `exp(-((K-1)/K) * sum_k ytilde_k log p_k)` with `ytilde` the symmetric
/// label coding (1 for the true class, `-1/(K-1)` elsewhere).
pub fn weight_factor<T: Scalar>(p: &[T], truth: usize) -> T {
    let k = T::from_count(p.len());
    let off = -T::one() / (k - T::one());
    let dot = p
        .iter()
        .enumerate()
        .map(|(j, &pj)| if j == truth { pj.ln() } else { off * pj.ln() })
        .fold(T::zero(), |a, b| a + b);
    (-(k - T::one()) / k * dot).exp()
}

/// Applies [`weight_factor`] to every example and renormalizes.
pub fn update_weights<T: Scalar>(
    weights: &[T],
    probabilities: &[Vec<T>],
    truths: &[usize],
) -> Result<Distribution<T>> {
    if weights.len() != probabilities.len() || weights.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: probabilities.len().min(truths.len()),
        });
    }
    let raw: Vec<T> = weights
        .iter()
        .zip(probabilities)
        .zip(truths)
        .map(|((&w, p), &y)| w * weight_factor(p, y))
        .collect();
    Ok(Distribution {
        weights: normalize_weights(&raw)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// Aggregation weight from the ensemble's Kohavi-Wolpert variance.
    #[default]
    KwDiversity,
    /// Every round weighted 1.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Scalar")]
pub struct BoostConfig<T> {
    pub rounds: usize,
    pub wmse_stop: Option<T>,
    pub epsilon_prob: T,
    pub alpha_floor: T,
    pub alpha_mode: AlphaMode,
}

impl<T: Scalar> Default for BoostConfig<T> {
    fn default() -> Self {
        Self {
            rounds: 10,
            wmse_stop: None,
            epsilon_prob: T::c(1e-10),
            alpha_floor: T::c(1e-3),
            alpha_mode: AlphaMode::KwDiversity,
        }
    }
}

impl<T: Scalar> BoostConfig<T> {
    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        if classes < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 classes, got {classes}")));
        }
        let upper = T::one() / T::from_count(classes);
        if !(self.epsilon_prob > T::zero() && self.epsilon_prob < upper) {
            return Err(Error::InvalidConfig(format!(
                "epsilon_prob {} outside (0, 1/K)",
                self.epsilon_prob
            )));
        }
        if !(self.alpha_floor >= T::zero()) {
            return Err(Error::InvalidConfig("alpha_floor must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Round<T> {
    pub alpha: T,
    pub base: VqGrnnModel<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoostedModel<T> {
    pub class_count: usize,
    pub rounds: Vec<Round<T>>,
    pub config: BoostConfig<T>,
    pub base_params: BaseParams<T>,
}

impl<T: Scalar> BoostedModel<T> {
    pub fn new(rounds: Vec<Round<T>>, class_count: usize, config: BoostConfig<T>, base_params: BaseParams<T>) -> Result<Self> {
        if rounds.is_empty() {
            return Err(Error::InvalidConfig("boosted model needs at least one round".into()));
        }
        if rounds.iter().any(|r| !(r.alpha >= T::zero())) || !rounds.iter().any(|r| r.alpha > T::zero()) {
            return Err(Error::InvalidConfig(
                "alphas must be non-negative with at least one positive".into(),
            ));
        }
        Ok(Self {
            class_count,
            rounds,
            config,
            base_params,
        })
    }

    pub fn alphas(&self) -> Vec<T> {
        self.rounds.iter().map(|r| r.alpha).collect()
    }

    pub fn width(&self) -> usize {
        self.rounds[0].base.width()
    }

    /// Alpha-weighted sum of centered log-probability votes.
    pub fn scores(&self, x: &[T]) -> Result<Vec<T>> {
        let mut scores = vec![T::zero(); self.class_count];
        for round in &self.rounds {
            let p = clip_probabilities(&round.base.predict(x)?, self.config.epsilon_prob);
            for (s, c) in scores.iter_mut().zip(class_prob_transform(&p)) {
                *s = *s + round.alpha * c;
            }
        }
        Ok(scores)
    }

    /// Final class (ties to the lowest index) and the score vector.
    pub fn predict_ensemble(&self, x: &[T]) -> Result<(usize, Vec<T>)> {
        let scores = self.scores(x)?;
        Ok((argmax(&scores), scores))
    }

    pub fn classify(&self, x: &[T]) -> Result<usize> {
        Ok(self.predict_ensemble(x)?.0)
    }

    /// Scores mapped back to class probabilities with `softmax(s / (K-1))`.
    pub fn predict_proba(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(scores_to_proba(&self.scores(x)?))
    }

    pub fn to_json(&self) -> Result<String> {
        crate::persist::to_json(crate::persist::BOOSTED_FORMAT, self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        crate::persist::from_json(crate::persist::BOOSTED_FORMAT, text)
    }
}

fn scores_to_proba<T: Scalar>(scores: &[T]) -> Vec<T> {
    let scale = T::one() / (T::from_count(scores.len()) - T::one());
    let peak = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = scores.iter().map(|&s| ((s - peak) * scale).exp()).collect();
    let total: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Per-round training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub base_wmse: f64,
    pub bandwidth: f64,
    pub clusters: usize,
    pub alpha: f64,
    pub weighted_error: f64,
    pub ensemble_accuracy: f64,
    pub degenerate: bool,
}

impl fmt::Display for RoundLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "round={} base_wmse={:.6e} delta={:.6e} clusters={} alpha={:.6} weighted_error={:.6} ensemble_accuracy={:.6}{}",
            self.round,
            self.base_wmse,
            self.bandwidth,
            self.clusters,
            self.alpha,
            self.weighted_error,
            self.ensemble_accuracy,
            if self.degenerate { " DEGENERATE" } else { "" }
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput<T> {
    pub model: BoostedModel<T>,
    pub log: Vec<RoundLog>,
    /// Distribution after each round's update (`W^(t+1)`).
    pub distributions: Vec<Vec<T>>,
}

/// Runs up to `config.rounds` boosting rounds.
///
/// The aggregation weight of round `t` is `alpha^(t)`, where `alpha^(1) = 1`
/// and `alpha^(t+1)` is the Kohavi-Wolpert variance of the first `t`
/// classifiers; in [`AlphaMode::KwDiversity`] it is floored at
/// `config.alpha_floor`.
pub fn train<T: Scalar>(
    data: &[FeatureVector<T>],
    config: &BoostConfig<T>,
    base_params: &BaseParams<T>,
) -> Result<TrainOutput<T>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = base_params.classes;
    config.validate(classes)?;
    for fv in data {
        if fv.class >= classes {
            return Err(Error::ClassIndexOutOfRange {
                index: fv.class,
                classes,
            });
        }
    }
    let resolved = base_params.resolve(data)?;
    let snapshot = BaseParams {
        classes,
        radius: crate::vq_grnn::RadiusRule::Fixed(resolved.radius),
        bandwidth: Some(resolved.search),
    };

    let n = data.len();
    let truths: Vec<usize> = data.iter().map(|d| d.class).collect();
    let mut weights = init_distribution::<T>(n)?.into_inner();
    let mut correct = vec![0usize; n];
    let mut alpha_next = T::one();
    let mut ensemble_scores = vec![vec![T::zero(); classes]; n];
    let mut rounds = Vec::new();
    let mut log = Vec::new();
    let mut distributions = Vec::new();

    for t in 1..=config.rounds {
        let base = train_resolved(data, &weights, &resolved)?;
        let probs: Vec<Vec<T>> = data
            .par_iter()
            .map(|d| base.predict(&d.values))
            .collect::<Result<_>>()?;
        let preds: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();

        let degenerate = preds.iter().all(|&p| p == preds[0]);
        let mut weighted_error = T::zero();
        let mut wmse_sum = T::zero();
        for i in 0..n {
            if preds[i] == truths[i] {
                correct[i] += 1;
            } else {
                weighted_error = weighted_error + weights[i];
            }
            for (k, &pk) in probs[i].iter().enumerate() {
                let y = if k == truths[i] { T::one() } else { T::zero() };
                let e = weights[i] * (pk - y);
                wmse_sum = wmse_sum + e * e;
            }
        }
        let kw = kw_variance::<T>(&correct, t);

        let alpha = match config.alpha_mode {
            AlphaMode::KwDiversity => alpha_next.max(config.alpha_floor),
            AlphaMode::Uniform => T::one(),
        };

        let clipped: Vec<Vec<T>> = probs
            .iter()
            .map(|p| clip_probabilities(p, config.epsilon_prob))
            .collect();
        let mut ensemble_correct = 0usize;
        for i in 0..n {
            for (s, c) in ensemble_scores[i].iter_mut().zip(class_prob_transform(&clipped[i])) {
                *s = *s + alpha * c;
            }
            if argmax(&ensemble_scores[i]) == truths[i] {
                ensemble_correct += 1;
            }
        }

        if degenerate {
            log::warn!("round {t}: base learner predicts class {} everywhere", preds[0]);
        }
        let entry = RoundLog {
            round: t,
            base_wmse: (wmse_sum / T::from_count(n)).as_f64(),
            bandwidth: base.bandwidth.as_f64(),
            clusters: base.clusters.len(),
            alpha: alpha.as_f64(),
            weighted_error: weighted_error.as_f64(),
            ensemble_accuracy: ensemble_correct as f64 / n as f64,
            degenerate,
        };
        log::info!("{entry}");
        log.push(entry);
        rounds.push(Round { alpha, base });

        weights = update_weights(&weights, &clipped, &truths)?.into_inner();
        distributions.push(weights.clone());
        alpha_next = kw;

        if let Some(stop) = config.wmse_stop {
            let ensemble_wmse = ensemble_scores
                .iter()
                .zip(&truths)
                .map(|(s, &y)| {
                    scores_to_proba(s)
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| {
                            let e = p - if k == y { T::one() } else { T::zero() };
                            e * e
                        })
                        .sum::<T>()
                })
                .fold(T::zero(), |a, b| a + b)
                / T::from_count(n);
            if ensemble_wmse < stop {
                log::info!("stopping after round {t}: ensemble WMSE {ensemble_wmse} < {stop}");
                break;
            }
        }
    }

    let model = BoostedModel::new(rounds, classes, *config, snapshot)?;
    Ok(TrainOutput {
        model,
        log,
        distributions,
    })
}

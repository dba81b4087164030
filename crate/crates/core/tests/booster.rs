mod common;

use bspnn::booster::{train, weight_factor, BoostConfig, BoostedModel};
use bspnn::vq_grnn::{train_base, BaseParams, RadiusRule};
use bspnn::sample::FeatureVector;
use common::{accuracy, blobs};

#[test]
fn separated_blobs_are_learned() {
    let data = blobs(150, 3, 4, 6.0, 1);
    let out = train(&data, &BoostConfig::default().with_rounds(5), &BaseParams::new(3)).unwrap();
    let acc = accuracy(&data, |x| out.model.classify(x).unwrap());
    assert!(acc >= 0.99, "training accuracy {acc}");
    let test = blobs(100, 3, 4, 6.0, 2);
    let acc = accuracy(&test, |x| out.model.classify(x).unwrap());
    assert!(acc >= 0.95, "test accuracy {acc}");
}

#[test]
fn more_rounds_do_not_hurt_training_error() {
    // separable, but the first base learner is not perfect on it
    let data = stripes(240, 2.0);
    let params = BaseParams::new(3).with_radius(RadiusRule::Fixed(1.0));
    let out = train(&data, &BoostConfig::default().with_rounds(6), &params).unwrap();
    let first = out.log.first().unwrap().ensemble_accuracy;
    let last = out.log.last().unwrap().ensemble_accuracy;
    assert!(first < 1.0);
    assert!(last >= first, "{first} -> {last}");
}

/// 1-D points in consecutive stripes of `width`, labelled 0, 1, 2, 0, ...
fn stripes(n: usize, width: f64) -> Vec<FeatureVector<f64>> {
    (0..n)
        .map(|i| {
            let x = i as f64 * 0.05 * width;
            FeatureVector::new(vec![x], (x / width).floor() as usize % 3)
        })
        .collect()
}

#[test]
fn reweighting_emphasizes_errors() {
    let data = stripes(240, 2.0);
    let params = BaseParams::new(3).with_radius(RadiusRule::Fixed(1.0));
    let out = train(&data, &BoostConfig::default().with_rounds(1), &params).unwrap();
    let base = &out.model.rounds[0].base;
    let uniform = 1.0 / data.len() as f64;
    let next = &out.distributions[0];
    let (mut before, mut after) = (0.0, 0.0);
    for (d, w) in data.iter().zip(next) {
        if base.classify(&d.values).unwrap() != d.class {
            before += uniform;
            after += w;
        }
    }
    assert!(before > 0.0);
    assert!(before <= after, "{before} -> {after}");
}

#[test]
fn misclassified_examples_gain_weight() {
    let data = blobs(60, 2, 2, 1.5, 5);
    let params = BaseParams::new(2).with_radius(RadiusRule::Fixed(0.7));
    let base = train_base(&data, &params).unwrap();
    let out = train(&data, &BoostConfig::default().with_rounds(1), &params).unwrap();
    let w = &out.distributions[0];
    let (mut wrong, mut right) = (Vec::new(), Vec::new());
    for (d, &wi) in data.iter().zip(w) {
        if base.classify(&d.values).unwrap() == d.class { right.push(wi) } else { wrong.push(wi) }
    }
    assert!(!wrong.is_empty() && !right.is_empty());
    let min_wrong = wrong.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_right = right.iter().cloned().fold(0.0, f64::max);
    assert!(min_wrong > max_right);
}

#[test]
fn hand_computed_weight_factor() {
    // K = 3, truth 0, p = (0.5, 0.3, 0.2): exp(-(2/3)(ln .5 - (ln .3 + ln .2)/2))
    let want = (-(2.0 / 3.0) * (0.5f64.ln() - 0.5 * (0.3f64.ln() + 0.2f64.ln()))).exp();
    assert!((weight_factor(&[0.5, 0.3, 0.2], 0) - want).abs() < 1e-12);
    // K = 2 reduces to sqrt(p_wrong / p_true)
    let got = weight_factor(&[0.8, 0.2], 1);
    assert!((got - (0.8f64 / 0.2).sqrt()).abs() < 1e-12);
}

#[test]
fn zero_rounds_are_rejected() {
    let data = blobs(5, 2, 2, 3.0, 0);
    assert!(train(&data, &BoostConfig::default().with_rounds(0), &BaseParams::new(2)).is_err());
}

#[test]
fn early_stop_on_low_wmse() {
    let data = blobs(50, 2, 2, 12.0, 6);
    let config = BoostConfig { wmse_stop: Some(0.5), ..BoostConfig::default().with_rounds(8) };
    let out = train(&data, &config, &BaseParams::new(2)).unwrap();
    assert!(out.model.rounds.len() < 8);
}

#[test]
fn model_json_round_trip() {
    let data = blobs(30, 3, 3, 5.0, 7);
    let out = train(&data, &BoostConfig::default().with_rounds(3), &BaseParams::new(3)).unwrap();
    let text = out.model.to_json().unwrap();
    let back = BoostedModel::<f64>::from_json(&text).unwrap();
    assert_eq!(back, out.model);
    for d in &data {
        assert_eq!(back.scores(&d.values).unwrap(), out.model.scores(&d.values).unwrap());
    }
    assert!(bspnn::vq_grnn::VqGrnnModel::<f64>::from_json(&text).is_err());
}

#[test]
fn training_is_deterministic() {
    let data = blobs(60, 3, 3, 3.0, 11);
    let a = train(&data, &BoostConfig::default().with_rounds(4), &BaseParams::new(3)).unwrap();
    let b = train(&data, &BoostConfig::default().with_rounds(4), &BaseParams::new(3)).unwrap();
    assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
}

//! Acceptance criteria, one test per criterion. Each prints a single
//! `[PASS]` / `[FAIL]` line before asserting.
//!
//! Criteria 7-10 need the public KDD-99 files (`kddcup.data_10_percent` and
//! `corrected`, optionally gzipped) in the directory named by
//! `BSPNN_KDD_DIR`. They are ignored by default; run them with
//! `cargo test -p bspnn-cli --test acceptance -- --ignored --nocapture`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use bspnn::anomaly::DensityModel;
use bspnn::booster::{
    class_prob_transform, clip_probabilities, kw_variance, train, update_weights, weight_factor, BoostConfig,
};
use bspnn::kdd::Category;
use bspnn::metrics::{average_cost, ConfusionMatrix, CostMatrix};
use bspnn::sample::FeatureVector;
use bspnn::scalar::argmax;
use bspnn::vq_grnn::{quantize, train_base, BaseParams, RadiusRule, VqGrnnModel};
use bspnn_cli::commands::{self, Report};
use bspnn_cli::config::{CapsConfig, Resources, RunConfig};
use bspnn_cli::model_file::Mode;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const ORACLE_TOL: f64 = 1e-9;
const ORACLE_TIME: Duration = Duration::from_secs(5);
const SIMPLEX_TOL: f64 = 1e-9;
const SUM_ZERO_TOL: f64 = 1e-9;
const DISTRIBUTION_TOL: f64 = 1e-12;
const HAND_TOL: f64 = 1e-6;
const TOY_ACCURACY: f64 = 0.95;
const TOY_TIME: Duration = Duration::from_secs(60);
const TRIALS: usize = 1000;

fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    println!("[{}] criterion {id} ({name}): {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {detail}");
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, classes: usize) -> Vec<FeatureVector<f64>> {
    (0..n)
        .map(|_| {
            let values = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            FeatureVector::new(values, rng.random_range(0..classes))
        })
        .collect()
}

fn nadaraya_watson(train: &[FeatureVector<f64>], classes: usize, delta: f64, x: &[f64]) -> Vec<f64> {
    let mut num = vec![0.0; classes];
    let mut den = 0.0;
    for t in train {
        let d2: f64 = t.values.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let k = (-d2 / (2.0 * delta * delta)).exp();
        num[t.class] += k;
        den += k;
    }
    num.iter().map(|v| v / den).collect()
}

#[test]
fn criterion_01_grnn_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let train = random_points(&mut rng, 300, 10, 3);
    let params = BaseParams::new(3).with_radius(RadiusRule::Fixed(0.0));
    let model = train_base(&train, &params).unwrap();
    let queries = random_points(&mut rng, 300, 10, 3);
    let mut worst = 0.0f64;
    for q in &queries {
        let got = model.predict(&q.values).unwrap();
        let want = nadaraya_watson(&train, 3, model.bandwidth, &q.values);
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "GRNN oracle equivalence",
        worst <= ORACLE_TOL && elapsed < ORACLE_TIME && model.clusters.len() == 300,
        &format!("max |diff| {worst:.2e} (tol {ORACLE_TOL:e}), {:.2} s", elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_02_probability_simplex() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_sum = 0.0f64;
    let mut range_ok = true;
    let mut density_ok = true;
    for _ in 0..TRIALS {
        let classes = rng.random_range(2..6);
        let dim = rng.random_range(1..6);
        let n = rng.random_range(1..40);
        let data = random_points(&mut rng, n, dim, classes);
        let radius = rng.random_range(0.0..1.0);
        // bandwidths down to 1e-4 push far queries into the underflow path
        let delta = 10f64.powf(rng.random_range(-4.0..1.0));
        let clusters = quantize(&data, radius, classes, true).unwrap();
        let model = VqGrnnModel::new(clusters.clone(), delta, radius, classes).unwrap();
        let scale = 10f64.powf(rng.random_range(0.0..2.0));
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-scale..scale)).collect();
        let p = model.predict(&q).unwrap();
        worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
        range_ok &= p.iter().all(|&v| (0.0..=1.0).contains(&v));

        let one_class: Vec<_> = data.iter().map(|d| FeatureVector::new(d.values.clone(), 0)).collect();
        let pooled = quantize(&one_class, radius, 1, true).unwrap();
        let density = DensityModel {
            bandwidth: delta,
            radius,
            clusters: pooled,
            threshold: None,
            log_threshold: None,
            quantile: None,
        };
        let s = density.density_score(&q).unwrap();
        density_ok &= s > 0.0 && s <= 1.0;
    }
    verdict(
        2,
        "probability simplex",
        worst_sum <= SIMPLEX_TOL && range_ok && density_ok,
        &format!(
            "{TRIALS} trials, max |sum - 1| {worst_sum:.2e}, entries in [0,1]: {range_ok}, density in (0,1]: {density_ok}"
        ),
    );
}

#[test]
fn criterion_03_booster_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_c = 0.0f64;
    for _ in 0..TRIALS {
        let k = rng.random_range(2..8);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let c = class_prob_transform(&clip_probabilities(&p, 1e-10));
        worst_c = worst_c.max(c.iter().sum::<f64>().abs());
    }

    let mut kw_ok = true;
    for _ in 0..TRIALS {
        let l = rng.random_range(1..=20);
        let n = rng.random_range(1..60);
        let counts: Vec<usize> = (0..n).map(|_| rng.random_range(0..=l)).collect();
        let v: f64 = kw_variance(&counts, l);
        kw_ok &= (0.0..=0.25).contains(&v) && (l != 1 || v == 0.0);
    }

    let mut worst_w = 0.0f64;
    let mut rescale_ok = true;
    for trial in 0..5 {
        let data = random_points(&mut rng, 80, 3, 3);
        let params = BaseParams::new(3).with_radius(RadiusRule::Fixed(0.4));
        let out = train(&data, &BoostConfig::default().with_rounds(5), &params).unwrap();
        for w in &out.distributions {
            worst_w = worst_w.max((w.iter().sum::<f64>() - 1.0).abs());
            rescale_ok &= w.iter().all(|&x| x >= 0.0);
        }
        let factor = [1e-3, 0.5, 2.0, 37.0, 1e4][trial];
        let mut scaled = out.model.clone();
        for r in &mut scaled.rounds {
            r.alpha *= factor;
        }
        for q in random_points(&mut rng, 200, 3, 3) {
            let a = out.model.scores(&q.values).unwrap();
            let b = scaled.scores(&q.values).unwrap();
            rescale_ok &= argmax(&a) == argmax(&b);
        }
    }
    verdict(
        3,
        "booster algebra",
        worst_c <= SUM_ZERO_TOL && kw_ok && worst_w <= DISTRIBUTION_TOL && rescale_ok,
        &format!(
            "max |sum C| {worst_c:.2e}, kw in [0,0.25] and 0 at L=1: {kw_ok}, max |sum W - 1| {worst_w:.2e}, rescaled alphas keep decisions: {rescale_ok}"
        ),
    );
}

#[test]
fn criterion_04_hand_computed_updates() {
    // class numbering in the worked examples starts at 1, i.e. index 0 here
    let unchanged = update_weights::<f64>(&[0.3, 0.7], &[vec![0.5, 0.5], vec![0.5, 0.5]], &[0, 1]).unwrap();
    let f_confident = weight_factor::<f64>(&[0.9, 0.1], 0);
    let f_wrong = weight_factor::<f64>(&[0.1, 0.9], 0);
    let c = class_prob_transform::<f64>(&[0.9, 0.1]);
    let half_ln9 = 0.5 * 9f64.ln();
    let errs = [
        (unchanged.weights()[0] - 0.3).abs(),
        (unchanged.weights()[1] - 0.7).abs(),
        (f_confident - 1.0 / 3.0).abs(),
        (f_wrong - 3.0).abs(),
        (c[0] - half_ln9).abs(),
        (c[1] + half_ln9).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    verdict(
        4,
        "hand-computed updates",
        worst <= HAND_TOL,
        &format!(
            "factors {f_confident:.5} / {f_wrong:.5}, C = ({:.4}, {:.4}), max error {worst:.2e}",
            c[0], c[1]
        ),
    );
}

#[test]
fn criterion_05_exact_average_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let names: Vec<String> = Category::ALL.iter().map(|c| c.name().to_string()).collect();
    let mut exact = true;
    let mut zero_one = true;
    for _ in 0..100 {
        let counts: Vec<Vec<u64>> = (0..5).map(|_| (0..5).map(|_| rng.random_range(0..500)).collect()).collect();
        let costs: Vec<Vec<i64>> = (0..5)
            .map(|i| (0..5).map(|j| if i == j { 0 } else { rng.random_range(0..10) }).collect())
            .collect();
        let cm = ConfusionMatrix::from_counts(names.clone(), counts.clone()).unwrap();
        if cm.total() == 0 {
            continue;
        }
        let cost = CostMatrix::new(
            names.clone(),
            costs.iter().map(|r| r.iter().map(|&v| Ratio::from_integer(v)).collect()).collect(),
        )
        .unwrap();
        let mut num: i64 = 0;
        let mut n: i64 = 0;
        for i in 0..5 {
            for j in 0..5 {
                num += counts[i][j] as i64 * costs[i][j];
                n += counts[i][j] as i64;
            }
        }
        exact &= average_cost(&cm, &cost).unwrap() == Ratio::new(num, n);

        let zo = CostMatrix::<Ratio<i64>>::zero_one(names.clone());
        let correct: i64 = (0..5).map(|i| counts[i][i] as i64).sum();
        zero_one &= average_cost(&cm, &zo).unwrap() == Ratio::from_integer(1) - Ratio::new(correct, n);
    }
    verdict(
        5,
        "exact average cost",
        exact && zero_one,
        &format!("100 random matrices, exact rational match: {exact}, 0/1 cost = 1 - accuracy: {zero_one}"),
    );
}

fn blobs(per_class: usize, spacing: f64, seed: u64) -> Vec<FeatureVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let offset = spacing / 2f64.sqrt();
    (0..per_class * 3)
        .map(|i| {
            let k = i % 3;
            let values = (0..2).map(|_| k as f64 * offset + noise.sample(&mut rng)).collect();
            FeatureVector::new(values, k)
        })
        .collect()
}

#[test]
fn criterion_06_toy_scale_learning() {
    let start = Instant::now();
    let train_set = blobs(150, 6.0, 60);
    let test_set = blobs(150, 6.0, 61);
    let params = BaseParams::new(3);
    let model = train(&train_set, &BoostConfig::default().with_rounds(5), &params).unwrap().model;
    let hits = test_set.iter().filter(|d| model.classify(&d.values).unwrap() == d.class).count();
    let accuracy = hits as f64 / test_set.len() as f64;
    let elapsed = start.elapsed();

    let single = train(&train_set, &BoostConfig::default().with_rounds(1), &params).unwrap().model;
    let base = train_base(&train_set, &params).unwrap();
    let agree = test_set
        .iter()
        .all(|d| single.classify(&d.values).unwrap() == base.classify(&d.values).unwrap());
    verdict(
        6,
        "toy-scale learning",
        accuracy >= TOY_ACCURACY && elapsed < TOY_TIME && agree,
        &format!(
            "test accuracy {:.2}% (min {:.0}%), {:.1} s, T=1 equals base learner: {agree}",
            accuracy * 100.0,
            TOY_ACCURACY * 100.0,
            elapsed.as_secs_f64()
        ),
    );
}

fn find(dir: &Path, stems: &[&str]) -> Option<PathBuf> {
    stems
        .iter()
        .flat_map(|s| [dir.join(s), dir.join(format!("{s}.gz"))])
        .find(|p| p.exists())
}

/// Locates the 10% KDD and Corrected KDD files, failing the criterion if absent.
fn kdd_files(id: u32, name: &str) -> (PathBuf, PathBuf) {
    let dir = std::env::var_os("BSPNN_KDD_DIR").map(PathBuf::from);
    let found = dir.as_deref().and_then(|d| {
        Some((
            find(d, &["kddcup.data_10_percent", "kddcup.data_10_percent_corrected"])?,
            find(d, &["corrected"])?,
        ))
    });
    match found {
        Some(files) => files,
        None => {
            verdict(id, name, false, "KDD-99 files not found; set BSPNN_KDD_DIR");
            unreachable!()
        }
    }
}

fn desk_config(out: &Path, train: PathBuf, test: PathBuf) -> RunConfig {
    let mut c = RunConfig::default();
    c.paths.train_file = Some(train);
    c.paths.test_file = Some(test);
    c.out_dir = out.to_path_buf();
    c.seed = 2024;
    c.caps = CapsConfig {
        normal: Some(20_000),
        dos: Some(20_000),
        ..CapsConfig::default()
    };
    c.test_caps = CapsConfig {
        normal: Some(10_000),
        dos: Some(10_000),
        ..CapsConfig::default()
    };
    c.boost.rounds = 10;
    c
}

#[test]
#[ignore = "needs KDD-99 files in BSPNN_KDD_DIR"]
fn criterion_07_dataset_construction() {
    let name = "dataset construction";
    let (train_file, test_file) = kdd_files(7, name);
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = desk_config(dir.path(), train_file, test_file);
    let res = Resources::load(&config).unwrap();
    let summary = commands::build_datasets(&config, &res).unwrap();
    let row = |n: &str| summary.rows.iter().find(|r| r.name == n).unwrap().counts;
    let (tr, te, d13) = (row("train"), row("test"), row("D13"));
    let expected = [
        (tr.dos, 391_458),
        (tr.probe, 4_107),
        (tr.u2r, 52),
        (tr.r2l, 1_126),
        (tr.total_attack, 396_743),
        (tr.total_normal, 97_277),
        (te.dos, 229_853),
        (te.probe, 4_166),
        (te.u2r, 70),
        (te.r2l, 16_347),
        (te.total_attack, 250_436),
        (te.total_normal, 60_593),
        (d13.total(), 97_277 + 396_743),
    ];
    let mismatches: Vec<String> = expected
        .iter()
        .filter(|(got, want)| got != want)
        .map(|(got, want)| format!("{got} != {want}"))
        .collect();
    let elapsed = start.elapsed();
    verdict(
        7,
        name,
        mismatches.is_empty() && elapsed < Duration::from_secs(120),
        &format!("{} mismatches {:?}, {:.1} s", mismatches.len(), mismatches, elapsed.as_secs_f64()),
    );
}

#[test]
#[ignore = "needs KDD-99 files in BSPNN_KDD_DIR"]
fn criterion_08_misuse_pipeline() {
    let name = "misuse pipeline";
    let (train_file, test_file) = kdd_files(8, name);
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = desk_config(dir.path(), train_file, test_file);
    let res = Resources::load(&config).unwrap();
    commands::build_datasets(&config, &res).unwrap();
    let model = commands::train(&config, &res, Mode::Misuse, "D13", None).unwrap();
    let eval = commands::evaluate(&config, &res, &model.model_path).unwrap();
    let Report::Misuse(r) = eval.report.report else { panic!("misuse report expected") };
    let dr = |c: Category| r.detection_rate[c.index()].unwrap_or(0.0);
    let elapsed = start.elapsed();
    let ok = dr(Category::Normal) >= 0.95
        && dr(Category::DoS) >= 0.90
        && dr(Category::Probe) >= 0.85
        && dr(Category::U2R) > 0.0
        && dr(Category::R2L) > 0.0
        && elapsed < Duration::from_secs(15 * 60);
    verdict(
        8,
        name,
        ok,
        &format!(
            "DR Normal {:.2}% DoS {:.2}% Probe {:.2}% U2R {:.2}% R2L {:.2}%, {:.0} s",
            dr(Category::Normal) * 100.0,
            dr(Category::DoS) * 100.0,
            dr(Category::Probe) * 100.0,
            dr(Category::U2R) * 100.0,
            dr(Category::R2L) * 100.0,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
#[ignore = "needs KDD-99 files in BSPNN_KDD_DIR"]
fn criterion_09_anomaly_pipeline() {
    let name = "anomaly pipeline";
    let (train_file, test_file) = kdd_files(9, name);
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = desk_config(dir.path(), train_file, test_file);
    let res = Resources::load(&config).unwrap();
    commands::build_datasets(&config, &res).unwrap();
    let model = commands::train(&config, &res, Mode::Anomaly, "Norm", None).unwrap();
    let eval = commands::evaluate(&config, &res, &model.model_path).unwrap();
    let Report::Anomaly(r) = eval.report.report else { panic!("anomaly report expected") };
    let q = config.anomaly.quantile;
    let far = r.false_alarm_rate.unwrap_or(1.0);
    let dr = r.detection_rate.unwrap_or(0.0);
    let elapsed = start.elapsed();
    verdict(
        9,
        name,
        (far - q).abs() <= 0.02 && dr >= 0.80 && elapsed < Duration::from_secs(10 * 60),
        &format!("q {q}, FAR {:.2}%, DR {:.2}%, {:.0} s", far * 100.0, dr * 100.0, elapsed.as_secs_f64()),
    );
}

#[test]
#[ignore = "needs KDD-99 files in BSPNN_KDD_DIR"]
fn criterion_10_detection_rate_trend() {
    let name = "detection-rate trend";
    let (train_file, test_file) = kdd_files(10, name);
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = desk_config(dir.path(), train_file, test_file);
    let res = Resources::load(&config).unwrap();
    commands::build_datasets(&config, &res).unwrap();
    let out = commands::curve(&config, &res).unwrap();
    let rows = &out.curve.rows;
    let dr = |k: usize, c: Category| rows[k].detection_rate[c.index()].unwrap_or(0.0);
    let trend = Category::ATTACKS.iter().all(|&c| dr(12, c) >= dr(0, c));
    let r2l_rises = (1..12).any(|k| dr(k, Category::R2L) > dr(0, Category::R2L));
    let elapsed = start.elapsed();
    verdict(
        10,
        name,
        trend && r2l_rises && elapsed < Duration::from_secs(45 * 60),
        &format!(
            "D13 >= D1 for every attack category: {trend}, R2L rises before D13: {r2l_rises}, {:.0} s",
            elapsed.as_secs_f64()
        ),
    );
}

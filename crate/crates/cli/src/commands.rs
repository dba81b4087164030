//! Pipeline commands. Each one reads its inputs, writes only under the
//! configured output directory and returns what it wrote.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bspnn::anomaly::{calibrate_threshold, train_density, AnomalyLabel, DensityBandwidthSpec, DensityModel};
use bspnn::booster::{self, BoostedModel, RoundLog};
use bspnn::dataset::{
    build_clusters, filter_normal, shuffle, subsample, summarize, summary_table, LabeledDataset, Summary,
};
use bspnn::kdd::{read_unlabeled, Category, Encoder};
use bspnn::metrics::{confusion, misuse_report, AnomalyReferenceTable, AnomalyReport, MisuseReport};
use bspnn::sample::FeatureVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CapsConfig, Resources, RunConfig};
use crate::error::{io_error, CliError, CliResult};
use crate::model_file::{Mode, Model, ModelFile};

pub const CLUSTER_COUNT: usize = 13;

fn category_names() -> Vec<String> {
    Category::ALL.iter().map(|c| c.name().to_string()).collect()
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn add(a: Summary, b: Summary) -> Summary {
    Summary {
        normal: a.normal + b.normal,
        probe: a.probe + b.probe,
        dos: a.dos + b.dos,
        u2r: a.u2r + b.u2r,
        r2l: a.r2l + b.r2l,
        total_attack: a.total_attack + b.total_attack,
        total_normal: a.total_normal + b.total_normal,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub counts: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub seed: u64,
    pub train_file: PathBuf,
    pub test_file: Option<PathBuf>,
    pub rows: Vec<SummaryRow>,
}

/// `D_k` is stored as the list of its component files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub components: Vec<String>,
    pub counts: Summary,
}

/// Writes `Norm`, `C1..C13` (KDD format) and `D1..D13` manifests plus a
/// summary table.
pub fn build_datasets(config: &RunConfig, res: &Resources) -> CliResult<DatasetSummary> {
    let train_file = config.require_train_file()?;
    if res.clusters.clusters().len() != CLUSTER_COUNT {
        return Err(CliError::Validation(format!(
            "cluster table has {} clusters, expected {CLUSTER_COUNT}",
            res.clusters.clusters().len()
        )));
    }
    let full = LabeledDataset::load(train_file, &res.schema, &res.categories, "train")?;
    let norm = filter_normal(&full);
    let clusters = build_clusters(&full, &res.clusters)?;
    let test = match &config.paths.test_file {
        Some(path) => Some(LabeledDataset::load(path, &res.schema, &res.categories, "test")?),
        None => None,
    };

    let dir = config.datasets_dir();
    create_dir(&dir)?;
    let mut rows = vec![SummaryRow {
        name: "train".into(),
        counts: summarize(&full),
    }];
    if let Some(test) = &test {
        rows.push(SummaryRow {
            name: "test".into(),
            counts: summarize(test),
        });
    }
    norm.write(&dir.join("Norm.csv"), &res.schema)?;
    let norm_counts = summarize(&norm);
    rows.push(SummaryRow {
        name: "Norm".into(),
        counts: norm_counts,
    });
    let mut cluster_counts = Vec::with_capacity(CLUSTER_COUNT);
    for (i, c) in clusters.iter().enumerate() {
        let name = format!("C{}", i + 1);
        c.write(&dir.join(format!("{name}.csv")), &res.schema)?;
        cluster_counts.push(summarize(c));
        rows.push(SummaryRow {
            name,
            counts: summarize(c),
        });
    }
    let mut running = norm_counts;
    let mut components = vec!["Norm.csv".to_string()];
    for (k, counts) in cluster_counts.iter().enumerate() {
        running = add(running, *counts);
        components.push(format!("C{}.csv", k + 1));
        let manifest = Manifest {
            name: format!("D{}", k + 1),
            seed: config.seed,
            components: components.clone(),
            counts: running,
        };
        write_file(&dir.join(format!("{}.json", manifest.name)), &to_json(&manifest)?)?;
        rows.push(SummaryRow {
            name: manifest.name,
            counts: running,
        });
    }

    let summary = DatasetSummary {
        seed: config.seed,
        train_file: train_file.to_path_buf(),
        test_file: config.paths.test_file.clone(),
        rows,
    };
    let table: Vec<(String, Summary)> = summary.rows.iter().map(|r| (r.name.clone(), r.counts)).collect();
    write_file(
        &dir.join("summary.txt"),
        &format!("seed: {}\n{}", config.seed, summary_table(&table)),
    )?;
    write_file(&dir.join("summary.json"), &to_json(&summary)?)?;
    Ok(summary)
}

/// Loads `Norm`, `C<k>` or `D<k>` from the datasets directory.
pub fn load_dataset(config: &RunConfig, res: &Resources, id: &str) -> CliResult<LabeledDataset> {
    let dir = config.datasets_dir();
    let index = |prefix: &str| -> CliResult<Option<usize>> {
        match id.strip_prefix(prefix) {
            Some(rest) => match rest.parse::<usize>() {
                Ok(k) if (1..=CLUSTER_COUNT).contains(&k) => Ok(Some(k)),
                _ => Err(CliError::Validation(format!("unknown dataset {id:?}"))),
            },
            None => Ok(None),
        }
    };
    let files: Vec<String> = if id == "Norm" {
        vec!["Norm.csv".into()]
    } else if let Some(k) = index("C")? {
        vec![format!("C{k}.csv")]
    } else if let Some(k) = index("D")? {
        let path = dir.join(format!("D{k}.json"));
        let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(bspnn::Error::from)?;
        manifest.components
    } else {
        return Err(CliError::Validation(format!(
            "unknown dataset {id:?} (expected Norm, C1..C13 or D1..D13)"
        )));
    };
    let mut records = Vec::new();
    for f in files {
        let part = LabeledDataset::load(&dir.join(f), &res.schema, &res.categories, id)?;
        records.extend(part.records);
    }
    Ok(LabeledDataset::new(records, id))
}

fn encode_all(encoder: &Encoder<f64>, ds: &LabeledDataset) -> CliResult<Vec<FeatureVector<f64>>> {
    Ok(ds
        .records
        .par_iter()
        .map(|r| encoder.encode(&r.record, &r.label()))
        .collect::<bspnn::Result<Vec<_>>>()?)
}

pub struct MisuseFit {
    pub encoder: Encoder<f64>,
    pub model: BoostedModel<f64>,
    pub log: Vec<RoundLog>,
    pub training_records: usize,
}

/// Subsamples, fits the encoder and trains the boosted ensemble.
pub fn fit_misuse(ds: &LabeledDataset, config: &RunConfig, res: &Resources) -> CliResult<MisuseFit> {
    let sample = subsample(ds, &config.caps.to_caps(), config.seed);
    if sample.is_empty() {
        return Err(bspnn::Error::EmptyDataset.into());
    }
    let encoder = Encoder::fit(&sample.raw_records(), &res.schema)?;
    let mut data = encode_all(&encoder, &sample)?;
    // Quantization is order dependent; present the records in a seeded order.
    shuffle(&mut data, config.seed);
    let out = booster::train(&data, &config.boost, &config.base_params())?;
    Ok(MisuseFit {
        encoder,
        model: out.model,
        log: out.log,
        training_records: data.len(),
    })
}

pub struct AnomalyFit {
    pub encoder: Encoder<f64>,
    pub model: DensityModel<f64>,
    pub fit_records: usize,
    pub calibration_records: usize,
}

/// Splits the normal records of `ds` into a fitting part and a held-out
/// calibration part, fits the density and sets its threshold.
pub fn fit_anomaly(ds: &LabeledDataset, config: &RunConfig, res: &Resources) -> CliResult<AnomalyFit> {
    let normals = subsample(&filter_normal(ds), &config.caps.to_caps(), config.seed);
    let n = normals.len();
    let n_cal = ((n as f64 * config.anomaly.calibration_fraction).round() as usize).max(1);
    if n < 2 || n_cal >= n {
        return Err(CliError::Validation(format!(
            "need at least two normal records to fit and calibrate, found {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, config.seed);
    let (cal_idx, fit_idx) = order.split_at(n_cal);
    let pick = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        LabeledDataset::new(idx.into_iter().map(|i| normals.records[i].clone()).collect(), "Norm")
    };
    let (fit_set, cal_set) = (pick(fit_idx), pick(cal_idx));
    let encoder = Encoder::fit(&fit_set.raw_records(), &res.schema)?;
    let fit_data = encode_all(&encoder, &fit_set)?;
    let cal_data = encode_all(&encoder, &cal_set)?;
    let spec = DensityBandwidthSpec {
        grid_points: config.anomaly.grid_points,
        folds: config.anomaly.folds,
        range: config.anomaly.bandwidth_range,
    };
    let model = train_density(&fit_data, config.vq.radius, &spec)?;
    let model = calibrate_threshold(&model, &cal_data, config.anomaly.quantile)?;
    Ok(AnomalyFit {
        encoder,
        model,
        fit_records: fit_data.len(),
        calibration_records: cal_data.len(),
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model_path: PathBuf,
    pub log_path: PathBuf,
}

pub fn default_model_path(config: &RunConfig, mode: Mode, dataset: &str) -> PathBuf {
    config.models_dir().join(format!("{mode}-{dataset}.json"))
}

pub fn train(
    config: &RunConfig,
    res: &Resources,
    mode: Mode,
    dataset: &str,
    model_path: Option<&Path>,
) -> CliResult<TrainOutput> {
    let ds = load_dataset(config, res, dataset)?;
    let model_path = model_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_model_path(config, mode, dataset));
    let log_path = model_path.with_extension("log");
    let mut log = format!("mode: {mode}\ndataset: {dataset}\nseed: {}\n", config.seed);
    let (encoder, model) = match mode {
        Mode::Misuse => {
            let fit = fit_misuse(&ds, config, res)?;
            let _ = writeln!(log, "training records: {}", fit.training_records);
            for entry in &fit.log {
                let _ = writeln!(log, "{entry}");
            }
            (fit.encoder, Model::Misuse(fit.model))
        }
        Mode::Anomaly => {
            let fit = fit_anomaly(&ds, config, res)?;
            let m = &fit.model;
            let _ = writeln!(
                log,
                "fit records: {}\ncalibration records: {}\nradius: {:e}\nclusters: {}\nbandwidth: {:e}\nquantile: {}\nlog threshold: {:e}",
                fit.fit_records,
                fit.calibration_records,
                m.radius,
                m.clusters.len(),
                m.bandwidth,
                config.anomaly.quantile,
                m.log_threshold.unwrap_or(f64::NAN)
            );
            (fit.encoder, Model::Anomaly(fit.model))
        }
    };
    let file = ModelFile {
        dataset: dataset.to_string(),
        seed: config.seed,
        config: config.clone(),
        encoder,
        model,
    };
    if let Some(parent) = model_path.parent() {
        create_dir(parent)?;
    }
    file.save(&model_path)?;
    write_file(&log_path, &log)?;
    Ok(TrainOutput { model_path, log_path })
}

/// Loads the configured test file and applies the test caps.
pub fn load_test_set(config: &RunConfig, res: &Resources, encoder: &Encoder<f64>) -> CliResult<LabeledDataset> {
    let path = config.require_test_file()?;
    let ds = LabeledDataset::load(path, encoder.schema(), &res.categories, "test")?;
    Ok(subsample(&ds, &config.test_caps.to_caps(), config.seed))
}

pub fn misuse_predictions(
    model: &BoostedModel<f64>,
    encoder: &Encoder<f64>,
    test: &LabeledDataset,
) -> CliResult<(Vec<usize>, Vec<usize>)> {
    let data = encode_all(encoder, test)?;
    let preds = data
        .par_iter()
        .map(|d| model.classify(&d.values))
        .collect::<bspnn::Result<Vec<_>>>()?;
    Ok((preds, data.iter().map(|d| d.class).collect()))
}

pub fn evaluate_misuse(
    model: &BoostedModel<f64>,
    encoder: &Encoder<f64>,
    test: &LabeledDataset,
    res: &Resources,
) -> CliResult<MisuseReport> {
    let (preds, truths) = misuse_predictions(model, encoder, test)?;
    let cm = confusion(&preds, &truths, category_names())?;
    Ok(misuse_report(&cm, &res.cost, Some(&res.reference))?)
}

pub fn evaluate_anomaly(
    model: &DensityModel<f64>,
    encoder: &Encoder<f64>,
    test: &LabeledDataset,
) -> CliResult<AnomalyReport> {
    let data = encode_all(encoder, test)?;
    let flags = data
        .par_iter()
        .map(|d| Ok(model.classify_anomaly(&d.values)? == AnomalyLabel::Anomaly))
        .collect::<bspnn::Result<Vec<bool>>>()?;
    let is_attack: Vec<bool> = test.records.iter().map(|r| r.category.is_attack()).collect();
    Ok(AnomalyReport::from_flags(&flags, &is_attack, model.quantile)?.with_reference(&AnomalyReferenceTable::kdd()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Report {
    Misuse(MisuseReport),
    Anomaly(AnomalyReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: PathBuf,
    pub model_dataset: String,
    pub test_file: PathBuf,
    pub seed: u64,
    pub test_caps: CapsConfig,
    pub report: Report,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "model: {} (trained on {})\ntest file: {}\nseed: {}\n\n",
            self.model.display(),
            self.model_dataset,
            self.test_file.display(),
            self.seed
        );
        out.push_str(&match &self.report {
            Report::Misuse(r) => r.to_text(),
            Report::Anomaly(r) => r.to_text(),
        });
        out
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub text_path: PathBuf,
    pub json_path: PathBuf,
}

pub fn evaluate(config: &RunConfig, res: &Resources, model_path: &Path) -> CliResult<EvalOutput> {
    let file = ModelFile::load(model_path)?;
    let test = load_test_set(config, res, &file.encoder)?;
    let report = match &file.model {
        Model::Misuse(m) => Report::Misuse(evaluate_misuse(m, &file.encoder, &test, res)?),
        Model::Anomaly(m) => Report::Anomaly(evaluate_anomaly(m, &file.encoder, &test)?),
    };
    let report = EvalReport {
        model: model_path.to_path_buf(),
        model_dataset: file.dataset.clone(),
        test_file: config.require_test_file()?.to_path_buf(),
        seed: config.seed,
        test_caps: config.test_caps,
        report,
    };
    let dir = config.reports_dir();
    create_dir(&dir)?;
    let stem = model_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let text_path = dir.join(format!("{stem}.txt"));
    let json_path = dir.join(format!("{stem}.json"));
    write_file(&text_path, &report.to_text())?;
    write_file(&json_path, &to_json(&report)?)?;
    Ok(EvalOutput {
        report,
        text_path,
        json_path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub dataset: String,
    pub training_records: usize,
    /// Per-category detection rate; `None` when the test set has no such records.
    pub detection_rate: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub seed: u64,
    pub class_names: Vec<String>,
    pub rows: Vec<CurveRow>,
}

impl Curve {
    pub fn to_csv(&self) -> String {
        let mut out = format!("dataset,{}\n", self.class_names.join(","));
        for row in &self.rows {
            out.push_str(&row.dataset);
            for v in &row.detection_rate {
                match v {
                    Some(v) => {
                        let _ = write!(out, ",{v:.6}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct CurveOutput {
    pub curve: Curve,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

/// Trains one misuse model per `D_k` and evaluates each on the test set.
pub fn curve(config: &RunConfig, res: &Resources) -> CliResult<CurveOutput> {
    config.require_test_file()?;
    let rows = (1..=CLUSTER_COUNT)
        .into_par_iter()
        .map(|k| {
            let name = format!("D{k}");
            let ds = load_dataset(config, res, &name)?;
            let fit = fit_misuse(&ds, config, res)?;
            let test = load_test_set(config, res, &fit.encoder)?;
            let report = evaluate_misuse(&fit.model, &fit.encoder, &test, res)?;
            log::info!("{name}: detection rates {:?}", report.detection_rate);
            Ok(CurveRow {
                dataset: name,
                training_records: fit.training_records,
                detection_rate: report.detection_rate,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let curve = Curve {
        seed: config.seed,
        class_names: category_names(),
        rows,
    };
    create_dir(&config.out_dir)?;
    let csv_path = config.out_dir.join("curve.csv");
    let json_path = config.out_dir.join("curve.json");
    write_file(&csv_path, &curve.to_csv())?;
    write_file(&json_path, &to_json(&curve)?)?;
    Ok(CurveOutput {
        curve,
        csv_path,
        json_path,
    })
}

/// Writes one line per input record: the predicted label followed by the
/// class scores (misuse) or the log density score (anomaly). Returns the
/// number of lines written.
pub fn predict(model_path: &Path, input: &Path, out: &mut dyn Write) -> CliResult<usize> {
    let file = ModelFile::load(model_path)?;
    let records = read_unlabeled(input, file.encoder.schema())?;
    let lines = records
        .par_iter()
        .map(|r| {
            let x = file.encoder.encode_values(r)?;
            let mut line = String::new();
            match &file.model {
                Model::Misuse(m) => {
                    let (k, scores) = m.predict_ensemble(&x)?;
                    line.push_str(Category::from_index(k).map_or("?", Category::name));
                    for s in scores {
                        let _ = write!(line, ",{s:.6}");
                    }
                }
                Model::Anomaly(m) => {
                    let label = m.classify_anomaly(&x)?;
                    let score = m.log_density_score(&x)?;
                    let _ = write!(line, "{label},{score:.6}");
                }
            }
            Ok(line)
        })
        .collect::<bspnn::Result<Vec<String>>>()?;
    for line in &lines {
        writeln!(out, "{line}").map_err(|e| io_error(Path::new("<output>"), e))?;
    }
    Ok(lines.len())
}

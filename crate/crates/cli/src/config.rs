//! Run configuration: a JSON document whose keys can each be overridden on
//! the command line. A snapshot is embedded in every artifact.

use std::path::{Path, PathBuf};

use bspnn::booster::BoostConfig;
use bspnn::dataset::{Caps, ClusterTable};
use bspnn::kdd::{Category, CategoryMap, Schema, UnknownPolicy};
use bspnn::metrics::{CostMatrix, ReferenceTable};
use bspnn::vq_grnn::{BandwidthSearchSpec, BaseParams, RadiusRule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Labeled training records (the 10% KDD file).
    pub train_file: Option<PathBuf>,
    /// Labeled test records (Corrected KDD).
    pub test_file: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub category_map: Option<PathBuf>,
    pub cluster_table: Option<PathBuf>,
    pub cost_matrix: Option<PathBuf>,
    /// Published results shown next to misuse reports.
    pub reference: Option<PathBuf>,
}

/// Per-category caps; `null` keeps every record of that category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapsConfig {
    pub normal: Option<usize>,
    pub probe: Option<usize>,
    pub dos: Option<usize>,
    pub u2r: Option<usize>,
    pub r2l: Option<usize>,
}

impl CapsConfig {
    pub fn to_caps(self) -> Caps {
        Caps([self.normal, self.probe, self.dos, self.u2r, self.r2l])
    }

    pub fn is_unlimited(&self) -> bool {
        self.to_caps() == Caps::unlimited()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderOptions {
    /// Category for attack names missing from the category map; `null`
    /// rejects them.
    pub unknown_attacks: Option<Category>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqOptions {
    pub radius: RadiusRule<f64>,
}

impl Default for VqOptions {
    fn default() -> Self {
        Self {
            radius: RadiusRule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyOptions {
    pub quantile: f64,
    /// Fraction of the normal records held out to calibrate the threshold.
    pub calibration_fraction: f64,
    pub grid_points: usize,
    pub folds: usize,
    pub bandwidth_range: Option<(f64, f64)>,
}

impl Default for AnomalyOptions {
    fn default() -> Self {
        Self {
            quantile: 0.01,
            calibration_fraction: 0.2,
            grid_points: 20,
            folds: 5,
            bandwidth_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Training-set caps.
    pub caps: CapsConfig,
    /// Test-set caps.
    pub test_caps: CapsConfig,
    pub encoder: EncoderOptions,
    pub vq: VqOptions,
    /// Explicit bandwidth search; derived from the radius when `null`.
    pub bandwidth: Option<BandwidthSearchSpec<f64>>,
    pub boost: BoostConfig<f64>,
    pub anomaly: AnomalyOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            out_dir: PathBuf::from("out"),
            seed: 0,
            caps: CapsConfig::default(),
            test_caps: CapsConfig::default(),
            encoder: EncoderOptions::default(),
            vq: VqOptions::default(),
            bandwidth: None,
            boost: BoostConfig::default(),
            anomaly: AnomalyOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    /// Checks every referenced path and numeric option.
    pub fn validate(&self) -> CliResult<()> {
        let p = &self.paths;
        let named = [
            ("train_file", &p.train_file),
            ("test_file", &p.test_file),
            ("schema", &p.schema),
            ("category_map", &p.category_map),
            ("cluster_table", &p.cluster_table),
            ("cost_matrix", &p.cost_matrix),
            ("reference", &p.reference),
        ];
        for (key, path) in named {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(CliError::Validation(format!(
                        "{key}: {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        match self.vq.radius {
            RadiusRule::Fixed(r) if !(r >= 0.0 && r.is_finite()) => {
                return Err(CliError::Validation(format!("vq.radius {r} must be finite and >= 0")));
            }
            RadiusRule::Auto { factor } if !(factor > 0.0 && factor.is_finite()) => {
                return Err(CliError::Validation(format!("auto radius factor {factor} must be > 0")));
            }
            _ => {}
        }
        if let Some(spec) = &self.bandwidth {
            spec.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        }
        self.boost
            .validate(Category::COUNT)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let a = &self.anomaly;
        if !(a.quantile > 0.0 && a.quantile < 1.0) {
            return Err(CliError::Validation(format!("anomaly.quantile {} outside (0, 1)", a.quantile)));
        }
        if !(a.calibration_fraction > 0.0 && a.calibration_fraction < 1.0) {
            return Err(CliError::Validation(format!(
                "anomaly.calibration_fraction {} outside (0, 1)",
                a.calibration_fraction
            )));
        }
        if a.grid_points == 0 || a.folds < 2 {
            return Err(CliError::Validation("anomaly needs grid_points >= 1 and folds >= 2".into()));
        }
        Ok(())
    }

    pub fn require_train_file(&self) -> CliResult<&Path> {
        self.paths
            .train_file
            .as_deref()
            .ok_or_else(|| CliError::Validation("no training file configured (paths.train_file or --train)".into()))
    }

    pub fn require_test_file(&self) -> CliResult<&Path> {
        self.paths
            .test_file
            .as_deref()
            .ok_or_else(|| CliError::Validation("no test file configured (paths.test_file or --test)".into()))
    }

    pub fn base_params(&self) -> BaseParams<f64> {
        let mut params = BaseParams::new(Category::COUNT).with_radius(self.vq.radius);
        if let Some(spec) = self.bandwidth {
            params = params.with_bandwidth(spec);
        }
        params
    }

    pub fn datasets_dir(&self) -> PathBuf {
        self.out_dir.join("datasets")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out_dir.join("models")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out_dir.join("reports")
    }
}

/// Tables loaded from configured paths, or the built-in KDD-99 defaults.
#[derive(Debug, Clone)]
pub struct Resources {
    pub schema: Schema,
    pub categories: CategoryMap,
    pub clusters: ClusterTable,
    pub cost: CostMatrix<f64>,
    pub reference: ReferenceTable,
}

impl Resources {
    pub fn load(config: &RunConfig) -> CliResult<Self> {
        let p = &config.paths;
        let invalid = |e: bspnn::Error| CliError::Validation(e.to_string());
        let schema = match &p.schema {
            Some(path) => Schema::load(path).map_err(invalid)?,
            None => Schema::kdd(),
        };
        let mut categories = match &p.category_map {
            Some(path) => CategoryMap::load(path).map_err(invalid)?,
            None => CategoryMap::kdd(),
        };
        if let Some(c) = config.encoder.unknown_attacks {
            categories = categories.with_policy(UnknownPolicy::Assign(c));
        }
        let clusters = match &p.cluster_table {
            Some(path) => ClusterTable::load(path).map_err(invalid)?,
            None => ClusterTable::kdd(),
        };
        let cost = match &p.cost_matrix {
            Some(path) => CostMatrix::load(path, false).map_err(invalid)?,
            None => CostMatrix::kdd(),
        };
        if cost.classes() != Category::COUNT {
            return Err(CliError::Validation(format!(
                "cost matrix has {} classes, expected {}",
                cost.classes(),
                Category::COUNT
            )));
        }
        let reference = match &p.reference {
            Some(path) => ReferenceTable::load(path).map_err(invalid)?,
            None => ReferenceTable::kdd_misuse(),
        };
        Ok(Self {
            schema,
            categories,
            clusters,
            cost,
            reference,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c: RunConfig =
            serde_json::from_str(r#"{"boost": {"rounds": 3}, "caps": {"dos": 10}, "vq": {"radius": {"fixed": 0.5}}}"#)
                .unwrap();
        assert_eq!(c.boost.rounds, 3);
        assert_eq!(c.boost.alpha_floor, 1e-3);
        assert_eq!(c.caps.to_caps().get(Category::DoS), Some(10));
        assert_eq!(c.caps.to_caps().get(Category::Normal), None);
        assert_eq!(c.vq.radius, RadiusRule::Fixed(0.5));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 1}"#).is_err());
    }

    #[test]
    fn missing_paths_fail_validation() {
        let mut c = RunConfig::default();
        c.paths.cluster_table = Some("/nonexistent/clusters.txt".into());
        assert!(matches!(c.validate(), Err(CliError::Validation(_))));
    }

    #[test]
    fn bad_quantile_fails_validation() {
        let mut c = RunConfig::default();
        c.anomaly.quantile = 1.5;
        assert!(c.validate().is_err());
    }
}

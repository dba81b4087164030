//! Model files written by `train`: the fitted encoder, the model document and
//! the configuration that produced them.

use std::path::Path;

use bspnn::anomaly::DensityModel;
use bspnn::booster::BoostedModel;
use bspnn::kdd::Encoder;
use bspnn::persist;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{io_error, CliError, CliResult};

pub const FORMAT: &str = "bspnn_model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Misuse,
    Anomaly,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Misuse => "misuse",
            Mode::Anomaly => "anomaly",
        })
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Misuse(BoostedModel<f64>),
    Anomaly(DensityModel<f64>),
}

impl Model {
    pub fn mode(&self) -> Mode {
        match self {
            Model::Misuse(_) => Mode::Misuse,
            Model::Anomaly(_) => Mode::Anomaly,
        }
    }

    fn width(&self) -> usize {
        match self {
            Model::Misuse(m) => m.width(),
            Model::Anomaly(m) => m.width(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelFile {
    pub dataset: String,
    pub seed: u64,
    pub config: RunConfig,
    pub encoder: Encoder<f64>,
    pub model: Model,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    mode: Mode,
    dataset: String,
    seed: u64,
    config: RunConfig,
    encoder: Encoder<f64>,
    model: serde_json::Value,
}

impl ModelFile {
    pub fn to_json(&self) -> CliResult<String> {
        let model = match &self.model {
            Model::Misuse(m) => persist::to_value(persist::BOOSTED_FORMAT, m)?,
            Model::Anomaly(m) => persist::to_value(persist::DENSITY_FORMAT, m)?,
        };
        let doc = Document {
            format: FORMAT.into(),
            version: VERSION,
            mode: self.model.mode(),
            dataset: self.dataset.clone(),
            seed: self.seed,
            config: self.config.clone(),
            encoder: self.encoder.clone(),
            model,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| CliError::Internal(e.to_string()))
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let doc: Document = serde_json::from_str(text).map_err(bspnn::Error::from)?;
        if doc.format != FORMAT {
            return Err(bspnn::Error::DocumentFormat {
                expected: FORMAT.into(),
                found: doc.format,
            }
            .into());
        }
        if doc.version != VERSION {
            return Err(bspnn::Error::UnsupportedVersion {
                expected: VERSION,
                found: doc.version,
            }
            .into());
        }
        let model = match doc.mode {
            Mode::Misuse => Model::Misuse(persist::from_value(persist::BOOSTED_FORMAT, doc.model)?),
            Mode::Anomaly => Model::Anomaly(persist::from_value(persist::DENSITY_FORMAT, doc.model)?),
        };
        if model.width() != doc.encoder.output_dim() {
            return Err(bspnn::Error::EncoderMismatch(format!(
                "encoder produces {} features, model expects {}",
                doc.encoder.output_dim(),
                model.width()
            ))
            .into());
        }
        Ok(Self {
            dataset: doc.dataset,
            seed: doc.seed,
            config: doc.config,
            encoder: doc.encoder,
            model,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| io_error(path, e))
    }
}

//! Boosted vector-quantized GRNN ensembles and the KDD-99 intrusion-detection
//! experiment pipeline built on them.
//!
//! The learners are generic over the floating-point [`Scalar`]; the aliases
//! below fix the common `f64` and `f32` instantiations. Evaluation costs are
//! generic over any numeric type, so exact rational costs work too.

pub mod anomaly;
pub mod booster;
pub mod dataset;
pub mod error;
pub mod kdd;
pub mod metrics;
pub mod persist;
pub mod sample;
pub mod scalar;
pub mod vq_grnn;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FeatureVector64 = sample::FeatureVector<f64>;
pub type FeatureVector32 = sample::FeatureVector<f32>;
pub type Encoder64 = kdd::Encoder<f64>;
pub type Encoder32 = kdd::Encoder<f32>;
pub type Cluster64 = vq_grnn::Cluster<f64>;
pub type VqGrnnModel64 = vq_grnn::VqGrnnModel<f64>;
pub type VqGrnnModel32 = vq_grnn::VqGrnnModel<f32>;
pub type BaseParams64 = vq_grnn::BaseParams<f64>;
pub type BandwidthSearchSpec64 = vq_grnn::BandwidthSearchSpec<f64>;
pub type BoostConfig64 = booster::BoostConfig<f64>;
pub type BoostedModel64 = booster::BoostedModel<f64>;
pub type BoostedModel32 = booster::BoostedModel<f32>;
pub type DensityModel64 = anomaly::DensityModel<f64>;
pub type DensityModel32 = anomaly::DensityModel<f32>;
pub type CostMatrix64 = metrics::CostMatrix<f64>;

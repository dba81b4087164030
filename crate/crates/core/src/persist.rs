//! Versioned JSON envelopes for model files.
//!
//! Every document carries a `format` tag and a `version`; the model's own
//! fields are flattened next to them. Floats are written in shortest
//! round-trip form and parsed with full binary64 precision.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

pub const VQ_GRNN_FORMAT: &str = "vq_grnn";
pub const BOOSTED_FORMAT: &str = "boosted_vq_grnn";
pub const DENSITY_FORMAT: &str = "vq_density";

#[derive(Serialize)]
struct Outgoing<'a, M> {
    format: &'a str,
    version: u32,
    #[serde(flatten)]
    body: &'a M,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct Incoming<M> {
    #[serde(flatten)]
    body: M,
}

pub fn to_json<M: Serialize>(format: &str, body: &M) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Outgoing {
        format,
        version: VERSION,
        body,
    })?)
}

pub fn to_value<M: Serialize>(format: &str, body: &M) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(Outgoing {
        format,
        version: VERSION,
        body,
    })?)
}

pub fn from_json<M: DeserializeOwned>(format: &str, text: &str) -> Result<M> {
    let header: Header = serde_json::from_str(text)?;
    check(format, &header)?;
    let doc: Incoming<M> = serde_json::from_str(text)?;
    Ok(doc.body)
}

pub fn from_value<M: DeserializeOwned>(format: &str, value: serde_json::Value) -> Result<M> {
    let header: Header = serde_json::from_value(value.clone())?;
    check(format, &header)?;
    let doc: Incoming<M> = serde_json::from_value(value)?;
    Ok(doc.body)
}

fn check(format: &str, header: &Header) -> Result<()> {
    if header.format != format {
        return Err(Error::DocumentFormat {
            expected: format.to_string(),
            found: header.format.clone(),
        });
    }
    if header.version != VERSION {
        return Err(Error::UnsupportedVersion {
            expected: VERSION,
            found: header.version,
        });
    }
    Ok(())
}

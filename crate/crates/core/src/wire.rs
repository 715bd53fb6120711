//! JSON bodies exchanged between the inference service and its clients.
//!
//! Binary artifacts (encrypted images, logits, matrices, evaluation keys)
//! travel as base64 strings of their file encodings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cnn::Packing;
use crate::error::{Error, ErrorKind};
use crate::model::IntegerModel;
use crate::slot::CostReport;

pub mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

pub mod b64_opt {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match bytes {
            Some(b) => s.serialize_some(&STANDARD.encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| STANDARD.decode(t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Sim,
    Fv,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "sim" => Ok(BackendKind::Sim),
            "fv" => Ok(BackendKind::Fv),
            other => Err(Error::InvalidParams(format!("unknown backend `{other}` (expected sim or fv)"))),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Sim => "sim",
            BackendKind::Fv => "fv",
        })
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferRequest {
    pub profile: String,
    pub backend: BackendKind,
    pub packing: Packing,
    pub model: IntegerModel,
    /// Encoded [`crate::cnn::EncryptedImage`].
    #[serde(with = "b64")]
    pub image: Vec<u8>,
    /// Encoded evaluation keys; required for the FV backend.
    #[serde(default, with = "b64_opt", skip_serializing_if = "Option::is_none")]
    pub eval_keys: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mem_cap: Option<u64>,
    #[serde(default = "yes")]
    pub skip_zero_segments: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferResponse {
    /// Encoded [`crate::cnn::EncryptedLogits`].
    #[serde(with = "b64")]
    pub logits: Vec<u8>,
    pub report: CostReport,
    pub wall_time_ms: f64,
}

/// Side-by-side run of both packings on a cleartext (quantized) image,
/// always on the simulator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRequest {
    pub profile: String,
    pub model: IntegerModel,
    pub image: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots_used: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mem_cap: Option<u64>,
    /// Report planned counters without evaluating.
    #[serde(default)]
    pub estimate_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingSummary {
    pub input_ciphertexts: u64,
    pub report: CostReport,
    /// False when `report` comes from the planner rather than a run.
    pub measured: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<i64>>,
    /// Set when the run was refused; the report is then the plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refused: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareResponse {
    pub profile: String,
    pub slots_used: usize,
    pub compact: PackingSummary,
    pub interleaved: PackingSummary,
    /// Interleaved over compact, per metric.
    pub ratios: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatMulRequest {
    pub profile: String,
    pub backend: BackendKind,
    /// Encoded [`crate::hemat::EncMatrixFile`] operands.
    #[serde(with = "b64")]
    pub a: Vec<u8>,
    #[serde(with = "b64")]
    pub b: Vec<u8>,
    #[serde(default, with = "b64_opt", skip_serializing_if = "Option::is_none")]
    pub eval_keys: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatMulResponse {
    #[serde(with = "b64")]
    pub c: Vec<u8>,
    pub report: CostReport,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: ErrorKind,
    pub message: String,
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        ErrorBody { kind: e.kind(), message: e.to_string() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Blob {
        #[serde(with = "b64")]
        data: Vec<u8>,
        #[serde(default, with = "b64_opt")]
        extra: Option<Vec<u8>>,
    }

    #[test]
    fn base64_fields_round_trip() {
        let b = Blob { data: vec![0, 1, 2, 255], extra: Some(vec![7; 5]) };
        let text = serde_json::to_string(&b).unwrap();
        assert_eq!(text, r#"{"data":"AAEC/w==","extra":"BwcHBwc="}"#);
        assert_eq!(serde_json::from_str::<Blob>(&text).unwrap(), b);
        let none: Blob = serde_json::from_str(r#"{"data":""}"#).unwrap();
        assert_eq!(none, Blob { data: vec![], extra: None });
        assert!(serde_json::from_str::<Blob>(r#"{"data":"@@"}"#).is_err());
    }

    #[test]
    fn backend_names() {
        assert_eq!("fv".parse::<BackendKind>().unwrap(), BackendKind::Fv);
        assert_eq!(BackendKind::Sim.to_string(), "sim");
        assert!("bfv".parse::<BackendKind>().is_err());
        assert_eq!(serde_json::to_string(&BackendKind::Fv).unwrap(), r#""fv""#);
    }

    #[test]
    fn error_bodies_carry_the_class() {
        let e = Error::CapacityRefused { estimate_bytes: 2, cap_bytes: 1 };
        assert_eq!(ErrorBody::from(&e).kind, ErrorKind::Capacity);
        assert_eq!(ErrorBody::from(&Error::ParamMismatch).kind, ErrorKind::Invalid);
        let io = Error::Io(std::io::Error::other("x"));
        assert_eq!(io.kind(), ErrorKind::Io);
    }
}

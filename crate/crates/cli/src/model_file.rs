//! The versioned JSON document written by `train` and read by `predict`.

use rulelist::dataset::Binarizer;
use rulelist::model::TrainedModel;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug)]
pub struct FormatError(pub String);

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid model file: {}", self.0)
    }
}

impl std::error::Error for FormatError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub label: String,
    pub positive_label: Option<String>,
    pub min_support: f64,
    /// How raw columns map to the binary features the rules mention.
    pub features: Binarizer,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(
        label: String,
        positive_label: Option<String>,
        min_support: f64,
        features: Binarizer,
        model: TrainedModel,
    ) -> Self {
        ModelFile {
            version: FORMAT_VERSION.to_string(),
            label,
            positive_label,
            min_support,
            features,
            model,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| FormatError(e.to_string()))?;
        match raw.get("version").and_then(|v| v.as_str()) {
            Some(FORMAT_VERSION) => {}
            Some(v) => return Err(FormatError(format!("unsupported version `{v}`"))),
            None => return Err(FormatError("missing `version` field".into())),
        }
        serde_json::from_value(raw).map_err(|e| FormatError(e.to_string()))
    }
}

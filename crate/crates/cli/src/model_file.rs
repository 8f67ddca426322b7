//! Versioned model persistence.
//!
//! A model file is pretty-printed JSON. Floats are written in their
//! shortest round-trip form, so `load` followed by `save` reproduces the
//! file byte for byte.

use std::path::Path;

use ecnn::{CascadeModel, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    /// Configuration the model was trained with.
    pub config: TrainConfig,
    pub feature_names: Option<Vec<String>>,
    pub model: CascadeModel,
}

impl ModelFile {
    pub fn new(
        model: CascadeModel,
        config: TrainConfig,
        feature_names: Option<Vec<String>>,
    ) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            config,
            feature_names,
            model,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model values are finite");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::Data(format!("malformed model file: {e}")))?;
        match value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
        {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => return Err(CliError::Data(format!(
                "unsupported model format version {v} (this build reads version {FORMAT_VERSION})"
            ))),
            None => return Err(CliError::Data("model file has no format_version".into())),
        }
        let file: ModelFile = serde_json::from_value(value)
            .map_err(|e| CliError::Data(format!("invalid model file: {e}")))?;
        if let Some(names) = &file.feature_names {
            if names.len() != file.model.n_features() {
                return Err(CliError::Data(format!(
                    "model file lists {} feature names for {} features",
                    names.len(),
                    file.model.n_features()
                )));
            }
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_text()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_text(&text)
    }
}

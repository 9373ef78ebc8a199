use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::CalibrationModel;
use crate::segmentation::SegmentationConfig;

/// The operator-facing configuration file: one flat JSON object, every
/// field optional.
///
/// ```json
/// {
///   "filter": {"kind": "median", "window": 15},
///   "red": {"h_lo": 350, "h_hi": 10, "s_min": 0.5, "v_min": 0.3},
///   "blue": {"h_lo": 200, "h_hi": 260, "s_min": 0.5, "v_min": 0.3},
///   "min_blob_px": 20,
///   "model": "model.json"
/// }
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub segmentation: SegmentationConfig,
    /// Calibration model path. Relative paths are resolved against the
    /// directory holding the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.segmentation.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let (Some(model), Some(dir)) = (&cfg.model, path.parent()) {
            if model.is_relative() {
                cfg.model = Some(dir.join(model));
            }
        }
        Ok(cfg)
    }

    pub fn load_model(&self) -> Result<CalibrationModel> {
        let path = self
            .model
            .as_ref()
            .ok_or_else(|| Error::Config("no calibration model configured".into()))?;
        CalibrationModel::load(path)
    }
}

use std::path::PathBuf;

/// Everything that can go wrong in the pipeline.
///
/// Detection failures are kept as distinct variants because callers (the
/// CLI in particular) treat "nothing found" differently from bad input.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("NoRedRegion")]
    NoRedRegion,

    #[error("NoBlueRegion")]
    NoBlueRegion,

    #[error("GeometryInverted: blue centroid (y = {blue_y:.2}) is above red centroid (y = {red_y:.2})")]
    GeometryInverted { red_y: f64, blue_y: f64 },

    #[error("DegenerateDetection: ring centroids {separation_px:.3} px apart")]
    DegenerateDetection { separation_px: f64 },

    #[error("ModelMismatch: image is {image_width}x{image_height}, model calibrated for {model_width}x{model_height}")]
    ModelMismatch {
        image_width: u32,
        image_height: u32,
        model_width: u32,
        model_height: u32,
    },

    #[error("MissingHorizontalModel: calibration has no horizontal constant, bearing unavailable")]
    MissingHorizontalModel,

    #[error("InsufficientData: need at least 2 samples, got {0}")]
    InsufficientData(usize),

    #[error("DegenerateFit: every regressor value is zero")]
    DegenerateFit,

    #[error("row {row}: {message}")]
    Datasheet { row: usize, message: String },

    #[error("OutOfView: {0}")]
    OutOfView(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for the failures produced when a frame does not contain a usable
    /// landmark (as opposed to bad files, bad parameters or bad models).
    pub fn is_detection_failure(&self) -> bool {
        matches!(
            self,
            Error::NoRedRegion
                | Error::NoBlueRegion
                | Error::GeometryInverted { .. }
                | Error::DegenerateDetection { .. }
        )
    }

    /// Short variant name, used on stderr by the command-line tool.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::Format { .. } => "Format",
            Error::Parameter(_) => "Parameter",
            Error::NoRedRegion => "NoRedRegion",
            Error::NoBlueRegion => "NoBlueRegion",
            Error::GeometryInverted { .. } => "GeometryInverted",
            Error::DegenerateDetection { .. } => "DegenerateDetection",
            Error::ModelMismatch { .. } => "ModelMismatch",
            Error::MissingHorizontalModel => "MissingHorizontalModel",
            Error::InsufficientData(_) => "InsufficientData",
            Error::DegenerateFit => "DegenerateFit",
            Error::Datasheet { .. } => "Datasheet",
            Error::OutOfView(_) => "OutOfView",
            Error::Config(_) => "Config",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

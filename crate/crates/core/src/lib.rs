//! Monocular range and bearing to a passive two-ring landmark.
//!
//! The landmark is a 70 mm tall, 35 mm wide cylinder with a red band at the
//! top and a blue band at the bottom. From a single frame the pipeline
//!
//! 1. **filtering** suppresses noise (median of 15 by default),
//! 2. **imaging** converts to HSV,
//! 3. **segmentation** thresholds both colours, labels connected regions and
//!    takes the centroid of the largest region per colour,
//! 4. **estimation** turns the centroid separation `L` and the landmark's
//!    horizontal offset into forward distance, lateral distance, bearing and
//!    range using constants fitted by **calibration**.
//!
//! **synthcam** renders the landmark through an ideal pinhole camera and
//! provides exact ground truth, and **evaluation** scores the pipeline on
//! rendered datasets.
//!
//! ```
//! use ringbearing::prelude::*;
//!
//! let cam = CameraSpec::default();
//! let (frame, truth) = render(
//!     &Pose::new(50.0, 0.0),
//!     &cam,
//!     &LandmarkSpec::default(),
//!     &RenderOptions::default(),
//! )?;
//! let det = detect_rings(&frame, &SegmentationConfig::default())?;
//! assert!((det.separation_px - truth.separation_px).abs() < 3.0);
//!
//! let model = CalibrationModel::new(3500.0, Some(1.0 / 700.0), true, 800, 480)?;
//! let est = estimate(&det, &model)?;
//! assert!(est.in_range && est.in_bearing);
//! # Ok::<(), ringbearing::Error>(())
//! ```

pub mod calibration;
pub mod config;
mod error;
pub mod estimation;
pub mod evaluation;
pub mod filtering;
pub mod imaging;
pub mod segmentation;
pub mod synthcam;

pub use error::{Error, Result};

/// Every chapter of the guide in `book/` is compiled and run as a doc-test.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/imaging.md")]
    mod imaging {}
    #[doc = include_str!("../../../book/src/filtering.md")]
    mod filtering {}
    #[doc = include_str!("../../../book/src/segmentation.md")]
    mod segmentation {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/synthetic-camera.md")]
    mod synthetic_camera {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

pub mod prelude {
    pub use crate::calibration::{
        calibrate, fit_horizontal, fit_horizontal_depth_scaled, fit_vertical, load_datasheet,
        Datasheet, FitReport, HorizontalSample, ManifestRow, VerticalSample,
    };
    pub use crate::config::PipelineConfig;
    pub use crate::estimation::{
        bearing, estimate, estimate_from_features, horizontal_distance, range,
        vertical_distance, CalibrationModel, Estimate,
    };
    pub use crate::filtering::{bilateral_filter, gaussian_filter, median_filter, FilterSpec};
    pub use crate::imaging::{load_image, rgb_to_hsv, save_image, ImageHsv, ImageRgb, PixelCoord};
    pub use crate::segmentation::{
        connected_components, detect_rings, threshold_hsv, Blob, ColorMask, HsvRange,
        RingDetection, SegmentationConfig,
    };
    pub use crate::synthcam::{
        generate_dataset, project_ring_centers, render, validity_grid, CameraSpec,
        LandmarkSpec, Pose, RenderOptions,
    };
    pub use crate::Error;
}

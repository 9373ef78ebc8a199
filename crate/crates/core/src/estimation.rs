//! Range and bearing from the ring separation and the landmark's horizontal
//! offset.
//!
//! The forward distance follows the reciprocal law `d_v = a_vert / L`. The
//! lateral offset in centimetres is a linear function of the pixel offset.
//! Bearing and range then come from the right triangle formed by `d_v` and
//! `d_h`: `theta = atan(d_h / d_v)` and `d = d_v / cos(theta)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::RingDetection;

/// Reciprocal constant reproducing `d_v = 3500 / L`.
pub const DEFAULT_A_VERT: f64 = 3500.0;
pub const DEFAULT_D_V_MIN: f64 = 28.0;
pub const DEFAULT_D_V_MAX: f64 = 72.0;
pub const DEFAULT_BEARING_ABS_MAX: f64 = 25.0;

fn default_d_v_min() -> f64 {
    DEFAULT_D_V_MIN
}
fn default_d_v_max() -> f64 {
    DEFAULT_D_V_MAX
}
fn default_bearing_abs_max() -> f64 {
    DEFAULT_BEARING_ABS_MAX
}

/// Fitted constants for one camera plus the envelope they are trusted in.
///
/// `k_horiz` has two readings. With `k_horiz_depth_scaled == false` it is a
/// fixed centimetres-per-pixel factor. With `true` the centimetres-per-pixel
/// factor grows linearly with forward distance, `d_h = k_horiz * d_v * px`,
/// which is what a pinhole camera does (`k_horiz = 1 / focal_px`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub a_vert: f64,
    /// Absent when no horizontal data was available; bearing is then unavailable.
    pub k_horiz: Option<f64>,
    #[serde(default)]
    pub k_horiz_depth_scaled: bool,
    pub image_width: usize,
    pub image_height: usize,
    #[serde(default = "default_d_v_min")]
    pub d_v_min: f64,
    #[serde(default = "default_d_v_max")]
    pub d_v_max: f64,
    #[serde(default = "default_bearing_abs_max")]
    pub bearing_abs_max: f64,
}

impl CalibrationModel {
    /// A model with the default envelope.
    pub fn new(
        a_vert: f64,
        k_horiz: Option<f64>,
        k_horiz_depth_scaled: bool,
        image_width: usize,
        image_height: usize,
    ) -> Result<Self> {
        let model = Self {
            a_vert,
            k_horiz,
            k_horiz_depth_scaled,
            image_width,
            image_height,
            d_v_min: DEFAULT_D_V_MIN,
            d_v_max: DEFAULT_D_V_MAX,
            bearing_abs_max: DEFAULT_BEARING_ABS_MAX,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.a_vert) {
            return Err(Error::Parameter(format!("a_vert must be positive, got {}", self.a_vert)));
        }
        if let Some(k) = self.k_horiz {
            if !positive(k) {
                return Err(Error::Parameter(format!("k_horiz must be positive, got {k}")));
            }
        }
        if !(positive(self.d_v_min) && self.d_v_min < self.d_v_max && self.d_v_max.is_finite()) {
            return Err(Error::Parameter(format!(
                "need 0 < d_v_min < d_v_max, got [{}, {}]",
                self.d_v_min, self.d_v_max
            )));
        }
        if !(self.bearing_abs_max > 0.0 && self.bearing_abs_max < 90.0) {
            return Err(Error::Parameter(format!(
                "bearing_abs_max must be in (0, 90), got {}",
                self.bearing_abs_max
            )));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::Parameter("model image dimensions must be nonzero".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("model serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// One range/bearing measurement with the intermediates that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(rename = "d_v_cm")]
    pub d_v: f64,
    /// Positive when the landmark is right of the image centre.
    #[serde(rename = "d_h_cm")]
    pub d_h: f64,
    #[serde(rename = "theta_deg")]
    pub theta: f64,
    #[serde(rename = "d_cm")]
    pub d: f64,
    #[serde(rename = "L_px")]
    pub separation_px: f64,
    pub in_range: bool,
    pub in_bearing: bool,
}

pub fn vertical_distance(separation_px: f64, model: &CalibrationModel) -> Result<f64> {
    if !(separation_px > 0.0 && separation_px.is_finite()) {
        return Err(Error::Parameter(format!(
            "ring separation must be positive, got {separation_px}"
        )));
    }
    Ok(model.a_vert / separation_px)
}

/// Lateral offset in cm for a signed pixel offset observed at forward distance `d_v`.
///
/// `d_v` only matters for depth-scaled models.
pub fn horizontal_distance(d_h_px: f64, d_v: f64, model: &CalibrationModel) -> Result<f64> {
    let k = model.k_horiz.ok_or(Error::MissingHorizontalModel)?;
    Ok(if model.k_horiz_depth_scaled {
        k * d_v * d_h_px
    } else {
        k * d_h_px
    })
}

/// Signed bearing in degrees.
pub fn bearing(d_h: f64, d_v: f64) -> Result<f64> {
    if !(d_v > 0.0) {
        return Err(Error::Parameter(format!("d_v must be positive, got {d_v}")));
    }
    Ok((d_h / d_v).atan().to_degrees())
}

pub fn range(d_v: f64, theta_deg: f64) -> Result<f64> {
    if !(d_v > 0.0) {
        return Err(Error::Parameter(format!("d_v must be positive, got {d_v}")));
    }
    if !(theta_deg.abs() < 90.0) {
        return Err(Error::Parameter(format!("|theta| must be below 90 deg, got {theta_deg}")));
    }
    Ok(d_v / theta_deg.to_radians().cos())
}

/// The full chain from image features (ring separation and horizontal offset,
/// both in pixels) to an [`Estimate`].
pub fn estimate_from_features(
    separation_px: f64,
    d_h_px: f64,
    model: &CalibrationModel,
) -> Result<Estimate> {
    let d_v = vertical_distance(separation_px, model)?;
    let d_h = horizontal_distance(d_h_px, d_v, model)?;
    let theta = bearing(d_h, d_v)?;
    let d = range(d_v, theta)?;
    Ok(Estimate {
        d_v,
        d_h,
        theta,
        d,
        separation_px,
        in_range: (model.d_v_min..=model.d_v_max).contains(&d_v),
        in_bearing: theta.abs() <= model.bearing_abs_max,
    })
}

/// Out-of-envelope detections still produce numbers; the flags say whether
/// they can be trusted.
pub fn estimate(detection: &RingDetection, model: &CalibrationModel) -> Result<Estimate> {
    if (detection.image_width, detection.image_height) != (model.image_width, model.image_height) {
        return Err(Error::ModelMismatch {
            image_width: detection.image_width as u32,
            image_height: detection.image_height as u32,
            model_width: model.image_width as u32,
            model_height: model.image_height as u32,
        });
    }
    estimate_from_features(detection.separation_px, detection.horizontal_offset_px(), model)
}

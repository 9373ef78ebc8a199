//! Run the full pipeline over a generated dataset and compare with its
//! ground truth.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::ManifestRow;
use crate::error::{Error, Result};
use crate::estimation::{estimate, CalibrationModel, Estimate};
use crate::imaging::load_image;
use crate::segmentation::{detect_rings, RingDetection, SegmentationConfig};

pub const EVAL_HEADER: &str = "filename,true_d_cm,est_d_cm,range_err_pct,true_theta_deg,est_theta_deg,bearing_err_deg,bearing_err_pct_span";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub filename: String,
    pub true_d_cm: f64,
    pub est_d_cm: f64,
    pub range_err_pct: f64,
    pub true_theta_deg: f64,
    pub est_theta_deg: f64,
    pub bearing_err_deg: f64,
    /// Absolute bearing error as a percentage of the model's full bearing span.
    pub bearing_err_pct_span: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub evaluated: usize,
    /// Manifest entries whose image file was missing.
    pub skipped: usize,
    /// Images where no usable landmark was found.
    pub detection_failures: usize,
    pub mean_range_err_pct: f64,
    pub max_range_err_pct: f64,
    pub mean_bearing_err_deg: f64,
    pub max_bearing_err_deg: f64,
    pub mean_bearing_err_pct_span: f64,
}

#[derive(Debug)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub skipped: Vec<String>,
    pub failures: Vec<(String, Error)>,
    pub summary: EvalSummary,
}

enum Outcome<T> {
    Done(T),
    Missing(String),
    Failed(String, Error),
}

fn detect_file(dir: &Path, row: &ManifestRow, cfg: &SegmentationConfig) -> Result<Outcome<RingDetection>> {
    let img = match load_image(dir.join(&row.filename)) {
        Ok(img) => img,
        Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => {
            return Ok(Outcome::Missing(row.filename.clone()))
        }
        Err(e) => return Err(e),
    };
    match detect_rings(&img, cfg) {
        Ok(det) => Ok(Outcome::Done(det)),
        Err(e) if e.is_detection_failure() => Ok(Outcome::Failed(row.filename.clone(), e)),
        Err(e) => Err(e),
    }
}

fn compare(row: &ManifestRow, est: &Estimate, model: &CalibrationModel) -> EvalRow {
    let bearing_err_deg = (est.theta - row.theta_deg).abs();
    EvalRow {
        filename: row.filename.clone(),
        true_d_cm: row.d_cm,
        est_d_cm: est.d,
        range_err_pct: 100.0 * (est.d - row.d_cm).abs() / row.d_cm,
        true_theta_deg: row.theta_deg,
        est_theta_deg: est.theta,
        bearing_err_deg,
        bearing_err_pct_span: 100.0 * bearing_err_deg / (2.0 * model.bearing_abs_max),
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Evaluate every manifest entry. Images are processed in parallel; the rows
/// come back in manifest order.
pub fn evaluate(
    dataset_dir: impl AsRef<Path>,
    manifest: &[ManifestRow],
    cfg: &SegmentationConfig,
    model: &CalibrationModel,
) -> Result<EvalReport> {
    let dir = dataset_dir.as_ref();
    cfg.validate()?;
    let outcomes = manifest
        .par_iter()
        .map(|row| {
            Ok(match detect_file(dir, row, cfg)? {
                Outcome::Done(det) => Outcome::Done(compare(row, &estimate(&det, model)?, model)),
                Outcome::Missing(f) => Outcome::Missing(f),
                Outcome::Failed(f, e) => Outcome::Failed(f, e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::Done(r) => rows.push(r),
            Outcome::Missing(f) => skipped.push(f),
            Outcome::Failed(f, e) => failures.push((f, e)),
        }
    }
    let summary = EvalSummary {
        evaluated: rows.len(),
        skipped: skipped.len(),
        detection_failures: failures.len(),
        mean_range_err_pct: mean(rows.iter().map(|r| r.range_err_pct)),
        max_range_err_pct: rows.iter().map(|r| r.range_err_pct).fold(0.0, f64::max),
        mean_bearing_err_deg: mean(rows.iter().map(|r| r.bearing_err_deg)),
        max_bearing_err_deg: rows.iter().map(|r| r.bearing_err_deg).fold(0.0, f64::max),
        mean_bearing_err_pct_span: mean(rows.iter().map(|r| r.bearing_err_pct_span)),
    };
    Ok(EvalReport {
        rows,
        skipped,
        failures,
        summary,
    })
}

pub fn format_eval_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(EVAL_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.filename,
            r.true_d_cm,
            r.est_d_cm,
            r.range_err_pct,
            r.true_theta_deg,
            r.est_theta_deg,
            r.bearing_err_deg,
            r.bearing_err_pct_span
        ));
    }
    out
}

/// Replace the analytic feature columns of a manifest with what the pipeline
/// actually measures on each image, producing a datasheet for calibration.
///
/// Returns the measured rows plus the names of images that were missing or
/// had no usable detection.
pub fn measure_dataset(
    dataset_dir: impl AsRef<Path>,
    manifest: &[ManifestRow],
    cfg: &SegmentationConfig,
) -> Result<(Vec<ManifestRow>, Vec<String>)> {
    let dir = dataset_dir.as_ref();
    cfg.validate()?;
    let outcomes = manifest
        .par_iter()
        .map(|row| {
            Ok(match detect_file(dir, row, cfg)? {
                Outcome::Done(det) => Outcome::Done(ManifestRow {
                    separation_px: det.separation_px,
                    d_h_px: det.horizontal_offset_px(),
                    ..row.clone()
                }),
                Outcome::Missing(f) => Outcome::Missing(f),
                Outcome::Failed(f, e) => Outcome::Failed(f, e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut measured = Vec::new();
    let mut dropped = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Done(r) => measured.push(r),
            Outcome::Missing(f) | Outcome::Failed(f, _) => dropped.push(f),
        }
    }
    Ok((measured, dropped))
}

//! Least-squares fitting of the vertical and horizontal constants from
//! measurement datasheets.
//!
//! Both models pass through the origin, so each fit is a single ratio of
//! sums. For regressor `x` and target `y` the constant is
//! `sum(x * y) / sum(x * x)`.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::CalibrationModel;

/// A hand-measured forward distance paired with the ring separation the
/// pipeline saw at that distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalSample {
    pub d_v: f64,
    pub separation_px: f64,
}

/// A measured lateral offset and its pixel counterpart. `d_v` is present
/// when the sheet also records the forward distance of the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizontalSample {
    pub d_h_cm: f64,
    pub d_h_px: f64,
    pub d_v: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    pub constant: f64,
    /// Root-mean-square residual, in cm.
    pub rmse: f64,
    pub n: usize,
    pub max_abs_residual: f64,
}

fn through_origin(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> Result<(f64, FitReport)> {
    let n = pairs.clone().count();
    if n < 2 {
        return Err(Error::InsufficientData(n));
    }
    let (sxy, sxx) = pairs
        .clone()
        .fold((0.0, 0.0), |(sxy, sxx), (x, y)| (sxy + x * y, sxx + x * x));
    if sxx == 0.0 {
        return Err(Error::DegenerateFit);
    }
    let constant = sxy / sxx;
    let (sq, max) = pairs.fold((0.0f64, 0.0f64), |(sq, max), (x, y)| {
        let r = y - constant * x;
        (sq + r * r, max.max(r.abs()))
    });
    Ok((
        constant,
        FitReport {
            constant,
            rmse: (sq / n as f64).sqrt(),
            n,
            max_abs_residual: max,
        },
    ))
}

/// Fit `a_vert` in `d_v = a_vert / L`, linearised on `1 / L`.
pub fn fit_vertical(samples: &[VerticalSample]) -> Result<(f64, FitReport)> {
    through_origin(samples.iter().map(|s| (1.0 / s.separation_px, s.d_v)))
}

/// Fit the fixed scale `k` in `d_h_cm = k * d_h_px`.
pub fn fit_horizontal(samples: &[HorizontalSample]) -> Result<(f64, FitReport)> {
    through_origin(samples.iter().map(|s| (s.d_h_px, s.d_h_cm)))
}

/// Fit `k` in `d_h_cm = k * d_v * d_h_px`. Every sample must carry `d_v`.
pub fn fit_horizontal_depth_scaled(samples: &[HorizontalSample]) -> Result<(f64, FitReport)> {
    if let Some(i) = samples.iter().position(|s| s.d_v.is_none()) {
        return Err(Error::Parameter(format!(
            "horizontal sample {i} has no forward distance"
        )));
    }
    through_origin(
        samples
            .iter()
            .map(|s| (s.d_v.unwrap_or(f64::NAN) * s.d_h_px, s.d_h_cm)),
    )
}

/// Result of [`calibrate`].
#[derive(Debug, Clone)]
pub struct Calibration {
    pub model: CalibrationModel,
    pub vertical: FitReport,
    pub horizontal: Option<FitReport>,
}

/// Fit both constants and assemble a model with the default envelope.
///
/// The horizontal fit is depth-scaled when every horizontal sample records
/// its forward distance, and fixed otherwise. Without horizontal samples the
/// model has no `k_horiz`.
pub fn calibrate(
    vertical: &[VerticalSample],
    horizontal: Option<&[HorizontalSample]>,
    image_width: usize,
    image_height: usize,
) -> Result<Calibration> {
    let (a_vert, vertical_report) = fit_vertical(vertical)?;
    let (k_horiz, scaled, horizontal_report) = match horizontal {
        None => (None, false, None),
        Some(samples) => {
            let scaled = samples.iter().all(|s| s.d_v.is_some());
            let (k, report) = if scaled {
                fit_horizontal_depth_scaled(samples)?
            } else {
                fit_horizontal(samples)?
            };
            (Some(k), scaled, Some(report))
        }
    };
    Ok(Calibration {
        model: CalibrationModel::new(a_vert, k_horiz, scaled, image_width, image_height)?,
        vertical: vertical_report,
        horizontal: horizontal_report,
    })
}

/// One line of a generated dataset's manifest: an image and its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub filename: String,
    pub d_v_cm: f64,
    pub d_h_cm: f64,
    pub theta_deg: f64,
    pub d_cm: f64,
    pub separation_px: f64,
    pub d_h_px: f64,
}

pub const VERTICAL_HEADER: &str = "d_v_cm,L_px";
pub const HORIZONTAL_HEADER: &str = "d_h_cm,d_h_px";
pub const HORIZONTAL_DEPTH_HEADER: &str = "d_h_cm,d_h_px,d_v_cm";
pub const MANIFEST_HEADER: &str = "filename,d_v_cm,d_h_cm,theta_deg,d_cm,L_px,d_h_px";

/// A parsed datasheet. Manifests supply both vertical and horizontal samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Datasheet {
    Vertical(Vec<VerticalSample>),
    Horizontal(Vec<HorizontalSample>),
    Manifest(Vec<ManifestRow>),
}

impl Datasheet {
    pub fn vertical_samples(&self) -> Option<Vec<VerticalSample>> {
        match self {
            Datasheet::Vertical(v) => Some(v.clone()),
            Datasheet::Manifest(rows) => Some(
                rows.iter()
                    .map(|r| VerticalSample {
                        d_v: r.d_v_cm,
                        separation_px: r.separation_px,
                    })
                    .collect(),
            ),
            Datasheet::Horizontal(_) => None,
        }
    }

    pub fn horizontal_samples(&self) -> Option<Vec<HorizontalSample>> {
        match self {
            Datasheet::Horizontal(h) => Some(h.clone()),
            Datasheet::Manifest(rows) => Some(
                rows.iter()
                    .map(|r| HorizontalSample {
                        d_h_cm: r.d_h_cm,
                        d_h_px: r.d_h_px,
                        d_v: Some(r.d_v_cm),
                    })
                    .collect(),
            ),
            Datasheet::Vertical(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Datasheet::Vertical(v) => v.len(),
            Datasheet::Horizontal(h) => h.len(),
            Datasheet::Manifest(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Row<'a> {
    line: usize,
    record: &'a csv::StringRecord,
    header: &'a csv::StringRecord,
}

impl Row<'_> {
    fn number(&self, col: usize) -> Result<f64> {
        let cell = self.record.get(col).unwrap_or("").trim();
        cell.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Datasheet {
                row: self.line,
                message: format!(
                    "column {} (`{}`): not a finite number",
                    self.header.get(col).unwrap_or("?"),
                    cell
                ),
            })
    }

    fn positive(&self, col: usize) -> Result<f64> {
        let v = self.number(col)?;
        if v <= 0.0 {
            return Err(Error::Datasheet {
                row: self.line,
                message: format!(
                    "column {} must be positive, got {v}",
                    self.header.get(col).unwrap_or("?")
                ),
            });
        }
        Ok(v)
    }
}

pub fn load_datasheet(path: impl AsRef<Path>) -> Result<Datasheet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_datasheet(&text)
}

pub fn parse_datasheet(text: &str) -> Result<Datasheet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::format("header", e.to_string()))?
        .clone();
    let joined = header.iter().collect::<Vec<_>>().join(",");
    let kind = match joined.as_str() {
        VERTICAL_HEADER | HORIZONTAL_HEADER | HORIZONTAL_DEPTH_HEADER | MANIFEST_HEADER => joined,
        "" => return Err(Error::format("header", "datasheet is empty")),
        other => {
            return Err(Error::format(
                "header",
                format!(
                    "unknown header `{other}`; expected `{VERTICAL_HEADER}`, `{HORIZONTAL_HEADER}`, `{HORIZONTAL_DEPTH_HEADER}` or `{MANIFEST_HEADER}`"
                ),
            ))
        }
    };

    let mut vertical = Vec::new();
    let mut horizontal = Vec::new();
    let mut manifest = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                return Err(Error::Datasheet {
                    row: line,
                    message: e.to_string(),
                });
            }
        }
        let row = Row {
            line: record.position().map_or(0, |p| p.line() as usize),
            record: &record,
            header: &header,
        };
        match kind.as_str() {
            VERTICAL_HEADER => vertical.push(VerticalSample {
                d_v: row.positive(0)?,
                separation_px: row.positive(1)?,
            }),
            HORIZONTAL_HEADER => horizontal.push(HorizontalSample {
                d_h_cm: row.number(0)?,
                d_h_px: row.number(1)?,
                d_v: None,
            }),
            HORIZONTAL_DEPTH_HEADER => horizontal.push(HorizontalSample {
                d_h_cm: row.number(0)?,
                d_h_px: row.number(1)?,
                d_v: Some(row.positive(2)?),
            }),
            _ => manifest.push(ManifestRow {
                filename: record.get(0).unwrap_or("").to_string(),
                d_v_cm: row.positive(1)?,
                d_h_cm: row.number(2)?,
                theta_deg: row.number(3)?,
                d_cm: row.positive(4)?,
                separation_px: row.positive(5)?,
                d_h_px: row.number(6)?,
            }),
        }
    }
    Ok(match kind.as_str() {
        VERTICAL_HEADER => Datasheet::Vertical(vertical),
        MANIFEST_HEADER => Datasheet::Manifest(manifest),
        _ => Datasheet::Horizontal(horizontal),
    })
}

/// Serialise a datasheet in the same CSV layout `parse_datasheet` reads.
/// Numbers use Rust's shortest round-trip formatting, so parsing the output
/// gives back identical values.
pub fn format_datasheet(sheet: &Datasheet) -> String {
    let mut out = String::new();
    let mut line = |fields: Vec<String>| {
        out.push_str(&fields.join(","));
        out.push('\n');
    };
    match sheet {
        Datasheet::Vertical(v) => {
            line(vec![VERTICAL_HEADER.into()]);
            for s in v {
                line(vec![s.d_v.to_string(), s.separation_px.to_string()]);
            }
        }
        Datasheet::Horizontal(h) => {
            let with_depth = !h.is_empty() && h.iter().all(|s| s.d_v.is_some());
            line(vec![if with_depth {
                HORIZONTAL_DEPTH_HEADER.into()
            } else {
                HORIZONTAL_HEADER.into()
            }]);
            for s in h {
                let mut f = vec![s.d_h_cm.to_string(), s.d_h_px.to_string()];
                if with_depth {
                    f.push(s.d_v.unwrap_or(f64::NAN).to_string());
                }
                line(f);
            }
        }
        Datasheet::Manifest(rows) => {
            line(vec![MANIFEST_HEADER.into()]);
            for r in rows {
                line(manifest_fields(r));
            }
        }
    }
    out
}

pub(crate) fn manifest_fields(r: &ManifestRow) -> Vec<String> {
    vec![
        r.filename.clone(),
        r.d_v_cm.to_string(),
        r.d_h_cm.to_string(),
        r.theta_deg.to_string(),
        r.d_cm.to_string(),
        r.separation_px.to_string(),
        r.d_h_px.to_string(),
    ]
}

pub fn save_datasheet(sheet: &Datasheet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_datasheet(sheet)).map_err(|e| Error::io(path, e))
}

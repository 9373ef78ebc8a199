//! Colour segmentation of the two landmark rings and their moment centroids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtering::FilterSpec;
use crate::imaging::{rgb_to_hsv, Hsv, ImageHsv, ImageRgb, PixelCoord};

/// Hue interval plus saturation/value floors.
///
/// When `h_lo > h_hi` the interval wraps through 0°, which is how red is
/// expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsvRange {
    pub h_lo: f64,
    pub h_hi: f64,
    pub s_min: f64,
    pub v_min: f64,
}

impl HsvRange {
    pub const RED: HsvRange = HsvRange {
        h_lo: 350.0,
        h_hi: 10.0,
        s_min: 0.5,
        v_min: 0.3,
    };
    pub const BLUE: HsvRange = HsvRange {
        h_lo: 200.0,
        h_hi: 260.0,
        s_min: 0.5,
        v_min: 0.3,
    };

    pub fn validate(&self) -> Result<()> {
        let hue_ok = |h: f64| (0.0..360.0).contains(&h);
        let frac_ok = |f: f64| (0.0..=1.0).contains(&f);
        if !(hue_ok(self.h_lo) && hue_ok(self.h_hi) && frac_ok(self.s_min) && frac_ok(self.v_min)) {
            return Err(Error::Parameter(format!("invalid HSV range {self:?}")));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, p: Hsv) -> bool {
        let hue = if self.h_lo <= self.h_hi {
            p.h >= self.h_lo && p.h <= self.h_hi
        } else {
            p.h >= self.h_lo || p.h <= self.h_hi
        };
        hue && p.s >= self.s_min && p.v >= self.v_min
    }
}

/// One flag per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ColorMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Parameter(format!(
                "{} mask bits for a {width}x{height} raster",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

pub fn threshold_hsv(img: &ImageHsv, range: &HsvRange) -> ColorMask {
    ColorMask {
        width: img.width(),
        height: img.height(),
        bits: img.data().iter().map(|&p| range.contains(p)).collect(),
    }
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundingBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

/// A connected region of a mask and its moments up to second order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Blob {
    pub pixel_count: usize,
    pub m00: f64,
    pub m10: f64,
    pub m01: f64,
    pub mu20: f64,
    pub mu02: f64,
    pub mu11: f64,
    pub centroid: PixelCoord,
    pub bbox: BoundingBox,
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let grand = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = grand;
            i = grand;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi as usize] = lo;
        lo
    }
}

#[derive(Default, Clone)]
struct MomentSums {
    n: usize,
    m10: f64,
    m01: f64,
    m20: f64,
    m02: f64,
    m11: f64,
    min_x: usize,
    min_y: usize,
    max_x: usize,
    max_y: usize,
}

/// 8-connected components of `mask`, largest first.
///
/// Equal-sized blobs are ordered by the top-left corner of their bounding box
/// (row first), so the output is fully deterministic.
pub fn connected_components(mask: &ColorMask) -> Vec<Blob> {
    const NONE: u32 = u32::MAX;
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![NONE; w * h];
    let mut sets = DisjointSet { parent: Vec::new() };

    // first pass: provisional labels from the already-visited neighbours
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut label = NONE;
            let mut neighbours = [NONE; 4];
            if x > 0 {
                neighbours[0] = labels[y * w + x - 1];
            }
            if y > 0 {
                let up = (y - 1) * w;
                if x > 0 {
                    neighbours[1] = labels[up + x - 1];
                }
                neighbours[2] = labels[up + x];
                if x + 1 < w {
                    neighbours[3] = labels[up + x + 1];
                }
            }
            for n in neighbours.into_iter().filter(|&n| n != NONE) {
                label = if label == NONE { n } else { sets.union(label, n) };
            }
            if label == NONE {
                label = sets.parent.len() as u32;
                sets.parent.push(label);
            }
            labels[y * w + x] = label;
        }
    }

    // second pass: accumulate raw moments per root
    let mut sums: Vec<Option<MomentSums>> = vec![None; sets.parent.len()];
    for y in 0..h {
        for x in 0..w {
            let label = labels[y * w + x];
            if label == NONE {
                continue;
            }
            let root = sets.find(label) as usize;
            let s = sums[root].get_or_insert_with(|| MomentSums {
                min_x: x,
                min_y: y,
                max_x: x,
                max_y: y,
                ..Default::default()
            });
            let (xf, yf) = (x as f64, y as f64);
            s.n += 1;
            s.m10 += xf;
            s.m01 += yf;
            s.m20 += xf * xf;
            s.m02 += yf * yf;
            s.m11 += xf * yf;
            s.min_x = s.min_x.min(x);
            s.max_x = s.max_x.max(x);
            s.max_y = y;
        }
    }

    let mut blobs: Vec<Blob> = sums
        .into_iter()
        .flatten()
        .map(|s| {
            let m00 = s.n as f64;
            let (cx, cy) = (s.m10 / m00, s.m01 / m00);
            Blob {
                pixel_count: s.n,
                m00,
                m10: s.m10,
                m01: s.m01,
                mu20: (s.m20 - cx * s.m10).max(0.0),
                mu02: (s.m02 - cy * s.m01).max(0.0),
                mu11: s.m11 - cx * s.m01,
                centroid: PixelCoord::new(cx, cy),
                bbox: BoundingBox {
                    min_x: s.min_x,
                    min_y: s.min_y,
                    max_x: s.max_x,
                    max_y: s.max_y,
                },
            }
        })
        .collect();
    blobs.sort_by(|a, b| {
        b.pixel_count
            .cmp(&a.pixel_count)
            .then((a.bbox.min_y, a.bbox.min_x).cmp(&(b.bbox.min_y, b.bbox.min_x)))
    });
    blobs
}

pub const DEFAULT_MIN_BLOB_PX: usize = 20;

fn default_min_blob_px() -> usize {
    DEFAULT_MIN_BLOB_PX
}

fn default_red() -> HsvRange {
    HsvRange::RED
}

fn default_blue() -> HsvRange {
    HsvRange::BLUE
}

/// Everything `detect_rings` needs besides the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default = "default_red")]
    pub red: HsvRange,
    #[serde(default = "default_blue")]
    pub blue: HsvRange,
    #[serde(default = "default_min_blob_px")]
    pub min_blob_px: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            red: HsvRange::RED,
            blue: HsvRange::BLUE,
            min_blob_px: DEFAULT_MIN_BLOB_PX,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.red.validate()?;
        self.blue.validate()
    }
}

/// The two ring regions found in one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingDetection {
    pub red_blob: Blob,
    pub blue_blob: Blob,
    pub red_centroid: PixelCoord,
    pub blue_centroid: PixelCoord,
    /// Euclidean distance between the centroids, in pixels.
    pub separation_px: f64,
    pub midpoint: PixelCoord,
    pub image_width: usize,
    pub image_height: usize,
}

impl RingDetection {
    /// Build a detection from two blobs, enforcing the landmark's geometry.
    pub fn from_blobs(
        red_blob: Blob,
        blue_blob: Blob,
        image_width: usize,
        image_height: usize,
    ) -> Result<Self> {
        let red_centroid = red_blob.centroid;
        let blue_centroid = blue_blob.centroid;
        let separation_px = red_centroid.distance(&blue_centroid);
        if separation_px < 1.0 {
            return Err(Error::DegenerateDetection { separation_px });
        }
        if red_centroid.y >= blue_centroid.y {
            return Err(Error::GeometryInverted {
                red_y: red_centroid.y,
                blue_y: blue_centroid.y,
            });
        }
        Ok(Self {
            midpoint: red_centroid.midpoint(&blue_centroid),
            red_blob,
            blue_blob,
            red_centroid,
            blue_centroid,
            separation_px,
            image_width,
            image_height,
        })
    }

    /// Signed horizontal offset of the landmark from the image's vertical
    /// centre line, positive to the right.
    pub fn horizontal_offset_px(&self) -> f64 {
        self.midpoint.x - (self.image_width as f64 - 1.0) / 2.0
    }
}

fn largest_blob(hsv: &ImageHsv, range: &HsvRange, min_px: usize) -> Option<Blob> {
    connected_components(&threshold_hsv(hsv, range))
        .into_iter()
        .next()
        .filter(|b| b.pixel_count >= min_px)
}

/// Filter, convert, threshold both colours and pair up the largest blobs.
pub fn detect_rings(img: &ImageRgb, cfg: &SegmentationConfig) -> Result<RingDetection> {
    cfg.validate()?;
    let filtered = cfg.filter.apply(img)?;
    let hsv = rgb_to_hsv(&filtered);
    let red = largest_blob(&hsv, &cfg.red, cfg.min_blob_px).ok_or(Error::NoRedRegion)?;
    let blue = largest_blob(&hsv, &cfg.blue, cfg.min_blob_px).ok_or(Error::NoBlueRegion)?;
    RingDetection::from_blobs(red, blue, img.width(), img.height())
}

//! Noise suppression applied before colour segmentation.
//!
//! All three filters replicate the border pixel for neighbourhoods that fall
//! off the image, keep the input dimensions and work on each RGB channel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageRgb;

/// Median window size the pipeline uses unless configured otherwise.
pub const DEFAULT_MEDIAN_WINDOW: usize = 15;
/// Range sigma for the bilateral filter when none is given.
pub const DEFAULT_SIGMA_COLOR: f64 = 25.0;

/// Which filter to run and with what parameters.
///
/// Missing sigmas default to `window / 6` (spatial) and 25 (colour).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FilterSpec {
    Median {
        window: usize,
    },
    Gaussian {
        window: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_space: Option<f64>,
    },
    Bilateral {
        window: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_space: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_color: Option<f64>,
    },
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec::Median {
            window: DEFAULT_MEDIAN_WINDOW,
        }
    }
}

impl FilterSpec {
    pub fn window(&self) -> usize {
        match *self {
            FilterSpec::Median { window }
            | FilterSpec::Gaussian { window, .. }
            | FilterSpec::Bilateral { window, .. } => window,
        }
    }

    fn sigma_space(&self) -> f64 {
        match *self {
            FilterSpec::Gaussian { window, sigma_space }
            | FilterSpec::Bilateral {
                window,
                sigma_space,
                ..
            } => sigma_space.unwrap_or(window as f64 / 6.0),
            FilterSpec::Median { .. } => f64::NAN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_window(self.window())?;
        match *self {
            FilterSpec::Median { .. } => Ok(()),
            FilterSpec::Gaussian { .. } => check_sigma("sigma_space", self.sigma_space()),
            FilterSpec::Bilateral { sigma_color, .. } => {
                check_sigma("sigma_space", self.sigma_space())?;
                check_sigma("sigma_color", sigma_color.unwrap_or(DEFAULT_SIGMA_COLOR))
            }
        }
    }

    pub fn apply(&self, img: &ImageRgb) -> Result<ImageRgb> {
        match *self {
            FilterSpec::Median { window } => median_filter(img, window),
            FilterSpec::Gaussian { window, .. } => {
                gaussian_filter(img, window, self.sigma_space())
            }
            FilterSpec::Bilateral {
                window,
                sigma_color,
                ..
            } => bilateral_filter(
                img,
                window,
                self.sigma_space(),
                sigma_color.unwrap_or(DEFAULT_SIGMA_COLOR),
            ),
        }
    }
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Parameter(format!(
            "filter window must be odd and positive, got {window}"
        )));
    }
    Ok(())
}

fn check_sigma(name: &str, sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Parameter(format!(
            "{name} must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Split an interleaved raster into three planes.
fn planes(img: &ImageRgb) -> [Vec<u8>; 3] {
    let n = img.width() * img.height();
    let mut out = [vec![0; n], vec![0; n], vec![0; n]];
    for (i, px) in img.data().chunks_exact(3).enumerate() {
        out[0][i] = px[0];
        out[1][i] = px[1];
        out[2][i] = px[2];
    }
    out
}

/// Byte histogram that keeps track of the value at a fixed rank as samples
/// come and go. Neighbouring windows overlap heavily, so the tracked value
/// usually moves only a few bins per update.
struct RankTracker {
    counts: [u32; 256],
    rank: u32,
    value: usize,
    /// Number of samples strictly below `value`.
    below: u32,
}

impl RankTracker {
    fn new(rank: u32) -> Self {
        Self {
            counts: [0; 256],
            rank,
            value: 0,
            below: 0,
        }
    }

    #[inline]
    fn add(&mut self, v: u8) {
        self.counts[usize::from(v)] += 1;
        self.below += u32::from(usize::from(v) < self.value);
    }

    #[inline]
    fn remove(&mut self, v: u8) {
        self.counts[usize::from(v)] -= 1;
        self.below -= u32::from(usize::from(v) < self.value);
    }

    /// Value with zero-based rank `rank` among the current samples.
    #[inline]
    fn get(&mut self) -> u8 {
        while self.below > self.rank {
            self.value -= 1;
            self.below -= self.counts[self.value];
        }
        while self.below + self.counts[self.value] <= self.rank {
            self.below += self.counts[self.value];
            self.value += 1;
        }
        self.value as u8
    }
}

/// Per-channel median over a `window x window` neighbourhood.
///
/// Uses a sliding histogram along each row, so the cost per pixel is linear in
/// the window size rather than quadratic.
pub fn median_filter(img: &ImageRgb, window: usize) -> Result<ImageRgb> {
    check_window(window)?;
    if window == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let r = (window / 2) as isize;
    let rank = (window * window / 2) as u32;
    let planes = planes(img);

    let mut out = vec![0u8; w * h * 3];
    out.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        let rows: Vec<usize> = (-r..=r).map(|dy| clamp_index(y as isize + dy, h)).collect();
        for (c, plane) in planes.iter().enumerate() {
            let lines: Vec<&[u8]> = rows.iter().map(|&yy| &plane[yy * w..(yy + 1) * w]).collect();
            let mut hist = RankTracker::new(rank);
            for line in &lines {
                for dx in -r..=r {
                    hist.add(line[clamp_index(dx, w)]);
                }
            }
            row[c] = hist.get();
            for x in 1..w {
                let leaving = clamp_index(x as isize - r - 1, w);
                let entering = clamp_index(x as isize + r, w);
                if leaving != entering {
                    for line in &lines {
                        let (old, new) = (line[leaving], line[entering]);
                        if old != new {
                            hist.remove(old);
                            hist.add(new);
                        }
                    }
                }
                row[x * 3 + c] = hist.get();
            }
        }
    });
    ImageRgb::new(w, h, out)
}

/// Normalised 1-D Gaussian weights for offsets `-r..=r`.
pub fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let r = (window / 2) as isize;
    let weights: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = weights.iter().sum();
    weights.into_iter().map(|k| k / sum).collect()
}

#[inline]
fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Separable Gaussian blur; the output is rounded to the nearest byte.
pub fn gaussian_filter(img: &ImageRgb, window: usize, sigma_space: f64) -> Result<ImageRgb> {
    check_window(window)?;
    check_sigma("sigma_space", sigma_space)?;
    let (w, h) = (img.width(), img.height());
    let kernel = gaussian_kernel(window, sigma_space);
    let r = (window / 2) as isize;
    let src = img.data();

    let mut horizontal = vec![0f64; w * h * 3];
    horizontal
        .par_chunks_mut(w * 3)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                for c in 0..3 {
                    row[x * 3 + c] = kernel
                        .iter()
                        .zip(-r..=r)
                        .map(|(k, dx)| {
                            k * f64::from(src[(y * w + clamp_index(x as isize + dx, w)) * 3 + c])
                        })
                        .sum();
                }
            }
        });

    let mut out = vec![0u8; w * h * 3];
    out.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            for c in 0..3 {
                let v: f64 = kernel
                    .iter()
                    .zip(-r..=r)
                    .map(|(k, dy)| k * horizontal[(clamp_index(y as isize + dy, h) * w + x) * 3 + c])
                    .sum();
                row[x * 3 + c] = to_byte(v);
            }
        }
    });
    ImageRgb::new(w, h, out)
}

/// Edge-preserving smoothing: each neighbour is weighted by its spatial
/// distance and by its Euclidean RGB distance to the centre pixel.
pub fn bilateral_filter(
    img: &ImageRgb,
    window: usize,
    sigma_space: f64,
    sigma_color: f64,
) -> Result<ImageRgb> {
    check_window(window)?;
    check_sigma("sigma_space", sigma_space)?;
    check_sigma("sigma_color", sigma_color)?;
    let (w, h) = (img.width(), img.height());
    let r = (window / 2) as isize;
    let spatial: Vec<f64> = (-r..=r)
        .flat_map(|dy| {
            (-r..=r).map(move |dx| {
                (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_space * sigma_space)).exp()
            })
        })
        .collect();
    let color_scale = -1.0 / (2.0 * sigma_color * sigma_color);

    let mut out = vec![0u8; w * h * 3];
    out.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let centre = img.pixel(x, y);
            let mut acc = [0f64; 3];
            let mut norm = 0f64;
            let mut k = 0;
            for dy in -r..=r {
                let yy = clamp_index(y as isize + dy, h);
                for dx in -r..=r {
                    let p = img.pixel(clamp_index(x as isize + dx, w), yy);
                    let dist2: f64 = (0..3)
                        .map(|c| {
                            let d = f64::from(p[c]) - f64::from(centre[c]);
                            d * d
                        })
                        .sum();
                    let weight = spatial[k] * (dist2 * color_scale).exp();
                    k += 1;
                    norm += weight;
                    for c in 0..3 {
                        acc[c] += weight * f64::from(p[c]);
                    }
                }
            }
            for c in 0..3 {
                row[x * 3 + c] = to_byte(acc[c] / norm);
            }
        }
    });
    ImageRgb::new(w, h, out)
}

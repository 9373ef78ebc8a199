//! Pixel containers, PPM/PNG ingestion and RGB to HSV conversion.
//!
//! Binary PPM (`P6`, maxval 255) is the canonical on-disk format: it is read
//! and written bit-exactly. 8-bit RGB and RGBA PNG files are accepted on input
//! only, with alpha dropped.

use std::fs;
use std::io::{BufReader, Cursor};
use std::path::Path;

use crate::error::{Error, Result};

/// Largest accepted width or height. Anything bigger is treated as a corrupt header.
pub const MAX_DIMENSION: usize = 16_384;

/// An 8-bit RGB triple.
pub type Rgb = [u8; 3];

/// Sub-pixel image location. Origin at the top-left pixel centre, `x` to the
/// right, `y` downwards.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PixelCoord) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &PixelCoord) -> PixelCoord {
        PixelCoord::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

fn check_dimensions(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Parameter(format!(
            "image dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    if width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(Error::Parameter(format!(
            "image dimensions {width}x{height} exceed {MAX_DIMENSION}"
        )));
    }
    Ok(())
}

/// Row-major interleaved 8-bit RGB raster.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageRgb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageRgb")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dimensions(width, height)?;
        let expected = width * height * 3;
        if data.len() != expected {
            return Err(Error::Parameter(format!(
                "raster holds {} bytes, {width}x{height} RGB needs {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// An image where every pixel has the same colour.
    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self> {
        check_dimensions(width, height)?;
        let data = color
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, color: Rgb) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&color);
    }

    pub fn pixels(&self) -> impl Iterator<Item = Rgb> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Fill the axis-aligned rectangle `[x0, x1) x [y0, y1)`, clipped to the image.
    pub fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, color: Rgb) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.set_pixel(x, y, color);
            }
        }
    }
}

/// One HSV sample: hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Row-major HSV raster with the dimensions of the RGB image it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageHsv {
    width: usize,
    height: usize,
    data: Vec<Hsv>,
}

impl ImageHsv {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[Hsv] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> Hsv {
        self.data[y * self.width + x]
    }

    /// Build from raw samples. Values outside the HSV ranges are rejected.
    pub fn from_samples(width: usize, height: usize, data: Vec<Hsv>) -> Result<Self> {
        check_dimensions(width, height)?;
        if data.len() != width * height {
            return Err(Error::Parameter(format!(
                "{} HSV samples for a {width}x{height} raster",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|p| {
            !(0.0..360.0).contains(&p.h) || !(0.0..=1.0).contains(&p.s) || !(0.0..=1.0).contains(&p.v)
        }) {
            return Err(Error::Parameter(format!("HSV sample out of range: {bad:?}")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

/// Hexcone conversion of one pixel. Achromatic pixels get hue 0.
pub fn rgb_pixel_to_hsv([r, g, b]: Rgb) -> Hsv {
    let (r, g, b) = (i32::from(r), i32::from(g), i32::from(b));
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = f64::from(max) / 255.0;
    if delta == 0 {
        return Hsv { h: 0.0, s: 0.0, v };
    }
    let s = f64::from(delta) / f64::from(max);
    let delta = f64::from(delta);
    let h = if max == r {
        let h = 60.0 * f64::from(g - b) / delta;
        if h < 0.0 {
            h + 360.0
        } else {
            h
        }
    } else if max == g {
        60.0 * f64::from(b - r) / delta + 120.0
    } else {
        60.0 * f64::from(r - g) / delta + 240.0
    };
    Hsv { h, s, v }
}

pub fn rgb_to_hsv(img: &ImageRgb) -> ImageHsv {
    ImageHsv {
        width: img.width,
        height: img.height,
        data: img.pixels().map(rgb_pixel_to_hsv).collect(),
    }
}

/// Read a P6 PPM or an 8-bit RGB/RGBA PNG. The format is sniffed from the
/// leading bytes, not the extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Decode an in-memory PPM or PNG file.
pub fn decode_image(bytes: &[u8]) -> Result<ImageRgb> {
    const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else {
        decode_ppm(bytes)
    }
}

/// Write `img` as binary PPM with a `P6\n<w> <h>\n255\n` header.
pub fn save_image(img: &ImageRgb, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}

pub fn encode_ppm(img: &ImageRgb) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.data);
    out
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else if c == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, field: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(field, "expected a decimal number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(field, "number out of range"))
    }
}

fn decode_ppm(bytes: &[u8]) -> Result<ImageRgb> {
    if !bytes.starts_with(b"P6") {
        return Err(Error::format(
            "magic",
            "expected binary PPM (P6) or PNG signature",
        ));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format("magic", "P6 must be followed by whitespace"));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        let field = if width == 0 || width > MAX_DIMENSION {
            "width"
        } else {
            "height"
        };
        return Err(Error::format(
            field,
            format!("{width}x{height} outside 1..={MAX_DIMENSION}"),
        ));
    }
    if maxval != 255 {
        return Err(Error::format(
            "maxval",
            format!("only maxval 255 is supported, got {maxval}"),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::format("maxval", "missing whitespace after maxval")),
    }
    let need = width * height * 3;
    let raster = &bytes[cur.pos..];
    if raster.len() < need {
        return Err(Error::format(
            "raster",
            format!("expected {need} bytes, found {}", raster.len()),
        ));
    }
    ImageRgb::new(width, height, raster[..need].to_vec())
}

fn decode_png(bytes: &[u8]) -> Result<ImageRgb> {
    let png_err = |e: png::DecodingError| Error::format("png", e.to_string());
    let decoder = png::Decoder::new(BufReader::new(Cursor::new(bytes)));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let (color_type, bit_depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if bit_depth != png::BitDepth::Eight {
        return Err(Error::format(
            "bit_depth",
            format!("only 8-bit PNG is supported, got {bit_depth:?}"),
        ));
    }
    let channels = match color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => {
            return Err(Error::format(
                "color_type",
                format!("only RGB/RGBA PNG is supported, got {other:?}"),
            ))
        }
    };
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format("png", "image too large"))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    check_dimensions(width, height).map_err(|e| Error::format("dimensions", e.to_string()))?;
    let mut data = Vec::with_capacity(width * height * 3);
    for row in buf[..frame.buffer_size()].chunks_exact(frame.line_size) {
        for px in row[..width * channels].chunks_exact(channels) {
            data.extend_from_slice(&px[..3]);
        }
    }
    ImageRgb::new(width, height, data)
}

//! Illumination-profile analytics: rendered intensity images, thresholded
//! illuminated masks, intersection-over-union overlap and cross-sections.
//!
//! Images are read from 16-bit binary PGM (`P5`, big-endian samples) or
//! whitespace-delimited text matrices. Masks are written as `P5` PGMs with
//! samples 0 / 65535.

use std::io::{BufRead, Read, Write};

use serde::Serialize;

use crate::beam::AstigmaticBeam;
use crate::error::{domain, Error, Result};

/// Fraction of each dimension used as the noise-estimation border.
pub const BORDER_FRACTION: f64 = 0.10;
pub const MIN_BORDER_PIXELS: usize = 16;
pub const DEFAULT_K: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    width: usize,
    height: usize,
    pixel_pitch: f64,
    values: Vec<f64>,
}

impl IntensityImage {
    /// `values` are row-major, `height` rows of `width` pixels.
    pub fn new(width: usize, height: usize, pixel_pitch: f64, values: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return domain(format!("image must be at least 2x2, got {width}x{height}"));
        }
        if values.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        if !(pixel_pitch > 0.0 && pixel_pitch.is_finite()) {
            return domain(format!("pixel pitch must be positive, got {pixel_pitch}"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return domain(format!("image values must be finite and non-negative, found {v}"));
        }
        Ok(Self {
            width,
            height,
            pixel_pitch,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Pixel-wise sum of two images of equal shape.
    pub fn add(&self, other: &IntensityImage) -> Result<IntensityImage> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::ShapeMismatch("cannot add images of different shape".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        IntensityImage::new(self.width, self.height, self.pixel_pitch, values)
    }

    /// Applies `f` to every pixel value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<IntensityImage> {
        IntensityImage::new(
            self.width,
            self.height,
            self.pixel_pitch,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Reads a whitespace-delimited matrix, one image row per line.
    pub fn read_text<R: BufRead>(reader: R, pixel_pitch: f64) -> Result<Self> {
        let mut values = Vec::new();
        let mut width = None;
        let mut height = 0;
        for line in reader.lines() {
            let line = line?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|tok| tok.parse::<f64>().map_err(|e| Error::Parse(format!("{tok:?}: {e}"))))
                .collect::<Result<_>>()?;
            if row.is_empty() {
                continue;
            }
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Parse(format!(
                        "row {height} has {} values, expected {w}",
                        row.len()
                    )))
                }
                _ => {}
            }
            values.extend(row);
            height += 1;
        }
        IntensityImage::new(width.unwrap_or(0), height, pixel_pitch, values)
    }

    /// Reads a binary PGM (`P5`). 16-bit samples are big-endian; 8-bit files
    /// (maxval < 256) are also accepted.
    pub fn read_pgm<R: Read>(mut reader: R, pixel_pitch: f64) -> Result<Self> {
        let mut data = Vec::new();
        reader.read_to_end(&mut data)?;
        let (header, offset) = parse_pgm_header(&data)?;
        let samples = header.width * header.height;
        let bytes_per = if header.maxval < 256 { 1 } else { 2 };
        let body = &data[offset..];
        if body.len() < samples * bytes_per {
            return Err(Error::Parse(format!(
                "PGM body has {} bytes, need {}",
                body.len(),
                samples * bytes_per
            )));
        }
        let values = if bytes_per == 1 {
            body[..samples].iter().map(|&b| b as f64).collect()
        } else {
            body[..2 * samples]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                .collect()
        };
        IntensityImage::new(header.width, header.height, pixel_pitch, values)
    }

    /// Writes the image as a 16-bit PGM, scaled so the maximum maps to 65535.
    pub fn write_pgm<W: Write>(&self, writer: W) -> Result<()> {
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
        let samples: Vec<u16> = self.values.iter().map(|v| (v * scale).round() as u16).collect();
        write_pgm16(writer, self.width, self.height, &samples)
    }
}

struct PgmHeader {
    width: usize,
    height: usize,
    maxval: usize,
}

fn parse_pgm_header(data: &[u8]) -> Result<(PgmHeader, usize)> {
    let mut fields = Vec::with_capacity(4);
    let mut i = 0;
    while fields.len() < 4 {
        // Skip whitespace and comments.
        while i < data.len() && (data[i].is_ascii_whitespace() || data[i] == b'#') {
            if data[i] == b'#' {
                while i < data.len() && data[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < data.len() && !data[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&data[start..i]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(Error::Parse(format!("expected P5 magic, found {:?}", fields[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| Error::Parse(format!("PGM header {s:?}: {e}")))
    };
    let header = PgmHeader {
        width: num(&fields[1])?,
        height: num(&fields[2])?,
        maxval: num(&fields[3])?,
    };
    if header.maxval == 0 || header.maxval > 65535 {
        return Err(Error::Parse(format!("PGM maxval {} out of range", header.maxval)));
    }
    // Exactly one whitespace byte separates the header from the raster.
    Ok((header, i + 1))
}

fn write_pgm16<W: Write>(mut writer: W, width: usize, height: usize, samples: &[u16]) -> Result<()> {
    write!(writer, "P5\n{width} {height}\n65535\n")?;
    let mut body = Vec::with_capacity(samples.len() * 2);
    for s in samples {
        body.extend_from_slice(&s.to_be_bytes());
    }
    writer.write_all(&body)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
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

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn write_pgm<W: Write>(&self, writer: W) -> Result<()> {
        let samples: Vec<u16> = self.bits.iter().map(|&b| if b { u16::MAX } else { 0 }).collect();
        write_pgm16(writer, self.width, self.height, &samples)
    }
}

/// Samples the beam's irradiance at pixel centers on a grid centered on the
/// beam axis.
pub fn render_intensity(
    beam: &AstigmaticBeam,
    width: usize,
    height: usize,
    pixel_pitch: f64,
) -> Result<IntensityImage> {
    let profile = beam.intensity_profile();
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let mut values = Vec::with_capacity(width * height);
    for row in 0..height {
        let y = (row as f64 - cy) * pixel_pitch;
        for col in 0..width {
            let x = (col as f64 - cx) * pixel_pitch;
            values.push(profile.at(x, y));
        }
    }
    IntensityImage::new(width, height, pixel_pitch, values)
}

/// Mean and population standard deviation of the outer border frame
/// (the outer 10% of each dimension, at least one pixel wide).
pub fn border_noise(img: &IntensityImage) -> Result<(f64, f64)> {
    let bx = ((img.width as f64 * BORDER_FRACTION).ceil() as usize).max(1);
    let by = ((img.height as f64 * BORDER_FRACTION).ceil() as usize).max(1);
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for row in 0..img.height {
        for col in 0..img.width {
            let border = row < by || row >= img.height - by || col < bx || col >= img.width - bx;
            if border {
                let v = img.get(row, col);
                n += 1;
                sum += v;
                sum_sq += v * v;
            }
        }
    }
    if n < MIN_BORDER_PIXELS {
        return Err(Error::Estimation(format!(
            "border frame holds {n} pixels, need at least {MIN_BORDER_PIXELS}"
        )));
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::Estimation(
            "border frame is constant; supply noise statistics".into(),
        ));
    }
    Ok((mean, sd))
}

/// Pixels strictly above `noise_mean + k·noise_sd`. Missing statistics are
/// estimated from the image border.
pub fn illuminated_mask(
    img: &IntensityImage,
    noise_mean: Option<f64>,
    noise_sd: Option<f64>,
    k: f64,
) -> Result<BinaryMask> {
    let (mean, sd) = match (noise_mean, noise_sd) {
        (Some(m), Some(s)) => (m, s),
        (m, s) => {
            let (em, es) = border_noise(img)?;
            (m.unwrap_or(em), s.unwrap_or(es))
        }
    };
    if !(sd >= 0.0 && mean.is_finite() && k.is_finite()) {
        return domain(format!("invalid noise statistics (mean {mean}, sd {sd}, k {k})"));
    }
    let threshold = mean + k * sd;
    let bits = img.values.iter().map(|&v| v > threshold).collect();
    BinaryMask::new(img.width, img.height, bits)
}

/// Intersection over union; 0 when both masks are empty.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionAxis {
    /// A row, at the given row index.
    Horizontal,
    /// A column, at the given column index.
    Vertical,
}

pub fn cross_section(img: &IntensityImage, axis: SectionAxis, position: usize) -> Result<Vec<f64>> {
    match axis {
        SectionAxis::Horizontal => {
            if position >= img.height {
                return domain(format!("row {position} outside image of height {}", img.height));
            }
            Ok(img.values[position * img.width..(position + 1) * img.width].to_vec())
        }
        SectionAxis::Vertical => {
            if position >= img.width {
                return domain(format!("column {position} outside image of width {}", img.width));
            }
            Ok((0..img.height).map(|row| img.get(row, position)).collect())
        }
    }
}

/// Writes one section as CSV with header `index,position_m,value`.
pub fn write_section_csv<W: Write>(mut writer: W, section: &[f64], pixel_pitch: f64) -> Result<()> {
    writeln!(writer, "index,position_m,value")?;
    let center = (section.len() as f64 - 1.0) / 2.0;
    for (i, v) in section.iter().enumerate() {
        writeln!(writer, "{i},{},{v}", (i as f64 - center) * pixel_pitch)?;
    }
    Ok(())
}

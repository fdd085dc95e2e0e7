//! Greyscale rendering of signal fields.
//!
//! Intensities map affinely from a dBm window onto 0..=255: brighter means
//! stronger signal. The window is either the min/max of the considered
//! pixels or a percentile clip for contrast on outlier-heavy data. When a
//! mask is supplied, unknown pixels render black; black is reserved for
//! missing data, which is why a degenerate (constant) window renders white.
//!
//! Image row 0 is the zenith: memory rows are flipped vertically on output so
//! the horizon sits at the bottom of the picture.

use std::io::Write;

use thiserror::Error;

use crate::field::{InpaintingMask, SignalField};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("no pixels to render: the considered set is empty")]
    EmptyConsideredSet,
    #[error("considered pixel {index} holds the non-finite value {value}")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("percentile bounds must satisfy 0 <= lo < hi <= 100, got {lo}..{hi}")]
    BadPercentiles { lo: f64, hi: f64 },
    #[error("i/o error writing image: {0}")]
    Io(#[from] std::io::Error),
    #[error("png encoding failed: {0}")]
    Png(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreyscaleMode {
    MinMax,
    Percentile,
}

/// Intensity-window selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreyscaleParams {
    pub mode: GreyscaleMode,
    /// Used in percentile mode only.
    pub lo_percentile: f64,
    pub hi_percentile: f64,
}

impl Default for GreyscaleParams {
    fn default() -> Self {
        Self {
            mode: GreyscaleMode::MinMax,
            lo_percentile: 1.0,
            hi_percentile: 99.0,
        }
    }
}

impl GreyscaleParams {
    fn validate(&self) -> Result<(), RenderError> {
        if !(0.0..=100.0).contains(&self.lo_percentile)
            || !(0.0..=100.0).contains(&self.hi_percentile)
            || self.lo_percentile >= self.hi_percentile
        {
            return Err(RenderError::BadPercentiles {
                lo: self.lo_percentile,
                hi: self.hi_percentile,
            });
        }
        Ok(())
    }
}

/// 8-bit greyscale raster, row-major from the top image row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreyImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GreyImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer size mismatch");
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

/// Interpolated percentile of already-sorted values.
fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Renders `field` to greyscale. With a mask, only known pixels are
/// considered for the window and unknown pixels come out black.
pub fn to_greyscale(
    field: &SignalField,
    mask: Option<&InpaintingMask>,
    params: &GreyscaleParams,
) -> Result<GreyImage, RenderError> {
    params.validate()?;
    if let Some(m) = mask {
        assert_eq!(m.grid(), field.grid(), "mask grid does not match field grid");
    }
    let considered = |i: usize| mask.map_or(true, |m| m.flags()[i]);

    let mut window: Vec<f64> = Vec::new();
    for (i, &v) in field.values().iter().enumerate() {
        if considered(i) {
            if !v.is_finite() {
                return Err(RenderError::NonFiniteValue { index: i, value: v });
            }
            window.push(v);
        }
    }
    if window.is_empty() {
        return Err(RenderError::EmptyConsideredSet);
    }

    let (lo, hi) = match params.mode {
        GreyscaleMode::MinMax => window
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v))),
        GreyscaleMode::Percentile => {
            window.sort_unstable_by(f64::total_cmp);
            (
                percentile_sorted(&window, params.lo_percentile),
                percentile_sorted(&window, params.hi_percentile),
            )
        }
    };

    let w = field.grid().width();
    let h = field.grid().height();
    let values = field.values();
    let span = hi - lo;
    let mut pixels = vec![0u8; w * h];
    for img_row in 0..h {
        let mem_row = h - 1 - img_row;
        for col in 0..w {
            let i = mem_row * w + col;
            pixels[img_row * w + col] = if !considered(i) {
                0
            } else if span == 0.0 {
                // Constant window: white, so it cannot be mistaken for the
                // missing-data color.
                255
            } else {
                let t = ((values[i] - lo) / span).clamp(0.0, 1.0);
                (255.0 * t).round() as u8
            };
        }
    }
    Ok(GreyImage::new(w, h, pixels))
}

/// Writes binary PGM (`P5`), returning the byte count. Bit-exact: the same
/// image always produces the same bytes.
pub fn write_pgm<W: Write>(image: &GreyImage, sink: &mut W) -> std::io::Result<usize> {
    let header = format!("P5\n{} {}\n255\n", image.width(), image.height());
    sink.write_all(header.as_bytes())?;
    sink.write_all(image.pixels())?;
    Ok(header.len() + image.pixels().len())
}

struct CountingWriter<W> {
    inner: W,
    written: usize,
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Writes an 8-bit greyscale PNG (no alpha, no interlacing), returning the
/// byte count.
pub fn write_png<W: Write>(image: &GreyImage, sink: W) -> Result<usize, RenderError> {
    let mut counting = CountingWriter {
        inner: sink,
        written: 0,
    };
    {
        let mut encoder = png::Encoder::new(&mut counting, image.width() as u32, image.height() as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| RenderError::Png(e.to_string()))?;
        writer
            .write_image_data(image.pixels())
            .map_err(|e| RenderError::Png(e.to_string()))?;
    }
    counting.flush()?;
    Ok(counting.written)
}

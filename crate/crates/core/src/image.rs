//! Raster types shared by every stage: grayscale images, regions of
//! interest and multispectral cubes.
//!
//! Pixels are stored as `f64` in row-major order. Values loaded from disk
//! live in `[0, 1]`; log-domain intermediates (see [`crate::retinex`]) may
//! leave that range but stay finite.

use crate::error::{Error, Result};

/// Row-major grayscale raster with real-valued intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage { width, height });
        }
        if data.len() != width * height {
            return Err(Error::BufferSize {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image filled with `value`.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be non-zero");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be non-zero");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Applies `f` to every pixel, keeping the dimensions.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `(min, max)` over all pixels.
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Roi {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn new(x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self {
            x0,
            y0,
            width,
            height,
        }
    }

    /// A `width` x `height` region centred in an image of the given size.
    /// Returns `None` if it does not fit.
    pub fn centered(
        image_width: usize,
        image_height: usize,
        width: usize,
        height: usize,
    ) -> Option<Self> {
        if width > image_width || height > image_height {
            return None;
        }
        Some(Self::new(
            (image_width - width) / 2,
            (image_height - height) / 2,
            width,
            height,
        ))
    }

    /// Translates a ROI expressed relative to this one into the parent frame.
    pub fn compose(&self, inner: Roi) -> Roi {
        Roi::new(
            self.x0 + inner.x0,
            self.y0 + inner.y0,
            inner.width,
            inner.height,
        )
    }

    fn check(&self, width: usize, height: usize) -> Result<()> {
        let fits = self.width > 0
            && self.height > 0
            && self.x0.checked_add(self.width).is_some_and(|r| r <= width)
            && self
                .y0
                .checked_add(self.height)
                .is_some_and(|b| b <= height);
        if fits {
            Ok(())
        } else {
            Err(Error::RoiOutOfBounds {
                x0: self.x0,
                y0: self.y0,
                width: self.width,
                height: self.height,
                image_width: width,
                image_height: height,
            })
        }
    }
}

impl std::fmt::Display for Roi {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.x0, self.y0, self.width, self.height)
    }
}

impl std::str::FromStr for Roi {
    type Err = Error;

    /// Parses `x,y,w,h`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[x0, y0, w, h]) => Ok(Roi::new(x0, y0, w, h)),
            _ => Err(Error::param(format!("ROI must be `x,y,w,h`, got `{s}`"))),
        }
    }
}

/// Copies the pixels inside `roi`.
pub fn crop(img: &GrayImage, roi: Roi) -> Result<GrayImage> {
    roi.check(img.width, img.height)?;
    let mut data = Vec::with_capacity(roi.width * roi.height);
    for y in roi.y0..roi.y0 + roi.height {
        let start = y * img.width + roi.x0;
        data.extend_from_slice(&img.data[start..start + roi.width]);
    }
    GrayImage::new(roi.width, roi.height, data)
}

/// Min-max gray-value normalization: `(f - min) / (max - min)`.
///
/// A constant image has no range to stretch and maps to all zeros.
pub fn normalize_minmax(img: &GrayImage) -> GrayImage {
    let (lo, hi) = img.min_max();
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return img.map(|_| 0.0);
    }
    let range = hi - lo;
    img.map(|v| (v - lo) / range)
}

/// One band of a [`SpectralCube`].
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub wavelength_nm: f64,
    pub image: GrayImage,
}

/// Co-registered band images ordered by strictly increasing wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    bands: Vec<Band>,
}

impl SpectralCube {
    /// Sorts the bands by wavelength and validates them.
    pub fn new(mut bands: Vec<Band>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::param("a spectral cube needs at least one band"));
        }
        for band in &bands {
            if !band.wavelength_nm.is_finite() {
                return Err(Error::param(format!(
                    "band wavelength must be finite, got {}",
                    band.wavelength_nm
                )));
            }
        }
        bands.sort_by(|a, b| a.wavelength_nm.total_cmp(&b.wavelength_nm));
        if let Some(pair) = bands
            .windows(2)
            .find(|w| w[0].wavelength_nm == w[1].wavelength_nm)
        {
            return Err(Error::DuplicateWavelength(pair[0].wavelength_nm));
        }
        let expected = bands[0].image.dimensions();
        for band in &bands[1..] {
            if band.image.dimensions() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: band.image.dimensions(),
                });
            }
        }
        Ok(Self { bands })
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn dimensions(&self) -> (usize, usize) {
        self.bands[0].image.dimensions()
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.bands.iter().map(|b| b.wavelength_nm)
    }
}

/// Per-pixel mean of the bands whose wavelength lies in the closed window
/// `[center_nm - bandwidth_nm / 2, center_nm + bandwidth_nm / 2]`.
///
/// Bands are accumulated in ascending wavelength order with a running mean,
/// so averaging `k` identical bands returns that band bit-for-bit.
pub fn average_bands(cube: &SpectralCube, center_nm: f64, bandwidth_nm: f64) -> Result<GrayImage> {
    if !center_nm.is_finite() || !bandwidth_nm.is_finite() || bandwidth_nm < 0.0 {
        return Err(Error::param(format!(
            "band window must be finite with non-negative width, got center {center_nm} width {bandwidth_nm}"
        )));
    }
    let half = bandwidth_nm / 2.0;
    let (lo, hi) = (center_nm - half, center_nm + half);
    let selected: Vec<&GrayImage> = cube
        .bands
        .iter()
        .filter(|b| (b.wavelength_nm - center_nm).abs() <= half)
        .map(|b| &b.image)
        .collect();
    let Some((first, rest)) = selected.split_first() else {
        return Err(Error::EmptyBandSelection { lo, hi });
    };
    let mut mean = (*first).clone();
    for (i, band) in rest.iter().enumerate() {
        let n = (i + 2) as f64;
        for (m, &v) in mean.data.iter_mut().zip(&band.data) {
            *m += (v - *m) / n;
        }
    }
    Ok(mean)
}

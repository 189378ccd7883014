//! Contrast enhancement: global histogram equalization, median smoothing,
//! and the baseline methods the Retinex path is compared against (CLAHE,
//! difference-of-Gaussians + HE, Gaussian low-pass).
//!
//! Every histogram operation quantizes with the same rule,
//! `level = clamp(floor(v * 255 + 0.5), 0, 255)`.

use crate::error::{Error, Result};
use crate::image::{normalize_minmax, GrayImage};
use crate::retinex::{convolve_separable, GaussianKernel};

pub const LEVELS: usize = 256;

pub const DEFAULT_MEDIAN_WINDOW: usize = 3;
pub const DEFAULT_CLAHE_TILES: (usize, usize) = (8, 8);
pub const DEFAULT_CLAHE_CLIP: f64 = 2.0;
pub const DEFAULT_DOG_SIGMA: f64 = 1.0;
pub const DEFAULT_DOG_RATIO: f64 = 4.0;
pub const DEFAULT_GLPF_SIGMA: f64 = 2.0;

/// 8-bit level of a unit-range value.
#[inline]
pub fn quantize(v: f64) -> u8 {
    // NaN saturates to 0 through the float-to-int cast
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// 256-bin gray-level histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: [u64; LEVELS],
    total: u64,
}

impl Histogram {
    pub fn from_image(img: &GrayImage) -> Self {
        Self::from_levels(img.as_slice().iter().map(|&v| quantize(v)))
    }

    pub fn from_levels(levels: impl IntoIterator<Item = u8>) -> Self {
        let mut bins = [0u64; LEVELS];
        let mut total = 0;
        for l in levels {
            bins[l as usize] += 1;
            total += 1;
        }
        Self { bins, total }
    }

    /// Histogram from explicit bin counts.
    pub fn from_bins(bins: [u64; LEVELS]) -> Self {
        Self {
            bins,
            total: bins.iter().sum(),
        }
    }

    pub fn bins(&self) -> &[u64; LEVELS] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn cumulative(&self) -> [u64; LEVELS] {
        let mut cdf = [0u64; LEVELS];
        let mut acc = 0;
        for (c, &b) in cdf.iter_mut().zip(&self.bins) {
            acc += b;
            *c = acc;
        }
        cdf
    }

    /// Lowest occupied level, if any.
    pub fn min_level(&self) -> Option<u8> {
        self.bins.iter().position(|&b| b > 0).map(|l| l as u8)
    }

    /// Equalization lookup table: `(cdf(l) - cdf_min) / (total - cdf_min)`,
    /// or all zeros when every pixel sits in one bin.
    pub fn equalization_lut(&self) -> [f64; LEVELS] {
        let mut lut = [0.0; LEVELS];
        let Some(min_level) = self.min_level() else {
            return lut;
        };
        let cdf = self.cumulative();
        let cdf_min = cdf[min_level as usize];
        if self.total <= cdf_min {
            return lut;
        }
        let span = (self.total - cdf_min) as f64;
        for (out, &c) in lut.iter_mut().zip(&cdf) {
            *out = c.saturating_sub(cdf_min) as f64 / span;
        }
        lut
    }
}

/// Global histogram equalization.
pub fn histogram_equalize(img: &GrayImage) -> GrayImage {
    let lut = Histogram::from_image(img).equalization_lut();
    img.map(|v| lut[quantize(v) as usize])
}

/// Median over a `window x window` neighbourhood with edge replication.
pub fn median_filter(img: &GrayImage, window: usize) -> Result<GrayImage> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::param(format!(
            "median window must be odd and positive, got {window}"
        )));
    }
    let r = (window / 2) as isize;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mid = window * window / 2;
    let mut buf = Vec::with_capacity(window * window);
    let mut out = Vec::with_capacity(img.len());
    for y in 0..h {
        for x in 0..w {
            buf.clear();
            for dy in -r..=r {
                let sy = (y + dy).clamp(0, h - 1) as usize;
                let row = img.row(sy);
                for dx in -r..=r {
                    buf.push(row[(x + dx).clamp(0, w - 1) as usize]);
                }
            }
            let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
            out.push(*m);
        }
    }
    GrayImage::new(img.width(), img.height(), out)
}

/// Splits `len` pixels into `n` contiguous spans; returns the `n + 1`
/// boundaries.
fn tile_bounds(len: usize, n: usize) -> Vec<usize> {
    (0..=n).map(|i| i * len / n).collect()
}

/// For a coordinate, the two neighbouring tile indices and the weight of the
/// second one, interpolating between tile centres and clamping outside them.
fn interp_coords(bounds: &[usize]) -> Vec<(usize, usize, f64)> {
    let n = bounds.len() - 1;
    let len = bounds[n];
    let centers: Vec<f64> = (0..n)
        .map(|i| (bounds[i] + bounds[i + 1] - 1) as f64 / 2.0)
        .collect();
    (0..len)
        .map(|p| {
            let p = p as f64;
            if p <= centers[0] {
                (0, 0, 0.0)
            } else if p >= centers[n - 1] {
                (n - 1, n - 1, 0.0)
            } else {
                let i = centers.partition_point(|&c| c <= p) - 1;
                let t = (p - centers[i]) / (centers[i + 1] - centers[i]);
                (i, i + 1, t)
            }
        })
        .collect()
}

/// Contrast-limited adaptive histogram equalization.
///
/// `tiles` is the `(columns, rows)` grid, clamped to the image size.
/// `clip_limit` is a multiple of the uniform bin height (`tile_pixels / 256`);
/// excess counts are spread evenly over all bins. Each tile maps its darkest
/// occupied level to 0 like [`histogram_equalize`], and pixel values are
/// bilinearly interpolated between the four nearest tile mappings.
pub fn clahe(img: &GrayImage, tiles: (usize, usize), clip_limit: f64) -> Result<GrayImage> {
    if tiles.0 == 0 || tiles.1 == 0 {
        return Err(Error::param(format!(
            "CLAHE tile grid must be at least 1x1, got {}x{}",
            tiles.0, tiles.1
        )));
    }
    if clip_limit.is_nan() || clip_limit <= 0.0 {
        return Err(Error::param(format!(
            "CLAHE clip limit must be positive, got {clip_limit}"
        )));
    }
    let (w, h) = img.dimensions();
    let (tx, ty) = (tiles.0.min(w), tiles.1.min(h));
    let xb = tile_bounds(w, tx);
    let yb = tile_bounds(h, ty);
    let levels: Vec<u8> = img.as_slice().iter().map(|&v| quantize(v)).collect();

    let mut luts = Vec::with_capacity(tx * ty);
    for j in 0..ty {
        for i in 0..tx {
            let tile_levels = (yb[j]..yb[j + 1])
                .flat_map(|y| levels[y * w + xb[i]..y * w + xb[i + 1]].iter().copied());
            luts.push(clipped_lut(
                &Histogram::from_levels(tile_levels),
                clip_limit,
            ));
        }
    }

    let xi = interp_coords(&xb);
    let yi = interp_coords(&yb);
    let mut out = Vec::with_capacity(w * h);
    for (y, &(j0, j1, fy)) in yi.iter().enumerate() {
        for (x, &(i0, i1, fx)) in xi.iter().enumerate() {
            let l = levels[y * w + x] as usize;
            let top = (1.0 - fx) * luts[j0 * tx + i0][l] + fx * luts[j0 * tx + i1][l];
            let bottom = (1.0 - fx) * luts[j1 * tx + i0][l] + fx * luts[j1 * tx + i1][l];
            out.push(((1.0 - fy) * top + fy * bottom).clamp(0.0, 1.0));
        }
    }
    GrayImage::new(w, h, out)
}

fn clipped_lut(hist: &Histogram, clip_limit: f64) -> [f64; LEVELS] {
    let mut lut = [0.0; LEVELS];
    let Some(min_level) = hist.min_level() else {
        return lut;
    };
    let total = hist.total() as f64;
    let limit = clip_limit * total / LEVELS as f64;
    let mut bins = [0.0; LEVELS];
    let mut excess = 0.0;
    for (b, &count) in bins.iter_mut().zip(hist.bins()) {
        let c = count as f64;
        if c > limit {
            excess += c - limit;
            *b = limit;
        } else {
            *b = c;
        }
    }
    let spread = excess / LEVELS as f64;
    let mut cdf = [0.0; LEVELS];
    let mut acc = 0.0;
    for (c, b) in cdf.iter_mut().zip(&bins) {
        acc += b + spread;
        *c = acc;
    }
    let cdf_min = cdf[min_level as usize];
    let span = cdf[LEVELS - 1] - cdf_min;
    if span.is_nan() || span <= 0.0 {
        return lut;
    }
    for (out, &c) in lut.iter_mut().zip(&cdf) {
        *out = ((c - cdf_min) / span).clamp(0.0, 1.0);
    }
    lut
}

/// Band-pass `G(sigma_small * ratio) * I - G(sigma_small) * I`
/// (wide surround minus narrow centre, so thin dark lines come out positive).
pub fn difference_of_gaussians(img: &GrayImage, sigma_small: f64, ratio: f64) -> Result<GrayImage> {
    if !ratio.is_finite() || ratio <= 1.0 {
        return Err(Error::param(format!(
            "DoG kernel ratio must exceed 1, got {ratio}"
        )));
    }
    let narrow = convolve_separable(img, &GaussianKernel::new(sigma_small)?);
    let wide = convolve_separable(img, &GaussianKernel::new(sigma_small * ratio)?);
    let data = wide
        .as_slice()
        .iter()
        .zip(narrow.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    GrayImage::new(img.width(), img.height(), data)
}

/// DoG band-pass, min-max rescale, then histogram equalization.
pub fn dog_he(img: &GrayImage, sigma_small: f64, ratio: f64) -> Result<GrayImage> {
    let dog = difference_of_gaussians(img, sigma_small, ratio)?;
    Ok(histogram_equalize(&normalize_minmax(&dog)))
}

/// Gaussian blur followed by min-max rescale.
pub fn gaussian_lowpass(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    let blurred = convolve_separable(img, &GaussianKernel::new(sigma)?);
    Ok(normalize_minmax(&blurred))
}

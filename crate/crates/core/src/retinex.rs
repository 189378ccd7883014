//! Gaussian surround and single-scale Retinex (SSR).
//!
//! An observed image is modelled as reflectance times illumination. SSR
//! estimates the illumination with a wide Gaussian blur and removes it in
//! the log domain:
//!
//! ```text
//! R(x, y) = ln(I(x, y) + eps) - ln((G * I)(x, y) + eps)
//! ```
//!
//! The same `eps` appears in both terms so that a constant image yields a
//! reflectance of exactly zero.

use crate::error::{Error, Result};
use crate::image::{normalize_minmax, GrayImage};

/// Log guard used when no other value is configured.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Surround scale used by the extraction pipeline.
pub const DEFAULT_SIGMA: f64 = 25.0;

/// Unit-sum Gaussian profile truncated at `ceil(3 * sigma)`.
///
/// The 2-D surround is the outer product of the profile with itself, so it
/// also sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::param(format!(
                "Gaussian sigma must be positive and finite, got {sigma}"
            )));
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let denom = 2.0 * sigma * sigma;
        // one value per distance so mirrored taps are bit-identical
        let half: Vec<f64> = (0..=radius)
            .map(|d| (-((d * d) as f64) / denom).exp())
            .collect();
        let mut weights: Vec<f64> = (0..2 * radius + 1)
            .map(|i| half[i.abs_diff(radius)])
            .collect();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        Ok(Self {
            sigma,
            radius,
            weights,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Shorthand for [`GaussianKernel::new`].
pub fn build_kernel(sigma: f64) -> Result<GaussianKernel> {
    GaussianKernel::new(sigma)
}

/// Separable convolution with edge replication: a horizontal pass followed
/// by a vertical pass.
///
/// Each tap is accumulated as `center + sum(w * (neighbor - center))` in
/// ascending tap order. Because the weights sum to one this equals the
/// plain weighted sum, but flat regions come out bit-exact. Each pass is
/// clamped to its input range.
pub fn convolve_separable(img: &GrayImage, kernel: &GaussianKernel) -> GrayImage {
    let (width, height) = img.dimensions();
    let weights = kernel.weights();
    let r = kernel.radius();
    let (lo, hi) = img.min_max();

    // horizontal
    let mut tmp = vec![0.0; width * height];
    let mut padded = vec![0.0; width + 2 * r];
    for y in 0..height {
        let row = img.row(y);
        for (i, p) in padded.iter_mut().enumerate() {
            *p = row[(i as isize - r as isize).clamp(0, width as isize - 1) as usize];
        }
        let out = &mut tmp[y * width..(y + 1) * width];
        for (x, o) in out.iter_mut().enumerate() {
            let center = row[x];
            let mut acc = 0.0;
            for (w, &v) in weights.iter().zip(&padded[x..x + 2 * r + 1]) {
                acc += w * (v - center);
            }
            *o = (center + acc).clamp(lo, hi);
        }
    }

    // vertical, accumulated row by row so reads stay contiguous
    let mut out = vec![0.0; width * height];
    let mut acc = vec![0.0; width];
    for y in 0..height {
        let center = &tmp[y * width..(y + 1) * width];
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (k, w) in weights.iter().enumerate() {
            let src_y =
                (y as isize + k as isize - r as isize).clamp(0, height as isize - 1) as usize;
            let src = &tmp[src_y * width..(src_y + 1) * width];
            for ((a, &s), &c) in acc.iter_mut().zip(src).zip(center) {
                *a += w * (s - c);
            }
        }
        for ((o, &a), &c) in out[y * width..(y + 1) * width]
            .iter_mut()
            .zip(&acc)
            .zip(center)
        {
            *o = (c + a).clamp(lo, hi);
        }
    }
    GrayImage::new(width, height, out).expect("dimensions preserved")
}

/// Blurs `img` with a freshly built kernel of the given sigma.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    Ok(convolve_separable(img, &GaussianKernel::new(sigma)?))
}

/// Log-domain reflectance estimate. Values are unbounded but finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectanceMap(GrayImage);

impl ReflectanceMap {
    pub fn as_image(&self) -> &GrayImage {
        &self.0
    }

    pub fn into_image(self) -> GrayImage {
        self.0
    }
}

/// Single-scale Retinex: `ln(I + eps) - ln(G * I + eps)`.
pub fn single_scale_retinex(
    img: &GrayImage,
    kernel: &GaussianKernel,
    epsilon: f64,
) -> Result<ReflectanceMap> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::param(format!(
            "log guard epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if let Some((index, &value)) = img
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        return Err(Error::ValueOutOfRange { index, value });
    }
    let illumination = convolve_separable(img, kernel);
    let data = img
        .as_slice()
        .iter()
        .zip(illumination.as_slice())
        .map(|(&i, &l)| (i + epsilon).ln() - (l + epsilon).ln())
        .collect();
    Ok(ReflectanceMap(
        GrayImage::new(img.width(), img.height(), data).expect("dimensions preserved"),
    ))
}

/// Min-max rescale of a reflectance map into `[0, 1]`; constant maps
/// become all zeros.
pub fn rescale_to_unit(r: &ReflectanceMap) -> GrayImage {
    normalize_minmax(&r.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Dense 2-D convolution with clamped coordinates; independent of the
    /// separable path.
    fn dense_convolve(img: &GrayImage, sigma: f64) -> GrayImage {
        let r = (3.0 * sigma).ceil() as isize;
        let raw: Vec<f64> = (-r..=r)
            .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let (wd, ht) = (img.width() as isize, img.height() as isize);
        GrayImage::from_fn(img.width(), img.height(), |x, y| {
            let mut acc = 0.0;
            for j in -r..=r {
                for i in -r..=r {
                    let sx = (x as isize + i).clamp(0, wd - 1) as usize;
                    let sy = (y as isize + j).clamp(0, ht - 1) as usize;
                    acc += w[(i + r) as usize] * w[(j + r) as usize] * img.get(sx, sy);
                }
            }
            acc
        })
    }

    fn max_abs_diff(a: &GrayImage, b: &GrayImage) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn kernel_sigma_25() {
        let k = build_kernel(25.0).unwrap();
        assert_eq!(k.radius(), 75);
        assert_eq!(k.weights().len(), 151);
        let sum: f64 = k.weights().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn kernel_shape() {
        let k = build_kernel(0.5).unwrap();
        let c = k.radius();
        let w = k.weights();
        assert!(w.iter().enumerate().all(|(i, &v)| i == c || v < w[c]));
        for sigma in [0.3, 0.8, 1.0, 3.7, 25.0, 50.0] {
            let k = build_kernel(sigma).unwrap();
            let (c, w) = (k.radius(), k.weights());
            for d in 1..=c {
                assert_eq!(w[c - d], w[c + d]);
                assert!(w[c + d] > 0.0);
                assert!(w[c + d] <= w[c + d - 1]);
            }
        }
    }

    #[test]
    fn kernel_rejects_bad_sigma() {
        for sigma in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(build_kernel(sigma).is_err(), "sigma {sigma}");
        }
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = GrayImage::filled(40, 30, 0.3137);
        for sigma in [0.8, 3.0, 25.0] {
            let out = convolve_separable(&img, &build_kernel(sigma).unwrap());
            assert_eq!(out, img);
        }
    }

    #[test]
    fn impulse_matches_dense() {
        let mut img = GrayImage::filled(41, 41, 0.0);
        img.set(20, 20, 1.0);
        let out = convolve_separable(&img, &build_kernel(3.0).unwrap());
        assert!(max_abs_diff(&out, &dense_convolve(&img, 3.0)) < 1e-9);
        assert!(out.get(20, 20) > out.get(21, 20));
    }

    #[test]
    fn ramp_interior_preserved() {
        let sigma = 3.0;
        let img = GrayImage::from_fn(60, 40, |x, _| x as f64 / 59.0);
        let out = convolve_separable(&img, &build_kernel(sigma).unwrap());
        let r = 9;
        for y in 0..40 {
            for x in r..60 - r {
                assert!((out.get(x, y) - img.get(x, y)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ssr_constant_is_zero() {
        let img = GrayImage::filled(32, 32, 0.42);
        let r = single_scale_retinex(&img, &build_kernel(25.0).unwrap(), DEFAULT_EPSILON).unwrap();
        assert!(r.as_image().as_slice().iter().all(|&v| v == 0.0));
        assert!(rescale_to_unit(&r).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ssr_rejects_negative_input_and_bad_epsilon() {
        let k = build_kernel(1.0).unwrap();
        let bad = GrayImage::new(2, 1, vec![0.5, -0.1]).unwrap();
        assert!(single_scale_retinex(&bad, &k, 1e-4).is_err());
        let ok = GrayImage::filled(2, 2, 0.5);
        assert!(single_scale_retinex(&ok, &k, 0.0).is_err());
    }

    #[test]
    fn ssr_of_black_image_is_finite() {
        let img = GrayImage::filled(8, 8, 0.0);
        let r = single_scale_retinex(&img, &build_kernel(2.0).unwrap(), 1e-8).unwrap();
        assert!(r.as_image().is_finite());
    }

    fn smooth_image(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let (fx, fy) = (x as f64 / w as f64, y as f64 / h as f64);
            0.15 + 0.3 * (1.0 + (3.0 * fx).sin() * (2.0 * fy + 0.5).cos())
        })
    }

    #[test]
    fn ssr_scaling_invariance_tightens_with_epsilon() {
        let img = smooth_image(48, 48).map(|v| v * 0.9);
        let k = build_kernel(5.0).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-4, 1e-6, 1e-8] {
            let a = single_scale_retinex(&img, &k, eps).unwrap();
            let b = single_scale_retinex(&img.map(|v| 2.0 * v), &k, eps).unwrap();
            let d = max_abs_diff(a.as_image(), b.as_image());
            assert!(d < prev, "eps {eps}: {d} !< {prev}");
            prev = d;
        }
        assert!(prev < 1e-6);
    }

    fn variance(img: &GrayImage) -> f64 {
        let n = img.len() as f64;
        let mean = img.as_slice().iter().sum::<f64>() / n;
        img.as_slice()
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / n
    }

    #[test]
    fn smooth_illumination_residual_grows_with_sigma() {
        // pure illumination field: a narrower surround tracks it more closely
        let img = GrayImage::from_fn(160, 160, |x, y| {
            let (dx, dy) = (x as f64 - 70.0, y as f64 - 90.0);
            0.9 - 0.7 * (-(dx * dx + dy * dy) / (2.0 * 45.0 * 45.0)).exp()
        });
        let vars: Vec<f64> = [5.0, 25.0, 50.0]
            .iter()
            .map(|&s| {
                let r =
                    single_scale_retinex(&img, &build_kernel(s).unwrap(), DEFAULT_EPSILON).unwrap();
                variance(r.as_image())
            })
            .collect();
        assert!(vars[0] < vars[1] && vars[1] < vars[2], "{vars:?}");
    }

    #[test]
    fn rescale_examples() {
        let r = ReflectanceMap(GrayImage::new(3, 1, vec![-1.0, 0.0, 1.0]).unwrap());
        assert_eq!(rescale_to_unit(&r).as_slice(), &[0.0, 0.5, 1.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn separable_equals_dense(
            w in 1usize..24,
            h in 1usize..24,
            sigma in 0.3f64..4.0,
            seed in any::<u64>(),
        ) {
            let mut state = seed | 1;
            let img = GrayImage::from_fn(w, h, |_, _| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64
            });
            let out = convolve_separable(&img, &build_kernel(sigma).unwrap());
            prop_assert!(max_abs_diff(&out, &dense_convolve(&img, sigma)) < 1e-9);
            let (lo, hi) = img.min_max();
            let (olo, ohi) = out.min_max();
            prop_assert!(olo >= lo && ohi <= hi);
        }
    }
}

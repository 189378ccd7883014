use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use super::BinaryImage;
use crate::enhance::{quantize, Histogram, LEVELS};
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// How to pick the binarization threshold. Pixels darker than the
/// threshold become foreground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMethod {
    /// Foreground is `v < t`, with `t` in `[0, 1]`.
    Fixed(f64),
    /// Otsu's between-class-variance criterion on the 256-level histogram.
    /// Foreground is every pixel whose level is at or below the chosen level.
    Otsu,
}

impl fmt::Display for ThresholdMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdMethod::Fixed(t) => write!(f, "fixed:{t}"),
            ThresholdMethod::Otsu => f.write_str("otsu"),
        }
    }
}

impl FromStr for ThresholdMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "otsu" {
            return Ok(ThresholdMethod::Otsu);
        }
        if let Some(t) = s.strip_prefix("fixed:") {
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::param(format!("bad fixed threshold `{t}`")))?;
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::param(format!("fixed threshold {t} outside [0, 1]")));
            }
            return Ok(ThresholdMethod::Fixed(t));
        }
        Err(Error::param(format!(
            "threshold must be `otsu` or `fixed:<t>`, got `{s}`"
        )))
    }
}

/// Otsu's level: the `k` maximizing between-class variance when the classes
/// are levels `<= k` and `> k`. Ties resolve to the lowest `k`. Returns
/// `None` when fewer than two levels are occupied.
pub fn otsu_level(hist: &Histogram) -> Option<u8> {
    let bins = hist.bins();
    let total_count = hist.total() as u128;
    let total_sum: u128 = bins
        .iter()
        .enumerate()
        .map(|(l, &c)| l as u128 * c as u128)
        .sum();

    let mut best: Option<(u8, Score)> = None;
    let (mut n0, mut s0) = (0u128, 0u128);
    for (level, &count) in bins.iter().enumerate().take(LEVELS - 1) {
        n0 += count as u128;
        s0 += level as u128 * count as u128;
        let n1 = total_count - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let score = Score::new(n0, s0, n1, total_sum - s0);
        if best
            .as_ref()
            .is_none_or(|(_, b)| score.cmp(b) == Ordering::Greater)
        {
            best = Some((level as u8, score));
        }
    }
    best.map(|(level, _)| level)
}

/// Between-class variance up to the constant `1 / N^2`, kept as the exact
/// fraction `(s0 * n1 - s1 * n0)^2 / (n0 * n1)`.
struct Score {
    diff: u128,
    den: u128,
}

impl Score {
    fn new(n0: u128, s0: u128, n1: u128, s1: u128) -> Self {
        Self {
            diff: (s0 * n1).abs_diff(s1 * n0),
            den: n0 * n1,
        }
    }

    fn cross(&self, other_den: u128) -> Option<u128> {
        self.diff.checked_mul(self.diff)?.checked_mul(other_den)
    }

    fn as_f64(&self) -> f64 {
        (self.diff as f64).powi(2) / self.den as f64
    }

    fn cmp(&self, other: &Score) -> Ordering {
        match (self.cross(other.den), other.cross(self.den)) {
            (Some(a), Some(b)) => a.cmp(&b),
            // huge images: fall back to floating point
            _ => self.as_f64().total_cmp(&other.as_f64()),
        }
    }
}

/// Binarizes `img`; foreground marks the dark side of the threshold.
pub fn threshold(img: &GrayImage, method: ThresholdMethod) -> Result<BinaryImage> {
    let mask = match method {
        ThresholdMethod::Fixed(t) => {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::param(format!("fixed threshold {t} outside [0, 1]")));
            }
            img.as_slice().iter().map(|&v| v < t).collect()
        }
        ThresholdMethod::Otsu => match otsu_level(&Histogram::from_image(img)) {
            Some(k) => img.as_slice().iter().map(|&v| quantize(v) <= k).collect(),
            None => vec![false; img.len()],
        },
    };
    BinaryImage::new(img.width(), img.height(), mask)
}

impl ThresholdMethod {
    /// The equivalent unit-range cut for Otsu level `k`: `(k + 0.5) / 255`.
    pub fn otsu_cut(level: u8) -> f64 {
        (level as f64 + 0.5) / 255.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_threshold() {
        let img = GrayImage::new(2, 1, vec![0.2, 0.8]).unwrap();
        let bin = threshold(&img, ThresholdMethod::Fixed(0.5)).unwrap();
        assert_eq!(bin.as_slice(), &[true, false]);
        assert!(threshold(&img, ThresholdMethod::Fixed(1.5)).is_err());
        assert!(threshold(&img, ThresholdMethod::Fixed(f64::NAN)).is_err());
    }

    #[test]
    fn otsu_bimodal() {
        let img = GrayImage::from_fn(
            10,
            10,
            |x, _| if x < 5 { 50.0 / 255.0 } else { 200.0 / 255.0 },
        );
        let k = otsu_level(&Histogram::from_image(&img)).unwrap();
        let cut = ThresholdMethod::otsu_cut(k);
        assert!(cut > 50.0 / 255.0 && cut < 200.0 / 255.0);
        // every k in 50..200 ties; the lowest wins
        assert_eq!(k, 50);
        let bin = threshold(&img, ThresholdMethod::Otsu).unwrap();
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(bin.get(x, y), x < 5);
            }
        }
    }

    #[test]
    fn otsu_constant_is_background() {
        let img = GrayImage::filled(6, 6, 0.3);
        assert_eq!(otsu_level(&Histogram::from_image(&img)), None);
        assert_eq!(threshold(&img, ThresholdMethod::Otsu).unwrap().count(), 0);
    }

    #[test]
    fn method_parse_round_trip() {
        for m in [
            ThresholdMethod::Otsu,
            ThresholdMethod::Fixed(0.25),
            ThresholdMethod::Fixed(1.0),
        ] {
            assert_eq!(m.to_string().parse::<ThresholdMethod>().unwrap(), m);
        }
        assert!("fixed:2".parse::<ThresholdMethod>().is_err());
        assert!("niblack".parse::<ThresholdMethod>().is_err());
    }
}

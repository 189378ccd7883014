//! Turning an enhanced grayscale image into a vein skeleton: thresholding,
//! connected-component pruning, inversion and thinning.

mod components;
mod thinning;
mod threshold;

pub use components::{label_components, remove_small_components, ComponentLabeling, Connectivity};
pub use thinning::{thin, thin_with_stats, ThinningStats};
pub use threshold::{otsu_level, threshold, ThresholdMethod};

/// Row-major boolean raster; `true` is foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> crate::Result<Self> {
        if width == 0 || height == 0 {
            return Err(crate::Error::EmptyImage { width, height });
        }
        if mask.len() != width * height {
            return Err(crate::Error::BufferSize {
                expected: width * height,
                actual: mask.len(),
            });
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be non-zero");
        Self {
            width,
            height,
            mask: vec![value; width * height],
        }
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be non-zero");
        let mut mask = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                mask.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            mask,
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

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    /// Like [`get`](Self::get) but `false` outside the raster.
    #[inline]
    pub fn get_or_false(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.mask[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.mask[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.dimensions() == other.dimensions()
            && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }
}

/// Logical complement.
pub fn invert(bin: &BinaryImage) -> BinaryImage {
    BinaryImage {
        width: bin.width,
        height: bin.height,
        mask: bin.mask.iter().map(|&b| !b).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invert_examples() {
        let all = BinaryImage::filled(4, 3, true);
        assert_eq!(invert(&all).count(), 0);

        let bin = BinaryImage::from_fn(7, 5, |x, y| (x * 3 + y) % 4 == 0);
        assert_eq!(invert(&invert(&bin)), bin);
        assert_eq!(invert(&bin).count(), 35 - bin.count());
    }

    #[test]
    fn construction_checks() {
        assert!(BinaryImage::new(0, 1, vec![]).is_err());
        assert!(BinaryImage::new(2, 2, vec![true; 3]).is_err());
        let b = BinaryImage::new(2, 1, vec![true, false]).unwrap();
        assert!(b.get_or_false(0, 0));
        assert!(!b.get_or_false(-1, 0));
        assert!(!b.get_or_false(2, 0));
    }
}

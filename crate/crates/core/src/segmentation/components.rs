use std::fmt;
use std::str::FromStr;

use super::BinaryImage;
use crate::error::{Error, Result};

/// Pixel adjacency used for component analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::Four => "4",
            Connectivity::Eight => "8",
        })
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "4" => Ok(Connectivity::Four),
            "8" => Ok(Connectivity::Eight),
            other => Err(Error::param(format!(
                "connectivity must be 4 or 8, got `{other}`"
            ))),
        }
    }
}

/// Component labels: 0 is background, components are numbered `1..=K` in
/// raster order of their first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    /// Pixel count of component `label` (1-based).
    pub fn size(&self, label: u32) -> usize {
        self.sizes[label as usize - 1]
    }

    /// Sizes indexed by `label - 1`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Two-pass union-find labeling.
pub fn label_components(bin: &BinaryImage, connectivity: Connectivity) -> ComponentLabeling {
    let (w, h) = bin.dimensions();
    let mut provisional = vec![u32::MAX; w * h];
    let mut sets = DisjointSet::new();

    // already-visited neighbours: W, NW, N, NE
    let back: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (0, -1)],
        Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
    };

    for y in 0..h {
        for x in 0..w {
            if !bin.get(x, y) {
                continue;
            }
            let mut current: Option<u32> = None;
            for &(dx, dy) in back {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if !bin.get_or_false(nx, ny) {
                    continue;
                }
                let n = provisional[ny as usize * w + nx as usize];
                current = Some(match current {
                    None => n,
                    Some(c) => sets.union(c, n),
                });
            }
            provisional[y * w + x] = current.unwrap_or_else(|| sets.make());
        }
    }

    let mut final_label = vec![0u32; sets.parent.len()];
    let mut sizes: Vec<usize> = Vec::new();
    let mut labels = vec![0u32; w * h];
    for (out, &p) in labels.iter_mut().zip(&provisional) {
        if p == u32::MAX {
            continue;
        }
        let root = sets.find(p) as usize;
        if final_label[root] == 0 {
            sizes.push(0);
            final_label[root] = sizes.len() as u32;
        }
        let label = final_label[root];
        sizes[label as usize - 1] += 1;
        *out = label;
    }

    ComponentLabeling {
        width: w,
        height: h,
        labels,
        sizes,
    }
}

/// Drops every component with fewer than `min_area` pixels. Surviving
/// components are kept pixel-for-pixel.
pub fn remove_small_components(
    bin: &BinaryImage,
    min_area: usize,
    connectivity: Connectivity,
) -> BinaryImage {
    if min_area == 0 {
        return bin.clone();
    }
    let labeling = label_components(bin, connectivity);
    let mask = labeling
        .labels
        .iter()
        .map(|&l| l != 0 && labeling.sizes[l as usize - 1] >= min_area)
        .collect();
    BinaryImage::new(bin.width(), bin.height(), mask).expect("dimensions preserved")
}

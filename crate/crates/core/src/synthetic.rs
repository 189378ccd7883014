//! Synthetic palm-like scenes with known ground truth.
//!
//! A scene is `reflectance * illumination + noise`. The reflectance holds a
//! single branching tree of dark vein lines; the illumination combines a lateral
//! gradient with a broad central shadow. The generator returns the exact
//! centerline and vein masks so extraction results can be scored.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::GrayImage;
use crate::segmentation::BinaryImage;

/// Straight piece of a vein centerline, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: (f64, f64),
    pub b: (f64, f64),
}

impl Segment {
    /// Euclidean distance from `p` to the segment.
    pub fn distance(&self, p: (f64, f64)) -> f64 {
        let (dx, dy) = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p.0 - self.a.0) * dx + (p.1 - self.a.1) * dy) / len2).clamp(0.0, 1.0)
        };
        let (cx, cy) = (self.a.0 + t * dx, self.a.1 + t * dy);
        ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
    }

    /// Cosine of the angle between the segment and direction `heading`.
    fn cos_angle(&self, heading: f64) -> f64 {
        let (dx, dy) = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let len = (dx * dx + dy * dy).sqrt();
        if len == 0.0 {
            0.0
        } else {
            (dx * heading.cos() + dy * heading.sin()) / len
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Vein line thickness in pixels.
    pub vein_width: f64,
    /// Fractional reflectance drop at a vein centre.
    pub vein_depth: f64,
    /// Fractional illumination loss at the centre of the shadow.
    pub shadow_depth: f64,
    /// Shadow radius (Gaussian sigma) as a fraction of the shorter side.
    pub shadow_radius: f64,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    /// Levels of branching below the trunk.
    pub branch_depth: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 360,
            height: 657,
            seed: 7,
            vein_width: 11.0,
            vein_depth: 0.35,
            shadow_depth: 0.75,
            shadow_radius: 0.28,
            noise: 0.002,
            branch_depth: 3,
        }
    }
}

impl SceneConfig {
    /// Same scene layout scaled to the given size; the vein width follows
    /// the shorter side.
    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        let scale = width.min(height) as f64 / self.width.min(self.height) as f64;
        self.vein_width *= scale;
        self.width = width;
        self.height = height;
        self
    }
}

/// A rendered scene and its ground truth.
#[derive(Debug, Clone)]
pub struct VeinScene {
    pub image: GrayImage,
    pub reflectance: GrayImage,
    pub illumination: GrayImage,
    pub segments: Vec<Segment>,
    /// Pixels within half a pixel of a centerline.
    pub centerline: BinaryImage,
    /// Pixels within half the vein width of a centerline.
    pub veins: BinaryImage,
    /// Pixels where the illumination is below 40% of its maximum.
    pub shadow: BinaryImage,
}

#[allow(clippy::too_many_arguments)]
fn grow(
    rng: &mut ChaCha8Rng,
    segments: &mut Vec<Segment>,
    start: (f64, f64),
    angle: f64,
    length: f64,
    depth: usize,
    bounds: (f64, f64),
    separation: f64,
) {
    let steps = 6;
    let step = length / steps as f64;
    let mut p = start;
    let mut heading = angle;
    let mut path = vec![p];
    let own = segments.len();
    for i in 0..steps {
        heading += rng.gen_range(-0.25..0.25);
        let q = (p.0 + step * heading.cos(), p.1 + step * heading.sin());
        if q.0 < 2.0 || q.1 < 2.0 || q.0 > bounds.0 - 3.0 || q.1 > bounds.1 - 3.0 {
            break;
        }
        // veins may cross but do not run alongside each other
        if i > 0
            && segments[..own]
                .iter()
                .any(|s| s.distance(q) < separation && s.cos_angle(heading).abs() > 0.85)
        {
            break;
        }
        segments.push(Segment { a: p, b: q });
        p = q;
        path.push(p);
    }
    if depth == 0 || path.len() < 3 {
        return;
    }
    for fork in [path.len() / 3, 2 * path.len() / 3] {
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let turn = side * rng.gen_range(0.5..0.9);
        grow(
            rng,
            segments,
            path[fork],
            heading + turn,
            length * 0.6,
            depth - 1,
            bounds,
            separation,
        );
    }
}

/// Renders the scene described by `cfg`.
pub fn vein_scene(cfg: &SceneConfig) -> VeinScene {
    let (w, h) = (cfg.width, cfg.height);
    let (wf, hf) = (w as f64, h as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut segments = Vec::new();
    // one connected tree rooted at the wrist side
    grow(
        &mut rng,
        &mut segments,
        (0.5 * wf, hf - 3.0),
        -std::f64::consts::FRAC_PI_2,
        0.9 * hf,
        cfg.branch_depth,
        (wf, hf),
        2.0 * cfg.vein_width,
    );

    let half = cfg.vein_width / 2.0;
    let profile_sigma = half / 1.5;
    let nearest = |x: usize, y: usize| {
        let p = (x as f64, y as f64);
        segments
            .iter()
            .map(|s| s.distance(p))
            .fold(f64::INFINITY, f64::min)
    };
    let distance: Vec<f64> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| nearest(x, y))
        .collect();

    let reflectance = GrayImage::from_fn(w, h, |x, y| {
        let d = distance[y * w + x];
        let core = if d <= half {
            1.0
        } else {
            (-(d - half).powi(2) / (2.0 * profile_sigma * profile_sigma)).exp()
        };
        0.92 * (1.0 - cfg.vein_depth * core)
    });

    let (cx, cy) = (0.5 * wf, 0.52 * hf);
    let r = cfg.shadow_radius * wf.min(hf);
    let illumination = GrayImage::from_fn(w, h, |x, y| {
        let gradient = 0.65 + 0.35 * x as f64 / wf;
        let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        gradient * (1.0 - cfg.shadow_depth * (-d2 / (2.0 * r * r)).exp())
    });

    let image = GrayImage::from_fn(w, h, |x, y| {
        let noise = if cfg.noise > 0.0 {
            // Box-Muller
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            cfg.noise * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        } else {
            0.0
        };
        (reflectance.get(x, y) * illumination.get(x, y) + noise).clamp(0.0, 1.0)
    });

    let (_, lmax) = illumination.min_max();
    VeinScene {
        centerline: BinaryImage::from_fn(w, h, |x, y| distance[y * w + x] <= 0.5),
        veins: BinaryImage::from_fn(w, h, |x, y| distance[y * w + x] <= half),
        shadow: BinaryImage::from_fn(w, h, |x, y| illumination.get(x, y) < 0.4 * lmax),
        image,
        reflectance,
        illumination,
        segments,
    }
}

/// Fraction of `truth` pixels that have a `found` pixel within `radius`
/// (Euclidean).
pub fn centerline_recall(found: &BinaryImage, truth: &BinaryImage, radius: f64) -> f64 {
    let r = radius.ceil() as isize;
    let r2 = radius * radius;
    let mut total = 0usize;
    let mut hit = 0usize;
    for y in 0..truth.height() {
        for x in 0..truth.width() {
            if !truth.get(x, y) {
                continue;
            }
            total += 1;
            let near = (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    ((dx * dx + dy * dy) as f64) <= r2
                        && found.get_or_false(x as isize + dx, y as isize + dy)
                })
            });
            if near {
                hit += 1;
            }
        }
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

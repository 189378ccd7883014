//! End-to-end orchestration.
//!
//! [`extract`] runs the fixed stage chain in memory; [`run_extract`] adds
//! loading and writing. [`run_compare`] measures the enhancement paths
//! side by side and [`run_cube_average`] collapses a cube to one image.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::enhance::{self, clahe, dog_he, gaussian_lowpass, histogram_equalize, median_filter};
use crate::error::{Error, Result};
use crate::image::{average_bands, crop, normalize_minmax, GrayImage, Roi};
use crate::io::{load_cube, load_image, save_image, save_mask};
use crate::metrics::{build_report, EnhanceFn, LogBase, QualityReport};
use crate::retinex::{self, rescale_to_unit, single_scale_retinex, GaussianKernel};
use crate::segmentation::{
    invert, remove_small_components, thin, threshold, BinaryImage, Connectivity, ThresholdMethod,
};

/// Image area the default `min_area` was chosen for.
pub const REFERENCE_AREA: usize = 360 * 657;

pub const DEFAULT_MIN_AREA: usize = 20_000;

/// File name of the final skeleton inside the output directory.
pub const SKELETON_FILE: &str = "skeleton.png";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub sigma: f64,
    pub epsilon: f64,
    pub median_window: usize,
    pub threshold: ThresholdMethod,
    pub min_area: usize,
    /// Scale `min_area` by `area / REFERENCE_AREA`.
    pub area_scale: bool,
    pub connectivity: Connectivity,
    pub roi: Option<Roi>,
    pub band_center_nm: f64,
    pub band_width_nm: f64,
    pub invert_before_prune: bool,
    pub clahe_tiles: (usize, usize),
    pub clahe_clip: f64,
    pub dog_sigma: f64,
    pub dog_ratio: f64,
    pub glpf_sigma: f64,
    pub entropy_base: LogBase,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sigma: retinex::DEFAULT_SIGMA,
            epsilon: retinex::DEFAULT_EPSILON,
            median_window: enhance::DEFAULT_MEDIAN_WINDOW,
            threshold: ThresholdMethod::Otsu,
            min_area: DEFAULT_MIN_AREA,
            area_scale: true,
            connectivity: Connectivity::Eight,
            roi: None,
            band_center_nm: 850.0,
            band_width_nm: 10.0,
            invert_before_prune: false,
            clahe_tiles: enhance::DEFAULT_CLAHE_TILES,
            clahe_clip: enhance::DEFAULT_CLAHE_CLIP,
            dog_sigma: enhance::DEFAULT_DOG_SIGMA,
            dog_ratio: enhance::DEFAULT_DOG_RATIO,
            glpf_sigma: enhance::DEFAULT_GLPF_SIGMA,
            entropy_base: LogBase::Nats,
        }
    }
}

const KEYS: [&str; 17] = [
    "sigma",
    "epsilon",
    "median_window",
    "threshold",
    "min_area",
    "area_scale",
    "connectivity",
    "roi",
    "band_center_nm",
    "band_width_nm",
    "invert_before_prune",
    "clahe_tiles",
    "clahe_clip",
    "dog_sigma",
    "dog_ratio",
    "glpf_sigma",
    "entropy_base",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::param(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::param(format!(
            "`{key}`: expected true or false, got `{value}`"
        ))),
    }
}

fn parse_grid(key: &str, value: &str) -> Result<(usize, usize)> {
    let (a, b) = value
        .split_once('x')
        .ok_or_else(|| Error::param(format!("`{key}`: expected <cols>x<rows>, got `{value}`")))?;
    Ok((parse_value(key, a.trim())?, parse_value(key, b.trim())?))
}

impl PipelineConfig {
    /// Sets one field from its textual form. Keys are the ones written by
    /// [`to_config_string`](Self::to_config_string).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "sigma" => self.sigma = parse_value(key, value)?,
            "epsilon" => self.epsilon = parse_value(key, value)?,
            "median_window" => self.median_window = parse_value(key, value)?,
            "threshold" => self.threshold = value.parse()?,
            "min_area" => self.min_area = parse_value(key, value)?,
            "area_scale" => self.area_scale = parse_bool(key, value)?,
            "connectivity" => self.connectivity = value.parse()?,
            "roi" => {
                self.roi = match value {
                    "none" => None,
                    v => Some(v.parse()?),
                }
            }
            "band_center_nm" => self.band_center_nm = parse_value(key, value)?,
            "band_width_nm" => self.band_width_nm = parse_value(key, value)?,
            "invert_before_prune" => self.invert_before_prune = parse_bool(key, value)?,
            "clahe_tiles" => self.clahe_tiles = parse_grid(key, value)?,
            "clahe_clip" => self.clahe_clip = parse_value(key, value)?,
            "dog_sigma" => self.dog_sigma = parse_value(key, value)?,
            "dog_ratio" => self.dog_ratio = parse_value(key, value)?,
            "glpf_sigma" => self.glpf_sigma = parse_value(key, value)?,
            "entropy_base" => self.entropy_base = value.parse()?,
            other => {
                return Err(Error::param(format!(
                    "unknown config key `{other}` (known: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "sigma" => self.sigma.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "median_window" => self.median_window.to_string(),
            "threshold" => self.threshold.to_string(),
            "min_area" => self.min_area.to_string(),
            "area_scale" => self.area_scale.to_string(),
            "connectivity" => self.connectivity.to_string(),
            "roi" => self
                .roi
                .map_or_else(|| "none".to_owned(), |r| r.to_string()),
            "band_center_nm" => self.band_center_nm.to_string(),
            "band_width_nm" => self.band_width_nm.to_string(),
            "invert_before_prune" => self.invert_before_prune.to_string(),
            "clahe_tiles" => format!("{}x{}", self.clahe_tiles.0, self.clahe_tiles.1),
            "clahe_clip" => self.clahe_clip.to_string(),
            "dog_sigma" => self.dog_sigma.to_string(),
            "dog_ratio" => self.dog_ratio.to_string(),
            "glpf_sigma" => self.glpf_sigma.to_string(),
            "entropy_base" => self.entropy_base.to_string(),
            _ => unreachable!("key list and accessor out of sync"),
        }
    }

    /// One `key=value` line per field, in a fixed order.
    pub fn to_config_string(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k}={}\n", self.get(k)))
            .collect()
    }

    /// Applies the `key=value` lines in `text` on top of `self`. Blank lines
    /// and lines starting with `#` are ignored; a key may appear once.
    pub fn apply_config_str(&mut self, text: &str) -> Result<()> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |e: Error| Error::param(format!("config line {}: {e}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(Error::param(format!("expected key=value, got `{line}`"))))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(at(Error::param(format!("duplicate key `{key}`"))));
            }
            seen.push(key);
            self.set(key, value).map_err(at)?;
        }
        Ok(())
    }

    /// Defaults overridden by `text`.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_config_str(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        positive("sigma", self.sigma)?;
        positive("epsilon", self.epsilon)?;
        positive("clahe_clip", self.clahe_clip)?;
        positive("dog_sigma", self.dog_sigma)?;
        positive("dog_ratio", self.dog_ratio)?;
        positive("glpf_sigma", self.glpf_sigma)?;
        if !self.band_center_nm.is_finite() {
            return Err(Error::param("band_center_nm must be finite"));
        }
        if !(self.band_width_nm.is_finite() && self.band_width_nm >= 0.0) {
            return Err(Error::param("band_width_nm must be non-negative"));
        }
        if self.median_window == 0 || self.median_window.is_multiple_of(2) {
            return Err(Error::param(format!(
                "median_window must be odd and positive, got {}",
                self.median_window
            )));
        }
        if self.clahe_tiles.0 == 0 || self.clahe_tiles.1 == 0 {
            return Err(Error::param("clahe_tiles must be at least 1x1"));
        }
        if let ThresholdMethod::Fixed(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::param(format!(
                    "fixed threshold must be in [0, 1], got {t}"
                )));
            }
        }
        Ok(())
    }

    /// `min_area` for an image of the given size.
    pub fn effective_min_area(&self, width: usize, height: usize) -> usize {
        if !self.area_scale {
            return self.min_area;
        }
        let scale = (width * height) as f64 / REFERENCE_AREA as f64;
        (self.min_area as f64 * scale).round() as usize
    }
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Normalize,
    Crop,
    Retinex,
    Rescale,
    Equalize,
    Median,
    Threshold,
    Prune,
    Invert,
    Thin,
}

impl Stage {
    pub const ORDER: [Stage; 10] = [
        Stage::Normalize,
        Stage::Crop,
        Stage::Retinex,
        Stage::Rescale,
        Stage::Equalize,
        Stage::Median,
        Stage::Threshold,
        Stage::Prune,
        Stage::Invert,
        Stage::Thin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Normalize => "normalize",
            Stage::Crop => "crop",
            Stage::Retinex => "retinex",
            Stage::Rescale => "rescale",
            Stage::Equalize => "he",
            Stage::Median => "median",
            Stage::Threshold => "threshold",
            Stage::Prune => "prune",
            Stage::Invert => "invert",
            Stage::Thin => "thin",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageOutput {
    /// Grayscale output; the retinex stage holds the raw log-domain map.
    Gray(GrayImage),
    Mask(BinaryImage),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: Stage,
    /// Where the stage output was written, if it was.
    pub path: Option<PathBuf>,
    pub millis: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageTrace {
    pub records: Vec<StageRecord>,
}

impl StageTrace {
    pub fn stage_names(&self) -> Vec<&'static str> {
        self.records.iter().map(|r| r.stage.name()).collect()
    }

    pub fn total_millis(&self) -> f64 {
        self.records.iter().map(|r| r.millis).sum()
    }
}

/// Everything [`extract`] produced.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub outputs: Vec<(Stage, StageOutput)>,
    pub trace: StageTrace,
    /// Vein mask after pruning, veins set.
    pub veins: BinaryImage,
    pub skeleton: BinaryImage,
    pub min_area: usize,
}

impl Extraction {
    pub fn output(&self, stage: Stage) -> &StageOutput {
        &self
            .outputs
            .iter()
            .find(|(s, _)| *s == stage)
            .expect("every stage produces an output")
            .1
    }
}

struct Recorder {
    outputs: Vec<(Stage, StageOutput)>,
    trace: StageTrace,
}

impl Recorder {
    fn run<T>(
        &mut self,
        stage: Stage,
        f: impl FnOnce() -> Result<T>,
        wrap: impl FnOnce(&T) -> StageOutput,
    ) -> Result<T> {
        let start = Instant::now();
        let value = f().map_err(|e| Error::Stage {
            stage: stage.name(),
            source: Box::new(e),
        })?;
        let millis = start.elapsed().as_secs_f64() * 1e3;
        self.outputs.push((stage, wrap(&value)));
        self.trace.records.push(StageRecord {
            stage,
            path: None,
            millis,
        });
        Ok(value)
    }
}

fn gray(img: &GrayImage) -> StageOutput {
    StageOutput::Gray(img.clone())
}

fn mask(bin: &BinaryImage) -> StageOutput {
    StageOutput::Mask(bin.clone())
}

/// Runs the extraction chain on an in-memory image.
///
/// Threshold foreground is the vein set. Pruning drops small vein
/// fragments, the invert stage produces the figure-polarity mask (tissue
/// set, veins clear), and thinning skeletonizes the veins, i.e. the
/// complement of the inverted mask. With `invert_before_prune` the
/// inversion happens first and pruning removes small tissue islands.
pub fn extract(input: &GrayImage, cfg: &PipelineConfig) -> Result<Extraction> {
    cfg.validate()?;
    let mut rec = Recorder {
        outputs: Vec::with_capacity(Stage::ORDER.len()),
        trace: StageTrace::default(),
    };

    let normalized = rec.run(Stage::Normalize, || Ok(normalize_minmax(input)), gray)?;
    let cropped = rec.run(
        Stage::Crop,
        || match cfg.roi {
            Some(roi) => crop(&normalized, roi),
            None => Ok(normalized.clone()),
        },
        gray,
    )?;
    drop(normalized);
    let reflectance = rec.run(
        Stage::Retinex,
        || {
            let kernel = GaussianKernel::new(cfg.sigma)?;
            single_scale_retinex(&cropped, &kernel, cfg.epsilon)
        },
        |r| gray(r.as_image()),
    )?;
    let rescaled = rec.run(Stage::Rescale, || Ok(rescale_to_unit(&reflectance)), gray)?;
    let equalized = rec.run(Stage::Equalize, || Ok(histogram_equalize(&rescaled)), gray)?;
    let smoothed = rec.run(
        Stage::Median,
        || median_filter(&equalized, cfg.median_window),
        gray,
    )?;
    let binary = rec.run(
        Stage::Threshold,
        || threshold(&smoothed, cfg.threshold),
        mask,
    )?;

    let (w, h) = binary.dimensions();
    let min_area = cfg.effective_min_area(w, h);
    let prune = |b: &BinaryImage| Ok(remove_small_components(b, min_area, cfg.connectivity));
    let veins = if cfg.invert_before_prune {
        let inverted = rec.run(Stage::Invert, || Ok(invert(&binary)), mask)?;
        let pruned = rec.run(Stage::Prune, || prune(&inverted), mask)?;
        invert(&pruned)
    } else {
        let pruned = rec.run(Stage::Prune, || prune(&binary), mask)?;
        rec.run(Stage::Invert, || Ok(invert(&pruned)), mask)?;
        pruned
    };
    let skeleton = rec.run(Stage::Thin, || Ok(thin(&veins)), mask)?;

    Ok(Extraction {
        outputs: rec.outputs,
        trace: rec.trace,
        veins,
        skeleton,
        min_area,
    })
}

/// Where [`run_extract`] reads from.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtractInput {
    Image(PathBuf),
    /// Cube manifest; bands are averaged around the configured wavelength.
    Cube(PathBuf),
}

/// Loads the input image, or averages the configured band window of a cube.
pub fn load_input(input: &ExtractInput, cfg: &PipelineConfig) -> Result<GrayImage> {
    match input {
        ExtractInput::Image(path) => load_image(path),
        ExtractInput::Cube(path) => {
            let cube = load_cube(path)?;
            average_bands(&cube, cfg.band_center_nm, cfg.band_width_nm)
        }
    }
}

/// File name used for a stage output, e.g. `03_retinex.png`.
pub fn stage_file_name(stage: Stage, position: usize) -> String {
    format!("{:02}_{}.png", position + 1, stage.name())
}

/// Loads `input`, runs [`extract`], and writes `skeleton.png` into
/// `out_dir`. With `trace` every stage output is written as well; the
/// retinex map is rescaled to [0, 1] for storage.
pub fn run_extract(
    input: &ExtractInput,
    cfg: &PipelineConfig,
    out_dir: &Path,
    trace: bool,
) -> Result<(StageTrace, BinaryImage)> {
    cfg.validate()?;
    let image = load_input(input, cfg)?;
    let mut result = extract(&image, cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    if trace {
        for (i, (stage, output)) in result.outputs.iter().enumerate() {
            let path = out_dir.join(stage_file_name(*stage, i));
            match output {
                StageOutput::Gray(img) if *stage == Stage::Retinex => {
                    save_image(&normalize_minmax(img), &path)?
                }
                StageOutput::Gray(img) => save_image(img, &path)?,
                StageOutput::Mask(bin) => save_mask(bin, &path)?,
            }
            result.trace.records[i].path = Some(path);
        }
    }
    save_mask(&result.skeleton, out_dir.join(SKELETON_FILE))?;
    Ok((result.trace, result.skeleton))
}

/// Enhancement paths available to [`run_compare`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareMethod {
    /// Retinex, rescale, histogram equalization.
    Ssr,
    Clahe,
    DogHe,
    Glpf,
}

impl CompareMethod {
    pub const ALL: [CompareMethod; 4] = [
        CompareMethod::Ssr,
        CompareMethod::Clahe,
        CompareMethod::DogHe,
        CompareMethod::Glpf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CompareMethod::Ssr => "ssr",
            CompareMethod::Clahe => "clahe",
            CompareMethod::DogHe => "dog-he",
            CompareMethod::Glpf => "glpf",
        }
    }

    /// Parses a comma-separated list such as `ssr,clahe`.
    pub fn parse_list(s: &str) -> Result<Vec<CompareMethod>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: CompareMethod = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::param("no methods given"));
        }
        Ok(out)
    }

    /// Applies this method to a [0, 1] image.
    pub fn apply(self, img: &GrayImage, cfg: &PipelineConfig) -> Result<GrayImage> {
        match self {
            CompareMethod::Ssr => {
                let kernel = GaussianKernel::new(cfg.sigma)?;
                let r = single_scale_retinex(img, &kernel, cfg.epsilon)?;
                Ok(histogram_equalize(&rescale_to_unit(&r)))
            }
            CompareMethod::Clahe => clahe(img, cfg.clahe_tiles, cfg.clahe_clip),
            CompareMethod::DogHe => dog_he(img, cfg.dog_sigma, cfg.dog_ratio),
            CompareMethod::Glpf => gaussian_lowpass(img, cfg.glpf_sigma),
        }
    }
}

impl fmt::Display for CompareMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CompareMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CompareMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = CompareMethod::ALL.iter().map(|m| m.name()).collect();
                Error::param(format!(
                    "unknown method `{s}` (valid: {})",
                    valid.join(", ")
                ))
            })
    }
}

/// Normalizes and crops `input`, runs every method, and builds the quality
/// report. `ssr` is the proposed method when present, otherwise the first
/// one listed.
pub fn run_compare(
    input: &GrayImage,
    methods: &[CompareMethod],
    cfg: &PipelineConfig,
) -> Result<QualityReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::param("no methods given"));
    }
    let mut prepared = normalize_minmax(input);
    if let Some(roi) = cfg.roi {
        prepared = crop(&prepared, roi)?;
    }
    let runners: Vec<_> = methods
        .iter()
        .map(|&m| move |img: &GrayImage| m.apply(img, cfg))
        .collect();
    let named: Vec<(&str, EnhanceFn<'_>)> = methods
        .iter()
        .zip(&runners)
        .map(|(m, r)| (m.name(), r as EnhanceFn<'_>))
        .collect();
    let proposed = if methods.contains(&CompareMethod::Ssr) {
        CompareMethod::Ssr
    } else {
        methods[0]
    };
    build_report(&prepared, &named, proposed.name(), cfg.entropy_base)
}

/// Averages the cube bands within `width_nm / 2` of `center_nm` and saves
/// the result to `out`.
pub fn run_cube_average(manifest: &Path, center_nm: f64, width_nm: f64, out: &Path) -> Result<()> {
    let cube = load_cube(manifest)?;
    let avg = average_bands(&cube, center_nm, width_nm)?;
    save_image(&avg, out)
}

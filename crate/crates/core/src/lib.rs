//! Palm-vein extraction from grayscale near-infrared images.
//!
//! The extraction chain removes uneven illumination with single-scale
//! Retinex, stretches the result with histogram equalization, smooths it
//! with a median filter, binarizes, drops small connected components and
//! thins what remains to one-pixel vein centerlines:
//!
//! ```text
//! normalize -> crop -> retinex -> rescale -> HE -> median
//!           -> threshold -> prune -> invert -> thin
//! ```
//!
//! Alongside the chain, [`enhance`] carries the baseline enhancers (CLAHE,
//! DoG + HE, Gaussian low-pass) and [`metrics`] the contrast, entropy and
//! definition indicators used to compare them.

pub mod enhance;
mod error;
pub mod image;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod retinex;
pub mod segmentation;
pub mod synthetic;

pub use error::{Error, Result};
pub use image::{average_bands, crop, normalize_minmax, Band, GrayImage, Roi, SpectralCube};
pub use io::{load_cube, load_image, save_image, save_mask};
pub use metrics::{LogBase, QualityReport, QualityScores};
pub use pipeline::{CompareMethod, ExtractInput, PipelineConfig, Stage, StageTrace};
pub use retinex::{GaussianKernel, ReflectanceMap};
pub use segmentation::{BinaryImage, ComponentLabeling, Connectivity, ThresholdMethod};

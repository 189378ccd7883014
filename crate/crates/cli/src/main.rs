use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use palmvein_core::metrics::{self, LogBase};
use palmvein_core::pipeline::{self, CompareMethod, ExtractInput, PipelineConfig};
use palmvein_core::{load_image, Connectivity, Error, Roi, ThresholdMethod};

/// Palm-vein extraction and enhancement comparison.
#[derive(Parser, Debug)]
#[command(name = "palmvein", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the extraction chain and write the vein skeleton.
    Extract(ExtractArgs),
    /// Measure contrast, entropy and definition for several enhancement methods.
    Compare(CompareArgs),
    /// Average the bands of a cube around a wavelength.
    CubeAverage(CubeAverageArgs),
    /// Print the quality indicators of one image as JSON.
    Metrics(MetricsArgs),
    /// Print the effective configuration as key=value lines.
    Config(ConfigArgs),
}

/// Settings shared by every command that takes a configuration.
#[derive(Args, Debug, Default)]
struct Settings {
    /// key=value configuration file; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Gaussian surround scale of the retinex step, in pixels.
    #[arg(long)]
    sigma: Option<f64>,
    /// Offset added inside both logarithms.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Crop to x,y,w,h before processing.
    #[arg(long, value_name = "X,Y,W,H")]
    roi: Option<Roi>,
    /// Entropy unit: nats or bits.
    #[arg(long, value_name = "UNIT")]
    entropy_base: Option<LogBase>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    input: PathBuf,
    /// Treat the input as a cube manifest.
    #[arg(long)]
    cube: bool,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    settings: Settings,
    /// Median window side (odd).
    #[arg(long, value_name = "N")]
    median: Option<usize>,
    /// otsu or fixed:<t>.
    #[arg(long, value_name = "METHOD")]
    threshold: Option<ThresholdMethod>,
    /// Smallest vein component kept, at the reference image area.
    #[arg(long, value_name = "PIXELS")]
    min_area: Option<usize>,
    /// Use --min-area as an absolute pixel count.
    #[arg(long)]
    no_area_scale: bool,
    /// 4 or 8.
    #[arg(long)]
    connectivity: Option<Connectivity>,
    /// Band window centre for cube input, in nm.
    #[arg(long, value_name = "NM")]
    band_center: Option<f64>,
    /// Band window width for cube input, in nm.
    #[arg(long, value_name = "NM")]
    band_width: Option<f64>,
    /// Invert the mask before pruning instead of after.
    #[arg(long)]
    invert_before_prune: bool,
    /// Write every stage output next to the skeleton.
    #[arg(long)]
    trace: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated subset of ssr, clahe, dog-he, glpf.
    #[arg(long, default_value = "ssr,clahe,dog-he,glpf")]
    methods: String,
    /// Report destination; .json or .md. Markdown goes to stdout when omitted.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
    /// CLAHE tile grid, e.g. 8x8.
    #[arg(long, value_name = "COLSxROWS")]
    clahe_tiles: Option<String>,
    /// CLAHE clip limit relative to the uniform bin height.
    #[arg(long)]
    clahe_clip: Option<f64>,
    /// Narrow DoG sigma.
    #[arg(long)]
    dog_sigma: Option<f64>,
    /// Wide-to-narrow DoG sigma ratio.
    #[arg(long)]
    dog_ratio: Option<f64>,
    /// Gaussian low-pass sigma.
    #[arg(long)]
    glpf_sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct CubeAverageArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Window centre in nm.
    #[arg(long, default_value_t = 850.0)]
    center: f64,
    /// Window width in nm.
    #[arg(long, default_value_t = 10.0)]
    width: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long)]
    input: PathBuf,
    /// Entropy unit: nats or bits.
    #[arg(long, default_value = "nats")]
    entropy_base: LogBase,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// key=value file to merge over the defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidParameter(_) => 1,
            Error::Io { .. }
            | Error::UnsupportedFormat { .. }
            | Error::EmptyImage { .. }
            | Error::BufferSize { .. }
            | Error::DimensionMismatch { .. }
            | Error::MalformedManifest { .. }
            | Error::DuplicateWavelength(_) => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn base_config(file: Option<&Path>) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Failure {
            code: 2,
            message: format!("{}: {e}", path.display()),
        })?;
        cfg.apply_config_str(&text)?;
    }
    Ok(cfg)
}

fn apply_settings(cfg: &mut PipelineConfig, s: &Settings) {
    if let Some(v) = s.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = s.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = s.roi {
        cfg.roi = Some(v);
    }
    if let Some(v) = s.entropy_base {
        cfg.entropy_base = v;
    }
}

fn extract(args: ExtractArgs) -> Result<(), Failure> {
    let mut cfg = base_config(args.settings.config.as_deref())?;
    apply_settings(&mut cfg, &args.settings);
    if let Some(v) = args.median {
        cfg.median_window = v;
    }
    if let Some(v) = args.threshold {
        cfg.threshold = v;
    }
    if let Some(v) = args.min_area {
        cfg.min_area = v;
    }
    if args.no_area_scale {
        cfg.area_scale = false;
    }
    if let Some(v) = args.connectivity {
        cfg.connectivity = v;
    }
    if let Some(v) = args.band_center {
        cfg.band_center_nm = v;
    }
    if let Some(v) = args.band_width {
        cfg.band_width_nm = v;
    }
    if args.invert_before_prune {
        cfg.invert_before_prune = true;
    }
    cfg.validate()?;

    let input = if args.cube {
        ExtractInput::Cube(args.input)
    } else {
        ExtractInput::Image(args.input)
    };
    let (trace, skeleton) = pipeline::run_extract(&input, &cfg, &args.out_dir, args.trace)?;
    for rec in &trace.records {
        match &rec.path {
            Some(p) => println!("{:<10} {:>9.2} ms  {}", rec.stage, rec.millis, p.display()),
            None => println!("{:<10} {:>9.2} ms", rec.stage, rec.millis),
        }
    }
    println!(
        "skeleton   {} px  {}",
        skeleton.count(),
        args.out_dir.join(pipeline::SKELETON_FILE).display()
    );
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), Failure> {
    let mut cfg = base_config(args.settings.config.as_deref())?;
    apply_settings(&mut cfg, &args.settings);
    if let Some(v) = &args.clahe_tiles {
        cfg.set("clahe_tiles", v)?;
    }
    if let Some(v) = args.clahe_clip {
        cfg.clahe_clip = v;
    }
    if let Some(v) = args.dog_sigma {
        cfg.dog_sigma = v;
    }
    if let Some(v) = args.dog_ratio {
        cfg.dog_ratio = v;
    }
    if let Some(v) = args.glpf_sigma {
        cfg.glpf_sigma = v;
    }
    cfg.validate()?;
    let methods = CompareMethod::parse_list(&args.methods)?;

    let format = match &args.report {
        None => None,
        Some(p) => match p.extension().and_then(|e| e.to_str()) {
            Some("json") => Some("json"),
            Some("md") => Some("md"),
            _ => {
                return Err(usage(format!(
                    "{}: report must end in .json or .md",
                    p.display()
                )))
            }
        },
    };

    let image = load_image(&args.input)?;
    let report = pipeline::run_compare(&image, &methods, &cfg)?;
    match (args.report, format) {
        (Some(path), Some(kind)) => {
            let text = if kind == "json" {
                report.to_json()
            } else {
                report.to_markdown()
            };
            std::fs::write(&path, text).map_err(|e| Failure {
                code: 2,
                message: format!("{}: {e}", path.display()),
            })?;
        }
        _ => print!("{}", report.to_markdown()),
    }
    Ok(())
}

fn cube_average(args: CubeAverageArgs) -> Result<(), Failure> {
    pipeline::run_cube_average(&args.manifest, args.center, args.width, &args.out)?;
    Ok(())
}

fn metrics(args: MetricsArgs) -> Result<(), Failure> {
    let image = load_image(&args.input)?;
    let definition = metrics::definition(&image)?;
    println!(
        "{{\"contrast\": {:.4}, \"entropy\": {:.4}, \"definition\": {:.4}}}",
        metrics::contrast(&image),
        metrics::entropy_with_base(&image, args.entropy_base),
        definition
    );
    Ok(())
}

fn config(args: ConfigArgs) -> Result<(), Failure> {
    let cfg = base_config(args.config.as_deref())?;
    cfg.validate()?;
    print!("{}", cfg.to_config_string());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Extract(a) => extract(a),
        Command::Compare(a) => compare(a),
        Command::CubeAverage(a) => cube_average(a),
        Command::Metrics(a) => metrics(a),
        Command::Config(a) => config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("palmvein: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

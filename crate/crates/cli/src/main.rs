use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ringbearing::calibration::{
    calibrate, format_datasheet, load_datasheet, Datasheet, FitReport, ManifestRow,
};
use ringbearing::config::PipelineConfig;
use ringbearing::estimation::{estimate, CalibrationModel};
use ringbearing::evaluation::{evaluate, format_eval_csv, measure_dataset};
use ringbearing::imaging::{load_image, save_image};
use ringbearing::segmentation::detect_rings;
use ringbearing::synthcam::{
    generate_dataset, render, validity_grid, CameraSpec, LandmarkSpec, Pose, RenderOptions,
    DEFAULT_FOCAL_PX, DEFAULT_IMAGE_HEIGHT, DEFAULT_IMAGE_WIDTH, MANIFEST_FILE,
};
use ringbearing::Error;

/// Range and bearing to a two-ring landmark from single camera frames.
#[derive(Parser)]
#[command(name = "ringbearing", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate range and bearing from one image; prints a JSON object.
    Estimate {
        image: PathBuf,
        /// Pipeline configuration (JSON). Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Calibration model; overrides the one named in the config.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Fit the calibration constants from datasheets and write a model.
    Calibrate {
        /// Vertical, horizontal or manifest CSV files.
        #[arg(required = true)]
        datasheets: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Re-measure L and the horizontal offset on each manifest's images
        /// instead of trusting the manifest's columns.
        #[arg(long)]
        measure: bool,
        /// Pipeline configuration used with --measure.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Image size recorded in the model. Taken from the images when
        /// measuring, otherwise defaults to the synthetic camera's.
        #[arg(long)]
        image_width: Option<usize>,
        #[arg(long)]
        image_height: Option<usize>,
    },
    /// Render one synthetic frame; prints its ground truth as CSV.
    Render {
        /// Forward distance in cm.
        #[arg(long, allow_negative_numbers = true)]
        dv: f64,
        /// Lateral offset in cm, positive to the right.
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        dh: f64,
        /// Landmark spin about its own axis, degrees.
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        yaw: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        camera: CameraArgs,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Render the 12 x 11 validity grid with a manifest.
    Generate {
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        camera: CameraArgs,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Run the pipeline over a generated dataset and score it against the
    /// manifest. Prints a JSON summary; per-image rows go to --csv.
    Eval {
        dataset: PathBuf,
        /// Defaults to manifest.csv inside the dataset directory.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Per-image CSV output. Defaults to eval.csv inside the dataset directory.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CameraArgs {
    #[arg(long, default_value_t = DEFAULT_FOCAL_PX)]
    focal: f64,
    #[arg(long, default_value_t = DEFAULT_IMAGE_WIDTH)]
    width: usize,
    #[arg(long, default_value_t = DEFAULT_IMAGE_HEIGHT)]
    height: usize,
}

impl CameraArgs {
    fn spec(&self) -> CameraSpec {
        CameraSpec {
            focal_px: self.focal,
            image_width: self.width,
            image_height: self.height,
            height_cm: None,
        }
    }
}

#[derive(Args)]
struct RenderArgs {
    /// Standard deviation of additive Gaussian pixel noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Background colour as R,G,B.
    #[arg(long, value_parser = parse_rgb, default_value = "128,128,128")]
    background: [u8; 3],
}

impl RenderArgs {
    fn options(&self) -> RenderOptions {
        RenderOptions {
            background: self.background,
            noise_sigma: self.noise,
            seed: self.seed,
        }
    }
}

fn parse_rgb(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected R,G,B, got `{s}`"));
    }
    let mut rgb = [0u8; 3];
    for (c, p) in rgb.iter_mut().zip(parts) {
        *c = p.trim().parse().map_err(|e| format!("`{p}`: {e}"))?;
    }
    Ok(rgb)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        e if e.is_detection_failure() => 2,
        Error::ModelMismatch { .. } | Error::MissingHorizontalModel => 3,
        _ => 1,
    }
}

fn load_config(path: Option<&Path>) -> ringbearing::Result<PipelineConfig> {
    path.map_or_else(|| Ok(PipelineConfig::default()), PipelineConfig::load)
}

fn load_model(cfg: &PipelineConfig, path: Option<&Path>) -> ringbearing::Result<CalibrationModel> {
    match path {
        Some(p) => CalibrationModel::load(p),
        None => cfg.load_model(),
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string(value).expect("serializable"));
}

fn report_fit(name: &str, fit: &FitReport) {
    eprintln!(
        "{name}: constant = {}, rmse = {:.4}, n = {}, max |residual| = {:.4}",
        fit.constant, fit.rmse, fit.n, fit.max_abs_residual
    );
}

fn cmd_estimate(image: &Path, config: Option<&Path>, model: Option<&Path>) -> ringbearing::Result<()> {
    let cfg = load_config(config)?;
    let model = load_model(&cfg, model)?;
    let img = load_image(image)?;
    let det = detect_rings(&img, &cfg.segmentation)?;
    print_json(&estimate(&det, &model)?);
    Ok(())
}

/// Swap a manifest's feature columns for measured ones.
fn measured(manifest: &Path, rows: &[ManifestRow], cfg: &PipelineConfig) -> ringbearing::Result<Datasheet> {
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let (rows, dropped) = measure_dataset(dir, rows, &cfg.segmentation)?;
    for name in &dropped {
        eprintln!("skipped {name}: no usable detection");
    }
    Ok(Datasheet::Manifest(rows))
}

fn cmd_calibrate(
    datasheets: &[PathBuf],
    out: &Path,
    measure: bool,
    config: Option<&Path>,
    size: (Option<usize>, Option<usize>),
) -> ringbearing::Result<()> {
    let cfg = load_config(config)?;
    let mut vertical = Vec::new();
    let mut horizontal = Vec::new();
    let mut image_size = None;
    for path in datasheets {
        let mut sheet = load_datasheet(path)?;
        if let (true, Datasheet::Manifest(rows)) = (measure, &sheet) {
            if image_size.is_none() {
                if let Some(first) = rows.first() {
                    let dir = path.parent().unwrap_or(Path::new("."));
                    let img = load_image(dir.join(&first.filename))?;
                    image_size = Some((img.width(), img.height()));
                }
            }
            sheet = measured(path, rows, &cfg)?;
        }
        eprintln!("{}: {} rows", path.display(), sheet.len());
        vertical.extend(sheet.vertical_samples().unwrap_or_default());
        horizontal.extend(sheet.horizontal_samples().unwrap_or_default());
    }
    let (w, h) = image_size.unwrap_or((DEFAULT_IMAGE_WIDTH, DEFAULT_IMAGE_HEIGHT));
    let cal = calibrate(
        &vertical,
        (!horizontal.is_empty()).then_some(horizontal.as_slice()),
        size.0.unwrap_or(w),
        size.1.unwrap_or(h),
    )?;
    report_fit("a_vert", &cal.vertical);
    match &cal.horizontal {
        Some(fit) => report_fit("k_horiz", fit),
        None => eprintln!("k_horiz: no horizontal data, bearing disabled"),
    }
    cal.model.save(out)?;
    print_json(&cal.model);
    Ok(())
}

fn cmd_render(pose: Pose, out: &Path, cam: &CameraSpec, opts: &RenderOptions) -> ringbearing::Result<()> {
    let (img, truth) = render(&pose, cam, &LandmarkSpec::default(), opts)?;
    save_image(&img, out)?;
    let row = truth.manifest_row(out.display().to_string());
    print!("{}", format_datasheet(&Datasheet::Manifest(vec![row])));
    Ok(())
}

fn cmd_generate(out_dir: &Path, cam: &CameraSpec, opts: &RenderOptions) -> ringbearing::Result<()> {
    let rows = generate_dataset(&validity_grid(), cam, &LandmarkSpec::default(), out_dir, opts)?;
    eprintln!("wrote {} frames and {}", rows.len(), out_dir.join(MANIFEST_FILE).display());
    Ok(())
}

fn cmd_eval(
    dataset: &Path,
    manifest: Option<&Path>,
    config: Option<&Path>,
    model: Option<&Path>,
    csv: Option<&Path>,
) -> ringbearing::Result<()> {
    let cfg = load_config(config)?;
    let model = load_model(&cfg, model)?;
    let manifest_path = manifest.map_or_else(|| dataset.join(MANIFEST_FILE), Path::to_path_buf);
    let rows = match load_datasheet(&manifest_path)? {
        Datasheet::Manifest(rows) => rows,
        _ => {
            return Err(Error::Config(format!(
                "{} is not a dataset manifest",
                manifest_path.display()
            )))
        }
    };
    let report = evaluate(dataset, &rows, &cfg.segmentation, &model)?;
    for name in &report.skipped {
        eprintln!("skipped {name}: file not found");
    }
    for (name, err) in &report.failures {
        eprintln!("failed {name}: {err}");
    }
    let csv_path = csv.map_or_else(|| dataset.join("eval.csv"), Path::to_path_buf);
    std::fs::write(&csv_path, format_eval_csv(&report.rows)).map_err(|e| Error::Io {
        path: csv_path.clone(),
        source: e,
    })?;
    print_json(&report.summary);
    Ok(())
}

fn run(cli: Cli) -> ringbearing::Result<()> {
    match cli.command {
        Command::Estimate { image, config, model } => {
            cmd_estimate(&image, config.as_deref(), model.as_deref())
        }
        Command::Calibrate {
            datasheets,
            out,
            measure,
            config,
            image_width,
            image_height,
        } => cmd_calibrate(&datasheets, &out, measure, config.as_deref(), (image_width, image_height)),
        Command::Render {
            dv,
            dh,
            yaw,
            out,
            camera,
            render,
        } => {
            let pose = Pose { d_v: dv, d_h: dh, yaw_deg: yaw };
            cmd_render(pose, &out, &camera.spec(), &render.options())
        }
        Command::Generate { out_dir, camera, render } => {
            cmd_generate(&out_dir, &camera.spec(), &render.options())
        }
        Command::Eval {
            dataset,
            manifest,
            config,
            model,
            csv,
        } => cmd_eval(
            &dataset,
            manifest.as_deref(),
            config.as_deref(),
            model.as_deref(),
            csv.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

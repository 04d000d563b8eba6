//! `drr`: blind direct-to-reverberant ratio estimation from array recordings.
//!
//! Exit status:
//!
//! | code | meaning                                    |
//! |------|--------------------------------------------|
//! | 0    | success                                    |
//! | 2    | usage or configuration error               |
//! | 3    | file or audio I/O error                    |
//! | 4    | channel count does not match the geometry  |
//! | 5    | sample rate mismatch                       |
//! | 6    | voice activity detection found too little  |
//! | 7    | beamspace degenerate (e.g. one microphone) |
//! | 8    | DRR undefined (no usable bins/reverb)      |

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beamspace_drr::drr::{fit_calibration, Calibration};
use beamspace_drr::error::{Error, ErrorClass, Result};
use beamspace_drr::eval::{evaluate, load_manifest, read_pairs, CalibrationMode};
use beamspace_drr::exec::Execution;
use beamspace_drr::geometry::SolidAngle;
use beamspace_drr::io::{
    active_segments, load_toml, parse_angle, read_wav, resolve_geometry, to_toml, write_wav, GeometryFile, Sidecar,
};
use beamspace_drr::pipeline::{estimate, EstimateReport, EstimatorConfig};
use beamspace_drr::psd_estimation::Method;
use beamspace_drr::stft::Window;
use beamspace_drr::synth::{synthesize_scene, synthesize_with_source, SceneSpec};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "drr", version, about = "Blind DRR estimation with beamspace PSD estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the DRR of a multichannel WAV recording.
    Estimate(EstimateArgs),
    /// Synthesise a scene with known DRR from a scene TOML file.
    Synth(SynthArgs),
    /// Evaluate the estimator over a manifest of recordings.
    Eval(EvalArgs),
    /// Fit a constant-bias calibration.
    Calibrate(CalibrateArgs),
}

/// Estimator settings shared by `estimate`, `eval` and `calibrate`.
#[derive(Args)]
struct EstimatorArgs {
    /// Base configuration (TOML); a previous report's `config` table works.
    #[arg(long)]
    config: Option<PathBuf>,
    /// beamspace | identical-beampattern
    #[arg(long)]
    method: Option<Method>,
    /// Lower edge of the DRR band, Hz.
    #[arg(long)]
    band_lo: Option<f64>,
    /// Upper edge of the DRR band, Hz.
    #[arg(long)]
    band_hi: Option<f64>,
    /// DOA grid azimuth step (radians, or e.g. `2.5deg`).
    #[arg(long, value_parser = angle)]
    grid_az_step: Option<f64>,
    /// DOA grid zenith step (radians, or e.g. `3deg`).
    #[arg(long, value_parser = angle)]
    grid_zen_step: Option<f64>,
    #[arg(long)]
    frame_size: Option<usize>,
    #[arg(long)]
    hop: Option<usize>,
    /// hann | rectangular
    #[arg(long, value_parser = window)]
    window: Option<Window>,
    /// Use every frame instead of voice-active frames.
    #[arg(long)]
    no_vad: bool,
    #[arg(long)]
    vad_margin_db: Option<f64>,
    #[arg(long)]
    cond_threshold: Option<f64>,
    /// Required input sample rate in Hz; 0 accepts any.
    #[arg(long)]
    sample_rate: Option<u32>,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
}

impl EstimatorArgs {
    fn resolve(&self) -> Result<EstimatorConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => EstimatorConfig::default(),
        };
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(lo) = self.band_lo {
            cfg.band_hz.0 = lo;
        }
        if let Some(hi) = self.band_hi {
            cfg.band_hz.1 = hi;
        }
        if let Some(s) = self.grid_az_step {
            cfg.grid.azimuth_step = s;
        }
        if let Some(s) = self.grid_zen_step {
            cfg.grid.zenith_step = s;
        }
        if let Some(n) = self.frame_size {
            cfg.stft.frame_size = n;
        }
        if let Some(h) = self.hop {
            cfg.stft.hop = h;
        }
        if let Some(w) = self.window {
            cfg.stft.window = w;
        }
        if self.no_vad {
            cfg.vad.enabled = false;
        }
        if let Some(m) = self.vad_margin_db {
            cfg.vad.margin_db = m;
        }
        if let Some(c) = self.cond_threshold {
            cfg.cond_threshold = c;
        }
        if let Some(sr) = self.sample_rate {
            cfg.sample_rate = (sr > 0).then_some(sr);
        }
        if self.sequential {
            cfg.execution = Execution::Sequential;
        }
        cfg.grid.validate()?;
        Ok(cfg)
    }
}

/// Accepts a bare config or a whole report, whose `config` table is used.
fn load_config(path: &Path) -> Result<EstimatorConfig> {
    #[derive(serde::Deserialize)]
    struct Wrapped {
        config: EstimatorConfig,
    }
    let text = std::fs::read_to_string(path)?;
    let cfg_err = |e: String| Error::Config {
        path: path.display().to_string(),
        message: e,
    };
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
    if table.contains_key("config") {
        let w: Wrapped = toml::from_str(&text).map_err(|e| cfg_err(e.to_string()))?;
        Ok(w.config)
    } else {
        toml::from_str(&text).map_err(|e| cfg_err(e.to_string()))
    }
}

fn angle(s: &str) -> std::result::Result<f64, String> {
    parse_angle(s).map_err(|e| e.to_string())
}

fn window(s: &str) -> std::result::Result<Window, String> {
    match s {
        "hann" => Ok(Window::Hann),
        "rectangular" => Ok(Window::Rectangular),
        other => Err(format!("unknown window '{other}'")),
    }
}

#[derive(Args)]
struct EstimateArgs {
    wav: PathBuf,
    /// `triangle` or a geometry TOML file.
    #[arg(long, default_value = "triangle")]
    geometry: String,
    /// Known source azimuth; bypasses the DOA search (requires --doa-zen).
    #[arg(long, value_parser = angle, requires = "doa_zen", allow_hyphen_values = true)]
    doa_az: Option<f64>,
    /// Known source zenith (requires --doa-az).
    #[arg(long, value_parser = angle, requires = "doa_az")]
    doa_zen: Option<f64>,
    /// Calibration TOML to apply.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Write per-bin diagnostics here.
    #[arg(long)]
    diagnostics_csv: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene description (TOML).
    scene: PathBuf,
    /// Output WAV (32-bit float).
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth sidecar; defaults to the WAV path with `.truth.toml`.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long, default_value = "triangle")]
    geometry: String,
    /// Overrides the scene's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Mono WAV used as the source signal instead of the generated one.
    #[arg(long)]
    source_wav: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct EvalArgs {
    manifest: PathBuf,
    /// Per-row results CSV.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Summary TOML; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fit the calibration on the `dev` split and apply it to the rest.
    #[arg(long, conflicts_with = "calibration")]
    fit_dev: bool,
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Manifest whose `dev` rows (all rows when none are marked) are
    /// estimated and fitted.
    #[arg(long, required_unless_present = "pairs", conflicts_with = "pairs")]
    manifest: Option<PathBuf>,
    /// CSV of `estimate_db,truth_db` pairs.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Calibration TOML to write; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run_estimate(args: EstimateArgs) -> Result<()> {
    let mut cfg = args.estimator.resolve()?;
    if let (Some(az), Some(zen)) = (args.doa_az, args.doa_zen) {
        cfg.doa = Some(SolidAngle::new(az, zen)?);
    }
    let geom = resolve_geometry(&args.geometry)?;
    let audio = read_wav(&args.wav)?;
    let cal = args.calibration.as_deref().map(Calibration::load).transpose()?;
    let sr = audio.sample_rate as f64;
    let est = estimate(&audio.channels, sr, &geom, &cfg, cal.as_ref())?;
    let mut report = EstimateReport::new(args.wav.display().to_string(), sr, &geom, &cfg, &est, cal.as_ref());
    if let Some(path) = &args.diagnostics_csv {
        est.write_diagnostics(File::create(path)?)?;
        report.diagnostics_csv = Some(path.display().to_string());
    }
    emit(&report.to_toml()?, args.out.as_deref())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let sidecar_path = args
        .sidecar
        .clone()
        .unwrap_or_else(|| args.out.with_extension("truth.toml"));
    for out in [&args.out, &sidecar_path] {
        if *out == args.scene {
            return Err(Error::InvalidArgument(format!(
                "{} would overwrite the scene file",
                out.display()
            )));
        }
    }
    let mut spec: SceneSpec = load_toml(&args.scene)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let geom = resolve_geometry(&args.geometry)?;
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let scene = match &args.source_wav {
        None => synthesize_scene(&spec, &geom, exec)?,
        Some(path) => {
            let audio = read_wav(path)?;
            if audio.channels.len() != 1 {
                return Err(Error::ChannelMismatch {
                    expected: 1,
                    got: audio.channels.len(),
                });
            }
            if audio.sample_rate != spec.sample_rate {
                return Err(Error::SampleRateMismatch {
                    expected: spec.sample_rate,
                    got: audio.sample_rate,
                });
            }
            synthesize_with_source(&spec, &geom, &audio.channels[0], exec)?
        }
    };
    write_wav(&args.out, &scene.channels, scene.sample_rate)?;
    let sidecar = Sidecar {
        wav: args.out.display().to_string(),
        truth: scene.truth.clone(),
        scene: spec,
        geometry: GeometryFile::from_geometry(&geom),
        active_segments: active_segments(&scene.activity, scene.sample_rate),
    };
    std::fs::write(sidecar_path, to_toml(&sidecar)?)?;
    Ok(())
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let cfg = args.estimator.resolve()?;
    let rows = load_manifest(&args.manifest)?;
    let mode = match (&args.calibration, args.fit_dev) {
        (Some(p), _) => CalibrationMode::Fixed(Calibration::load(p)?),
        (None, true) => CalibrationMode::FitOnDev,
        (None, false) => CalibrationMode::None,
    };
    let report = evaluate(&rows, &manifest_dir(&args.manifest), &cfg, &mode, cfg.execution)?;
    if let Some(p) = &args.out_csv {
        report.write_rows_csv(File::create(p)?)?;
    }
    for f in &report.summary.failures {
        eprintln!("warning: {f}");
    }
    emit(&to_toml(&report.summary)?, args.out.as_deref())
}

fn run_calibrate(args: CalibrateArgs) -> Result<()> {
    let pairs = match (&args.pairs, &args.manifest) {
        (Some(p), _) => read_pairs(File::open(p)?)?,
        (None, Some(m)) => {
            let cfg = args.estimator.resolve()?;
            let mut rows = load_manifest(m)?;
            if rows.iter().any(|r| r.split.trim().eq_ignore_ascii_case("dev")) {
                rows.retain(|r| r.split.trim().eq_ignore_ascii_case("dev"));
            }
            let report = evaluate(&rows, &manifest_dir(m), &cfg, &CalibrationMode::None, cfg.execution)?;
            for f in &report.summary.failures {
                eprintln!("warning: {f}");
            }
            report
                .rows
                .iter()
                .filter_map(|r| r.raw_db.map(|e| (e, r.truth_drr_db)))
                .collect()
        }
        (None, None) => unreachable!("clap enforces one source"),
    };
    let cal = fit_calibration(&pairs)?;
    emit(&cal.to_toml(), args.out.as_deref())
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 2,
        ErrorClass::Io => 3,
        ErrorClass::ChannelMismatch => 4,
        ErrorClass::SampleRateMismatch => 5,
        ErrorClass::Vad => 6,
        ErrorClass::Degenerate => 7,
        ErrorClass::Undefined => 8,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Synth(a) => run_synth(a),
        Command::Eval(a) => run_eval(a),
        Command::Calibrate(a) => run_calibrate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

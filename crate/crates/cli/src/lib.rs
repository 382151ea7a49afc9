//! Command-line front end: argument definitions and the four subcommands.

pub mod io;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use circmodal::bandwidth::{bootstrap_ise, fit_mixture_pilot, select_by_cv, BandwidthGrid, PilotConfig};
use circmodal::simulate::{draw, oracle_multifunction, SimModel};
use circmodal::{
    default_mesh, empirical_global_error, fit_multifunction, pointwise_error, Bandwidths, Error, Geometry,
    Initialization, MeanShiftConfig, ModalMultifunction, RegressionSample,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::{FitHeader, Format};

/// A mistake in how the program was invoked, as opposed to a failure while running.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "circmodal", version, about = "Multimodal regression for circular data")]
pub struct Cli {
    /// Upper bound on worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the modal regression multifunction on a mesh.
    Fit(FitArgs),
    /// Choose the smoothing pair on a grid by cross-validation or bootstrap.
    Select(SelectArgs),
    /// Draw a sample from a model file, optionally with its true modes.
    Simulate(SimulateArgs),
    /// Compare a fitted multifunction with reference modes.
    Evaluate(EvaluateArgs),
}

/// Smoothing for each margin: κ for an angular response (and predictor, in
/// circ-lin), h for a real margin, ν for the predictor of circ-circ data.
#[derive(Debug, Args, Clone, Default)]
pub struct SmoothingArgs {
    /// Von Mises concentration (angular response; also the predictor in circ-lin).
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Gaussian bandwidth for the real margin.
    #[arg(long)]
    pub h: Option<f64>,
    /// Predictor concentration for circ-circ data.
    #[arg(long)]
    pub nu: Option<f64>,
}

impl SmoothingArgs {
    fn bandwidths(&self, geometry: Geometry) -> Result<Bandwidths> {
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| usage(format!("{geometry} data needs --{flag}")));
        let (predictor, response) = match geometry {
            Geometry::CircLin => (need(self.kappa, "kappa")?, need(self.h, "h")?),
            Geometry::LinCirc => (need(self.h, "h")?, need(self.kappa, "kappa")?),
            Geometry::CircCirc => (need(self.nu, "nu")?, need(self.kappa, "kappa")?),
        };
        Bandwidths::new(predictor, response).map_err(|e| usage(e.to_string()))
    }
}

#[derive(Debug, Args, Clone)]
pub struct MeshArgs {
    /// Number of equally spaced mesh points.
    #[arg(long, default_value_t = 128)]
    pub mesh: usize,
    /// Explicit mesh values; overrides --mesh.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mesh_values: Option<Vec<f64>>,
}

impl MeshArgs {
    fn resolve(&self, sample: &RegressionSample) -> Result<Vec<f64>> {
        match &self.mesh_values {
            Some(v) if v.is_empty() => Err(usage("--mesh-values is empty")),
            Some(v) => Ok(v.clone()),
            None if self.mesh == 0 => Err(usage("--mesh must be at least 1")),
            None => Ok(default_mesh(sample, self.mesh)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    /// Start from responses of the nearest predictors.
    Local,
    /// Start from every response in the sample.
    Sample,
}

#[derive(Debug, Args, Clone)]
pub struct MeanShiftArgs {
    /// Iteration cap per mean-shift run; runs that hit it are discarded.
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Stop once a step is shorter than this (radians for angles).
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Merge radius for duplicate modes (|·| for real, 1 − cos for angular responses).
    #[arg(long)]
    pub merge_tol: Option<f64>,
    /// Starting responses for the mean-shift runs.
    #[arg(long, value_enum, default_value_t = InitArg::Local)]
    pub init: InitArg,
    /// Number of nearest predictors whose responses seed the search (local init).
    #[arg(long, default_value_t = 10)]
    pub neighbors: usize,
}

impl MeanShiftArgs {
    fn config(&self) -> Result<MeanShiftConfig> {
        let cfg = MeanShiftConfig {
            max_iter: self.max_iter,
            tol_step: self.tol,
            merge_tol: self.merge_tol,
            init: match self.init {
                InitArg::Local => Initialization::Local {
                    neighbors: self.neighbors,
                },
                InitArg::Sample => Initialization::WholeSample,
            },
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sample file (two columns with a `# geometry=… n=…` header).
    #[arg(long)]
    pub input: PathBuf,
    /// Expected geometry; must match the file header.
    #[arg(long)]
    pub geometry: Option<Geometry>,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    pub mean_shift: MeanShiftArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Cv,
    Bootstrap,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Sample file (two columns with a `# geometry=… n=…` header).
    #[arg(long)]
    pub input: PathBuf,
    /// Expected geometry; must match the file header.
    #[arg(long)]
    pub geometry: Option<Geometry>,
    /// Selection criterion; bootstrap needs circ-lin data.
    #[arg(long, value_enum, default_value_t = Method::Cv)]
    pub method: Method,
    /// Concentration grid for angular margins.
    #[arg(long, value_delimiter = ',')]
    pub grid_kappa: Option<Vec<f64>>,
    /// Bandwidth grid for real margins.
    #[arg(long, value_delimiter = ',')]
    pub grid_h: Option<Vec<f64>>,
    /// Predictor concentration grid for circ-circ data.
    #[arg(long, value_delimiter = ',')]
    pub grid_nu: Option<Vec<f64>>,
    /// Bootstrap resamples.
    #[arg(long = "boot-B", default_value_t = 100)]
    pub boot_b: usize,
    /// Mixture components tried by the bootstrap pilot.
    #[arg(long, default_value_t = 4)]
    pub pilot_components: usize,
    /// Seed for the pilot fit and the bootstrap resamples.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub mean_shift: MeanShiftArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model definition (TOML).
    #[arg(long)]
    pub model: PathBuf,
    /// Expected geometry; must match the model file.
    #[arg(long)]
    pub geometry: Option<Geometry>,
    /// Sample size.
    #[arg(long, short = 'n')]
    pub n: usize,
    /// Random seed; the same seed gives the same sample.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the true modes on the mesh to this file.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Response grid size used to locate the true modes.
    #[arg(long, default_value_t = 4096)]
    pub grid_size: usize,
    /// Format of the oracle file.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Fitted multifunction file.
    #[arg(long)]
    pub input: PathBuf,
    /// Reference multifunction file on the same mesh.
    #[arg(long)]
    pub oracle: PathBuf,
    /// Expected geometry; must match both files.
    #[arg(long)]
    pub geometry: Option<Geometry>,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Select(args) => cmd_select(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
    }
}

fn check_geometry(expected: Option<Geometry>, found: Geometry, path: &Path) -> Result<()> {
    match expected {
        Some(g) if g != found => Err(anyhow!(
            "--geometry {g} does not match the {found} header of {}",
            path.display()
        )),
        _ => Ok(()),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let sample = io::read_sample(&args.input)?;
    check_geometry(args.geometry, sample.geometry(), &args.input)?;
    let bw = args.smoothing.bandwidths(sample.geometry())?;
    let cfg = args.mean_shift.config()?;
    let mesh = args.mesh.resolve(&sample)?;
    let mf = fit_multifunction(&sample, bw, &mesh, &cfg)?;
    for (i, w) in mf.warnings() {
        log::warn!("mesh point {i} ({}): {w}", mf.mesh()[*i]);
    }
    let header = FitHeader {
        n: Some(sample.len()),
        bandwidths: Some(bw),
        source: None,
    };
    let mut out = open_output(args.output.output.as_deref())?;
    io::write_multifunction(&mut out, &mf, &header, args.output.format)?;
    out.flush()?;
    Ok(())
}

fn grid_for(args: &SelectArgs, sample: &RegressionSample) -> Result<BandwidthGrid> {
    let g = sample.geometry();
    let (predictor, response) = match g {
        Geometry::CircLin => (&args.grid_kappa, &args.grid_h),
        Geometry::LinCirc => (&args.grid_h, &args.grid_kappa),
        Geometry::CircCirc => (&args.grid_nu, &args.grid_kappa),
    };
    let default = BandwidthGrid::default_for(sample)?;
    let predictor = predictor.clone().unwrap_or_else(|| default.predictor_values().to_vec());
    let response = response.clone().unwrap_or_else(|| default.response_values().to_vec());
    BandwidthGrid::new(predictor, response).map_err(|e| usage(e.to_string()))
}

pub fn cmd_select(args: &SelectArgs) -> Result<()> {
    let sample = io::read_sample(&args.input)?;
    check_geometry(args.geometry, sample.geometry(), &args.input)?;
    if args.method == Method::Bootstrap && sample.geometry() != Geometry::CircLin {
        return Err(Error::Unsupported(format!(
            "bootstrap selection is implemented for circ-lin data only (got {}); use --method cv",
            sample.geometry()
        ))
        .into());
    }
    let grid = grid_for(args, &sample)?;
    let cfg = args.mean_shift.config()?;
    let (name, selection) = match args.method {
        Method::Cv => ("cv", select_by_cv(&sample, &grid, &cfg)?),
        Method::Bootstrap => {
            if args.boot_b == 0 {
                return Err(usage("--boot-B must be at least 1"));
            }
            let pilot_cfg = PilotConfig {
                max_components: args.pilot_components,
                seed: args.seed,
                ..PilotConfig::default()
            };
            let pilot = fit_mixture_pilot(&sample, &pilot_cfg)?;
            log::info!(
                "pilot: {} component(s), BIC {:.3}",
                pilot.components().len(),
                pilot.bic()
            );
            (
                "bootstrap",
                bootstrap_ise(&sample, &grid, &pilot, args.boot_b, &cfg, args.seed)?,
            )
        }
    };
    let mut out = open_output(args.output.output.as_deref())?;
    io::write_selection(&mut out, &sample, name, &selection, args.output.format)?;
    out.flush()?;
    Ok(())
}

/// Loads a TOML model definition.
pub fn load_model(path: &Path) -> Result<SimModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let model: SimModel = toml::from_str(&text).with_context(|| format!("{}: invalid model", path.display()))?;
    model
        .validate()
        .with_context(|| format!("{}: invalid model", path.display()))?;
    Ok(model)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    check_geometry(args.geometry, model.geometry, &args.model)?;
    if args.n == 0 {
        return Err(usage("-n must be at least 1"));
    }
    let sample = draw(&model, args.n, args.seed)?;
    let mut out = open_output(args.output.as_deref())?;
    io::write_sample(&mut out, &sample)?;
    out.flush()?;

    if let Some(path) = &args.oracle {
        let mesh = args.mesh.resolve(&sample)?;
        let truth = oracle_multifunction(&model, &mesh, args.grid_size)?;
        let header = FitHeader {
            n: None,
            bandwidths: None,
            source: Some("oracle".into()),
        };
        let mut out = open_output(Some(path))?;
        io::write_multifunction(&mut out, &truth, &header, args.format)?;
        out.flush()?;
    }
    Ok(())
}

/// Pointwise errors (`None` where a branch set is empty) and their mesh average.
pub fn evaluate(
    truth: &ModalMultifunction,
    fitted: &ModalMultifunction,
) -> Result<(Vec<Option<f64>>, Option<circmodal::GlobalError>)> {
    if truth.geometry() != fitted.geometry() {
        return Err(anyhow!(
            "geometry mismatch: oracle is {}, fit is {}",
            truth.geometry(),
            fitted.geometry()
        ));
    }
    if let Some(i) = (0..truth.len().min(fitted.len())).find(|&i| truth.mesh()[i] != fitted.mesh()[i]) {
        return Err(anyhow!(
            "mesh mismatch at point {i}: fit has {}, oracle has {}",
            fitted.mesh()[i],
            truth.mesh()[i]
        ));
    }
    if truth.len() != fitted.len() {
        let i = truth.len().min(fitted.len());
        let extra = truth
            .mesh()
            .get(i)
            .or(fitted.mesh().get(i))
            .copied()
            .unwrap_or(f64::NAN);
        return Err(anyhow!(
            "mesh mismatch at point {i}: fit has {} points, oracle has {}; first unmatched value {extra}",
            fitted.len(),
            truth.len()
        ));
    }
    let pointwise = (0..truth.len())
        .map(|i| match pointwise_error(truth, fitted, i) {
            Ok(e) => Ok(Some(e)),
            Err(Error::UndefinedDistance { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<circmodal::Result<Vec<_>>>()?;
    let global = match empirical_global_error(truth, fitted) {
        Ok(g) => Some(g),
        Err(Error::UndefinedDistance { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    Ok((pointwise, global))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let fitted = io::read_multifunction(&args.input)?;
    let truth = io::read_multifunction(&args.oracle)?;
    check_geometry(args.geometry, fitted.geometry(), &args.input)?;
    let (pointwise, global) = evaluate(&truth, &fitted)?;
    let undefined = pointwise.iter().filter(|e| e.is_none()).count();
    if undefined > 0 {
        log::warn!("{undefined} mesh point(s) have an empty branch set and are excluded");
    }
    let mut out = open_output(args.output.output.as_deref())?;
    io::write_evaluation(&mut out, &fitted, &pointwise, global, args.output.format)?;
    out.flush()?;
    Ok(())
}

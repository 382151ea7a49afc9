//! Conditional mean shift for real responses and circular conditional mean
//! shift for angular responses, plus mesh-wide fitting of the modal
//! regression multifunction.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circular::{wrap_radians, Angle};
use crate::density::{
    predictor_distance, response_distance, Bandwidths, ConditionalDensity, ConditionalSlice, Geometry, RegressionSample,
};
use crate::error::{Error, Result};

/// How starting responses are chosen at each mesh point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// Responses of the `neighbors` observations whose predictors are closest.
    Local { neighbors: usize },
    /// Every response in the sample.
    WholeSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftConfig {
    pub max_iter: usize,
    /// Convergence threshold on the step length (radians for angles).
    pub tol_step: f64,
    /// Dedup radius in the response metric (|·|, or 1 − cos for angles).
    /// `None` selects h/10 for real responses and 0.1/κ for angles.
    pub merge_tol: Option<f64>,
    pub init: Initialization,
}

impl Default for MeanShiftConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol_step: 1e-8,
            merge_tol: None,
            init: Initialization::Local { neighbors: 10 },
        }
    }
}

impl MeanShiftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.tol_step > 0.0 && self.tol_step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tol_step must be positive, got {}",
                self.tol_step
            )));
        }
        if let Initialization::Local { neighbors: 0 } = self.init {
            return Err(Error::InvalidArgument("init neighbors must be at least 1".into()));
        }
        if let Some(m) = self.merge_tol {
            if !(m >= self.tol_step && m.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "merge_tol {m} must be finite and at least tol_step {}",
                    self.tol_step
                )));
            }
        }
        Ok(())
    }

    /// The effective merge radius for the given geometry and smoothing.
    pub fn merge_tolerance(&self, geometry: Geometry, bandwidths: Bandwidths) -> Result<f64> {
        self.validate()?;
        let m = self.merge_tol.unwrap_or(if geometry.response_is_circular() {
            0.1 / bandwidths.response
        } else {
            bandwidths.response / 10.0
        });
        if m < self.tol_step {
            return Err(Error::InvalidArgument(format!(
                "merge tolerance {m} is below tol_step {}",
                self.tol_step
            )));
        }
        Ok(m)
    }
}

/// Result of one fixed-point run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub mode: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// ω(y) at predictor `predictor` for a circ-lin estimate.
pub fn shift_step_linear(est: &ConditionalDensity, predictor: f64, y: f64) -> Result<f64> {
    est.at(predictor)?.shift_linear(y)
}

/// ω̃(φ) at predictor `predictor` for a circular-response estimate.
pub fn shift_step_circular(est: &ConditionalDensity, predictor: f64, phi: Angle) -> Result<Angle> {
    est.at(predictor)?.shift_circular(phi.radians())
}

/// Iterates the appropriate shift map from `start` until the step falls
/// below `cfg.tol_step` or `cfg.max_iter` steps have been taken.
pub fn run_fixed_point(
    est: &ConditionalDensity,
    predictor: f64,
    start: f64,
    cfg: &MeanShiftConfig,
) -> Result<FixedPoint> {
    cfg.validate()?;
    iterate(&est.at(predictor)?, start, cfg, None)
}

/// [`run_fixed_point`] on a frozen predictor slice.
pub fn run_on_slice(slice: &ConditionalSlice<'_>, start: f64, cfg: &MeanShiftConfig) -> Result<FixedPoint> {
    iterate(slice, start, cfg, None)
}

/// Like [`run_on_slice`], also returning every iterate starting with `start`.
pub fn trace_on_slice(
    slice: &ConditionalSlice<'_>,
    start: f64,
    cfg: &MeanShiftConfig,
) -> Result<(FixedPoint, Vec<f64>)> {
    let mut path = Vec::new();
    let fp = iterate(slice, start, cfg, Some(&mut path))?;
    Ok((fp, path))
}

fn iterate(
    slice: &ConditionalSlice<'_>,
    start: f64,
    cfg: &MeanShiftConfig,
    path: Option<&mut Vec<f64>>,
) -> Result<FixedPoint> {
    iterate_with_capture(slice, start, cfg, path, |_| false).map(|(fp, _)| fp)
}

/// Runs the fixed-point iteration; stops early (returning `true`) as soon as
/// `captured` accepts an iterate.
fn iterate_with_capture(
    slice: &ConditionalSlice<'_>,
    start: f64,
    cfg: &MeanShiftConfig,
    mut path: Option<&mut Vec<f64>>,
    captured: impl Fn(f64) -> bool,
) -> Result<(FixedPoint, bool)> {
    if !start.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite start {start}")));
    }
    let circular = slice.geometry().response_is_circular();
    let mut current = if circular { wrap_radians(start) } else { start };
    if let Some(p) = path.as_deref_mut() {
        p.push(current);
    }
    for iteration in 1..=cfg.max_iter {
        let next = if circular {
            slice.shift_circular(current).map(Angle::radians)
        } else {
            slice.shift_linear(current)
        }
        .map_err(|e| Error::Iterate {
            iteration,
            source: Box::new(e),
        })?;
        let step = if circular {
            wrap_radians(next - current).abs()
        } else {
            (next - current).abs()
        };
        current = next;
        if let Some(p) = path.as_deref_mut() {
            p.push(current);
        }
        if step < cfg.tol_step {
            let fp = FixedPoint {
                mode: current,
                iterations: iteration,
                converged: true,
            };
            return Ok((fp, false));
        }
        if captured(current) {
            let fp = FixedPoint {
                mode: current,
                iterations: iteration,
                converged: false,
            };
            return Ok((fp, true));
        }
    }
    let fp = FixedPoint {
        mode: current,
        iterations: cfg.max_iter,
        converged: false,
    };
    Ok((fp, false))
}

/// One estimated conditional mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub mode: f64,
    /// Estimated conditional density at the mode.
    pub density: f64,
    pub iterations: usize,
}

/// Conditional modes found at a single predictor value.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFit {
    pub branches: Vec<Branch>,
    pub warning: Option<String>,
}

/// The estimated regression multifunction on a mesh of predictor values.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalMultifunction {
    geometry: Geometry,
    mesh: Vec<f64>,
    branches: Vec<Vec<Branch>>,
    warnings: Vec<(usize, String)>,
}

impl ModalMultifunction {
    /// Assembles a multifunction from per-mesh-point branch sets.
    pub fn from_parts(geometry: Geometry, mesh: Vec<f64>, branches: Vec<Vec<Branch>>) -> Result<Self> {
        if mesh.len() != branches.len() {
            return Err(Error::InvalidArgument(format!(
                "mesh has {} points but {} branch sets were given",
                mesh.len(),
                branches.len()
            )));
        }
        Ok(Self {
            geometry,
            mesh,
            branches,
            warnings: Vec::new(),
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn len(&self) -> usize {
        self.mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.is_empty()
    }

    pub fn branches(&self, index: usize) -> &[Branch] {
        &self.branches[index]
    }

    pub fn all_branches(&self) -> &[Vec<Branch>] {
        &self.branches
    }

    /// Mode values at mesh point `index`.
    pub fn modes(&self, index: usize) -> Vec<f64> {
        self.branches[index].iter().map(|b| b.mode).collect()
    }

    pub fn mode_counts(&self) -> Vec<usize> {
        self.branches.iter().map(Vec::len).collect()
    }

    /// Per-mesh-point warnings (index, message), e.g. empty branch sets.
    pub fn warnings(&self) -> &[(usize, String)] {
        &self.warnings
    }
}

/// Equally spaced mesh: on (−π, π] for angular predictors, over the observed
/// range for real ones.
pub fn default_mesh(sample: &RegressionSample, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("mesh needs at least one point".into()));
    }
    if sample.geometry().predictor_is_circular() {
        Ok((1..=count).map(|i| -PI + TAU * i as f64 / count as f64).collect())
    } else {
        let (lo, hi) = sample
            .predictors()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        if count == 1 {
            return Ok(vec![0.5 * (lo + hi)]);
        }
        let step = (hi - lo) / (count - 1) as f64;
        Ok((0..count)
            .map(|i| if i + 1 == count { hi } else { lo + step * i as f64 })
            .collect())
    }
}

/// Fits the modal regression multifunction on `mesh`.
///
/// Mesh points are processed in parallel on the current rayon pool; the
/// result does not depend on scheduling.
pub fn fit_multifunction(
    sample: &RegressionSample,
    bandwidths: Bandwidths,
    mesh: &[f64],
    cfg: &MeanShiftConfig,
) -> Result<ModalMultifunction> {
    if mesh.is_empty() {
        return Err(Error::InvalidArgument("mesh is empty".into()));
    }
    if let Some(x) = mesh.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite mesh point {x}")));
    }
    let est = ConditionalDensity::new(sample.clone(), bandwidths)?;
    let merge_tol = cfg.merge_tolerance(sample.geometry(), bandwidths)?;
    let fits: Vec<PointFit> = mesh
        .par_iter()
        .map(|&delta| fit_point_with(&est, delta, cfg, merge_tol))
        .collect::<Result<_>>()?;

    let mesh = if sample.geometry().predictor_is_circular() {
        mesh.iter().map(|&x| wrap_radians(x)).collect()
    } else {
        mesh.to_vec()
    };
    let mut branches = Vec::with_capacity(fits.len());
    let mut warnings = Vec::new();
    for (i, fit) in fits.into_iter().enumerate() {
        if let Some(w) = fit.warning {
            warnings.push((i, w));
        }
        branches.push(fit.branches);
    }
    Ok(ModalMultifunction {
        geometry: sample.geometry(),
        mesh,
        branches,
        warnings,
    })
}

/// Conditional modes at a single predictor value.
pub fn fit_point(est: &ConditionalDensity, predictor: f64, cfg: &MeanShiftConfig) -> Result<PointFit> {
    let merge_tol = cfg.merge_tolerance(est.geometry(), est.bandwidths())?;
    fit_point_with(est, predictor, cfg, merge_tol)
}

fn fit_point_with(est: &ConditionalDensity, predictor: f64, cfg: &MeanShiftConfig, merge_tol: f64) -> Result<PointFit> {
    let slice = match est.at(predictor) {
        Ok(s) => s,
        Err(e @ Error::LowSupport { .. }) => {
            return Ok(PointFit {
                branches: Vec::new(),
                warning: Some(e.to_string()),
            })
        }
        Err(e) => return Err(e),
    };
    let geometry = est.geometry();
    let starts = starting_responses(est.sample(), predictor, cfg.init);

    // A run that comes within about a hundredth of the response scale of an
    // accepted mode would end on it; it is abandoned rather than iterated to
    // convergence and merged away. (merge_tol is in 1 − cos units for angles.)
    let capture = if geometry.response_is_circular() {
        1e-3 * merge_tol
    } else {
        0.1 * merge_tol
    };
    let mut candidates: Vec<Branch> = Vec::with_capacity(starts.len());
    for start in starts {
        let found = &candidates;
        let near_known = |y: f64| found.iter().any(|b| response_distance(geometry, b.mode, y) < capture);
        let fp = match iterate_with_capture(&slice, start, cfg, None, near_known) {
            Ok((_, true)) => continue,
            Ok((fp, false)) => fp,
            Err(Error::Iterate { .. }) => continue,
            Err(e) => return Err(e),
        };
        // Non-converged runs and non-maxima (antimodes, saddles) are dropped.
        if !fp.converged || !(slice.derivative(fp.mode, 2) < 0.0) {
            continue;
        }
        candidates.push(Branch {
            mode: fp.mode,
            density: slice.density(fp.mode),
            iterations: fp.iterations,
        });
    }

    candidates.sort_by(|a, b| b.density.total_cmp(&a.density).then(a.mode.total_cmp(&b.mode)));
    let mut kept: Vec<Branch> = Vec::new();
    for c in candidates {
        if kept
            .iter()
            .all(|k| response_distance(geometry, k.mode, c.mode) > merge_tol)
        {
            kept.push(c);
        }
    }
    kept.sort_by(|a, b| a.mode.total_cmp(&b.mode));

    let warning = kept
        .is_empty()
        .then(|| format!("no conditional mode survived at predictor {predictor}"));
    Ok(PointFit {
        branches: kept,
        warning,
    })
}

/// Starting responses for the mean-shift runs at `predictor`, deduplicated.
pub(crate) fn starting_responses(sample: &RegressionSample, predictor: f64, init: Initialization) -> Vec<f64> {
    let responses = sample.responses();
    let mut starts: Vec<f64> = match init {
        Initialization::WholeSample => responses.to_vec(),
        Initialization::Local { neighbors } => {
            let g = sample.geometry();
            let mut order: Vec<(f64, usize)> = sample
                .predictors()
                .iter()
                .enumerate()
                .map(|(j, &x)| (predictor_distance(g, predictor, x), j))
                .collect();
            let p = neighbors.min(order.len());
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if p < order.len() {
                order.select_nth_unstable_by(p, cmp);
                order.truncate(p);
            }
            order.sort_by(cmp);
            order.into_iter().map(|(_, j)| responses[j]).collect()
        }
    };
    let mut seen: Vec<f64> = Vec::with_capacity(starts.len());
    starts.retain(|s| {
        if seen.contains(s) {
            false
        } else {
            seen.push(*s);
            true
        }
    });
    starts
}

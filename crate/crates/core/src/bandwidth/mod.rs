//! Data-driven choice of the smoothing pair.
//!
//! Modal cross-validation works for every geometry. The parametric
//! bootstrap, which targets the integrated squared Hausdorff error against a
//! fitted mixture-of-regressions pilot, is available for circ-lin data only.

mod bootstrap;
mod pilot;

pub use bootstrap::{bootstrap_ise, bootstrap_ise_with_truth};
pub use pilot::{fit_mixture_pilot, MixturePilot, PeriodicBSplineBasis, PilotComponent, PilotConfig};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{Bandwidths, ConditionalDensity, Geometry, RegressionSample};
use crate::error::{Error, Result};
use crate::meanshift::{fit_point, MeanShiftConfig};
use crate::metrics::{distance_to_set, empty_set_penalty};
use crate::sum::sum;

/// Concentrations searched by default for angular axes.
pub const DEFAULT_CONCENTRATIONS: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0];

/// Candidate values for each smoothing parameter; the search space is their product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthGrid {
    predictor_values: Vec<f64>,
    response_values: Vec<f64>,
}

impl BandwidthGrid {
    pub fn new(predictor_values: Vec<f64>, response_values: Vec<f64>) -> Result<Self> {
        for (name, values) in [("predictor", &predictor_values), ("response", &response_values)] {
            if values.is_empty() {
                return Err(Error::InvalidArgument(format!("{name} grid is empty")));
            }
            if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument(format!(
                    "{name} grid values must be positive and finite"
                )));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "{name} grid must be strictly increasing"
                )));
            }
        }
        Ok(Self {
            predictor_values,
            response_values,
        })
    }

    /// Concentrations {1, 2, 5, 10, 20, 40, 80} on angular axes and a
    /// 7-point logarithmic span of 0.05–1.0 × interquartile range on real axes.
    pub fn default_for(sample: &RegressionSample) -> Result<Self> {
        let g = sample.geometry();
        let axis = |circular: bool, values: &[f64]| -> Result<Vec<f64>> {
            if circular {
                return Ok(DEFAULT_CONCENTRATIONS.to_vec());
            }
            let spread = interquartile_range(values);
            if !(spread > 0.0) {
                return Err(Error::InvalidArgument(
                    "cannot build a default grid: zero interquartile range".into(),
                ));
            }
            Ok(log_span(0.05 * spread, spread, 7))
        };
        Self::new(
            axis(g.predictor_is_circular(), sample.predictors())?,
            axis(g.response_is_circular(), sample.responses())?,
        )
    }

    pub fn predictor_values(&self) -> &[f64] {
        &self.predictor_values
    }

    pub fn response_values(&self) -> &[f64] {
        &self.response_values
    }

    /// Every cell, predictor-major.
    pub fn cells(&self) -> Vec<Bandwidths> {
        self.predictor_values
            .iter()
            .flat_map(|&p| {
                self.response_values.iter().map(move |&r| Bandwidths {
                    predictor: p,
                    response: r,
                })
            })
            .collect()
    }

    /// (predictor index, response index) of `bw` in the grid.
    pub fn position(&self, bw: Bandwidths) -> Option<(usize, usize)> {
        let i = self.predictor_values.iter().position(|&v| v == bw.predictor)?;
        let j = self.response_values.iter().position(|&v| v == bw.response)?;
        Some((i, j))
    }
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_span(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Interquartile range with linear interpolation between order statistics.
pub fn interquartile_range(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    q(0.75) - q(0.25)
}

/// One evaluated grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub bandwidths: Bandwidths,
    pub score: f64,
}

/// The chosen pair together with every evaluated cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub bandwidths: Bandwidths,
    pub table: Vec<ScoreRow>,
}

impl Selection {
    /// Picks the minimum score; ties go to the smoother pair.
    pub(crate) fn from_table(geometry: Geometry, table: Vec<ScoreRow>) -> Result<Self> {
        let best = table
            .iter()
            .min_by(|a, b| {
                a.score
                    .total_cmp(&b.score)
                    .then_with(|| smoother_first(geometry, a.bandwidths, b.bandwidths))
            })
            .ok_or_else(|| Error::InvalidArgument("empty score table".into()))?;
        Ok(Self {
            bandwidths: best.bandwidths,
            table,
        })
    }
}

/// Orders the smoother pair first: smaller concentration on angular axes,
/// larger bandwidth on real axes; predictor axis before response axis.
fn smoother_first(geometry: Geometry, a: Bandwidths, b: Bandwidths) -> std::cmp::Ordering {
    let axis = |circular: bool, x: f64, y: f64| {
        if circular {
            x.total_cmp(&y)
        } else {
            y.total_cmp(&x)
        }
    };
    axis(geometry.predictor_is_circular(), a.predictor, b.predictor)
        .then_with(|| axis(geometry.response_is_circular(), a.response, b.response))
}

/// Leave-one-out modal cross-validation score.
///
/// For each observation i the multifunction is refitted without i at its
/// predictor; the squared distance (real response) or cosine dissimilarity
/// (angular response) from Yᵢ to the nearest branch is weighted by the
/// squared branch count. Empty branch sets contribute the metric penalty.
pub fn modal_cv_score(sample: &RegressionSample, bandwidths: Bandwidths, cfg: &MeanShiftConfig) -> Result<f64> {
    let n = sample.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    cfg.merge_tolerance(sample.geometry(), bandwidths)?;
    let circular = sample.geometry().response_is_circular();
    let penalty = empty_set_penalty(sample.geometry(), sample.responses());
    let terms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let est = ConditionalDensity::new(sample.without(i)?, bandwidths)?;
            let fit = fit_point(&est, sample.predictors()[i], cfg)?;
            let modes: Vec<f64> = fit.branches.iter().map(|b| b.mode).collect();
            Ok(match distance_to_set(sample.responses()[i], &modes, circular) {
                None => penalty,
                Some(d) => {
                    let count = modes.len() as f64;
                    let d = if circular { d } else { d * d };
                    d * count * count
                }
            })
        })
        .collect::<Result<_>>()?;
    Ok(sum(terms) / n as f64)
}

/// Exhaustive modal cross-validation over `grid`.
pub fn select_by_cv(sample: &RegressionSample, grid: &BandwidthGrid, cfg: &MeanShiftConfig) -> Result<Selection> {
    let table = grid
        .cells()
        .into_par_iter()
        .map(|bw| {
            Ok(ScoreRow {
                bandwidths: bw,
                score: modal_cv_score(sample, bw, cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Selection::from_table(sample.geometry(), table)
}

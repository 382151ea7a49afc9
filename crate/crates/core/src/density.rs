//! Kernel estimators of the conditional density of the response given the
//! predictor, for the three circular geometries.
//!
//! The estimate at predictor δ and response r is
//!
//! ```text
//! f̂(r | δ) = Σⱼ w_δ(Δⱼ) K(r − Rⱼ) / Σⱼ w_δ(Δⱼ)
//! ```
//!
//! where `w_δ` is the predictor kernel (von Mises for angles, Gaussian for
//! reals) and `K` the response kernel. [`ConditionalSlice`] freezes δ and
//! caches the predictor weights so repeated evaluations along a mean-shift
//! trajectory or a response grid cost O(n) each.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circular::{cos_dissimilarity, resultant_direction, wrap_radians, Angle};
use crate::error::{Error, Result};
use crate::kernels::{CircularKernel, LinearKernel};
use crate::sum::CompensatedSum;

/// Predictor marginal below which the conditional estimate is undefined.
pub const LOW_SUPPORT_THRESHOLD: f64 = 1e-10;

/// Predictor weights smaller than this fraction of the largest are dropped.
/// Their total contribution is below double-precision resolution.
const WEIGHT_CUTOFF: f64 = 1e-18;

/// Weight totals below this are recomputed relative to the largest term.
const UNDERFLOW_GUARD: f64 = 1e-200;

/// Half-width, in bandwidths, of the response window summed by linear shift steps.
const SHIFT_WINDOW: f64 = 10.0;

/// Which of predictor and response live on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    /// Circular predictor, real response.
    CircLin,
    /// Real predictor, circular response.
    LinCirc,
    /// Circular predictor, circular response.
    CircCirc,
}

impl Geometry {
    pub const ALL: [Geometry; 3] = [Geometry::CircLin, Geometry::LinCirc, Geometry::CircCirc];

    pub fn predictor_is_circular(self) -> bool {
        matches!(self, Geometry::CircLin | Geometry::CircCirc)
    }

    pub fn response_is_circular(self) -> bool {
        matches!(self, Geometry::LinCirc | Geometry::CircCirc)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Geometry::CircLin => "circ-lin",
            Geometry::LinCirc => "lin-circ",
            Geometry::CircCirc => "circ-circ",
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('_', "-").as_str() {
            "circ-lin" => Ok(Geometry::CircLin),
            "lin-circ" => Ok(Geometry::LinCirc),
            "circ-circ" => Ok(Geometry::CircCirc),
            other => Err(Error::InvalidArgument(format!(
                "unknown geometry '{other}' (expected circ-lin, lin-circ or circ-circ)"
            ))),
        }
    }
}

/// Paired (predictor, response) observations. Circular columns are stored
/// as radians wrapped to (−π, π].
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    geometry: Geometry,
    predictors: Vec<f64>,
    responses: Vec<f64>,
}

impl RegressionSample {
    /// Builds a sample, wrapping circular columns. Fails on mismatched or
    /// empty columns and non-finite values.
    pub fn new(geometry: Geometry, mut predictors: Vec<f64>, mut responses: Vec<f64>) -> Result<Self> {
        if predictors.is_empty() || predictors.len() != responses.len() {
            return Err(Error::InvalidArgument(format!(
                "need equal, non-zero column lengths; got {} predictors and {} responses",
                predictors.len(),
                responses.len()
            )));
        }
        for (j, (x, y)) in predictors.iter().zip(&responses).enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite value in observation {j}")));
            }
        }
        if geometry.predictor_is_circular() {
            predictors.iter_mut().for_each(|x| *x = wrap_radians(*x));
        }
        if geometry.response_is_circular() {
            responses.iter_mut().for_each(|y| *y = wrap_radians(*y));
        }
        Ok(Self {
            geometry,
            predictors,
            responses,
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn predictors(&self) -> &[f64] {
        &self.predictors
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.predictors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictors.is_empty()
    }

    /// The sample with observation `index` removed.
    pub fn without(&self, index: usize) -> Result<Self> {
        if self.len() < 2 || index >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot drop observation {index} from a sample of {}",
                self.len()
            )));
        }
        let mut predictors = self.predictors.clone();
        let mut responses = self.responses.clone();
        predictors.remove(index);
        responses.remove(index);
        Ok(Self {
            geometry: self.geometry,
            predictors,
            responses,
        })
    }

    /// The same predictors paired with new responses.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<Self> {
        Self::new(self.geometry, self.predictors.clone(), responses)
    }

    /// Distance between two predictor values: 1 − cos for angles, |·| otherwise.
    pub fn predictor_distance(&self, a: f64, b: f64) -> f64 {
        predictor_distance(self.geometry, a, b)
    }
}

pub(crate) fn predictor_distance(geometry: Geometry, a: f64, b: f64) -> f64 {
    if geometry.predictor_is_circular() {
        cos_dissimilarity(a - b)
    } else {
        (a - b).abs()
    }
}

/// Distance between two response values: 1 − cos for angles, |·| otherwise.
pub(crate) fn response_distance(geometry: Geometry, a: f64, b: f64) -> f64 {
    if geometry.response_is_circular() {
        cos_dissimilarity(a - b)
    } else {
        (a - b).abs()
    }
}

/// The smoothing pair. `predictor` is κ (or ν) for an angular predictor and
/// h for a real one; `response` is h for a real response and κ for an
/// angular one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub predictor: f64,
    pub response: f64,
}

impl Bandwidths {
    pub fn new(predictor: f64, response: f64) -> Result<Self> {
        for (name, v) in [("predictor", predictor), ("response", response)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} smoothing must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { predictor, response })
    }
}

#[derive(Debug, Clone, Copy)]
enum Smoother {
    Linear(LinearKernel),
    Circular(CircularKernel),
}

impl Smoother {
    fn for_axis(circular: bool, value: f64) -> Result<Self> {
        Ok(if circular {
            Smoother::Circular(CircularKernel::von_mises(value)?)
        } else {
            Smoother::Linear(LinearKernel::gaussian(value)?)
        })
    }

    /// Log of the unnormalized weight; the kernel value is `scale() · exp(log_weight)`.
    #[inline]
    fn log_weight(&self, d: f64) -> f64 {
        match self {
            Smoother::Linear(k) => {
                let z = d / k.bandwidth();
                -0.5 * z * z
            }
            Smoother::Circular(k) => -k.concentration() * cos_dissimilarity(d),
        }
    }

    #[inline]
    fn scale(&self) -> f64 {
        match self {
            Smoother::Linear(k) => k.eval(0.0),
            Smoother::Circular(k) => k.norm(),
        }
    }

    #[inline]
    fn eval(&self, d: f64) -> f64 {
        match self {
            Smoother::Linear(k) => k.eval(d),
            Smoother::Circular(k) => k.eval(d),
        }
    }

    #[inline]
    fn derivatives(&self, d: f64) -> (f64, f64) {
        match self {
            Smoother::Linear(k) => k.derivatives(d),
            Smoother::Circular(k) => k.derivatives(d),
        }
    }
}

/// Kernel estimate of the conditional density of the response given the predictor.
#[derive(Debug, Clone)]
pub struct ConditionalDensity {
    sample: RegressionSample,
    bandwidths: Bandwidths,
    predictor_kernel: Smoother,
    response_kernel: Smoother,
}

impl ConditionalDensity {
    pub fn new(sample: RegressionSample, bandwidths: Bandwidths) -> Result<Self> {
        let g = sample.geometry();
        let predictor_kernel = Smoother::for_axis(g.predictor_is_circular(), bandwidths.predictor)?;
        let response_kernel = Smoother::for_axis(g.response_is_circular(), bandwidths.response)?;
        Ok(Self {
            sample,
            bandwidths,
            predictor_kernel,
            response_kernel,
        })
    }

    pub fn sample(&self) -> &RegressionSample {
        &self.sample
    }

    pub fn bandwidths(&self) -> Bandwidths {
        self.bandwidths
    }

    pub fn geometry(&self) -> Geometry {
        self.sample.geometry()
    }

    /// Kernel density estimate of the predictor marginal at `predictor`.
    pub fn marginal_predictor(&self, predictor: f64) -> f64 {
        let k = &self.predictor_kernel;
        let total: CompensatedSum = self
            .sample
            .predictors()
            .iter()
            .map(|&x| k.eval(predictor - x))
            .collect();
        total.value() / self.sample.len() as f64
    }

    /// Freezes the predictor at `predictor`, failing with
    /// [`Error::LowSupport`] when its marginal is below [`LOW_SUPPORT_THRESHOLD`].
    pub fn at(&self, predictor: f64) -> Result<ConditionalSlice<'_>> {
        if !predictor.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite predictor {predictor}")));
        }
        let predictor = if self.geometry().predictor_is_circular() {
            wrap_radians(predictor)
        } else {
            predictor
        };
        let k = &self.predictor_kernel;
        let logs: Vec<f64> = self
            .sample
            .predictors()
            .iter()
            .map(|&x| k.log_weight(predictor - x))
            .collect();
        let max_log = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n = self.sample.len() as f64;
        let marginal = k.scale() * max_log.exp() * logs.iter().map(|l| (l - max_log).exp()).sum::<f64>() / n;
        if marginal.is_nan() || marginal < LOW_SUPPORT_THRESHOLD {
            return Err(Error::LowSupport { predictor, marginal });
        }

        let cutoff = WEIGHT_CUTOFF.ln();
        let mut kept: Vec<(f64, f64)> = logs
            .iter()
            .zip(self.sample.responses())
            .map(|(&l, &r)| (r, l - max_log))
            .filter(|&(_, rel)| rel >= cutoff)
            .collect();
        // Real responses are kept sorted so shift steps can sum a window.
        if !self.geometry().response_is_circular() {
            kept.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let (responses, log_weights): (Vec<f64>, Vec<f64>) = kept.into_iter().unzip();
        let total: CompensatedSum = log_weights.iter().map(|l| l.exp()).collect();
        let weights = log_weights.iter().map(|l| l.exp()).collect();
        let trig = if self.geometry().response_is_circular() {
            responses.iter().map(|r: &f64| r.sin_cos()).collect()
        } else {
            Vec::new()
        };
        Ok(ConditionalSlice {
            est: self,
            predictor,
            marginal,
            responses,
            log_weights,
            weights,
            weight_total: total.value(),
            trig,
        })
    }

    /// f̂(response | predictor).
    pub fn conditional_eval(&self, predictor: f64, response: f64) -> Result<f64> {
        Ok(self.at(predictor)?.density(response))
    }

    /// Closed-form first or second derivative of f̂(· | predictor) in the response.
    pub fn conditional_deriv(&self, predictor: f64, response: f64, order: u8) -> Result<f64> {
        if !(1..=2).contains(&order) {
            return Err(Error::InvalidArgument(format!(
                "derivative order must be 1 or 2, got {order}"
            )));
        }
        Ok(self.at(predictor)?.derivative(response, order))
    }
}

/// The conditional density at a fixed predictor value.
#[derive(Debug, Clone)]
pub struct ConditionalSlice<'a> {
    est: &'a ConditionalDensity,
    predictor: f64,
    marginal: f64,
    /// Responses with a non-negligible predictor weight.
    responses: Vec<f64>,
    /// Predictor log-weights relative to the largest one.
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    weight_total: f64,
    /// (sin, cos) of each retained response, circular responses only.
    trig: Vec<(f64, f64)>,
}

impl ConditionalSlice<'_> {
    pub fn predictor(&self) -> f64 {
        self.predictor
    }

    /// Kernel estimate of the predictor marginal at this predictor.
    pub fn marginal(&self) -> f64 {
        self.marginal
    }

    pub fn geometry(&self) -> Geometry {
        self.est.geometry()
    }

    pub fn estimate(&self) -> &ConditionalDensity {
        self.est
    }

    /// f̂(response | predictor).
    pub fn density(&self, response: f64) -> f64 {
        let k = &self.est.response_kernel;
        let num: CompensatedSum = self
            .weights
            .iter()
            .zip(&self.responses)
            .map(|(w, r)| w * k.eval(response - r))
            .collect();
        num.value() / self.weight_total
    }

    /// First (`order == 1`) or second derivative in the response.
    ///
    /// # Panics
    /// If `order` is not 1 or 2.
    pub fn derivative(&self, response: f64, order: u8) -> f64 {
        assert!(order == 1 || order == 2, "derivative order must be 1 or 2");
        let k = &self.est.response_kernel;
        let num: CompensatedSum = self
            .weights
            .iter()
            .zip(&self.responses)
            .map(|(w, r)| {
                let (d1, d2) = k.derivatives(response - r);
                w * if order == 1 { d1 } else { d2 }
            })
            .collect();
        num.value() / self.weight_total
    }

    /// ω(y): the response mean weighted by w_δ(Δⱼ)·G((y − Yⱼ)/h). Real responses only.
    pub fn shift_linear(&self, y: f64) -> Result<f64> {
        let h = match self.est.response_kernel {
            Smoother::Linear(k) => k.bandwidth(),
            Smoother::Circular(_) => {
                return Err(Error::GeometryMismatch {
                    expected: "a real response".into(),
                    found: self.geometry().to_string(),
                })
            }
        };
        let inv = 1.0 / h;
        let exponent = |lw: f64, r: f64| {
            let z = (y - r) * inv;
            lw - 0.5 * z * z
        };
        // Plain sums: the weights are positive, so the rounding error in ω is
        // about n·ε·max|Yⱼ|, far below any step tolerance.
        let weighted_mean = |range: std::ops::Range<usize>, top: f64| {
            let (mut num, mut den) = (0.0, 0.0);
            for (&lw, &r) in self.log_weights[range.clone()].iter().zip(&self.responses[range]) {
                let w = (exponent(lw, r) - top).exp();
                num += w * r;
                den += w;
            }
            (num, den)
        };
        // Responses further than WINDOW·h from y weigh at most exp(−WINDOW²/2)
        // each; they are skipped when their combined bound is negligible.
        let all = 0..self.responses.len();
        let lo = self.responses.partition_point(|&r| r < y - SHIFT_WINDOW * h);
        let hi = self.responses.partition_point(|&r| r <= y + SHIFT_WINDOW * h);
        let skipped = (all.len() - (hi - lo)) as f64;
        // The predictor log-weights are at most 0, so the unshifted weights
        // cannot overflow; rescale only when they underflow.
        let (mut num, mut den) = weighted_mean(lo..hi, 0.0);
        if skipped > 0.0 && !(den * 1e-15 > skipped * (-0.5 * SHIFT_WINDOW * SHIFT_WINDOW).exp()) {
            (num, den) = weighted_mean(all.clone(), 0.0);
        }
        if !(den > UNDERFLOW_GUARD) {
            let top = self
                .log_weights
                .iter()
                .zip(&self.responses)
                .map(|(&lw, &r)| exponent(lw, r))
                .fold(f64::NEG_INFINITY, f64::max);
            if !top.is_finite() {
                return Err(Error::DegenerateWeights);
            }
            (num, den) = weighted_mean(all, top);
        }
        if !(den > 0.0) {
            return Err(Error::DegenerateWeights);
        }
        Ok(num / den)
    }

    /// ω̃(φ) = atan2(S_δ(φ), C_δ(φ)) with weights w_δ(Δⱼ)·T(φ − Φⱼ). Circular responses only.
    pub fn shift_circular(&self, phi: f64) -> Result<Angle> {
        let kappa = match self.est.response_kernel {
            Smoother::Circular(k) => k.concentration(),
            Smoother::Linear(_) => {
                return Err(Error::GeometryMismatch {
                    expected: "a circular response".into(),
                    found: self.geometry().to_string(),
                })
            }
        };
        // cos(φ − Φⱼ) expanded through the cached sines and cosines of the responses.
        let (sp, cp) = phi.sin_cos();
        let exponent = |lw: f64, (sin, cos): (f64, f64)| lw + kappa * (cp * cos + sp * sin);
        let resultant = |top: f64| {
            let (mut s, mut c, mut largest) = (0.0, 0.0, 0.0_f64);
            for (&lw, &(sin, cos)) in self.log_weights.iter().zip(&self.trig) {
                let w = (exponent(lw, (sin, cos)) - top).exp();
                s += w * sin;
                c += w * cos;
                largest = largest.max(w);
            }
            (s, c, largest)
        };
        // Shifting by κ bounds every weight by 1; the sums are then rescaled
        // so the largest weight is exactly 1, which the degeneracy test assumes.
        let (mut s, mut c, mut largest) = resultant(kappa);
        if !(largest > UNDERFLOW_GUARD) {
            let top = self
                .log_weights
                .iter()
                .zip(&self.trig)
                .map(|(&lw, &t)| exponent(lw, t))
                .fold(f64::NEG_INFINITY, f64::max);
            if !top.is_finite() {
                return Err(Error::DegenerateDirection);
            }
            (s, c, largest) = resultant(top);
        }
        s /= largest;
        c /= largest;
        resultant_direction(s, c)
    }

    /// The mean-shift function at `r`: ω(y) − y, or sin(ω̃(φ) − φ) for angles.
    pub fn shift_residual(&self, r: f64) -> Result<f64> {
        if self.geometry().response_is_circular() {
            Ok((self.shift_circular(r)?.radians() - r).sin())
        } else {
            Ok(self.shift_linear(r)? - r)
        }
    }
}

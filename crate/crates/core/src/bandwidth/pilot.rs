//! Mixture-of-regressions pilot on a periodic cubic B-spline basis, fitted
//! by expectation–maximization with the component count chosen by BIC.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::circular::wrap_radians;
use crate::density::{Geometry, RegressionSample};
use crate::error::{Error, Result};
use crate::modes::{local_maxima, GridDomain};

/// Cubic B-splines on `size` equally spaced knots around the circle.
/// The functions are 2π-periodic and sum to one everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicBSplineBasis {
    size: usize,
}

impl PeriodicBSplineBasis {
    pub fn new(size: usize) -> Result<Self> {
        if size < 4 {
            return Err(Error::InvalidArgument(format!(
                "a periodic cubic basis needs at least 4 knots, got {size}"
            )));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Values of every basis function at `theta`.
    pub fn eval(&self, theta: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        self.eval_into(theta, &mut out);
        out
    }

    fn eval_into(&self, theta: f64, out: &mut [f64]) {
        let k = self.size as f64;
        let spacing = TAU / k;
        // Position in knot units from the first knot at −π, in [0, k).
        let u = ((wrap_radians(theta) + PI) / spacing).rem_euclid(k);
        let cell = (u.floor() as usize).min(self.size - 1);
        let t = u - cell as f64;
        out.fill(0.0);
        // Basis i is supported on knots [i, i + 4); at cell c the active
        // functions are c, c−1, c−2, c−3 with local offsets t, t+1, t+2, t+3.
        for (shift, value) in [
            (0, t * t * t / 6.0),
            (1, (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0),
            (2, (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0),
            (3, (1.0 - t).powi(3) / 6.0),
        ] {
            out[(cell + self.size - shift) % self.size] += value;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotComponent {
    pub weight: f64,
    /// Intercept followed by one coefficient per basis function.
    pub coefficients: Vec<f64>,
}

/// Parametric conditional density Σₜ πₜ N(y − βₜ·[1, b(θ)], σ²).
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePilot {
    basis: PeriodicBSplineBasis,
    components: Vec<PilotComponent>,
    variance: f64,
    log_likelihood: f64,
    bic: f64,
    /// (component count, BIC) for every count that produced a fit.
    bic_trace: Vec<(usize, f64)>,
}

impl MixturePilot {
    /// Builds a pilot from explicit parameters; the weights are checked to sum to one.
    pub fn new(basis: PeriodicBSplineBasis, components: Vec<PilotComponent>, variance: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("pilot needs at least one component".into()));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "pilot variance must be positive, got {variance}"
            )));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.iter().any(|c| c.weight < 0.0) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "pilot weights must be non-negative and sum to 1, got {total}"
            )));
        }
        if components.iter().any(|c| c.coefficients.len() != basis.size() + 1) {
            return Err(Error::InvalidArgument(format!(
                "each component needs {} coefficients",
                basis.size() + 1
            )));
        }
        Ok(Self {
            basis,
            components,
            variance,
            log_likelihood: f64::NAN,
            bic: f64::NAN,
            bic_trace: Vec::new(),
        })
    }

    pub fn basis(&self) -> PeriodicBSplineBasis {
        self.basis
    }

    pub fn components(&self) -> &[PilotComponent] {
        &self.components
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn bic(&self) -> f64 {
        self.bic
    }

    pub fn bic_trace(&self) -> &[(usize, f64)] {
        &self.bic_trace
    }

    /// Regression curve of each component at `theta`.
    pub fn means(&self, theta: f64) -> Vec<f64> {
        let b = self.basis.eval(theta);
        self.components
            .iter()
            .map(|c| component_mean(&c.coefficients, &b))
            .collect()
    }

    pub fn conditional_density(&self, theta: f64, y: f64) -> f64 {
        let norm = 1.0 / (TAU * self.variance).sqrt();
        self.means(theta)
            .iter()
            .zip(&self.components)
            .map(|(m, c)| c.weight * norm * (-(y - m) * (y - m) / (2.0 * self.variance)).exp())
            .sum()
    }

    /// Local maxima of the pilot conditional density at `theta`, from a
    /// 4096-point grid refined by golden-section search.
    pub fn modes(&self, theta: f64) -> Vec<f64> {
        let means = self.means(theta);
        let spread = 8.0 * self.variance.sqrt();
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min) - spread;
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max) + spread;
        let norm = 1.0 / (TAU * self.variance).sqrt();
        let density = |y: f64| -> f64 {
            means
                .iter()
                .zip(&self.components)
                .map(|(m, c)| c.weight * norm * (-(y - m) * (y - m) / (2.0 * self.variance)).exp())
                .sum()
        };
        local_maxima(density, GridDomain::Interval { lo, hi }, 4096)
    }

    /// One response drawn from the pilot conditional at `theta`.
    pub fn sample_response<R: Rng + ?Sized>(&self, rng: &mut R, theta: f64) -> f64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = self.components.len() - 1;
        for (t, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                chosen = t;
                break;
            }
        }
        let b = self.basis.eval(theta);
        component_mean(&self.components[chosen].coefficients, &b)
            + self.variance.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }
}

fn component_mean(coefficients: &[f64], basis: &[f64]) -> f64 {
    coefficients[0] + coefficients[1..].iter().zip(basis).map(|(c, b)| c * b).sum::<f64>()
}

/// Settings for [`fit_mixture_pilot`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotConfig {
    pub max_components: usize,
    pub basis_size: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the log-likelihood changes by less than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self {
            max_components: 4,
            basis_size: 8,
            restarts: 5,
            max_iter: 300,
            tol: 1e-8,
            seed: 0,
        }
    }
}

struct EmFit {
    components: Vec<PilotComponent>,
    variance: f64,
    log_likelihood: f64,
}

/// Fits mixtures with 1..=`max_components` components and keeps the one
/// with the smallest BIC = −2ℓ + (T(k+1) + T − 1 + 1) ln n.
pub fn fit_mixture_pilot(sample: &RegressionSample, cfg: &PilotConfig) -> Result<MixturePilot> {
    if sample.geometry() != Geometry::CircLin {
        return Err(Error::Unsupported(format!(
            "the mixture pilot models circ-lin data; got {}",
            sample.geometry()
        )));
    }
    let basis = PeriodicBSplineBasis::new(cfg.basis_size)?;
    let p = cfg.basis_size + 1;
    let n = sample.len();
    if n < 10 * p {
        return Err(Error::InsufficientData { needed: 10 * p, got: n });
    }
    if cfg.max_components == 0 || cfg.restarts == 0 || cfg.max_iter == 0 {
        return Err(Error::InvalidArgument(
            "pilot needs positive component, restart and iteration counts".into(),
        ));
    }
    let mut design = DMatrix::<f64>::zeros(n, p);
    let mut row = vec![0.0; cfg.basis_size];
    for (j, &theta) in sample.predictors().iter().enumerate() {
        basis.eval_into(theta, &mut row);
        design[(j, 0)] = 1.0;
        for (i, v) in row.iter().enumerate() {
            design[(j, i + 1)] = *v;
        }
    }
    let y = DVector::from_column_slice(sample.responses());

    let mut best: Option<(f64, usize, EmFit)> = None;
    let mut trace = Vec::new();
    for t in 1..=cfg.max_components {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(t as u64);
        let fit = (0..cfg.restarts)
            .filter_map(|_| run_em(&design, &y, t, cfg, &mut rng))
            .max_by(|a, b| a.log_likelihood.total_cmp(&b.log_likelihood));
        let Some(fit) = fit else { continue };
        let params = (t * p + t - 1 + 1) as f64;
        let bic = -2.0 * fit.log_likelihood + params * (n as f64).ln();
        trace.push((t, bic));
        if best.as_ref().is_none_or(|(b, _, _)| bic < *b) {
            best = Some((bic, t, fit));
        }
    }
    let (bic, _, fit) =
        best.ok_or_else(|| Error::PilotFit("every EM restart degenerated for every component count".into()))?;
    Ok(MixturePilot {
        basis,
        components: fit.components,
        variance: fit.variance,
        log_likelihood: fit.log_likelihood,
        bic,
        bic_trace: trace,
    })
}

/// One EM run from a random start; `None` when a component empties.
fn run_em(design: &DMatrix<f64>, y: &DVector<f64>, t: usize, cfg: &PilotConfig, rng: &mut ChaCha8Rng) -> Option<EmFit> {
    let (n, p) = design.shape();
    let mean_y = y.mean();
    let var_y = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum::<f64>() / n as f64;
    let floor = 1e-10 * var_y.max(1e-12);

    // Start from flat curves through randomly chosen responses.
    let mut betas: Vec<DVector<f64>> = (0..t)
        .map(|_| {
            let mut b = DVector::zeros(p);
            b[0] = y[rng.gen_range(0..n)];
            b
        })
        .collect();
    let mut weights = vec![1.0 / t as f64; t];
    let mut variance = (var_y / t as f64).max(floor);
    let mut resp = DMatrix::<f64>::zeros(n, t);
    let mut previous = f64::NEG_INFINITY;
    let mut log_likelihood = f64::NEG_INFINITY;

    for _ in 0..cfg.max_iter {
        // E-step.
        let means: Vec<DVector<f64>> = betas.iter().map(|b| design * b).collect();
        let log_norm = -0.5 * (TAU * variance).ln();
        let mut ll = 0.0;
        let mut logs = vec![0.0; t];
        for j in 0..n {
            for c in 0..t {
                let r = y[j] - means[c][j];
                logs[c] = weights[c].ln() + log_norm - r * r / (2.0 * variance);
            }
            let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = logs.iter().map(|l| (l - top).exp()).sum();
            ll += top + total.ln();
            for c in 0..t {
                resp[(j, c)] = (logs[c] - top).exp() / total;
            }
        }
        log_likelihood = ll;
        if !ll.is_finite() {
            return None;
        }
        if (ll - previous).abs() < cfg.tol {
            break;
        }
        previous = ll;

        // M-step.
        let mut sse = 0.0;
        for c in 0..t {
            let w = resp.column(c);
            let mass: f64 = w.sum();
            if mass < p as f64 {
                return None;
            }
            weights[c] = mass / n as f64;
            let weighted = DMatrix::from_fn(n, p, |j, i| design[(j, i)] * w[j]);
            let gram = weighted.transpose() * design;
            let rhs = weighted.transpose() * y;
            let svd = gram.svd(true, true);
            let eps = 1e-12 * svd.singular_values.max();
            betas[c] = svd.solve(&rhs, eps).ok()?;
            let fitted = design * &betas[c];
            sse += (0..n).map(|j| w[j] * (y[j] - fitted[j]).powi(2)).sum::<f64>();
        }
        variance = (sse / n as f64).max(floor);
    }

    let total: f64 = weights.iter().sum();
    Some(EmFit {
        components: betas
            .into_iter()
            .zip(&weights)
            .map(|(b, w)| PilotComponent {
                weight: w / total,
                coefficients: b.iter().copied().collect(),
            })
            .collect(),
        variance,
        log_likelihood,
    })
}

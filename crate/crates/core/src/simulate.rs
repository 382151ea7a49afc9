//! Synthetic regression models with known conditional modes.
//!
//! A [`SimModel`] is a finite mixture of regression branches. Each branch has
//! a regression function of the predictor, a mixing weight, and normal
//! (real response) or von Mises (angular response) noise, so the true
//! conditional density has closed form and its modes can be located exactly
//! up to grid refinement.

use std::f64::consts::{PI, TAU};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circular::wrap_radians;
use crate::density::{Geometry, RegressionSample};
use crate::error::{Error, Result};
use crate::kernels::CircularKernel;
use crate::meanshift::{Branch, ModalMultifunction};
use crate::metrics::ModeSet;
use crate::modes::{local_maxima, GridDomain};

/// A regression function of the predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressionFunction {
    Constant {
        value: f64,
    },
    /// a₀ + Σₖ (aₖ cos kδ + bₖ sin kδ), k = 1, 2, …
    Harmonic {
        intercept: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// c₀ + c₁δ + c₂δ² + …; real predictors only.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `turns`·δ + `offset`; periodic on the circle when the response is an angle.
    Rotation {
        offset: f64,
        turns: i32,
    },
}

impl RegressionFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RegressionFunction::Constant { value } => *value,
            RegressionFunction::Harmonic { intercept, cos, sin } => {
                let mut v = *intercept;
                for (k, a) in cos.iter().enumerate() {
                    v += a * ((k + 1) as f64 * x).cos();
                }
                for (k, b) in sin.iter().enumerate() {
                    v += b * ((k + 1) as f64 * x).sin();
                }
                v
            }
            RegressionFunction::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
            RegressionFunction::Rotation { offset, turns } => *turns as f64 * x + offset,
        }
    }

    fn is_periodic(&self, angular_response: bool) -> bool {
        match self {
            RegressionFunction::Polynomial { coefficients } => coefficients.len() <= 1,
            RegressionFunction::Rotation { turns, .. } => *turns == 0 || angular_response,
            _ => true,
        }
    }
}

/// Response noise around a branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    None,
    Normal { sd: f64 },
    VonMises { concentration: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimBranch {
    pub function: RegressionFunction,
    pub weight: f64,
    pub noise: Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorLaw {
    /// Uniform on (−π, π].
    UniformCircle,
    UniformInterval {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimModel {
    pub geometry: Geometry,
    pub predictor: PredictorLaw,
    pub branches: Vec<SimBranch>,
}

impl SimModel {
    /// Validates and builds a model.
    pub fn new(geometry: Geometry, predictor: PredictorLaw, branches: Vec<SimBranch>) -> Result<Self> {
        let model = Self {
            geometry,
            predictor,
            branches,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::InvalidArgument(format!("{field}: {msg}")));
        if self.branches.is_empty() {
            return bad("branches", "at least one branch is required".into());
        }
        match (self.geometry.predictor_is_circular(), self.predictor) {
            (true, PredictorLaw::UniformInterval { .. }) => {
                return bad("predictor", "a circular predictor needs the uniform_circle law".into())
            }
            (false, PredictorLaw::UniformCircle) => {
                return bad("predictor", "a real predictor needs the uniform_interval law".into())
            }
            (false, PredictorLaw::UniformInterval { lo, hi }) if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                return bad("predictor", format!("interval [{lo}, {hi}] is empty or not finite"))
            }
            _ => {}
        }
        let mut total = 0.0;
        for (i, b) in self.branches.iter().enumerate() {
            if !(b.weight > 0.0 && b.weight.is_finite()) {
                return bad(
                    &format!("branches[{i}].weight"),
                    format!("must be positive, got {}", b.weight),
                );
            }
            total += b.weight;
            match b.noise {
                Noise::None => {}
                Noise::Normal { sd } => {
                    if self.geometry.response_is_circular() {
                        return bad(
                            &format!("branches[{i}].noise"),
                            "normal noise needs a real response".into(),
                        );
                    }
                    if !(sd > 0.0 && sd.is_finite()) {
                        return bad(
                            &format!("branches[{i}].noise.sd"),
                            format!("must be positive, got {sd}"),
                        );
                    }
                }
                Noise::VonMises { concentration } => {
                    if !self.geometry.response_is_circular() {
                        return bad(
                            &format!("branches[{i}].noise"),
                            "von Mises noise needs an angular response".into(),
                        );
                    }
                    if !(concentration > 0.0 && concentration.is_finite()) {
                        return bad(
                            &format!("branches[{i}].noise.concentration"),
                            format!("must be positive, got {concentration}"),
                        );
                    }
                }
            }
            if self.geometry.predictor_is_circular() && !b.function.is_periodic(self.geometry.response_is_circular()) {
                return bad(
                    &format!("branches[{i}].function"),
                    "must be periodic for a circular predictor".into(),
                );
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return bad("branches", format!("weights must sum to 1, got {total}"));
        }
        Ok(())
    }

    /// Centre of branch `t` at predictor `x`, wrapped for angular responses.
    pub fn branch_value(&self, t: usize, x: f64) -> f64 {
        let v = self.branches[t].function.eval(x);
        if self.geometry.response_is_circular() {
            wrap_radians(v)
        } else {
            v
        }
    }

    /// The exact conditional density of the response given the predictor.
    /// Noiseless branches are excluded (they are point masses).
    pub fn conditional_density(&self, x: f64, r: f64) -> f64 {
        self.branches
            .iter()
            .enumerate()
            .map(|(t, b)| {
                let m = self.branch_value(t, x);
                b.weight
                    * match b.noise {
                        Noise::None => 0.0,
                        Noise::Normal { sd } => {
                            let z = (r - m) / sd;
                            (-0.5 * z * z).exp() / (sd * (TAU).sqrt())
                        }
                        Noise::VonMises { concentration } => CircularKernel::von_mises(concentration)
                            .map(|k| k.eval(r - m))
                            .unwrap_or(0.0),
                    }
            })
            .sum()
    }
}

/// i.i.d. draws from `model`; deterministic given `seed`.
pub fn draw(model: &SimModel, n: usize, seed: u64) -> Result<RegressionSample> {
    Ok(draw_labeled(model, n, seed)?.0)
}

/// Like [`draw`], also returning the index of the branch behind each observation.
pub fn draw_labeled(model: &SimModel, n: usize, seed: u64) -> Result<(RegressionSample, Vec<usize>)> {
    model.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picker = WeightedIndex::new(model.branches.iter().map(|b| b.weight))
        .map_err(|e| Error::InvalidArgument(format!("branch weights: {e}")))?;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = match model.predictor {
            // (−π, π]: flip the half-open [−π, π) draw.
            PredictorLaw::UniformCircle => -(rng.gen::<f64>() * TAU - PI),
            PredictorLaw::UniformInterval { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
        };
        let t = picker.sample(&mut rng);
        let m = model.branches[t].function.eval(x);
        let y = match model.branches[t].noise {
            Noise::None => m,
            Noise::Normal { sd } => m + sd * rng.sample::<f64, _>(StandardNormal),
            Noise::VonMises { concentration } => m + sample_von_mises(&mut rng, concentration),
        };
        xs.push(x);
        ys.push(y);
        labels.push(t);
    }
    Ok((RegressionSample::new(model.geometry, xs, ys)?, labels))
}

/// A von Mises(0, κ) deviate by the Best–Fisher rejection scheme.
pub fn sample_von_mises<R: Rng + ?Sized>(rng: &mut R, kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return rng.gen::<f64>() * TAU - PI;
    }
    if kappa > 1e6 {
        return rng.sample::<f64, _>(StandardNormal) / kappa.sqrt();
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let angle = f.clamp(-1.0, 1.0).acos();
            return if u3 > 0.5 { angle } else { -angle };
        }
    }
}

/// True conditional modes of `model` at predictor `x`.
///
/// The exact density is scanned on `grid_size` points and each grid
/// maximum refined by golden-section search. Noiseless branches contribute
/// their centre directly.
pub fn oracle_modes(model: &SimModel, x: f64, grid_size: usize) -> Result<ModeSet> {
    ModeSet::for_geometry(model.geometry, oracle_mode_values(model, x, grid_size)?)
}

fn oracle_mode_values(model: &SimModel, x: f64, grid_size: usize) -> Result<Vec<f64>> {
    model.validate()?;
    if grid_size < 512 {
        return Err(Error::InvalidArgument(format!(
            "oracle grid needs at least 512 points, got {grid_size}"
        )));
    }
    let mut modes: Vec<f64> = model
        .branches
        .iter()
        .enumerate()
        .filter(|(_, b)| b.noise == Noise::None)
        .map(|(t, _)| model.branch_value(t, x))
        .collect();
    if model.branches.iter().any(|b| b.noise != Noise::None) {
        let domain = if model.geometry.response_is_circular() {
            GridDomain::Circle
        } else {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (t, b) in model.branches.iter().enumerate() {
                let spread = match b.noise {
                    Noise::Normal { sd } => 8.0 * sd,
                    _ => 0.0,
                };
                let m = model.branch_value(t, x);
                lo = lo.min(m - spread);
                hi = hi.max(m + spread);
            }
            GridDomain::Interval { lo, hi }
        };
        modes.extend(local_maxima(|r| model.conditional_density(x, r), domain, grid_size));
    }
    modes.sort_by(f64::total_cmp);
    modes.dedup();
    Ok(modes)
}

/// Oracle modes on every point of `mesh`, packaged as a multifunction.
pub fn oracle_multifunction(model: &SimModel, mesh: &[f64], grid_size: usize) -> Result<ModalMultifunction> {
    let circular_predictor = model.geometry.predictor_is_circular();
    let mesh: Vec<f64> = mesh
        .iter()
        .map(|&x| if circular_predictor { wrap_radians(x) } else { x })
        .collect();
    let branches = mesh
        .iter()
        .map(|&x| {
            Ok(oracle_mode_values(model, x, grid_size)?
                .into_iter()
                .map(|m| Branch {
                    mode: m,
                    density: model.conditional_density(x, m),
                    iterations: 0,
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<Branch>>>>()?;
    ModalMultifunction::from_parts(model.geometry, mesh, branches)
}

/// Two-branch reference models, one per geometry.
///
/// * circ-lin: Y = sin 2Θ ± `separation`/2 + N(0, `dispersion`²)
/// * lin-circ: X ~ U[−2, 2], Φ = 0.6X ± `separation`/2 + vM(κ = `dispersion`)
/// * circ-circ: Φ = Θ ± `separation`/2 + vM(κ = `dispersion`)
pub fn two_branch_model(geometry: Geometry, separation: f64, dispersion: f64) -> Result<SimModel> {
    let half = 0.5 * separation;
    let (predictor, function): (PredictorLaw, fn(f64) -> RegressionFunction) = match geometry {
        Geometry::CircLin => (PredictorLaw::UniformCircle, |c| RegressionFunction::Harmonic {
            intercept: c,
            cos: vec![],
            sin: vec![0.0, 1.0],
        }),
        Geometry::LinCirc => (PredictorLaw::UniformInterval { lo: -2.0, hi: 2.0 }, |c| {
            RegressionFunction::Polynomial {
                coefficients: vec![c, 0.6],
            }
        }),
        Geometry::CircCirc => (PredictorLaw::UniformCircle, |c| RegressionFunction::Rotation {
            offset: c,
            turns: 1,
        }),
    };
    let noise = if geometry.response_is_circular() {
        Noise::VonMises {
            concentration: dispersion,
        }
    } else {
        Noise::Normal { sd: dispersion }
    };
    SimModel::new(
        geometry,
        predictor,
        vec![
            SimBranch {
                function: function(half),
                weight: 0.5,
                noise,
            },
            SimBranch {
                function: function(-half),
                weight: 0.5,
                noise,
            },
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn single(geometry: Geometry, noise: Noise) -> SimModel {
        let predictor = if geometry.predictor_is_circular() {
            PredictorLaw::UniformCircle
        } else {
            PredictorLaw::UniformInterval { lo: 0.0, hi: 1.0 }
        };
        SimModel::new(
            geometry,
            predictor,
            vec![SimBranch {
                function: RegressionFunction::Harmonic {
                    intercept: 0.5,
                    cos: vec![1.0],
                    sin: vec![],
                },
                weight: 1.0,
                noise,
            }],
        )
        .unwrap()
    }

    #[test]
    fn noiseless_draws_follow_the_branch() {
        let m = single(Geometry::CircLin, Noise::None);
        let s = draw(&m, 200, 7).unwrap();
        for (x, y) in s.predictors().iter().zip(s.responses()) {
            assert!(*x > -PI && *x <= PI);
            assert!((y - (0.5 + x.cos())).abs() < 1e-15);
        }
    }

    #[test]
    fn draws_are_seed_deterministic() {
        let m = two_branch_model(Geometry::CircCirc, 2.0, 8.0).unwrap();
        assert_eq!(draw(&m, 50, 3).unwrap(), draw(&m, 50, 3).unwrap());
        assert_ne!(draw(&m, 50, 3).unwrap(), draw(&m, 50, 4).unwrap());
    }

    #[test]
    fn branch_proportions_concentrate() {
        let m = two_branch_model(Geometry::CircLin, 2.0, 0.3).unwrap();
        let (_, labels) = draw_labeled(&m, 10_000, 11).unwrap();
        let frac = labels.iter().filter(|&&t| t == 0).count() as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "frac = {frac}");
    }

    #[test]
    fn von_mises_sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kappa in [0.5, 4.0, 50.0] {
            let n = 40_000;
            let (mut s, mut c) = (0.0, 0.0);
            for _ in 0..n {
                let v = sample_von_mises(&mut rng, kappa);
                assert!((-PI..=PI).contains(&v));
                s += v.sin();
                c += v.cos();
            }
            // E cos = I1(κ)/I0(κ), evaluated by quadrature.
            let k = CircularKernel::von_mises(kappa).unwrap();
            let steps = 20_000;
            let expected: f64 = (0..steps)
                .map(|i| {
                    let u = -PI + (i as f64 + 0.5) * TAU / steps as f64;
                    u.cos() * k.eval(u) * TAU / steps as f64
                })
                .sum();
            assert!((c / n as f64 - expected).abs() < 0.01, "kappa={kappa}");
            assert!((s / n as f64).abs() < 0.01);
        }
    }

    #[test]
    fn oracle_single_normal_branch() {
        let m = single(Geometry::CircLin, Noise::Normal { sd: 0.4 });
        for x in [-2.0, 0.0, 1.3] {
            let modes = oracle_modes(&m, x, 1024).unwrap();
            assert_eq!(modes.values().len(), 1);
            assert!((modes.values()[0] - (0.5 + f64::cos(x))).abs() < 1e-6);
        }
    }

    #[test]
    fn oracle_symmetric_von_mises_pair() {
        let m = two_branch_model(Geometry::CircCirc, PI, 6.0).unwrap();
        let modes = oracle_modes(&m, 0.0, 2048).unwrap();
        assert_eq!(modes.values().len(), 2);
        assert!((modes.values()[0] + FRAC_PI_2).abs() < 1e-6);
        assert!((modes.values()[1] - FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn close_normal_branches_merge() {
        // Equal-weight normals merge into one mode when the gap is below 2σ.
        let m = two_branch_model(Geometry::CircLin, 1.5, 1.0).unwrap();
        let modes = oracle_modes(&m, 0.4, 4096).unwrap();
        assert_eq!(modes.values().len(), 1);
        let m = two_branch_model(Geometry::CircLin, 2.5, 1.0).unwrap();
        assert_eq!(oracle_modes(&m, 0.4, 4096).unwrap().values().len(), 2);
    }

    #[test]
    fn invalid_models_name_the_field() {
        let err = SimModel::new(
            Geometry::CircLin,
            PredictorLaw::UniformCircle,
            vec![SimBranch {
                function: RegressionFunction::Constant { value: 0.0 },
                weight: 1.0,
                noise: Noise::VonMises { concentration: 2.0 },
            }],
        )
        .unwrap_err();
        assert!(err.to_string().contains("branches[0].noise"));
        let err = SimModel::new(
            Geometry::CircLin,
            PredictorLaw::UniformCircle,
            vec![SimBranch {
                function: RegressionFunction::Polynomial {
                    coefficients: vec![0.0, 1.0],
                },
                weight: 1.0,
                noise: Noise::Normal { sd: 1.0 },
            }],
        )
        .unwrap_err();
        assert!(err.to_string().contains("branches[0].function"));
        assert!(oracle_modes(&single(Geometry::CircLin, Noise::None), 0.0, 100).is_err());
    }
}

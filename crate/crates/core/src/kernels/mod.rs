//! Linear (Gaussian) and circular (von Mises) kernels.
//!
//! Each kernel exposes its normalized density together with the derivative
//! profile that drives the mean-shift weights. The shift weights are returned
//! with a convenient positive scaling; every consumer is invariant to it.

mod bessel;

pub use bessel::{bessel_i0, bessel_i0e, ln_bessel_i0};

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::circular::cos_dissimilarity;
use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearFamily {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircularFamily {
    #[default]
    VonMises,
}

/// A symmetric density on ℝ scaled by the bandwidth `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearKernel {
    family: LinearFamily,
    bandwidth: f64,
}

impl LinearKernel {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self {
            family: LinearFamily::Gaussian,
            bandwidth,
        })
    }

    pub fn family(&self) -> LinearFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// L_h(u) = L(u/h)/h.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let z = u / self.bandwidth;
        INV_SQRT_2PI / self.bandwidth * (-0.5 * z * z).exp()
    }

    /// Shape of the mean-shift weight G at the standardized argument `u`;
    /// exp(−u²/2) for the Gaussian, so G(0) = 1.
    #[inline]
    pub fn shift_weight(&self, u: f64) -> f64 {
        (-0.5 * u * u).exp()
    }

    /// First and second derivatives of L_h at `u`, in closed form.
    #[inline]
    pub fn derivatives(&self, u: f64) -> (f64, f64) {
        let h2 = self.bandwidth * self.bandwidth;
        let l = self.eval(u);
        (-u / h2 * l, (u * u / h2 - 1.0) / h2 * l)
    }
}

/// A circular density K_κ(u) = c_κ K[κ(1 − cos u)] with concentration κ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularKernel {
    family: CircularFamily,
    concentration: f64,
    /// 1 / (2π e^{−κ} I₀(κ)), so that K_κ(u) = norm · exp(−κ(1 − cos u)).
    norm: f64,
}

impl CircularKernel {
    pub fn von_mises(concentration: f64) -> Result<Self> {
        if !(concentration > 0.0 && concentration.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "concentration must be positive and finite, got {concentration}"
            )));
        }
        Ok(Self {
            family: CircularFamily::VonMises,
            concentration,
            norm: 1.0 / (TAU * bessel::i0e_unchecked(concentration)),
        })
    }

    pub fn family(&self) -> CircularFamily {
        self.family
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }

    /// Normalized density exp(κ cos u)/(2π I₀(κ)), evaluated as
    /// exp(−κ(1 − cos u)) / (2π e^{−κ} I₀(κ)) so that large κ cannot overflow.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.norm * self.shift_weight(u)
    }

    /// |K′| at κ(1 − cos u) up to scaling: exp(−κ(1 − cos u)), equal to 1 at u = 0.
    #[inline]
    pub fn shift_weight(&self, u: f64) -> f64 {
        (-self.concentration * cos_dissimilarity(u)).exp()
    }

    /// First and second derivatives of K_κ at `u`, in closed form.
    #[inline]
    pub fn derivatives(&self, u: f64) -> (f64, f64) {
        let k = self.concentration;
        let f = self.eval(u);
        let (s, c) = u.sin_cos();
        (-k * s * f, (k * k * s * s - k * c) * f)
    }

    /// The normalizing constant 1/(2π e^{−κ} I₀(κ)).
    pub(crate) fn norm(&self) -> f64 {
        self.norm
    }
}

/// The uniform circular density, the κ → 0 limit of the von Mises kernel.
pub const UNIFORM_CIRCULAR_DENSITY: f64 = 1.0 / (2.0 * PI);

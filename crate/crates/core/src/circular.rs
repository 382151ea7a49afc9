//! Angles on the unit circle, represented in radians on (−π, π].

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Norm of the resultant (Σw sin, Σw cos) below which the mean direction is undefined.
pub const DEGENERATE_RESULTANT: f64 = 1e-12;

/// A point on the unit circle. The stored value always lies in (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);
    pub const PI: Angle = Angle(PI);

    /// Wraps an arbitrary finite number of radians.
    pub fn new(radians: f64) -> Result<Self> {
        wrap(radians)
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    /// Rotates by `alpha` radians.
    pub fn rotate(self, alpha: f64) -> Result<Self> {
        wrap(self.0 + alpha)
    }

    /// Signed difference `self − other`, wrapped to (−π, π].
    #[inline]
    pub fn diff(self, other: Angle) -> f64 {
        wrap_radians(self.0 - other.0)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        wrap(value)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

/// Reduces `x` modulo 2π to its representative in (−π, π].
pub fn wrap(x: f64) -> Result<Angle> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("cannot wrap non-finite angle {x}")));
    }
    Ok(Angle(wrap_radians(x)))
}

/// Unchecked variant of [`wrap`] for values known to be finite.
#[inline]
pub(crate) fn wrap_radians(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let r = x.rem_euclid(TAU);
    // r ∈ [0, 2π); values above π move down by one turn. The subtraction is exact.
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Cosine dissimilarity 1 − cos(a − b), in [0, 2].
#[inline]
pub fn circ_dist(a: Angle, b: Angle) -> f64 {
    cos_dissimilarity(a.0 - b.0)
}

/// 1 − cos(d), computed as 2 sin²(d/2) to keep precision near zero.
#[inline]
pub(crate) fn cos_dissimilarity(d: f64) -> f64 {
    let s = (0.5 * d).sin();
    2.0 * s * s
}

/// Weighted mean direction atan2(Σ wⱼ sin Φⱼ, Σ wⱼ cos Φⱼ).
///
/// Weights may be negative. Fails with [`Error::DegenerateDirection`] when the
/// resultant vector has norm below [`DEGENERATE_RESULTANT`].
pub fn weighted_mean_direction(angles: &[Angle], weights: &[f64]) -> Result<Angle> {
    if angles.is_empty() || angles.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "need equal, positive lengths; got {} angles and {} weights",
            angles.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite weight {w}")));
    }
    mean_direction_raw(angles.iter().map(|a| a.0).zip(weights.iter().copied()))
}

pub(crate) fn mean_direction_raw(pairs: impl Iterator<Item = (f64, f64)>) -> Result<Angle> {
    let mut s = CompensatedSum::new();
    let mut c = CompensatedSum::new();
    for (phi, w) in pairs {
        let (sin, cos) = phi.sin_cos();
        s.add(w * sin);
        c.add(w * cos);
    }
    resultant_direction(s.value(), c.value())
}

/// Direction of the resultant vector (c, s).
pub(crate) fn resultant_direction(s: f64, c: f64) -> Result<Angle> {
    if !(s.hypot(c) >= DEGENERATE_RESULTANT) {
        return Err(Error::DegenerateDirection);
    }
    Ok(Angle(wrap_radians(s.atan2(c))))
}

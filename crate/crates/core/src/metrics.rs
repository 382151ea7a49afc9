//! Set-valued errors between multifunctions.

use crate::circular::cos_dissimilarity;
use crate::density::Geometry;
use crate::error::{Error, Result};
use crate::meanshift::ModalMultifunction;

/// A finite set of response values, real or angular.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    values: Vec<f64>,
    circular: bool,
}

impl ModeSet {
    pub fn linear(values: Vec<f64>) -> Result<Self> {
        Self::new(values, false)
    }

    pub fn circular(values: Vec<f64>) -> Result<Self> {
        Self::new(values, true)
    }

    /// Mode set for the response kind of `geometry`.
    pub fn for_geometry(geometry: Geometry, values: Vec<f64>) -> Result<Self> {
        Self::new(values, geometry.response_is_circular())
    }

    fn new(values: Vec<f64>, circular: bool) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::UndefinedDistance { mesh_index: None });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite mode value {v}")));
        }
        Ok(Self { values, circular })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_circular(&self) -> bool {
        self.circular
    }
}

fn directed(a: &[f64], b: &[f64], d: impl Fn(f64, f64) -> f64) -> f64 {
    a.iter()
        .map(|&x| b.iter().map(|&z| d(x, z)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn haus_raw(a: &[f64], b: &[f64], circular: bool) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedDistance { mesh_index: None });
    }
    Ok(if circular {
        let d = |x: f64, z: f64| cos_dissimilarity(x - z);
        directed(a, b, d).max(directed(b, a, d))
    } else {
        let d = |x: f64, z: f64| (x - z).abs();
        directed(a, b, d).max(directed(b, a, d))
    })
}

/// Hausdorff distance between real sets, with d(x, A) = inf |x − z|.
pub fn hausdorff(a: &ModeSet, b: &ModeSet) -> Result<f64> {
    if a.circular || b.circular {
        return Err(Error::InvalidArgument("hausdorff needs real-valued sets".into()));
    }
    haus_raw(&a.values, &b.values, false)
}

/// Hausdorff-type distance between angle sets with d̃(x, A) = inf 1 − cos(x − z).
pub fn circular_hausdorff(a: &ModeSet, b: &ModeSet) -> Result<f64> {
    if !a.circular || !b.circular {
        return Err(Error::InvalidArgument("circular_hausdorff needs angular sets".into()));
    }
    haus_raw(&a.values, &b.values, true)
}

/// Distance from `x` to the nearest element of `set`: |·| or 1 − cos.
pub fn distance_to_set(x: f64, set: &[f64], circular: bool) -> Option<f64> {
    set.iter()
        .map(|&z| {
            if circular {
                cos_dissimilarity(x - z)
            } else {
                (x - z).abs()
            }
        })
        .min_by(f64::total_cmp)
}

/// Worst-case stand-in for the distance when an estimated branch set is empty:
/// 2·(response range)² for real responses, 2 for angles.
pub fn empty_set_penalty(geometry: Geometry, responses: &[f64]) -> f64 {
    if geometry.response_is_circular() {
        2.0
    } else {
        let (lo, hi) = responses
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                (lo.min(y), hi.max(y))
            });
        let range = if hi >= lo { hi - lo } else { 0.0 };
        2.0 * range * range
    }
}

fn check_aligned(truth: &ModalMultifunction, est: &ModalMultifunction) -> Result<()> {
    if truth.geometry() != est.geometry() {
        return Err(Error::GeometryMismatch {
            expected: truth.geometry().to_string(),
            found: est.geometry().to_string(),
        });
    }
    if truth.len() != est.len() {
        return Err(Error::InvalidArgument(format!(
            "meshes differ in size: {} vs {}",
            truth.len(),
            est.len()
        )));
    }
    if let Some(i) = (0..truth.len()).find(|&i| (truth.mesh()[i] - est.mesh()[i]).abs() > 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "meshes diverge at index {i}: {} vs {}",
            truth.mesh()[i],
            est.mesh()[i]
        )));
    }
    Ok(())
}

/// Λ at mesh point `index`: the (circular) Hausdorff distance between branch sets.
pub fn pointwise_error(truth: &ModalMultifunction, est: &ModalMultifunction, index: usize) -> Result<f64> {
    check_aligned(truth, est)?;
    if index >= truth.len() {
        return Err(Error::InvalidArgument(format!("mesh index {index} out of range")));
    }
    haus_raw(
        &truth.modes(index),
        &est.modes(index),
        truth.geometry().response_is_circular(),
    )
    .map_err(|_| Error::UndefinedDistance {
        mesh_index: Some(index),
    })
}

/// Mesh average of the pointwise errors, with the count of excluded points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalError {
    pub value: f64,
    pub used: usize,
    pub undefined: usize,
}

/// Mean of Λ² over the mesh for real responses, of Λ̃ (unsquared) for angles.
/// Points where either branch set is empty are skipped and counted.
pub fn empirical_global_error(truth: &ModalMultifunction, est: &ModalMultifunction) -> Result<GlobalError> {
    check_aligned(truth, est)?;
    let circular = truth.geometry().response_is_circular();
    let mut acc = crate::sum::CompensatedSum::new();
    let mut used = 0;
    for i in 0..truth.len() {
        match pointwise_error(truth, est, i) {
            Ok(e) => {
                acc.add(if circular { e } else { e * e });
                used += 1;
            }
            Err(Error::UndefinedDistance { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::UndefinedDistance { mesh_index: None });
    }
    Ok(GlobalError {
        value: acc.value() / used as f64,
        used,
        undefined: truth.len() - used,
    })
}

//! Nonparametric multimodal regression for circular data.
//!
//! The conditional density of the response given the predictor is estimated
//! with product kernels (von Mises for angles, Gaussian for reals) and its
//! local maxima are located with a conditional mean shift. The set of modes
//! at each predictor value forms the regression multifunction.
//!
//! ```
//! use circmodal::{fit_multifunction, Bandwidths, Geometry, MeanShiftConfig, RegressionSample};
//!
//! let thetas = vec![-1.0, -0.5, 0.0, 0.5, 1.0, -1.0, -0.5, 0.0, 0.5, 1.0];
//! let ys = vec![2.0, 2.1, 1.9, 2.0, 2.05, -2.0, -1.9, -2.1, -2.0, -1.95];
//! let sample = RegressionSample::new(Geometry::CircLin, thetas, ys)?;
//! let fit = fit_multifunction(&sample, Bandwidths::new(4.0, 0.3)?, &[0.0], &MeanShiftConfig::default())?;
//! assert_eq!(fit.branches(0).len(), 2);
//! # Ok::<(), circmodal::Error>(())
//! ```

// `!(x > y)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod circular;
pub mod density;
mod error;
pub mod kernels;
pub mod meanshift;
pub mod metrics;
pub mod modes;
pub mod simulate;
pub mod sum;

pub use circular::{circ_dist, weighted_mean_direction, wrap, Angle};
pub use density::{Bandwidths, ConditionalDensity, ConditionalSlice, Geometry, RegressionSample};
pub use error::{Error, Result};
pub use kernels::{bessel_i0, ln_bessel_i0, CircularKernel, LinearKernel};
pub use meanshift::{
    default_mesh, fit_multifunction, fit_point, run_fixed_point, shift_step_circular, shift_step_linear, Branch,
    FixedPoint, Initialization, MeanShiftConfig, ModalMultifunction,
};
pub use metrics::{circular_hausdorff, empirical_global_error, hausdorff, pointwise_error, GlobalError, ModeSet};

//! Parametric bootstrap estimate of the integrated squared Hausdorff error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{BandwidthGrid, MixturePilot, ScoreRow, Selection};
use crate::density::{ConditionalDensity, Geometry, RegressionSample};
use crate::error::{Error, Result};
use crate::meanshift::{fit_point, MeanShiftConfig};
use crate::metrics::empty_set_penalty;
use crate::sum::sum;

/// Minimizes (1/B) Σ_b (1/n) Σⱼ Haus²(M̂*⁽ᵇ⁾(Θⱼ), M̃(Θⱼ)) over `grid`.
///
/// M̃ are the modes of the pilot conditional density. Each resample keeps
/// the observed predictors and redraws every response from the pilot.
/// Replicate `b` draws from the ChaCha stream `b` of `seed`, so the output
/// does not depend on the number of workers.
pub fn bootstrap_ise(
    sample: &RegressionSample,
    grid: &BandwidthGrid,
    pilot: &MixturePilot,
    resamples: usize,
    cfg: &MeanShiftConfig,
    seed: u64,
) -> Result<Selection> {
    check_geometry(sample.geometry())?;
    let truth: Vec<Vec<f64>> = sample.predictors().par_iter().map(|&t| pilot.modes(t)).collect();
    bootstrap_ise_with_truth(sample, grid, pilot, &truth, resamples, cfg, seed)
}

/// [`bootstrap_ise`] with the reference modes at each predictor supplied by the caller.
pub fn bootstrap_ise_with_truth(
    sample: &RegressionSample,
    grid: &BandwidthGrid,
    pilot: &MixturePilot,
    truth: &[Vec<f64>],
    resamples: usize,
    cfg: &MeanShiftConfig,
    seed: u64,
) -> Result<Selection> {
    check_geometry(sample.geometry())?;
    if resamples == 0 {
        return Err(Error::InvalidArgument("need at least one bootstrap resample".into()));
    }
    if truth.len() != sample.len() {
        return Err(Error::InvalidArgument(format!(
            "need reference modes for all {} predictors, got {}",
            sample.len(),
            truth.len()
        )));
    }
    cfg.validate()?;
    let penalty = empty_set_penalty(sample.geometry(), sample.responses());
    let cells = grid.cells();

    let replicates: Vec<RegressionSample> = (0..resamples)
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let ys = sample
                .predictors()
                .iter()
                .map(|&theta| pilot.sample_response(&mut rng, theta))
                .collect();
            sample.with_responses(ys)
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..resamples).map(move |b| (c, b)))
        .collect();
    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, b)| {
            let est = ConditionalDensity::new(replicates[b].clone(), cells[c])?;
            let terms = sample
                .predictors()
                .iter()
                .zip(truth)
                .map(|(&theta, reference)| {
                    let fit = fit_point(&est, theta, cfg)?;
                    let modes: Vec<f64> = fit.branches.iter().map(|b| b.mode).collect();
                    Ok(if modes.is_empty() || reference.is_empty() {
                        penalty
                    } else {
                        let h = hausdorff_linear(&modes, reference);
                        h * h
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(sum(terms) / sample.len() as f64)
        })
        .collect::<Result<_>>()?;

    let table = cells
        .iter()
        .enumerate()
        .map(|(c, &bw)| ScoreRow {
            bandwidths: bw,
            score: sum(errors[c * resamples..(c + 1) * resamples].iter().copied()) / resamples as f64,
        })
        .collect();
    Selection::from_table(sample.geometry(), table)
}

fn check_geometry(g: Geometry) -> Result<()> {
    if g != Geometry::CircLin {
        return Err(Error::Unsupported(format!(
            "bootstrap selection is implemented for circ-lin data only (got {g}); use modal cross-validation"
        )));
    }
    Ok(())
}

fn hausdorff_linear(a: &[f64], b: &[f64]) -> f64 {
    let directed = |p: &[f64], q: &[f64]| {
        p.iter()
            .map(|x| q.iter().map(|z| (x - z).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandwidth::{PeriodicBSplineBasis, PilotComponent};

    fn flat_pilot(level: f64) -> MixturePilot {
        let mut c = vec![0.0; 9];
        c[0] = level;
        MixturePilot::new(
            PeriodicBSplineBasis::new(8).unwrap(),
            vec![PilotComponent {
                weight: 1.0,
                coefficients: c,
            }],
            0.04,
        )
        .unwrap()
    }

    #[test]
    fn other_geometries_are_unsupported() {
        let s = RegressionSample::new(Geometry::LinCirc, vec![0.0; 5], vec![0.0; 5]).unwrap();
        let grid = BandwidthGrid::new(vec![1.0], vec![1.0]).unwrap();
        let err = bootstrap_ise(&s, &grid, &flat_pilot(0.0), 2, &MeanShiftConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        assert!(err.to_string().contains("circ-lin"));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let xs: Vec<f64> = (0..40).map(|i| -3.1 + 0.155 * i as f64).collect();
        let s = RegressionSample::new(Geometry::CircLin, xs, vec![1.0; 40]).unwrap();
        let grid = BandwidthGrid::new(vec![2.0, 8.0], vec![0.1, 0.4]).unwrap();
        let pilot = flat_pilot(1.0);
        let cfg = MeanShiftConfig::default();
        let a = bootstrap_ise(&s, &grid, &pilot, 3, &cfg, 9).unwrap();
        let b = bootstrap_ise(&s, &grid, &pilot, 3, &cfg, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.table.len(), 4);
        // Unimodal pilot: the only mode is the curve itself.
        assert!((pilot.modes(0.3)[0] - 1.0).abs() < 1e-6);
    }
}

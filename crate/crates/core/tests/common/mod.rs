//! Independent oracles: textbook formulas evaluated the slow, direct way.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use circmodal::{Bandwidths, Geometry, RegressionSample};

/// I₀(x) = Σₘ (x/2)^{2m} / (m!)², summed until the terms stop mattering.
pub fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, mut total) = (1.0_f64, 1.0_f64);
    let mut m = 1.0;
    loop {
        term *= q / (m * m);
        total += term;
        if term < total * 1e-18 && m > q.sqrt() {
            return total;
        }
        m += 1.0;
    }
}

/// I₀(x) from exactly `terms` terms of the power series.
pub fn i0_series_terms(x: f64, terms: usize) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, mut total) = (1.0_f64, 1.0_f64);
    for m in 1..terms {
        term *= q / (m * m) as f64;
        total += term;
    }
    total
}

/// exp(κ cos u) / (2π I₀(κ)), overflowing past κ ≈ 700 by design.
pub fn von_mises_naive(kappa: f64, u: f64) -> f64 {
    (kappa * u.cos()).exp() / (TAU * i0_series(kappa))
}

pub fn gaussian_naive(h: f64, u: f64) -> f64 {
    (-0.5 * (u / h).powi(2)).exp() / (h * TAU.sqrt())
}

pub fn kernel_naive(circular: bool, smoothing: f64, u: f64) -> f64 {
    if circular {
        von_mises_naive(smoothing, u)
    } else {
        gaussian_naive(smoothing, u)
    }
}

/// Σⱼ K(δ − Δⱼ) K(r − Rⱼ) / Σⱼ K(δ − Δⱼ), summed directly.
pub fn conditional_naive(sample: &RegressionSample, bw: Bandwidths, delta: f64, r: f64) -> f64 {
    let g = sample.geometry();
    let (mut num, mut den) = (0.0, 0.0);
    for (&x, &y) in sample.predictors().iter().zip(sample.responses()) {
        let w = kernel_naive(g.predictor_is_circular(), bw.predictor, delta - x);
        num += w * kernel_naive(g.response_is_circular(), bw.response, r - y);
        den += w;
    }
    num / den
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    // Split first so narrow peaks are not stepped over.
    let pieces = 64;
    let step = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + step * i as f64, a + step * (i + 1) as f64);
            let (flo, fhi) = (f(lo), f(hi));
            let (m, fm, whole) = simpson(f, lo, flo, hi, fhi);
            recurse(f, lo, flo, hi, fhi, m, fm, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// Angle difference wrapped to (−π, π].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

pub fn response_gap(circular: bool, a: f64, b: f64) -> f64 {
    if circular {
        angle_diff(a, b).abs()
    } else {
        (a - b).abs()
    }
}

/// Grid points for a response scan: the circle, or an interval around the data.
pub fn response_grid(sample: &RegressionSample, bw: Bandwidths, size: usize) -> (Vec<f64>, f64) {
    if sample.geometry().response_is_circular() {
        let step = TAU / size as f64;
        ((1..=size).map(|i| -PI + step * i as f64).collect(), step)
    } else {
        let ys = sample.responses();
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min) - 6.0 * bw.response;
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 6.0 * bw.response;
        let step = (hi - lo) / (size - 1) as f64;
        ((0..size).map(|i| lo + step * i as f64).collect(), step)
    }
}

/// Indices of grid local maxima: strictly above the left neighbour and at
/// least the right one; the circle wraps, interval ends never qualify.
pub fn grid_maxima(values: &[f64], circular: bool) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let (left, right) = if circular {
                ((i + n - 1) % n, (i + 1) % n)
            } else if i == 0 || i + 1 == n {
                return false;
            } else {
                (i - 1, i + 1)
            };
            values[i] > values[left] && values[i] >= values[right]
        })
        .collect()
}

/// Greedy merge: keep points in decreasing density order, dropping any
/// within `tol` (|·|, or 1 − cos for angles) of a kept one.
pub fn merge(points: &[(f64, f64)], tol: f64, circular: bool) -> Vec<f64> {
    let mut order = points.to_vec();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut kept: Vec<f64> = Vec::new();
    for (m, _) in order {
        let far = |k: &f64| {
            if circular {
                1.0 - (m - k).cos() > tol
            } else {
                (m - k).abs() > tol
            }
        };
        if kept.iter().all(far) {
            kept.push(m);
        }
    }
    kept.sort_by(f64::total_cmp);
    kept
}

/// Default merge radius: h/10 for a real response, 0.1/κ in 1 − cos units for an angle.
pub fn default_merge_tol(geometry: Geometry, bw: Bandwidths) -> f64 {
    if geometry.response_is_circular() {
        0.1 / bw.response
    } else {
        0.1 * bw.response
    }
}

/// True when every element of `a` has a partner in `b` within `tol` and vice versa,
/// with equal counts.
pub fn sets_match(a: &[f64], b: &[f64], tol: f64, circular: bool) -> bool {
    a.len() == b.len()
        && a.iter()
            .all(|x| b.iter().any(|y| response_gap(circular, *x, *y) <= tol))
        && b.iter()
            .all(|y| a.iter().any(|x| response_gap(circular, *x, *y) <= tol))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

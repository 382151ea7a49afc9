//! Local maxima of a univariate function by dense grid scan plus golden-section refinement.

use std::f64::consts::{PI, TAU};

use crate::circular::wrap_radians;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Where the grid lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridDomain {
    /// `size` equally spaced points on [lo, hi]; endpoints never count as maxima.
    Interval { lo: f64, hi: f64 },
    /// `size` equally spaced angles on (−π, π] with wrap-around neighbours.
    Circle,
}

impl GridDomain {
    pub fn points(&self, size: usize) -> Vec<f64> {
        match *self {
            GridDomain::Interval { lo, hi } => {
                let step = (hi - lo) / (size - 1) as f64;
                (0..size).map(|i| lo + step * i as f64).collect()
            }
            GridDomain::Circle => (1..=size).map(|i| -PI + TAU * i as f64 / size as f64).collect(),
        }
    }

    pub fn spacing(&self, size: usize) -> f64 {
        match *self {
            GridDomain::Interval { lo, hi } => (hi - lo) / (size - 1) as f64,
            GridDomain::Circle => TAU / size as f64,
        }
    }
}

/// Grid local maxima of `f`, each refined inside its two neighbouring cells.
///
/// A grid point is a maximum when it is strictly above its left neighbour
/// and not below its right one, so plateaus report once.
pub fn local_maxima(f: impl Fn(f64) -> f64, domain: GridDomain, size: usize) -> Vec<f64> {
    assert!(size >= 3, "grid needs at least three points");
    let xs = domain.points(size);
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let h = domain.spacing(size);
    let circular = matches!(domain, GridDomain::Circle);
    let range: Box<dyn Iterator<Item = usize>> = if circular {
        Box::new(0..size)
    } else {
        Box::new(1..size - 1)
    };
    let mut out = Vec::new();
    for i in range {
        let left = ys[(i + size - 1) % size];
        let right = ys[(i + 1) % size];
        if ys[i] > left && ys[i] >= right {
            let x = golden_max(&f, xs[i] - h, xs[i] + h);
            out.push(if circular { wrap_radians(x) } else { x });
        }
    }
    out
}

/// Maximizer of a unimodal `f` on [a, b] by golden-section search.
pub fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

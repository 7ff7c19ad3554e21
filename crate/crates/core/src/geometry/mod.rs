//! Agmon geometry of the degenerate metric `min(V1, V2)_+ dx^2`.
//!
//! Island boundaries (`V1 = 0`), cirque boundaries (`V1 = V2`), the Agmon
//! distance to the well, minimal geodesics and the constants that fix the
//! predicted width exponent.

mod classify;
mod contour;
mod eikonal;

pub use classify::{analyze, classify, Crossing, GammaComponent, Geodesic, GeometryReport};
pub use eikonal::{eikonal_solve, eikonal_solve_metric, AgmonField};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::{integrate_with_breaks, sign_change_roots};

/// Rectangular lattice, 1D or 2D, with node counts per axis.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    D1 { lo: f64, hi: f64, n: usize },
    D2 { x: (f64, f64, usize), y: (f64, f64, usize) },
}

impl Grid {
    pub fn line(lo: f64, hi: f64, n: usize) -> Self {
        Grid::D1 { lo, hi, n }
    }

    pub fn square(lo: f64, hi: f64, n: usize) -> Self {
        Grid::D2 { x: (lo, hi, n), y: (lo, hi, n) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Grid::D1 { .. } => 1,
            Grid::D2 { .. } => 2,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Grid::D1 { n, .. } => n,
            Grid::D2 { x, y } => x.2 * y.2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node spacing per axis.
    pub fn spacing(&self) -> Vec<f64> {
        match *self {
            Grid::D1 { lo, hi, n } => vec![(hi - lo) / (n - 1) as f64],
            Grid::D2 { x, y } => vec![(x.1 - x.0) / (x.2 - 1) as f64, (y.1 - y.0) / (y.2 - 1) as f64],
        }
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    /// Coordinates of the node with flat index `k` (x-fastest in 2D).
    pub fn node(&self, k: usize) -> Vec<f64> {
        match *self {
            Grid::D1 { lo, .. } => vec![lo + k as f64 * self.spacing()[0]],
            Grid::D2 { x, y } => {
                let s = self.spacing();
                let (i, j) = (k % x.2, k / x.2);
                vec![x.0 + i as f64 * s[0], y.0 + j as f64 * s[1]]
            }
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match *self {
            Grid::D1 { lo, hi, .. } => p[0] >= lo && p[0] <= hi,
            Grid::D2 { x, y } => p[0] >= x.0 && p[0] <= x.1 && p[1] >= y.0 && p[1] <= y.1,
        }
    }
}

/// Boundary points (and, in 2D, contour segments between them).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundarySet {
    pub points: Vec<Vec<f64>>,
    pub segments: Vec<(usize, usize)>,
    /// `|grad f|` at each point, where `f` is the level-set function.
    pub gradient_norms: Vec<f64>,
}

impl BoundarySet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn roots_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    sign_change_roots(f, lo, hi, n.max(2000))
}

/// Level set `V1 = 0`: the island boundary.
pub fn island_boundary(model: &ModelConfig, grid: &Grid) -> Result<BoundarySet> {
    let set = level_set(model, grid, |m, x| m.v1(x), |m, x| Ok(m.v1_jet(x)?.g))?;
    if set.is_empty() {
        return Err(Error::NoSeaFound);
    }
    Ok(set)
}

/// Level set `V1 = V2`: the cirque boundary, with `|grad(V1 - V2)|` margins.
pub fn cirque_boundary(model: &ModelConfig, grid: &Grid) -> Result<BoundarySet> {
    let set = level_set(
        model,
        grid,
        |m, x| m.v1(x) - m.v2(x),
        |m, x| {
            let (a, b) = (m.v1_jet(x)?, m.v2_jet(x)?);
            Ok([a.g[0] - b.g[0], a.g[1] - b.g[1]])
        },
    )?;
    if set.is_empty() {
        return Err(Error::NoCrossingFound);
    }
    Ok(set)
}

type GradFn = fn(&ModelConfig, &[f64]) -> Result<[crate::model::C64; 2]>;

fn level_set(
    model: &ModelConfig,
    grid: &Grid,
    f: fn(&ModelConfig, &[f64]) -> f64,
    grad: GradFn,
) -> Result<BoundarySet> {
    let mut set = match *grid {
        Grid::D1 { lo, hi, n } => {
            let mut pts = roots_1d(|x| f(model, &[x]), lo, hi, n);
            // Newton polish with exact derivatives
            for r in pts.iter_mut() {
                for _ in 0..3 {
                    let d = grad(model, &[*r])?[0].re;
                    if d == 0.0 {
                        break;
                    }
                    let step = f(model, &[*r]) / d;
                    if step.abs() > 1e-10 {
                        break;
                    }
                    *r -= step;
                }
            }
            BoundarySet { points: pts.into_iter().map(|r| vec![r]).collect(), ..Default::default() }
        }
        Grid::D2 { .. } => contour::marching_squares(grid, |p| f(model, p)),
    };
    set.gradient_norms = set
        .points
        .iter()
        .map(|p| {
            let g = grad(model, p)?;
            Ok((0..model.dimension).map(|k| g[k].re * g[k].re).sum::<f64>().sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(set)
}

/// One-dimensional Agmon distance `int_a^b sqrt(min(V1, V2)_+) dx`.
///
/// The interval is split at sign changes of `V1`, `V2` and `V1 - V2` so that
/// every kink and square-root endpoint of the integrand sits on a panel edge.
pub fn agmon_distance_1d(model: &ModelConfig, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let density = |x: f64| model.metric(&[x]).sqrt();
    let n = (((hi - lo) / 1e-3).ceil() as usize).clamp(64, 20_000);
    let mut breaks = vec![lo, hi];
    breaks.extend(sign_change_roots(|x| model.v1(&[x]), lo, hi, n));
    breaks.extend(sign_change_roots(|x| model.v2(&[x]), lo, hi, n));
    breaks.extend(sign_change_roots(|x| model.v1(&[x]) - model.v2(&[x]), lo, hi, n));
    breaks.extend(model.well.iter().copied().filter(|w| *w > lo && *w < hi));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    integrate_with_breaks(density, &breaks, 1e-12, 1e-15)
}

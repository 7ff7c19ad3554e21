use super::assemble::DistortedOperator;
use crate::error::{Error, Result};
use crate::model::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Relative eigenvalue change (against `|shift|`) that ends the iteration.
    pub tol: f64,
    pub max_iterations: usize,
    /// Iterations run after the stopping test passes.
    pub polish: usize,
    /// Seed for perturbed-shift retries after a factorization breakdown.
    pub seed: u64,
    pub retries: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-13, max_iterations: 500, polish: 2, seed: 0, retries: 3 }
    }
}

/// Eigenpair of a distorted operator.
#[derive(Clone, Debug)]
pub struct ResonancePair {
    pub rho: C64,
    /// `sigma + (u.u)/(u.w)` with `w = (H - sigma)^{-1} u` is `rho`; this is the
    /// direct quotient `u.Hu / u.u`, kept for comparison.
    pub rho_direct: C64,
    /// Interleaved grid vector (similarity-transformed), c-normalized:
    /// `sum u.u dx = 1`.
    pub vector: Vec<C64>,
    /// `||(H - rho) u|| / (||H|| ||u||)`.
    pub residual: f64,
    pub iterations: usize,
    /// `sum u.u dx` after normalization (1 up to rounding).
    pub c_norm: C64,
    /// Hermitian norm `sqrt(sum |u|^2 dx)` of the c-normalized vector.
    pub l2_norm: f64,
    pub shift: C64,
    /// The eigenvalue landed far from the shift.
    pub far_from_shift: bool,
}

impl ResonancePair {
    pub fn to_json(&self) -> Value {
        json!({
            "rho_re": self.rho.re,
            "rho_im": self.rho.im,
            "rho_direct_re": self.rho_direct.re,
            "rho_direct_im": self.rho_direct.im,
            "residual": self.residual,
            "iterations": self.iterations,
            "c_norm_re": self.c_norm.re,
            "c_norm_im": self.c_norm.im,
            "l2_norm": self.l2_norm,
            "shift_re": self.shift.re,
            "shift_im": self.shift.im,
            "far_from_shift": self.far_from_shift,
        })
    }

    /// Per-channel grid functions of the undistorted state, `u / sqrt(g)`.
    pub fn channels(&self, op: &DistortedOperator) -> Vec<Vec<C64>> {
        op.split(&self.vector)
            .into_iter()
            .map(|ch| ch.iter().zip(&op.g).map(|(u, g)| u / g.sqrt()).collect())
            .collect()
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(a: &mut [C64], s: C64) {
    for v in a.iter_mut() {
        *v *= s;
    }
}

/// Shift-invert iteration for the eigenvalue of `op` nearest `shift`.
pub fn find_resonance(op: &DistortedOperator, shift: C64, tol: f64) -> Result<ResonancePair> {
    find_resonance_with(op, shift, &SolverOptions { tol, ..SolverOptions::default() })
}

pub fn find_resonance_with(op: &DistortedOperator, shift: C64, opts: &SolverOptions) -> Result<ResonancePair> {
    if !(opts.tol >= 1e-13 * (1.0 - 1e-9)) {
        return Err(Error::Precondition(format!("tol = {:e} below 1e-13", opts.tol)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut sigma = shift;
    let mut attempt = 0;
    loop {
        match op.matrix.shifted(sigma).lu() {
            Ok(lu) => return iterate(op, &lu, shift, sigma, opts),
            Err(Error::FactorizationBreakdown { pivot }) => {
                if attempt >= opts.retries {
                    return Err(Error::FactorizationBreakdown { pivot });
                }
                attempt += 1;
                let f: f64 = rng.random_range(0.5..1.5);
                sigma = shift + C64::new(1.0, 1.0) * 1e-8 * f * attempt as f64;
            }
            Err(e) => return Err(e),
        }
    }
}

fn start_vector(op: &DistortedOperator) -> Vec<C64> {
    // ground state of the closed channel's harmonic approximation, with a
    // small component everywhere so no eigenvector is orthogonal to it
    let h = op.h;
    let last = op.channels - 1;
    let mut v = vec![C64::new(0.0, 0.0); op.matrix.n];
    for (i, &x) in op.x.iter().enumerate() {
        let d = x - op.well;
        for c in 0..op.channels {
            let bump = if c == last { (-0.5 * d * d / h).exp() } else { 0.0 };
            v[i * op.channels + c] = C64::new(bump + 1e-6 * (1.0 + 0.1 * (i % 7) as f64), 0.0);
        }
    }
    v
}

fn iterate(
    op: &DistortedOperator,
    lu: &super::banded::BandLu,
    shift: C64,
    sigma: C64,
    opts: &SolverOptions,
) -> Result<ResonancePair> {
    let hnorm = op.inf_norm();
    let mut u = start_vector(op);
    let mut y = u.clone();
    let mut rho = sigma;
    let mut last_change = f64::INFINITY;
    let mut polished = 0;
    let mut converged = false;
    for it in 1..=opts.max_iterations {
        let w = lu.solve(&u);
        let q = if op.symmetric {
            dot(&u, &u) / dot(&u, &w)
        } else {
            let yw = dot(&y, &w);
            let q = dot(&y, &u) / yw;
            let mut yn = lu.solve_transpose(&y);
            let s = norm2(&yn);
            scale(&mut yn, C64::new(1.0 / s, 0.0));
            y = yn;
            q
        };
        let new_rho = sigma + q;
        last_change = (new_rho - rho).norm();
        rho = new_rho;
        u = w;
        let s = norm2(&u);
        scale(&mut u, C64::new(1.0 / s, 0.0));

        if converged {
            polished += 1;
            if polished >= opts.polish {
                return Ok(finish(op, u, &y, rho, shift, hnorm, it));
            }
            continue;
        }
        if last_change < opts.tol * shift.norm().max(1e-300) {
            let res = residual(op, &u, rho, hnorm);
            if res < 1e-10 {
                converged = true;
                if opts.polish == 0 {
                    return Ok(finish(op, u, &y, rho, shift, hnorm, it));
                }
            }
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations, last_change })
}

fn residual(op: &DistortedOperator, u: &[C64], rho: C64, hnorm: f64) -> f64 {
    let hu = op.matrix.matvec(u);
    let r: Vec<C64> = hu.iter().zip(u).map(|(a, b)| a - rho * b).collect();
    norm2(&r) / (hnorm * norm2(u))
}

fn finish(
    op: &DistortedOperator,
    mut u: Vec<C64>,
    y: &[C64],
    rho: C64,
    shift: C64,
    hnorm: f64,
    iterations: usize,
) -> ResonancePair {
    let hu = op.matrix.matvec(&u);
    let rho_direct = if op.symmetric { dot(&u, &hu) / dot(&u, &u) } else { dot(y, &hu) / dot(y, &u) };
    let res = residual(op, &u, rho, hnorm);
    // c-normalize: sum u.u dx = 1, phase fixed by the largest entry being real positive
    let cn = dot(&u, &u) * op.dx;
    scale(&mut u, C64::new(1.0, 0.0) / cn.sqrt());
    let big = u.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(C64::new(1.0, 0.0));
    if big.re < 0.0 {
        scale(&mut u, C64::new(-1.0, 0.0));
    }
    let c_norm = dot(&u, &u) * op.dx;
    let l2 = (u.iter().map(|v| v.norm_sqr()).sum::<f64>() * op.dx).sqrt();
    ResonancePair {
        rho,
        rho_direct,
        vector: u,
        residual: res,
        iterations,
        c_norm,
        l2_norm: l2,
        shift,
        far_from_shift: (rho - shift).norm() > 0.25 * shift.norm() + 1e-3,
    }
}

/// One row of a distortion-angle scan.
#[derive(Clone, Debug)]
pub struct PlateauRow {
    pub theta: f64,
    pub rho: C64,
}

#[derive(Clone, Debug)]
pub struct PlateauReport {
    pub rows: Vec<PlateauRow>,
    /// `max |rho_a - rho_b| / |Im rho|` over pairs of included rows.
    pub max_relative_deviation: f64,
    /// Largest pairwise change of `Im rho` relative to `|Im rho|`.
    pub max_im_deviation: f64,
    pub warnings: Vec<String>,
}

/// Recomputes the resonance for each `theta` and measures how much it moves.
pub fn theta_plateau<F>(factory: F, shift: C64, thetas: &[f64], tol: f64) -> Result<PlateauReport>
where
    F: Fn(f64) -> Result<DistortedOperator>,
{
    if thetas.len() < 3 {
        return Err(Error::Precondition(format!("theta plateau needs at least 3 angles, got {}", thetas.len())));
    }
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &t in thetas {
        if t == 0.0 {
            warnings.push("theta = 0 gives the undistorted operator (no width); excluded".into());
            continue;
        }
        let op = factory(t)?;
        let p = find_resonance(&op, shift, tol)?;
        rows.push(PlateauRow { theta: t, rho: p.rho });
    }
    if rows.len() < 2 {
        return Err(Error::Precondition("fewer than two nonzero angles".into()));
    }
    let im = rows.iter().map(|r| r.rho.im.abs()).fold(0.0, f64::max).max(1e-300);
    let mut dev: f64 = 0.0;
    let mut dev_im: f64 = 0.0;
    for a in &rows {
        for b in &rows {
            dev = dev.max((a.rho - b.rho).norm() / im);
            dev_im = dev_im.max((a.rho.im - b.rho.im).abs() / im);
        }
    }
    Ok(PlateauReport { rows, max_relative_deviation: dev, max_im_deviation: dev_im, warnings })
}

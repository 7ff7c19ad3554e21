use super::crossing::CrossingFrame;
use crate::error::{Error, Result};
use crate::geometry::AgmonField;
use crate::model::{CouplingSpec, ModelConfig, C64};
use crate::numerics::integrate;
use crate::spectral::{DistortedOperator, ResonancePair};

/// Below this distance from the well the transport integrand is extrapolated
/// linearly: its limit exists but `0/0` cancels there.
const WELL_CUTOFF: f64 = 0.02;
/// `|phi'|` below this inside a segment is treated as a caustic.
const CAUSTIC_TOL: f64 = 1e-8;

/// Leading transport amplitudes along a one-dimensional path through a crossing.
#[derive(Clone, Debug)]
pub struct TransportSolution {
    model: ModelConfig,
    pub rho1: f64,
    pub direction: f64,
    pub x_c: f64,
    /// Channel 2 nodes, from the well to `x_c`.
    pub x2: Vec<f64>,
    pub a20: Vec<C64>,
    /// Channel 1 nodes, from `x_c` outward.
    pub x1: Vec<f64>,
    pub a1: Vec<C64>,
    /// Channel 1 amplitude at `x_c`, created by the coupling.
    pub beta: C64,
    /// Amplitude scale at the well.
    pub a0: C64,
}

fn symbol_at(c: &CouplingSpec, x: f64, xi: C64) -> C64 {
    c.symbol(&[C64::new(x, 0.0)], &[xi])
}

/// Path derivatives `(dphi/dt, d2phi/dt2)` of the channel `j` phase with
/// `t = s (x - well)`; the momentum is `xi = s dphi/dt`.
fn phase_derivs(model: &ModelConfig, j: usize, x: f64, s: f64) -> Result<(f64, f64)> {
    let jet = if j == 1 { model.v1_jet(&[x])? } else { model.v2_jet(&[x])? };
    let d = jet.v.re.max(0.0).sqrt();
    if d < CAUSTIC_TOL {
        return Err(Error::Caustic { x });
    }
    Ok((d, s * jet.g[0].re / (2.0 * d)))
}

/// `d ln a / dt` for channel `j`: `(rho1 - r_jj(x, i phi') - phi'') / (2 phi')`.
fn log_rate(model: &ModelConfig, j: usize, rho1: f64, x: f64, s: f64) -> Result<C64> {
    let (dp, d2p) = phase_derivs(model, j, x, s)?;
    let r = if j == 1 { &model.couplings.r11 } else { &model.couplings.r22 };
    let rjj = symbol_at(r, x, C64::new(0.0, s * dp));
    Ok((C64::new(rho1, 0.0) - rjj - d2p) / (2.0 * dp))
}

/// `int` of a complex-valued function, real and imaginary parts separately.
fn cintegrate<F: Fn(f64) -> C64>(f: F, a: f64, b: f64) -> C64 {
    if a == b {
        return C64::new(0.0, 0.0);
    }
    let (lo, hi, sgn) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let re = integrate(|t| f(t).re, lo, hi, 1e-12, 1e-15);
    let im = integrate(|t| f(t).im, lo, hi, 1e-12, 1e-15);
    C64::new(re, im) * sgn
}

impl TransportSolution {
    /// Channel 2 amplitude at `x` between the well and the crossing.
    pub fn a20_at(&self, x: f64) -> Result<C64> {
        let well = self.model.well[0];
        let t = self.direction * (x - well);
        let tc = self.direction * (self.x_c - well);
        if !(0.0..=tc + 1e-12).contains(&t) {
            return Err(Error::Precondition(format!("x = {x} outside the channel 2 segment")));
        }
        Ok(self.a0 * channel2_log(&self.model, self.rho1, self.direction, x)?.exp())
    }
}

/// `ln a20(x)` with `a20(well) = 1`.
fn channel2_log(model: &ModelConfig, rho1: f64, s: f64, x: f64) -> Result<C64> {
    let well = model.well[0];
    let t = s * (x - well);
    if t <= 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let d = WELL_CUTOFF;
    let fa = log_rate(model, 2, rho1, well + s * d, s)?;
    let fb = log_rate(model, 2, rho1, well + s * 2.0 * d, s)?;
    // integral of fa + (fb - fa)(tau - d)/d over [0, te]
    let te = t.min(d);
    let near = fa * te + (fb - fa) * ((0.5 * te * te - d * te) / d);
    if t <= d {
        return Ok(near);
    }
    let far = cintegrate(|tt| log_rate(model, 2, rho1, well + s * tt, s).unwrap_or(C64::new(f64::NAN, 0.0)), d, t);
    if !far.re.is_finite() {
        return Err(Error::Caustic { x });
    }
    Ok(near + far)
}

/// Transport from the well through the crossing.
///
/// `rho1` is the first-order energy coefficient, normally the harmonic level
/// of the well; `a0` scales the channel 2 amplitude at the well. The channel 1
/// segment runs from the crossing to the frame's outer edge.
pub fn transport_leading(model: &ModelConfig, frame: &CrossingFrame, rho1: f64, a0: C64, nodes: usize) -> Result<TransportSolution> {
    if model.dimension != 1 {
        return Err(Error::Precondition("transport is one-dimensional".into()));
    }
    if nodes < 2 {
        return Err(Error::Precondition("transport needs at least 2 nodes per segment".into()));
    }
    let s = frame.direction;
    let well = model.well[0];
    let x_c = frame.x_c;
    let x_end = *frame.x.last().unwrap();
    let x_end = if s > 0.0 { x_end } else { frame.x[0] };

    let x2: Vec<f64> = (0..=nodes).map(|i| well + (x_c - well) * i as f64 / nodes as f64).collect();
    let a20 = x2
        .iter()
        .map(|&x| Ok(a0 * channel2_log(model, rho1, s, x)?.exp()))
        .collect::<Result<Vec<_>>>()?;
    let a2c = *a20.last().unwrap();

    let (dp1, _) = phase_derivs(model, 1, x_c, s)?;
    let r12 = symbol_at(&model.couplings.r12, x_c, C64::new(0.0, s * dp1));
    let beta = -r12 * a2c / (2.0 * dp1 * frame.z_prime);

    let x1: Vec<f64> = (0..=nodes).map(|i| x_c + (x_end - x_c) * i as f64 / nodes as f64).collect();
    let mut a1 = Vec::with_capacity(x1.len());
    let mut acc = C64::new(0.0, 0.0);
    a1.push(beta);
    for w in x1.windows(2) {
        phase_derivs(model, 1, w[1], s)?;
        // t-integral; dt = s dx
        let (ta, tb) = (s * (w[0] - well), s * (w[1] - well));
        acc += cintegrate(|tt| log_rate(model, 1, rho1, well + s * tt, s).unwrap_or(C64::new(f64::NAN, 0.0)), ta, tb);
        if !acc.re.is_finite() {
            return Err(Error::Caustic { x: w[1] });
        }
        a1.push(beta * acc.exp());
    }
    Ok(TransportSolution { model: model.clone(), rho1, direction: s, x_c, x2, a20, x1, a1, beta, a0 })
}

/// Agreement between a computed resonant state and its WKB form on a window.
#[derive(Clone, Debug)]
pub struct WkbCheck {
    pub window: (f64, f64),
    /// `max |r - mean r| / |mean r|`, `r = u2 e^{phi/h} / a20`.
    pub deviation: f64,
    pub mean_ratio: C64,
    pub points: usize,
}

/// Largest `phi/h` for which `e^{-phi/h}` stays a normal double.
pub const MAX_EXPONENT: f64 = 667.0;

/// Compares the channel 2 component of `pair` with `a20 e^{-phi/h}`.
///
/// The window must lie between the well and the crossing, at least 0.2 from both.
pub fn wkb_state_check(
    transport: &TransportSolution,
    pair: &ResonancePair,
    op: &DistortedOperator,
    field: &AgmonField,
    window: (f64, f64),
) -> Result<WkbCheck> {
    wkb_state_check_with(transport, pair, op, |x| field.value(&[x]), window)
}

/// As [`wkb_state_check`] with the phase supplied as a function.
pub fn wkb_state_check_with<F: Fn(f64) -> f64>(
    transport: &TransportSolution,
    pair: &ResonancePair,
    op: &DistortedOperator,
    phi_at: F,
    window: (f64, f64),
) -> Result<WkbCheck> {
    let s = transport.direction;
    let well = transport.model.well[0];
    let (lo, hi) = (window.0.min(window.1), window.0.max(window.1));
    let tc = s * (transport.x_c - well);
    for x in [lo, hi] {
        let t = s * (x - well);
        if t < 0.2 - 1e-12 || t > tc - 0.2 + 1e-12 {
            return Err(Error::Precondition(format!(
                "window [{lo}, {hi}] must stay 0.2 away from the well and the crossing"
            )));
        }
    }
    let channels = pair.channels(op);
    let u2 = &channels[op.channels - 1];
    let h = op.h;
    let mut ratios = Vec::new();
    for (i, &x) in op.x.iter().enumerate() {
        if x < lo || x > hi {
            continue;
        }
        let phi = phi_at(x);
        if phi / h > MAX_EXPONENT {
            return Err(Error::Underflow { exponent: -phi / h });
        }
        let a = transport.a20_at(x)?;
        ratios.push(u2[i] * (phi / h).exp() / a);
    }
    if ratios.len() < 2 {
        return Err(Error::Precondition("window contains fewer than two grid nodes".into()));
    }
    let mean = ratios.iter().sum::<C64>() / ratios.len() as f64;
    let deviation = ratios.iter().map(|r| (r - mean).norm()).fold(0.0, f64::max) / mean.norm();
    Ok(WkbCheck { window: (lo, hi), deviation, mean_ratio: mean, points: ratios.len() })
}

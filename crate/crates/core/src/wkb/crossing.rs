use crate::error::{Error, Result};
use crate::geometry::agmon_distance_1d;
use crate::model::ModelConfig;
use crate::numerics::integrate;

/// Smallest `|V1' - V2'|` at the crossing for the frame to be built.
pub const MIN_SLOPE_GAP: f64 = 1e-3;

/// Local phases and the Weber variable around a one-dimensional crossing.
///
/// `phi2` is the distance from the well measured with `V2`, `phi1` continues
/// it with `V1` from the crossing, and `z = +-sqrt(2 (phi2 - phi1))` is
/// negative on the side of the well.
#[derive(Clone, Debug)]
pub struct CrossingFrame {
    pub x_c: f64,
    /// `+1` when the crossing lies to the right of the well.
    pub direction: f64,
    pub x: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub dphi1: Vec<f64>,
    pub dphi2: Vec<f64>,
    pub psi: Vec<f64>,
    pub z: Vec<f64>,
    /// `dz/dx` at the crossing.
    pub z_prime: f64,
    /// Index of `x_c` in `x`.
    pub center: usize,
}

impl CrossingFrame {
    pub fn spacing(&self) -> f64 {
        self.x[1] - self.x[0]
    }
}

fn sqrt_pos(v: f64) -> f64 {
    v.max(0.0).sqrt()
}

/// Builds the frame on `2 n + 1` nodes over `[x_c - half_width, x_c + half_width]`.
pub fn crossing_frame(model: &ModelConfig, x_c: f64, half_width: f64, n: usize) -> Result<CrossingFrame> {
    if model.dimension != 1 {
        return Err(Error::Precondition("crossing frames are one-dimensional".into()));
    }
    if !(half_width > 0.0) || n < 2 {
        return Err(Error::Precondition("frame needs a positive half-width and at least 5 nodes".into()));
    }
    let well = model.well[0];
    let s = if x_c >= well { 1.0 } else { -1.0 };
    if (x_c - well).abs() <= half_width {
        return Err(Error::Precondition("frame reaches the well".into()));
    }
    let v1 = |x: f64| model.v1(&[x]);
    let v2 = |x: f64| model.v2(&[x]);
    let j1 = model.v1_jet(&[x_c])?;
    let j2 = model.v2_jet(&[x_c])?;
    let vc = 0.5 * (j1.v.re + j2.v.re);
    if (j1.v.re - j2.v.re).abs() > 1e-8 * (1.0 + vc.abs()) {
        return Err(Error::Precondition(format!("V1 != V2 at x_c = {x_c}")));
    }
    // slope of V2 - V1 along the outward direction
    let gap = s * (j2.g[0].re - j1.g[0].re);
    if gap.abs() < MIN_SLOPE_GAP || !(vc > 0.0) {
        return Err(Error::NonTransversal { x: x_c, margin: gap.abs() });
    }
    if gap < 0.0 {
        return Err(Error::Precondition("V2 must exceed V1 beyond the crossing".into()));
    }
    let z_prime = (gap / (2.0 * vc.sqrt())).sqrt();

    let dx = half_width / n as f64;
    let x: Vec<f64> = (0..=2 * n).map(|i| x_c + (i as f64 - n as f64) * dx).collect();
    for &xi in &x {
        if v1(xi) <= 0.0 {
            return Err(Error::Caustic { x: xi });
        }
    }
    let phi2_c = agmon_integral(v2, well, x_c);
    let mut phi1 = Vec::with_capacity(x.len());
    let mut phi2 = Vec::with_capacity(x.len());
    let mut z = Vec::with_capacity(x.len());
    for &xi in &x {
        let p2 = phi2_c + s * signed_integral(|t| sqrt_pos(v2(t)), x_c, xi);
        let p1 = phi2_c + s * signed_integral(|t| sqrt_pos(v1(t)), x_c, xi);
        // phi2 - phi1 without cancellation
        let delta = s * signed_integral(
            |t| {
                let (a, b) = (sqrt_pos(v1(t)), sqrt_pos(v2(t)));
                if a + b > 0.0 {
                    (v2(t) - v1(t)) / (a + b)
                } else {
                    0.0
                }
            },
            x_c,
            xi,
        );
        let side = s * (xi - x_c);
        let zi = if side.abs() < 0.5 * dx {
            0.0
        } else {
            side.signum() * (2.0 * delta.max(0.0)).sqrt()
        };
        phi1.push(p1);
        phi2.push(p2);
        z.push(zi);
    }
    let dphi1 = x.iter().map(|&t| s * sqrt_pos(v1(t))).collect();
    let dphi2 = x.iter().map(|&t| s * sqrt_pos(v2(t))).collect();
    let psi = phi1.iter().zip(&phi2).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(CrossingFrame { x_c, direction: s, x, phi1, phi2, dphi1, dphi2, psi, z, z_prime, center: n })
}

/// `int_a^b f` with the orientation kept.
fn signed_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a < b {
        integrate(f, a, b, 1e-13, 1e-16)
    } else {
        -integrate(f, b, a, 1e-13, 1e-16)
    }
}

/// `int sqrt(V_+)` from `a` to `b` (unsigned).
fn agmon_integral<F: Fn(f64) -> f64>(v: F, a: f64, b: f64) -> f64 {
    signed_integral(|t| sqrt_pos(v(t)), a.min(b), a.max(b))
}

/// Largest `|phi_j - phi|` over the frame, with `phi2` compared on the well
/// side and `phi1` beyond the crossing.
pub fn frame_agmon_mismatch(model: &ModelConfig, frame: &CrossingFrame) -> f64 {
    let well = model.well[0];
    frame
        .x
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let phi = agmon_distance_1d(model, well, x);
            let side = frame.direction * (x - frame.x_c);
            let own = if side <= 0.0 { frame.phi2[i] } else { frame.phi1[i] };
            (own - phi).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::preset;

    const XC: f64 = 0.9510350731501721;

    fn frame(n: usize) -> CrossingFrame {
        crossing_frame(&preset("canonical-1d").unwrap(), XC, 0.2, n).unwrap()
    }

    #[test]
    fn phases_meet_at_the_crossing() {
        let f = frame(200);
        let c = f.center;
        assert!((f.phi1[c] - f.phi2[c]).abs() < 1e-14);
        assert!((f.dphi1[c] - f.dphi2[c]).abs() < 1e-7);
        assert_eq!(f.z[c], 0.0);
        assert!(f.z[c - 1] < 0.0 && f.z[c + 1] > 0.0);
    }

    #[test]
    fn eikonal_equations_hold() {
        let m = preset("canonical-1d").unwrap();
        let f = frame(200);
        let h = f.spacing();
        for i in 2..f.x.len() - 2 {
            // fourth-order differences of the tabulated phases
            let d = |p: &[f64]| (p[i - 2] - 8.0 * p[i - 1] + 8.0 * p[i + 1] - p[i + 2]) / (12.0 * h);
            let (d1, d2) = (d(&f.phi1), d(&f.phi2));
            assert!((d1 * d1 - m.v1(&[f.x[i]])).abs() < 1e-8);
            assert!((d2 * d2 - m.v2(&[f.x[i]])).abs() < 1e-8);
        }
    }

    #[test]
    fn phases_agree_with_the_agmon_distance() {
        let m = preset("canonical-1d").unwrap();
        assert!(frame_agmon_mismatch(&m, &frame(50)) < 1e-6);
    }

    #[test]
    fn weber_variable_is_c1_across_the_crossing() {
        for n in [200, 400] {
            let f = frame(n);
            let (c, h) = (f.center, f.spacing());
            // second-order one-sided differences from each side
            let left = (3.0 * f.z[c] - 4.0 * f.z[c - 1] + f.z[c - 2]) / (2.0 * h);
            let right = (-3.0 * f.z[c] + 4.0 * f.z[c + 1] - f.z[c + 2]) / (2.0 * h);
            assert!((left - right).abs() <= 1e-4, "n = {n}: {left} vs {right}");
            assert!((0.5 * (left + right) - f.z_prime).abs() < 1e-4);
        }
    }

    #[test]
    fn rejects_non_transversal_crossing() {
        use crate::model::{Couplings, Expr, ModelConfig};
        // V1 - V2 = (x - 1)^2 near x = 1: tangency
        let v2 = Expr::pow(Expr::x(), 2);
        let v1 = Expr::add(v2.clone(), Expr::pow(Expr::sub(Expr::x(), Expr::c(1.0)), 2));
        let m = ModelConfig::new("tangent", 1, v1, v2, Couplings::default(), vec![0.0]).unwrap();
        assert!(matches!(crossing_frame(&m, 1.0, 0.2, 10), Err(Error::NonTransversal { .. })));
    }
}

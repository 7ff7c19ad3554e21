//! Weber functions `Y_{0,eps}`: solutions of `Y'' + (1/2 - eps - z^2/4) Y = 0`
//! with `Y ~ sqrt(2 pi) / Gamma(eps) e^{z^2/4} z^{eps - 1}` as `z -> +inf`.
//!
//! With `a = eps - 1/2` and `U(a, z)` the recessive parabolic cylinder
//! function, `Y = U(a, -z) - cos(pi eps) U(a, z)`, entire in `eps`.

use crate::error::{Error, Result};
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

/// Start of the asymptotic regime for the recessive solution.
const X_ASYMPTOTIC: f64 = 15.0;
const STEP: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeberMethod {
    /// A single Taylor expansion about the origin.
    PowerSeries,
    /// Large-`z` expansion of the recessive part.
    Asymptotic,
    /// Taylor stepping of the ODE.
    OdeContinuation,
    /// Identically zero (`eps` a nonpositive integer).
    Trivial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeberEval {
    pub epsilon: f64,
    pub z: f64,
    pub value: f64,
    pub derivative: f64,
    pub method: WeberMethod,
}

/// `1 / Gamma(x)`, zero at the poles.
fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.round() {
        0.0
    } else {
        1.0 / statrs::function::gamma::gamma(x)
    }
}

/// `(U(a, 0), U'(a, 0))`.
fn u_at_zero(a: f64) -> (f64, f64) {
    let sp = PI.sqrt();
    let u = sp * 2f64.powf(-0.5 * a - 0.25) * rgamma(0.75 + 0.5 * a);
    let du = -sp * 2f64.powf(-0.5 * a + 0.25) * rgamma(0.25 + 0.5 * a);
    (u, du)
}

/// One Taylor step of `y'' = (z^2/4 + a) y` from `z0` by `t`.
/// Returns `(y, y', y'')` at `z0 + t`, all from the truncated series.
fn taylor_step(a: f64, z0: f64, y: f64, dy: f64, t: f64) -> (f64, f64, f64) {
    let q0 = a + 0.25 * z0 * z0;
    // scaled coefficients d_n = c_n t^n
    let mut d = vec![y, dy * t];
    let t2 = t * t;
    let mut small = 0;
    for n in 0..400usize {
        let nf = n as f64;
        let dm1 = if n >= 1 { d[n - 1] * t } else { 0.0 };
        let dm2 = if n >= 2 { d[n - 2] * t2 } else { 0.0 };
        let next = t2 * (q0 * d[n] + 0.5 * z0 * dm1 + 0.25 * dm2) / ((nf + 2.0) * (nf + 1.0));
        d.push(next);
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if next.abs() * (nf + 2.0) * (nf + 2.0) <= 1e-18 * scale {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
    }
    let s: f64 = d.iter().sum();
    let ds: f64 = d.iter().enumerate().skip(1).map(|(n, v)| n as f64 * v).sum::<f64>() / t;
    let d2s: f64 = d.iter().enumerate().skip(2).map(|(n, v)| (n * (n - 1)) as f64 * v).sum::<f64>() / t2;
    (s, ds, d2s)
}

/// Integrates from `(z0, y, y')` to `z1` in steps of at most [`STEP`].
fn continue_to(a: f64, z0: f64, y: f64, dy: f64, z1: f64) -> (f64, f64, f64) {
    let n = ((z1 - z0).abs() / STEP).ceil().max(1.0) as usize;
    let t = (z1 - z0) / n as f64;
    let (mut z, mut y, mut dy, mut d2y) = (z0, y, dy, (0.25 * z0 * z0 + a) * y);
    for _ in 0..n {
        let r = taylor_step(a, z, y, dy, t);
        y = r.0;
        dy = r.1;
        d2y = r.2;
        z += t;
    }
    (y, dy, d2y)
}

/// Large-`x` expansion of `(U(a, x), U'(a, x))`, summed to the smallest term.
fn u_asymptotic(a: f64, x: f64) -> (f64, f64) {
    // U = e^{-x^2/4} x^{-a-1/2} S, S = sum c_s x^{-2s},
    // c_s = (-1)^s (1/2 + a)_{2s} / (s! 2^s)
    let b = 0.5 + a;
    let x2 = x * x;
    let (mut c, mut sum, mut dsum, mut prev) = (1.0f64, 1.0f64, 0.0f64, f64::INFINITY);
    let mut xp = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        c *= -(b + 2.0 * kf - 2.0) * (b + 2.0 * kf - 1.0) / (2.0 * kf);
        xp /= x2;
        let term = c * xp;
        if term.abs() > prev {
            break;
        }
        sum += term;
        dsum += -2.0 * kf * term / x;
        prev = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    let e = (-0.25 * x2).exp() * x.powf(-a - 0.5);
    (e * sum, e * ((-0.5 * x - b / x) * sum + dsum))
}

/// Recessive `(U, U', U'')` at `x >= 0`, from the asymptotic regime inward.
fn u_recessive(a: f64, x: f64) -> (f64, f64, f64, bool) {
    if x >= X_ASYMPTOTIC {
        let (u, du) = u_asymptotic(a, x);
        return (u, du, (0.25 * x * x + a) * u, true);
    }
    let (u, du) = u_asymptotic(a, X_ASYMPTOTIC);
    let r = continue_to(a, X_ASYMPTOTIC, u, du, x);
    (r.0, r.1, r.2, false)
}

/// `(U, U', U'')` at `t <= 0`, from the origin outward.
fn u_outward(a: f64, t: f64) -> (f64, f64, f64) {
    let (u0, du0) = u_at_zero(a);
    if t == 0.0 {
        return (u0, du0, a * u0);
    }
    continue_to(a, 0.0, u0, du0, t)
}

fn check_range(eps: f64, z: f64) -> Result<()> {
    if !(-2.0..=5.0).contains(&eps) || !eps.is_finite() {
        return Err(Error::Range(format!("epsilon = {eps} outside [-2, 5]")));
    }
    if !(z.abs() <= 20.0) {
        return Err(Error::Range(format!("|z| = {} exceeds 20", z.abs())));
    }
    Ok(())
}

/// Evaluates `Y_{0,eps}(z)` and its derivative.
pub fn weber_y(eps: f64, z: f64) -> Result<WeberEval> {
    let (value, derivative, _, method) = weber_full(eps, z)?;
    Ok(WeberEval { epsilon: eps, z, value, derivative, method })
}

/// `(Y, Y', Y'', method)` where `Y''` comes from the same truncated series.
pub fn weber_full(eps: f64, z: f64) -> Result<(f64, f64, f64, WeberMethod)> {
    check_range(eps, z)?;
    if eps <= 0.0 && eps == eps.round() {
        return Ok((0.0, 0.0, 0.0, WeberMethod::Trivial));
    }
    let a = eps - 0.5;
    let c = (PI * eps).cos();
    let x = z.abs();
    // on each side: one factor grows away from 0 (outward), one decays (recessive)
    let (ro, dro, d2ro) = u_outward(a, -x);
    let (rr, drr, d2rr, asym) = u_recessive(a, x);
    let (y, dy, d2y) = if z >= 0.0 {
        // U(a, -z) - c U(a, z); d/dz U(a, -z) = -U'(a, -z)
        (ro - c * rr, -dro - c * drr, d2ro - c * d2rr)
    } else {
        // U(a, |z|) - c U(a, z) with z = -x
        (rr - c * ro, -drr - c * dro, d2rr - c * d2ro)
    };
    let method = if asym {
        WeberMethod::Asymptotic
    } else if x <= STEP {
        WeberMethod::PowerSeries
    } else {
        WeberMethod::OdeContinuation
    };
    Ok((y, dy, d2y, method))
}

/// `|Y'' + (1/2 - eps - z^2/4) Y|` with `Y''` from an eighth-order central
/// difference of independent evaluations at spacing `delta`.
pub fn weber_residual(eps: f64, z: f64, delta: f64) -> Result<f64> {
    const C: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    let y0 = weber_y(eps, z)?.value;
    let mut d2 = C[0] * y0;
    for (k, c) in C.iter().enumerate().skip(1) {
        let t = k as f64 * delta;
        d2 += c * (weber_y(eps, z + t)?.value + weber_y(eps, z - t)?.value);
    }
    d2 /= delta * delta;
    Ok((d2 + (0.5 - eps - 0.25 * z * z) * y0).abs())
}

/// `Y Gamma(eps) e^{-z^2/4} z^{1 - eps} / sqrt(2 pi)`, which tends to 1.
pub fn normalization_ratio(eps: f64, z: f64) -> Result<f64> {
    let y = weber_y(eps, z)?.value;
    let g = statrs::function::gamma::gamma(eps);
    Ok(y * g * (-0.25 * z * z).exp() * z.powf(1.0 - eps) / (2.0 * PI).sqrt())
}

/// `Y_{k,eps} = d^k/d eps^k Y_{0,eps}` by central differences in `eps`
/// (unvalidated utility).
pub fn weber_y_eps_derivative(k: usize, eps: f64, z: f64, step: f64) -> Result<f64> {
    match k {
        0 => Ok(weber_y(eps, z)?.value),
        _ => {
            let a = weber_y_eps_derivative(k - 1, eps + step, z, step)?;
            let b = weber_y_eps_derivative(k - 1, eps - step, z, step)?;
            Ok((a - b) / (2.0 * step))
        }
    }
}

/// Writes `epsilon,z,Y,dY` rows.
pub fn write_weber_csv<W: Write>(mut w: W, evals: &[WeberEval]) -> std::io::Result<()> {
    writeln!(w, "epsilon,z,Y,dY")?;
    for e in evals {
        writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", e.epsilon, e.z, e.value, e.derivative)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_one_is_gaussian_growth() {
        for i in 0..=120 {
            let z = -6.0 + 0.1 * i as f64;
            let y = weber_y(1.0, z).unwrap();
            let exact = (2.0 * PI).sqrt() * (0.25 * z * z).exp();
            assert!((y.value / exact - 1.0).abs() < 1e-10, "z = {z}: {}", y.value / exact - 1.0);
            assert!((y.derivative / (0.5 * z * exact) - 1.0).abs() < 1e-9 || z.abs() < 1e-9);
        }
        let y = weber_y(1.0, 2.0).unwrap().value;
        assert!((y - 6.813_722_089_6).abs() < 1e-9);
    }

    #[test]
    fn eps_zero_vanishes() {
        assert_eq!(weber_y(0.0, 3.0).unwrap().value, 0.0);
        assert_eq!(weber_y(-1.0, -3.0).unwrap().method, WeberMethod::Trivial);
    }

    #[test]
    fn recessive_part_matches_origin_values() {
        // inward continuation from z = 15 lands on the closed-form U(a, 0)
        for eps in [0.3, 0.5, 1.0, 2.0, 3.7] {
            let a = eps - 0.5;
            let (u, du, _, _) = u_recessive(a, 0.0);
            let (u0, du0) = u_at_zero(a);
            assert!((u - u0).abs() < 1e-12 * u0.abs().max(1e-3), "{eps}: {u} vs {u0}");
            assert!((du - du0).abs() < 1e-12 * du0.abs().max(1e-3), "{eps}: {du} vs {du0}");
        }
    }

    #[test]
    fn ode_residual_is_small() {
        for eps in [0.0, 0.3, 0.5, 1.0, 2.0] {
            for i in 0..200 {
                let z = -6.0 + 12.0 * i as f64 / 199.0;
                let y = weber_y(eps, z).unwrap().value;
                let r = weber_residual(eps, z, 0.05).unwrap();
                assert!(r <= 1e-8 * (1.0 + y.abs()), "eps {eps} z {z}: {r:e}");
            }
        }
    }

    #[test]
    fn series_second_derivative_satisfies_the_ode() {
        for eps in [0.3, 2.5, 4.9] {
            for z in [-12.0, -3.3, 0.1, 4.4, 17.0] {
                let (y, _, d2y, _) = weber_full(eps, z).unwrap();
                let r = d2y + (0.5 - eps - 0.25 * z * z) * y;
                assert!(r.abs() <= 1e-10 * (1.0 + y.abs() * (1.0 + 0.25 * z * z)), "{eps} {z}: {r:e}");
            }
        }
    }

    #[test]
    fn normalization_at_infinity() {
        for eps in [0.5, 1.0, 2.0] {
            let (r12, r16) = (normalization_ratio(eps, 12.0).unwrap(), normalization_ratio(eps, 16.0).unwrap());
            // ratio = 1 + c / z^2 + ...
            let rich = (256.0 * r16 - 144.0 * r12) / (256.0 - 144.0);
            assert!((rich - 1.0).abs() < 1e-4, "eps {eps}: {rich}");
        }
    }

    #[test]
    fn half_integer_eps_is_recessive_on_the_left() {
        // eps = 1/2: Y(z) = U(0, -z) since cos(pi/2) = 0
        let a = weber_y(0.5, -8.0).unwrap().value;
        let (u, _) = u_asymptotic(0.0, 15.0);
        assert!(a > 0.0 && a < 1e-6);
        assert!(u > 0.0);
    }

    #[test]
    fn range_is_enforced() {
        assert!(matches!(weber_y(1.0, 25.0), Err(Error::Range(_))));
        assert!(matches!(weber_y(6.0, 1.0), Err(Error::Range(_))));
    }

    #[test]
    fn csv_export() {
        let e = [weber_y(1.0, 0.0).unwrap(), weber_y(1.0, 1.0).unwrap()];
        let mut buf = Vec::new();
        write_weber_csv(&mut buf, &e).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.starts_with("epsilon,z,Y,dY\n"));
    }
}

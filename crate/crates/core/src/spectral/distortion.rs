use crate::error::{Error, Result};

/// Largest distortion angle accepted. Widths are computed at up to `3k`,
/// which exceeds 0.2 for `h >= 0.06`; analyticity on the contour is checked
/// pointwise during assembly instead.
pub const THETA_MAX: f64 = 1.0;

/// Exterior distortion `x -> x + i theta F(x)` with `F = 0` on `|x| <= r0` and
/// `F(x) = x` for `|x| >= r0 + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistortionSpec {
    pub r0: f64,
    /// Box half-width.
    pub l: f64,
    pub theta: f64,
}

/// `k = h ln(1/h)`, the default distortion angle.
pub fn default_theta(h: f64) -> f64 {
    h * (1.0 / h).ln()
}

impl DistortionSpec {
    pub const DEFAULT_R0: f64 = 3.0;

    pub fn new(r0: f64, l: f64, theta: f64) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::Precondition(format!("R0 = {r0} must be positive")));
        }
        if !(l >= r0 + 1.0) {
            return Err(Error::Precondition(format!("box half-width L = {l} must be at least R0 + 1")));
        }
        if !(0.0..=THETA_MAX).contains(&theta) {
            return Err(Error::Precondition(format!("theta = {theta} outside [0, {THETA_MAX}]")));
        }
        Ok(DistortionSpec { r0, l, theta })
    }

    /// `R0 = 3`, `L = R0 + 4`, `theta = h ln(1/h)`.
    pub fn for_h(h: f64) -> Self {
        DistortionSpec { r0: Self::DEFAULT_R0, l: Self::DEFAULT_R0 + 4.0, theta: default_theta(h) }
    }

    pub fn with_theta(self, theta: f64) -> Result<Self> {
        Self::new(self.r0, self.l, theta)
    }

    /// `(F, F', F'')` at `x`.
    pub fn ramp(&self, x: f64) -> (f64, f64, f64) {
        let t = x.abs() - self.r0;
        let (w, dw, d2w) = smoothstep(t);
        let a = x.abs();
        let s = x.signum();
        // F = sign(x) w(|x| - r0) |x| = w x
        (w * x, dw * a + w, s * (d2w * a + 2.0 * dw))
    }

    /// Contour point `z = x + i theta F(x)` and `g = dz/dx`.
    pub fn contour(&self, x: f64) -> (crate::model::C64, crate::model::C64) {
        let (f, df, _) = self.ramp(x);
        (crate::model::C64::new(x, self.theta * f), crate::model::C64::new(1.0, self.theta * df))
    }
}

/// Quintic smoothstep on [0, 1] with its first two derivatives.
fn smoothstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let t2 = t * t;
        (t2 * t * (10.0 - 15.0 * t + 6.0 * t2), 30.0 * t2 * (1.0 - t) * (1.0 - t), 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_shape() {
        let d = DistortionSpec::new(3.0, 7.0, 0.1).unwrap();
        assert_eq!(d.ramp(2.9), (0.0, 0.0, 0.0));
        assert_eq!(d.ramp(-1.0).0, 0.0);
        let (f, df, d2f) = d.ramp(4.5);
        assert_eq!((f, df, d2f), (4.5, 1.0, 0.0));
        assert_eq!(d.ramp(-5.0).0, -5.0);
        // monotone and C^2 across the joins
        let mut prev = d.ramp(2.0).0;
        for i in 0..=3000 {
            let x = 2.0 + i as f64 * 1e-3;
            let (f, df, _) = d.ramp(x);
            assert!(df >= 0.0 && f >= prev);
            prev = f;
        }
        for x in [3.0, 4.0, -3.0, -4.0] {
            let (a, b) = (d.ramp(x - 1e-7), d.ramp(x + 1e-7));
            assert!((a.1 - b.1).abs() < 1e-5 && (a.2 - b.2).abs() < 1e-4, "{x}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let d = DistortionSpec::new(3.0, 7.0, 0.1).unwrap();
        for x in [3.2, 3.5, 3.9, -3.3, -3.7] {
            let e = 1e-6;
            let fd = (d.ramp(x + e).0 - d.ramp(x - e).0) / (2.0 * e);
            let fd2 = (d.ramp(x + e).1 - d.ramp(x - e).1) / (2.0 * e);
            assert!((fd - d.ramp(x).1).abs() < 1e-7);
            assert!((fd2 - d.ramp(x).2).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DistortionSpec::new(3.0, 3.5, 0.1).is_err());
        assert!(DistortionSpec::new(3.0, 7.0, -0.1).is_err());
        assert!(DistortionSpec::new(3.0, 7.0, 1.5).is_err());
        assert!(DistortionSpec::new(0.0, 7.0, 0.1).is_err());
    }

    #[test]
    fn default_angle_is_k() {
        let d = DistortionSpec::for_h(0.08);
        assert!((d.theta - 0.08 * (12.5f64).ln()).abs() < 1e-15);
        assert_eq!((d.r0, d.l), (3.0, 7.0));
    }
}

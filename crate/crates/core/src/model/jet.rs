//! Second-order forward-mode jets over complex numbers.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to at most two coordinates. Expression trees are evaluated on jets
//! so that derivatives at the well and along geodesics are exact up to
//! rounding, with no finite differencing.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

pub type C64 = Complex64;

pub const MAX_DIM: usize = 2;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: C64,
    pub g: [C64; MAX_DIM],
    pub hs: [[C64; MAX_DIM]; MAX_DIM],
}

impl Jet {
    pub fn constant(v: C64) -> Self {
        Jet { v, g: [ZERO; MAX_DIM], hs: [[ZERO; MAX_DIM]; MAX_DIM] }
    }

    /// The coordinate function `x_k` evaluated at `v`.
    pub fn variable(v: C64, k: usize) -> Self {
        let mut j = Jet::constant(v);
        j.g[k] = C64::new(1.0, 0.0);
        j
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    pub fn chain(&self, f: C64, df: C64, d2f: C64) -> Self {
        let mut out = Jet::constant(f);
        for a in 0..MAX_DIM {
            out.g[a] = df * self.g[a];
            for b in 0..MAX_DIM {
                out.hs[a][b] = d2f * self.g[a] * self.g[b] + df * self.hs[a][b];
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn tanh(&self) -> Self {
        let t = tanh(self.v);
        let dt = sech2(self.v);
        self.chain(t, dt, -2.0 * t * dt)
    }

    pub fn recip(&self) -> Self {
        let r = self.v.inv();
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(&self, n: i32) -> Self {
        match n {
            0 => Jet::constant(C64::new(1.0, 0.0)),
            1 => *self,
            _ => {
                let nf = n as f64;
                let f = self.v.powi(n);
                let df = nf * self.v.powi(n - 1);
                let d2f = nf * (nf - 1.0) * self.v.powi(n - 2);
                self.chain(f, df, d2f)
            }
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        out.v *= s;
        for a in 0..MAX_DIM {
            out.g[a] *= s;
            for b in 0..MAX_DIM {
                out.hs[a][b] *= s;
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        self.v += o.v;
        for a in 0..MAX_DIM {
            self.g[a] += o.g[a];
            for b in 0..MAX_DIM {
                self.hs[a][b] += o.hs[a][b];
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for a in 0..MAX_DIM {
            out.g[a] = self.g[a] * o.v + self.v * o.g[a];
            for b in 0..MAX_DIM {
                out.hs[a][b] = self.hs[a][b] * o.v
                    + self.g[a] * o.g[b]
                    + self.g[b] * o.g[a]
                    + self.v * o.hs[a][b];
            }
        }
        out
    }
}

/// Overflow-free complex tanh; exact zero imaginary part on the real axis.
pub fn tanh(w: C64) -> C64 {
    if w.re < 0.0 {
        return -tanh(-w);
    }
    let e = (-2.0 * w).exp();
    (C64::new(1.0, 0.0) - e) / (C64::new(1.0, 0.0) + e)
}

/// `sech^2 w = 1 - tanh^2 w` without cancellation in the saturated tails.
pub fn sech2(w: C64) -> C64 {
    let w = if w.re < 0.0 { -w } else { w };
    let e = (-2.0 * w).exp();
    let d = C64::new(1.0, 0.0) + e;
    4.0 * e / (d * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_second_order() {
        // f = x^2 y at (2, 3)
        let x = Jet::variable(C64::new(2.0, 0.0), 0);
        let y = Jet::variable(C64::new(3.0, 0.0), 1);
        let f = x * x * y;
        assert_eq!(f.v.re, 12.0);
        assert_eq!(f.g[0].re, 12.0);
        assert_eq!(f.g[1].re, 4.0);
        assert_eq!(f.hs[0][0].re, 6.0);
        assert_eq!(f.hs[0][1].re, 4.0);
        assert_eq!(f.hs[1][1].re, 0.0);
    }

    #[test]
    fn tanh_saturates_without_overflow() {
        let t = tanh(C64::new(800.0, 0.3));
        assert!((t - C64::new(1.0, 0.0)).norm() < 1e-15);
        let t = tanh(C64::new(-800.0, 0.0));
        assert_eq!(t.re, -1.0);
        assert_eq!(t.im, 0.0);
        let d = sech2(C64::new(24.0, 0.0)).re;
        assert!((d / (4.0 * (-48f64).exp()) - 1.0).abs() < 1e-12);
    }
}

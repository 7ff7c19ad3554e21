use super::banded::BandMatrix;
use super::distortion::DistortionSpec;
use crate::error::{Error, Result};
use crate::model::{CouplingSpec, ModelConfig, C64};
use std::io::Write;

/// Discretized `P_theta` on `[-L, L]` with Dirichlet ends.
///
/// Unknowns are interleaved, `2 i + c` for node `i` and channel `c`, and the
/// stored matrix is the similarity transform `G^{1/2} P_theta G^{-1/2}`
/// (`G = diag(g)`), which is complex symmetric when no coupling has a
/// momentum term. Grid functions of the original operator are recovered by
/// dividing by `sqrt(g)`; on `|x| <= R0` the two coincide.
#[derive(Clone, Debug)]
pub struct DistortedOperator {
    pub h: f64,
    pub dist: DistortionSpec,
    /// Interior nodes.
    pub x: Vec<f64>,
    pub dx: f64,
    pub z: Vec<C64>,
    pub g: Vec<C64>,
    pub channels: usize,
    pub matrix: BandMatrix,
    /// Largest multiplicative 2x2 block (potentials and `h r`), row-sum norm.
    pub potential_norm: f64,
    /// True when the matrix equals its transpose by construction.
    pub symmetric: bool,
    pub model_name: String,
    pub well: f64,
}

/// Smallest admissible node count: spacing at most `h/4`, at least 500 nodes.
pub fn default_nodes(h: f64, l: f64) -> usize {
    (((2.0 * l) / (h / 4.0)).ceil() as usize + 1).max(500)
}

/// Relative size of the width floor against [`DistortedOperator::potential_norm`].
pub const FLOOR_FACTOR: f64 = 1e-13;

impl DistortedOperator {
    pub fn nodes(&self) -> usize {
        self.x.len()
    }

    pub fn inf_norm(&self) -> f64 {
        self.matrix.inf_norm()
    }

    /// Widths with `|Im rho|` below this value are not resolvable.
    pub fn floor(&self) -> f64 {
        FLOOR_FACTOR * self.potential_norm
    }

    /// Writes `row col re im` lines for every stored nonzero.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# n = {}, h = {}, theta = {}", self.matrix.n, self.h, self.dist.theta)?;
        for (i, j, v) in self.matrix.triplets() {
            writeln!(w, "{i} {j} {:.16e} {:.16e}", v.re, v.im)?;
        }
        Ok(())
    }

    /// The single-channel operator of channel `c` (0 or 1) with couplings to
    /// the other channel dropped.
    pub fn channel_block(&self, c: usize) -> Result<DistortedOperator> {
        if self.channels != 2 || c > 1 {
            return Err(Error::Precondition("channel_block needs a two-channel operator and c in {0, 1}".into()));
        }
        let m = self.nodes();
        let mut a = BandMatrix::zeros(m, 1, 1);
        for i in 0..m {
            for j in i.saturating_sub(1)..(i + 2).min(m) {
                a.add(i, j, self.matrix.get(2 * i + c, 2 * j + c));
            }
        }
        let mut out = self.clone();
        out.channels = 1;
        out.potential_norm = (0..m).map(|i| self.matrix.get(2 * i + c, 2 * i + c).norm()).fold(0.0, f64::max);
        out.matrix = a;
        Ok(out)
    }

    /// Splits an interleaved vector into per-channel grid functions.
    pub fn split(&self, v: &[C64]) -> Vec<Vec<C64>> {
        (0..self.channels).map(|c| v.iter().skip(c).step_by(self.channels).copied().collect()).collect()
    }
}

/// Assembles the distorted operator on `m` interior nodes.
pub fn assemble(model: &ModelConfig, dist: &DistortionSpec, h: f64, m: usize) -> Result<DistortedOperator> {
    if model.dimension != 1 {
        return Err(Error::Precondition("the spectral solver is one-dimensional".into()));
    }
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("h = {h} must be positive")));
    }
    if m < 500 {
        return Err(Error::Precondition(format!("M = {m} below the minimum of 500 nodes")));
    }
    let l = dist.l;
    let dx = 2.0 * l / (m + 1) as f64;
    if dx > h / 4.0 * (1.0 + 1e-12) {
        return Err(Error::Resolution { spacing: dx, limit: h / 4.0 });
    }
    let x: Vec<f64> = (0..m).map(|i| -l + (i + 1) as f64 * dx).collect();
    let contour: Vec<(C64, C64)> = x.iter().map(|&xi| dist.contour(xi)).collect();
    let z: Vec<C64> = contour.iter().map(|c| c.0).collect();
    let g: Vec<C64> = contour.iter().map(|c| c.1).collect();
    let g_half: Vec<C64> = (0..=m).map(|i| dist.contour(-l + (i as f64 + 0.5) * dx).1).collect();
    let sg: Vec<C64> = g.iter().map(|v| v.sqrt()).collect();

    let c = &model.couplings;
    let eval = |e: &crate::model::Expr, zi: C64| -> Result<C64> { Ok(e.eval_jet(&[zi])?.v) };
    let coef = |s: &CouplingSpec, zi: C64| -> Result<(C64, C64)> {
        Ok((s.a_at(&[zi])?, s.b_at(0, &[zi])?))
    };
    let mut a = BandMatrix::zeros(2 * m, 3, 3);
    let kin = h * h / (dx * dx);
    let one = C64::new(1.0, 0.0);
    let mi = C64::new(0.0, -1.0);
    let mut potential_norm: f64 = 0.0;
    let mut coeffs = Vec::with_capacity(m);
    for i in 0..m {
        let zi = z[i];
        let v1 = eval(&model.v1, zi)?;
        let v2 = eval(&model.v2, zi)?;
        let r11 = coef(&c.r11, zi)?;
        let r12 = coef(&c.r12, zi)?;
        let r22 = coef(&c.r22, zi)?;
        coeffs.push((r11.1, r12.1, r22.1));
        let d1 = v1 + h * r11.0;
        let d2 = v2 + h * r22.0;
        let off = h * r12.0;
        potential_norm = potential_norm.max(d1.norm() + off.norm()).max(d2.norm() + off.norm());

        let diag_kin = kin * (one / g_half[i] + one / g_half[i + 1]) / g[i];
        for ch in 0..2 {
            let p = 2 * i + ch;
            a.add(p, p, diag_kin + if ch == 0 { d1 } else { d2 });
            if i + 1 < m {
                let e = -kin / (g_half[i + 1] * sg[i] * sg[i + 1]);
                a.add(p, p + 2, e);
                a.add(p + 2, p, e);
            }
        }
        a.add(2 * i, 2 * i + 1, off);
        a.add(2 * i + 1, 2 * i, off);
    }

    // momentum terms: hD -> -i h D_theta with D_theta(i, i +- 1) = +-1 / (2 dx sqrt(g_i g_{i+-1}))
    let dth = |i: usize, j: usize| -> C64 {
        let s = if j > i { 1.0 } else { -1.0 };
        C64::new(s, 0.0) / (2.0 * dx * sg[i] * sg[j])
    };
    let has_b = c.has_momentum_terms();
    if has_b {
        let hh = h * h;
        for i in 0..m {
            for j in [i.wrapping_sub(1), i + 1] {
                if j >= m {
                    continue;
                }
                let d = dth(i, j) * mi * hh;
                let (b11i, b12i, b22i) = coeffs[i];
                let (b11j, b12j, b22j) = coeffs[j];
                // Weyl for the diagonal symbols: (b D + D b) / 2
                a.add(2 * i, 2 * j, d * 0.5 * (b11i + b11j));
                a.add(2 * i + 1, 2 * j + 1, d * 0.5 * (b22i + b22j));
                // r12 left quantized: b12(x) hD
                a.add(2 * i, 2 * j + 1, d * b12i);
                // r21 = adjoint: hD b12(x)
                a.add(2 * i + 1, 2 * j, d * b12j);
            }
        }
    }

    Ok(DistortedOperator {
        h,
        dist: *dist,
        x,
        dx,
        z,
        g,
        channels: 2,
        matrix: a,
        potential_norm,
        symmetric: !has_b,
        model_name: model.name.clone(),
        well: model.well[0],
    })
}

/// Assembles with the default node count for `h`.
pub fn assemble_default(model: &ModelConfig, dist: &DistortionSpec, h: f64) -> Result<DistortedOperator> {
    assemble(model, dist, h, default_nodes(h, dist.l))
}

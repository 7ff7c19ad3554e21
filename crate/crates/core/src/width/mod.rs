//! Width of a computed resonance from a commutator identity with a cutoff
//! around the island, and the weighted decay diagnostic.

use crate::error::{Error, Result};
use crate::geometry::{island_boundary, AgmonField, Grid};
use crate::model::{ModelConfig, C64};
use crate::numerics::linear_fit;
use crate::spectral::{default_theta, DistortedOperator, ResonancePair};
use serde::Serialize;
use std::io::Write;

/// The island around the well in one dimension: `V1 > 0` on `(lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Island {
    pub lo: f64,
    pub hi: f64,
    pub well: f64,
}

impl Island {
    pub fn of(model: &ModelConfig) -> Result<Self> {
        if model.dimension != 1 {
            return Err(Error::Precondition("island intervals are one-dimensional".into()));
        }
        let well = model.well[0];
        let set = island_boundary(model, &Grid::line(well - 10.0, well + 10.0, 20_001))?;
        let xs: Vec<f64> = set.points.iter().map(|p| p[0]).collect();
        let lo = xs.iter().copied().filter(|&x| x < well).fold(f64::NEG_INFINITY, f64::max);
        let hi = xs.iter().copied().filter(|&x| x > well).fold(f64::INFINITY, f64::min);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::NoSeaFound);
        }
        Ok(Island { lo, hi, well })
    }

    /// Distance from `x` to the island (zero inside).
    pub fn distance(&self, x: f64) -> f64 {
        (self.lo - x).max(x - self.hi).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Quintic smoothstep transition (C^2).
    Quintic,
    /// `e^{-1/t}` gluing (C^infinity).
    Smooth,
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quintic" => Ok(Profile::Quintic),
            "smooth" | "cinf" => Ok(Profile::Smooth),
            _ => Err(Error::Config(format!("unknown cutoff profile {s:?}"))),
        }
    }
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Quintic => "quintic",
            Profile::Smooth => "smooth",
        }
    }

    /// `(psi0, psi0', psi0'')` at `t >= 0`: 1 on `[0, 1]`, 0 from 2 on.
    pub fn eval(self, t: f64) -> (f64, f64, f64) {
        if t <= 1.0 {
            return (1.0, 0.0, 0.0);
        }
        if t >= 2.0 {
            return (0.0, 0.0, 0.0);
        }
        let s = t - 1.0;
        match self {
            Profile::Quintic => {
                let s2 = s * s;
                let w = s2 * s * (10.0 - 15.0 * s + 6.0 * s2);
                let dw = 30.0 * s2 * (1.0 - s) * (1.0 - s);
                let d2w = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
                (1.0 - w, -dw, -d2w)
            }
            Profile::Smooth => {
                // psi0 = f(1 - s) / (f(1 - s) + f(s)), f(u) = e^{-1/u}
                let f = |u: f64| -> (f64, f64, f64) {
                    let e = (-1.0 / u).exp();
                    let d = e / (u * u);
                    let d2 = e * (1.0 - 2.0 * u) / u.powi(4);
                    (e, d, d2)
                };
                let (a, da, d2a) = f(1.0 - s);
                let (b, db, d2b) = f(s);
                // derivatives in s: a' = -da, a'' = d2a
                let (a1, a2) = (-da, d2a);
                let (b1, b2) = (db, d2b);
                let q = a + b;
                let (q1, q2) = (a1 + b1, a2 + b2);
                let v = a / q;
                let v1 = (a1 - v * q1) / q;
                let v2 = (a2 - 2.0 * v1 * q1 - v * q2) / q;
                (v, v1, v2)
            }
        }
    }
}

/// Cutoff `psi_N(x) = psi0(dist(x, island) / (N k)^{2/3})`, `k = h ln(1/h)`.
#[derive(Clone, Debug)]
pub struct CutoffSpec {
    pub n: u32,
    pub profile: Profile,
    pub island: Island,
    model: ModelConfig,
}

impl CutoffSpec {
    pub fn new(model: &ModelConfig, n: u32, profile: Profile) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("cutoff order N must be positive".into()));
        }
        Ok(CutoffSpec { n, profile, island: Island::of(model)?, model: model.clone() })
    }

    /// Collar width `(N k)^{2/3}` at `h`.
    pub fn scale(&self, h: f64) -> f64 {
        (self.n as f64 * default_theta(h)).powf(2.0 / 3.0)
    }

    /// Farthest point (from the origin) where `psi_N` is nonzero.
    pub fn reach(&self, h: f64) -> f64 {
        let w = 2.0 * self.scale(h);
        (self.island.hi + w).abs().max((self.island.lo - w).abs())
    }

    /// `(psi, psi', psi'')` at `x`.
    pub fn eval(&self, h: f64, x: f64) -> (f64, f64, f64) {
        let l = self.scale(h);
        let d = self.island.distance(x);
        let (p, dp, d2p) = self.profile.eval(d / l);
        if d == 0.0 {
            return (p, 0.0, 0.0);
        }
        let s = if x > self.island.hi { 1.0 } else { -1.0 };
        (p, s * dp / l, d2p / (l * l))
    }
}

/// Outcome of the commutator width estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum GreenWidth {
    Value(f64),
    /// `|Im rho|` under the operator's floor.
    BelowFloor(f64),
}

impl GreenWidth {
    pub fn raw(self) -> f64 {
        match self {
            GreenWidth::Value(v) | GreenWidth::BelowFloor(v) => v,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            GreenWidth::Value(v) => Some(v),
            GreenWidth::BelowFloor(_) => None,
        }
    }
}

/// `Im rho = Im <[psi, P] u, psi u> / ||psi u||^2` on the undistorted region.
pub fn green_width(pair: &ResonancePair, op: &DistortedOperator, cut: &CutoffSpec) -> Result<GreenWidth> {
    let h = op.h;
    let reach = cut.reach(h);
    if reach > op.dist.r0 {
        return Err(Error::SupportViolation { reach, r0: op.dist.r0 });
    }
    let u = pair.channels(op);
    let nch = op.channels;
    let dx = op.dx;
    let couplings = &cut.model.couplings;
    let b_of = |spec: &crate::model::CouplingSpec, x: f64| -> Result<C64> { spec.b_at(0, &[C64::new(x, 0.0)]) };
    let zero = C64::new(0.0, 0.0);
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    let n = op.x.len();
    for i in 0..n {
        let x = op.x[i];
        let (psi, dpsi, d2psi) = cut.eval(h, x);
        if psi == 0.0 && dpsi == 0.0 {
            continue;
        }
        for c in 0..nch {
            den += (psi * psi) * u[c][i].norm_sqr() * dx;
        }
        if dpsi == 0.0 && d2psi == 0.0 {
            continue;
        }
        let get = |c: usize, j: isize| -> C64 {
            if j < 0 || j as usize >= n {
                zero
            } else {
                u[c][j as usize]
            }
        };
        let b = if nch == 2 && couplings.has_momentum_terms() {
            [
                [b_of(&couplings.r11, x)?, b_of(&couplings.r12, x)?],
                [b_of(&couplings.r12, x)?, b_of(&couplings.r22, x)?],
            ]
        } else {
            [[zero; 2]; 2]
        };
        for c in 0..nch {
            let du = (get(c, i as isize + 1) - get(c, i as isize - 1)) / (2.0 * dx);
            let mut comm = du * (2.0 * h * h * dpsi) + u[c][i] * (h * h * d2psi);
            for (d, bcd) in b[c].iter().enumerate().take(nch) {
                comm += C64::new(0.0, h * h) * bcd * dpsi * u[d][i];
            }
            num += comm * (u[c][i] * psi).conj() * dx;
        }
    }
    if !(den > 0.0) {
        return Err(Error::Precondition("cutoff state has zero norm".into()));
    }
    let v = num.im / den;
    Ok(if v.abs() < op.floor() { GreenWidth::BelowFloor(v) } else { GreenWidth::Value(v) })
}

/// One entry of the weighted-decay diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayEntry {
    pub h: f64,
    /// `ln max |u| e^{min(phi, S)/h}` over the inner island.
    pub log_w: f64,
    pub argmax: f64,
}

/// Computes `ln W(h)` for a state normalized to unit L2 norm, over the part
/// of the island within `fraction` of its extent from the well.
pub fn decay_profile(
    pair: &ResonancePair,
    op: &DistortedOperator,
    field: &AgmonField,
    island: &Island,
    s: f64,
    fraction: f64,
) -> Result<DecayEntry> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Precondition(format!("region fraction {fraction} outside (0, 1]")));
    }
    let u = pair.channels(op);
    let norm = (u.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>() * op.dx).sqrt();
    let (lo, hi) = (
        island.well + fraction * (island.lo - island.well),
        island.well + fraction * (island.hi - island.well),
    );
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for (i, &x) in op.x.iter().enumerate() {
        if x < lo || x > hi {
            continue;
        }
        let mag = u.iter().map(|ch| ch[i].norm_sqr()).sum::<f64>().sqrt() / norm;
        if mag == 0.0 {
            continue;
        }
        let w = mag.ln() + field.value(&[x]).min(s) / op.h;
        if w > best.0 {
            best = (w, x);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Precondition("no nonzero nodes in the decay region".into()));
    }
    Ok(DecayEntry { h: op.h, log_w: best.0, argmax: best.1 })
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub entries: Vec<DecayEntry>,
    /// Slope of `ln W` against `ln(1/h)`.
    pub slope: f64,
}

pub fn decay_report(entries: Vec<DecayEntry>) -> Result<DecayReport> {
    let mut hs: Vec<f64> = entries.iter().map(|e| e.h).collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    if hs.len() < 2 {
        return Err(Error::Precondition("decay slope needs at least two distinct h".into()));
    }
    let x: Vec<f64> = entries.iter().map(|e| (1.0 / e.h).ln()).collect();
    let y: Vec<f64> = entries.iter().map(|e| e.log_w).collect();
    let (slope, _) = linear_fit(&x, &y);
    Ok(DecayReport { entries, slope })
}

pub fn write_decay_csv<W: Write>(mut w: W, entries: &[DecayEntry]) -> std::io::Result<()> {
    writeln!(w, "h,logW")?;
    for e in entries {
        writeln!(w, "{:.16e},{:.16e}", e.h, e.log_w)?;
    }
    Ok(())
}

/// One row of the eigenvalue/commutator comparison table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WidthRow {
    pub h: f64,
    pub eig_im: f64,
    pub green: GreenWidth,
    /// `|Im rho|` below the operator floor.
    pub floor: bool,
}

impl WidthRow {
    /// `|green - eig| / |eig|`, when both are numbers.
    pub fn relative_deviation(&self) -> Option<f64> {
        match (self.floor, self.green.value()) {
            (false, Some(g)) => Some(((g - self.eig_im) / self.eig_im).abs()),
            _ => None,
        }
    }
}

pub fn write_width_csv<W: Write>(mut w: W, rows: &[WidthRow]) -> std::io::Result<()> {
    writeln!(w, "h,im_rho_eig,im_rho_green,rel_dev,floor_flag")?;
    for r in rows {
        let g = match r.green {
            GreenWidth::Value(v) => format!("{v:.16e}"),
            GreenWidth::BelowFloor(_) => "floor".into(),
        };
        let d = r.relative_deviation().map_or("".into(), |d| format!("{d:.16e}"));
        writeln!(w, "{:.16e},{:.16e},{},{},{}", r.h, r.eig_im, g, d, r.floor)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::eikonal_solve;
    use crate::model::preset;
    use crate::spectral::solve_default;

    #[test]
    fn profiles_are_smooth_steps() {
        for p in [Profile::Quintic, Profile::Smooth] {
            assert_eq!(p.eval(0.5), (1.0, 0.0, 0.0));
            assert_eq!(p.eval(2.5), (0.0, 0.0, 0.0));
            let mut prev = 1.0;
            for i in 1..1000 {
                let t = 1.0 + i as f64 / 1000.0;
                let (v, dv, d2v) = p.eval(t);
                assert!(v <= prev + 1e-15 && dv <= 0.0);
                let e = 1e-6;
                let fd = (p.eval(t + e).0 - p.eval(t - e).0) / (2.0 * e);
                let fd2 = (p.eval(t + e).1 - p.eval(t - e).1) / (2.0 * e);
                assert!((fd - dv).abs() < 1e-6, "{p:?} {t}");
                assert!((fd2 - d2v).abs() < 1e-4 * (1.0 + d2v.abs()), "{p:?} {t}: {fd2} vs {d2v}");
                prev = v;
            }
        }
    }

    #[test]
    fn island_of_canonical() {
        let i = Island::of(&preset("canonical-1d").unwrap()).unwrap();
        assert!((i.hi - 1.2447112694653515).abs() < 1e-9);
        assert!((i.lo + 1.2447112694653515).abs() < 1e-9);
        assert_eq!(i.distance(0.3), 0.0);
        assert!((i.distance(2.0) - (2.0 - i.hi)).abs() < 1e-15);
    }

    #[test]
    fn green_matches_eigenvalue() {
        let m = preset("canonical-1d").unwrap();
        let (op, pair) = solve_default(&m, 0.1, None, 1e-13).unwrap();
        for n in [1, 2] {
            for p in [Profile::Quintic, Profile::Smooth] {
                let cut = CutoffSpec::new(&m, n, p).unwrap();
                let g = green_width(&pair, &op, &cut).unwrap().value().unwrap();
                assert!(((g - pair.rho.im) / pair.rho.im).abs() < 1e-2, "N {n} {p:?}: {g:e} vs {:e}", pair.rho.im);
            }
        }
    }

    #[test]
    fn collar_outside_the_box_is_rejected() {
        let m = preset("canonical-1d").unwrap();
        let (op, pair) = solve_default(&m, 0.12, None, 1e-13).unwrap();
        let cut = CutoffSpec::new(&m, 4, Profile::Quintic).unwrap();
        assert!(matches!(green_width(&pair, &op, &cut), Err(Error::SupportViolation { .. })));
    }

    #[test]
    fn uncoupled_width_is_below_floor() {
        let m = preset("uncoupled-1d").unwrap();
        let (op, pair) = solve_default(&m, 0.1, None, 1e-13).unwrap();
        let cut = CutoffSpec::new(&m, 1, Profile::Quintic).unwrap();
        assert!(matches!(green_width(&pair, &op, &cut).unwrap(), GreenWidth::BelowFloor(_)));
    }

    #[test]
    fn decay_weight_is_polynomial() {
        let m = preset("canonical-1d").unwrap();
        let field = eikonal_solve(&m, &Grid::line(-5.0, 5.0, 4001)).unwrap();
        let island = Island::of(&m).unwrap();
        let s = crate::geometry::agmon_distance_1d(&m, 0.0, island.hi);
        let entries = [0.12, 0.1, 0.08, 0.06]
            .iter()
            .map(|&h| {
                let (op, pair) = solve_default(&m, h, None, 1e-13).unwrap();
                decay_profile(&pair, &op, &field, &island, s, 0.9).unwrap()
            })
            .collect();
        let r = decay_report(entries).unwrap();
        assert!(r.slope <= 3.0, "{}", r.slope);
        assert!(r.entries.iter().all(|e| e.log_w.is_finite()));
    }

    #[test]
    fn harmonic_decay_weight_is_bounded() {
        let m = preset("harmonic-exact").unwrap();
        let field = eikonal_solve(&m, &Grid::line(-5.0, 5.0, 4001)).unwrap();
        // no island: use |x| <= 1 directly
        let region = Island { lo: -1.0, hi: 1.0, well: 0.0 };
        let mut w = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let (op, pair) = solve_default(&m, h, Some(0.0), 1e-13).unwrap();
            let e = decay_profile(&pair, &op, &field, &region, f64::INFINITY, 1.0).unwrap();
            // |u| e^{phi/h} for the normalized Gaussian is (pi h)^{-1/4}
            w.push(e.log_w + 0.25 * (std::f64::consts::PI * h).ln());
        }
        assert!(w.iter().all(|v| v.abs() < 0.05), "{w:?}");
    }

    #[test]
    fn width_table_has_the_documented_columns() {
        let rows = [
            WidthRow { h: 0.1, eig_im: -1e-7, green: GreenWidth::Value(-1.01e-7), floor: false },
            WidthRow { h: 0.04, eig_im: -1e-15, green: GreenWidth::BelowFloor(-1e-15), floor: true },
        ];
        let mut buf = Vec::new();
        write_width_csv(&mut buf, &rows).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "h,im_rho_eig,im_rho_green,rel_dev,floor_flag");
        assert!(lines[2].contains(",floor,,true"));
        assert!((rows[0].relative_deviation().unwrap() - 0.01).abs() < 1e-12);
    }
}

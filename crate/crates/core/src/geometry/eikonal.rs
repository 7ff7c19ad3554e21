use super::Grid;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

/// Fast-marching solution of `|grad phi|^2 = min(V1, V2)_+` with source at the well.
#[derive(Clone, Debug)]
pub struct AgmonField {
    pub grid: Grid,
    pub phi: Vec<f64>,
    pub frozen: Vec<bool>,
    /// Node indices in the order the front accepted them.
    pub order: Vec<usize>,
    pub well_index: usize,
}

struct Key(f64);
impl PartialEq for Key {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o).is_eq()
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Key {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// Solves the eikonal equation for the model's Agmon metric on `grid`.
pub fn eikonal_solve(model: &ModelConfig, grid: &Grid) -> Result<AgmonField> {
    if grid.dim() != model.dimension {
        return Err(Error::Precondition("grid dimension differs from the model dimension".into()));
    }
    let rq = model.quadratic_region_radius()?;
    let nodes = rq / grid.max_spacing();
    if nodes < 4.0 {
        return Err(Error::GridTooCoarse { nodes });
    }
    // quadratic-form start: phi = x.(H/2)^{1/2}.x / 2
    let h = model.hessian_at_well()?;
    let root = sqrt_half_matrix(&h, model.dimension);
    let well = model.well.clone();
    let start = move |p: &[f64]| {
        let d: Vec<f64> = p.iter().zip(&well).map(|(a, b)| a - b).collect();
        let mut q = 0.0;
        for a in 0..d.len() {
            for b in 0..d.len() {
                q += d[a] * root[a][b] * d[b];
            }
        }
        0.5 * q
    };
    eikonal_solve_metric(grid, &model.well, |p| model.metric(p), start)
}

/// Square root of `H / 2` for a symmetric positive 1x1 or 2x2 matrix.
fn sqrt_half_matrix(h: &[[f64; 2]; 2], dim: usize) -> [[f64; 2]; 2] {
    if dim == 1 {
        return [[(0.5 * h[0][0]).sqrt(), 0.0], [0.0, 0.0]];
    }
    let (a, b, d) = (0.5 * h[0][0], 0.5 * h[0][1], 0.5 * h[1][1]);
    // sqrt of [[a, b], [b, d]] via sqrt(M) = (M + s I) / t, s = sqrt(det), t = sqrt(tr + 2 s)
    let s = (a * d - b * b).max(0.0).sqrt();
    let t = (a + d + 2.0 * s).sqrt();
    [[(a + s) / t, b / t], [b / t, (d + s) / t]]
}

/// Generic first-order fast marching for slowness `sqrt(metric)`. Nodes within
/// three spacings of `source` are initialized from `start`.
pub fn eikonal_solve_metric<M, S>(grid: &Grid, source: &[f64], metric: M, start: S) -> Result<AgmonField>
where
    M: Fn(&[f64]) -> f64,
    S: Fn(&[f64]) -> f64,
{
    if !grid.contains(source) {
        return Err(Error::Precondition("grid does not contain the well".into()));
    }
    let n = grid.len();
    let sp = grid.spacing();
    let slow: Vec<f64> = (0..n).map(|k| metric(&grid.node(k)).max(0.0).sqrt()).collect();
    let mut phi = vec![f64::INFINITY; n];
    let mut frozen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();

    let well_index = nearest_node(grid, source);
    let init_r = 3.0 * grid.max_spacing();
    for k in 0..n {
        let p = grid.node(k);
        let r = p.iter().zip(source).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if r <= init_r || k == well_index {
            phi[k] = if k == well_index { 0.0 } else { start(&p) };
            heap.push(Reverse((Key(phi[k]), k)));
        }
    }

    let mut nbrs = Vec::with_capacity(8);
    while let Some(Reverse((Key(v), k))) = heap.pop() {
        if frozen[k] || v > phi[k] {
            continue;
        }
        frozen[k] = true;
        order.push(k);
        neighbors(grid, k, &mut nbrs);
        for &m in &nbrs {
            if frozen[m] {
                continue;
            }
            let cand = update(grid, &sp, &phi, &frozen, &slow, m);
            if cand < phi[m] {
                phi[m] = cand;
                heap.push(Reverse((Key(cand), m)));
            }
        }
    }
    Ok(AgmonField { grid: grid.clone(), phi, frozen, order, well_index })
}

fn nearest_node(grid: &Grid, p: &[f64]) -> usize {
    match *grid {
        Grid::D1 { lo, n, .. } => (((p[0] - lo) / grid.spacing()[0]).round() as usize).min(n - 1),
        Grid::D2 { x, y } => {
            let s = grid.spacing();
            let i = (((p[0] - x.0) / s[0]).round() as usize).min(x.2 - 1);
            let j = (((p[1] - y.0) / s[1]).round() as usize).min(y.2 - 1);
            j * x.2 + i
        }
    }
}

fn neighbors(grid: &Grid, k: usize, out: &mut Vec<usize>) {
    out.clear();
    match *grid {
        Grid::D1 { n, .. } => {
            if k > 0 {
                out.push(k - 1);
            }
            if k + 1 < n {
                out.push(k + 1);
            }
        }
        Grid::D2 { x, y } => {
            let (i, j) = ((k % x.2) as isize, (k / x.2) as isize);
            for dj in -1..=1isize {
                for di in -1..=1isize {
                    let (a, b) = (i + di, j + dj);
                    if (di, dj) != (0, 0) && a >= 0 && b >= 0 && a < x.2 as isize && b < y.2 as isize {
                        out.push(b as usize * x.2 + a as usize);
                    }
                }
            }
        }
    }
}

/// Upwind update at node `m` from its frozen neighbors.
fn update(grid: &Grid, sp: &[f64], phi: &[f64], frozen: &[bool], slow: &[f64], m: usize) -> f64 {
    let best = |a: Option<usize>, b: Option<usize>| -> Option<usize> {
        let ok = |i: Option<usize>| i.filter(|&i| frozen[i]);
        match (ok(a), ok(b)) {
            (Some(p), Some(q)) => Some(if phi[p] <= phi[q] { p } else { q }),
            (p, q) => p.or(q),
        }
    };
    match *grid {
        Grid::D1 { n, .. } => {
            let left = (m > 0).then(|| m - 1);
            let right = (m + 1 < n).then_some(m + 1);
            match best(left, right) {
                // trapezoidal slowness along the edge
                Some(u) => phi[u] + sp[0] * 0.5 * (slow[m] + slow[u]),
                None => f64::INFINITY,
            }
        }
        Grid::D2 { x, y } => {
            let (i, j) = (m % x.2, m / x.2);
            let (nx, ny) = (x.2 as isize, y.2 as isize);
            let at = |di: isize, dj: isize| -> Option<usize> {
                let (a, b) = (i as isize + di, j as isize + dj);
                (a >= 0 && b >= 0 && a < nx && b < ny && frozen[(b * nx + a) as usize]).then(|| (b * nx + a) as usize)
            };
            if (sp[0] - sp[1]).abs() > 1e-12 * sp[0] {
                return update_4(sp, phi, slow, m, at);
            }
            let hs = sp[0];
            let mut best = f64::INFINITY;
            // eight triangles (axis neighbor A, diagonal neighbor B)
            for (ax, ay) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                let Some(a) = at(ax, ay) else { continue };
                best = best.min(phi[a] + hs * 0.5 * (slow[m] + slow[a]));
                for sgn in [-1isize, 1] {
                    let (bx, by) = (ax + sgn * ay.abs(), ay + sgn * ax.abs());
                    let Some(b) = at(bx, by) else { continue };
                    best = best.min(triangle(phi[a], phi[b], slow[m], slow[a], slow[b], hs));
                }
            }
            best
        }
    }
}

/// Semi-Lagrangian update over the segment from axis neighbor `a` (t = 0) to
/// diagonal neighbor `b` (t = 1); slowness averaged along the ray.
fn triangle(pa: f64, pb: f64, sm: f64, sa: f64, sb: f64, h: f64) -> f64 {
    let f = |t: f64| {
        let s = 0.5 * (sm + sa + t * (sb - sa));
        pa + t * (pb - pa) + h * (1.0 + t * t).sqrt() * s
    };
    let (_, v) = crate::numerics::golden_min(&f, 0.0, 1.0, 1e-7);
    v.min(f(0.0)).min(f(1.0))
}

fn update_4<F: Fn(isize, isize) -> Option<usize>>(sp: &[f64], phi: &[f64], slow: &[f64], m: usize, at: F) -> f64 {
    let pick = |p: Option<usize>, q: Option<usize>| match (p, q) {
        (Some(p), Some(q)) => Some(if phi[p] <= phi[q] { p } else { q }),
        (p, q) => p.or(q),
    };
    let ux = pick(at(-1, 0), at(1, 0));
    let uy = pick(at(0, -1), at(0, 1));
    let s = slow[m];
    match (ux, uy) {
        (None, None) => f64::INFINITY,
        (Some(a), None) => phi[a] + sp[0] * s,
        (None, Some(b)) => phi[b] + sp[1] * s,
        (Some(a), Some(b)) => {
            let (pa, pb) = (phi[a], phi[b]);
            let (hx, hy) = (sp[0], sp[1]);
            // ((t - pa)/hx)^2 + ((t - pb)/hy)^2 = s^2
            let (wa, wb) = (1.0 / (hx * hx), 1.0 / (hy * hy));
            let qa = wa + wb;
            let qb = -2.0 * (wa * pa + wb * pb);
            let qc = wa * pa * pa + wb * pb * pb - s * s;
            let disc = qb * qb - 4.0 * qa * qc;
            let one_sided = (pa + hx * s).min(pb + hy * s);
            if disc < 0.0 {
                return one_sided;
            }
            let t = (-qb + disc.sqrt()) / (2.0 * qa);
            if t >= pa.max(pb) {
                t
            } else {
                one_sided
            }
        }
    }
}

impl AgmonField {
    /// Linear (1D) or bilinear (2D) interpolation of phi; clamps to the grid.
    pub fn value(&self, p: &[f64]) -> f64 {
        match self.grid {
            Grid::D1 { lo, .. } => crate::numerics::lerp_uniform(&self.phi, lo, self.grid.spacing()[0], p[0]),
            Grid::D2 { .. } => {
                let (i, j, s, t) = self.cell(p);
                let nx = self.nx();
                let f = |a: usize, b: usize| self.phi[b * nx + a];
                (1.0 - s) * (1.0 - t) * f(i, j) + s * (1.0 - t) * f(i + 1, j) + (1.0 - s) * t * f(i, j + 1)
                    + s * t * f(i + 1, j + 1)
            }
        }
    }

    /// Gradient of the interpolant.
    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let sp = self.grid.spacing();
        match self.grid {
            Grid::D1 { lo, n, .. } => {
                let t = ((p[0] - lo) / sp[0]).clamp(0.0, (n - 1) as f64 - 1e-9);
                let i = (t.floor() as usize).min(n - 2);
                vec![(self.phi[i + 1] - self.phi[i]) / sp[0]]
            }
            Grid::D2 { .. } => {
                let (i, j, s, t) = self.cell(p);
                let nx = self.nx();
                let f = |a: usize, b: usize| self.phi[b * nx + a];
                let gx = ((1.0 - t) * (f(i + 1, j) - f(i, j)) + t * (f(i + 1, j + 1) - f(i, j + 1))) / sp[0];
                let gy = ((1.0 - s) * (f(i, j + 1) - f(i, j)) + s * (f(i + 1, j + 1) - f(i + 1, j))) / sp[1];
                vec![gx, gy]
            }
        }
    }

    fn nx(&self) -> usize {
        match self.grid {
            Grid::D2 { x, .. } => x.2,
            Grid::D1 { n, .. } => n,
        }
    }

    fn cell(&self, p: &[f64]) -> (usize, usize, f64, f64) {
        let Grid::D2 { x, y } = self.grid else { unreachable!() };
        let sp = self.grid.spacing();
        let tx = ((p[0] - x.0) / sp[0]).clamp(0.0, (x.2 - 1) as f64);
        let ty = ((p[1] - y.0) / sp[1]).clamp(0.0, (y.2 - 1) as f64);
        let i = (tx.floor() as usize).min(x.2 - 2);
        let j = (ty.floor() as usize).min(y.2 - 2);
        (i, j, tx - i as f64, ty - j as f64)
    }

    /// Accepted values in acceptance order.
    pub fn accepted_values(&self) -> Vec<f64> {
        self.order.iter().map(|&k| self.phi[k]).collect()
    }

    /// Writes `x[,y],phi` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        if self.grid.dim() == 1 {
            writeln!(w, "x,phi")?;
        } else {
            writeln!(w, "x,y,phi")?;
        }
        for (k, v) in self.phi.iter().enumerate() {
            let p = self.grid.node(k);
            let coords: Vec<String> = p.iter().map(|c| format!("{c:.16e}")).collect();
            writeln!(w, "{},{v:.16e}", coords.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{agmon_distance_1d, island_boundary};
    use crate::model::{preset, Couplings, Expr, ModelConfig};
    use proptest::prelude::*;

    fn canonical_field(n: usize) -> (ModelConfig, AgmonField) {
        let m = preset("canonical-1d").unwrap();
        let f = eikonal_solve(&m, &Grid::line(-3.0, 3.0, n)).unwrap();
        (m, f)
    }

    #[test]
    fn well_value_is_zero_and_field_nonnegative() {
        let (_, f) = canonical_field(4001);
        assert_eq!(f.phi[f.well_index], 0.0);
        assert!(f.phi.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn matches_quadrature_at_island_boundary() {
        let (m, f) = canonical_field(4001);
        let xb = island_boundary(&m, &f.grid).unwrap().points[1][0];
        let s = agmon_distance_1d(&m, 0.0, xb);
        assert!((s - 0.557_588_722_405_6).abs() < 1e-9);
        assert!((f.value(&[xb]) - s).abs() < 1e-4, "{} vs {s}", f.value(&[xb]));
    }

    #[test]
    fn acceptance_order_is_monotone() {
        let (_, f) = canonical_field(801);
        let v = f.accepted_values();
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(v.len(), f.grid.len());
    }

    #[test]
    fn grid_convergence_order() {
        let m = preset("canonical-1d").unwrap();
        let xb = (1.0 + 0.5f64.atanh()).sqrt();
        let exact = agmon_distance_1d(&m, 0.0, xb);
        let err = |n: usize| (eikonal_solve(&m, &Grid::line(-3.0, 3.0, n)).unwrap().value(&[xb]) - exact).abs();
        // least-squares order over four successive halvings
        let ns = [601usize, 1201, 2401, 4801];
        let x: Vec<f64> = ns.iter().map(|&n| (6.0 / (n - 1) as f64).ln()).collect();
        let y: Vec<f64> = ns.iter().map(|&n| err(n).ln()).collect();
        let (order, _) = crate::numerics::linear_fit(&x, &y);
        assert!(order >= 0.9, "order {order}");
    }

    #[test]
    fn coarse_grid_rejected() {
        let m = preset("canonical-1d").unwrap();
        assert!(matches!(eikonal_solve(&m, &Grid::line(-3.0, 3.0, 41)), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn radial_2d_matches_ray_quadrature() {
        let r2 = || Expr::add(Expr::pow(Expr::x(), 2), Expr::pow(Expr::y(), 2));
        let v1 = Expr::sub(Expr::c(0.5), Expr::tanh(Expr::sub(r2(), Expr::c(1.0))));
        let v2 = Expr::sub(Expr::c(1.0), Expr::exp(Expr::neg(r2())));
        let m2 = ModelConfig::new("radial", 2, v1, v2, Couplings::default(), vec![0.0, 0.0]).unwrap();
        let f = eikonal_solve(&m2, &Grid::square(-2.0, 2.0, 801)).unwrap();
        let m1 = preset("canonical-1d").unwrap();
        let mut worst: f64 = 0.0;
        for ang in [0.0f64, 0.3, 0.7, 1.1] {
            for r in [0.5, 0.9, 1.2, 1.5] {
                let p = [r * ang.cos(), r * ang.sin()];
                worst = worst.max((f.value(&p) - agmon_distance_1d(&m1, 0.0, r)).abs());
            }
        }
        assert!(worst < 1e-3, "worst deviation {worst:e}");
        let v = f.accepted_values();
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let (_, f) = canonical_field(801);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x,phi\n"));
        assert_eq!(s.lines().count(), 802);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn triangle_inequality(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
            let m = preset("canonical-1d").unwrap();
            let d = |p: f64, q: f64| agmon_distance_1d(&m, p, q);
            prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-9);
        }
    }
}

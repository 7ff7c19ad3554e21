use super::config::{to_c, ModelConfig};
use super::jet::C64;
use crate::geometry::{cirque_boundary, island_boundary, Grid};
use crate::numerics::golden_min;
use serde::Serialize;

/// Transversality threshold for `|grad (V1 - V2)|` at a crossing.
pub const TRANSVERSAL_MARGIN: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Unchecked,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionCheck {
    pub id: String,
    pub description: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub model: String,
    pub checks: Vec<AssumptionCheck>,
    pub v1_at_well: f64,
    /// Infimum of V2 outside the quadratic neighborhood of the well.
    pub inf_v2_outside_well: f64,
    /// Largest value of V1 on the box edge.
    pub v1_at_edge: f64,
    /// Best (over geodesics) of the smallest `|r12(x_c, i phi'(x_c))|`.
    pub ellipticity_margin: Option<f64>,
}

impl AssumptionReport {
    pub fn get(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// True when no check failed.
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }
}

struct Builder(Vec<AssumptionCheck>);

impl Builder {
    fn push(&mut self, id: &str, description: &str, status: Status, witness: Option<Vec<f64>>, margin: Option<f64>) {
        self.0.push(AssumptionCheck {
            id: id.into(),
            description: description.into(),
            status,
            witness,
            margin,
            note: String::new(),
        });
    }

    fn note(&mut self, note: impl Into<String>) {
        if let Some(c) = self.0.last_mut() {
            c.note = note.into();
        }
    }
}

/// Default probe grid: `[-5, 5]` with 2001 nodes.
pub fn default_probe_grid(dimension: usize) -> Grid {
    if dimension == 1 {
        Grid::line(-5.0, 5.0, 2001)
    } else {
        Grid::square(-5.0, 5.0, 201)
    }
}

/// Checks the structural assumptions on a concrete model by sampling and
/// root finding on `probe`. Failures are statuses, never errors.
pub fn validate_assumptions(model: &ModelConfig, probe: &Grid) -> AssumptionReport {
    let mut b = Builder(Vec::new());
    let n = probe.len();
    let nodes: Vec<Vec<f64>> = (0..n).map(|k| probe.node(k)).collect();
    let v1: Vec<f64> = nodes.iter().map(|p| model.v1(p)).collect();
    let v2: Vec<f64> = nodes.iter().map(|p| model.v2(p)).collect();
    let well = model.well.clone();

    // A1: island around the well, sea at the edge, single nondegenerate well.
    let v1_at_well = model.v1(&well);
    b.push(
        "A1.v1_well",
        "V1 > 0 at the well",
        if v1_at_well > 0.0 { Status::Pass } else { Status::Fail },
        (v1_at_well <= 0.0).then(|| well.clone()),
        Some(v1_at_well),
    );

    let edge = edge_indices(probe);
    let (edge_k, v1_at_edge) =
        edge.iter().map(|&k| (k, v1[k])).fold((edge[0], f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    b.push(
        "A1.v1_edge",
        "V1 < 0 at the edge of the box",
        if v1_at_edge < 0.0 { Status::Pass } else { Status::Fail },
        (v1_at_edge >= 0.0).then(|| nodes[edge_k].clone()),
        Some(-v1_at_edge),
    );

    let (neg_k, v2_min) = argmin(&v2);
    b.push(
        "A1.v2_nonneg",
        "V2 >= 0",
        if v2_min >= -1e-12 { Status::Pass } else { Status::Fail },
        (v2_min < -1e-12).then(|| nodes[neg_k].clone()),
        Some(v2_min),
    );

    let radius = model.quadratic_region_radius().unwrap_or(0.1).max(probe.max_spacing() * 2.0);
    let (inf_v2, inf_at) = inf_outside_well(model, probe, &nodes, &v2, &well, radius);
    b.push(
        "A1.v2_unique_zero",
        "V2 has a unique nondegenerate zero at the well",
        if inf_v2 > 1e-10 { Status::Pass } else { Status::Fail },
        (inf_v2 <= 1e-10).then(|| inf_at.clone()),
        Some(inf_v2),
    );

    let v2_edge_min = edge.iter().map(|&k| v2[k]).fold(f64::INFINITY, f64::min);
    let edge_min_k = edge.iter().copied().min_by(|&a, &c| v2[a].total_cmp(&v2[c])).unwrap_or(0);
    b.push(
        "A1.v2_edge",
        "liminf V2 > 0 at the edge of the box",
        if v2_edge_min > 0.0 { Status::Pass } else { Status::Fail },
        (v2_edge_min <= 0.0).then(|| nodes[edge_min_k].clone()),
        Some(v2_edge_min),
    );

    non_trapping(&mut b, model, probe, &v1);

    // A2: analytic continuation to the distortion contour.
    let theta = 0.2;
    let bad = nodes.iter().find_map(|p| {
        let z: Vec<C64> = p.iter().map(|&x| C64::new(x, theta * x)).collect();
        let exprs = [&model.v1, &model.v2, &model.couplings.r12.a, &model.couplings.r11.a, &model.couplings.r22.a];
        exprs.iter().find_map(|e| e.eval_jet(&z).err()).map(|_| p.clone())
    });
    b.push(
        "A2.analytic",
        "potentials and couplings continue analytically to x + 0.2 i x on the box",
        if bad.is_none() { Status::Pass } else { Status::Fail },
        bad,
        None,
    );

    // A3: diagonal couplings real on the real axis.
    let bad = nodes.iter().find_map(|p| {
        let z = to_c(p);
        let diag = [&model.couplings.r11, &model.couplings.r22];
        diag.iter()
            .flat_map(|c| std::iter::once(&c.a).chain(c.b.iter()))
            .any(|e| e.eval(&z).im.abs() > 1e-14)
            .then(|| p.clone())
    });
    b.push(
        "A3.diagonal_real",
        "diagonal couplings are real on the real axis",
        if bad.is_none() { Status::Pass } else { Status::Fail },
        bad,
        None,
    );

    let ellipticity_margin = if model.dimension == 1 {
        crossings_1d(&mut b, model, probe)
    } else {
        b.push("A4.transversal", "minimal geodesics cross the cirque boundary transversally", Status::Unchecked, None, None);
        b.note("checked in one dimension only");
        b.push("A6.ellipticity", "r12(x, i grad phi) != 0 at all crossings of a minimal geodesic", Status::Unchecked, None, None);
        b.note("checked in one dimension only");
        None
    };

    b.push("A5.contact", "contact of order exactly two at type-1 points", Status::Unchecked, None, None);
    b.note("reported by the geometry step as a second difference, not checked here");

    AssumptionReport {
        model: model.name.clone(),
        checks: b.0,
        v1_at_well,
        inf_v2_outside_well: inf_v2,
        v1_at_edge,
        ellipticity_margin,
    }
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter().copied().enumerate().fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

fn edge_indices(grid: &Grid) -> Vec<usize> {
    match *grid {
        Grid::D1 { n, .. } => vec![0, n - 1],
        Grid::D2 { x, y } => (0..x.2 * y.2)
            .filter(|&k| {
                let (i, j) = (k % x.2, k / x.2);
                i == 0 || j == 0 || i == x.2 - 1 || j == y.2 - 1
            })
            .collect(),
    }
}

/// Infimum of V2 away from the well, with local minima refined in 1D.
fn inf_outside_well(
    model: &ModelConfig,
    grid: &Grid,
    nodes: &[Vec<f64>],
    v2: &[f64],
    well: &[f64],
    radius: f64,
) -> (f64, Vec<f64>) {
    let far = |p: &[f64]| p.iter().zip(well).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= radius;
    let mut best = (f64::INFINITY, well.to_vec());
    for (k, p) in nodes.iter().enumerate() {
        if far(p) && v2[k] < best.0 {
            best = (v2[k], p.clone());
        }
    }
    if let Grid::D1 { n, .. } = *grid {
        let dx = grid.spacing()[0];
        for k in 1..n - 1 {
            if v2[k] <= v2[k - 1] && v2[k] <= v2[k + 1] && far(&nodes[k]) {
                let x = nodes[k][0];
                let (xm, vm) = golden_min(&|t: f64| model.v2(&[t]), x - dx, x + dx, 1e-12);
                if vm < best.0 && far(&[xm]) {
                    best = (vm, vec![xm]);
                }
            }
        }
    }
    best
}

/// 1D sufficient condition: V1 strictly decreasing in |x| outside the island.
fn non_trapping(b: &mut Builder, model: &ModelConfig, grid: &Grid, v1: &[f64]) {
    let desc = "E = 0 is non-trapping for the open channel";
    let Grid::D1 { n, .. } = *grid else {
        b.push("A1.non_trapping", desc, Status::Unchecked, None, None);
        b.note("only the one-dimensional sufficient condition is implemented");
        return;
    };
    let Ok(island) = island_boundary(model, grid) else {
        b.push("A1.non_trapping", desc, Status::Unchecked, None, None);
        b.note("no zero set of V1 on the box");
        return;
    };
    let (left, right) = (island.points[0][0], island.points[island.points.len() - 1][0]);
    let mut monotone = true;
    for k in 0..n {
        let x = grid.node(k)[0];
        if x < right && x > left {
            continue;
        }
        // saturated tails compare equal in floating point; use the exact derivative
        let d = match model.v1_jet(&[x]) {
            Ok(j) => j.g[0].re,
            Err(_) => f64::NAN,
        };
        let falling_outward = if x >= right { d < 0.0 } else { d > 0.0 };
        if !falling_outward && !(d == 0.0 && v1[k] < 0.0 && saturated(v1, k)) {
            monotone = false;
        }
    }
    if monotone {
        b.push("A1.non_trapping", desc, Status::Pass, None, None);
        b.note("V1 strictly decreasing in |x| outside the zero set of V1");
    } else {
        b.push("A1.non_trapping", desc, Status::Unchecked, None, None);
        b.note("V1 not monotone outside its zero set; the sufficient test is inconclusive");
    }
}

fn saturated(v: &[f64], k: usize) -> bool {
    let lo = k.saturating_sub(1);
    let hi = (k + 1).min(v.len() - 1);
    v[lo] == v[k] && v[k] == v[hi]
}

/// Crossings of the two minimal geodesics `[well, +-x_b]` with the cirque
/// boundary. Returns the A6 margin.
fn crossings_1d(b: &mut Builder, model: &ModelConfig, grid: &Grid) -> Option<f64> {
    let t4 = "minimal geodesics cross the cirque boundary finitely and transversally";
    let t6 = "r12(x, i phi'(x)) != 0 at all crossings of a minimal geodesic";
    let w = model.well[0];
    let (island, cirque) = match (island_boundary(model, grid), cirque_boundary(model, grid)) {
        (Ok(i), Ok(c)) => (i, c),
        (Err(e), _) | (_, Err(e)) => {
            b.push("A4.transversal", t4, Status::Fail, Some(model.well.clone()), None);
            b.note(e.to_string());
            b.push("A6.ellipticity", t6, Status::Fail, Some(model.well.clone()), Some(0.0));
            b.note("no crossing to evaluate");
            return Some(0.0);
        }
    };
    let right = island.points.iter().map(|p| p[0]).filter(|&x| x > w).fold(f64::INFINITY, f64::min);
    let left = island.points.iter().map(|p| p[0]).filter(|&x| x < w).fold(f64::NEG_INFINITY, f64::max);

    let mut worst_transversal: (f64, Option<f64>) = (f64::INFINITY, None);
    let mut best_margin: Option<(f64, f64)> = None;
    let mut ends = Vec::new();
    if right.is_finite() {
        ends.push(right);
    }
    if left.is_finite() {
        ends.push(left);
    }
    for end in ends {
        let on_path: Vec<(f64, f64)> = cirque
            .points
            .iter()
            .zip(&cirque.gradient_norms)
            .map(|(p, g)| (p[0], *g))
            .filter(|(x, _)| (x - w) * (end - w) > 0.0 && (x - w).abs() < (end - w).abs())
            .collect();
        let mut geo_margin = f64::INFINITY;
        let mut witness = end;
        for &(xc, g) in &on_path {
            if g < worst_transversal.0 {
                worst_transversal = (g, Some(xc));
            }
            let slope = model.metric(&[xc]).sqrt() * (end - w).signum();
            let r = model.couplings.r12.symbol(&[C64::new(xc, 0.0)], &[C64::new(0.0, slope)]).norm();
            if r < geo_margin {
                geo_margin = r;
                witness = xc;
            }
        }
        if on_path.is_empty() {
            geo_margin = 0.0;
        }
        if best_margin.is_none_or(|(m, _)| geo_margin > m) {
            best_margin = Some((geo_margin, witness));
        }
    }

    let (tm, tx) = worst_transversal;
    match tx {
        Some(x) if tm < TRANSVERSAL_MARGIN => {
            b.push("A4.transversal", t4, Status::Fail, Some(vec![x]), Some(tm));
        }
        Some(_) => b.push("A4.transversal", t4, Status::Pass, None, Some(tm)),
        None => {
            b.push("A4.transversal", t4, Status::Fail, Some(model.well.clone()), Some(0.0));
            b.note("no crossing between the well and the island boundary");
        }
    }
    let (margin, wx) = best_margin.unwrap_or((0.0, w));
    let ok = margin > 1e-12;
    b.push("A6.ellipticity", t6, if ok { Status::Pass } else { Status::Fail }, (!ok).then(|| vec![wx]), Some(margin));
    Some(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, Couplings, Expr};

    #[test]
    fn canonical_passes_with_margin() {
        let m = preset("canonical-1d").unwrap();
        let r = validate_assumptions(&m, &default_probe_grid(1));
        assert!(r.passes(), "{:?}", r.failures().collect::<Vec<_>>());
        assert!((r.ellipticity_margin.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(r.get("A1.non_trapping").unwrap().status, Status::Pass);
        assert!((r.v1_at_well - 1.261594).abs() < 1e-6);
    }

    #[test]
    fn uncoupled_fails_ellipticity() {
        let m = preset("uncoupled-1d").unwrap();
        let r = validate_assumptions(&m, &default_probe_grid(1));
        let a6 = r.get("A6.ellipticity").unwrap();
        assert_eq!(a6.status, Status::Fail);
        assert!(a6.witness.is_some());
        assert_eq!(r.ellipticity_margin, Some(0.0));
    }

    #[test]
    fn second_well_is_witnessed() {
        let bump = |c: f64| {
            Expr::sub(Expr::c(1.0), Expr::exp(Expr::neg(Expr::pow(Expr::sub(Expr::x(), Expr::c(c)), 2))))
        };
        let m = ModelConfig::new(
            "two-wells",
            1,
            crate::model::canonical_v1_expr(),
            Expr::mul(bump(0.0), bump(3.0)),
            Couplings::default(),
            vec![0.0],
        )
        .unwrap();
        let r = validate_assumptions(&m, &default_probe_grid(1));
        let c = r.get("A1.v2_unique_zero").unwrap();
        assert_eq!(c.status, Status::Fail);
        assert!((c.witness.as_ref().unwrap()[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn every_failure_has_a_witness() {
        for name in crate::model::PRESETS {
            let m = preset(name).unwrap();
            let r = validate_assumptions(&m, &default_probe_grid(1));
            for f in r.failures() {
                assert!(f.witness.is_some(), "{name}: {}", f.id);
            }
        }
    }
}

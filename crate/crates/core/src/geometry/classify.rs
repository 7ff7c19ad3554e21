use super::{agmon_distance_1d, cirque_boundary, island_boundary, AgmonField, BoundarySet, Grid};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::bisect;
use serde_json::{json, Value};

/// Crossing of a geodesic with the cirque boundary `V1 = V2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Crossing {
    pub point: Vec<f64>,
    /// `|grad (V1 - V2)|` at the crossing.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Geodesic {
    /// From the well to a type-1 point.
    pub polyline: Vec<Vec<f64>>,
    pub crossings: Vec<Crossing>,
    pub n_gamma: usize,
    /// Agmon length recomputed along the polyline.
    pub length: f64,
}

impl Geodesic {
    pub fn end(&self) -> &[f64] {
        self.polyline.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Connected piece of the type-1 set with its estimated dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaComponent {
    pub points: Vec<Vec<f64>>,
    pub dimension: usize,
    pub phi_range: f64,
    pub arc_length: f64,
}

#[derive(Clone, Debug)]
pub struct GeometryReport {
    pub model: String,
    pub island: BoundarySet,
    pub cirque: BoundarySet,
    /// Agmon distance from the well to the island boundary.
    pub s: f64,
    /// The same distance read off the eikonal field.
    pub s_field: f64,
    pub tol: f64,
    pub type1_points: Vec<Vec<f64>>,
    pub components: Vec<GammaComponent>,
    pub geodesics: Vec<Geodesic>,
    /// Membership of each geodesic in the minimal-crossing family.
    pub g0: Vec<bool>,
    pub n0: usize,
    pub n_gamma: Option<usize>,
    pub p_pred: Option<f64>,
    /// Second difference of `phi - S` across the boundary at each type-1 point.
    pub contact_second_difference: Vec<f64>,
    /// Leading real part `e1 + r22(well, 0)` of the first resonance over `h`.
    pub rho10: f64,
    pub notes: Vec<String>,
}

/// Runs the full geometry pipeline: boundaries, eikonal field, classification.
pub fn analyze(model: &ModelConfig, grid: &Grid) -> Result<GeometryReport> {
    let island = island_boundary(model, grid)?;
    let cirque = cirque_boundary(model, grid)?;
    let field = super::eikonal_solve(model, grid)?;
    classify(model, &field, &island, &cirque)
}

/// Finds the type-1 points, backtracks minimal geodesics, counts crossings
/// and derives the predicted width exponent.
pub fn classify(
    model: &ModelConfig,
    field: &AgmonField,
    island: &BoundarySet,
    cirque: &BoundarySet,
) -> Result<GeometryReport> {
    if island.is_empty() {
        return Err(Error::NoSeaFound);
    }
    let grid = &field.grid;
    let spacing = grid.max_spacing();
    let sup_v = field
        .order
        .iter()
        .map(|&k| model.metric(&grid.node(k)))
        .fold(0.0, f64::max);
    let tol = (5.0 * spacing * sup_v.sqrt()).max(1e-6);
    let phis: Vec<f64> = island.points.iter().map(|p| field.value(p)).collect();
    let s_field = phis.iter().copied().fold(f64::INFINITY, f64::min);
    let mut notes = Vec::new();

    let (type1, components, geodesics, s) = if model.dimension == 1 {
        one_dimensional(model, field, island, cirque, s_field, tol)
    } else {
        two_dimensional(model, field, island, &phis, s_field, tol, &mut notes)?
    };
    if type1.is_empty() {
        return Err(Error::DegenerateGeometry("no minimizers of phi on the island boundary".into()));
    }

    let n0 = geodesics.iter().map(|g| g.n_gamma).min().unwrap_or(0);
    let g0: Vec<bool> = geodesics.iter().map(|g| g.n_gamma == n0).collect();
    for g in &geodesics {
        if g.n_gamma % 2 == 0 {
            notes.push(format!("geodesic ending at {:?} crosses the cirque boundary an even number of times", g.end()));
        }
    }
    let dims: Vec<usize> = components.iter().map(|c| c.dimension).collect();
    let n_gamma = if dims.iter().all(|&d| d == dims[0]) {
        Some(dims[0])
    } else {
        notes.push("type-1 set mixes isolated points and curves; no single exponent predicted".into());
        None
    };
    if dims.iter().filter(|&&d| d == 1).count() > 1 {
        return Err(Error::DegenerateGeometry("type-1 set has several curve components".into()));
    }
    let p_pred = n_gamma.map(|ng| n0 as f64 + (1.0 - ng as f64) / 2.0);

    let contact_second_difference = type1
        .iter()
        .map(|p| {
            let g = field.gradient(p);
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let d = 4.0 * spacing;
            let shift = |t: f64| -> Vec<f64> { p.iter().zip(&g).map(|(a, b)| a + t * d * b / gn).collect() };
            (field.value(&shift(1.0)) - 2.0 * field.value(p) + field.value(&shift(-1.0))) / (d * d)
        })
        .collect();

    Ok(GeometryReport {
        model: model.name.clone(),
        island: island.clone(),
        cirque: cirque.clone(),
        s,
        s_field,
        tol,
        type1_points: type1,
        components,
        geodesics,
        g0,
        n0,
        n_gamma,
        p_pred,
        contact_second_difference,
        rho10: crate::spectral::harmonic_levels(model, 1)?,
        notes,
    })
}

type Classified = (Vec<Vec<f64>>, Vec<GammaComponent>, Vec<Geodesic>, f64);

fn one_dimensional(
    model: &ModelConfig,
    field: &AgmonField,
    island: &BoundarySet,
    cirque: &BoundarySet,
    s_field: f64,
    tol: f64,
) -> Classified {
    let w = model.well[0];
    // innermost island boundary point on each side of the well
    let right = island.points.iter().map(|p| p[0]).filter(|&x| x > w).fold(f64::INFINITY, f64::min);
    let left = island.points.iter().map(|p| p[0]).filter(|&x| x < w).fold(f64::NEG_INFINITY, f64::max);
    let ends: Vec<f64> = [left, right].into_iter().filter(|x| x.is_finite()).collect();
    let exact: Vec<f64> = ends.iter().map(|&x| agmon_distance_1d(model, w, x)).collect();
    let s = exact.iter().copied().fold(f64::INFINITY, f64::min);
    let step = field.grid.spacing()[0] / 4.0;

    let mut type1 = Vec::new();
    let mut comps = Vec::new();
    let mut geos = Vec::new();
    for (&end, &d) in ends.iter().zip(&exact) {
        if (field.value(&[end]) - s_field).abs() > tol && d - s > tol {
            continue;
        }
        type1.push(vec![end]);
        comps.push(GammaComponent { points: vec![vec![end]], dimension: 0, phi_range: 0.0, arc_length: 0.0 });
        let n = ((end - w).abs() / step).ceil().max(1.0) as usize;
        let polyline: Vec<Vec<f64>> = (0..=n).map(|i| vec![w + (end - w) * i as f64 / n as f64]).collect();
        let crossings: Vec<Crossing> = cirque
            .points
            .iter()
            .zip(&cirque.gradient_norms)
            .filter(|(p, _)| (p[0] - w) * (end - w) > 0.0 && (p[0] - w).abs() < (end - w).abs())
            .map(|(p, g)| Crossing { point: p.clone(), margin: *g })
            .collect();
        geos.push(Geodesic { n_gamma: crossings.len(), polyline, crossings, length: d });
    }
    (type1, comps, geos, s)
}

fn two_dimensional(
    model: &ModelConfig,
    field: &AgmonField,
    island: &BoundarySet,
    phis: &[f64],
    s: f64,
    tol: f64,
    notes: &mut Vec<String>,
) -> Result<Classified> {
    let spacing = field.grid.max_spacing();
    let near: Vec<bool> = phis.iter().map(|&v| v - s <= tol).collect();
    // connected components of the contour graph restricted to near-minimal points
    let n = island.points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut deg = vec![0usize; n];
    for &(a, b) in &island.segments {
        if near[a] && near[b] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
            deg[a] += 1;
            deg[b] += 1;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in (0..n).filter(|&i| near[i]) {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut type1 = Vec::new();
    let mut comps = Vec::new();
    let mut geos = Vec::new();
    for members in groups.values() {
        let closed = members.len() > 2 && members.iter().all(|&i| deg[i] == 2);
        let arc: f64 = island
            .segments
            .iter()
            .filter(|(a, b)| near[*a] && near[*b] && members.contains(a))
            .map(|&(a, b)| dist(&island.points[a], &island.points[b]))
            .sum();
        let (lo, hi) = members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(phis[i]), hi.max(phis[i]))
        });
        let range = hi - lo;
        let curve = closed || (range < 0.5 * tol && arc >= 10.0 * spacing);
        let best = *members.iter().min_by(|&&a, &&b| phis[a].total_cmp(&phis[b])).unwrap();
        type1.extend(members.iter().map(|&i| island.points[i].clone()));
        comps.push(GammaComponent {
            points: members.iter().map(|&i| island.points[i].clone()).collect(),
            dimension: usize::from(curve),
            phi_range: range,
            arc_length: arc,
        });
        geos.push(backtrack(model, field, &island.points[best])?);
    }
    if groups.len() > 1 {
        notes.push(format!("type-1 set has {} components", groups.len()));
    }
    Ok((type1, comps, geos, s))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Steepest descent of phi from `end` to the well, step spacing/4.
fn backtrack(model: &ModelConfig, field: &AgmonField, end: &[f64]) -> Result<Geodesic> {
    let spacing = field.grid.max_spacing();
    let step = spacing / 4.0;
    let mut path = vec![end.to_vec()];
    let mut p = end.to_vec();
    let max_steps = (40.0 * dist(end, &model.well) / step) as usize + 100;
    for _ in 0..max_steps {
        if dist(&p, &model.well) <= 2.0 * spacing {
            break;
        }
        let g = field.gradient(&p);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn < 1e-12 {
            break;
        }
        p = p.iter().zip(&g).map(|(a, b)| a - step * b / gn).collect();
        path.push(p.clone());
    }
    path.push(model.well.clone());
    path.reverse();

    let diff = |q: &[f64]| model.v1(q) - model.v2(q);
    let mut crossings = Vec::new();
    let mut length = 0.0;
    for w in path.windows(2) {
        let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
        length += model.metric(&mid).sqrt() * dist(&w[0], &w[1]);
        let (fa, fb) = (diff(&w[0]), diff(&w[1]));
        if (fa < 0.0) != (fb < 0.0) {
            let at = |t: f64| -> Vec<f64> { w[0].iter().zip(&w[1]).map(|(a, b)| a + t * (b - a)).collect() };
            let t = bisect(&|t| diff(&at(t)), 0.0, 1.0, 1e-12);
            let q = at(t);
            let (j1, j2) = (model.v1_jet(&q)?, model.v2_jet(&q)?);
            let margin = (0..model.dimension).map(|k| (j1.g[k].re - j2.g[k].re).powi(2)).sum::<f64>().sqrt();
            crossings.push(Crossing { point: q, margin });
        }
    }
    Ok(Geodesic { n_gamma: crossings.len(), polyline: path, crossings, length })
}

impl GeometryReport {
    pub fn to_json(&self) -> Value {
        let pts = |v: &[Vec<f64>]| -> Value { json!(v) };
        json!({
            "model": self.model,
            "S": self.s,
            "S_field": self.s_field,
            "n0": self.n0,
            "nGamma": self.n_gamma,
            "pPred": self.p_pred,
            "rho10": self.rho10,
            "tol": self.tol,
            "type1Points": pts(&self.type1_points),
            "islandBoundary": pts(&self.island.points),
            "cirqueBoundary": pts(&self.cirque.points),
            "components": self.components.iter().map(|c| json!({
                "dimension": c.dimension,
                "size": c.points.len(),
                "phiRange": c.phi_range,
                "arcLength": c.arc_length,
            })).collect::<Vec<_>>(),
            "geodesics": self.geodesics.iter().zip(&self.g0).map(|(g, &in0)| json!({
                "polyline": pts(&g.polyline),
                "crossings": g.crossings.iter().map(|c| json!({"point": c.point, "margin": c.margin})).collect::<Vec<_>>(),
                "N_gamma": g.n_gamma,
                "length": g.length,
                "G0": in0,
            })).collect::<Vec<_>>(),
            "contactSecondDifference": self.contact_second_difference,
            "notes": self.notes,
        })
    }

    /// Reads back the fields the width fit needs: `(S, p_pred, rho10)`.
    pub fn fit_inputs(v: &Value) -> Result<(f64, Option<f64>, Option<f64>)> {
        let s = v
            .get("S")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Config("geometry report lacks a numeric `S`".into()))?;
        let p = v.get("pPred").and_then(Value::as_f64);
        let rho10 = v.get("rho10").and_then(Value::as_f64);
        Ok((s, p, rho10))
    }
}

use super::{BoundarySet, Grid};
use std::collections::HashMap;

/// Zero contour of `f` on a 2D grid. Points sit on cell edges (linear
/// interpolation); segments join the two crossings inside each cell, with
/// saddles resolved by the cell-center average.
pub fn marching_squares<F: Fn(&[f64]) -> f64>(grid: &Grid, f: F) -> BoundarySet {
    let Grid::D2 { x, y } = *grid else {
        return BoundarySet::default();
    };
    let (nx, ny) = (x.2, y.2);
    let s = grid.spacing();
    let vals: Vec<f64> = (0..nx * ny).map(|k| f(&grid.node(k))).collect();
    let at = |i: usize, j: usize| vals[j * nx + i];

    let mut set = BoundarySet::default();
    let mut edge_point: HashMap<(usize, usize, u8), usize> = HashMap::new();
    let mut point_on = |i: usize, j: usize, dir: u8, set: &mut BoundarySet| -> usize {
        *edge_point.entry((i, j, dir)).or_insert_with(|| {
            let (a, b, p0, p1) = if dir == 0 {
                (at(i, j), at(i + 1, j), [x.0 + i as f64 * s[0], y.0 + j as f64 * s[1]], [s[0], 0.0])
            } else {
                (at(i, j), at(i, j + 1), [x.0 + i as f64 * s[0], y.0 + j as f64 * s[1]], [0.0, s[1]])
            };
            let t = a / (a - b);
            set.points.push(vec![p0[0] + t * p1[0], p0[1] + t * p1[1]]);
            set.points.len() - 1
        })
    };
    let crosses = |a: f64, b: f64| (a < 0.0) != (b < 0.0);

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (f00, f10, f01, f11) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
            // edges: bottom, right, top, left
            let mut hits = Vec::with_capacity(4);
            if crosses(f00, f10) {
                hits.push((i, j, 0u8));
            }
            if crosses(f10, f11) {
                hits.push((i + 1, j, 1u8));
            }
            if crosses(f01, f11) {
                hits.push((i, j + 1, 0u8));
            }
            if crosses(f00, f01) {
                hits.push((i, j, 1u8));
            }
            match hits.len() {
                2 => {
                    let a = point_on(hits[0].0, hits[0].1, hits[0].2, &mut set);
                    let b = point_on(hits[1].0, hits[1].1, hits[1].2, &mut set);
                    set.segments.push((a, b));
                }
                4 => {
                    let ids: Vec<usize> = hits.iter().map(|h| point_on(h.0, h.1, h.2, &mut set)).collect();
                    let center = 0.25 * (f00 + f10 + f01 + f11);
                    // pair edges so that the center's sign region stays connected
                    if (center < 0.0) == (f00 < 0.0) {
                        set.segments.push((ids[0], ids[1]));
                        set.segments.push((ids[2], ids[3]));
                    } else {
                        set.segments.push((ids[0], ids[3]));
                        set.segments.push((ids[1], ids[2]));
                    }
                }
                _ => {}
            }
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_contour_is_closed() {
        let g = Grid::square(-2.0, 2.0, 81);
        let set = marching_squares(&g, |p| p[0] * p[0] + p[1] * p[1] - 1.0);
        assert!(!set.points.is_empty());
        for p in &set.points {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 1.0).abs() < 2e-3);
        }
        // closed curve: every point has exactly two segment ends
        let mut deg = vec![0; set.points.len()];
        for &(a, b) in &set.segments {
            deg[a] += 1;
            deg[b] += 1;
        }
        assert!(deg.iter().all(|&d| d == 2));
    }
}

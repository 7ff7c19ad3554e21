//! Complex-distorted discretization and resonance search in one dimension.

mod assemble;
mod banded;
mod distortion;
mod solve;

pub use assemble::{assemble, assemble_default, default_nodes, DistortedOperator, FLOOR_FACTOR};
pub use banded::{BandLu, BandMatrix};
pub use distortion::{default_theta, DistortionSpec, THETA_MAX};
pub use solve::{
    find_resonance, find_resonance_with, theta_plateau, PlateauReport, PlateauRow, ResonancePair, SolverOptions,
};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, C64};

/// Default shift for the first resonance: `rho10 * h`.
pub fn default_shift(model: &ModelConfig, h: f64) -> Result<C64> {
    Ok(C64::new(harmonic_levels(model, 1)? * h, 0.0))
}

/// Assembles at the default grid for `h` and solves near the default shift.
pub fn solve_default(model: &ModelConfig, h: f64, theta: Option<f64>, tol: f64) -> Result<(DistortedOperator, ResonancePair)> {
    let mut dist = DistortionSpec::for_h(h);
    if let Some(t) = theta {
        dist = dist.with_theta(t)?;
    }
    let op = assemble_default(model, &dist, h)?;
    let pair = find_resonance(&op, default_shift(model, h)?, tol)?;
    Ok((op, pair))
}

/// `e_j + r22(well, 0)`, with `e_j` the j-th harmonic level of the well (h = 1).
pub fn harmonic_levels(model: &ModelConfig, j: usize) -> Result<f64> {
    if j == 0 {
        return Err(Error::Precondition("levels are numbered from 1".into()));
    }
    let eig = model.hessian_eigenvalues()?;
    if eig.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidModel("Hessian of V2 at the well is not positive".into()));
    }
    let omegas: Vec<f64> = eig.iter().map(|l| (l / 2.0).sqrt()).collect();
    let e = match omegas.len() {
        1 => (2 * j - 1) as f64 * omegas[0],
        _ => nth_level_2d(&omegas, j),
    };
    let w: Vec<C64> = model.well.iter().map(|&x| C64::new(x, 0.0)).collect();
    let zeros = vec![C64::new(0.0, 0.0); model.dimension];
    Ok(e + model.couplings.r22.symbol(&w, &zeros).re)
}

/// j-th sum `sum_k (2 n_k + 1) omega_k` in increasing order.
fn nth_level_2d(om: &[f64], j: usize) -> f64 {
    let mut levels = Vec::new();
    for a in 0..=j {
        for b in 0..=j {
            levels.push((2 * a + 1) as f64 * om[0] + (2 * b + 1) as f64 * om[1]);
        }
    }
    levels.sort_by(f64::total_cmp);
    levels[j - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, CouplingSpec};

    #[test]
    fn harmonic_levels_closed_form() {
        let m = preset("canonical-1d").unwrap();
        assert_eq!(harmonic_levels(&m, 1).unwrap(), 1.0);
        assert_eq!(harmonic_levels(&m, 2).unwrap(), 3.0);
        let shifted = m.with_r22(CouplingSpec::constant(0.1));
        assert!((harmonic_levels(&shifted, 1).unwrap() - 1.1).abs() < 1e-15);
        assert!(harmonic_levels(&preset("harmonic-exact").unwrap(), 0).is_err());
    }

    #[test]
    fn uncoupled_gives_real_bound_state() {
        let m = preset("uncoupled-1d").unwrap();
        let (op, p) = solve_default(&m, 0.08, Some(0.1), 1e-13).unwrap();
        assert!(p.rho.im.abs() < 1e-12, "{}", p.rho);
        assert!((p.rho.re - 0.08).abs() < 0.05 * 0.08);
        assert!(p.residual < 1e-10);
        assert!((p.c_norm - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(op.floor() > p.rho.im.abs());
    }

    #[test]
    fn canonical_resonance_has_negative_width() {
        let m = preset("canonical-1d").unwrap();
        let (op, p) = solve_default(&m, 0.08, None, 1e-13).unwrap();
        assert!(p.rho.im < 0.0);
        assert!(p.rho.im.abs() > 100.0 * op.floor());
        assert!((p.rho.re / 0.08 - 1.0).abs() < 0.1);
        assert!(!p.far_from_shift);
        // the direct quotient agrees to rounding on the real part
        assert!((p.rho_direct.re - p.rho.re).abs() < 1e-12);
    }

    #[test]
    fn hermitian_limit_is_real() {
        let m = preset("uncoupled-1d").unwrap();
        let d = DistortionSpec::for_h(0.08).with_theta(0.0).unwrap();
        let op = assemble_default(&m, &d, 0.08).unwrap();
        for s in [0.08, 0.24, 0.4] {
            let p = find_resonance(&op, C64::new(s, 0.0), 1e-12).unwrap();
            assert!(p.rho.im.abs() <= 1e-12 * op.inf_norm());
        }
    }

    #[test]
    fn resonant_state_has_parity() {
        let m = preset("canonical-1d").unwrap();
        let (_, p) = solve_default(&m, 0.1, None, 1e-13).unwrap();
        let n = p.vector.len() / 2;
        let mut even: f64 = 0.0;
        let mut odd: f64 = 0.0;
        for i in 0..n {
            for c in 0..2 {
                let (a, b) = (p.vector[2 * i + c], p.vector[2 * (n - 1 - i) + c]);
                even = even.max((a - b).norm());
                odd = odd.max((a + b).norm());
            }
        }
        assert!(even.min(odd) < 1e-8, "even {even:e} odd {odd:e}");
    }

    #[test]
    fn box_independence() {
        let m = preset("canonical-1d").unwrap();
        let h = 0.1;
        let small = DistortionSpec::new(3.0, 7.0, default_theta(h)).unwrap();
        let large = DistortionSpec::new(3.0, 10.5, default_theta(h)).unwrap();
        // same spacing on both boxes: M + 1 = 2L / dx
        let m1 = 1200;
        let m2 = (m1 + 1) * 3 / 2 - 1;
        let a = find_resonance(&assemble(&m, &small, h, m1 - 1).unwrap(), C64::new(h, 0.0), 1e-13).unwrap();
        let b = find_resonance(&assemble(&m, &large, h, m2 - 1).unwrap(), C64::new(h, 0.0), 1e-13).unwrap();
        assert!((a.rho - b.rho).norm() / a.rho.norm() < 1e-10, "{} vs {}", a.rho, b.rho);
    }

    #[test]
    fn grid_convergence_is_second_order() {
        let m = preset("canonical-1d").unwrap();
        let h = 0.1;
        let d = DistortionSpec::for_h(h);
        let re = |n: usize| find_resonance(&assemble(&m, &d, h, n).unwrap(), C64::new(h, 0.0), 1e-13).unwrap().rho.re;
        // M + 1 doubles each time
        let (a, b, c) = (re(599), re(1199), re(2399));
        let order = ((a - b) / (b - c)).abs().log2();
        assert!(order >= 1.8, "order {order}");
    }

    #[test]
    fn far_shift_is_flagged() {
        let m = preset("canonical-1d").unwrap();
        let op = assemble_default(&m, &DistortionSpec::for_h(0.1), 0.1).unwrap();
        match find_resonance(&op, C64::new(100.0, 0.0), 1e-12) {
            Ok(p) => assert!(p.far_from_shift && (p.rho - 100.0).norm() > 1.0),
            Err(e) => assert!(matches!(e, Error::NoConvergence { .. })),
        }
    }

    #[test]
    fn tolerance_precondition() {
        let m = preset("canonical-1d").unwrap();
        let op = assemble_default(&m, &DistortionSpec::for_h(0.1), 0.1).unwrap();
        assert!(matches!(find_resonance(&op, C64::new(0.1, 0.0), 1e-15), Err(Error::Precondition(_))));
    }

    #[test]
    fn plateau_over_angles() {
        let m = preset("canonical-1d").unwrap();
        let h = 0.08;
        let k = default_theta(h);
        let factory = |t: f64| assemble_default(&m, &DistortionSpec::for_h(h).with_theta(t)?, h);
        let r = theta_plateau(factory, C64::new(h, 0.0), &[k, 2.0 * k, 3.0 * k], 1e-13).unwrap();
        assert!(r.max_im_deviation < 0.01, "{}", r.max_im_deviation);
        let r = theta_plateau(factory, C64::new(h, 0.0), &[0.0, k, 2.0 * k], 1e-13).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.warnings.len(), 1);
        assert!(theta_plateau(factory, C64::new(h, 0.0), &[k], 1e-13).is_err());
    }

    #[test]
    fn momentum_coupling_uses_two_sided_quotient() {
        use crate::model::{Couplings, Expr};
        let mut m = preset("canonical-1d").unwrap();
        m.couplings = Couplings {
            r12: CouplingSpec { a: Expr::c(0.2), b: vec![Expr::c(0.1)] },
            ..Couplings::default()
        };
        let (op, p) = solve_default(&m, 0.1, None, 1e-13).unwrap();
        assert!(!op.symmetric);
        assert!(p.residual < 1e-10);
        assert!(p.rho.im < 0.0);
    }
}

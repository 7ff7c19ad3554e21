//! Potentials, coupling symbols and the checks a model must satisfy.

mod assumptions;
mod config;
mod expr;
mod jet;

pub use assumptions::{default_probe_grid, validate_assumptions, TRANSVERSAL_MARGIN, AssumptionCheck, AssumptionReport, Status};
pub use config::{
    canonical_v1_expr, canonical_v2_expr, preset, to_c, CouplingSpec, Couplings, ModelConfig, PRESETS, WELL_TOL,
};
pub use expr::{Expr, POLE_CLEARANCE};
pub use jet::{Jet, C64};

use crate::error::Result;

/// Evaluates an expression at a complex point, failing when a pole is closer
/// than [`POLE_CLEARANCE`].
pub fn eval_potential(spec: &Expr, point: &[C64]) -> Result<C64> {
    Ok(spec.eval_jet(point)?.v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_values() {
        let v2 = canonical_v2_expr();
        assert_eq!(eval_potential(&v2, &[C64::new(0.0, 0.0)]).unwrap(), C64::new(0.0, 0.0));
        let at_i = eval_potential(&v2, &[C64::new(0.0, 1.0)]).unwrap();
        assert!((at_i - C64::new(1.0 - std::f64::consts::E, 0.0)).norm() < 1e-14);
        let v1 = eval_potential(&canonical_v1_expr(), &[C64::new(0.0, 0.0)]).unwrap();
        assert!((v1.re - 1.261_594_155_955_765).abs() < 1e-12);
    }

    #[test]
    fn canonical_geometry_sanity() {
        let m = preset("canonical-1d").unwrap();
        assert!(m.v2(&[0.0]) < m.v1(&[0.0]));
        assert!(m.v1(&[2.0]) < 0.0 && m.v1(&[-2.0]) < 0.0);
        assert!((m.hessian_at_well().unwrap()[0][0] - 2.0).abs() < 1e-14);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![Just(Expr::x()), (-2.0..2.0f64).prop_map(Expr::c)];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
                inner.clone().prop_map(Expr::neg),
                inner.clone().prop_map(|a| Expr::exp(Expr::mul(Expr::c(0.3), a))),
                inner.clone().prop_map(Expr::tanh),
                (inner.clone(), 0..4i32).prop_map(|(a, n)| Expr::pow(a, n)),
                (inner, proptest::collection::vec(-1.0..1.0f64, 1..4)).prop_map(|(a, c)| Expr::poly(c, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn real_axis_reality(e in arb_expr(), x in -3.0..3.0f64) {
            let v = e.eval(&[C64::new(x, 0.0)]);
            prop_assume!(v.re.is_finite());
            prop_assert_eq!(v.im, 0.0);
        }

        #[test]
        fn schwarz_reflection(e in arb_expr(), x in -2.0..2.0f64, y in -0.5..0.5f64) {
            let z = C64::new(x, y);
            let a = e.eval(&[z.conj()]);
            let b = e.eval(&[z]).conj();
            prop_assume!(a.is_finite() && b.is_finite());
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }
}

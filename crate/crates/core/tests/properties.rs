use predissoc::geometry::{eikonal_solve, Grid};
use predissoc::harness::{parse_records_csv, write_records_csv, SweepConfig, SweepRecord};
use predissoc::model::{preset, C64};
use predissoc::spectral::solve_default;
use predissoc::width::{decay_profile, GreenWidth, Island};
use proptest::prelude::*;

fn record(h: f64, re: f64, im: f64, green: Option<f64>) -> SweepRecord {
    SweepRecord {
        h,
        theta: h * (1.0 / h).ln(),
        rho: C64::new(re, im),
        residual: 1e-15,
        green: green.map(GreenWidth::Value),
        floor: false,
        floor_value: 1e-13,
        iterations: 3,
        nodes: 600,
        elapsed_ms: 0.0,
        error: None,
        green_error: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn decay_weight_stays_finite(h in 0.04f64..0.12) {
        let m = preset("canonical-1d").unwrap();
        let field = eikonal_solve(&m, &Grid::line(-5.0, 5.0, 2001)).unwrap();
        let island = Island::of(&m).unwrap();
        let (op, pair) = solve_default(&m, h, None, 1e-13).unwrap();
        let e = decay_profile(&pair, &op, &field, &island, 0.5575887224056111, 0.9).unwrap();
        prop_assert!(e.log_w.is_finite());
        prop_assert!(e.argmax.abs() <= 0.9 * island.hi + 1e-12);
    }
}

proptest! {
    #[test]
    fn records_csv_round_trip(
        rows in prop::collection::vec((1e-3f64..0.5, -1e3f64..1e3, -1.0f64..0.0, prop::option::of(-1.0f64..0.0)), 1..20)
    ) {
        let recs: Vec<SweepRecord> = rows.iter().map(|&(h, re, im, g)| record(h, re, im, g)).collect();
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &recs).unwrap();
        let back = parse_records_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            prop_assert_eq!(a.h, b.h);
            prop_assert_eq!(a.rho, b.rho);
            prop_assert_eq!(a.green, b.green);
        }
    }

    #[test]
    fn default_grid_resolves_h(h in 0.01f64..0.5, per in 4.0f64..16.0) {
        let mut cfg = SweepConfig::new("canonical-1d", vec![h]);
        cfg.points_per_h = per;
        let m = cfg.nodes(h);
        prop_assert!(m >= 500);
        prop_assert!(2.0 * cfg.l / (m - 1) as f64 <= h / per);
    }
}

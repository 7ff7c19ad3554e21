use super::config::SweepConfig;
use crate::error::{Error, Result};
use crate::geometry::{cirque_boundary, Grid};
use crate::model::{default_probe_grid, validate_assumptions, ModelConfig, Status, C64};
use crate::spectral::{assemble, default_shift, find_resonance_with, DistortionSpec, SolverOptions};
use crate::width::{green_width, CutoffSpec, GreenWidth};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::time::Instant;

/// Checks whose failure makes the computed resonance meaningless. The
/// remaining ones (sea at the box edge, non-trapping, transversality,
/// ellipticity) bear on the width law, not on the eigenproblem.
const HARD_CHECKS: [&str; 6] =
    ["A1.v1_well", "A1.v2_nonneg", "A1.v2_unique_zero", "A1.v2_edge", "A2.analytic", "A3.diagonal_real"];

/// One h of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub h: f64,
    pub theta: f64,
    pub rho: C64,
    pub residual: f64,
    /// `None` when the commutator estimate could not be formed.
    pub green: Option<GreenWidth>,
    /// `|Im rho|` below the operator floor.
    pub floor: bool,
    pub floor_value: f64,
    pub iterations: usize,
    pub nodes: usize,
    pub elapsed_ms: f64,
    /// Set when the record failed; numeric fields are then NaN.
    pub error: Option<String>,
    pub green_error: Option<String>,
}

impl SweepRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    /// Usable for width fits: solved, above the floor.
    pub fn fit_usable(&self) -> bool {
        self.ok() && !self.floor
    }

    fn failed(h: f64, theta: f64, nodes: usize, elapsed_ms: f64, e: &Error) -> Self {
        SweepRecord {
            h,
            theta,
            rho: C64::new(f64::NAN, f64::NAN),
            residual: f64::NAN,
            green: None,
            floor: false,
            floor_value: f64::NAN,
            iterations: 0,
            nodes,
            elapsed_ms,
            error: Some(e.to_string()),
            green_error: None,
        }
    }

    pub fn to_json(&self) -> Value {
        let num = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
        json!({
            "h": self.h,
            "theta": self.theta,
            "rho_re": num(self.rho.re),
            "rho_im": num(self.rho.im),
            "residual": num(self.residual),
            "green_im": match self.green {
                Some(GreenWidth::Value(v)) => json!(v),
                Some(GreenWidth::BelowFloor(_)) => json!("floor"),
                None => Value::Null,
            },
            "floor": self.floor,
            "floor_value": num(self.floor_value),
            "iterations": self.iterations,
            "nodes": self.nodes,
            "elapsed_ms": self.elapsed_ms,
            "error": self.error,
            "green_error": self.green_error,
        })
    }
}

/// Rejects models failing any hard check, and `h` too large for the first
/// level to sit below the crossing energy.
pub fn check_sweep_model(model: &ModelConfig, cfg: &SweepConfig) -> Result<()> {
    if model.dimension != 1 {
        return Err(Error::Precondition("sweeps run on one-dimensional models".into()));
    }
    let report = validate_assumptions(model, &default_probe_grid(1));
    let hard: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| c.status == Status::Fail && HARD_CHECKS.contains(&c.id.as_str()))
        .map(|c| c.id.as_str())
        .collect();
    if !hard.is_empty() {
        return Err(Error::Precondition(format!("model fails {}", hard.join(", "))));
    }
    if let Ok(set) = cirque_boundary(model, &Grid::line(-cfg.l, cfg.l, 4001)) {
        let ec = set.points.iter().map(|p| model.v1(p)).fold(f64::INFINITY, f64::min);
        let e1 = default_shift(model, cfg.h[0])?.re;
        if e1 >= ec {
            return Err(Error::Config(format!("e1 h = {e1:.4} at h = {} reaches the crossing energy {ec:.4}", cfg.h[0])));
        }
    }
    Ok(())
}

fn run_one(model: &ModelConfig, cfg: &SweepConfig, cut: Option<&CutoffSpec>, h: f64) -> SweepRecord {
    let start = Instant::now();
    let nodes = cfg.nodes(h);
    let theta = cfg.theta.theta(h).unwrap_or(f64::NAN);
    let elapsed = |s: &Instant| s.elapsed().as_secs_f64() * 1e3;
    let solved = (|| {
        let dist = DistortionSpec::new(cfg.r0, cfg.l, theta)?;
        let op = assemble(model, &dist, h, nodes)?;
        let opts = SolverOptions { tol: cfg.tol, seed: cfg.seed, ..SolverOptions::default() };
        let pair = find_resonance_with(&op, default_shift(model, h)?, &opts)?;
        Ok::<_, Error>((op, pair))
    })();
    let (op, pair) = match solved {
        Ok(v) => v,
        Err(e) => return SweepRecord::failed(h, theta, nodes, elapsed(&start), &e),
    };
    let (green, green_error) = match cut.map(|c| green_width(&pair, &op, c)) {
        Some(Ok(g)) => (Some(g), None),
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, Some("no island: commutator estimate not defined".into())),
    };
    let floor_value = op.floor();
    SweepRecord {
        h,
        theta,
        rho: pair.rho,
        residual: pair.residual,
        green,
        floor: pair.rho.im.abs() < floor_value,
        floor_value,
        iterations: pair.iterations,
        nodes,
        elapsed_ms: elapsed(&start),
        error: None,
        green_error,
    }
}

/// Solves every `h` of the sweep. Records keep the order of `cfg.h`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let model = cfg.model()?;
    run_sweep_model(&model, cfg)
}

/// As [`run_sweep`] with the model given directly.
pub fn run_sweep_model(model: &ModelConfig, cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    check_sweep_model(model, cfg)?;
    let profile = cfg.cutoff.profile()?;
    let cut = CutoffSpec::new(model, cfg.cutoff.n, profile).ok();
    let work = || -> Vec<SweepRecord> { cfg.h.par_iter().map(|&h| run_one(model, cfg, cut.as_ref(), h)).collect() };
    let records = if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(work)
    } else {
        work()
    };
    let failed = records.iter().filter(|r| !r.ok()).count();
    if 2 * failed > records.len() {
        return Err(Error::SweepFailed { failed, total: records.len() });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::io::write_records_csv;
    use crate::model::{preset, CouplingSpec};

    fn csv(records: &[SweepRecord]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_records_csv(&mut buf, records).unwrap();
        buf
    }

    #[test]
    fn uncoupled_sweep_is_all_floor() {
        let recs = run_sweep(&SweepConfig::new("uncoupled-1d", vec![0.1, 0.08, 0.06])).unwrap();
        assert!(recs.iter().all(|r| r.ok() && r.floor), "{recs:?}");
        assert!(recs.iter().all(|r| matches!(r.green, Some(GreenWidth::BelowFloor(_)))));
    }

    #[test]
    fn empty_h_is_a_config_error() {
        assert!(matches!(run_sweep(&SweepConfig::new("canonical-1d", vec![])), Err(Error::Config(_))));
    }

    #[test]
    fn large_h_reaching_the_crossing_is_rejected() {
        assert!(matches!(run_sweep(&SweepConfig::new("canonical-1d", vec![0.9])), Err(Error::Config(_))));
    }

    #[test]
    fn two_dimensional_models_are_rejected() {
        use crate::model::{Couplings, Expr};
        let r2 = Expr::add(Expr::pow(Expr::x(), 2), Expr::pow(Expr::y(), 2));
        let v1 = Expr::sub(Expr::c(0.5), Expr::tanh(Expr::sub(r2.clone(), Expr::c(1.0))));
        let v2 = Expr::sub(Expr::c(1.0), Expr::exp(Expr::neg(r2)));
        let m = ModelConfig::new("radial-2d", 2, v1, v2, Couplings::default(), vec![0.0, 0.0]).unwrap();
        let cfg = SweepConfig::new("radial-2d", vec![0.1]);
        assert!(matches!(run_sweep_model(&m, &cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn output_does_not_depend_on_worker_count() {
        let mut cfg = SweepConfig::new("canonical-1d", vec![0.12, 0.1, 0.09, 0.08]);
        cfg.workers = 1;
        let a = run_sweep(&cfg).unwrap();
        cfg.workers = 4;
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(csv(&a), csv(&b));
    }

    #[test]
    fn width_shrinks_with_h() {
        let recs = run_sweep(&SweepConfig::new("canonical-1d", vec![0.12, 0.1, 0.08, 0.06])).unwrap();
        for w in recs.windows(2) {
            assert!(w[1].rho.im.abs() < w[0].rho.im.abs(), "{} vs {}", w[0].rho.im, w[1].rho.im);
            assert!(w[0].rho.im < 0.0);
        }
    }

    #[test]
    fn width_scales_with_coupling_squared() {
        let cfg = SweepConfig::new("canonical-1d", vec![0.08]);
        let pts: Vec<(f64, f64)> = [0.1, 0.2, 0.4]
            .iter()
            .map(|&c| {
                let m = preset("canonical-1d").unwrap().with_r12(CouplingSpec::constant(c));
                let r = &run_sweep_model(&m, &cfg).unwrap()[0];
                (c.ln(), (-r.rho.im).ln())
            })
            .collect();
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn canonical_default_range() {
        let h: Vec<f64> = (0..9).map(|i| 0.12 - 0.01 * i as f64).collect();
        let recs = run_sweep(&SweepConfig::new("canonical-1d", h)).unwrap();
        assert_eq!(recs.len(), 9);
        for r in recs.iter().filter(|r| r.h >= 0.05 - 1e-12) {
            assert!(!r.floor && r.rho.im < 0.0, "h = {}: {}", r.h, r.rho);
        }
    }

    #[test]
    fn harmonic_real_part_intercept_is_one() {
        let mut cfg = SweepConfig::new("harmonic-exact", vec![0.12, 0.1, 0.08, 0.06]);
        cfg.theta = crate::harness::ThetaRule::Fixed(0.0);
        let recs = run_sweep(&cfg).unwrap();
        let fit = crate::harness::fit_real_part(&recs, 1.0).unwrap();
        assert!(fit.deviation < 1e-3, "{}", fit.intercept);
    }
}

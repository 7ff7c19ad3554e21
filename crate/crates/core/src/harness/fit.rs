use super::sweep::SweepRecord;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

/// Condition number (of the column-normalized design) above which a fit is refused.
pub const MAX_CONDITION: f64 = 1e10;
/// Relative tolerance on `S_fit` against the geometric `S`.
pub const RATE_TOL: f64 = 0.05;
/// Absolute tolerance on the pinned-`S` power.
pub const POWER_TOL: f64 = 0.3;
/// Relative tolerance on the real-part intercept.
pub const REALPART_TOL: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default)]
pub struct FitOptions {
    /// Adds an `h ln(1/h)` column to both fits.
    pub log_correction: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub points: usize,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub s_fit: f64,
    pub s_err: f64,
    pub p_fit: f64,
    pub p_err: f64,
    pub f_ln: f64,
    pub f_ln_err: f64,
    pub p_fixed_s: f64,
    pub p_fixed_s_err: f64,
    pub s_geom: f64,
    pub p_pred: Option<f64>,
    pub points: usize,
    pub rate: Verdict,
    pub power: Option<Verdict>,
    pub realpart: Option<Verdict>,
    pub real_part: Option<RealPartFit>,
}

impl FitReport {
    pub fn to_json(&self) -> Value {
        json!({
            "S_fit": self.s_fit,
            "S_err": self.s_err,
            "p_fit": self.p_fit,
            "p_err": self.p_err,
            "p_fixedS": self.p_fixed_s,
            "p_fixedS_err": self.p_fixed_s_err,
            "f_ln": self.f_ln,
            "f_ln_err": self.f_ln_err,
            "S_geom": self.s_geom,
            "p_pred": self.p_pred,
            "points": self.points,
            "verdicts": {
                "rate": self.rate,
                "power": self.power,
                "realpart": self.realpart,
            },
            "real_part": self.real_part,
        })
    }
}

/// Least-squares coefficients with standard errors.
#[derive(Clone, Debug)]
pub struct LsqFit {
    pub coef: Vec<f64>,
    pub err: Vec<f64>,
    pub condition: f64,
}

/// Solves `min |A c - y|` via SVD of the column-normalized design.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<LsqFit> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n < k || k == 0 {
        return Err(Error::Precondition(format!("{n} equations for {k} unknowns")));
    }
    let mut a = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let scale: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    if scale.iter().any(|&s| s == 0.0) {
        return Err(Error::RankDeficient { condition: f64::INFINITY });
    }
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.clone().svd(true, true);
    let (smax, smin) = svd.singular_values.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }
    let b = DVector::from_column_slice(y);
    let c = svd.solve(&b, 0.0).map_err(|e| Error::Precondition(e.to_string()))?;
    let resid = &a * &c - &b;
    let dof = n - k;
    let s2 = if dof > 0 { resid.norm_squared() / dof as f64 } else { 0.0 };
    // covariance of the normalized coefficients: s2 V S^-2 V^T
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let coef: Vec<f64> = (0..k).map(|j| c[j] / scale[j]).collect();
    let err: Vec<f64> = (0..k)
        .map(|j| {
            let var: f64 = (0..k).map(|r| (v_t[(r, j)] / svd.singular_values[r]).powi(2)).sum();
            (s2 * var).sqrt() / scale[j]
        })
        .collect();
    Ok(LsqFit { coef, err, condition })
}

/// Fits `ln(-Im rho) = ln f - 2 S / h + p ln h` over non-floor records with
/// `Im rho < 0`: once with `S` free and once with `S = s_geom`.
pub fn fit_width_law(
    records: &[SweepRecord],
    s_geom: f64,
    p_pred: Option<f64>,
    rho10: Option<f64>,
    opts: FitOptions,
) -> Result<FitReport> {
    let pts: Vec<(f64, f64)> =
        records.iter().filter(|r| r.fit_usable() && r.rho.im < 0.0).map(|r| (r.h, (-r.rho.im).ln())).collect();
    if pts.len() < 5 {
        return Err(Error::Precondition(format!("width fit needs at least 5 non-floor records, got {}", pts.len())));
    }
    let extra = |h: f64| if opts.log_correction { vec![h * (1.0 / h).ln()] } else { vec![] };
    let rows: Vec<Vec<f64>> = pts.iter().map(|&(h, _)| [vec![1.0, -2.0 / h, h.ln()], extra(h)].concat()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let free = least_squares(&rows, &y)?;

    let rows_p: Vec<Vec<f64>> = pts.iter().map(|&(h, _)| [vec![1.0, h.ln()], extra(h)].concat()).collect();
    let y_p: Vec<f64> = pts.iter().map(|&(h, y)| y + 2.0 * s_geom / h).collect();
    let pinned = least_squares(&rows_p, &y_p)?;

    let n = pts.len();
    let s_fit = free.coef[1];
    let rate = Verdict {
        pass: ((s_fit - s_geom) / s_geom).abs() <= RATE_TOL,
        value: s_fit,
        target: s_geom,
        tolerance: RATE_TOL,
        points: n,
    };
    let power = p_pred.map(|p| Verdict {
        pass: (pinned.coef[1] - p).abs() <= POWER_TOL,
        value: pinned.coef[1],
        target: p,
        tolerance: POWER_TOL,
        points: n,
    });
    let real_part = match rho10 {
        Some(t) => Some(fit_real_part(records, t)?),
        None => None,
    };
    let realpart = real_part.as_ref().map(|r| Verdict {
        pass: r.deviation.abs() <= REALPART_TOL * r.target.abs(),
        value: r.intercept,
        target: r.target,
        tolerance: REALPART_TOL,
        points: r.points,
    });
    Ok(FitReport {
        s_fit,
        s_err: free.err[1],
        p_fit: free.coef[2],
        p_err: free.err[2],
        f_ln: free.coef[0],
        f_ln_err: free.err[0],
        p_fixed_s: pinned.coef[1],
        p_fixed_s_err: pinned.err[1],
        s_geom,
        p_pred,
        points: n,
        rate,
        power,
        realpart,
        real_part,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RealPartFit {
    /// Limit of `Re rho / h` as `h -> 0`.
    pub intercept: f64,
    pub intercept_err: f64,
    pub slope: f64,
    /// `e1 + r22` at the well.
    pub target: f64,
    /// `intercept - target`.
    pub deviation: f64,
    pub points: usize,
}

/// Regresses `Re rho / h` on `h`. Floor-flagged records are kept: the
/// floor concerns only the imaginary part.
pub fn fit_real_part(records: &[SweepRecord], target: f64) -> Result<RealPartFit> {
    let pts: Vec<(f64, f64)> = records.iter().filter(|r| r.ok()).map(|r| (r.h, r.rho.re / r.h)).collect();
    if pts.len() < 3 {
        return Err(Error::Precondition(format!("real-part fit needs at least 3 records, got {}", pts.len())));
    }
    let first = pts[0].0;
    if pts.iter().all(|p| p.0 == first) {
        return Err(Error::Precondition("real-part fit needs more than one distinct h".into()));
    }
    let rows: Vec<Vec<f64>> = pts.iter().map(|&(h, _)| vec![1.0, h]).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let f = least_squares(&rows, &y)?;
    Ok(RealPartFit {
        intercept: f.coef[0],
        intercept_err: f.err[0],
        slope: f.coef[1],
        target,
        deviation: f.coef[0] - target,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::C64;
    use proptest::prelude::*;

    pub(crate) fn synthetic(h: f64, im: f64, re: f64) -> SweepRecord {
        SweepRecord {
            h,
            theta: 0.1,
            rho: C64::new(re, im),
            residual: 1e-16,
            green: None,
            floor: false,
            floor_value: 1e-13,
            iterations: 5,
            nodes: 1000,
            elapsed_ms: 0.0,
            error: None,
            green_error: None,
        }
    }

    fn law(h: f64, f: f64, s: f64, p: f64) -> f64 {
        -f * h.powf(p) * (-2.0 * s / h).exp()
    }

    fn sweep_hs() -> Vec<f64> {
        (0..9).map(|i| 0.12 - 0.01 * i as f64).collect()
    }

    #[test]
    fn exact_round_trip() {
        let recs: Vec<_> = sweep_hs().iter().map(|&h| synthetic(h, law(h, 2.0, 0.53, 1.5), h)).collect();
        let r = fit_width_law(&recs, 0.53, Some(1.5), Some(1.0), FitOptions::default()).unwrap();
        assert!((r.s_fit - 0.53).abs() < 1e-8, "{}", r.s_fit);
        assert!((r.p_fit - 1.5).abs() < 1e-8);
        assert!((r.f_ln.exp() - 2.0).abs() < 1e-8);
        assert!((r.p_fixed_s - 1.5).abs() < 1e-8);
        assert!(r.rate.pass && r.power.as_ref().unwrap().pass && r.realpart.as_ref().unwrap().pass);
        assert!(r.s_err < 1e-8);
    }

    #[test]
    fn log_correction_column_recovers_its_coefficient() {
        let recs: Vec<_> = sweep_hs()
            .iter()
            .map(|&h| synthetic(h, law(h, 2.0, 0.53, 1.5) * (0.4 * h * (1.0 / h).ln()).exp(), h))
            .collect();
        let r = fit_width_law(&recs, 0.53, Some(1.5), None, FitOptions { log_correction: true }).unwrap();
        assert!((r.s_fit - 0.53).abs() < 1e-6 && (r.p_fit - 1.5).abs() < 1e-5, "{} {}", r.s_fit, r.p_fit);
    }

    #[test]
    fn floor_records_are_excluded() {
        let mut recs: Vec<_> = sweep_hs().iter().map(|&h| synthetic(h, law(h, 2.0, 0.53, 1.5), h)).collect();
        recs[8].floor = true;
        recs[8].rho.im = -1.0; // would wreck the fit if used
        let r = fit_width_law(&recs, 0.53, Some(1.5), None, FitOptions::default()).unwrap();
        assert_eq!(r.points, 8);
        assert!((r.s_fit - 0.53).abs() < 1e-8);
    }

    #[test]
    fn too_few_points() {
        let recs: Vec<_> = [0.1, 0.09, 0.08].iter().map(|&h| synthetic(h, law(h, 2.0, 0.53, 1.5), h)).collect();
        assert!(matches!(
            fit_width_law(&recs, 0.53, Some(1.5), None, FitOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn clustered_h_is_rank_deficient() {
        let recs: Vec<_> = (0..6).map(|_| synthetic(0.1, law(0.1, 2.0, 0.53, 1.5), 0.1)).collect();
        assert!(matches!(
            fit_width_law(&recs, 0.53, Some(1.5), None, FitOptions::default()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn real_part_fit() {
        let recs: Vec<_> = sweep_hs().iter().map(|&h| synthetic(h, -1e-8, h * (1.0 - 0.4 * h))).collect();
        let r = fit_real_part(&recs, 1.0).unwrap();
        assert!(r.deviation.abs() < 1e-12 && (r.slope + 0.4).abs() < 1e-10);
        let single: Vec<_> = (0..4).map(|_| synthetic(0.1, -1e-8, 0.1)).collect();
        assert!(matches!(fit_real_part(&single, 1.0), Err(Error::Precondition(_))));
        assert!(matches!(fit_real_part(&recs[..2], 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn report_json_keys() {
        let recs: Vec<_> = sweep_hs().iter().map(|&h| synthetic(h, law(h, 2.0, 0.53, 1.5), h)).collect();
        let v = fit_width_law(&recs, 0.53, Some(1.5), Some(1.0), FitOptions::default()).unwrap().to_json();
        for k in ["S_fit", "S_err", "p_fit", "p_err", "p_fixedS", "f_ln", "S_geom", "p_pred"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        for k in ["rate", "power", "realpart"] {
            assert!(v["verdicts"][k]["pass"].as_bool().unwrap());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip_over_parameters(f in 0.1f64..10.0, s in 0.2f64..0.8, p in 0.0f64..3.0) {
            let recs: Vec<_> = sweep_hs().iter().map(|&h| synthetic(h, law(h, f, s, p), h)).collect();
            let r = fit_width_law(&recs, s, Some(p), None, FitOptions::default()).unwrap();
            prop_assert!((r.s_fit - s).abs() < 1e-8);
            prop_assert!((r.p_fit - p).abs() < 1e-7);
            prop_assert!((r.f_ln - f.ln()).abs() < 1e-6);
        }
    }
}

use super::expr::Expr;
use super::jet::{Jet, C64};
use crate::error::{Error, Result};
use serde_json::{json, Map, Value};
use std::path::Path;

/// Tolerance for the well conditions `V2 = 0`, `grad V2 = 0`.
pub const WELL_TOL: f64 = 1e-8;

/// Coupling symbol affine in the momentum: `r(x, xi) = a(x) + b(x) . xi`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSpec {
    pub a: Expr,
    /// One coefficient per coordinate, or empty when the symbol has no `xi` term.
    pub b: Vec<Expr>,
}

impl CouplingSpec {
    pub fn zero() -> Self {
        CouplingSpec { a: Expr::c(0.0), b: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        CouplingSpec { a: Expr::c(c), b: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.iter().all(Expr::is_zero)
    }

    pub fn has_momentum_terms(&self) -> bool {
        self.b.iter().any(|e| !e.is_zero())
    }

    /// Evaluates the symbol at a (complex) point and momentum.
    pub fn symbol(&self, x: &[C64], xi: &[C64]) -> C64 {
        let mut s = self.a.eval(x);
        for (bk, xk) in self.b.iter().zip(xi) {
            s += bk.eval(x) * xk;
        }
        s
    }

    pub fn a_at(&self, x: &[C64]) -> Result<C64> {
        Ok(self.a.eval_jet(x)?.v)
    }

    /// Momentum coefficient along coordinate `k` (zero when absent).
    pub fn b_at(&self, k: usize, x: &[C64]) -> Result<C64> {
        match self.b.get(k) {
            Some(e) => Ok(e.eval_jet(x)?.v),
            None => Ok(C64::new(0.0, 0.0)),
        }
    }

    fn from_json(v: &Value, dim: usize, name: &str) -> Result<Self> {
        let obj = match v {
            Value::Object(o) if !o.contains_key("op") => o,
            _ => return Ok(CouplingSpec { a: Expr::from_json(v)?, b: Vec::new() }),
        };
        if let Some(cs) = obj.get("xi_coeffs") {
            if obj.len() != 1 {
                return Err(Error::InvalidModel(format!("{name}: `xi_coeffs` excludes other keys")));
            }
            let cs = cs
                .as_array()
                .ok_or_else(|| Error::InvalidModel(format!("{name}.xi_coeffs must be an array")))?;
            if cs.len() > 2 {
                return Err(Error::InvalidModel(format!(
                    "{name}: symbol of degree {} in xi; only symbols affine in xi are supported",
                    cs.len() - 1
                )));
            }
            if dim != 1 && cs.len() == 2 {
                return Err(Error::InvalidModel(format!("{name}: `xi_coeffs` is one-dimensional; use `a`/`b`")));
            }
            let a = cs.first().map(Expr::from_json).transpose()?.unwrap_or(Expr::c(0.0));
            let b = cs.get(1).map(Expr::from_json).transpose()?.into_iter().collect();
            return Ok(CouplingSpec { a, b });
        }
        for k in obj.keys() {
            if k != "a" && k != "b" {
                return Err(Error::InvalidModel(format!("{name}: unknown coupling key `{k}`")));
            }
        }
        let a = obj.get("a").map(Expr::from_json).transpose()?.unwrap_or(Expr::c(0.0));
        let b = match obj.get("b") {
            None => Vec::new(),
            Some(Value::Array(xs)) => xs.iter().map(Expr::from_json).collect::<Result<Vec<_>>>()?,
            Some(_) => return Err(Error::InvalidModel(format!("{name}.b must be an array"))),
        };
        Ok(CouplingSpec { a, b })
    }

    fn to_json(&self) -> Value {
        if self.b.is_empty() {
            self.a.to_json()
        } else {
            json!({"a": self.a.to_json(), "b": self.b.iter().map(Expr::to_json).collect::<Vec<_>>()})
        }
    }
}

/// Couplings `r11, r12, r22`; `r21` is the formal adjoint of `r12`.
#[derive(Clone, Debug, PartialEq)]
pub struct Couplings {
    pub r11: CouplingSpec,
    pub r12: CouplingSpec,
    pub r22: CouplingSpec,
}

impl Default for Couplings {
    fn default() -> Self {
        Couplings { r11: CouplingSpec::zero(), r12: CouplingSpec::zero(), r22: CouplingSpec::zero() }
    }
}

impl Couplings {
    pub fn has_momentum_terms(&self) -> bool {
        self.r11.has_momentum_terms() || self.r12.has_momentum_terms() || self.r22.has_momentum_terms()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub name: String,
    pub dimension: usize,
    pub v1: Expr,
    pub v2: Expr,
    pub couplings: Couplings,
    pub well: Vec<f64>,
}

impl ModelConfig {
    pub fn new(
        name: impl Into<String>,
        dimension: usize,
        v1: Expr,
        v2: Expr,
        couplings: Couplings,
        well: Vec<f64>,
    ) -> Result<Self> {
        let m = ModelConfig { name: name.into(), dimension, v1, v2, couplings, well };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidModel(format!("dimension {n} not supported (1 or 2)")));
        }
        if self.well.len() != n {
            return Err(Error::InvalidModel("well location has wrong dimension".into()));
        }
        let exprs = [&self.v1, &self.v2, &self.couplings.r11.a, &self.couplings.r12.a, &self.couplings.r22.a];
        if exprs.iter().any(|e| e.arity() > n) {
            return Err(Error::InvalidModel("expression references a coordinate beyond the dimension".into()));
        }
        for (name, c) in [("r11", &self.couplings.r11), ("r12", &self.couplings.r12), ("r22", &self.couplings.r22)] {
            if !c.b.is_empty() && c.b.len() != n {
                return Err(Error::InvalidModel(format!("{name}.b needs {n} coefficients")));
            }
            if c.b.iter().any(|e| e.arity() > n) {
                return Err(Error::InvalidModel(format!("{name}.b references a coordinate beyond the dimension")));
            }
        }
        let j = self.v2_jet(&self.well)?;
        if j.v.norm() > WELL_TOL {
            return Err(Error::InvalidModel(format!("V2(well) = {:.3e}, expected 0", j.v.re)));
        }
        let gnorm = (0..n).map(|k| j.g[k].norm()).fold(0.0, f64::max);
        if gnorm > WELL_TOL {
            return Err(Error::InvalidModel(format!("|grad V2(well)| = {gnorm:.3e}, expected 0")));
        }
        let eig = self.hessian_eigenvalues()?;
        if eig.iter().any(|&e| e <= WELL_TOL) {
            return Err(Error::InvalidModel(format!("Hess V2(well) not positive definite: {eig:?}")));
        }
        Ok(())
    }

    pub fn v1_jet(&self, x: &[f64]) -> Result<Jet> {
        self.v1.eval_jet(&to_c(x))
    }

    pub fn v2_jet(&self, x: &[f64]) -> Result<Jet> {
        self.v2.eval_jet(&to_c(x))
    }

    pub fn v1(&self, x: &[f64]) -> f64 {
        self.v1.eval_real(x)
    }

    pub fn v2(&self, x: &[f64]) -> f64 {
        self.v2.eval_real(x)
    }

    /// The degenerate Agmon metric density `min(V1, V2)_+`.
    pub fn metric(&self, x: &[f64]) -> f64 {
        self.v1(x).min(self.v2(x)).max(0.0)
    }

    /// Hessian of V2 at the well (real part; exact on the real axis).
    pub fn hessian_at_well(&self) -> Result<[[f64; 2]; 2]> {
        let j = self.v2_jet(&self.well)?;
        let mut h = [[0.0; 2]; 2];
        for (a, row) in h.iter_mut().enumerate().take(self.dimension) {
            for (b, v) in row.iter_mut().enumerate().take(self.dimension) {
                *v = j.hs[a][b].re;
            }
        }
        Ok(h)
    }

    /// Eigenvalues of Hess V2 at the well, ascending.
    pub fn hessian_eigenvalues(&self) -> Result<Vec<f64>> {
        let h = self.hessian_at_well()?;
        Ok(match self.dimension {
            1 => vec![h[0][0]],
            _ => {
                let tr = h[0][0] + h[1][1];
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
                vec![0.5 * tr - disc, 0.5 * tr + disc]
            }
        })
    }

    /// Radius around the well where the quadratic model of V2 stays below 0.1.
    pub fn quadratic_region_radius(&self) -> Result<f64> {
        let lmax = *self.hessian_eigenvalues()?.last().unwrap();
        Ok((0.2 / lmax).sqrt())
    }

    pub fn is_coupled(&self) -> bool {
        !self.couplings.r12.is_zero()
    }

    pub fn with_r12(mut self, r12: CouplingSpec) -> Self {
        self.couplings.r12 = r12;
        self
    }

    pub fn with_r22(mut self, r22: CouplingSpec) -> Self {
        self.couplings.r22 = r22;
        self
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::InvalidModel("model must be a JSON object".into()))?;
        for k in obj.keys() {
            if !["name", "dimension", "V1", "V2", "couplings", "well"].contains(&k.as_str()) {
                return Err(Error::InvalidModel(format!("unknown model key `{k}`")));
            }
        }
        let dimension = obj
            .get("dimension")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidModel("`dimension` must be a positive integer".into()))?
            as usize;
        let get = |k: &str| obj.get(k).ok_or_else(|| Error::InvalidModel(format!("missing `{k}`")));
        let v1 = Expr::from_json(get("V1")?)?;
        let v2 = Expr::from_json(get("V2")?)?;
        let mut couplings = Couplings::default();
        if let Some(c) = obj.get("couplings") {
            let c: &Map<String, Value> =
                c.as_object().ok_or_else(|| Error::InvalidModel("`couplings` must be an object".into()))?;
            for (k, v) in c {
                let spec = CouplingSpec::from_json(v, dimension, k)?;
                match k.as_str() {
                    "r11" => couplings.r11 = spec,
                    "r12" => couplings.r12 = spec,
                    "r22" => couplings.r22 = spec,
                    "r21" => {
                        return Err(Error::InvalidModel(
                            "r21 is determined by r12 (formal self-adjointness); omit it".into(),
                        ))
                    }
                    other => return Err(Error::InvalidModel(format!("unknown coupling `{other}`"))),
                }
            }
        }
        let well = match obj.get("well") {
            None => vec![0.0; dimension],
            Some(Value::Array(xs)) => xs
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| Error::InvalidModel("non-numeric well coordinate".into())))
                .collect::<Result<Vec<_>>>()?,
            Some(_) => return Err(Error::InvalidModel("`well` must be an array".into())),
        };
        let name = obj.get("name").and_then(Value::as_str).unwrap_or("custom").to_string();
        ModelConfig::new(name, dimension, v1, v2, couplings, well)
    }

    pub fn to_json(&self) -> Value {
        let mut c = Map::new();
        for (k, s) in [("r11", &self.couplings.r11), ("r12", &self.couplings.r12), ("r22", &self.couplings.r22)] {
            if !s.is_zero() {
                c.insert(k.into(), s.to_json());
            }
        }
        json!({
            "name": self.name,
            "dimension": self.dimension,
            "V1": self.v1.to_json(),
            "V2": self.v2.to_json(),
            "couplings": Value::Object(c),
            "well": self.well,
        })
    }

    /// Loads a preset by name, or a JSON model file by path.
    pub fn load(spec: &str) -> Result<Self> {
        match preset(spec) {
            Ok(m) => Ok(m),
            Err(Error::UnknownPreset(_)) if Path::new(spec).exists() => {
                let text = std::fs::read_to_string(spec)?;
                ModelConfig::from_json(&serde_json::from_str(&text)?)
            }
            Err(e) => Err(e),
        }
    }
}

pub fn to_c(x: &[f64]) -> Vec<C64> {
    x.iter().map(|&v| C64::new(v, 0.0)).collect()
}

/// `1/2 - tanh(x^2 - 1)`
pub fn canonical_v1_expr() -> Expr {
    Expr::sub(Expr::c(0.5), Expr::tanh(Expr::sub(Expr::pow(Expr::x(), 2), Expr::c(1.0))))
}

/// `1 - exp(-x^2)`
pub fn canonical_v2_expr() -> Expr {
    Expr::sub(Expr::c(1.0), Expr::exp(Expr::neg(Expr::pow(Expr::x(), 2))))
}

pub const PRESETS: [&str; 3] = ["canonical-1d", "harmonic-exact", "uncoupled-1d"];

pub fn preset(name: &str) -> Result<ModelConfig> {
    match name {
        "canonical-1d" => ModelConfig::new(
            name,
            1,
            canonical_v1_expr(),
            canonical_v2_expr(),
            Couplings { r12: CouplingSpec::constant(0.2), ..Couplings::default() },
            vec![0.0],
        ),
        "uncoupled-1d" => {
            ModelConfig::new(name, 1, canonical_v1_expr(), canonical_v2_expr(), Couplings::default(), vec![0.0])
        }
        "harmonic-exact" => ModelConfig::new(
            name,
            1,
            Expr::c(1.0),
            Expr::pow(Expr::x(), 2),
            Couplings::default(),
            vec![0.0],
        ),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_has_curvature_two() {
        let m = preset("canonical-1d").unwrap();
        let h = m.hessian_at_well().unwrap();
        assert!((h[0][0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("nosuch"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn json_round_trip() {
        let m = preset("canonical-1d").unwrap();
        let back = ModelConfig::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_quadratic_momentum_symbol() {
        let v = json!({
            "dimension": 1,
            "V1": 1.0,
            "V2": {"op": "pow", "args": ["x", 2]},
            "couplings": {"r12": {"xi_coeffs": [0.1, 0.0, 1.0]}}
        });
        let err = ModelConfig::from_json(&v).unwrap_err();
        assert!(err.to_string().contains("degree 2"));
    }

    #[test]
    fn rejects_explicit_r21_and_bad_well() {
        let v = json!({"dimension": 1, "V1": 1.0, "V2": {"op": "pow", "args": ["x", 2]},
                       "couplings": {"r21": 0.1}});
        assert!(ModelConfig::from_json(&v).is_err());
        let v = json!({"dimension": 1, "V1": 1.0, "V2": {"op": "pow", "args": [{"op":"sub","args":["x",1]}, 2]}});
        assert!(matches!(ModelConfig::from_json(&v), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn affine_symbol_parses() {
        let v = json!({"dimension": 1, "V1": 1.0, "V2": {"op": "pow", "args": ["x", 2]},
                       "couplings": {"r12": {"a": 0.1, "b": [{"op":"exp","arg":"x"}]}}});
        let m = ModelConfig::from_json(&v).unwrap();
        assert!(m.couplings.r12.has_momentum_terms());
        let s = m.couplings.r12.symbol(&[C64::new(0.0, 0.0)], &[C64::new(0.0, 2.0)]);
        assert!((s - C64::new(0.1, 2.0)).norm() < 1e-15);
    }
}

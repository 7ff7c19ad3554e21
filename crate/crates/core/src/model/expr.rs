//! Expression trees for potentials and coupling coefficients.
//!
//! Trees are built from real constants, coordinates, `+ - * /`, integer
//! powers, polynomials, `exp` and `tanh`. Every node has an exact complex
//! continuation, so the same tree serves the real axis and the distorted
//! contour.

use super::jet::{tanh, Jet, C64, MAX_DIM};
use crate::error::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};
use std::f64::consts::PI;

/// Minimum admissible distance between an evaluation point and a pole.
pub const POLE_CLEARANCE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Exp(Box<Expr>),
    Tanh(Box<Expr>),
    Pow(Box<Expr>, i32),
    /// `coeffs[0] + coeffs[1] arg + coeffs[2] arg^2 + ...`
    Poly(Vec<f64>, Box<Expr>),
}

impl Expr {
    pub fn x() -> Expr {
        Expr::Var(0)
    }
    pub fn y() -> Expr {
        Expr::Var(1)
    }
    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(vec![a, b])
    }
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(vec![a, b])
    }
    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }
    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }
    pub fn exp(a: Expr) -> Expr {
        Expr::Exp(Box::new(a))
    }
    pub fn tanh(a: Expr) -> Expr {
        Expr::Tanh(Box::new(a))
    }
    pub fn pow(a: Expr, n: i32) -> Expr {
        Expr::Pow(Box::new(a), n)
    }
    pub fn poly(coeffs: Vec<f64>, a: Expr) -> Expr {
        Expr::Poly(coeffs, Box::new(a))
    }

    /// True when the tree is the constant zero.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == 0.0)
    }

    /// Highest coordinate index referenced, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(k) => k + 1,
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().map(Expr::arity).max().unwrap_or(0),
            Expr::Sub(a, b) | Expr::Div(a, b) => a.arity().max(b.arity()),
            Expr::Neg(a) | Expr::Exp(a) | Expr::Tanh(a) | Expr::Pow(a, _) | Expr::Poly(_, a) => {
                a.arity()
            }
        }
    }

    /// Plain complex evaluation without singularity checks.
    pub fn eval(&self, p: &[C64]) -> C64 {
        match self {
            Expr::Const(v) => C64::new(*v, 0.0),
            Expr::Var(k) => p[*k],
            Expr::Add(xs) => xs.iter().fold(C64::new(0.0, 0.0), |s, e| s + e.eval(p)),
            Expr::Mul(xs) => xs.iter().fold(C64::new(1.0, 0.0), |s, e| s * e.eval(p)),
            Expr::Sub(a, b) => a.eval(p) - b.eval(p),
            Expr::Div(a, b) => a.eval(p) / b.eval(p),
            Expr::Neg(a) => -a.eval(p),
            Expr::Exp(a) => a.eval(p).exp(),
            Expr::Tanh(a) => tanh(a.eval(p)),
            Expr::Pow(a, n) => a.eval(p).powi(*n),
            Expr::Poly(cs, a) => {
                let w = a.eval(p);
                cs.iter().rev().fold(C64::new(0.0, 0.0), |s, c| s * w + c)
            }
        }
    }

    /// Real-axis evaluation.
    pub fn eval_real(&self, p: &[f64]) -> f64 {
        let z: Vec<C64> = p.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.eval(&z).re
    }

    /// Jet evaluation with pole-proximity checks at every singular node.
    pub fn eval_jet(&self, p: &[C64]) -> Result<Jet> {
        self.jet_inner(p, p)
    }

    fn jet_inner(&self, p: &[C64], at: &[C64]) -> Result<Jet> {
        Ok(match self {
            Expr::Const(v) => Jet::constant(C64::new(*v, 0.0)),
            Expr::Var(k) => {
                if *k >= MAX_DIM || *k >= p.len() {
                    return Err(Error::Expression(format!("coordinate x{} out of range", k + 1)));
                }
                Jet::variable(p[*k], *k)
            }
            Expr::Add(xs) => {
                let mut acc = Jet::constant(C64::new(0.0, 0.0));
                for e in xs {
                    acc = acc + e.jet_inner(p, at)?;
                }
                acc
            }
            Expr::Mul(xs) => {
                let mut acc = Jet::constant(C64::new(1.0, 0.0));
                for e in xs {
                    acc = acc * e.jet_inner(p, at)?;
                }
                acc
            }
            Expr::Sub(a, b) => a.jet_inner(p, at)? - b.jet_inner(p, at)?,
            Expr::Div(a, b) => {
                let den = b.jet_inner(p, at)?;
                check_pole(&den, C64::new(0.0, 0.0), p.len(), at)?;
                a.jet_inner(p, at)? * den.recip()
            }
            Expr::Neg(a) => -a.jet_inner(p, at)?,
            Expr::Exp(a) => a.jet_inner(p, at)?.exp(),
            Expr::Tanh(a) => {
                let w = a.jet_inner(p, at)?;
                // poles of tanh at i*pi*(m + 1/2)
                let m = (w.v.im / PI - 0.5).round();
                for dm in [-1.0, 0.0, 1.0] {
                    check_pole(&w, C64::new(0.0, PI * (m + dm + 0.5)), p.len(), at)?;
                }
                w.tanh()
            }
            Expr::Pow(a, n) => {
                let w = a.jet_inner(p, at)?;
                if *n < 0 {
                    check_pole(&w, C64::new(0.0, 0.0), p.len(), at)?;
                }
                w.powi(*n)
            }
            Expr::Poly(cs, a) => {
                let w = a.jet_inner(p, at)?;
                cs.iter()
                    .rev()
                    .fold(Jet::constant(C64::new(0.0, 0.0)), |s, c| s * w + Jet::constant(C64::new(*c, 0.0)))
            }
        })
    }
}

/// Estimates the distance from the evaluation point to the nearest zero of
/// `w - pole` by solving the local quadratic model along each coordinate.
fn check_pole(w: &Jet, pole: C64, dim: usize, at: &[C64]) -> Result<()> {
    let c = w.v - pole;
    let mut dist = f64::INFINITY;
    for k in 0..dim.min(MAX_DIM) {
        let g = w.g[k];
        let a = 0.5 * w.hs[k][k];
        dist = dist.min(smallest_root(a, g, c));
    }
    if dim == 0 && c.norm() == 0.0 {
        dist = 0.0;
    }
    if dist < POLE_CLEARANCE {
        return Err(Error::Singularity {
            point: at.iter().flat_map(|z| [z.re, z.im]).collect(),
            distance: dist,
        });
    }
    Ok(())
}

/// Smallest |root| of `a d^2 + b d + c = 0` over complex `d`.
fn smallest_root(a: C64, b: C64, c: C64) -> f64 {
    if c.norm() == 0.0 {
        return 0.0;
    }
    let scale = a.norm().max(b.norm()).max(c.norm());
    if a.norm() <= 1e-14 * scale {
        return if b.norm() <= 1e-14 * scale { f64::INFINITY } else { (c / b).norm() };
    }
    let disc = (b * b - 4.0 * a * c).sqrt();
    let q1 = -0.5 * (b + disc);
    let q2 = -0.5 * (b - disc);
    let q = if q1.norm() >= q2.norm() { q1 } else { q2 };
    if q.norm() == 0.0 {
        return (c / a).norm().sqrt();
    }
    (q / a).norm().min((c / q).norm())
}

// ---------------------------------------------------------------------------
// JSON form

fn var_index(name: &str) -> Option<usize> {
    match name {
        "x" | "x1" => Some(0),
        "y" | "x2" => Some(1),
        _ => None,
    }
}

fn reject_extra_keys(obj: &Map<String, Value>, allowed: &[&str]) -> Result<()> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Expression(format!("unknown key `{k}` in expression node")));
        }
    }
    Ok(())
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, op: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::Expression(format!("`{op}` node requires `{key}`")))
}

fn args_of(obj: &Map<String, Value>, op: &str) -> Result<Vec<Expr>> {
    let arr = field(obj, "args", op)?
        .as_array()
        .ok_or_else(|| Error::Expression(format!("`{op}.args` must be an array")))?;
    arr.iter().map(Expr::from_json).collect()
}

impl Expr {
    pub fn from_json(v: &Value) -> Result<Expr> {
        match v {
            Value::Number(n) => n
                .as_f64()
                .map(Expr::Const)
                .ok_or_else(|| Error::Expression(format!("bad number {n}"))),
            Value::String(s) => var_index(s)
                .map(Expr::Var)
                .ok_or_else(|| Error::Expression(format!("unknown variable `{s}`"))),
            Value::Object(obj) => {
                let op = obj
                    .get("op")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::Expression("node without string `op` tag".into()))?;
                match op {
                    "add" | "mul" => {
                        reject_extra_keys(obj, &["op", "args"])?;
                        let xs = args_of(obj, op)?;
                        if xs.is_empty() {
                            return Err(Error::Expression(format!("`{op}` needs at least one argument")));
                        }
                        Ok(if op == "add" { Expr::Add(xs) } else { Expr::Mul(xs) })
                    }
                    "sub" | "div" => {
                        reject_extra_keys(obj, &["op", "args"])?;
                        let mut xs = args_of(obj, op)?;
                        if xs.len() != 2 {
                            return Err(Error::Expression(format!("`{op}` takes exactly two arguments")));
                        }
                        let b = xs.pop().unwrap();
                        let a = xs.pop().unwrap();
                        Ok(if op == "sub" { Expr::sub(a, b) } else { Expr::div(a, b) })
                    }
                    "neg" | "exp" | "tanh" => {
                        reject_extra_keys(obj, &["op", "arg"])?;
                        let a = Expr::from_json(field(obj, "arg", op)?)?;
                        Ok(match op {
                            "neg" => Expr::neg(a),
                            "exp" => Expr::exp(a),
                            _ => Expr::tanh(a),
                        })
                    }
                    "pow" => {
                        reject_extra_keys(obj, &["op", "args"])?;
                        let arr = field(obj, "args", op)?
                            .as_array()
                            .ok_or_else(|| Error::Expression("`pow.args` must be an array".into()))?;
                        if arr.len() != 2 {
                            return Err(Error::Expression("`pow` takes [base, integer exponent]".into()));
                        }
                        let n = arr[1]
                            .as_f64()
                            .filter(|n| n.fract() == 0.0 && n.abs() <= 64.0)
                            .ok_or_else(|| {
                                Error::Expression("`pow` exponent must be an integer literal in [-64, 64]".into())
                            })?;
                        Ok(Expr::pow(Expr::from_json(&arr[0])?, n as i32))
                    }
                    "poly" => {
                        reject_extra_keys(obj, &["op", "coeffs", "arg"])?;
                        let cs = field(obj, "coeffs", op)?
                            .as_array()
                            .ok_or_else(|| Error::Expression("`poly.coeffs` must be an array".into()))?
                            .iter()
                            .map(|c| c.as_f64().ok_or_else(|| Error::Expression("non-numeric coefficient".into())))
                            .collect::<Result<Vec<f64>>>()?;
                        Ok(Expr::poly(cs, Expr::from_json(field(obj, "arg", op)?)?))
                    }
                    other => Err(Error::Expression(format!("unknown op tag `{other}`"))),
                }
            }
            other => Err(Error::Expression(format!("unexpected JSON value {other}"))),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Expr::Const(v) => json!(v),
            Expr::Var(0) => json!("x"),
            Expr::Var(1) => json!("y"),
            Expr::Var(k) => json!(format!("x{}", k + 1)),
            Expr::Add(xs) => json!({"op": "add", "args": xs.iter().map(Expr::to_json).collect::<Vec<_>>()}),
            Expr::Mul(xs) => json!({"op": "mul", "args": xs.iter().map(Expr::to_json).collect::<Vec<_>>()}),
            Expr::Sub(a, b) => json!({"op": "sub", "args": [a.to_json(), b.to_json()]}),
            Expr::Div(a, b) => json!({"op": "div", "args": [a.to_json(), b.to_json()]}),
            Expr::Neg(a) => json!({"op": "neg", "arg": a.to_json()}),
            Expr::Exp(a) => json!({"op": "exp", "arg": a.to_json()}),
            Expr::Tanh(a) => json!({"op": "tanh", "arg": a.to_json()}),
            Expr::Pow(a, n) => json!({"op": "pow", "args": [a.to_json(), n]}),
            Expr::Poly(cs, a) => json!({"op": "poly", "coeffs": cs, "arg": a.to_json()}),
        }
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Expr::from_json(&v).map_err(serde::de::Error::custom)
    }
}

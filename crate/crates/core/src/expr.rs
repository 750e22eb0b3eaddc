//! Closed-form expression trees with exact symbolic differentiation.
//!
//! Trees are built from constants, variables, +, -, *, /, power, sin, cos,
//! exp, ln and named time-function leaves. Differentiation is exact (tree
//! rewriting, not finite differences); construction performs constant folding
//! and nothing more. Trees serialize to a JSON s-expression format, e.g.
//! `["*", ["var","x"], ["sin", ["var","y"]]]` with time-function leaves as
//! `["tf","f"]` bound to a registry at evaluation time.

use crate::error::{Error, Result};
use crate::timefn::TimeFunction;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Named variable set of a field, with an optional distinguished time variable
/// (time-function leaves differentiate and evaluate against it).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarSet {
    names: Vec<String>,
    time_index: Option<usize>,
}

impl VarSet {
    pub fn new(names: Vec<String>, time_index: Option<usize>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidParameter("empty variable set".into()));
        }
        if let Some(i) = time_index {
            if i >= names.len() {
                return Err(Error::InvalidParameter("time index out of range".into()));
            }
        }
        Ok(VarSet { names, time_index })
    }

    /// (t, x, y) with t as time.
    pub fn cartesian() -> Self {
        VarSet {
            names: vec!["t".into(), "x".into(), "y".into()],
            time_index: Some(0),
        }
    }

    /// (t, lambda, mu) with t as time.
    pub fn spherical() -> Self {
        VarSet {
            names: vec!["t".into(), "lambda".into(), "mu".into()],
            time_index: Some(0),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn time_index(&self) -> Option<usize> {
        self.time_index
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Registry binding time-function names to implementations.
pub type TimeFnSet = BTreeMap<String, TimeFunction>;

#[derive(Clone, Debug)]
pub enum Expr {
    Const(f64),
    Var(usize),
    /// `order`-th derivative of a named time function, evaluated at the time variable.
    TimeFn { name: Arc<str>, order: u32 },
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, Arc<Expr>),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Exp(Arc<Expr>),
    Ln(Arc<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn time_fn(name: &str) -> Expr {
        Expr::TimeFn {
            name: Arc::from(name),
            order: 0,
        }
    }

    pub fn time_fn_deriv(name: &str, order: u32) -> Expr {
        Expr::TimeFn {
            name: Arc::from(name),
            order,
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(0.0), None) => b,
            (None, Some(0.0)) => a,
            _ => Expr::Add(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (None, Some(0.0)) => a,
            (Some(0.0), None) => Expr::neg(b),
            _ => Expr::Sub(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(0.0), None) | (None, Some(0.0)) => Expr::Const(0.0),
            (Some(1.0), None) => b,
            (None, Some(1.0)) => a,
            _ => Expr::Mul(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            (Some(0.0), None) => Expr::Const(0.0),
            (None, Some(1.0)) => a,
            _ => Expr::Div(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x.powf(y)),
            (None, Some(1.0)) => a,
            (None, Some(0.0)) => Expr::Const(1.0),
            _ => Expr::Pow(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn powi(a: Expr, n: i32) -> Expr {
        Expr::pow(a, Expr::Const(n as f64))
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => inner.as_ref().clone(),
            _ => Expr::Neg(Arc::new(a)),
        }
    }

    pub fn sin(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::Const(c.sin()),
            None => Expr::Sin(Arc::new(a)),
        }
    }

    pub fn cos(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::Const(c.cos()),
            None => Expr::Cos(Arc::new(a)),
        }
    }

    pub fn exp(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) => Expr::Const(c.exp()),
            None => Expr::Exp(Arc::new(a)),
        }
    }

    pub fn ln(a: Expr) -> Expr {
        match a.as_const() {
            Some(c) if c > 0.0 => Expr::Const(c.ln()),
            _ => Expr::Ln(Arc::new(a)),
        }
    }

    /// Exact partial derivative with respect to variable `var`.
    /// `time_var` identifies the variable time-function leaves depend on.
    pub fn diff(&self, var: usize, time_var: Option<usize>) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::TimeFn { name, order } => {
                if time_var == Some(var) {
                    Expr::TimeFn {
                        name: name.clone(),
                        order: order + 1,
                    }
                } else {
                    Expr::Const(0.0)
                }
            }
            Expr::Neg(a) => Expr::neg(a.diff(var, time_var)),
            Expr::Add(a, b) => Expr::add(a.diff(var, time_var), b.diff(var, time_var)),
            Expr::Sub(a, b) => Expr::sub(a.diff(var, time_var), b.diff(var, time_var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(var, time_var), b.as_ref().clone()),
                Expr::mul(a.as_ref().clone(), b.diff(var, time_var)),
            ),
            Expr::Div(a, b) => {
                // (a/b)' = a'/b - a b'/b^2
                let da = a.diff(var, time_var);
                let db = b.diff(var, time_var);
                Expr::sub(
                    Expr::div(da, b.as_ref().clone()),
                    Expr::div(
                        Expr::mul(a.as_ref().clone(), db),
                        Expr::powi(b.as_ref().clone(), 2),
                    ),
                )
            }
            Expr::Pow(f, g) => {
                let df = f.diff(var, time_var);
                if let Some(c) = g.as_const() {
                    // (f^c)' = c f^(c-1) f'
                    Expr::mul(
                        Expr::mul(Expr::Const(c), Expr::pow(f.as_ref().clone(), Expr::Const(c - 1.0))),
                        df,
                    )
                } else {
                    // (f^g)' = f^g (g' ln f + g f'/f)
                    let dg = g.diff(var, time_var);
                    Expr::mul(
                        Expr::pow(f.as_ref().clone(), g.as_ref().clone()),
                        Expr::add(
                            Expr::mul(dg, Expr::ln(f.as_ref().clone())),
                            Expr::div(Expr::mul(g.as_ref().clone(), df), f.as_ref().clone()),
                        ),
                    )
                }
            }
            Expr::Sin(a) => Expr::mul(Expr::cos(a.as_ref().clone()), a.diff(var, time_var)),
            Expr::Cos(a) => Expr::neg(Expr::mul(
                Expr::sin(a.as_ref().clone()),
                a.diff(var, time_var),
            )),
            Expr::Exp(a) => Expr::mul(Expr::exp(a.as_ref().clone()), a.diff(var, time_var)),
            Expr::Ln(a) => Expr::div(a.diff(var, time_var), a.as_ref().clone()),
        }
    }

    /// Evaluate at a point, reporting domain violations.
    pub fn eval(&self, point: &[f64], tfs: &TimeFnSet, time_var: Option<usize>) -> Result<f64> {
        let v = self.eval_inner(point, tfs, time_var)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain {
                reason: "non-finite value".into(),
                point: point.to_vec(),
            })
        }
    }

    fn eval_inner(&self, point: &[f64], tfs: &TimeFnSet, time_var: Option<usize>) -> Result<f64> {
        let domain_err = |reason: &str| Error::Domain {
            reason: reason.into(),
            point: point.to_vec(),
        };
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(i) => point
                .get(*i)
                .copied()
                .ok_or_else(|| domain_err("variable index out of range")),
            Expr::TimeFn { name, order } => {
                let tf = tfs
                    .get(name.as_ref())
                    .ok_or_else(|| Error::MissingTimeFunction(name.to_string()))?;
                let ti = time_var.ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "time-function leaf '{}' in a variable set without a time variable",
                        name
                    ))
                })?;
                tf.eval(*order as usize, point[ti])
            }
            Expr::Neg(a) => Ok(-a.eval_inner(point, tfs, time_var)?),
            Expr::Add(a, b) => {
                Ok(a.eval_inner(point, tfs, time_var)? + b.eval_inner(point, tfs, time_var)?)
            }
            Expr::Sub(a, b) => {
                Ok(a.eval_inner(point, tfs, time_var)? - b.eval_inner(point, tfs, time_var)?)
            }
            Expr::Mul(a, b) => {
                Ok(a.eval_inner(point, tfs, time_var)? * b.eval_inner(point, tfs, time_var)?)
            }
            Expr::Div(a, b) => {
                let den = b.eval_inner(point, tfs, time_var)?;
                if den == 0.0 {
                    return Err(domain_err("division by zero"));
                }
                Ok(a.eval_inner(point, tfs, time_var)? / den)
            }
            Expr::Pow(a, b) => {
                let base = a.eval_inner(point, tfs, time_var)?;
                let expo = b.eval_inner(point, tfs, time_var)?;
                let v = base.powf(expo);
                if v.is_nan() {
                    return Err(domain_err("power with negative base and fractional exponent"));
                }
                Ok(v)
            }
            Expr::Sin(a) => Ok(a.eval_inner(point, tfs, time_var)?.sin()),
            Expr::Cos(a) => Ok(a.eval_inner(point, tfs, time_var)?.cos()),
            Expr::Exp(a) => Ok(a.eval_inner(point, tfs, time_var)?.exp()),
            Expr::Ln(a) => {
                let v = a.eval_inner(point, tfs, time_var)?;
                if v <= 0.0 {
                    return Err(domain_err("logarithm of a non-positive value"));
                }
                Ok(v.ln())
            }
        }
    }

    /// Replace every variable `i` by `subs[i]` (expressions over a new variable set).
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => subs[*i].clone(),
            Expr::TimeFn { name, order } => Expr::TimeFn {
                name: name.clone(),
                order: *order,
            },
            Expr::Neg(a) => Expr::neg(a.substitute(subs)),
            Expr::Add(a, b) => Expr::add(a.substitute(subs), b.substitute(subs)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(subs), b.substitute(subs)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(subs), b.substitute(subs)),
            Expr::Div(a, b) => Expr::div(a.substitute(subs), b.substitute(subs)),
            Expr::Pow(a, b) => Expr::pow(a.substitute(subs), b.substitute(subs)),
            Expr::Sin(a) => Expr::sin(a.substitute(subs)),
            Expr::Cos(a) => Expr::cos(a.substitute(subs)),
            Expr::Exp(a) => Expr::exp(a.substitute(subs)),
            Expr::Ln(a) => Expr::ln(a.substitute(subs)),
        }
    }

    /// Serialize to the JSON s-expression format.
    pub fn to_sexpr(&self, vars: &VarSet) -> Value {
        match self {
            Expr::Const(c) => json!(c),
            Expr::Var(i) => json!(["var", vars.names()[*i]]),
            Expr::TimeFn { name, order } => {
                if *order == 0 {
                    json!(["tf", name.as_ref()])
                } else {
                    json!(["tf", name.as_ref(), order])
                }
            }
            Expr::Neg(a) => json!(["neg", a.to_sexpr(vars)]),
            Expr::Add(a, b) => json!(["+", a.to_sexpr(vars), b.to_sexpr(vars)]),
            Expr::Sub(a, b) => json!(["-", a.to_sexpr(vars), b.to_sexpr(vars)]),
            Expr::Mul(a, b) => json!(["*", a.to_sexpr(vars), b.to_sexpr(vars)]),
            Expr::Div(a, b) => json!(["/", a.to_sexpr(vars), b.to_sexpr(vars)]),
            Expr::Pow(a, b) => json!(["pow", a.to_sexpr(vars), b.to_sexpr(vars)]),
            Expr::Sin(a) => json!(["sin", a.to_sexpr(vars)]),
            Expr::Cos(a) => json!(["cos", a.to_sexpr(vars)]),
            Expr::Exp(a) => json!(["exp", a.to_sexpr(vars)]),
            Expr::Ln(a) => json!(["ln", a.to_sexpr(vars)]),
        }
    }

    /// Parse the JSON s-expression format. `+` and `*` may be n-ary on input.
    pub fn from_sexpr(value: &Value, vars: &VarSet) -> Result<Expr> {
        let err = |msg: String| Error::Parse(msg);
        match value {
            Value::Number(n) => Ok(Expr::Const(
                n.as_f64().ok_or_else(|| err("bad number".into()))?,
            )),
            Value::Array(items) => {
                let head = items
                    .first()
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| err("s-expression head must be a string".into()))?;
                let args = &items[1..];
                let unary = |args: &[Value]| -> Result<Expr> {
                    if args.len() != 1 {
                        return Err(err(format!("'{}' takes one argument", head)));
                    }
                    Expr::from_sexpr(&args[0], vars)
                };
                match head {
                    "var" => {
                        let name = args
                            .first()
                            .and_then(|v| v.as_str())
                            .ok_or_else(|| err("'var' needs a name".into()))?;
                        let idx = vars
                            .index_of(name)
                            .ok_or_else(|| err(format!("unknown variable '{}'", name)))?;
                        Ok(Expr::Var(idx))
                    }
                    "tf" => {
                        let name = args
                            .first()
                            .and_then(|v| v.as_str())
                            .ok_or_else(|| err("'tf' needs a name".into()))?;
                        let order = match args.get(1) {
                            None => 0,
                            Some(v) => v
                                .as_u64()
                                .ok_or_else(|| err("'tf' order must be an integer".into()))?
                                as u32,
                        };
                        Ok(Expr::time_fn_deriv(name, order))
                    }
                    "+" | "*" => {
                        if args.is_empty() {
                            return Err(err(format!("'{}' needs arguments", head)));
                        }
                        let mut acc = Expr::from_sexpr(&args[0], vars)?;
                        for a in &args[1..] {
                            let rhs = Expr::from_sexpr(a, vars)?;
                            acc = if head == "+" {
                                Expr::add(acc, rhs)
                            } else {
                                Expr::mul(acc, rhs)
                            };
                        }
                        Ok(acc)
                    }
                    "-" => match args.len() {
                        1 => Ok(Expr::neg(Expr::from_sexpr(&args[0], vars)?)),
                        2 => Ok(Expr::sub(
                            Expr::from_sexpr(&args[0], vars)?,
                            Expr::from_sexpr(&args[1], vars)?,
                        )),
                        _ => Err(err("'-' takes one or two arguments".into())),
                    },
                    "/" | "pow" => {
                        if args.len() != 2 {
                            return Err(err(format!("'{}' takes two arguments", head)));
                        }
                        let a = Expr::from_sexpr(&args[0], vars)?;
                        let b = Expr::from_sexpr(&args[1], vars)?;
                        Ok(if head == "/" {
                            Expr::div(a, b)
                        } else {
                            Expr::pow(a, b)
                        })
                    }
                    "neg" => unary(args).map(Expr::neg),
                    "sin" => unary(args).map(Expr::sin),
                    "cos" => unary(args).map(Expr::cos),
                    "exp" => unary(args).map(Expr::exp),
                    "ln" => unary(args).map(Expr::ln),
                    other => Err(err(format!("unknown operator '{}'", other))),
                }
            }
            other => Err(err(format!("unexpected s-expression node: {}", other))),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{}", c),
            Expr::Var(i) => write!(f, "#{}", i),
            Expr::TimeFn { name, order } => {
                write!(f, "{}{}", name, "'".repeat(*order as usize))
            }
            Expr::Neg(a) => write!(f, "-({})", a),
            Expr::Add(a, b) => write!(f, "({} + {})", a, b),
            Expr::Sub(a, b) => write!(f, "({} - {})", a, b),
            Expr::Mul(a, b) => write!(f, "({}*{})", a, b),
            Expr::Div(a, b) => write!(f, "({}/{})", a, b),
            Expr::Pow(a, b) => write!(f, "({}^{})", a, b),
            Expr::Sin(a) => write!(f, "sin({})", a),
            Expr::Cos(a) => write!(f, "cos({})", a),
            Expr::Exp(a) => write!(f, "exp({})", a),
            Expr::Ln(a) => write!(f, "ln({})", a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tfs() -> TimeFnSet {
        TimeFnSet::new()
    }

    #[test]
    fn eval_and_diff_basics() {
        let vars = VarSet::cartesian();
        // x * y
        let e = Expr::mul(Expr::var(1), Expr::var(2));
        let dx = e.diff(1, Some(0));
        assert_eq!(dx.eval(&[0.0, 2.0, 3.0], &tfs(), Some(0)).unwrap(), 3.0);
        // d^2/dx^2 sin(x) at 0 = 0
        let s = Expr::sin(Expr::var(1));
        let d2 = s.diff(1, Some(0)).diff(1, Some(0));
        assert_eq!(d2.eval(&[0.0, 0.0, 0.0], &tfs(), Some(0)).unwrap(), 0.0);
        let _ = vars;
    }

    #[test]
    fn third_mixed_derivative_of_x2y() {
        // d^3/(dx^2 dy) x^2 y = 2
        let e = Expr::mul(Expr::powi(Expr::var(1), 2), Expr::var(2));
        let d = e.diff(1, None).diff(1, None).diff(2, None);
        assert_eq!(d.eval(&[0.0, 1.0, 1.0], &tfs(), None).unwrap(), 2.0);
    }

    #[test]
    fn quotient_and_power_rules() {
        // d/dx (x / (1 + x^2)) = (1 - x^2)/(1+x^2)^2
        let x = Expr::var(0);
        let e = Expr::div(
            x.clone(),
            Expr::add(Expr::Const(1.0), Expr::powi(x.clone(), 2)),
        );
        let d = e.diff(0, None);
        let at = |v: f64| d.eval(&[v], &tfs(), None).unwrap();
        for v in [0.0_f64, 0.5, -1.3] {
            let expect = (1.0 - v * v) / (1.0 + v * v).powi(2);
            assert!((at(v) - expect).abs() < 1e-14);
        }
        // general power f^g
        let e = Expr::pow(Expr::var(0), Expr::var(1));
        let d = e.diff(0, None);
        let v = d.eval(&[2.0, 3.0], &tfs(), None).unwrap();
        assert!((v - 3.0 * 4.0).abs() < 1e-12); // d/dx x^3 = 3x^2 at x=2
    }

    #[test]
    fn time_function_leaves_differentiate_in_t() {
        let mut reg = TimeFnSet::new();
        reg.insert("f".into(), crate::timefn::TimeFunction::polynomial(vec![0.0, 0.0, 1.0])); // t^2
        // f(t) * y
        let e = Expr::mul(Expr::time_fn("f"), Expr::var(2));
        let dt = e.diff(0, Some(0));
        // d/dt (t^2 y) = 2 t y
        assert_eq!(dt.eval(&[3.0, 0.0, 5.0], &reg, Some(0)).unwrap(), 30.0);
        let dy = e.diff(2, Some(0));
        assert_eq!(dy.eval(&[3.0, 0.0, 5.0], &reg, Some(0)).unwrap(), 9.0);
    }

    #[test]
    fn domain_errors_carry_the_point() {
        let e = Expr::div(Expr::Const(1.0), Expr::var(0));
        match e.eval(&[0.0], &tfs(), None) {
            Err(Error::Domain { point, .. }) => assert_eq!(point, vec![0.0]),
            other => panic!("expected domain error, got {:?}", other),
        }
        let e = Expr::ln(Expr::var(0));
        assert!(e.eval(&[-1.0], &tfs(), None).is_err());
    }

    #[test]
    fn sexpr_round_trip() {
        let vars = VarSet::cartesian();
        let e = Expr::mul(
            Expr::var(1),
            Expr::sin(Expr::add(Expr::var(2), Expr::time_fn("f"))),
        );
        let v = e.to_sexpr(&vars);
        let back = Expr::from_sexpr(&v, &vars).unwrap();
        let mut reg = TimeFnSet::new();
        reg.insert("f".into(), crate::timefn::TimeFunction::constant(0.25));
        let p = [0.1, 0.7, 0.3];
        assert_eq!(
            e.eval(&p, &reg, Some(0)).unwrap(),
            back.eval(&p, &reg, Some(0)).unwrap()
        );
    }

    #[test]
    fn sexpr_nary_parse() {
        let vars = VarSet::cartesian();
        let v: Value = serde_json::from_str(r#"["+", ["var","x"], ["var","y"], 1.0]"#).unwrap();
        let e = Expr::from_sexpr(&v, &vars).unwrap();
        assert_eq!(e.eval(&[0.0, 2.0, 3.0], &tfs(), Some(0)).unwrap(), 6.0);
    }
}

//! Time-dependent coefficient functions f(t) with evaluable derivatives.
//!
//! Generator coefficients and time-function leaves of expression trees are
//! represented by [`TimeFunction`]: a named value with derivative closures up
//! to `max_order`. Polynomial, exponential and sinusoidal presets carry exact
//! derivatives of every order; user-supplied closures are capped (typically at
//! order 3). The type is closed under the arithmetic needed by Lie brackets:
//! sums, products (Leibniz), scaling and differentiation.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

const UNLIMITED: usize = usize::MAX;

type EvalFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Structural knowledge about a time function, used for pattern matching
/// (closed-form flows, antiderivative presets) and pretty printing.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Polynomial with coefficients in ascending degree order (empty = zero).
    Poly(Vec<f64>),
    General,
}

#[derive(Clone)]
pub struct TimeFunction {
    name: String,
    shape: Shape,
    max_order: usize,
    eval: EvalFn,
}

impl fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeFunction")
            .field("name", &self.name)
            .field("shape", &self.shape)
            .finish()
    }
}

impl fmt::Display for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Evaluate the `order`-th derivative of a polynomial at `t`.
fn poly_deriv_eval(coeffs: &[f64], order: usize, t: f64) -> f64 {
    // k-th derivative of c_n t^n is c_n * n!/(n-k)! * t^(n-k)
    let mut acc = 0.0;
    for (n, &c) in coeffs.iter().enumerate().skip(order) {
        let mut fac = 1.0;
        for j in 0..order {
            fac *= (n - j) as f64;
        }
        acc += c * fac * t.powi((n - order) as i32);
    }
    acc
}

fn poly_name(coeffs: &[f64]) -> String {
    let mut parts = Vec::new();
    for (n, &c) in coeffs.iter().enumerate().rev() {
        if c == 0.0 {
            continue;
        }
        let mag = c.abs();
        let body = match n {
            0 => format!("{}", mag),
            1 if mag == 1.0 => "t".to_string(),
            1 => format!("{}t", mag),
            _ if mag == 1.0 => format!("t^{}", n),
            _ => format!("{}t^{}", mag, n),
        };
        if parts.is_empty() {
            parts.push(if c < 0.0 { format!("-{}", body) } else { body });
        } else {
            parts.push(format!("{}{}", if c < 0.0 { "-" } else { "+" }, body));
        }
    }
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.concat()
    }
}

fn trim_poly(mut coeffs: Vec<f64>) -> Vec<f64> {
    while coeffs.last() == Some(&0.0) {
        coeffs.pop();
    }
    coeffs
}

impl TimeFunction {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Value of the `order`-th derivative at `t`.
    pub fn eval(&self, order: usize, t: f64) -> Result<f64> {
        if order > self.max_order {
            return Err(Error::DerivativeOrder {
                name: self.name.clone(),
                requested: order,
                supported: self.max_order,
            });
        }
        Ok((self.eval)(order, t))
    }

    /// Value at `t` (order 0, always available).
    pub fn value(&self, t: f64) -> f64 {
        (self.eval)(0, t)
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.shape, Shape::Poly(c) if c.is_empty())
    }

    pub fn as_constant(&self) -> Option<f64> {
        match &self.shape {
            Shape::Poly(c) if c.is_empty() => Some(0.0),
            Shape::Poly(c) if c.len() == 1 => Some(c[0]),
            _ => None,
        }
    }

    pub fn as_poly(&self) -> Option<&[f64]> {
        match &self.shape {
            Shape::Poly(c) => Some(c),
            _ => None,
        }
    }

    pub fn zero() -> Self {
        Self::polynomial(vec![])
    }

    pub fn constant(c: f64) -> Self {
        Self::polynomial(vec![c])
    }

    /// The identity function t.
    pub fn identity() -> Self {
        Self::polynomial(vec![0.0, 1.0])
    }

    /// Polynomial with ascending-degree coefficients; derivatives of all orders.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let coeffs = trim_poly(coeffs);
        let name = poly_name(&coeffs);
        let c = coeffs.clone();
        TimeFunction {
            name,
            shape: Shape::Poly(coeffs),
            max_order: UNLIMITED,
            eval: Arc::new(move |order, t| poly_deriv_eval(&c, order, t)),
        }
    }

    /// A sin(omega t + phase); derivatives of all orders.
    pub fn sinusoid(name: impl Into<String>, amplitude: f64, omega: f64, phase: f64) -> Self {
        TimeFunction {
            name: name.into(),
            shape: Shape::General,
            max_order: UNLIMITED,
            eval: Arc::new(move |order, t| {
                amplitude
                    * omega.powi(order as i32)
                    * (omega * t + phase + order as f64 * std::f64::consts::FRAC_PI_2).sin()
            }),
        }
    }

    /// A exp(rate t); derivatives of all orders.
    pub fn exponential(name: impl Into<String>, amplitude: f64, rate: f64) -> Self {
        TimeFunction {
            name: name.into(),
            shape: Shape::General,
            max_order: UNLIMITED,
            eval: Arc::new(move |order, t| amplitude * rate.powi(order as i32) * (rate * t).exp()),
        }
    }

    /// |t|^a (defined away from t = 0 for non-integer or negative exponents).
    pub fn abs_power(a: f64) -> Self {
        TimeFunction {
            name: format!("|t|^{}", a),
            shape: Shape::General,
            max_order: UNLIMITED,
            eval: Arc::new(move |order, t| {
                let mut fac = 1.0;
                for j in 0..order {
                    fac *= a - j as f64;
                }
                let sgn = if order % 2 == 1 { t.signum() } else { 1.0 };
                fac * t.abs().powf(a - order as f64) * sgn
            }),
        }
    }

    /// User-supplied value and derivative closures (orders 0..=closures.len()-1).
    pub fn from_closures(
        name: impl Into<String>,
        closures: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    ) -> Self {
        assert!(!closures.is_empty(), "need at least the value closure");
        let max_order = closures.len() - 1;
        TimeFunction {
            name: name.into(),
            shape: Shape::General,
            max_order,
            eval: Arc::new(move |order, t| closures[order](t)),
        }
    }

    /// General construction from an order-indexed closure.
    pub fn from_order_closure(
        name: impl Into<String>,
        max_order: usize,
        eval:EvalFn,
    ) -> Self {
        TimeFunction {
            name: name.into(),
            shape: Shape::General,
            max_order,
            eval,
        }
    }

    /// d/dt as a new time function.
    pub fn derivative(&self) -> Self {
        if let Shape::Poly(c) = &self.shape {
            let dc: Vec<f64> = c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(n, &v)| n as f64 * v)
                .collect();
            return Self::polynomial(dc);
        }
        let inner = self.eval.clone();
        TimeFunction {
            name: format!("{}'", self.name),
            shape: Shape::General,
            max_order: self.max_order.saturating_sub(1),
            eval: Arc::new(move |order, t| inner(order + 1, t)),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero();
        }
        if s == 1.0 {
            return self.clone();
        }
        let shape = match &self.shape {
            Shape::Poly(c) => Shape::Poly(trim_poly(c.iter().map(|v| v * s).collect())),
            Shape::General => Shape::General,
        };
        let inner = self.eval.clone();
        let name = match &shape {
            Shape::Poly(c) => poly_name(c),
            Shape::General if s == -1.0 => match self.name.strip_prefix('-') {
                Some(rest) => rest.to_string(),
                None => format!("-{}", self.name),
            },
            Shape::General => format!("{}·{}", s, self.name),
        };
        TimeFunction {
            name,
            shape,
            max_order: self.max_order,
            eval: Arc::new(move |order, t| s * inner(order, t)),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let shape = match (&self.shape, &other.shape) {
            (Shape::Poly(a), Shape::Poly(b)) => {
                let mut c = vec![0.0; a.len().max(b.len())];
                for (i, &v) in a.iter().enumerate() {
                    c[i] += v;
                }
                for (i, &v) in b.iter().enumerate() {
                    c[i] += v;
                }
                Shape::Poly(trim_poly(c))
            }
            _ => Shape::General,
        };
        let (fa, fb) = (self.eval.clone(), other.eval.clone());
        let name = match &shape {
            Shape::Poly(c) => poly_name(c),
            Shape::General => match other.name.strip_prefix('-') {
                Some(rest) => format!("({}-{})", self.name, rest),
                None => format!("({}+{})", self.name, other.name),
            },
        };
        TimeFunction {
            name,
            shape,
            max_order: self.max_order.min(other.max_order),
            eval: Arc::new(move |order, t| fa(order, t) + fb(order, t)),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Product with Leibniz-rule derivatives.
    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        if let Some(c) = self.as_constant() {
            return other.scale(c);
        }
        if let Some(c) = other.as_constant() {
            return self.scale(c);
        }
        let shape = match (&self.shape, &other.shape) {
            (Shape::Poly(a), Shape::Poly(b)) => {
                let mut c = vec![0.0; a.len() + b.len() - 1];
                for (i, &x) in a.iter().enumerate() {
                    for (j, &y) in b.iter().enumerate() {
                        c[i + j] += x * y;
                    }
                }
                Shape::Poly(trim_poly(c))
            }
            _ => Shape::General,
        };
        let (fa, fb) = (self.eval.clone(), other.eval.clone());
        TimeFunction {
            name: match &shape {
                Shape::Poly(c) => poly_name(c),
                Shape::General => format!("({}·{})", self.name, other.name),
            },
            shape,
            max_order: self.max_order.min(other.max_order),
            eval: Arc::new(move |order, t| {
                (0..=order)
                    .map(|i| binomial(order, i) * fa(i, t) * fb(order - i, t))
                    .sum()
            }),
        }
    }

    /// Numerically compare two time functions on sample points.
    pub fn agrees_with(&self, other: &Self, samples: &[f64], tol: f64) -> bool {
        samples.iter().all(|&t| {
            let a = (self.eval)(0, t);
            let b = (other.eval)(0, t);
            (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: &TimeFunction, order: usize, t: f64, h: f64) -> f64 {
        match order {
            1 => (f.value(t + h) - f.value(t - h)) / (2.0 * h),
            2 => (f.value(t + h) - 2.0 * f.value(t) + f.value(t - h)) / (h * h),
            _ => panic!("unsupported"),
        }
    }

    #[test]
    fn polynomial_derivatives_exact() {
        // p(t) = 1 + 2t + 3t^2
        let p = TimeFunction::polynomial(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.eval(0, 2.0).unwrap(), 17.0);
        assert_eq!(p.eval(1, 2.0).unwrap(), 14.0);
        assert_eq!(p.eval(2, 2.0).unwrap(), 6.0);
        assert_eq!(p.eval(3, 2.0).unwrap(), 0.0);
        assert_eq!(p.derivative().as_poly().unwrap(), &[2.0, 6.0]);
    }

    #[test]
    fn preset_derivatives_match_finite_differences() {
        let presets = [
            TimeFunction::sinusoid("s", 1.3, 2.0, 0.4),
            TimeFunction::exponential("e", 0.7, -0.9),
            TimeFunction::polynomial(vec![0.5, -1.0, 0.0, 2.0]),
            TimeFunction::abs_power(2.5),
        ];
        for f in &presets {
            for &t in &[0.3, 0.7, 1.4] {
                let exact = f.eval(1, t).unwrap();
                let approx = central_diff(f, 1, t, 1e-6);
                assert!(
                    (exact - approx).abs() <= 1e-6 * (1.0 + exact.abs()),
                    "{}: d1 at {}: {} vs {}",
                    f.name(),
                    t,
                    exact,
                    approx
                );
                let exact2 = f.eval(2, t).unwrap();
                let approx2 = central_diff(f, 2, t, 1e-4);
                assert!(
                    (exact2 - approx2).abs() <= 1e-5 * (1.0 + exact2.abs()),
                    "{}: d2 at {}",
                    f.name(),
                    t
                );
            }
        }
    }

    #[test]
    fn product_uses_leibniz_rule() {
        let f = TimeFunction::sinusoid("f", 1.0, 1.0, 0.0); // sin t
        let g = TimeFunction::identity(); // t
        let fg = f.mul(&g); // t sin t
        // (t sin t)'' = 2 cos t - t sin t
        let t = 0.8_f64;
        let expect = 2.0 * t.cos() - t * t.sin();
        assert!((fg.eval(2, t).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn polynomial_algebra_stays_polynomial() {
        let a = TimeFunction::polynomial(vec![1.0, 1.0]); // 1 + t
        let b = TimeFunction::polynomial(vec![0.0, 2.0]); // 2t
        let p = a.mul(&b); // 2t + 2t^2
        assert_eq!(p.as_poly().unwrap(), &[0.0, 2.0, 2.0]);
        let s = a.add(&b);
        assert_eq!(s.as_poly().unwrap(), &[1.0, 3.0]);
        assert_eq!(a.sub(&a).as_poly().unwrap(), &[] as &[f64]);
    }

    #[test]
    fn closure_order_cap_reported() {
        let f = TimeFunction::from_closures(
            "c",
            vec![
                Arc::new(|t: f64| t * t) as Arc<dyn Fn(f64) -> f64 + Send + Sync>,
                Arc::new(|t: f64| 2.0 * t),
            ],
        );
        assert!(f.eval(1, 1.0).is_ok());
        assert!(matches!(
            f.eval(2, 1.0),
            Err(Error::DerivativeOrder { requested: 2, .. })
        ));
    }

    #[test]
    fn abs_power_derivative_uses_sign() {
        let f = TimeFunction::abs_power(3.0); // |t|^3
        assert!((f.eval(1, -2.0).unwrap() - (-12.0)).abs() < 1e-12);
        assert!((f.eval(1, 2.0).unwrap() - 12.0).abs() < 1e-12);
        assert!((f.eval(2, -2.0).unwrap() - 12.0).abs() < 1e-12);
    }
}

//! Point-symmetry generators of the vorticity equations.
//!
//! The Cartesian equation admits the basis
//!
//! ```text
//! D = t dt - x dx - y dy - 3 psi dpsi,   dt,   dy,
//! X(f) = f(t) dx - f'(t) y dpsi,         Z(g) = g(t) dpsi,
//! ```
//!
//! and the rotating sphere admits { D, dt, Z(g), J1, J2, J3 } with
//! D = t dt - Omega t dlambda - (psi - Omega mu) dpsi, J1 = dlambda, and J2,
//! J3 the rotations about horizontal axes twisted by Omega t.
//!
//! Coefficients are kept in the smallest class closed under the brackets
//! actually needed: affine in (u1, u2, psi) with time-function entries, plus
//! dedicated trig/mu leaf shapes for the J2, J3 coefficients. Brackets whose
//! result would leave this class (products of two J-type shapes) are reported
//! as unrepresentable rather than silently truncated.

use crate::error::{Error, Result};
use crate::expr::{Expr, TimeFnSet, VarSet};
use crate::fields::AnalyticField;
use crate::linalg::{lstsq, SplitMix64};
use crate::timefn::TimeFunction;
use crate::transform::{fresh_tf_name, CoordMap, MapKind, PointTransformation, RotationAxis};
use std::fmt;

pub use crate::transform::PointTransformation as Flow;

/// Which 4-dimensional space (t, u1, u2, psi) a generator lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    /// (t, x, y, psi)
    Cartesian,
    /// (t, lambda, mu, psi)
    Spherical,
}

impl SpaceKind {
    pub fn field_vars(self) -> VarSet {
        match self {
            SpaceKind::Cartesian => VarSet::cartesian(),
            SpaceKind::Spherical => VarSet::spherical(),
        }
    }

    fn u_names(self) -> [&'static str; 3] {
        match self {
            SpaceKind::Cartesian => ["x", "y", "psi"],
            SpaceKind::Spherical => ["lambda", "mu", "psi"],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trig {
    Sin,
    Cos,
}

/// One J-type coefficient leaf: scale(t) * trig(lambda + omega t) * mu^p * (1-mu^2)^(q/2).
#[derive(Clone, Debug)]
pub struct JShape {
    pub scale: TimeFunction,
    pub trig: Trig,
    pub omega: f64,
    pub mu_pow: u32,
    pub s_pow: i32,
}

impl JShape {
    fn eval(&self, t: f64, lambda: f64, mu: f64) -> Result<f64> {
        let arg = lambda + self.omega * t;
        let trig = match self.trig {
            Trig::Sin => arg.sin(),
            Trig::Cos => arg.cos(),
        };
        let s2 = 1.0 - mu * mu;
        Ok(self.scale.eval(0, t)?
            * trig
            * mu.powi(self.mu_pow as i32)
            * s2.powf(self.s_pow as f64 / 2.0))
    }

    fn key(&self) -> (bool, u64, u32, i32) {
        (self.trig == Trig::Sin, self.omega.to_bits(), self.mu_pow, self.s_pow)
    }

    fn scaled(&self, tf: &TimeFunction) -> JShape {
        JShape {
            scale: self.scale.mul(tf),
            ..self.clone()
        }
    }

    /// d/dt: scale' * trig + scale * (+-omega) * cotrig.
    fn dt(&self) -> Vec<JShape> {
        let mut out = vec![JShape {
            scale: self.scale.derivative(),
            ..self.clone()
        }];
        let (cotrig, sign) = match self.trig {
            Trig::Sin => (Trig::Cos, 1.0),
            Trig::Cos => (Trig::Sin, -1.0),
        };
        out.push(JShape {
            scale: self.scale.scale(sign * self.omega),
            trig: cotrig,
            ..self.clone()
        });
        out
    }

    /// d/dlambda swaps the trig factor.
    fn d_lambda(&self) -> Vec<JShape> {
        let (cotrig, sign) = match self.trig {
            Trig::Sin => (Trig::Cos, 1.0),
            Trig::Cos => (Trig::Sin, -1.0),
        };
        vec![JShape {
            scale: self.scale.scale(sign),
            trig: cotrig,
            ..self.clone()
        }]
    }

    /// d/dmu of mu^p (1-mu^2)^(q/2) = p mu^(p-1) (..)^(q/2) - q mu^(p+1) (..)^(q/2-1).
    fn d_mu(&self) -> Vec<JShape> {
        let mut out = Vec::new();
        if self.mu_pow > 0 {
            out.push(JShape {
                scale: self.scale.scale(self.mu_pow as f64),
                mu_pow: self.mu_pow - 1,
                ..self.clone()
            });
        }
        if self.s_pow != 0 {
            out.push(JShape {
                scale: self.scale.scale(-(self.s_pow as f64)),
                mu_pow: self.mu_pow + 1,
                s_pow: self.s_pow - 2,
                ..self.clone()
            });
        }
        out
    }

    fn to_expr(&self, reg: &mut TimeFnSet) -> Expr {
        let scale = tf_to_expr(&self.scale, reg);
        let arg = Expr::add(
            Expr::var(1),
            Expr::mul(Expr::Const(self.omega), Expr::var(0)),
        );
        let trig = match self.trig {
            Trig::Sin => Expr::sin(arg),
            Trig::Cos => Expr::cos(arg),
        };
        let mut e = Expr::mul(scale, trig);
        if self.mu_pow > 0 {
            e = Expr::mul(e, Expr::powi(Expr::var(2), self.mu_pow as i32));
        }
        if self.s_pow != 0 {
            let s2 = Expr::sub(Expr::Const(1.0), Expr::powi(Expr::var(2), 2));
            e = Expr::mul(e, Expr::pow(s2, Expr::Const(self.s_pow as f64 / 2.0)));
        }
        e
    }
}

fn tf_to_expr(tf: &TimeFunction, reg: &mut TimeFnSet) -> Expr {
    if let Some(c) = tf.as_constant() {
        return Expr::Const(c);
    }
    if let Some(p) = tf.as_poly() {
        // inline small polynomials in t
        let mut e = Expr::Const(0.0);
        for (n, &c) in p.iter().enumerate() {
            e = Expr::add(e, Expr::mul(Expr::Const(c), Expr::powi(Expr::var(0), n as i32)));
        }
        return e;
    }
    let name = fresh_tf_name(tf.name());
    reg.insert(name.clone(), tf.clone());
    Expr::time_fn(&name)
}

fn merge_shapes(shapes: Vec<JShape>) -> Vec<JShape> {
    let mut out: Vec<JShape> = Vec::new();
    for s in shapes {
        if s.scale.is_zero() {
            continue;
        }
        if let Some(existing) = out.iter_mut().find(|e| e.key() == s.key()) {
            existing.scale = existing.scale.add(&s.scale);
        } else {
            out.push(s);
        }
    }
    out.retain(|s| !s.scale.is_zero());
    out
}

/// Coefficient of one component: c0(t) + c1(t) u1 + c2(t) u2 + c3(t) psi
/// plus optional J-type shape leaves (spherical only).
#[derive(Clone, Debug)]
pub struct GenCoeff {
    pub affine: [TimeFunction; 4],
    pub shapes: Vec<JShape>,
}

impl GenCoeff {
    pub fn zero() -> Self {
        GenCoeff {
            affine: [
                TimeFunction::zero(),
                TimeFunction::zero(),
                TimeFunction::zero(),
                TimeFunction::zero(),
            ],
            shapes: vec![],
        }
    }

    pub fn from_tf(tf: TimeFunction) -> Self {
        let mut c = Self::zero();
        c.affine[0] = tf;
        c
    }

    pub fn constant(v: f64) -> Self {
        Self::from_tf(TimeFunction::constant(v))
    }

    /// tf * u_slot where slot 1 = u1, 2 = u2, 3 = psi.
    pub fn linear_in(slot: usize, tf: TimeFunction) -> Self {
        let mut c = Self::zero();
        c.affine[slot] = tf;
        c
    }

    fn from_shape(shape: JShape) -> Self {
        GenCoeff {
            shapes: vec![shape],
            ..Self::zero()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.affine.iter().all(|c| c.is_zero()) && self.shapes.is_empty()
    }

    fn is_t_only(&self) -> bool {
        self.affine[1].is_zero()
            && self.affine[2].is_zero()
            && self.affine[3].is_zero()
            && self.shapes.is_empty()
    }

    pub fn eval(&self, p: &[f64; 4]) -> Result<f64> {
        let mut v = self.affine[0].eval(0, p[0])?;
        for slot in 1..4 {
            if !self.affine[slot].is_zero() {
                v += self.affine[slot].eval(0, p[0])? * p[slot];
            }
        }
        for s in &self.shapes {
            v += s.eval(p[0], p[1], p[2])?;
        }
        Ok(v)
    }

    fn add(&self, other: &Self) -> Self {
        let affine = [
            self.affine[0].add(&other.affine[0]),
            self.affine[1].add(&other.affine[1]),
            self.affine[2].add(&other.affine[2]),
            self.affine[3].add(&other.affine[3]),
        ];
        let mut shapes = self.shapes.clone();
        shapes.extend(other.shapes.iter().cloned());
        GenCoeff {
            affine,
            shapes: merge_shapes(shapes),
        }
    }

    fn scale_by_tf(&self, tf: &TimeFunction) -> Self {
        GenCoeff {
            affine: [
                self.affine[0].mul(tf),
                self.affine[1].mul(tf),
                self.affine[2].mul(tf),
                self.affine[3].mul(tf),
            ],
            shapes: merge_shapes(self.shapes.iter().map(|s| s.scaled(tf)).collect()),
        }
    }

    fn scale(&self, v: f64) -> Self {
        self.scale_by_tf(&TimeFunction::constant(v))
    }

    fn dt(&self) -> Self {
        let affine = [
            self.affine[0].derivative(),
            self.affine[1].derivative(),
            self.affine[2].derivative(),
            self.affine[3].derivative(),
        ];
        let shapes = merge_shapes(self.shapes.iter().flat_map(|s| s.dt()).collect());
        GenCoeff { affine, shapes }
    }

    /// Partial derivative in u1/u2/psi (slot 1, 2, 3).
    fn d_slot(&self, slot: usize, kind: SpaceKind) -> Self {
        let mut out = Self::from_tf(self.affine[slot].clone());
        if kind == SpaceKind::Spherical {
            match slot {
                1 => {
                    out.shapes =
                        merge_shapes(self.shapes.iter().flat_map(|s| s.d_lambda()).collect())
                }
                2 => out.shapes = merge_shapes(self.shapes.iter().flat_map(|s| s.d_mu()).collect()),
                _ => {}
            }
        }
        out
    }

    /// Coefficient as an expression over (t, u1, u2) with psi replaced by a field.
    fn to_expr(&self, psi_expr: &Expr, reg: &mut TimeFnSet) -> Expr {
        let mut e = tf_to_expr(&self.affine[0], reg);
        for slot in 1..4 {
            if self.affine[slot].is_zero() {
                continue;
            }
            let factor = if slot == 3 {
                psi_expr.clone()
            } else {
                Expr::var(slot)
            };
            e = Expr::add(e, Expr::mul(tf_to_expr(&self.affine[slot], reg), factor));
        }
        for s in &self.shapes {
            e = Expr::add(e, s.to_expr(reg));
        }
        e
    }

    fn display(&self, kind: SpaceKind) -> String {
        let names = kind.u_names();
        let mut parts = Vec::new();
        if !self.affine[0].is_zero() {
            parts.push(self.affine[0].name().to_string());
        }
        for slot in 1..4 {
            if !self.affine[slot].is_zero() {
                parts.push(format!("({})·{}", self.affine[slot].name(), names[slot - 1]));
            }
        }
        for s in &self.shapes {
            let trig = match s.trig {
                Trig::Sin => "sin",
                Trig::Cos => "cos",
            };
            let mut txt = format!("({})·{}(lambda+{}t)", s.scale.name(), trig, s.omega);
            if s.mu_pow > 0 {
                txt += &format!("·mu^{}", s.mu_pow);
            }
            if s.s_pow != 0 {
                txt += &format!("·(1-mu^2)^{{{}/2}}", s.s_pow);
            }
            parts.push(txt);
        }
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" + ")
        }
    }
}

/// A Lie point-symmetry generator with the coefficient structure described in
/// the module docs. The dt coefficient is affine in t with constant entries.
#[derive(Clone, Debug)]
pub struct GeneratorField {
    pub kind: SpaceKind,
    pub name: String,
    /// Coefficient of dt: a + b t.
    pub t_coeff: (f64, f64),
    /// Coefficients of d_u1, d_u2, d_psi.
    pub coeffs: [GenCoeff; 3],
}

impl GeneratorField {
    pub fn zero(kind: SpaceKind) -> Self {
        GeneratorField {
            kind,
            name: "0".into(),
            t_coeff: (0.0, 0.0),
            coeffs: [GenCoeff::zero(), GenCoeff::zero(), GenCoeff::zero()],
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Evaluate all four coefficients at a point (t, u1, u2, psi).
    pub fn eval_coefficients(&self, p: &[f64; 4]) -> Result<[f64; 4]> {
        Ok([
            self.t_coeff.0 + self.t_coeff.1 * p[0],
            self.coeffs[0].eval(p)?,
            self.coeffs[1].eval(p)?,
            self.coeffs[2].eval(p)?,
        ])
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.kind != other.kind {
            return Err(Error::VarMismatch {
                expected: format!("{:?}", self.kind),
                got: format!("{:?}", other.kind),
            });
        }
        Ok(GeneratorField {
            kind: self.kind,
            name: format!("{} + {}", self.name, other.name),
            t_coeff: (
                self.t_coeff.0 + other.t_coeff.0,
                self.t_coeff.1 + other.t_coeff.1,
            ),
            coeffs: [
                self.coeffs[0].add(&other.coeffs[0]),
                self.coeffs[1].add(&other.coeffs[1]),
                self.coeffs[2].add(&other.coeffs[2]),
            ],
        })
    }

    pub fn scale(&self, v: f64) -> Self {
        GeneratorField {
            kind: self.kind,
            name: format!("{}·({})", v, self.name),
            t_coeff: (v * self.t_coeff.0, v * self.t_coeff.1),
            coeffs: [
                self.coeffs[0].scale(v),
                self.coeffs[1].scale(v),
                self.coeffs[2].scale(v),
            ],
        }
    }

    pub fn combine(terms: &[(f64, &GeneratorField)]) -> Result<Self> {
        let kind = terms
            .first()
            .map(|(_, g)| g.kind)
            .ok_or_else(|| Error::InvalidParameter("empty combination".into()))?;
        let mut acc = GeneratorField::zero(kind);
        for (c, g) in terms {
            acc = acc.add(&g.scale(*c))?;
        }
        Ok(acc)
    }

    /// Numeric comparison of two generators on sample points.
    pub fn agrees_with(&self, other: &Self, points: &[[f64; 4]], tol: f64) -> Result<bool> {
        for p in points {
            let a = self.eval_coefficients(p)?;
            let b = other.eval_coefficients(p)?;
            for i in 0..4 {
                if (a[i] - b[i]).abs() > tol * (1.0 + a[i].abs().max(b[i].abs())) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// The symmetry characteristic Q = phi - tau psi_t - xi^1 psi_u1 - xi^2 psi_u2
    /// as a field over (t, u1, u2); psi + eps Q solves the equation to O(eps^2)
    /// exactly when the generator is a symmetry.
    pub fn characteristic(&self, psi: &AnalyticField) -> Result<AnalyticField> {
        let vars = self.kind.field_vars();
        if psi.vars() != &vars {
            return Err(Error::VarMismatch {
                expected: format!("{:?}", vars.names()),
                got: format!("{:?}", psi.vars().names()),
            });
        }
        let mut reg = psi.time_fns().clone();
        let ti = Some(0);
        let phi = self.coeffs[2].to_expr(psi.expr(), &mut reg);
        let tau = Expr::add(
            Expr::Const(self.t_coeff.0),
            Expr::mul(Expr::Const(self.t_coeff.1), Expr::var(0)),
        );
        let xi1 = self.coeffs[0].to_expr(psi.expr(), &mut reg);
        let xi2 = self.coeffs[1].to_expr(psi.expr(), &mut reg);
        let q = Expr::sub(
            phi,
            Expr::add(
                Expr::mul(tau, psi.expr().diff(0, ti)),
                Expr::add(
                    Expr::mul(xi1, psi.expr().diff(1, ti)),
                    Expr::mul(xi2, psi.expr().diff(2, ti)),
                ),
            ),
        );
        Ok(AnalyticField::new(vars, q, reg))
    }
}

impl fmt::Display for GeneratorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.kind.u_names();
        let mut parts = Vec::new();
        let (a, b) = self.t_coeff;
        if a != 0.0 || b != 0.0 {
            parts.push(format!("({})·∂t", TimeFunction::polynomial(vec![a, b]).name()));
        }
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                parts.push(format!("[{}]·∂{}", c.display(self.kind), names[i]));
            }
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Instantiated Cartesian basis { D, dt, dy, X(f), Z(g) }.
pub fn catalog_cartesian(f: &TimeFunction, g: &TimeFunction) -> Vec<GeneratorField> {
    vec![
        dilation(),
        time_translation(SpaceKind::Cartesian),
        y_translation(),
        x_shear(f),
        psi_shift(SpaceKind::Cartesian, g),
    ]
}

/// D = t dt - x dx - y dy - 3 psi dpsi.
pub fn dilation() -> GeneratorField {
    GeneratorField {
        kind: SpaceKind::Cartesian,
        name: "D".into(),
        t_coeff: (0.0, 1.0),
        coeffs: [
            GenCoeff::linear_in(1, TimeFunction::constant(-1.0)),
            GenCoeff::linear_in(2, TimeFunction::constant(-1.0)),
            GenCoeff::linear_in(3, TimeFunction::constant(-3.0)),
        ],
    }
}

pub fn time_translation(kind: SpaceKind) -> GeneratorField {
    GeneratorField {
        kind,
        name: "∂t".into(),
        t_coeff: (1.0, 0.0),
        coeffs: [GenCoeff::zero(), GenCoeff::zero(), GenCoeff::zero()],
    }
}

pub fn y_translation() -> GeneratorField {
    GeneratorField {
        kind: SpaceKind::Cartesian,
        name: "∂y".into(),
        t_coeff: (0.0, 0.0),
        coeffs: [GenCoeff::zero(), GenCoeff::constant(1.0), GenCoeff::zero()],
    }
}

/// X(f) = f(t) dx - f'(t) y dpsi.
pub fn x_shear(f: &TimeFunction) -> GeneratorField {
    GeneratorField {
        kind: SpaceKind::Cartesian,
        name: format!("X({})", f.name()),
        t_coeff: (0.0, 0.0),
        coeffs: [
            GenCoeff::from_tf(f.clone()),
            GenCoeff::zero(),
            GenCoeff::linear_in(2, f.derivative().neg()),
        ],
    }
}

/// Z(g) = g(t) dpsi.
pub fn psi_shift(kind: SpaceKind, g: &TimeFunction) -> GeneratorField {
    GeneratorField {
        kind,
        name: format!("Z({})", g.name()),
        t_coeff: (0.0, 0.0),
        coeffs: [GenCoeff::zero(), GenCoeff::zero(), GenCoeff::from_tf(g.clone())],
    }
}

/// Instantiated spherical basis { D, dt, Z(g), J1, J2, J3 }.
pub fn catalog_spherical(omega: f64, g: &TimeFunction) -> Vec<GeneratorField> {
    vec![
        spherical_dilation(omega),
        time_translation(SpaceKind::Spherical),
        psi_shift(SpaceKind::Spherical, g),
        j1(),
        j2(omega),
        j3(omega),
    ]
}

/// D = t dt - Omega t dlambda - (psi - Omega mu) dpsi.
pub fn spherical_dilation(omega: f64) -> GeneratorField {
    GeneratorField {
        kind: SpaceKind::Spherical,
        name: "D".into(),
        t_coeff: (0.0, 1.0),
        coeffs: [
            GenCoeff::from_tf(TimeFunction::polynomial(vec![0.0, -omega])),
            GenCoeff::zero(),
            {
                let mut c = GenCoeff::linear_in(3, TimeFunction::constant(-1.0));
                c.affine[2] = TimeFunction::constant(omega);
                c
            },
        ],
    }
}

pub fn j1() -> GeneratorField {
    GeneratorField {
        kind: SpaceKind::Spherical,
        name: "J1".into(),
        t_coeff: (0.0, 0.0),
        coeffs: [GenCoeff::constant(1.0), GenCoeff::zero(), GenCoeff::zero()],
    }
}

/// J2: the rotation generator about the horizontal axis picked out by
/// cos(lambda + Omega t); its psi part Omega cos(lambda + Omega t) sqrt(1-mu^2)
/// is the push-forward of the plain rotation through the de-rotation map.
pub fn j2(omega: f64) -> GeneratorField {
    GeneratorField {
        kind: SpaceKind::Spherical,
        name: "J2".into(),
        t_coeff: (0.0, 0.0),
        coeffs: [
            GenCoeff::from_shape(JShape {
                scale: TimeFunction::constant(1.0),
                trig: Trig::Sin,
                omega,
                mu_pow: 1,
                s_pow: -1,
            }),
            GenCoeff::from_shape(JShape {
                scale: TimeFunction::constant(1.0),
                trig: Trig::Cos,
                omega,
                mu_pow: 0,
                s_pow: 1,
            }),
            GenCoeff::from_shape(JShape {
                scale: TimeFunction::constant(omega),
                trig: Trig::Cos,
                omega,
                mu_pow: 0,
                s_pow: 1,
            }),
        ],
    }
}

pub fn j3(omega: f64) -> GeneratorField {
    GeneratorField {
        kind: SpaceKind::Spherical,
        name: "J3".into(),
        t_coeff: (0.0, 0.0),
        coeffs: [
            GenCoeff::from_shape(JShape {
                scale: TimeFunction::constant(1.0),
                trig: Trig::Cos,
                omega,
                mu_pow: 1,
                s_pow: -1,
            }),
            GenCoeff::from_shape(JShape {
                scale: TimeFunction::constant(-1.0),
                trig: Trig::Sin,
                omega,
                mu_pow: 0,
                s_pow: 1,
            }),
            GenCoeff::from_shape(JShape {
                scale: TimeFunction::constant(-omega),
                trig: Trig::Sin,
                omega,
                mu_pow: 0,
                s_pow: 1,
            }),
        ],
    }
}

/// Product of a coefficient with a component derivative; representable when
/// at least one factor is a pure function of t.
fn mul_coeffs(a: &GenCoeff, b: &GenCoeff) -> Result<GenCoeff> {
    if a.is_zero() || b.is_zero() {
        return Ok(GenCoeff::zero());
    }
    if a.is_t_only() {
        return Ok(b.scale_by_tf(&a.affine[0]));
    }
    if b.is_t_only() {
        return Ok(a.scale_by_tf(&b.affine[0]));
    }
    Err(Error::BracketNotRepresentable(
        "product of two space-dependent coefficients (spherical mixed case)".into(),
    ))
}

/// Directional action of generator `v` on a coefficient function `a`.
fn apply_generator(v: &GeneratorField, a: &GenCoeff) -> Result<GenCoeff> {
    // tau dt(a)
    let tau = TimeFunction::polynomial(vec![v.t_coeff.0, v.t_coeff.1]);
    let mut acc = a.dt().scale_by_tf(&tau);
    for slot in 0..3 {
        let da = a.d_slot(slot + 1, v.kind);
        acc = acc.add(&mul_coeffs(&v.coeffs[slot], &da)?);
    }
    Ok(acc)
}

/// The commutator [v, w]^i = v(w^i) - w(v^i).
pub fn lie_bracket(v: &GeneratorField, w: &GeneratorField) -> Result<GeneratorField> {
    if v.kind != w.kind {
        return Err(Error::VarMismatch {
            expected: format!("{:?}", v.kind),
            got: format!("{:?}", w.kind),
        });
    }
    if std::ptr::eq(v, w) {
        return Ok(GeneratorField::zero(v.kind).named(format!("[{}, {}]", v.name, w.name)));
    }
    // dt component: v(tau_w) - w(tau_v) = a_v b_w - a_w b_v (constant)
    let t_const = v.t_coeff.0 * w.t_coeff.1 - w.t_coeff.0 * v.t_coeff.1;
    let mut coeffs = Vec::with_capacity(3);
    for i in 0..3 {
        let fwd = apply_generator(v, &w.coeffs[i])?;
        let bwd = apply_generator(w, &v.coeffs[i])?;
        coeffs.push(fwd.add(&bwd.scale(-1.0)));
    }
    Ok(GeneratorField {
        kind: v.kind,
        name: format!("[{}, {}]", v.name, w.name),
        t_coeff: (t_const, 0.0),
        coeffs: [coeffs.remove(0), coeffs.remove(0), coeffs.remove(0)],
    })
}

/// Deterministic generic sample points for a space kind.
pub fn sample_points(kind: SpaceKind, n: usize, seed: u64) -> Vec<[f64; 4]> {
    let mut rng = SplitMix64(seed);
    (0..n)
        .map(|_| {
            let t = rng.uniform(0.25, 1.75);
            match kind {
                SpaceKind::Cartesian => [
                    t,
                    rng.uniform(-1.5, 1.5),
                    rng.uniform(-1.5, 1.5),
                    rng.uniform(-1.5, 1.5),
                ],
                SpaceKind::Spherical => [
                    t,
                    rng.uniform(0.0, std::f64::consts::TAU),
                    rng.uniform(-0.85, 0.85),
                    rng.uniform(-1.5, 1.5),
                ],
            }
        })
        .collect()
}

/// A candidate subalgebra: instantiated generators, checked for pointwise
/// linear independence at construction.
#[derive(Clone, Debug)]
pub struct SubalgebraSpec {
    pub label: String,
    pub generators: Vec<GeneratorField>,
}

impl SubalgebraSpec {
    pub fn new(label: impl Into<String>, generators: Vec<GeneratorField>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidParameter("empty subalgebra".into()));
        }
        let kind = generators[0].kind;
        if generators.iter().any(|g| g.kind != kind) {
            return Err(Error::InvalidParameter("mixed variable sets".into()));
        }
        let spec = SubalgebraSpec {
            label: label.into(),
            generators,
        };
        // rank check on sampled coefficients
        let pts = sample_points(kind, 12, 0x5eed);
        let (matrix, _) = spec.coefficient_matrix(&pts, None)?;
        let n = spec.generators.len();
        let mut columns = transpose(&matrix);
        let pivots = crate::linalg::rref(&mut columns, 1e-9);
        if pivots.len() < n {
            return Err(Error::InvalidParameter(format!(
                "generators of '{}' are linearly dependent",
                spec.label
            )));
        }
        Ok(spec)
    }

    /// Rows = (point, component), columns = generators; optionally also
    /// evaluate a target generator as the right-hand side.
    fn coefficient_matrix(
        &self,
        pts: &[[f64; 4]],
        target: Option<&GeneratorField>,
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let mut rows = Vec::with_capacity(pts.len() * 4);
        let mut rhs = Vec::with_capacity(pts.len() * 4);
        for p in pts {
            let cols: Vec<[f64; 4]> = self
                .generators
                .iter()
                .map(|g| g.eval_coefficients(p))
                .collect::<Result<_>>()?;
            let b = match target {
                Some(t) => t.eval_coefficients(p)?,
                None => [0.0; 4],
            };
            for comp in 0..4 {
                rows.push(cols.iter().map(|c| c[comp]).collect());
                rhs.push(b[comp]);
            }
        }
        Ok((rows, rhs))
    }
}

fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if m.is_empty() {
        return vec![];
    }
    let cols = m[0].len();
    (0..cols)
        .map(|c| m.iter().map(|row| row[c]).collect())
        .collect()
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SubalgebraReport {
    pub label: String,
    /// (i, j, best-fit residual) for each generator pair i < j.
    pub pairs: Vec<(usize, usize, f64)>,
    pub max_residual: f64,
    pub pass: bool,
}

pub const SUBALGEBRA_TOL: f64 = 1e-10;

/// Check that every pairwise bracket lies in the span of the subalgebra by a
/// constant-coefficient least-squares fit on generic sample points. Degenerate
/// sample configurations are re-drawn up to 3 times.
pub fn verify_subalgebra(spec: &SubalgebraSpec) -> Result<SubalgebraReport> {
    let kind = spec.generators[0].kind;
    let mut pairs = Vec::new();
    let mut max_res = 0.0f64;
    for i in 0..spec.generators.len() {
        for j in (i + 1)..spec.generators.len() {
            let bracket = lie_bracket(&spec.generators[i], &spec.generators[j])?;
            let mut attempt = 0;
            let residual = loop {
                let pts = sample_points(kind, 8 + 4 * attempt, 0xabc0de + attempt as u64);
                let (a, b) = spec.coefficient_matrix(&pts, Some(&bracket))?;
                match lstsq(&a, &b) {
                    Ok((_, res)) => break res,
                    Err(_) if attempt < 3 => attempt += 1,
                    Err(_) => return Err(Error::DegenerateSamples(attempt + 1)),
                }
            };
            max_res = max_res.max(residual);
            pairs.push((i, j, residual));
        }
    }
    Ok(SubalgebraReport {
        label: spec.label.clone(),
        pairs,
        max_residual: max_res,
        pass: max_res <= SUBALGEBRA_TOL,
    })
}

/// Concrete instantiations of the one-dimensional optimal system:
/// D; dt + c dy (c = 0, +-1); dy + X(f); X(f) + Z(g).
pub fn optimal_system_1d() -> Vec<SubalgebraSpec> {
    let mut out = Vec::new();
    let single = |label: &str, g: GeneratorField| SubalgebraSpec::new(label, vec![g]).unwrap();
    out.push(single("<D>", dilation()));
    for c in [0.0, 1.0, -1.0] {
        let g = GeneratorField::combine(&[
            (1.0, &time_translation(SpaceKind::Cartesian)),
            (c, &y_translation()),
        ])
        .unwrap();
        out.push(single(&format!("<dt + {}·dy>", c), g));
    }
    for f in [TimeFunction::identity(), TimeFunction::sinusoid("sin t", 1.0, 1.0, 0.0)] {
        let g = GeneratorField::combine(&[(1.0, &y_translation()), (1.0, &x_shear(&f))]).unwrap();
        out.push(single(&format!("<dy + X({})>", f.name()), g));
    }
    for (f, g) in [
        (
            TimeFunction::polynomial(vec![0.0, 0.0, 1.0]),
            TimeFunction::constant(1.0),
        ),
        (
            TimeFunction::sinusoid("sin t", 1.0, 1.0, 0.0),
            TimeFunction::identity(),
        ),
    ] {
        let gen =
            GeneratorField::combine(&[(1.0, &x_shear(&f)), (1.0, &psi_shift(SpaceKind::Cartesian, &g))])
                .unwrap();
        out.push(single(&format!("<X({}) + Z({})>", f.name(), g.name()), gen));
    }
    out
}

/// Concrete instantiations of the two-dimensional optimal system. Entries of
/// the family < dt + b dy, Z((a b t + c) e^(a t)) > are restricted to a b = 0:
/// for a b != 0 the bracket Z(g') leaves the span, so those parameter choices
/// do not form subalgebras.
pub fn optimal_system_2d() -> Vec<SubalgebraSpec> {
    let dt = || time_translation(SpaceKind::Cartesian);
    let dy = y_translation;
    let mut out = Vec::new();
    let mk = |label: String, gens: Vec<GeneratorField>| SubalgebraSpec::new(label, gens).unwrap();

    out.push(mk("<D, dt>".into(), vec![dilation(), dt()]));

    for a in [0.0, 1.0, -2.0] {
        let second = GeneratorField::combine(&[
            (1.0, &dy()),
            (a, &x_shear(&TimeFunction::constant(1.0))),
        ])
        .unwrap();
        out.push(mk(format!("<D, dy + {}·X(1)>", a), vec![dilation(), second]));
    }

    for (a, c) in [(2.0, 1.0), (3.0, -1.0)] {
        let f = TimeFunction::abs_power(a);
        let z = TimeFunction::abs_power(a - 2.0);
        let second = GeneratorField::combine(&[
            (1.0, &x_shear(&f)),
            (c, &psi_shift(SpaceKind::Cartesian, &z)),
        ])
        .unwrap();
        out.push(mk(
            format!("<D, X(|t|^{}) + {}·Z(|t|^{})>", a, c, a - 2.0),
            vec![dilation(), second],
        ));
    }

    for a in [2.0, 4.0] {
        let z = TimeFunction::abs_power(a - 2.0);
        out.push(mk(
            format!("<D, Z(|t|^{})>", a - 2.0),
            vec![dilation(), psi_shift(SpaceKind::Cartesian, &z)],
        ));
    }

    // <dt + b dy, X(e^(a t)) + Z((a b t + c) e^(a t))>, a b c = 0
    for (a, b, c) in [(1.0, 1.0, 0.0), (0.0, 1.0, 1.0), (2.0, 0.0, 1.0)] {
        let f = TimeFunction::exponential(format!("e^{}t", a), 1.0, a);
        let lin = TimeFunction::polynomial(vec![c, a * b]);
        let g = lin.mul(&f);
        let first = GeneratorField::combine(&[(1.0, &dt()), (b, &dy())]).unwrap();
        let second = GeneratorField::combine(&[
            (1.0, &x_shear(&f)),
            (1.0, &psi_shift(SpaceKind::Cartesian, &g)),
        ])
        .unwrap();
        out.push(mk(
            format!("<dt + {}·dy, X(e^{}t) + Z(({}bt+{})e^{}t)>", b, a, a * b, c, a),
            vec![first, second],
        ));
    }

    // <dt + b dy, Z((a b t + c) e^(a t))> with a b = 0
    for (a, b, c) in [(0.0, 1.0, 1.0), (2.0, 0.0, 1.0), (0.0, -1.0, 1.0)] {
        let f = TimeFunction::exponential(format!("e^{}t", a), 1.0, a);
        let g = TimeFunction::polynomial(vec![c, a * b]).mul(&f);
        let first = GeneratorField::combine(&[(1.0, &dt()), (b, &dy())]).unwrap();
        out.push(mk(
            format!("<dt + {}·dy, Z({})>", b, g.name()),
            vec![first, psi_shift(SpaceKind::Cartesian, &g)],
        ));
    }

    // <dy + X(f1), X(1) + Z(g2)>
    for (f1, g2) in [
        (TimeFunction::identity(), TimeFunction::constant(1.0)),
        (
            TimeFunction::sinusoid("sin t", 1.0, 1.0, 0.0),
            TimeFunction::polynomial(vec![0.0, 0.0, 1.0]),
        ),
    ] {
        let first = GeneratorField::combine(&[(1.0, &dy()), (1.0, &x_shear(&f1))]).unwrap();
        let second = GeneratorField::combine(&[
            (1.0, &x_shear(&TimeFunction::constant(1.0))),
            (1.0, &psi_shift(SpaceKind::Cartesian, &g2)),
        ])
        .unwrap();
        out.push(mk(
            format!("<dy + X({}), X(1) + Z({})>", f1.name(), g2.name()),
            vec![first, second],
        ));
    }

    // <dy + X(f1), Z(g2)>
    for (f1, g2) in [
        (TimeFunction::identity(), TimeFunction::constant(1.0)),
        (
            TimeFunction::sinusoid("sin t", 1.0, 1.0, 0.0),
            TimeFunction::exponential("e^t", 1.0, 1.0),
        ),
    ] {
        let first = GeneratorField::combine(&[(1.0, &dy()), (1.0, &x_shear(&f1))]).unwrap();
        out.push(mk(
            format!("<dy + X({}), Z({})>", f1.name(), g2.name()),
            vec![first, psi_shift(SpaceKind::Cartesian, &g2)],
        ));
    }

    // <X(f1) + Z(g1), X(f2) + Z(g2)> with independent pairs
    for (f1, g1, f2, g2) in [
        (
            TimeFunction::constant(1.0),
            TimeFunction::identity(),
            TimeFunction::identity(),
            TimeFunction::constant(1.0),
        ),
        (
            TimeFunction::identity(),
            TimeFunction::polynomial(vec![0.0, 0.0, 1.0]),
            TimeFunction::sinusoid("sin t", 1.0, 1.0, 0.0),
            TimeFunction::constant(1.0),
        ),
    ] {
        let first = GeneratorField::combine(&[
            (1.0, &x_shear(&f1)),
            (1.0, &psi_shift(SpaceKind::Cartesian, &g1)),
        ])
        .unwrap();
        let second = GeneratorField::combine(&[
            (1.0, &x_shear(&f2)),
            (1.0, &psi_shift(SpaceKind::Cartesian, &g2)),
        ])
        .unwrap();
        out.push(mk(
            format!(
                "<X({})+Z({}), X({})+Z({})>",
                f1.name(),
                g1.name(),
                f2.name(),
                g2.name()
            ),
            vec![first, second],
        ));
    }

    out
}

/// Closed-form time-eps flow of a catalog generator or a recognized
/// constant-coefficient combination.
pub fn flow(v: &GeneratorField, eps: f64) -> Result<PointTransformation> {
    let space = v.kind.field_vars();
    if eps == 0.0 {
        return Ok(PointTransformation::identity(space));
    }
    let no_flow = || Error::NoClosedFormFlow(v.name.clone());
    let (a, b) = v.t_coeff;
    let has_shapes = v.coeffs.iter().any(|c| !c.shapes.is_empty());

    if has_shapes {
        return flow_of_rotation(v, eps).ok_or_else(no_flow);
    }

    // scaling family: t_coeff = b t, each coefficient diagonal with constant entry
    let diag = |i: usize| -> Option<f64> {
        let c = &v.coeffs[i];
        let mut entry = None;
        for slot in 0..4 {
            if slot == i + 1 {
                entry = c.affine[slot].as_constant();
            } else if !c.affine[slot].is_zero() {
                return None;
            }
        }
        entry
    };
    if b != 0.0 && a == 0.0 && v.kind == SpaceKind::Cartesian {
        if let (Some(bx), Some(by), Some(bp)) = (diag(0), diag(1), diag(2)) {
            return Ok(scaling_flow(v, eps, b, bx, by, bp));
        }
    }
    if b != 0.0 && a == 0.0 && v.kind == SpaceKind::Spherical {
        // spherical dilation family: dlambda = -Omega b t, dpsi = b (Omega mu - psi)
        let lam = &v.coeffs[0];
        let psi = &v.coeffs[2];
        let lam_poly = lam.affine[0].as_poly().map(|p| p.to_vec());
        let scale_psi = psi.affine[3].as_constant();
        let mu_psi = psi.affine[2].as_constant();
        let rest_zero = v.coeffs[1].is_zero()
            && lam.affine[1].is_zero()
            && lam.affine[2].is_zero()
            && lam.affine[3].is_zero()
            && psi.affine[0].is_zero()
            && psi.affine[1].is_zero();
        if let (Some(lp), Some(sp), Some(mp)) = (lam_poly, scale_psi, mu_psi) {
            let omega = mp / b;
            let lam_ok = match lp.len() {
                0 => omega == 0.0,
                2 => lp[0] == 0.0 && (lp[1] - (-omega * b)).abs() <= 1e-15 * omega.abs().max(1.0),
                _ => false,
            };
            if rest_zero && sp == -b && lam_ok {
                return Ok(spherical_dilation_flow(v, eps, b, omega));
            }
        }
        return Err(no_flow());
    }
    if b != 0.0 {
        return Err(no_flow());
    }

    // t frozen: translations and shear flows
    // requirements: dx = f(t), dy = const-like c(t), dpsi = g(t) + h(t) u2
    let c0_only = |c: &GenCoeff| -> Option<TimeFunction> {
        if c.affine[1].is_zero() && c.affine[2].is_zero() && c.affine[3].is_zero() {
            Some(c.affine[0].clone())
        } else {
            None
        }
    };
    let f = c0_only(&v.coeffs[0]).ok_or_else(no_flow)?;
    let c = c0_only(&v.coeffs[1]).ok_or_else(no_flow)?;
    let psi = &v.coeffs[2];
    if !psi.affine[1].is_zero() || !psi.affine[3].is_zero() {
        return Err(no_flow());
    }
    let g = psi.affine[0].clone();
    let h = psi.affine[2].clone();
    if a != 0.0 {
        // time translation mixes t into every f(t) coefficient; only the pure
        // constant-coefficient case has a closed form here
        let all_const = f.as_constant().is_some()
            && c.as_constant().is_some()
            && g.as_constant().is_some()
            && h.is_zero();
        if !all_const {
            return Err(no_flow());
        }
    }
    Ok(shear_flow(v, eps, a, &f, &c, &g, &h))
}

fn scaling_flow(
    v: &GeneratorField,
    eps: f64,
    b: f64,
    bx: f64,
    by: f64,
    bp: f64,
) -> PointTransformation {
    let build = |e: f64| CoordMap {
        space: [
            Expr::mul(Expr::Const((b * e).exp()), Expr::var(0)),
            Expr::mul(Expr::Const((bx * e).exp()), Expr::var(1)),
            Expr::mul(Expr::Const((by * e).exp()), Expr::var(2)),
        ],
        psi_scale: Expr::Const((bp * e).exp()),
        psi_shift: Expr::Const(0.0),
    };
    PointTransformation::analytic(
        MapKind::Flow,
        format!("flow({}, {})", v.name, eps),
        v.kind.field_vars(),
        build(eps),
        build(-eps),
        TimeFnSet::new(),
    )
}

fn spherical_dilation_flow(
    v: &GeneratorField,
    eps: f64,
    b: f64,
    omega: f64,
) -> PointTransformation {
    // t -> s t, lambda -> lambda - Omega t (s - 1), mu -> mu,
    // psi -> psi/s + Omega mu (1 - 1/s) with s = e^(b eps)
    let build = |e: f64| {
        let s = (b * e).exp();
        CoordMap {
            space: [
                Expr::mul(Expr::Const(s), Expr::var(0)),
                Expr::sub(
                    Expr::var(1),
                    Expr::mul(Expr::Const(omega * (s - 1.0)), Expr::var(0)),
                ),
                Expr::var(2),
            ],
            psi_scale: Expr::Const(1.0 / s),
            psi_shift: Expr::mul(Expr::Const(omega * (1.0 - 1.0 / s)), Expr::var(2)),
        }
    };
    PointTransformation::analytic(
        MapKind::Flow,
        format!("flow({}, {})", v.name, eps),
        v.kind.field_vars(),
        build(eps),
        build(-eps),
        TimeFnSet::new(),
    )
}

/// Flow of tau = a dt plus the t-frozen family f(t) dx + c(t) dy +
/// (g(t) + h(t) y) dpsi; when a != 0 all coefficients are constants.
fn shear_flow(
    v: &GeneratorField,
    eps: f64,
    a: f64,
    f: &TimeFunction,
    c: &TimeFunction,
    g: &TimeFunction,
    h: &TimeFunction,
) -> PointTransformation {
    let mut reg = TimeFnSet::new();
    let mut leaf = |tf: &TimeFunction| -> Expr {
        if let Some(v) = tf.as_constant() {
            Expr::Const(v)
        } else {
            let name = fresh_tf_name(tf.name());
            reg.insert(name.clone(), tf.clone());
            Expr::time_fn(&name)
        }
    };
    let (fe, ce, ge, he) = (leaf(f), leaf(c), leaf(g), leaf(h));
    let build = |e: f64, fe: &Expr, ce: &Expr, ge: &Expr, he: &Expr| CoordMap {
        space: [
            Expr::add(Expr::var(0), Expr::Const(a * e)),
            Expr::add(Expr::var(1), Expr::mul(Expr::Const(e), fe.clone())),
            Expr::add(Expr::var(2), Expr::mul(Expr::Const(e), ce.clone())),
        ],
        psi_scale: Expr::Const(1.0),
        // eps (g + h y) + eps^2 h c / 2, expressed over source coordinates
        psi_shift: Expr::add(
            Expr::mul(
                Expr::Const(e),
                Expr::add(ge.clone(), Expr::mul(he.clone(), Expr::var(2))),
            ),
            Expr::mul(Expr::Const(e * e / 2.0), Expr::mul(he.clone(), ce.clone())),
        ),
    };
    let fwd = build(eps, &fe, &ce, &ge, &he);
    let inv = build(-eps, &fe, &ce, &ge, &he);
    PointTransformation::analytic(
        MapKind::Flow,
        format!("flow({}, {})", v.name, eps),
        v.kind.field_vars(),
        fwd,
        inv,
        reg,
    )
}

/// J2 and J3 exponentiate to rigid sphere rotations conjugated by the
/// de-rotation map; recognized from their shape structure.
fn flow_of_rotation(v: &GeneratorField, eps: f64) -> Option<PointTransformation> {
    if v.kind != SpaceKind::Spherical || v.t_coeff != (0.0, 0.0) {
        return None;
    }
    let single = |c: &GenCoeff| -> Option<JShape> {
        if c.affine.iter().all(|a| a.is_zero()) && c.shapes.len() == 1 {
            Some(c.shapes[0].clone())
        } else {
            None
        }
    };
    let (lam, mu, psi) = (
        single(&v.coeffs[0])?,
        single(&v.coeffs[1])?,
        single(&v.coeffs[2])?,
    );
    let omega = lam.omega;
    if mu.omega != omega || psi.omega != omega {
        return None;
    }
    let (sl, sm, sp) = (
        lam.scale.as_constant()?,
        mu.scale.as_constant()?,
        psi.scale.as_constant()?,
    );
    if (lam.mu_pow, lam.s_pow) != (1, -1) || (mu.mu_pow, mu.s_pow) != (0, 1) {
        return None;
    }
    if (psi.mu_pow, psi.s_pow) != (0, 1) || (sp - omega * sm).abs() > 1e-14 * omega.abs().max(1.0)
    {
        return None;
    }
    // J2: (sin, cos) scales (1, 1); J3: (cos, -sin) scales (1, -1)
    let axis = match (lam.trig, mu.trig) {
        (Trig::Sin, Trig::Cos) if sl == 1.0 && sm == 1.0 => RotationAxis::Y,
        (Trig::Cos, Trig::Sin) if sl == 1.0 && sm == -1.0 => RotationAxis::X,
        _ => return None,
    };
    Some(PointTransformation::sphere_rotation(axis, eps, omega))
}

/// Push a solution through a point transformation (symmetries map solutions
/// to solutions; verify with `fields::residual`).
pub fn map_solution(t: &PointTransformation, psi: &AnalyticField) -> Result<AnalyticField> {
    t.map_field(psi)
}

fn tf_to_json(tf: &TimeFunction, registry: &mut TimeFnSet) -> serde_json::Value {
    if let Some(c) = tf.as_constant() {
        return serde_json::json!(c);
    }
    registry.insert(tf.name().to_string(), tf.clone());
    serde_json::json!(tf.name())
}

fn tf_from_json(value: &serde_json::Value, registry: &TimeFnSet) -> Result<TimeFunction> {
    match value {
        serde_json::Value::Number(n) => Ok(TimeFunction::constant(
            n.as_f64().ok_or_else(|| Error::Parse("bad number".into()))?,
        )),
        serde_json::Value::String(name) => registry
            .get(name)
            .cloned()
            .ok_or_else(|| Error::MissingTimeFunction(name.clone())),
        other => Err(Error::Parse(format!(
            "coefficient entry must be a number or a registered name, got {}",
            other
        ))),
    }
}

impl GeneratorField {
    /// Serialize to the documented JSON form, e.g.
    /// `{"space": "cartesian", "dt": [a, b], "dx": {"c0": "f"}, ...}`.
    /// Non-constant time functions are referenced by name and added to
    /// `registry`; J-type shape leaves appear under a "shapes" key.
    pub fn to_json(&self, registry: &mut TimeFnSet) -> serde_json::Value {
        let keys = match self.kind {
            SpaceKind::Cartesian => ["dx", "dy", "dpsi"],
            SpaceKind::Spherical => ["dlambda", "dmu", "dpsi"],
        };
        let mut obj = serde_json::Map::new();
        obj.insert("name".into(), serde_json::json!(self.name));
        obj.insert(
            "space".into(),
            serde_json::json!(match self.kind {
                SpaceKind::Cartesian => "cartesian",
                SpaceKind::Spherical => "spherical",
            }),
        );
        obj.insert(
            "dt".into(),
            serde_json::json!([self.t_coeff.0, self.t_coeff.1]),
        );
        for (key, coeff) in keys.iter().zip(&self.coeffs) {
            let mut entry = serde_json::Map::new();
            for (slot, label) in ["c0", "c1", "c2", "c3"].iter().enumerate() {
                if !coeff.affine[slot].is_zero() {
                    entry.insert(label.to_string(), tf_to_json(&coeff.affine[slot], registry));
                }
            }
            if !coeff.shapes.is_empty() {
                let shapes: Vec<serde_json::Value> = coeff
                    .shapes
                    .iter()
                    .map(|s| {
                        serde_json::json!({
                            "scale": tf_to_json(&s.scale, registry),
                            "trig": match s.trig { Trig::Sin => "sin", Trig::Cos => "cos" },
                            "omega": s.omega,
                            "mu_pow": s.mu_pow,
                            "s_pow": s.s_pow,
                        })
                    })
                    .collect();
                entry.insert("shapes".into(), serde_json::Value::Array(shapes));
            }
            obj.insert(key.to_string(), serde_json::Value::Object(entry));
        }
        serde_json::Value::Object(obj)
    }

    /// Parse the documented JSON form, resolving time-function names against
    /// `registry`.
    pub fn from_json(value: &serde_json::Value, registry: &TimeFnSet) -> Result<Self> {
        let space = match value["space"].as_str() {
            Some("cartesian") => SpaceKind::Cartesian,
            Some("spherical") => SpaceKind::Spherical,
            other => {
                return Err(Error::Parse(format!(
                    "generator space must be cartesian or spherical, got {:?}",
                    other
                )))
            }
        };
        let dt = value["dt"]
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| Error::Parse("'dt' must be [a, b]".into()))?;
        let t_coeff = (
            dt[0].as_f64().ok_or_else(|| Error::Parse("bad dt[0]".into()))?,
            dt[1].as_f64().ok_or_else(|| Error::Parse("bad dt[1]".into()))?,
        );
        let keys = match space {
            SpaceKind::Cartesian => ["dx", "dy", "dpsi"],
            SpaceKind::Spherical => ["dlambda", "dmu", "dpsi"],
        };
        let mut coeffs = Vec::with_capacity(3);
        for key in keys {
            let mut coeff = GenCoeff::zero();
            if let Some(entry) = value.get(key) {
                for (slot, label) in ["c0", "c1", "c2", "c3"].iter().enumerate() {
                    if let Some(v) = entry.get(*label) {
                        coeff.affine[slot] = tf_from_json(v, registry)?;
                    }
                }
                if let Some(shapes) = entry.get("shapes").and_then(|s| s.as_array()) {
                    for s in shapes {
                        let trig = match s["trig"].as_str() {
                            Some("sin") => Trig::Sin,
                            Some("cos") => Trig::Cos,
                            other => {
                                return Err(Error::Parse(format!("bad trig {:?}", other)))
                            }
                        };
                        coeff.shapes.push(JShape {
                            scale: tf_from_json(&s["scale"], registry)?,
                            trig,
                            omega: s["omega"]
                                .as_f64()
                                .ok_or_else(|| Error::Parse("bad omega".into()))?,
                            mu_pow: s["mu_pow"]
                                .as_u64()
                                .ok_or_else(|| Error::Parse("bad mu_pow".into()))?
                                as u32,
                            s_pow: s["s_pow"]
                                .as_i64()
                                .ok_or_else(|| Error::Parse("bad s_pow".into()))?
                                as i32,
                        });
                    }
                }
            }
            coeffs.push(coeff);
        }
        Ok(GeneratorField {
            kind: space,
            name: value["name"].as_str().unwrap_or("generator").to_string(),
            t_coeff,
            coeffs: [coeffs.remove(0), coeffs.remove(0), coeffs.remove(0)],
        })
    }
}

//! Closed-form scalar fields and pointwise PDE residuals.
//!
//! The three equations handled here, in stream function-vorticity form:
//!
//! ```text
//! Cartesian beta-plane:  zeta_t + psi_x zeta_y - psi_y zeta_x + beta psi_x = 0,
//!                        zeta = psi_xx + psi_yy
//! rotating sphere:       zeta_t + (1/a^2)(psi_lambda zeta_mu - psi_mu zeta_lambda)
//!                        + (2 Omega/a^2) psi_lambda = 0,
//!                        zeta = (1/a^2)[psi_ll/(1-mu^2) + ((1-mu^2) psi_mu)_mu]
//! potential vorticity:   zeta_t - F psi_t + psi_x zeta_y - psi_y zeta_x
//!                        + beta psi_x = 0
//! ```
//!
//! Residuals are evaluated with exact symbolic derivatives of the field on a
//! sample grid; an exact solution leaves a residual at rounding scale.

use crate::error::{Error, Result};
use crate::expr::{Expr, TimeFnSet, VarSet};
use crate::timefn::TimeFunction;
use serde::Serialize;

/// A closed-form scalar field with exact partial derivatives.
#[derive(Clone, Debug)]
pub struct AnalyticField {
    vars: VarSet,
    expr: Expr,
    tfs: TimeFnSet,
}

impl AnalyticField {
    pub fn new(vars: VarSet, expr: Expr, tfs: TimeFnSet) -> Self {
        AnalyticField { vars, expr, tfs }
    }

    /// Field over (t, x, y).
    pub fn cartesian(expr: Expr) -> Self {
        Self::new(VarSet::cartesian(), expr, TimeFnSet::new())
    }

    /// Field over (t, lambda, mu).
    pub fn spherical(expr: Expr) -> Self {
        Self::new(VarSet::spherical(), expr, TimeFnSet::new())
    }

    pub fn with_time_fn(mut self, name: impl Into<String>, tf: TimeFunction) -> Self {
        self.tfs.insert(name.into(), tf);
        self
    }

    pub fn vars(&self) -> &VarSet {
        &self.vars
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn time_fns(&self) -> &TimeFnSet {
        &self.tfs
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        self.check_point(point)?;
        self.expr.eval(point, &self.tfs, self.vars.time_index())
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.vars.len() {
            return Err(Error::VarMismatch {
                expected: format!("{} coordinates {:?}", self.vars.len(), self.vars.names()),
                got: format!("{} coordinates", point.len()),
            });
        }
        Ok(())
    }

    /// Exact partial derivative as a new field; one entry per variable in
    /// `multi_index`, total order at most 3.
    pub fn derivative_field(&self, multi_index: &[u32]) -> Result<AnalyticField> {
        if multi_index.len() != self.vars.len() {
            return Err(Error::VarMismatch {
                expected: format!("multi-index of length {}", self.vars.len()),
                got: format!("length {}", multi_index.len()),
            });
        }
        let total: u32 = multi_index.iter().sum();
        if total > 3 {
            return Err(Error::DerivativeOrder {
                name: "field".into(),
                requested: total as usize,
                supported: 3,
            });
        }
        let mut e = self.expr.clone();
        for (var, &n) in multi_index.iter().enumerate() {
            for _ in 0..n {
                e = e.diff(var, self.vars.time_index());
            }
        }
        Ok(AnalyticField::new(self.vars.clone(), e, self.tfs.clone()))
    }

    /// Exact value of a partial derivative at a point.
    pub fn eval_derivative(&self, point: &[f64], multi_index: &[u32]) -> Result<f64> {
        self.derivative_field(multi_index)?.eval(point)
    }

    /// Serialize the expression tree to the JSON s-expression format.
    pub fn to_sexpr(&self) -> serde_json::Value {
        self.expr.to_sexpr(&self.vars)
    }

    pub fn from_sexpr(vars: VarSet, value: &serde_json::Value, tfs: TimeFnSet) -> Result<Self> {
        let expr = Expr::from_sexpr(value, &vars)?;
        Ok(AnalyticField::new(vars, expr, tfs))
    }
}

/// Equation selector with the parameters each kind requires.
#[derive(Clone, Debug, PartialEq)]
pub enum EquationParams {
    /// beta-plane equation over (t, x, y).
    Cartesian { beta: f64 },
    /// Rotating sphere over (t, lambda, mu); `radius` is the sphere radius a > 0.
    Spherical { omega: f64, radius: f64 },
    /// Potential vorticity equation over (t, x, y); `froude` is F > 0.
    Potential { beta: f64, froude: f64 },
}

impl EquationParams {
    pub fn validate(&self) -> Result<()> {
        match self {
            EquationParams::Cartesian { .. } => Ok(()),
            EquationParams::Spherical { radius, .. } => {
                if *radius > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("sphere radius must be positive".into()))
                }
            }
            EquationParams::Potential { froude, .. } => {
                if *froude > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("F must be positive".into()))
                }
            }
        }
    }

    fn expected_vars(&self) -> VarSet {
        match self {
            EquationParams::Spherical { .. } => VarSet::spherical(),
            _ => VarSet::cartesian(),
        }
    }
}

/// Sample grid: one strictly increasing axis per field variable.
#[derive(Clone, Debug)]
pub struct Grid {
    names: Vec<String>,
    axes: Vec<Vec<f64>>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

impl Grid {
    pub fn new(names: Vec<String>, axes: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != axes.len() || axes.is_empty() {
            return Err(Error::InvalidParameter("grid axes must match names".into()));
        }
        for (name, ax) in names.iter().zip(&axes) {
            if ax.is_empty() {
                return Err(Error::InvalidParameter(format!("axis '{}' is empty", name)));
            }
            if ax.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "axis '{}' must be strictly increasing",
                    name
                )));
            }
            if name == "mu" && ax.iter().any(|m| m.abs() >= 1.0) {
                return Err(Error::InvalidParameter(
                    "mu samples must lie strictly inside (-1, 1)".into(),
                ));
            }
        }
        Ok(Grid { names, axes })
    }

    /// Default Cartesian grid: t, x, y with 11 points each over [-1, 1].
    pub fn cartesian_default() -> Self {
        Grid {
            names: vec!["t".into(), "x".into(), "y".into()],
            axes: vec![
                linspace(-1.0, 1.0, 11),
                linspace(-1.0, 1.0, 11),
                linspace(-1.0, 1.0, 11),
            ],
        }
    }

    /// Default spherical grid: t 5 points on [0, 1], lambda 16 points on
    /// [0, 2 pi), mu 13 points on [-0.9, 0.9].
    pub fn spherical_default() -> Self {
        let n = 16;
        let lambda = (0..n)
            .map(|i| 2.0 * std::f64::consts::PI * i as f64 / n as f64)
            .collect();
        Grid {
            names: vec!["t".into(), "lambda".into(), "mu".into()],
            axes: vec![linspace(0.0, 1.0, 5), lambda, linspace(-0.9, 0.9, 13)],
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn n_points(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    /// Iterate over the full tensor product of the axes.
    pub fn points(&self) -> GridPoints<'_> {
        GridPoints {
            grid: self,
            idx: vec![0; self.axes.len()],
            done: false,
        }
    }
}

pub struct GridPoints<'a> {
    grid: &'a Grid,
    idx: Vec<usize>,
    done: bool,
}

impl Iterator for GridPoints<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let point: Vec<f64> = self
            .idx
            .iter()
            .zip(&self.grid.axes)
            .map(|(&i, ax)| ax[i])
            .collect();
        // odometer increment
        let mut k = self.idx.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.idx[k] += 1;
            if self.idx[k] < self.grid.axes[k].len() {
                break;
            }
            self.idx[k] = 0;
        }
        Some(point)
    }
}

/// Pointwise residual statistics over a grid.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub max_abs: f64,
    pub rms: f64,
    pub worst_point: Vec<f64>,
    pub n_points: usize,
}

/// Default absolute residual tolerance for exact solutions.
pub const RESIDUAL_TOL: f64 = 1e-11;

impl ResidualReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_abs <= tol
    }
}

/// The vorticity of a stream function: the Cartesian Laplacian, or the
/// spherical operator with its 1/a^2 factor. The potential kind uses the
/// Cartesian Laplacian (the -F psi term belongs to the residual, not zeta).
pub fn vorticity_of(psi: &AnalyticField, params: &EquationParams) -> Result<AnalyticField> {
    params.validate()?;
    let expected = params.expected_vars();
    if psi.vars() != &expected {
        return Err(Error::VarMismatch {
            expected: format!("{:?}", expected.names()),
            got: format!("{:?}", psi.vars().names()),
        });
    }
    let ti = psi.vars().time_index();
    let e = psi.expr();
    let zeta = match params {
        EquationParams::Cartesian { .. } | EquationParams::Potential { .. } => Expr::add(
            e.diff(1, ti).diff(1, ti),
            e.diff(2, ti).diff(2, ti),
        ),
        EquationParams::Spherical { radius, .. } => {
            // (1/a^2) [ psi_ll / (1 - mu^2) + ((1 - mu^2) psi_m)_m ]
            let mu = Expr::var(2);
            let one_minus_mu2 = Expr::sub(Expr::Const(1.0), Expr::powi(mu, 2));
            let psi_ll = e.diff(1, ti).diff(1, ti);
            let psi_m = e.diff(2, ti);
            let inner = Expr::mul(one_minus_mu2.clone(), psi_m);
            Expr::mul(
                Expr::Const(1.0 / (radius * radius)),
                Expr::add(Expr::div(psi_ll, one_minus_mu2), inner.diff(2, ti)),
            )
        }
    };
    Ok(AnalyticField::new(
        psi.vars().clone(),
        zeta,
        psi.time_fns().clone(),
    ))
}

/// The selected equation's left-hand side as a field (zero for a solution).
pub fn residual_field(psi: &AnalyticField, params: &EquationParams) -> Result<AnalyticField> {
    let zeta = vorticity_of(psi, params)?;
    let ti = psi.vars().time_index();
    let (pe, ze) = (psi.expr(), zeta.expr());
    let jacobian = Expr::sub(
        Expr::mul(pe.diff(1, ti), ze.diff(2, ti)),
        Expr::mul(pe.diff(2, ti), ze.diff(1, ti)),
    );
    let lhs = match params {
        EquationParams::Cartesian { beta } => Expr::add(
            Expr::add(ze.diff(0, ti), jacobian),
            Expr::mul(Expr::Const(*beta), pe.diff(1, ti)),
        ),
        EquationParams::Spherical { omega, radius } => {
            let a2 = radius * radius;
            Expr::add(
                Expr::add(
                    ze.diff(0, ti),
                    Expr::mul(Expr::Const(1.0 / a2), jacobian),
                ),
                Expr::mul(Expr::Const(2.0 * omega / a2), pe.diff(1, ti)),
            )
        }
        EquationParams::Potential { beta, froude } => Expr::add(
            Expr::add(
                Expr::sub(ze.diff(0, ti), Expr::mul(Expr::Const(*froude), pe.diff(0, ti))),
                jacobian,
            ),
            Expr::mul(Expr::Const(*beta), pe.diff(1, ti)),
        ),
    };
    Ok(AnalyticField::new(
        psi.vars().clone(),
        lhs,
        psi.time_fns().clone(),
    ))
}

/// Evaluate the equation's left-hand side pointwise over the grid.
pub fn residual(psi: &AnalyticField, params: &EquationParams, grid: &Grid) -> Result<ResidualReport> {
    params.validate()?;
    if grid.names() != psi.vars().names() {
        return Err(Error::VarMismatch {
            expected: format!("{:?}", psi.vars().names()),
            got: format!("{:?}", grid.names()),
        });
    }
    if matches!(params, EquationParams::Spherical { .. }) {
        if let Some(mu_axis) = grid
            .names()
            .iter()
            .position(|n| n == "mu")
            .map(|i| &grid.axes()[i])
        {
            if mu_axis.iter().any(|m| m.abs() >= 1.0) {
                return Err(Error::InvalidParameter(
                    "grid touches the pole singularity |mu| >= 1".into(),
                ));
            }
        }
    }
    let lhs = residual_field(psi, params)?;
    let mut max_abs = 0.0_f64;
    let mut worst = vec![0.0; grid.names().len()];
    let mut sum_sq = 0.0;
    let mut n = 0usize;
    for point in grid.points() {
        let v = lhs.eval(&point)?;
        if v.abs() >= max_abs {
            max_abs = v.abs();
            worst = point;
        }
        sum_sq += v * v;
        n += 1;
    }
    Ok(ResidualReport {
        max_abs,
        rms: (sum_sq / n as f64).sqrt(),
        worst_point: worst,
        n_points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_derivative_examples() {
        // f = x*y: df/dx at (0,2,3) = 3
        let f = AnalyticField::cartesian(Expr::mul(Expr::var(1), Expr::var(2)));
        assert_eq!(
            f.eval_derivative(&[0.0, 2.0, 3.0], &[0, 1, 0]).unwrap(),
            3.0
        );
        // f = sin x: d2/dx2 at x=0 is 0
        let f = AnalyticField::cartesian(Expr::sin(Expr::var(1)));
        assert_eq!(
            f.eval_derivative(&[0.0, 0.0, 0.0], &[0, 2, 0]).unwrap(),
            0.0
        );
        // f = x^2 y: d3/(dx2 dy) = 2 everywhere
        let f = AnalyticField::cartesian(Expr::mul(Expr::powi(Expr::var(1), 2), Expr::var(2)));
        assert_eq!(
            f.eval_derivative(&[0.0, 1.0, 1.0], &[0, 2, 1]).unwrap(),
            2.0
        );
        // order cap
        assert!(f.eval_derivative(&[0.0, 1.0, 1.0], &[2, 2, 0]).is_err());
    }

    #[test]
    fn vorticity_examples() {
        let params = EquationParams::Cartesian { beta: 1.0 };
        // psi = x^2 + y^2 -> zeta = 4
        let psi = AnalyticField::cartesian(Expr::add(
            Expr::powi(Expr::var(1), 2),
            Expr::powi(Expr::var(2), 2),
        ));
        let zeta = vorticity_of(&psi, &params).unwrap();
        assert_eq!(zeta.eval(&[0.3, 0.5, -0.2]).unwrap(), 4.0);

        // psi = sin(x + y) -> zeta = -2 sin(x + y)
        let psi = AnalyticField::cartesian(Expr::sin(Expr::add(Expr::var(1), Expr::var(2))));
        let zeta = vorticity_of(&psi, &params).unwrap();
        let p = [0.0, 0.4, 0.1];
        assert!((zeta.eval(&p).unwrap() + 2.0 * (0.5_f64).sin()).abs() < 1e-14);

        // spherical, a = 1, psi = mu -> zeta = -2 mu
        let psi = AnalyticField::spherical(Expr::var(2));
        let zeta = vorticity_of(
            &psi,
            &EquationParams::Spherical {
                omega: 0.0,
                radius: 1.0,
            },
        )
        .unwrap();
        let p = [0.0, 1.0, 0.3];
        assert!((zeta.eval(&p).unwrap() + 0.6).abs() < 1e-14);
    }

    #[test]
    fn residual_examples() {
        // constant field: residual 0
        let psi = AnalyticField::cartesian(Expr::Const(3.0));
        let r = residual(
            &psi,
            &EquationParams::Cartesian { beta: 1.0 },
            &Grid::cartesian_default(),
        )
        .unwrap();
        assert_eq!(r.max_abs, 0.0);
        assert_eq!(r.n_points, 11 * 11 * 11);

        // spherical zonal steady field: residual 0
        let psi = AnalyticField::spherical(Expr::powi(Expr::var(2), 2));
        let r = residual(
            &psi,
            &EquationParams::Spherical {
                omega: 0.0,
                radius: 1.0,
            },
            &Grid::spherical_default(),
        )
        .unwrap();
        assert!(r.max_abs < 1e-13, "max_abs = {}", r.max_abs);

        // psi = sin(x): residual = beta cos(x); max over default grid is 1 at x = 0
        let psi = AnalyticField::cartesian(Expr::sin(Expr::var(1)));
        let r = residual(
            &psi,
            &EquationParams::Cartesian { beta: 1.0 },
            &Grid::cartesian_default(),
        )
        .unwrap();
        assert!((r.max_abs - 1.0).abs() < 1e-14);
        assert!(r.rms <= r.max_abs && r.rms > 0.0);
        assert_eq!(r.worst_point[1], 0.0);
    }

    #[test]
    fn residual_rejects_pole_touching_grid() {
        let psi = AnalyticField::spherical(Expr::var(2));
        let grid = Grid::new(
            vec!["t".into(), "lambda".into(), "mu".into()],
            vec![vec![0.0], vec![0.0], vec![-0.5, 0.5]],
        )
        .unwrap();
        assert!(residual(
            &psi,
            &EquationParams::Spherical {
                omega: 0.0,
                radius: 1.0
            },
            &grid
        )
        .is_ok());
        // Grid construction itself refuses |mu| >= 1.
        assert!(Grid::new(
            vec!["t".into(), "lambda".into(), "mu".into()],
            vec![vec![0.0], vec![0.0], vec![-1.0, 0.5]],
        )
        .is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec!["x".into()], vec![vec![0.0, 0.0]]).is_err());
        assert!(Grid::new(vec!["x".into()], vec![vec![]]).is_err());
        assert!(Grid::new(vec!["x".into()], vec![vec![0.0, 1.0]]).is_ok());
    }
}

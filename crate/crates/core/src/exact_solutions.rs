//! Exact solution families of the Cartesian vorticity equation.
//!
//! Three constructors, each verified against the pointwise residual:
//!
//! - [`rossby_wave`]: psi = A sin(kx + ly - sigma t) with the dispersion
//!   relation sigma = -beta k / (k^2 + l^2) obtained by annihilating the
//!   residual (frozen here as [`rossby_dispersion`] with a regression test);
//! - [`klein_gordon_lift`]: solutions lifted from the Klein-Gordon equation
//!   W_pq + beta W = 0 through the invariants p = x - f(t) y, q = t of the
//!   shear symmetry, with the time rescaling q~ = int dt/(1+f^2);
//! - [`partially_invariant`]: the two families obtained from the ansatz
//!   zeta = zeta(t, y), split on whether the absolute vorticity
//!   eta = zeta + beta y depends on y.

use crate::error::{Error, Result};
use crate::expr::{Expr, TimeFnSet, VarSet};
use crate::fields::{AnalyticField, EquationParams, Grid, ResidualReport};
use crate::timefn::TimeFunction;
use std::sync::{Arc, OnceLock};

/// Dispersion relation of the Rossby wave: sigma = -beta k / (k^2 + l^2).
pub fn rossby_dispersion(k: f64, l: f64, beta: f64) -> f64 {
    -beta * k / (k * k + l * l)
}

/// psi = A sin(kx + ly - sigma t), an exact solution for every (k, l) != 0.
pub fn rossby_wave(amplitude: f64, k: f64, l: f64, beta: f64) -> Result<AnalyticField> {
    if k == 0.0 && l == 0.0 {
        return Err(Error::InvalidParameter(
            "rossby wave needs k^2 + l^2 > 0".into(),
        ));
    }
    let sigma = rossby_dispersion(k, l, beta);
    let phase = Expr::sub(
        Expr::add(
            Expr::mul(Expr::Const(k), Expr::var(1)),
            Expr::mul(Expr::Const(l), Expr::var(2)),
        ),
        Expr::mul(Expr::Const(sigma), Expr::var(0)),
    );
    Ok(AnalyticField::cartesian(Expr::mul(
        Expr::Const(amplitude),
        Expr::sin(phase),
    )))
}

/// Data for the Klein-Gordon solution W(p~, q~) used by the lift.
#[derive(Clone, Debug)]
pub enum KgSolutionSpec {
    /// W = A sin(alpha p~ + gamma q~) with gamma = beta / alpha enforced.
    Harmonic { amplitude: f64, alpha: f64 },
    /// A user-supplied two-variable field W(p, q) satisfying W_pq + beta W = 0.
    Supplied(AnalyticField),
}

fn gauss_legendre_32() -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CACHE.get_or_init(|| {
        let n = 32usize;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                // Legendre recurrence for P_n(x) and P'_n(x)
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

/// Integrate a smooth function from 0 to t with 32-node panels of unit length.
fn integrate_from_zero(f: &(dyn Fn(f64) -> f64 + Sync), t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre_32();
    let sign = t.signum();
    let span = t.abs();
    let panels = span.ceil().max(1.0) as usize;
    let width = span / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let a = p as f64 * width;
        let half = width / 2.0;
        let mid = a + half;
        for (x, w) in nodes.iter().zip(weights) {
            acc += w * half * f(sign * (mid + half * x));
        }
    }
    sign * acc
}

/// The rescaled time q~(t) = int_0^t ds / (1 + f(s)^2) as a time function
/// with exact derivative closures to order 3. The value uses a closed form
/// for constant and linear f and Gauss-Legendre quadrature otherwise.
pub fn kg_time_rescale(f: &TimeFunction) -> TimeFunction {
    let value: Arc<dyn Fn(f64) -> f64 + Send + Sync> = match f.as_poly() {
        Some(p) if p.len() <= 1 => {
            let c = p.first().copied().unwrap_or(0.0);
            let d = 1.0 + c * c;
            Arc::new(move |t| t / d)
        }
        Some(p) if p.len() == 2 => {
            let (b, a) = (p[0], p[1]);
            Arc::new(move |t| ((a * t + b).atan() - b.atan()) / a)
        }
        _ => {
            let f0 = f.clone();
            Arc::new(move |t| integrate_from_zero(&|s| 1.0 / (1.0 + f0.value(s).powi(2)), t))
        }
    };
    let fc = f.clone();
    TimeFunction::from_order_closure(
        "qt",
        3,
        Arc::new(move |order, t| {
            if order == 0 {
                return value(t);
            }
            let f0 = fc.value(t);
            let d = 1.0 + f0 * f0;
            match order {
                1 => 1.0 / d,
                2 => {
                    let dp = 2.0 * f0 * fc.eval(1, t).unwrap_or(f64::NAN);
                    -dp / (d * d)
                }
                _ => {
                    let f1 = fc.eval(1, t).unwrap_or(f64::NAN);
                    let f2 = fc.eval(2, t).unwrap_or(f64::NAN);
                    let dp = 2.0 * f0 * f1;
                    let dpp = 2.0 * (f1 * f1 + f0 * f2);
                    -dpp / (d * d) + 2.0 * dp * dp / (d * d * d)
                }
            }
        }),
    )
}

/// Lift a Klein-Gordon solution to a solution psi(t, x, y) of the Cartesian
/// vorticity equation:
///
/// psi = W(p~, q~)/(1 + f^2) + (f''/beta) p - h/beta
///       - (2 f f' f'' + (1 + f^2) f''')/beta^2 - (f'/2) y^2,
///
/// with p = p~ = x - f(t) y and q~ = int dt/(1 + f^2). The 1/(1 + f^2)
/// factor converts the reduced shear equation into the plain Klein-Gordon
/// form; for constant f it is an amplitude rescale. `h` is a free gauge
/// function entering only through the x, y-independent term.
pub fn klein_gordon_lift(
    f: &TimeFunction,
    h: &TimeFunction,
    beta: f64,
    spec: &KgSolutionSpec,
) -> Result<AnalyticField> {
    if beta == 0.0 {
        return Err(Error::InvalidParameter(
            "the Klein-Gordon reduction is singular at beta = 0".into(),
        ));
    }
    let mut reg = TimeFnSet::new();
    reg.insert("f".into(), f.clone());
    reg.insert("h".into(), h.clone());
    reg.insert("qt".into(), kg_time_rescale(f));

    let tf = |name: &str, order: u32| Expr::time_fn_deriv(name, order);
    let (x, y) = (Expr::var(1), Expr::var(2));
    let p = Expr::sub(x, Expr::mul(tf("f", 0), y.clone()));
    let qt = tf("qt", 0);

    let w = match spec {
        KgSolutionSpec::Harmonic { amplitude, alpha } => {
            if *alpha == 0.0 {
                return Err(Error::InvalidParameter(
                    "harmonic Klein-Gordon data needs alpha != 0".into(),
                ));
            }
            let gamma = beta / alpha;
            Expr::mul(
                Expr::Const(*amplitude),
                Expr::sin(Expr::add(
                    Expr::mul(Expr::Const(*alpha), p.clone()),
                    Expr::mul(Expr::Const(gamma), qt),
                )),
            )
        }
        KgSolutionSpec::Supplied(field) => {
            if field.vars().len() != 2 {
                return Err(Error::VarMismatch {
                    expected: "two-variable Klein-Gordon field W(p, q)".into(),
                    got: format!("{:?}", field.vars().names()),
                });
            }
            for (k, v) in field.time_fns() {
                reg.insert(k.clone(), v.clone());
            }
            field.expr().substitute(&[p.clone(), qt])
        }
    };

    let one_plus_f2 = Expr::add(Expr::Const(1.0), Expr::powi(tf("f", 0), 2));
    let v_tilde = Expr::div(w, one_plus_f2.clone());
    let corr_shear = Expr::mul(Expr::div(tf("f", 2), Expr::Const(beta)), p);
    let corr_gauge = Expr::neg(Expr::div(tf("h", 0), Expr::Const(beta)));
    // ((1 + f^2) f'')' = 2 f f' f'' + (1 + f^2) f'''
    let corr_third = Expr::neg(Expr::div(
        Expr::add(
            Expr::mul(
                Expr::Const(2.0),
                Expr::mul(tf("f", 0), Expr::mul(tf("f", 1), tf("f", 2))),
            ),
            Expr::mul(one_plus_f2, tf("f", 3)),
        ),
        Expr::Const(beta * beta),
    ));
    let corr_shear_profile = Expr::neg(Expr::mul(
        Expr::mul(Expr::Const(0.5), tf("f", 1)),
        Expr::powi(y, 2),
    ));

    let psi = Expr::add(
        Expr::add(Expr::add(v_tilde, corr_shear), Expr::add(corr_gauge, corr_third)),
        corr_shear_profile,
    );
    Ok(AnalyticField::new(VarSet::cartesian(), psi, reg))
}

/// Specification of a partially-invariant solution.
#[derive(Clone, Debug)]
pub enum PartialInvariantSpec {
    /// eta_y = 0: psi = Psi(t,x,y) - (beta/6) y^3 + (eta0/2) y^2 with
    /// harmonic Psi and constant absolute vorticity eta0.
    EtaConstant {
        harmonic: AnalyticField,
        eta0: f64,
    },
    /// eta_y != 0: psi = F(omega)/(g1)^2 - (beta/6) y^3
    /// - ((g1' y + g0') / g1) x + f1 y + f0 with omega = g1(t) y + g0(t).
    EtaGeneral {
        profile: AnalyticField,
        g1: TimeFunction,
        g0: TimeFunction,
        f1: TimeFunction,
        f0: TimeFunction,
    },
}

const HARMONIC_TOL: f64 = 1e-10;

fn check_harmonic(field: &AnalyticField) -> Result<()> {
    let ti = field.vars().time_index();
    let lap = Expr::add(
        field.expr().diff(1, ti).diff(1, ti),
        field.expr().diff(2, ti).diff(2, ti),
    );
    let lap_field = AnalyticField::new(field.vars().clone(), lap, field.time_fns().clone());
    let grid = Grid::cartesian_default();
    for point in grid.points() {
        let v = lap_field.eval(&point)?;
        if v.abs() > HARMONIC_TOL {
            return Err(Error::InvalidParameter(format!(
                "field is not harmonic: Laplacian = {:.3e} at {:?}",
                v, point
            )));
        }
    }
    Ok(())
}

/// Assemble the partially-invariant solution for the given case.
pub fn partially_invariant(spec: &PartialInvariantSpec, beta: f64) -> Result<AnalyticField> {
    match spec {
        PartialInvariantSpec::EtaConstant { harmonic, eta0 } => {
            if harmonic.vars() != &VarSet::cartesian() {
                return Err(Error::VarMismatch {
                    expected: "harmonic field over (t, x, y)".into(),
                    got: format!("{:?}", harmonic.vars().names()),
                });
            }
            check_harmonic(harmonic)?;
            let y = Expr::var(2);
            let expr = Expr::add(
                harmonic.expr().clone(),
                Expr::add(
                    Expr::mul(Expr::Const(-beta / 6.0), Expr::powi(y.clone(), 3)),
                    Expr::mul(Expr::Const(eta0 / 2.0), Expr::powi(y, 2)),
                ),
            );
            Ok(AnalyticField::new(
                VarSet::cartesian(),
                expr,
                harmonic.time_fns().clone(),
            ))
        }
        PartialInvariantSpec::EtaGeneral {
            profile,
            g1,
            g0,
            f1,
            f0,
        } => {
            if profile.vars().len() != 1 {
                return Err(Error::VarMismatch {
                    expected: "one-variable profile F(omega)".into(),
                    got: format!("{:?}", profile.vars().names()),
                });
            }
            // g1 must not vanish on the evaluation window
            for &t in &Grid::cartesian_default().axes()[0] {
                if g1.value(t).abs() < 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "g1 vanishes near t = {}",
                        t
                    )));
                }
            }
            let mut reg = TimeFnSet::new();
            reg.insert("g1".into(), g1.clone());
            reg.insert("g0".into(), g0.clone());
            reg.insert("f1".into(), f1.clone());
            reg.insert("f0".into(), f0.clone());
            for (k, v) in profile.time_fns() {
                reg.insert(k.clone(), v.clone());
            }
            let tf = |name: &str, order: u32| Expr::time_fn_deriv(name, order);
            let (x, y) = (Expr::var(1), Expr::var(2));
            let omega = Expr::add(Expr::mul(tf("g1", 0), y.clone()), tf("g0", 0));
            let f_of_omega = profile.expr().substitute(&[omega]);
            let expr = Expr::add(
                Expr::add(
                    Expr::div(f_of_omega, Expr::powi(tf("g1", 0), 2)),
                    Expr::mul(Expr::Const(-beta / 6.0), Expr::powi(y.clone(), 3)),
                ),
                Expr::add(
                    Expr::neg(Expr::mul(
                        Expr::div(
                            Expr::add(Expr::mul(tf("g1", 1), y.clone()), tf("g0", 1)),
                            tf("g1", 0),
                        ),
                        x,
                    )),
                    Expr::add(Expr::mul(tf("f1", 0), y), tf("f0", 0)),
                ),
            );
            Ok(AnalyticField::new(VarSet::cartesian(), expr, reg))
        }
    }
}

/// The eta_y = 0 ansatz with a time-dependent eta(t). This is generally NOT
/// a solution (the residual equals eta'(t)); the field is returned together
/// with its residual report instead of being asserted exact.
pub fn eta_time_dependent(
    harmonic: &AnalyticField,
    eta: &TimeFunction,
    beta: f64,
) -> Result<(AnalyticField, ResidualReport)> {
    check_harmonic(harmonic)?;
    let mut reg = harmonic.time_fns().clone();
    reg.insert("eta".into(), eta.clone());
    let y = Expr::var(2);
    let expr = Expr::add(
        harmonic.expr().clone(),
        Expr::add(
            Expr::mul(Expr::Const(-beta / 6.0), Expr::powi(y.clone(), 3)),
            Expr::mul(
                Expr::mul(Expr::Const(0.5), Expr::time_fn("eta")),
                Expr::powi(y, 2),
            ),
        ),
    );
    let field = AnalyticField::new(VarSet::cartesian(), expr, reg);
    let report = crate::fields::residual(
        &field,
        &EquationParams::Cartesian { beta },
        &Grid::cartesian_default(),
    )?;
    Ok((field, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{residual, RESIDUAL_TOL};

    fn cart_residual(psi: &AnalyticField, beta: f64) -> ResidualReport {
        residual(
            psi,
            &EquationParams::Cartesian { beta },
            &Grid::cartesian_default(),
        )
        .unwrap()
    }

    #[test]
    fn dispersion_relation_values() {
        assert_eq!(rossby_dispersion(1.0, 1.0, 1.0), -0.5);
        assert_eq!(rossby_dispersion(1.0, 0.0, 0.0), 0.0);
        assert_eq!(rossby_dispersion(1.0, 2.0, 1.0), -0.2);
    }

    #[test]
    fn dispersion_is_the_unique_residual_annihilator() {
        // regression: the frozen formula kills the residual, a perturbed
        // sigma does not
        let psi = rossby_wave(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(cart_residual(&psi, 1.0).max_abs <= 1e-13);

        let sigma_wrong = rossby_dispersion(1.0, 1.0, 1.0) + 0.1;
        let phase = Expr::sub(
            Expr::add(Expr::var(1), Expr::var(2)),
            Expr::mul(Expr::Const(sigma_wrong), Expr::var(0)),
        );
        let bad = AnalyticField::cartesian(Expr::sin(phase));
        assert!(cart_residual(&bad, 1.0).max_abs > 1e-2);
    }

    #[test]
    fn rossby_wave_examples() {
        // steady shear wave: beta = 0, l = 0
        let psi = rossby_wave(1.0, 1.0, 0.0, 0.0).unwrap();
        let r = cart_residual(&psi, 0.0);
        assert_eq!(r.max_abs, 0.0);

        let psi = rossby_wave(2.0, 1.0, 2.0, 1.0).unwrap();
        let r = cart_residual(&psi, 1.0);
        assert!(r.max_abs <= 1e-12, "max_abs = {}", r.max_abs);

        assert!(rossby_wave(1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn rossby_wave_depends_on_phase_only() {
        let (a, k, l, beta) = (1.3, 0.8, -1.1, 0.7);
        let psi = rossby_wave(a, k, l, beta).unwrap();
        let sigma = rossby_dispersion(k, l, beta);
        // move along a phase level set: k dx + l dy - sigma dt = 0
        let base = [0.3, 0.4, -0.2];
        let v0 = psi.eval(&base).unwrap();
        for (dt, dx) in [(0.5, 0.1), (-0.7, 0.3), (1.1, -0.6)] {
            let dy = (sigma * dt - k * dx) / l;
            let p = [base[0] + dt, base[1] + dx, base[2] + dy];
            assert!((psi.eval(&p).unwrap() - v0).abs() <= 1e-12);
        }
    }

    #[test]
    fn kg_lift_constant_f_examples() {
        // f = 0, h = 0, beta = 1, alpha = 1: psi = sin(x + t)
        let psi = klein_gordon_lift(
            &TimeFunction::zero(),
            &TimeFunction::zero(),
            1.0,
            &KgSolutionSpec::Harmonic {
                amplitude: 1.0,
                alpha: 1.0,
            },
        )
        .unwrap();
        for p in [[0.0_f64, 0.0, 0.5], [0.3, -0.2, 0.9]] {
            assert!((psi.eval(&p).unwrap() - (p[1] + p[0]).sin()).abs() < 1e-14);
        }
        assert!(cart_residual(&psi, 1.0).max_abs <= 1e-13);

        // f = 1: psi = sin((x - y) + t/2) / 2
        let psi = klein_gordon_lift(
            &TimeFunction::constant(1.0),
            &TimeFunction::zero(),
            1.0,
            &KgSolutionSpec::Harmonic {
                amplitude: 1.0,
                alpha: 1.0,
            },
        )
        .unwrap();
        for p in [[0.4_f64, 0.1, -0.3], [1.0, 0.6, 0.2]] {
            let expect = ((p[1] - p[2]) + p[0] / 2.0).sin() / 2.0;
            assert!((psi.eval(&p).unwrap() - expect).abs() < 1e-14);
        }
        assert!(cart_residual(&psi, 1.0).max_abs <= 1e-13);
    }

    #[test]
    fn kg_lift_linear_f_solves_equation() {
        let psi = klein_gordon_lift(
            &TimeFunction::identity(),
            &TimeFunction::zero(),
            1.0,
            &KgSolutionSpec::Harmonic {
                amplitude: 1.0,
                alpha: 1.0,
            },
        )
        .unwrap();
        let r = cart_residual(&psi, 1.0);
        assert!(r.max_abs <= RESIDUAL_TOL, "max_abs = {:.3e}", r.max_abs);
    }

    #[test]
    fn kg_lift_general_f_uses_quadrature() {
        // f = sin t exercises the quadrature branch and all correction terms
        let f = TimeFunction::sinusoid("f", 1.0, 1.0, 0.0);
        let psi = klein_gordon_lift(
            &f,
            &TimeFunction::zero(),
            2.0,
            &KgSolutionSpec::Harmonic {
                amplitude: 0.7,
                alpha: 1.3,
            },
        )
        .unwrap();
        let r = cart_residual(&psi, 2.0);
        assert!(r.max_abs <= RESIDUAL_TOL, "max_abs = {:.3e}", r.max_abs);
    }

    #[test]
    fn kg_gauge_function_shifts_by_constant() {
        let base = klein_gordon_lift(
            &TimeFunction::zero(),
            &TimeFunction::zero(),
            1.0,
            &KgSolutionSpec::Harmonic {
                amplitude: 1.0,
                alpha: 2.0,
            },
        )
        .unwrap();
        let shifted = klein_gordon_lift(
            &TimeFunction::zero(),
            &TimeFunction::constant(3.0), // h = beta c with beta = 1, c = 3
            1.0,
            &KgSolutionSpec::Harmonic {
                amplitude: 1.0,
                alpha: 2.0,
            },
        )
        .unwrap();
        let p = [0.2, 0.5, -0.1];
        assert!((shifted.eval(&p).unwrap() - (base.eval(&p).unwrap() - 3.0)).abs() < 1e-14);
        assert!(cart_residual(&shifted, 1.0).max_abs <= 1e-13);
    }

    #[test]
    fn kg_lift_rejects_zero_beta() {
        assert!(klein_gordon_lift(
            &TimeFunction::zero(),
            &TimeFunction::zero(),
            0.0,
            &KgSolutionSpec::Harmonic {
                amplitude: 1.0,
                alpha: 1.0
            }
        )
        .is_err());
    }

    #[test]
    fn kg_supplied_solution_branch() {
        // W(p, q) = sin(2 p + q/2) solves W_pq + W = 0 for beta = 1
        let vars = VarSet::new(vec!["p".into(), "q".into()], None).unwrap();
        let w = AnalyticField::new(
            vars,
            Expr::sin(Expr::add(
                Expr::mul(Expr::Const(2.0), Expr::var(0)),
                Expr::mul(Expr::Const(0.5), Expr::var(1)),
            )),
            TimeFnSet::new(),
        );
        let psi = klein_gordon_lift(
            &TimeFunction::constant(0.5),
            &TimeFunction::zero(),
            1.0,
            &KgSolutionSpec::Supplied(w),
        )
        .unwrap();
        assert!(cart_residual(&psi, 1.0).max_abs <= RESIDUAL_TOL);
    }

    #[test]
    fn kg_matches_rossby_for_constant_f() {
        // matched parameters: k = alpha, l = -alpha c, amplitude A/(1+c^2)
        let (a, alpha, c, beta) = (1.0, 1.5, 1.0, 2.0);
        let lift = klein_gordon_lift(
            &TimeFunction::constant(c),
            &TimeFunction::zero(),
            beta,
            &KgSolutionSpec::Harmonic {
                amplitude: a,
                alpha,
            },
        )
        .unwrap();
        let wave = rossby_wave(a / (1.0 + c * c), alpha, -alpha * c, beta).unwrap();
        for p in [[0.0, 0.0, 0.0], [0.3, 0.7, -0.4], [1.0, -0.5, 0.2]] {
            assert!((lift.eval(&p).unwrap() - wave.eval(&p).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn partially_invariant_eta_constant() {
        // Psi = x^2 - y^2 harmonic, eta0 = 0, beta = 1
        let psi_h = AnalyticField::cartesian(Expr::sub(
            Expr::powi(Expr::var(1), 2),
            Expr::powi(Expr::var(2), 2),
        ));
        let psi = partially_invariant(
            &PartialInvariantSpec::EtaConstant {
                harmonic: psi_h,
                eta0: 0.0,
            },
            1.0,
        )
        .unwrap();
        assert!(cart_residual(&psi, 1.0).max_abs <= 1e-13);

        // non-harmonic Psi rejected
        let bad = AnalyticField::cartesian(Expr::powi(Expr::var(1), 2));
        assert!(partially_invariant(
            &PartialInvariantSpec::EtaConstant {
                harmonic: bad,
                eta0: 0.0
            },
            1.0
        )
        .is_err());
    }

    #[test]
    fn partially_invariant_eta_general_examples() {
        let one_var = |e: Expr| {
            AnalyticField::new(
                VarSet::new(vec!["omega".into()], None).unwrap(),
                e,
                TimeFnSet::new(),
            )
        };
        // F = omega^4, g1 = 1, g0 = 0, beta = 0: psi = y^4 zonal flow
        let psi = partially_invariant(
            &PartialInvariantSpec::EtaGeneral {
                profile: one_var(Expr::powi(Expr::var(0), 4)),
                g1: TimeFunction::constant(1.0),
                g0: TimeFunction::zero(),
                f1: TimeFunction::zero(),
                f0: TimeFunction::zero(),
            },
            0.0,
        )
        .unwrap();
        assert!((psi.eval(&[0.1, 0.7, 0.5]).unwrap() - 0.0625).abs() < 1e-14);
        assert_eq!(cart_residual(&psi, 0.0).max_abs, 0.0);

        // F = sin(omega), g0 = t, beta = 1: psi = sin(y + t) - y^3/6 - x
        let psi = partially_invariant(
            &PartialInvariantSpec::EtaGeneral {
                profile: one_var(Expr::sin(Expr::var(0))),
                g1: TimeFunction::constant(1.0),
                g0: TimeFunction::identity(),
                f1: TimeFunction::zero(),
                f0: TimeFunction::zero(),
            },
            1.0,
        )
        .unwrap();
        let p = [0.4_f64, 0.2, 0.6];
        let expect = (p[2] + p[0]).sin() - p[2].powi(3) / 6.0 - p[1];
        assert!((psi.eval(&p).unwrap() - expect).abs() < 1e-14);
        assert!(cart_residual(&psi, 1.0).max_abs <= 1e-12);
    }

    #[test]
    fn partially_invariant_general_arbitrary_data_still_solves() {
        // arbitrary profile and time functions: the family solves identically
        let profile = AnalyticField::new(
            VarSet::new(vec!["omega".into()], None).unwrap(),
            Expr::mul(
                Expr::powi(Expr::var(0), 3),
                Expr::exp(Expr::mul(Expr::Const(-0.3), Expr::var(0))),
            ),
            TimeFnSet::new(),
        );
        let psi = partially_invariant(
            &PartialInvariantSpec::EtaGeneral {
                profile,
                g1: TimeFunction::polynomial(vec![2.0, 0.5]), // 2 + t/2, nonvanishing on [-1,1]
                g0: TimeFunction::sinusoid("g0", 0.4, 2.0, 0.3),
                f1: TimeFunction::polynomial(vec![0.0, 0.0, 1.0]),
                f0: TimeFunction::exponential("f0", 1.0, 0.5),
            },
            0.8,
        )
        .unwrap();
        let r = cart_residual(&psi, 0.8);
        assert!(r.max_abs <= RESIDUAL_TOL, "max_abs = {:.3e}", r.max_abs);
    }

    #[test]
    fn eta_general_rejects_vanishing_g1() {
        let profile = AnalyticField::new(
            VarSet::new(vec!["omega".into()], None).unwrap(),
            Expr::var(0),
            TimeFnSet::new(),
        );
        assert!(partially_invariant(
            &PartialInvariantSpec::EtaGeneral {
                profile,
                g1: TimeFunction::identity(), // vanishes at t = 0
                g0: TimeFunction::zero(),
                f1: TimeFunction::zero(),
                f0: TimeFunction::zero(),
            },
            1.0
        )
        .is_err());
    }

    #[test]
    fn time_dependent_eta_reports_nonzero_residual() {
        let harmonic = AnalyticField::cartesian(Expr::mul(Expr::var(1), Expr::var(2)));
        let eta = TimeFunction::identity(); // eta(t) = t, eta' = 1
        let (_, report) = eta_time_dependent(&harmonic, &eta, 1.0).unwrap();
        // residual is exactly eta'(t) = 1
        assert!((report.max_abs - 1.0).abs() < 1e-12);

        let (_, report) = eta_time_dependent(&harmonic, &TimeFunction::constant(2.0), 1.0).unwrap();
        assert!(report.max_abs <= 1e-13);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        // for f = t the closed form is atan(t)
        let f = TimeFunction::polynomial(vec![0.0, 1.0, 0.0]); // shape has 3 coeffs? trimmed to [0,1]
        let qt = kg_time_rescale(&f);
        for t in [-1.5_f64, -0.3, 0.0, 0.4, 2.7] {
            assert!((qt.value(t) - t.atan()).abs() < 1e-13);
        }
        // generic branch vs known integral: f = sqrt(3) constant via closure
        let c = 3.0_f64.sqrt();
        let fc = TimeFunction::from_order_closure(
            "c",
            3,
            Arc::new(move |order, _| if order == 0 { c } else { 0.0 }),
        );
        let qt = kg_time_rescale(&fc);
        for t in [0.5_f64, 1.9] {
            assert!((qt.value(t) - t / 4.0).abs() < 1e-13);
        }
    }
}

//! Rotation-cancelling point transformations.
//!
//! Two printed maps relate rotating and non-rotating forms of the vorticity
//! equations ("forward" always maps the rotating frame to the non-rotating
//! tilde frame):
//!
//! - spherical de-rotation:   t~ = t, mu~ = mu, lambda~ = lambda + Omega t,
//!   psi~ = psi - Omega mu;
//! - potential translation:   t~ = t, x~ = x + (beta/F) t, y~ = y,
//!   psi~ = psi - (beta/F) y.
//!
//! A solution of the non-rotating equation transported through the inverse
//! map solves the rotating equation, and conversely; `verify_equivalence`
//! checks both residuals numerically.

use crate::error::{Error, Result};
use crate::expr::{Expr, TimeFnSet, VarSet};
use crate::fields::{residual, AnalyticField, EquationParams, Grid, ResidualReport};
use crate::transform::{CoordMap, MapKind, PointTransformation};
use serde::Serialize;

/// The spherical de-rotation map for angular velocity `omega`.
pub fn spherical_derotation(omega: f64) -> PointTransformation {
    if omega == 0.0 {
        return PointTransformation::identity(VarSet::spherical());
    }
    let forward = CoordMap {
        space: [
            Expr::var(0),
            Expr::add(Expr::var(1), Expr::mul(Expr::Const(omega), Expr::var(0))),
            Expr::var(2),
        ],
        psi_scale: Expr::Const(1.0),
        psi_shift: Expr::neg(Expr::mul(Expr::Const(omega), Expr::var(2))),
    };
    let inverse = CoordMap {
        space: [
            Expr::var(0),
            Expr::sub(Expr::var(1), Expr::mul(Expr::Const(omega), Expr::var(0))),
            Expr::var(2),
        ],
        psi_scale: Expr::Const(1.0),
        psi_shift: Expr::mul(Expr::Const(omega), Expr::var(2)),
    };
    PointTransformation::analytic(
        MapKind::SphericalDerotation,
        format!("spherical de-rotation (omega = {})", omega),
        VarSet::spherical(),
        forward,
        inverse,
        TimeFnSet::new(),
    )
}

/// The beta-cancelling translation of the potential vorticity equation.
pub fn potential_translation(beta: f64, froude: f64) -> Result<PointTransformation> {
    if froude == 0.0 {
        return Err(Error::InvalidParameter(
            "potential translation undefined for F = 0".into(),
        ));
    }
    let c = beta / froude;
    let forward = CoordMap {
        space: [
            Expr::var(0),
            Expr::add(Expr::var(1), Expr::mul(Expr::Const(c), Expr::var(0))),
            Expr::var(2),
        ],
        psi_scale: Expr::Const(1.0),
        psi_shift: Expr::neg(Expr::mul(Expr::Const(c), Expr::var(2))),
    };
    let inverse = CoordMap {
        space: [
            Expr::var(0),
            Expr::sub(Expr::var(1), Expr::mul(Expr::Const(c), Expr::var(0))),
            Expr::var(2),
        ],
        psi_scale: Expr::Const(1.0),
        psi_shift: Expr::mul(Expr::Const(c), Expr::var(2)),
    };
    Ok(PointTransformation::analytic(
        MapKind::PotentialTranslation,
        format!("potential translation (beta = {}, F = {})", beta, froude),
        VarSet::cartesian(),
        forward,
        inverse,
        TimeFnSet::new(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Rotating frame to non-rotating tilde frame.
    Forward,
    /// Non-rotating tilde frame back to the rotating frame.
    Inverse,
}

/// Transport a field through the map in the given direction.
pub fn transport_solution(
    map: &PointTransformation,
    psi: &AnalyticField,
    direction: Direction,
) -> Result<AnalyticField> {
    match direction {
        Direction::Forward => map.map_field(psi),
        Direction::Inverse => map.inverse().map_field(psi),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    /// Residual of the given field under the non-rotating equation.
    pub nonrotating: ResidualReport,
    /// Residual of the inverse-transported field under the rotating equation.
    pub rotating: ResidualReport,
    pub tolerance: f64,
    pub pass: bool,
}

pub const EQUIVALENCE_TOL: f64 = 1e-10;

/// Check that `psi` solves the non-rotating equation and that its inverse
/// transport solves the rotating one, both on the same grid.
pub fn verify_equivalence(
    map: &PointTransformation,
    psi_nonrotating: &AnalyticField,
    params_rotating: &EquationParams,
    params_nonrotating: &EquationParams,
    grid: &Grid,
) -> Result<EquivalenceReport> {
    let nonrot = residual(psi_nonrotating, params_nonrotating, grid)?;
    let transported = transport_solution(map, psi_nonrotating, Direction::Inverse)?;
    let rot = residual(&transported, params_rotating, grid)?;
    let pass = nonrot.max_abs <= EQUIVALENCE_TOL && rot.max_abs <= EQUIVALENCE_TOL;
    Ok(EquivalenceReport {
        nonrotating: nonrot,
        rotating: rot,
        tolerance: EQUIVALENCE_TOL,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derotation_with_zero_omega_is_identity() {
        let t = spherical_derotation(0.0);
        assert_eq!(t.kind, MapKind::Identity);
    }

    #[test]
    fn printed_formula_arithmetic() {
        // potential map, beta = 2, F = 1: (1, 0, 0, 0) -> (1, 2, 0, 0)
        let t = potential_translation(2.0, 1.0).unwrap();
        let q = t.apply(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(q, [1.0, 2.0, 0.0, 0.0]);

        // derotation, Omega = 1: (pi, 0, 1/2, 3) -> (pi, pi, 1/2, 2.5)
        let t = spherical_derotation(1.0);
        let q = t
            .apply(&[std::f64::consts::PI, 0.0, 0.5, 3.0])
            .unwrap();
        assert!((q[1] - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(q[2], 0.5);
        assert_eq!(q[3], 2.5);
    }

    #[test]
    fn potential_translation_requires_nonzero_f() {
        assert!(potential_translation(1.0, 0.0).is_err());
    }

    #[test]
    fn forward_inverse_identity_at_100_random_points() {
        let mut rng = crate::linalg::SplitMix64(0x1de57);
        let maps = [
            spherical_derotation(1.7),
            spherical_derotation(-7.292e-5),
            potential_translation(1.3, 0.6).unwrap(),
            potential_translation(-2.0, 3.0).unwrap(),
        ];
        for map in &maps {
            let points: Vec<[f64; 4]> = (0..100)
                .map(|_| {
                    [
                        rng.uniform(-2.0, 2.0),
                        rng.uniform(-3.0, 3.0),
                        rng.uniform(-0.9, 0.9),
                        rng.uniform(-2.0, 2.0),
                    ]
                })
                .collect();
            let err = map.roundtrip_error(&points).unwrap();
            assert!(err <= 1e-13, "{}: roundtrip error {:.3e}", map.label, err);
        }
    }

    #[test]
    fn zonal_spherical_transport_solves_rotating_equation() {
        // psi~ = mu^2 solves the Omega = 0 equation; inverse transport with
        // Omega = 1 gives mu^2 + mu, which solves the Omega = 1 equation.
        let psi = AnalyticField::spherical(Expr::powi(Expr::var(2), 2));
        let map = spherical_derotation(1.0);
        let back = transport_solution(&map, &psi, Direction::Inverse).unwrap();
        let v = back.eval(&[0.7, 1.3, 0.4]).unwrap();
        assert!((v - (0.16 + 0.4)).abs() < 1e-14);
        let report = verify_equivalence(
            &map,
            &psi,
            &EquationParams::Spherical {
                omega: 1.0,
                radius: 1.0,
            },
            &EquationParams::Spherical {
                omega: 0.0,
                radius: 1.0,
            },
            &Grid::spherical_default(),
        )
        .unwrap();
        assert!(report.pass, "{:?}", report);
    }

    #[test]
    fn potential_zonal_transport() {
        // psi~ = y solves the beta = 0 potential equation; transported with
        // beta = 1, F = 1 it must solve the beta = 1 equation.
        let psi = AnalyticField::cartesian(Expr::var(2));
        let map = potential_translation(1.0, 1.0).unwrap();
        let report = verify_equivalence(
            &map,
            &psi,
            &EquationParams::Potential {
                beta: 1.0,
                froude: 1.0,
            },
            &EquationParams::Potential {
                beta: 0.0,
                froude: 1.0,
            },
            &Grid::cartesian_default(),
        )
        .unwrap();
        assert!(report.pass, "{:?}", report);
    }

    #[test]
    fn non_solution_fails_both_residuals() {
        // psi = t sin(x) is not a solution of the potential equation
        let psi = AnalyticField::cartesian(Expr::mul(Expr::var(0), Expr::sin(Expr::var(1))));
        let map = potential_translation(1.0, 1.0).unwrap();
        let report = verify_equivalence(
            &map,
            &psi,
            &EquationParams::Potential {
                beta: 1.0,
                froude: 1.0,
            },
            &EquationParams::Potential {
                beta: 0.0,
                froude: 1.0,
            },
            &Grid::cartesian_default(),
        )
        .unwrap();
        assert!(!report.pass);
        assert!(report.nonrotating.max_abs > 0.1);
        assert!(report.rotating.max_abs > 0.1);
    }

    #[test]
    fn identity_transport_keeps_residuals_equal() {
        let psi = AnalyticField::cartesian(Expr::mul(Expr::var(0), Expr::sin(Expr::var(1))));
        let map = PointTransformation::identity(VarSet::cartesian());
        let params = EquationParams::Cartesian { beta: 1.0 };
        let report = verify_equivalence(
            &map,
            &psi,
            &params,
            &params,
            &Grid::cartesian_default(),
        )
        .unwrap();
        assert_eq!(report.nonrotating.max_abs, report.rotating.max_abs);
    }

    #[test]
    fn transport_is_functorial() {
        let t1 = potential_translation(1.0, 1.0).unwrap();
        let t2 = potential_translation(-0.5, 2.0).unwrap();
        let composed = t1.clone().then(t2.clone()).unwrap();
        let psi = AnalyticField::cartesian(Expr::sin(Expr::add(Expr::var(1), Expr::var(2))));
        let a = t2
            .map_field(&t1.map_field(&psi).unwrap())
            .unwrap();
        let b = composed.map_field(&psi).unwrap();
        for p in [[0.1, 0.2, 0.3], [0.9, -0.4, 0.5], [0.0, 0.0, 0.0]] {
            assert!((a.eval(&p).unwrap() - b.eval(&p).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn opposite_beta_maps_compose_to_identity() {
        let t1 = potential_translation(1.5, 2.0).unwrap();
        let t2 = potential_translation(-1.5, 2.0).unwrap();
        let comp = t1.then(t2).unwrap();
        let pts = [[0.3, 0.7, -0.2, 1.1], [1.0, 0.0, 2.0, -0.5]];
        for p in &pts {
            let q = comp.apply(p).unwrap();
            for i in 0..4 {
                assert!((q[i] - p[i]).abs() < 1e-13);
            }
        }
    }
}

//! Invertible point transformations on (t, x, y, psi) or (t, lambda, mu, psi).
//!
//! Every transformation used here is fibered over space: the coordinate part
//! maps (t, u1, u2) without looking at psi, and the dependent variable maps
//! affinely, psi_tilde = scale(t,u1,u2) psi + shift(t,u1,u2). That covers the
//! de-rotation maps, all catalog flows, and their compositions, and it lets a
//! transformation act on closed-form fields by exact substitution, so that
//! transported fields keep exact derivatives.

use crate::error::{Error, Result};
use crate::expr::{Expr, TimeFnSet, VarSet};
use crate::fields::AnalyticField;
use std::sync::atomic::{AtomicUsize, Ordering};

static FRESH: AtomicUsize = AtomicUsize::new(0);

/// Reserve a unique time-function name for a transformation's registry.
pub(crate) fn fresh_tf_name(base: &str) -> String {
    format!("{}#{}", base, FRESH.fetch_add(1, Ordering::Relaxed))
}

/// One direction of a transformation: target coordinates as closed-form
/// expressions of the source coordinates, plus the affine psi law.
#[derive(Clone, Debug)]
pub struct CoordMap {
    pub space: [Expr; 3],
    pub psi_scale: Expr,
    pub psi_shift: Expr,
}

impl CoordMap {
    pub fn identity() -> Self {
        CoordMap {
            space: [Expr::var(0), Expr::var(1), Expr::var(2)],
            psi_scale: Expr::Const(1.0),
            psi_shift: Expr::Const(0.0),
        }
    }

    fn apply(&self, p: &[f64; 4], tfs: &TimeFnSet) -> Result<[f64; 4]> {
        let coords = &p[..3];
        let mut out = [0.0; 4];
        for (i, e) in self.space.iter().enumerate() {
            out[i] = e.eval(coords, tfs, Some(0))?;
        }
        let scale = self.psi_scale.eval(coords, tfs, Some(0))?;
        let shift = self.psi_shift.eval(coords, tfs, Some(0))?;
        out[3] = scale * p[3] + shift;
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MapKind {
    Identity,
    SphericalDerotation,
    PotentialTranslation,
    Flow,
    Composition,
}

/// Axis of a rigid sphere rotation (used by the J2/J3 flows).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotationAxis {
    X,
    Y,
}

#[derive(Clone, Debug)]
pub(crate) enum Primitive {
    Identity,
    Analytic {
        forward: CoordMap,
        inverse: CoordMap,
        tfs: TimeFnSet,
    },
    /// Rigid rotation of the sphere (lambda, mu), conjugated by the
    /// de-rotation map when omega is nonzero. Exact on points; has no
    /// closed-form expression substitute within the operator set.
    SphereRotation {
        axis: RotationAxis,
        angle: f64,
        omega: f64,
    },
    /// Apply members left to right.
    Composition(Vec<PointTransformation>),
}

#[derive(Clone, Debug)]
pub struct PointTransformation {
    pub kind: MapKind,
    pub label: String,
    space: VarSet,
    prim: Primitive,
}

fn rotate(axis: RotationAxis, angle: f64, lambda: f64, mu: f64) -> (f64, f64) {
    let s = (1.0 - mu * mu).max(0.0).sqrt();
    let (x, y, z) = (s * lambda.cos(), s * lambda.sin(), mu);
    let (c, sn) = (angle.cos(), angle.sin());
    let (xr, yr, zr) = match axis {
        // generator: dX/de = -Z, dZ/de = X
        RotationAxis::Y => (x * c - z * sn, y, x * sn + z * c),
        // generator: dY/de = Z, dZ/de = -Y
        RotationAxis::X => (x, y * c + z * sn, -y * sn + z * c),
    };
    // keep the longitude on the branch nearest the input (it is an angle
    // coordinate; branches differ by full turns)
    let mut lr = yr.atan2(xr);
    lr += ((lambda - lr) / std::f64::consts::TAU).round() * std::f64::consts::TAU;
    (lr, zr.clamp(-1.0, 1.0))
}

impl PointTransformation {
    pub fn identity(space: VarSet) -> Self {
        PointTransformation {
            kind: MapKind::Identity,
            label: "identity".into(),
            space,
            prim: Primitive::Identity,
        }
    }

    pub fn analytic(
        kind: MapKind,
        label: impl Into<String>,
        space: VarSet,
        forward: CoordMap,
        inverse: CoordMap,
        tfs: TimeFnSet,
    ) -> Self {
        PointTransformation {
            kind,
            label: label.into(),
            space,
            prim: Primitive::Analytic {
                forward,
                inverse,
                tfs,
            },
        }
    }

    pub(crate) fn sphere_rotation(axis: RotationAxis, angle: f64, omega: f64) -> Self {
        PointTransformation {
            kind: MapKind::Flow,
            label: format!(
                "sphere rotation about {:?} by {} (omega = {})",
                axis, angle, omega
            ),
            space: VarSet::spherical(),
            prim: Primitive::SphereRotation { axis, angle, omega },
        }
    }

    pub fn space(&self) -> &VarSet {
        &self.space
    }

    /// T2 after T1 (apply `self` first, then `next`).
    pub fn then(self, next: PointTransformation) -> Result<PointTransformation> {
        if self.space != next.space {
            return Err(Error::VarMismatch {
                expected: format!("{:?}", self.space.names()),
                got: format!("{:?}", next.space.names()),
            });
        }
        let label = format!("{} then {}", self.label, next.label);
        let space = self.space.clone();
        Ok(PointTransformation {
            kind: MapKind::Composition,
            label,
            space,
            prim: Primitive::Composition(vec![self, next]),
        })
    }

    pub fn inverse(&self) -> PointTransformation {
        let prim = match &self.prim {
            Primitive::Identity => Primitive::Identity,
            Primitive::Analytic {
                forward,
                inverse,
                tfs,
            } => Primitive::Analytic {
                forward: inverse.clone(),
                inverse: forward.clone(),
                tfs: tfs.clone(),
            },
            Primitive::SphereRotation { axis, angle, omega } => Primitive::SphereRotation {
                axis: *axis,
                angle: -angle,
                omega: *omega,
            },
            Primitive::Composition(parts) => {
                Primitive::Composition(parts.iter().rev().map(|p| p.inverse()).collect())
            }
        };
        PointTransformation {
            kind: self.kind.clone(),
            label: format!("inverse of {}", self.label),
            space: self.space.clone(),
            prim,
        }
    }

    /// Forward image of a point (t, u1, u2, psi).
    pub fn apply(&self, p: &[f64; 4]) -> Result<[f64; 4]> {
        match &self.prim {
            Primitive::Identity => Ok(*p),
            Primitive::Analytic { forward, tfs, .. } => forward.apply(p, tfs),
            Primitive::SphereRotation { axis, angle, omega } => {
                // conjugate by de-rotation: shift to the co-rotating frame,
                // rotate rigidly, shift back; psi picks up Omega * delta(mu)
                let (t, lam, mu, psi) = (p[0], p[1], p[2], p[3]);
                let lam_tilde = lam + omega * t;
                let (lr, mr) = rotate(*axis, *angle, lam_tilde, mu);
                Ok([t, lr - omega * t, mr, psi + omega * (mr - mu)])
            }
            Primitive::Composition(parts) => {
                let mut q = *p;
                for part in parts {
                    q = part.apply(&q)?;
                }
                Ok(q)
            }
        }
    }

    pub fn apply_inverse(&self, p: &[f64; 4]) -> Result<[f64; 4]> {
        self.inverse().apply(p)
    }

    /// Push a field through the transformation: the returned field satisfies
    /// psi_tilde(T(point)) = psi-component of T applied to (point, psi(point)).
    pub fn map_field(&self, psi: &AnalyticField) -> Result<AnalyticField> {
        if psi.vars() != &self.space {
            return Err(Error::VarMismatch {
                expected: format!("{:?}", self.space.names()),
                got: format!("{:?}", psi.vars().names()),
            });
        }
        match &self.prim {
            Primitive::Identity => Ok(psi.clone()),
            Primitive::Analytic {
                forward,
                inverse,
                tfs,
            } => {
                // psi_tilde(X) = scale(S^-1 X) psi(S^-1 X) + shift(S^-1 X)
                let src = &inverse.space;
                let subs: Vec<Expr> = src.to_vec();
                let pulled = psi.expr().substitute(&subs);
                let scale = forward.psi_scale.substitute(&subs);
                let shift = forward.psi_shift.substitute(&subs);
                let expr = Expr::add(Expr::mul(scale, pulled), shift);
                let mut reg = psi.time_fns().clone();
                for (k, v) in tfs {
                    reg.insert(k.clone(), v.clone());
                }
                Ok(AnalyticField::new(self.space.clone(), expr, reg))
            }
            Primitive::SphereRotation { .. } => Err(Error::NotExpressible(self.label.clone())),
            Primitive::Composition(parts) => {
                let mut f = psi.clone();
                for part in parts {
                    f = part.map_field(&f)?;
                }
                Ok(f)
            }
        }
    }

    /// Max deviation of forward-then-inverse from the identity over points.
    pub fn roundtrip_error(&self, points: &[[f64; 4]]) -> Result<f64> {
        let mut worst = 0.0f64;
        for p in points {
            let q = self.apply_inverse(&self.apply(p)?)?;
            for i in 0..4 {
                worst = worst.max((q[i] - p[i]).abs());
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shift_map() -> PointTransformation {
        // (t, x, y, psi) -> (t, x + 2, y, psi)
        let fwd = CoordMap {
            space: [
                Expr::var(0),
                Expr::add(Expr::var(1), Expr::Const(2.0)),
                Expr::var(2),
            ],
            psi_scale: Expr::Const(1.0),
            psi_shift: Expr::Const(0.0),
        };
        let inv = CoordMap {
            space: [
                Expr::var(0),
                Expr::sub(Expr::var(1), Expr::Const(2.0)),
                Expr::var(2),
            ],
            psi_scale: Expr::Const(1.0),
            psi_shift: Expr::Const(0.0),
        };
        PointTransformation::analytic(
            MapKind::Flow,
            "x-shift",
            VarSet::cartesian(),
            fwd,
            inv,
            TimeFnSet::new(),
        )
    }

    #[test]
    fn roundtrip_is_identity() {
        let t = shift_map();
        let pts = [[0.1, 0.2, 0.3, 0.4], [1.0, -1.0, 2.0, -3.0]];
        assert!(t.roundtrip_error(&pts).unwrap() < 1e-15);
    }

    #[test]
    fn map_field_translates() {
        // psi = sin(x); x-shift by 2 gives psi_tilde with psi_tilde(x) = sin(x - 2)
        let t = shift_map();
        let psi = AnalyticField::cartesian(Expr::sin(Expr::var(1)));
        let mapped = t.map_field(&psi).unwrap();
        let v = mapped.eval(&[0.0, 2.5, 0.0]).unwrap();
        assert!((v - (0.5f64).sin()).abs() < 1e-15);
    }

    #[test]
    fn composition_applies_left_to_right() {
        let t = shift_map().then(shift_map()).unwrap();
        let p = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(t.apply(&p).unwrap()[1], 5.0);
        assert!(t.roundtrip_error(&[p]).unwrap() < 1e-15);
    }

    #[test]
    fn sphere_rotation_roundtrip() {
        let r = PointTransformation::sphere_rotation(RotationAxis::Y, 0.7, 1.3);
        let pts = [
            [0.2, 0.5, 0.3, 1.0],
            [1.0, -2.0, -0.8, 0.5],
            [0.0, 3.0, 0.0, 0.0],
        ];
        assert!(r.roundtrip_error(&pts).unwrap() < 1e-12);
        assert!(r
            .map_field(&AnalyticField::spherical(Expr::var(2)))
            .is_err());
    }
}

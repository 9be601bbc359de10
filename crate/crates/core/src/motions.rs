//! Rigid motions: rotation matrix plus translation, group operations, action
//! on points and lifted knots, and the geodesic metric on the motion group.

use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::kernels::{KnotSet3, KnotSet4};

const ORTHO_TOL: f64 = 1e-9;

/// An element of SE(3): `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidMotion {
    r: Matrix3<f64>,
    t: Vector3<f64>,
}

impl RigidMotion {
    pub fn new(r: Matrix3<f64>, t: Vector3<f64>) -> Result<Self> {
        let drift = orthonormality_drift(&r);
        if drift > ORTHO_TOL {
            return Err(Error::Invalid(format!(
                "rotation matrix is not orthonormal (drift {drift:.3e})"
            )));
        }
        if (r.determinant() - 1.0).abs() > ORTHO_TOL {
            return Err(Error::Invalid(format!(
                "rotation determinant {} is not +1",
                r.determinant()
            )));
        }
        Ok(Self { r, t })
    }

    pub fn identity() -> Self {
        Self { r: Matrix3::identity(), t: Vector3::zeros() }
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64, t: Vector3<f64>) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) {
            return Err(Error::Invalid("zero rotation axis".into()));
        }
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Ok(Self { r: r.into_inner(), t })
    }

    pub fn translation_only(t: Vector3<f64>) -> Self {
        Self { r: Matrix3::identity(), t }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.r
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.t
    }

    /// Group product `(R1 R2, t1 + R1 t2)`, re-orthonormalized when the
    /// accumulated drift exceeds the validity tolerance.
    pub fn compose(&self, other: &Self) -> Self {
        let mut r = self.r * other.r;
        if orthonormality_drift(&r) > ORTHO_TOL {
            r = reorthonormalize(&r);
        }
        Self { r, t: self.t + self.r * other.t }
    }

    /// `(R^T, -R^T t)`.
    pub fn invert(&self) -> Self {
        let rt = self.r.transpose();
        Self { r: rt, t: -(rt * self.t) }
    }

    pub fn act_point(&self, x: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.r * x.coords + self.t)
    }

    /// Action on a lifted knot: the center moves, the radius is untouched.
    pub fn act_knot(&self, a: (Point3<f64>, f64)) -> (Point3<f64>, f64) {
        (self.act_point(&a.0), a.1)
    }
}

fn orthonormality_drift(r: &Matrix3<f64>) -> f64 {
    let gram = r * r.transpose();
    let mut drift = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let expect = if i == j { 1.0 } else { 0.0 };
            drift = drift.max((gram[(i, j)] - expect).abs());
        }
    }
    drift
}

/// Gram-Schmidt on the columns, restoring a proper rotation.
fn reorthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = r.column(0).normalize();
    let mut c1 = r.column(1) - c0 * r.column(1).dot(&c0);
    c1.normalize_mut();
    let c2 = c0.cross(&c1);
    Matrix3::from_columns(&[c0, c1, c2])
}

/// Moves every knot center; radius and weights are unchanged.
pub fn transform_knots3(m: &RigidMotion, k: &KnotSet3) -> KnotSet3 {
    let points = k.points().iter().map(|p| m.act_point(p)).collect();
    KnotSet3::new(points, k.radius(), Some(k.weights().to_vec()))
        .expect("motion preserves radius and weight validity")
}

/// Moves every lifted knot; the mirror tag travels with the set.
pub fn transform_knots4(m: &RigidMotion, k: &KnotSet4) -> KnotSet4 {
    let centers = k.centers().iter().map(|p| m.act_point(p)).collect();
    let mut out = KnotSet4::new(
        centers,
        k.radii().to_vec(),
        Some(k.weights().to_vec()),
        k.trim_l(),
    )
    .expect("motion preserves radius and weight validity");
    if k.is_mirrored() {
        out = out.with_mirror_toggled();
    }
    out
}

/// Rotation angle in `[0, pi]` recovered from the matrix.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let s = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    )
    .norm()
        * 0.5;
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    s.atan2(c)
}

/// Geodesic metric `sqrt(|ln(R1^T R2)|_F^2 + |t2 - t1|^2)`. The matrix
/// logarithm of a rotation by `theta` has Frobenius norm `sqrt(2) theta`.
pub fn geodesic_distance(m1: &RigidMotion, m2: &RigidMotion) -> f64 {
    let rel = m1.r.transpose() * m2.r;
    let theta = rotation_angle(&rel);
    let rot_sq = 2.0 * theta * theta;
    let trans_sq = (m2.t - m1.t).norm_squared();
    (rot_sq + trans_sq).sqrt()
}

/// Parses the literal `axis ax ay az angle_deg tx ty tz`.
pub fn parse_motion_literal(s: &str) -> Result<RigidMotion> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    if toks.len() != 8 || toks[0] != "axis" {
        return Err(Error::Parse(format!(
            "motion literal must be \"axis ax ay az angle_deg tx ty tz\", got {s:?}"
        )));
    }
    let mut vals = [0.0f64; 7];
    for (slot, tok) in vals.iter_mut().zip(&toks[1..]) {
        *slot = tok
            .parse()
            .map_err(|e| Error::Parse(format!("bad motion number {tok:?}: {e}")))?;
    }
    let axis = Vector3::new(vals[0], vals[1], vals[2]);
    let t = Vector3::new(vals[4], vals[5], vals[6]);
    if vals[3] == 0.0 || axis.norm() == 0.0 {
        return Ok(RigidMotion::translation_only(t));
    }
    RigidMotion::from_axis_angle(&axis, vals[3].to_radians(), t)
}

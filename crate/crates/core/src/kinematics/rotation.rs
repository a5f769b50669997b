//! Rotation representations: axis rotations, intrinsic ZXY Euler angles and
//! the continuous 6D encoding (first two matrix columns, decoded by
//! Gram-Schmidt).

use super::KinematicsError;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// A rotation encoded as the first two columns of its matrix, column-major:
/// `v = [c0x, c0y, c0z, c1x, c1y, c1z]`.
///
/// Unlike Euler angles the encoding is continuous, which keeps regression
/// targets well behaved. Decoding re-orthonormalizes with Gram-Schmidt, so
/// any pair of non-parallel columns maps back to a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation6D {
    pub v: [f64; 6],
}

impl Rotation6D {
    pub fn as_slice(&self) -> &[f64; 6] {
        &self.v
    }
}

/// Orthonormality residual of `r`: ‖RᵀR − I‖_F combined with |det − 1|.
fn rotation_residual(r: &Matrix3<f64>) -> f64 {
    let gram = r.transpose() * r - Matrix3::identity();
    gram.norm() + (r.determinant() - 1.0).abs()
}

/// Encode a rotation matrix into the 6D representation.
///
/// Rejects inputs whose orthonormality residual exceeds 1e-4.
pub fn matrix_to_6d(r: &Matrix3<f64>) -> Result<Rotation6D, KinematicsError> {
    const TOLERANCE: f64 = 1e-4;
    let residual = rotation_residual(r);
    if residual > TOLERANCE {
        return Err(KinematicsError::NotARotation {
            residual,
            tolerance: TOLERANCE,
        });
    }
    Ok(Rotation6D {
        v: [
            r[(0, 0)],
            r[(1, 0)],
            r[(2, 0)],
            r[(0, 1)],
            r[(1, 1)],
            r[(2, 1)],
        ],
    })
}

/// Decode a 6D rotation back to an orthonormal matrix via Gram-Schmidt:
/// `c1 = normalize(v[0:3])`, `c2 = normalize(v[3:6] − (v[3:6]·c1)c1)`,
/// `c3 = c1 × c2`.
pub fn sixd_to_matrix(v: &Rotation6D) -> Result<Matrix3<f64>, KinematicsError> {
    const EPS: f64 = 1e-12;
    if !v.v.iter().all(|x| x.is_finite()) {
        return Err(KinematicsError::Degenerate6d("non-finite input".into()));
    }
    let a = Vector3::new(v.v[0], v.v[1], v.v[2]);
    let b = Vector3::new(v.v[3], v.v[4], v.v[5]);
    let na = a.norm();
    if na < EPS {
        return Err(KinematicsError::Degenerate6d(
            "first column has zero norm".into(),
        ));
    }
    let c1 = a / na;
    let b_orth = b - c1 * b.dot(&c1);
    let nb = b_orth.norm();
    if nb < EPS {
        return Err(KinematicsError::Degenerate6d(
            "second column parallel to first".into(),
        ));
    }
    let c2 = b_orth / nb;
    let c3 = c1.cross(&c2);
    Ok(Matrix3::from_columns(&[c1, c2, c3]))
}

/// Rotation about the X axis.
pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Rotation about the Y axis.
pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation about the Z axis.
pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Compose per-axis angles into a local rotation, multiplying in the given
/// axis order (intrinsic): `R = R(axes[0]) · R(axes[1]) · …`.
pub fn matrix_from_axis_angles(axes: &[super::DofAxis], angles: &[f64]) -> Matrix3<f64> {
    debug_assert_eq!(axes.len(), angles.len());
    let mut r = Matrix3::identity();
    for (axis, &angle) in axes.iter().zip(angles) {
        r *= match axis {
            super::DofAxis::X => rot_x(angle),
            super::DofAxis::Y => rot_y(angle),
            super::DofAxis::Z => rot_z(angle),
        };
    }
    r
}

/// Decompose a rotation into intrinsic Z·X·Y Euler angles `(z, x, y)` such
/// that `rot_z(z) · rot_x(x) · rot_y(y)` reproduces the input.
///
/// At gimbal lock (|sin x| = 1) the z angle absorbs the free DoF and y is 0.
pub fn euler_zxy_from_matrix(r: &Matrix3<f64>) -> (f64, f64, f64) {
    // R = Rz(z) Rx(x) Ry(y); r[(2,1)] = sin(x).
    let sx = r[(2, 1)].clamp(-1.0, 1.0);
    let x = sx.asin();
    if sx.abs() < 1.0 - 1e-9 {
        let z = (-r[(0, 1)]).atan2(r[(1, 1)]);
        let y = (-r[(2, 0)]).atan2(r[(2, 2)]);
        (z, x, y)
    } else {
        // cos(x) = 0: only z ± y is determined; put it all into z.
        let z = (sx.signum() * r[(0, 2)]).atan2(r[(0, 0)]);
        (z, x, 0.0)
    }
}

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{Dim, Vec3};

/// Rigid transform `(R, t)` with the rotation stored as a canonical unit quaternion.
///
/// Planar poses are embedded in 3D: the rotation is about `z` and the
/// translation has a zero `z` component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
}

/// Flip a quaternion so its scalar part is nonnegative. When the scalar part
/// is exactly zero the first nonzero vector component is made positive.
pub fn canonical_quaternion(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let c = q.quaternion().coords; // (x, y, z, w)
    let flip = if c.w != 0.0 {
        c.w < 0.0
    } else if c.x != 0.0 {
        c.x < 0.0
    } else if c.y != 0.0 {
        c.y < 0.0
    } else {
        c.z < 0.0
    };
    if flip {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Planar rotation angle of a quaternion about `z`, in `(-pi, pi]`.
pub fn planar_angle(q: &UnitQuaternion<f64>) -> f64 {
    let c = q.quaternion().coords;
    wrap_angle(2.0 * c.z.atan2(c.w))
}

/// Rotation about `z` by `theta`.
pub fn planar_rotation(theta: f64) -> UnitQuaternion<f64> {
    canonical_quaternion(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta))
}

/// Distance between two rotations.
///
/// 3D: Euclidean distance between quaternions with antipodes identified.
/// 2D: absolute wrapped angle difference.
pub fn rotation_distance(dim: Dim, a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    match dim {
        Dim::Two => wrap_angle(planar_angle(b) - planar_angle(a)).abs(),
        Dim::Three => {
            let qa = a.quaternion().coords;
            let qb = b.quaternion().coords;
            (qa - qb).norm().min((qa + qb).norm())
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Pose {
            rotation: canonical_quaternion(rotation),
            translation,
        }
    }

    pub fn identity() -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn planar(x: f64, y: f64, theta: f64) -> Self {
        Pose::new(planar_rotation(theta), Vec3::new(x, y, 0.0))
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Pose::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Pose::new(rotation, Vec3::zeros())
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.translation + self.rotation * other.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose::new(inv, -(inv * self.translation))
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse() * (p - self.translation)
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse_transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.inverse() * v
    }
}

/// Result of a rigid-body interpolation.
#[derive(Clone, Debug)]
pub struct Interpolation {
    pub poses: Vec<Pose>,
    /// Set when the relative rotation is a half turn, where the logarithm is
    /// not unique and an arbitrary (but deterministic) branch was taken.
    pub ambiguous: bool,
}

fn skew(w: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Left Jacobian of SO(3), the `V` matrix of the SE(3) exponential.
fn so3_left_jacobian(w: &Vec3) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let k = skew(w);
    let (c1, c2) = if theta2 < 1e-10 {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let theta = theta2.sqrt();
        ((1.0 - theta.cos()) / theta2, (theta - theta.sin()) / (theta2 * theta))
    };
    Matrix3::identity() + k * c1 + k * k * c2
}

/// Rotation vector of a quaternion, always taking the short branch.
fn rotation_log(q: &UnitQuaternion<f64>) -> Vec3 {
    canonical_quaternion(*q).scaled_axis()
}

/// Interpolate along the SE(3) geodesic `g1 exp(tau log(g1^-1 g2))` at
/// `tau = k/(n-1)`. Endpoints are returned exactly.
pub fn pose_interpolate(g1: &Pose, g2: &Pose, n: usize) -> Interpolation {
    let n = n.max(2);
    let rel = g1.inverse().compose(g2);
    let w = rotation_log(&rel.rotation);
    let ambiguous = w.norm() > PI - 1e-9;
    let v = so3_left_jacobian(&w);
    let u = v
        .try_inverse()
        .map(|vi| vi * rel.translation)
        .unwrap_or(rel.translation);

    let mut poses = Vec::with_capacity(n);
    poses.push(*g1);
    for k in 1..n - 1 {
        let tau = k as f64 / (n - 1) as f64;
        let wt = w * tau;
        let step = Pose::new(
            UnitQuaternion::from_scaled_axis(wt),
            so3_left_jacobian(&wt) * (u * tau),
        );
        poses.push(g1.compose(&step));
    }
    poses.push(*g2);
    Interpolation { poses, ambiguous }
}

/// Rotation-only geodesic interpolation, matching the rotation part of
/// [`pose_interpolate`].
pub fn rotation_interpolate(
    r1: &UnitQuaternion<f64>,
    r2: &UnitQuaternion<f64>,
    n: usize,
) -> Vec<UnitQuaternion<f64>> {
    pose_interpolate(&Pose::from_rotation(*r1), &Pose::from_rotation(*r2), n)
        .poses
        .into_iter()
        .map(|p| p.rotation)
        .collect()
}

/// Rotation of `angle` about a unit axis.
pub fn axis_angle(axis: &Vec3, angle: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Unit::new_normalize(*axis), angle)
}

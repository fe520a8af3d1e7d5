use nalgebra::{DMatrix, Matrix3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{Dim, Pose, Vec3};
use crate::error::{HrmError, Result};

/// Ellipsoid (2D: ellipse) given by semi-axis lengths and a pose.
///
/// For planar ellipsoids the third semi-axis is stored as zero and every
/// operation ignores it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub dim: Dim,
    semi_axes: Vec3,
    pub pose: Pose,
}

impl Ellipsoid {
    pub fn new(dim: Dim, semi_axes: Vec3, pose: Pose) -> Result<Self> {
        let mut axes = semi_axes;
        if dim == Dim::Two {
            axes.z = 0.0;
        }
        for k in 0..dim.n() {
            if !(axes[k].is_finite() && axes[k] > 0.0) {
                return Err(HrmError::InvalidArgument(format!(
                    "ellipsoid semi-axes must be positive, got {:?}",
                    &axes.as_slice()[..dim.n()]
                )));
            }
        }
        Ok(Ellipsoid {
            dim,
            semi_axes: axes,
            pose,
        })
    }

    pub fn planar(a: f64, b: f64, pose: Pose) -> Result<Self> {
        Ellipsoid::new(Dim::Two, Vec3::new(a, b, 0.0), pose)
    }

    pub fn spatial(a: f64, b: f64, c: f64, pose: Pose) -> Result<Self> {
        Ellipsoid::new(Dim::Three, Vec3::new(a, b, c), pose)
    }

    pub fn sphere(dim: Dim, r: f64, center: Vec3) -> Result<Self> {
        Ellipsoid::new(dim, Vec3::new(r, r, r), Pose::from_translation(center))
    }

    pub fn semi_axes(&self) -> &Vec3 {
        &self.semi_axes
    }

    /// The meaningful semi-axes (length `dim`).
    pub fn axes(&self) -> &[f64] {
        &self.semi_axes.as_slice()[..self.dim.n()]
    }

    pub fn center(&self) -> Vec3 {
        self.pose.translation
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        self.pose.rotation()
    }

    pub fn max_semi_axis(&self) -> f64 {
        self.axes().iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_semi_axis(&self) -> f64 {
        self.axes().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn with_pose(&self, pose: Pose) -> Self {
        Ellipsoid { pose, ..*self }
    }

    pub fn with_center(&self, center: Vec3) -> Self {
        let mut e = *self;
        e.pose.translation = center;
        e
    }

    /// Shape matrix `A = R diag(a) R^T`.
    pub fn shape_matrix(&self) -> Matrix3<f64> {
        let r = self.pose.rotation_matrix();
        r * Matrix3::from_diagonal(&self.semi_axes) * r.transpose()
    }

    /// `A^{-2}` restricted to the active dimensions.
    pub fn inverse_square_matrix(&self) -> DMatrix<f64> {
        let d = self.dim.n();
        let r = self.pose.rotation_matrix();
        let r = r.view((0, 0), (d, d)).into_owned();
        let inv = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                1.0 / (self.semi_axes[i] * self.semi_axes[i])
            } else {
                0.0
            }
        });
        &r * inv * r.transpose()
    }

    /// `(x-c)^T A^{-2} (x-c)`; below one inside, one on the surface.
    pub fn implicit(&self, x: &Vec3) -> f64 {
        let y = self.pose.inverse_transform_point(x);
        (0..self.dim.n())
            .map(|k| (y[k] / self.semi_axes[k]).powi(2))
            .sum()
    }

    /// Support function `h(u) = max_{x in E} u.(x - c)`.
    pub fn support(&self, u: &Vec3) -> f64 {
        let v = self.pose.inverse_transform_vector(u);
        v.component_mul(&self.semi_axes).norm()
    }

    /// Offset from the center to the point of the surface with outward
    /// normal `u`: `R diag(a)^2 R^T u / |diag(a) R^T u|`.
    pub fn support_offset(&self, u: &Vec3) -> Vec3 {
        let v = self.pose.inverse_transform_vector(u);
        let scaled = v.component_mul(&self.semi_axes);
        let denom = scaled.norm();
        self.pose
            .transform_vector(&(scaled.component_mul(&self.semi_axes) / denom))
    }

    pub fn volume(&self) -> f64 {
        match self.dim {
            Dim::Two => PI * self.semi_axes.x * self.semi_axes.y,
            Dim::Three => 4.0 / 3.0 * PI * self.semi_axes.x * self.semi_axes.y * self.semi_axes.z,
        }
    }

    /// Build from a center and an inverse-square matrix `Q = A^{-2}` given
    /// on the active dimensions.
    pub fn from_inverse_square(dim: Dim, center: Vec3, q: &DMatrix<f64>) -> Result<Self> {
        let d = dim.n();
        let sym = (q + q.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let mut axes = Vec3::zeros();
        let mut rot = Matrix3::identity();
        for k in 0..d {
            let lambda = eig.eigenvalues[k];
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(HrmError::DegenerateGeometry(format!(
                    "shape matrix is not positive definite (eigenvalue {lambda})"
                )));
            }
            axes[k] = 1.0 / lambda.sqrt();
            for i in 0..d {
                rot[(i, k)] = eig.eigenvectors[(i, k)];
            }
        }
        if rot.determinant() < 0.0 {
            for i in 0..3 {
                rot[(i, d - 1)] = -rot[(i, d - 1)];
            }
        }
        let q = match dim {
            Dim::Two => super::planar_rotation(rot[(1, 0)].atan2(rot[(0, 0)])),
            Dim::Three => UnitQuaternion::from_rotation_matrix(
                &nalgebra::Rotation3::from_matrix_unchecked(rot),
            ),
        };
        Ellipsoid::new(dim, axes, Pose::new(q, center))
    }
}

//! Poses, rotations, ellipsoids and superquadrics.

mod ellipsoid;
mod pose;
mod superquadric;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use ellipsoid::Ellipsoid;
pub use pose::{
    axis_angle, canonical_quaternion, planar_angle, planar_rotation, pose_interpolate,
    rotation_distance, rotation_interpolate, wrap_angle, Interpolation, Pose,
};
pub use superquadric::{
    clamp_exponent, mesh_volume, sphere_grid_shape, spow, Superquadric, SurfaceGrid,
    SurfaceSample, EXPONENT_MAX, EXPONENT_MIN,
};

pub type Vec3 = Vector3<f64>;

/// Ambient dimension. Planar problems live in the `z = 0` plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
}

impl Dim {
    pub fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    pub fn from_n(n: usize) -> Option<Dim> {
        match n {
            2 => Some(Dim::Two),
            3 => Some(Dim::Three),
            _ => None,
        }
    }
}

//! Robots built from ellipsoids: rigid multi-body robots and revolute
//! kinematic trees.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{HrmError, Result};
use crate::geom::{axis_angle, planar_rotation, wrap_angle, Dim, Ellipsoid, Pose, Vec3};

/// Revolute joint about `axis` (in the link's joint frame).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub axis: Vec3,
    pub lower: f64,
    pub upper: f64,
}

impl Joint {
    pub fn full(axis: Vec3) -> Self {
        Joint {
            axis,
            lower: -PI,
            upper: PI,
        }
    }
}

/// A link hangs off `parent` (0 is the base, `k + 1` is link `k`). Its frame
/// is the parent frame composed with `origin` and then the joint rotation;
/// the ellipsoid sits at `body` within that frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub parent: usize,
    pub origin: Pose,
    pub joint: Option<Joint>,
    pub body: Pose,
    pub semi_axes: Vec3,
}

/// Robot as a tree of ellipsoidal parts. Part 0 is the base, whose center is
/// the robot's reference point; part `k + 1` is `links[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Robot {
    pub dim: Dim,
    pub base: Ellipsoid,
    pub links: Vec<Link>,
}

/// Rigid multi-body robots are trees with no joints.
pub type MultiBodyRobot = Robot;
pub type ArticulatedRobot = Robot;

/// Base rotation plus joint angles: everything except the base translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub base_rotation: UnitQuaternion<f64>,
    pub joints: Vec<f64>,
}

impl Shape {
    pub fn rigid(base_rotation: UnitQuaternion<f64>) -> Self {
        Shape {
            base_rotation,
            joints: Vec::new(),
        }
    }

    pub fn with_joints(mut self, joints: Vec<f64>) -> Self {
        self.joints = joints;
        self
    }
}

/// Full robot configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub shape: Shape,
    pub translation: Vec3,
}

/// A part after forward kinematics, with the base center at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosedPart {
    pub index: usize,
    pub ellipsoid: Ellipsoid,
    /// Center of this part relative to the base center.
    pub offset: Vec3,
}

impl Robot {
    pub fn new(dim: Dim, base: Ellipsoid, links: Vec<Link>) -> Result<Self> {
        let robot = Robot { dim, base, links };
        robot.validate()?;
        Ok(robot)
    }

    /// Rigid robot from a base and parts posed relative to the base frame.
    pub fn multi_body(base: Ellipsoid, parts: &[Ellipsoid]) -> Result<Self> {
        let links = parts
            .iter()
            .map(|p| Link {
                parent: 0,
                origin: Pose::identity(),
                joint: None,
                body: p.pose,
                semi_axes: *p.semi_axes(),
            })
            .collect();
        Robot::new(base.dim, base, links)
    }

    /// Planar chain of `(origin, semi_axes)` links. Each link is attached by
    /// a revolute joint about `z` at `origin` in its predecessor's frame, with
    /// the ellipsoid extending along the link's `x` axis from the joint.
    pub fn planar_chain(base: Ellipsoid, links: &[(Vec3, Vec3)]) -> Result<Self> {
        let links = links
            .iter()
            .enumerate()
            .map(|(k, (origin, axes))| Link {
                parent: k,
                origin: Pose::from_translation(*origin),
                joint: Some(Joint::full(Vec3::z())),
                body: Pose::from_translation(Vec3::new(axes.x, 0.0, 0.0)),
                semi_axes: *axes,
            })
            .collect();
        Robot::new(base.dim, base, links)
    }

    fn validate(&self) -> Result<()> {
        if self.base.dim != self.dim {
            return Err(HrmError::InvalidArgument("base dimension mismatch".into()));
        }
        for (k, link) in self.links.iter().enumerate() {
            if link.parent > k {
                return Err(HrmError::InvalidArgument(format!(
                    "link {k} has parent {} which is not an earlier part",
                    link.parent
                )));
            }
            Ellipsoid::new(self.dim, link.semi_axes, link.body)?;
            if let Some(j) = &link.joint {
                if j.lower.is_nan() || j.upper.is_nan() || j.lower > j.upper {
                    return Err(HrmError::InvalidArgument(format!(
                        "link {k} joint limits [{}, {}] are not ordered",
                        j.lower, j.upper
                    )));
                }
                if (j.axis.norm() - 1.0).abs() > 1e-9 {
                    return Err(HrmError::InvalidArgument(format!(
                        "link {k} joint axis is not unit length"
                    )));
                }
                if self.dim == Dim::Two && (j.axis - Vec3::z()).norm() > 1e-9 {
                    return Err(HrmError::InvalidArgument(format!(
                        "link {k}: planar joints must rotate about +z"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_parts(&self) -> usize {
        self.links.len() + 1
    }

    pub fn num_joints(&self) -> usize {
        self.links.iter().filter(|l| l.joint.is_some()).count()
    }

    pub fn joints(&self) -> impl Iterator<Item = &Joint> {
        self.links.iter().filter_map(|l| l.joint.as_ref())
    }

    /// Indices (into the joint vector) of the joints between the base and
    /// part `part`.
    pub fn chain_joints(&self, part: usize) -> Vec<usize> {
        let mut joint_of = Vec::with_capacity(self.links.len());
        let mut next = 0;
        for l in &self.links {
            joint_of.push(l.joint.map(|_| {
                next += 1;
                next - 1
            }));
        }
        let mut out = Vec::new();
        let mut p = part;
        while p > 0 {
            out.extend(joint_of[p - 1]);
            p = self.links[p - 1].parent;
        }
        out.reverse();
        out
    }

    pub fn is_rigid(&self) -> bool {
        self.num_joints() == 0
    }

    /// Identity base rotation, all joints at zero (clamped into limits).
    pub fn home_shape(&self) -> Shape {
        Shape {
            base_rotation: UnitQuaternion::identity(),
            joints: self.joints().map(|j| 0f64.clamp(j.lower, j.upper)).collect(),
        }
    }

    /// Wrap joint angles to `(-pi, pi]` and check their limits.
    pub fn normalize_shape(&self, shape: &Shape) -> Result<Shape> {
        if shape.joints.len() != self.num_joints() {
            return Err(HrmError::InvalidConfiguration(format!(
                "expected {} joint angles, got {}",
                self.num_joints(),
                shape.joints.len()
            )));
        }
        let mut joints = Vec::with_capacity(shape.joints.len());
        for (k, (j, &theta)) in self.joints().zip(&shape.joints).enumerate() {
            if !theta.is_finite() {
                return Err(HrmError::InvalidConfiguration(format!("joint {k} is not finite")));
            }
            let w = wrap_angle(theta);
            if w < j.lower - 1e-12 || w > j.upper + 1e-12 {
                return Err(HrmError::InvalidConfiguration(format!(
                    "joint {k} angle {w} outside [{}, {}]",
                    j.lower, j.upper
                )));
            }
            joints.push(w);
        }
        let base_rotation = match self.dim {
            Dim::Two => planar_rotation(crate::geom::planar_angle(&shape.base_rotation)),
            Dim::Three => crate::geom::canonical_quaternion(shape.base_rotation),
        };
        Ok(Shape {
            base_rotation,
            joints,
        })
    }

    /// Poses of all parts with the base center at the origin.
    pub fn forward_kinematics(&self, shape: &Shape) -> Result<Vec<PosedPart>> {
        let shape = self.normalize_shape(shape)?;
        let root = Pose::from_rotation(shape.base_rotation);
        let mut frames = Vec::with_capacity(self.num_parts());
        frames.push(root);
        let mut poses = Vec::with_capacity(self.num_parts());
        poses.push(root.compose(&self.base.pose));
        let mut joint_iter = shape.joints.iter();
        for link in &self.links {
            let mut frame = frames[link.parent].compose(&link.origin);
            if let Some(j) = &link.joint {
                let theta = *joint_iter.next().expect("joint count checked");
                frame = frame.compose(&Pose::from_rotation(axis_angle(&j.axis, theta)));
            }
            poses.push(frame.compose(&link.body));
            frames.push(frame);
        }
        let base_center = poses[0].translation;
        poses
            .into_iter()
            .enumerate()
            .map(|(index, mut pose)| {
                pose.translation -= base_center;
                let axes = if index == 0 {
                    *self.base.semi_axes()
                } else {
                    self.links[index - 1].semi_axes
                };
                Ok(PosedPart {
                    index,
                    ellipsoid: Ellipsoid::new(self.dim, axes, pose)?,
                    offset: pose.translation,
                })
            })
            .collect()
    }

    /// Parts placed at a full configuration.
    pub fn place(&self, config: &Configuration) -> Result<Vec<Ellipsoid>> {
        Ok(self
            .forward_kinematics(&config.shape)?
            .into_iter()
            .map(|p| p.ellipsoid.with_center(p.offset + config.translation))
            .collect())
    }

    /// Largest distance from the base center to any point of the robot, over
    /// the given shape.
    pub fn reach(&self, shape: &Shape) -> Result<f64> {
        Ok(self
            .forward_kinematics(shape)?
            .iter()
            .map(|p| p.offset.norm() + p.ellipsoid.max_semi_axis())
            .fold(0.0, f64::max))
    }

    /// Largest semi-axis over all parts.
    pub fn max_semi_axis(&self) -> f64 {
        self.links
            .iter()
            .flat_map(|l| l.semi_axes.iter().take(self.dim.n()).cloned().collect::<Vec<_>>())
            .fold(self.base.max_semi_axis(), f64::max)
    }
}

/// Uniformly distributed rotation: Shoemake's construction in 3D, a uniform
/// angle in 2D.
pub fn random_rotation<R: Rng + ?Sized>(dim: Dim, rng: &mut R) -> UnitQuaternion<f64> {
    match dim {
        Dim::Two => planar_rotation(rng.random_range(-PI..PI)),
        Dim::Three => {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let u3: f64 = rng.random();
            let (s1, s2) = ((1.0 - u1).sqrt(), u1.sqrt());
            let (t2, t3) = (2.0 * PI * u2, 2.0 * PI * u3);
            crate::geom::canonical_quaternion(UnitQuaternion::new_unchecked(Quaternion::new(
                s2 * t3.cos(),
                s1 * t2.sin(),
                s1 * t2.cos(),
                s2 * t3.sin(),
            )))
        }
    }
}

/// Random shape: uniform base rotation and joints uniform within limits.
pub fn sample_shape<R: Rng + ?Sized>(robot: &Robot, rng: &mut R) -> Shape {
    let base_rotation = random_rotation(robot.dim, rng);
    let joints = robot
        .joints()
        .map(|j| {
            if j.upper > j.lower {
                rng.random_range(j.lower..=j.upper)
            } else {
                j.lower
            }
        })
        .collect();
    Shape {
        base_rotation,
        joints,
    }
}

/// Distance between shapes: rotation distance plus the wrapped L2 norm of
/// the joint differences.
pub fn shape_distance(dim: Dim, a: &Shape, b: &Shape) -> f64 {
    let rot = crate::geom::rotation_distance(dim, &a.base_rotation, &b.base_rotation);
    let joints: f64 = a
        .joints
        .iter()
        .zip(&b.joints)
        .map(|(x, y)| wrap_angle(y - x).powi(2))
        .sum();
    rot + joints.sqrt()
}

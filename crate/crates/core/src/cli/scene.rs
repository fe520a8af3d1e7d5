//! Scene files: TOML with a `schema` field, bodies in world frame, angles in
//! radians. 2D rotations are single angles, 3D rotations are `[w, x, y, z]`
//! quaternions.

use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{HrmError, Result};
use crate::geom::{clamp_exponent, planar_angle, planar_rotation, Dim, Ellipsoid, Pose, Superquadric, Vec3};
use crate::planner::PlannerParams;
use crate::robot::{Configuration, Joint, Link, Robot, Shape};

pub const SCHEMA: &str = "hrm-scene/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RotationRecord {
    Angle(f64),
    Quaternion([f64; 4]),
}

impl Default for RotationRecord {
    fn default() -> Self {
        RotationRecord::Angle(0.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    #[serde(default)]
    pub position: Vec<f64>,
    #[serde(default)]
    pub rotation: RotationRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyRecord {
    pub semi_axes: Vec<f64>,
    /// One exponent in 2D, `[eps1, eps2]` in 3D; ellipsoidal when omitted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exponents: Vec<f64>,
    #[serde(default)]
    pub position: Vec<f64>,
    #[serde(default)]
    pub rotation: RotationRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartRecord {
    pub semi_axes: Vec<f64>,
    #[serde(default)]
    pub position: Vec<f64>,
    #[serde(default)]
    pub rotation: RotationRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointRecord {
    /// Defaults to `z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Vec<f64>>,
    /// Defaults to the full circle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkRecord {
    /// 0 is the base, `k + 1` is link `k`.
    pub parent: usize,
    #[serde(default)]
    pub origin: PoseRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointRecord>,
    #[serde(default)]
    pub body: PoseRecord,
    pub semi_axes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotRecord {
    pub base: PartRecord,
    /// Rigid parts posed in the base frame.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<PartRecord>,
    /// Kinematic tree; mutually exclusive with `parts`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigRecord {
    pub position: Vec<f64>,
    #[serde(default)]
    pub rotation: RotationRecord,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joints: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: u8,
    #[serde(default)]
    pub planner: PlannerParams,
    pub start: ConfigRecord,
    pub goal: ConfigRecord,
    pub robot: RobotRecord,
    pub arenas: Vec<BodyRecord>,
    #[serde(default)]
    pub obstacles: Vec<BodyRecord>,
}

/// Validated scene ready for planning.
#[derive(Clone, Debug)]
pub struct Scene {
    pub file: SceneFile,
    pub env: Environment,
    pub robot: Robot,
    pub start: Configuration,
    pub goal: Configuration,
    pub params: PlannerParams,
}

fn field_err(field: impl Into<String>, message: impl ToString) -> HrmError {
    HrmError::Scene {
        field: field.into(),
        message: message.to_string(),
    }
}

fn vector(dim: Dim, v: &[f64], field: &str, default_zero: bool) -> Result<Vec3> {
    if v.is_empty() && default_zero {
        return Ok(Vec3::zeros());
    }
    if v.len() != dim.n() {
        return Err(field_err(field, format!("expected {} values, got {}", dim.n(), v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(field_err(field, "values must be finite"));
    }
    let mut out = Vec3::zeros();
    out.as_mut_slice()[..dim.n()].copy_from_slice(v);
    Ok(out)
}

fn rotation(dim: Dim, r: &RotationRecord, field: &str) -> Result<UnitQuaternion<f64>> {
    match (dim, r) {
        (Dim::Two, RotationRecord::Angle(a)) if a.is_finite() => Ok(planar_rotation(*a)),
        (Dim::Three, RotationRecord::Angle(a)) if *a == 0.0 => Ok(UnitQuaternion::identity()),
        (Dim::Three, RotationRecord::Quaternion(q)) => {
            let q = Quaternion::new(q[0], q[1], q[2], q[3]);
            let n = q.norm();
            if !(n.is_finite() && n > 1e-12) {
                return Err(field_err(field, "quaternion must be non-zero"));
            }
            Ok(UnitQuaternion::from_quaternion(q))
        }
        (Dim::Two, _) => Err(field_err(field, "2D rotations are a single angle in radians")),
        (Dim::Three, _) => Err(field_err(field, "3D rotations are [w, x, y, z] quaternions")),
    }
}

fn rotation_record(dim: Dim, q: &UnitQuaternion<f64>) -> RotationRecord {
    match dim {
        Dim::Two => RotationRecord::Angle(planar_angle(q)),
        Dim::Three => RotationRecord::Quaternion([q.w, q.i, q.j, q.k]),
    }
}

fn pose(dim: Dim, position: &[f64], rot: &RotationRecord, field: &str) -> Result<Pose> {
    Ok(Pose::new(
        rotation(dim, rot, &format!("{field}.rotation"))?,
        vector(dim, position, &format!("{field}.position"), true)?,
    ))
}

fn body(dim: Dim, rec: &mut BodyRecord, field: &str) -> Result<Superquadric> {
    let axes = vector(dim, &rec.semi_axes, &format!("{field}.semi_axes"), false)?;
    let want = dim.n() - 1;
    if !rec.exponents.is_empty() && rec.exponents.len() != want {
        return Err(field_err(
            format!("{field}.exponents"),
            format!("expected {want} values, got {}", rec.exponents.len()),
        ));
    }
    for e in &mut rec.exponents {
        if !e.is_finite() {
            return Err(field_err(format!("{field}.exponents"), "values must be finite"));
        }
        *e = clamp_exponent(*e);
    }
    let eps = match rec.exponents.as_slice() {
        [] => [1.0, 1.0],
        [e] => [*e, *e],
        [e1, e2] => [*e1, *e2],
        _ => unreachable!(),
    };
    let p = pose(dim, &rec.position, &rec.rotation, field)?;
    Superquadric::new(dim, axes, eps, p).map_err(|e| field_err(field, e))
}

fn part(dim: Dim, rec: &PartRecord, field: &str) -> Result<Ellipsoid> {
    let axes = vector(dim, &rec.semi_axes, &format!("{field}.semi_axes"), false)?;
    let p = pose(dim, &rec.position, &rec.rotation, field)?;
    Ellipsoid::new(dim, axes, p).map_err(|e| field_err(field, e))
}

fn robot(dim: Dim, rec: &RobotRecord) -> Result<Robot> {
    let base = part(dim, &rec.base, "robot.base")?;
    if !rec.parts.is_empty() && !rec.links.is_empty() {
        return Err(field_err("robot", "use either parts or links, not both"));
    }
    if rec.links.is_empty() {
        let parts = rec
            .parts
            .iter()
            .enumerate()
            .map(|(k, p)| part(dim, p, &format!("robot.parts[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        return Robot::multi_body(base, &parts).map_err(|e| field_err("robot.parts", e));
    }
    let mut links = Vec::with_capacity(rec.links.len());
    for (k, l) in rec.links.iter().enumerate() {
        let f = format!("robot.links[{k}]");
        let joint = match &l.joint {
            None => None,
            Some(j) => {
                let axis = match &j.axis {
                    Some(a) => {
                        let v = vector(Dim::Three, a, &format!("{f}.joint.axis"), false)?;
                        if v.norm() < 1e-12 {
                            return Err(field_err(format!("{f}.joint.axis"), "axis must be non-zero"));
                        }
                        v.normalize()
                    }
                    None => Vec3::z(),
                };
                let mut joint = Joint::full(axis);
                if let Some([lo, hi]) = j.limits {
                    joint.lower = lo;
                    joint.upper = hi;
                }
                Some(joint)
            }
        };
        links.push(Link {
            parent: l.parent,
            origin: pose(dim, &l.origin.position, &l.origin.rotation, &format!("{f}.origin"))?,
            joint,
            body: pose(dim, &l.body.position, &l.body.rotation, &format!("{f}.body"))?,
            semi_axes: vector(dim, &l.semi_axes, &format!("{f}.semi_axes"), false)?,
        });
    }
    Robot::new(dim, base, links).map_err(|e| field_err("robot.links", e))
}

fn configuration(dim: Dim, robot: &Robot, rec: &ConfigRecord, field: &str) -> Result<Configuration> {
    let shape = Shape {
        base_rotation: rotation(dim, &rec.rotation, &format!("{field}.rotation"))?,
        joints: rec.joints.clone(),
    };
    if shape.joints.len() != robot.num_joints() {
        return Err(field_err(
            format!("{field}.joints"),
            format!("expected {} joint angles, got {}", robot.num_joints(), shape.joints.len()),
        ));
    }
    let shape = robot.normalize_shape(&shape).map_err(|e| field_err(format!("{field}.joints"), e))?;
    Ok(Configuration {
        shape,
        translation: vector(dim, &rec.position, &format!("{field}.position"), false)?,
    })
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<SceneFile> {
        toml::from_str(text).map_err(|e| HrmError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HrmError::Parse(e.to_string()))
    }

    /// Validate and build the planning objects. Out-of-range exponents are
    /// clamped in the returned record as well.
    pub fn build(mut self) -> Result<Scene> {
        if self.schema != SCHEMA {
            return Err(field_err("schema", format!("expected \"{SCHEMA}\", got \"{}\"", self.schema)));
        }
        let dim = Dim::from_n(self.dimension as usize).ok_or_else(|| field_err("dimension", "must be 2 or 3"))?;
        if self.arenas.is_empty() {
            return Err(field_err("arenas", "at least one arena is required"));
        }
        let arenas = self
            .arenas
            .iter_mut()
            .enumerate()
            .map(|(k, a)| body(dim, a, &format!("arenas[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let obstacles = self
            .obstacles
            .iter_mut()
            .enumerate()
            .map(|(k, o)| body(dim, o, &format!("obstacles[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let env = Environment::new(dim, arenas, obstacles)?;
        let robot = robot(dim, &self.robot)?;
        let start = configuration(dim, &robot, &self.start, "start")?;
        let goal = configuration(dim, &robot, &self.goal, "goal")?;
        self.planner.validate().map_err(|e| field_err("planner", e))?;
        Ok(Scene {
            params: self.planner.clone(),
            file: self,
            env,
            robot,
            start,
            goal,
        })
    }
}

/// Parse and validate scene text.
pub fn parse_scene(text: &str) -> Result<Scene> {
    SceneFile::parse(text)?.build()
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| HrmError::Io(format!("{}: {e}", path.display())))?;
    parse_scene(&text)
}

pub fn save_scene(file: &SceneFile, path: &Path) -> Result<()> {
    std::fs::write(path, file.to_toml()?)?;
    Ok(())
}

/// Scene record for a configuration, in the file's conventions.
pub fn config_record(dim: Dim, c: &Configuration) -> ConfigRecord {
    ConfigRecord {
        position: c.translation.as_slice()[..dim.n()].to_vec(),
        rotation: rotation_record(dim, &c.shape.base_rotation),
        joints: c.shape.joints.clone(),
    }
}

/// Scene record for a superquadric body.
pub fn body_record(s: &Superquadric) -> BodyRecord {
    let n = s.dim.n();
    BodyRecord {
        semi_axes: s.axes().to_vec(),
        exponents: s.exponents().to_vec(),
        position: s.pose.translation.as_slice()[..n].to_vec(),
        rotation: rotation_record(s.dim, s.pose.rotation()),
    }
}

//! Brute-force reference implementations. Nothing here calls into the
//! Minkowski, enclosure or slice code; shapes are evaluated straight from
//! their defining formulas and robots are placed by multiplying homogeneous
//! matrices.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bridge::BridgeEdge;
use crate::cslice::CSlice;
use crate::env::Environment;
use crate::geom::{pose_interpolate, wrap_angle, Dim, Ellipsoid, Pose, Superquadric, Vec3};
use crate::robot::{Configuration, Robot, Shape};

/// Tolerance on implicit values below which a point counts as penetrating.
pub const CONTACT_MARGIN: f64 = 1e-6;
/// Default number of surface samples per body.
pub const DEFAULT_SURFACE: usize = 1000;

/// Implicit function of a posed superquadric at a world point.
pub fn superquadric_value(s: &Superquadric, p: &Vec3) -> f64 {
    let q = s.pose.inverse_transform_point(p);
    let a = s.semi_axes();
    let e = s.exponents();
    match s.dim {
        Dim::Two => (q.x / a.x).abs().powf(2.0 / e[0]) + (q.y / a.y).abs().powf(2.0 / e[0]),
        Dim::Three => {
            let (e1, e2) = (e[0], e[1]);
            let xy = (q.x / a.x).abs().powf(2.0 / e2) + (q.y / a.y).abs().powf(2.0 / e2);
            xy.powf(e2 / e1) + (q.z / a.z).abs().powf(2.0 / e1)
        }
    }
}

/// Quadratic form of a posed ellipsoid at a world point.
pub fn ellipsoid_value(e: &Ellipsoid, p: &Vec3) -> f64 {
    let q = e.pose.inverse_transform_point(p);
    let a = e.semi_axes();
    let n = e.dim.n();
    (0..n).map(|k| (q[k] / a[k]).powi(2)).sum()
}

/// Radical inverse of `i` in `base`.
fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// Deterministic direction set whose first `n` elements are the same for
/// every larger `n`.
fn directions(dim: Dim, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| match dim {
            Dim::Two => {
                let t = 2.0 * PI * radical_inverse(i + 1, 2);
                Vec3::new(t.cos(), t.sin(), 0.0)
            }
            Dim::Three => {
                let z = 1.0 - 2.0 * radical_inverse(i + 1, 2);
                let phi = 2.0 * PI * radical_inverse(i + 1, 3);
                let r = (1.0 - z * z).max(0.0).sqrt();
                Vec3::new(r * phi.cos(), r * phi.sin(), z)
            }
        })
        .collect()
}

/// Surface points of a superquadric by radial projection of body-frame
/// directions, in world coordinates.
pub fn superquadric_samples(s: &Superquadric, n: usize) -> Vec<Vec3> {
    let origin = Superquadric::new(s.dim, *s.semi_axes(), [s.exponents()[0], *s.exponents().last().unwrap()], Pose::identity())
        .expect("copy of a valid body");
    let eps = s.exponents()[0];
    directions(s.dim, n)
        .into_iter()
        .map(|d| {
            let t = superquadric_value(&origin, &d).powf(-0.5 * eps);
            s.pose.transform_point(&(d * t))
        })
        .collect()
}

/// Surface points of an ellipsoid, in world coordinates.
pub fn ellipsoid_samples(e: &Ellipsoid, n: usize) -> Vec<Vec3> {
    let a = e.semi_axes();
    directions(e.dim, n)
        .into_iter()
        .map(|d| {
            let q: f64 = (0..e.dim.n()).map(|k| (d[k] / a[k]).powi(2)).sum();
            e.pose.transform_point(&(d / q.sqrt()))
        })
        .collect()
}

/// Scene with cached obstacle samples for repeated collision queries.
#[derive(Clone, Debug)]
pub struct CollisionOracle {
    obstacles: Vec<Superquadric>,
    arenas: Vec<Superquadric>,
    obstacle_samples: Vec<Vec<Vec3>>,
    obstacle_radius: Vec<f64>,
    n_surface: usize,
}

impl CollisionOracle {
    pub fn new(obstacles: &[Superquadric], arenas: &[Superquadric], n_surface: usize) -> Self {
        CollisionOracle {
            obstacles: obstacles.to_vec(),
            arenas: arenas.to_vec(),
            obstacle_samples: obstacles.iter().map(|o| superquadric_samples(o, n_surface)).collect(),
            obstacle_radius: obstacles
                .iter()
                .map(|o| o.axes().iter().map(|a| a * a).sum::<f64>().sqrt())
                .collect(),
            n_surface,
        }
    }

    pub fn for_environment(env: &Environment, n_surface: usize) -> Self {
        Self::new(&env.obstacles, &env.arenas, n_surface)
    }

    /// True when any part penetrates an obstacle or leaves an arena.
    pub fn collides(&self, parts: &[Ellipsoid]) -> bool {
        for part in parts {
            let samples = ellipsoid_samples(part, self.n_surface);
            for arena in &self.arenas {
                if samples.iter().any(|p| superquadric_value(arena, p) > 1.0 + CONTACT_MARGIN) {
                    return true;
                }
            }
            let rp = part.semi_axes().norm();
            for (k, obs) in self.obstacles.iter().enumerate() {
                // Bodies whose bounding balls are apart cannot touch.
                if (part.center() - obs.pose.translation).norm() > rp + self.obstacle_radius[k] {
                    continue;
                }
                if samples.iter().any(|p| superquadric_value(obs, p) < 1.0 - CONTACT_MARGIN) {
                    return true;
                }
                if self.obstacle_samples[k].iter().any(|p| ellipsoid_value(part, p) < 1.0 - CONTACT_MARGIN) {
                    return true;
                }
            }
        }
        false
    }

    pub fn config_collides(&self, robot: &Robot, config: &Configuration) -> bool {
        self.collides(&place_robot(robot, config))
    }
}

/// One-shot collision query with `n_surface` samples per body.
pub fn collision_check(parts: &[Ellipsoid], obstacles: &[Superquadric], arenas: &[Superquadric], n_surface: usize) -> bool {
    CollisionOracle::new(obstacles, arenas, n_surface).collides(parts)
}

fn homogeneous(r: &Matrix3<f64>, t: &Vec3) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(t);
    m
}

fn rodrigues(axis: &Vec3, angle: f64) -> Matrix3<f64> {
    let k = axis.normalize();
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

fn pose_matrix(p: &Pose) -> Matrix4<f64> {
    homogeneous(&p.rotation_matrix(), &p.translation)
}

/// Place every part of `robot` at `config` by chaining homogeneous
/// transforms over the link tree.
pub fn place_robot(robot: &Robot, config: &Configuration) -> Vec<Ellipsoid> {
    let root = homogeneous(&config.shape.base_rotation.to_rotation_matrix().into_inner(), &Vec3::zeros());
    let mut frames = vec![root];
    let mut out = vec![(root * pose_matrix(&robot.base.pose), *robot.base.semi_axes())];
    let mut j = 0;
    for link in &robot.links {
        let mut f = frames[link.parent] * pose_matrix(&link.origin);
        if let Some(joint) = &link.joint {
            f *= homogeneous(&rodrigues(&joint.axis, config.shape.joints[j]), &Vec3::zeros());
            j += 1;
        }
        out.push((f * pose_matrix(&link.body), link.semi_axes));
        frames.push(f);
    }
    let base_center: Vec3 = out[0].0.fixed_view::<3, 1>(0, 3).into();
    out.into_iter()
        .map(|(m, axes)| {
            let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
            let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into();
            let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
            Ellipsoid::new(robot.dim, axes, Pose::new(q, t - base_center + config.translation)).expect("validated robot")
        })
        .collect()
}

/// `n` configurations from `a` to `b`: geodesic base pose, joints moving
/// linearly the short way round.
pub fn interpolate_configurations(a: &Configuration, b: &Configuration, n: usize) -> Vec<Configuration> {
    let n = n.max(2);
    let poses = pose_interpolate(
        &Pose::new(a.shape.base_rotation, a.translation),
        &Pose::new(b.shape.base_rotation, b.translation),
        n,
    )
    .poses;
    poses
        .into_iter()
        .enumerate()
        .map(|(k, pose)| {
            if k == n - 1 {
                return b.clone();
            }
            let tau = k as f64 / (n - 1) as f64;
            let joints = a
                .shape
                .joints
                .iter()
                .zip(&b.shape.joints)
                .map(|(x, y)| wrap_angle(x + tau * wrap_angle(y - x)))
                .collect();
            Configuration {
                shape: Shape {
                    base_rotation: *pose.rotation(),
                    joints,
                },
                translation: pose.translation,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub edge: usize,
    pub step: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathReport {
    pub violations: Vec<Violation>,
    pub checked: usize,
}

impl PathReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every edge of `path` at `steps_per_edge` interpolation steps.
pub fn validate_path(path: &[Configuration], robot: &Robot, env: &Environment, steps_per_edge: usize) -> PathReport {
    let oracle = CollisionOracle::for_environment(env, DEFAULT_SURFACE);
    let mut report = PathReport::default();
    if path.len() == 1 {
        report.checked = 1;
        if oracle.config_collides(robot, &path[0]) {
            report.violations.push(Violation { edge: 0, step: 0 });
        }
        return report;
    }
    for (edge, w) in path.windows(2).enumerate() {
        for (step, c) in interpolate_configurations(&w[0], &w[1], steps_per_edge + 1).iter().enumerate() {
            report.checked += 1;
            if oracle.config_collides(robot, c) {
                report.violations.push(Violation { edge, step });
            }
        }
    }
    report
}

/// Pairwise sums of `n` samples of `s1` with `n` samples of `e2` taken
/// relative to its own center.
pub fn brute_force_mink(s1: &Superquadric, e2: &Ellipsoid, n: usize) -> Vec<Vec3> {
    let a = superquadric_samples(s1, n);
    let c = e2.center();
    let b: Vec<Vec3> = ellipsoid_samples(e2, n).into_iter().map(|p| p - c).collect();
    let mut out = Vec::with_capacity(n * n);
    for p in &a {
        for q in &b {
            out.push(p + q);
        }
    }
    out
}

fn cross2(o: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise convex hull of planar points (monotone chain).
pub fn convex_hull_2d(points: &[Vec3]) -> Vec<Vec3> {
    let mut pts: Vec<Vec3> = points.iter().map(|p| Vec3::new(p.x, p.y, 0.0)).collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec3> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec3>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for p in iter {
            while hull.len() >= start + 2 && cross2(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let d = b - a;
    let l2 = d.norm_squared();
    let t = if l2 > 0.0 { ((p - a).dot(&d) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + d * t)).norm()
}

fn directed_hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    const SUBDIV: usize = 8;
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        let (p, q) = (a[i], a[(i + 1) % a.len()]);
        for s in 0..SUBDIV {
            let x = p + (q - p) * (s as f64 / SUBDIV as f64);
            let d = (0..b.len())
                .map(|j| point_segment_distance(&x, &b[j], &b[(j + 1) % b.len()]))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

/// Hausdorff distance between two closed polygons.
pub fn hausdorff_2d(a: &[Vec3], b: &[Vec3]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Rejection-sampling volume (area in 2D) of a superquadric.
pub fn monte_carlo_volume(s: &Superquadric, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = s.semi_axes();
    let n = s.dim.n();
    let origin = Superquadric::new(s.dim, *a, [s.exponents()[0], *s.exponents().last().unwrap()], Pose::identity())
        .expect("copy of a valid body");
    let mut hits = 0usize;
    for _ in 0..samples {
        let mut p = Vec3::zeros();
        for k in 0..n {
            p[k] = rng.random_range(-a[k]..a[k]);
        }
        if superquadric_value(&origin, &p) <= 1.0 {
            hits += 1;
        }
    }
    let box_volume: f64 = (0..n).map(|k| 2.0 * a[k]).product();
    box_volume * hits as f64 / samples as f64
}

fn thinnest_part(robot: &Robot) -> f64 {
    let n = robot.dim.n();
    robot
        .links
        .iter()
        .flat_map(|l| l.semi_axes.iter().take(n).copied())
        .fold(robot.base.min_semi_axis(), f64::min)
}

/// Interpolation steps for directly checking a transition: at least
/// `n_point`, and enough that consecutive samples move by no more than a
/// quarter of the thinnest part.
pub fn direct_check_steps(robot: &Robot, from: &Configuration, to: &Configuration, n_point: usize) -> usize {
    let travel = (to.translation - from.translation).norm();
    let by_travel = (travel / (0.25 * thinnest_part(robot))).ceil() as usize + 1;
    n_point.max(by_travel).max(2)
}

/// Direct-interpolation connection used as the ablation of the bridge
/// slice: every interpolated full-robot configuration is collision-checked.
#[allow(clippy::too_many_arguments)]
pub fn ablated_connect_with(
    oracle: &CollisionOracle,
    a: &CSlice,
    b: &CSlice,
    robot: &Robot,
    n_point: usize,
    lambda: f64,
    level: Option<u8>,
) -> Vec<BridgeEdge> {
    let mut out = Vec::new();
    for (u, vu) in a.vertices.iter().enumerate() {
        let key = a.lines[vu.line].key;
        if level.is_some_and(|l| l != key.level) {
            continue;
        }
        for &v in b.vertices_on(&key) {
            let pv = b.vertices[v].position;
            let from = Configuration {
                shape: a.shape.clone(),
                translation: vu.position,
            };
            let to = Configuration {
                shape: b.shape.clone(),
                translation: pv,
            };
            let steps = direct_check_steps(robot, &from, &to, n_point);
            let free = interpolate_configurations(&from, &to, steps)
                .iter()
                .all(|c| !oracle.config_collides(robot, c));
            if free {
                let rot = crate::robot::shape_distance(robot.dim, &a.shape, &b.shape);
                out.push(BridgeEdge {
                    from: u,
                    to: v,
                    cost: (pv - vu.position).norm() + lambda * rot,
                });
            }
        }
    }
    out
}

pub fn ablated_connect(a: &CSlice, b: &CSlice, robot: &Robot, env: &Environment, n_point: usize) -> Vec<BridgeEdge> {
    let oracle = CollisionOracle::for_environment(env, DEFAULT_SURFACE);
    ablated_connect_with(&oracle, a, b, robot, n_point, env.characteristic_radius(), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn samples_lie_on_surface() {
        let s = Superquadric::spatial([1.0, 2.0, 0.5], [0.4, 1.6], Pose::new(crate::geom::axis_angle(&Vec3::x(), 0.3), Vec3::new(1.0, 0.0, 2.0)))
            .unwrap();
        for p in superquadric_samples(&s, 200) {
            assert!((superquadric_value(&s, &p) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hull_of_square() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 0.5, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        assert_eq!(convex_hull_2d(&pts).len(), 4);
    }
}

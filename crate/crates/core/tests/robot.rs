use approx::assert_relative_eq;
use hrm_core::geom::*;
use hrm_core::robot::*;
use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3, Vector4};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Spatial three-link snake with two revolute joints per link.
fn snake() -> Robot {
    let base = Ellipsoid::spatial(0.6, 0.3, 0.3, Pose::identity()).unwrap();
    let mut links = Vec::new();
    let mut parent = 0;
    for k in 0..3 {
        let origin = if k == 0 { Vector3::new(0.6, 0.0, 0.0) } else { Vector3::new(1.0, 0.0, 0.0) };
        links.push(Link {
            parent,
            origin: Pose::from_translation(origin),
            joint: Some(Joint::full(Vec3::z())),
            body: Pose::identity(),
            semi_axes: Vec3::new(0.05, 0.05, 0.05),
        });
        links.push(Link {
            parent: parent + 1,
            origin: Pose::identity(),
            joint: Some(Joint { axis: Vec3::y(), lower: -1.0, upper: 1.0 }),
            body: Pose::from_translation(Vec3::new(0.5, 0.0, 0.0)),
            semi_axes: Vec3::new(0.5, 0.2, 0.2),
        });
        parent += 2;
    }
    Robot::new(Dim::Three, base, links).unwrap()
}

fn homogeneous(r: Matrix3<f64>, t: Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    m
}

/// Rodrigues rotation matrix, independent of the quaternion code path.
fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = axis.normalize();
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

/// Naive homogeneous-matrix chain over the link tree.
fn chain_oracle(robot: &Robot, base_rot: Matrix3<f64>, joints: &[f64]) -> Vec<Matrix4<f64>> {
    let mut frames = vec![homogeneous(base_rot, Vector3::zeros())];
    let mut out = vec![frames[0] * homogeneous(robot.base.pose.rotation_matrix(), robot.base.pose.translation)];
    let mut j = 0;
    for link in &robot.links {
        let mut f = frames[link.parent] * homogeneous(link.origin.rotation_matrix(), link.origin.translation);
        if let Some(joint) = &link.joint {
            f *= homogeneous(rodrigues(&joint.axis, joints[j]), Vector3::zeros());
            j += 1;
        }
        out.push(f * homogeneous(link.body.rotation_matrix(), link.body.translation));
        frames.push(f);
    }
    out
}

#[test]
fn snake_matches_matrix_chain() {
    let robot = snake();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let shape = sample_shape(&robot, &mut rng);
        let parts = robot.forward_kinematics(&shape).unwrap();
        let oracle = chain_oracle(&robot, shape.base_rotation.to_rotation_matrix().into_inner(), &shape.joints);
        let base_t: Vector3<f64> = oracle[0].fixed_view::<3, 1>(0, 3).into();
        for (p, m) in parts.iter().zip(&oracle) {
            let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into();
            let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
            assert_relative_eq!(p.offset, t - base_t, epsilon = 1e-12);
            assert_relative_eq!(p.ellipsoid.pose.rotation_matrix(), r, epsilon = 1e-12);
        }
    }
}

#[test]
fn home_shape_reproduces_offsets() {
    let base = Ellipsoid::spatial(1.0, 0.5, 0.5, Pose::identity()).unwrap();
    let parts = [
        Ellipsoid::spatial(0.3, 0.3, 0.8, Pose::new(axis_angle(&Vec3::x(), 0.4), Vec3::new(0.0, 0.7, 0.2))).unwrap(),
        Ellipsoid::spatial(0.2, 0.6, 0.2, Pose::from_translation(Vec3::new(-1.1, 0.0, 0.0))).unwrap(),
    ];
    let robot = Robot::multi_body(base, &parts).unwrap();
    let posed = robot.forward_kinematics(&robot.home_shape()).unwrap();
    for (p, e) in posed[1..].iter().zip(&parts) {
        assert_eq!(p.offset, e.center());
        assert_eq!(p.ellipsoid.pose, e.pose);
    }
}

#[test]
fn shoemake_samples_are_uniform() {
    // Canonical quaternions keep w >= 0, so the vector components average to
    // zero and |w| has mean 4 / (3 pi) under the uniform measure on SO(3).
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let mut sum = Vector4::zeros();
    for _ in 0..n {
        sum += random_rotation(Dim::Three, &mut rng).coords;
    }
    let mean = sum / n as f64;
    // Each vector component has variance 1/4, so 3 sigma is 3 * 0.5 / sqrt(n).
    let three_sigma = 3.0 * 0.5 / (n as f64).sqrt();
    for k in 0..3 {
        assert!(mean[k].abs() < three_sigma, "{mean:?}");
    }
    let ew = 4.0 / (3.0 * PI);
    let sd_w = (0.5 - ew * ew).sqrt();
    assert!((mean[3] - ew).abs() < 3.0 * sd_w / (n as f64).sqrt(), "{mean:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_kinematics_is_equivariant(seed in 0u64..10_000) {
        let robot = snake();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = sample_shape(&robot, &mut rng);
        let q: UnitQuaternion<f64> = random_rotation(Dim::Three, &mut rng);
        let rotated = Shape { base_rotation: q * shape.base_rotation, joints: shape.joints.clone() };
        let a = robot.forward_kinematics(&shape).unwrap();
        let b = robot.forward_kinematics(&rotated).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            prop_assert!((q * pa.offset - pb.offset).norm() < 1e-12);
            prop_assert!(rotation_distance(Dim::Three, &(q * pa.ellipsoid.rotation()), pb.ellipsoid.rotation()) < 1e-12);
        }
    }

    #[test]
    fn wrapped_joints_give_same_pose(theta in -3.0f64..3.0) {
        let base = Ellipsoid::planar(1.0, 0.5, Pose::identity()).unwrap();
        let robot = Robot::planar_chain(base, &[(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.8, 0.3, 0.0))]).unwrap();
        let a = robot.forward_kinematics(&Shape::rigid(UnitQuaternion::identity()).with_joints(vec![theta])).unwrap();
        let b = robot.forward_kinematics(&Shape::rigid(UnitQuaternion::identity()).with_joints(vec![theta + 2.0 * PI])).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            prop_assert!((pa.offset - pb.offset).norm() < 1e-12);
            prop_assert!(rotation_distance(Dim::Two, pa.ellipsoid.rotation(), pb.ellipsoid.rotation()) < 1e-12);
        }
    }

    #[test]
    fn joints_stay_within_limits(seed in 0u64..10_000) {
        let robot = snake();
        let shape = sample_shape(&robot, &mut ChaCha8Rng::seed_from_u64(seed));
        for (j, &t) in robot.joints().zip(&shape.joints) {
            prop_assert!(t >= j.lower && t <= j.upper);
        }
    }
}

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use hrm_core::bridge::*;
use hrm_core::cli::scene::{load_scene, Scene};
use hrm_core::cslice::{CSlice, SweepGrid};
use hrm_core::env::Environment;
use hrm_core::geom::*;
use hrm_core::oracle::{ablated_connect, collision_check, place_robot, validate_path};
use hrm_core::planner::icosahedral_group;
use hrm_core::robot::{shape_distance, Configuration, Robot, Shape};
use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene(name: &str) -> Scene {
    load_scene(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)).unwrap()
}

fn planar(deg: f64) -> Shape {
    Shape::rigid(planar_rotation(deg.to_radians()))
}

fn slice(scene: &Scene, grid: &SweepGrid, id: usize, shape: Shape, levels: u8) -> CSlice {
    let parts = scene.robot.forward_kinematics(&shape).unwrap();
    let mut s = CSlice::construct(id, shape, &parts, &scene.env.obstacles, &scene.env.arenas, grid, 0, 100).unwrap();
    for l in 1..=levels {
        s.add_level(grid, l);
    }
    s
}

#[test]
fn nearest_slice_examples() {
    let shapes = [planar(0.0), planar(10.0), planar(170.0)];
    assert_eq!(nearest_slice(Dim::Two, 0, &shapes), Some(1));
    let shapes = [planar(170.0), planar(0.0), planar(-170.0)];
    assert_eq!(nearest_slice(Dim::Two, 0, &shapes), Some(2));
    assert_eq!(nearest_slice(Dim::Two, 0, &shapes[..1]), None);
}

// Exhaustive scan over raw quaternion coordinates, antipodes identified.
#[test]
fn nearest_slice_matches_scan_on_icosahedral_group() {
    let group = icosahedral_group();
    let shapes: Vec<Shape> = group.iter().map(|q| Shape::rigid(*q)).collect();
    let coords: Vec<[f64; 4]> = group.iter().map(|q| [q.w, q.i, q.j, q.k]).collect();
    let dist = |a: &[f64; 4], b: &[f64; 4]| {
        let minus: f64 = (0..4).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt();
        let plus: f64 = (0..4).map(|k| (a[k] + b[k]).powi(2)).sum::<f64>().sqrt();
        minus.min(plus)
    };
    for i in 0..shapes.len() {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..shapes.len() {
            let d = dist(&coords[i], &coords[j]);
            if j != i && d < best.1 - 1e-12 {
                best = (j, d);
            }
        }
        let got = nearest_slice(Dim::Three, i, &shapes).unwrap();
        let d_got = dist(&coords[i], &coords[got]);
        assert!((d_got - best.1).abs() < 1e-12, "slice {i}: {got} at {d_got} vs {} at {}", best.0, best.1);
    }
}

#[test]
fn interpolated_shapes_end_exactly() {
    let a = Shape::rigid(planar_rotation(0.3)).with_joints(vec![3.0, -1.0]);
    let b = Shape::rigid(planar_rotation(-2.9)).with_joints(vec![-3.0, 0.5]);
    let s = interpolate_shapes(&a, &b, 7);
    assert_eq!(s.len(), 7);
    assert_eq!(s[6].joints, b.joints);
    assert!(rotation_distance(Dim::Two, &s[6].base_rotation, &b.base_rotation) < 1e-12);
    // Joint 0 goes the short way through pi.
    assert!(s[3].joints[0].abs() > 3.0);
}

#[test]
fn coincident_vertices_connect_in_empty_scene() {
    let arena = Superquadric::planar(5.0, 5.0, 0.5, Pose::identity()).unwrap();
    let robot = Robot::multi_body(Ellipsoid::planar(0.6, 0.3, Pose::identity()).unwrap(), &[]).unwrap();
    let s = planar(20.0);
    let b = BridgeSlice::build(&robot, (0, &s), (1, &s), &[], &[arena], 5, 100).unwrap();
    let t = Vec3::new(0.5, -0.5, 0.0);
    assert!(b.is_transition_valid(&t, &t));
    assert_eq!(b.tfes.len(), 1);
    assert_eq!(b.interp_rotations.len(), 5);
}

// A bar turning a quarter circle in place clips two posts on the diagonal,
// although it is clear at both ends.
#[test]
fn rotating_bar_blocked_by_diagonal_posts() {
    let arena = Superquadric::planar(4.0, 4.0, 0.2, Pose::identity()).unwrap();
    let posts = vec![
        Superquadric::planar(0.15, 0.15, 1.0, Pose::planar(0.6, 0.6, 0.0)).unwrap(),
        Superquadric::planar(0.15, 0.15, 1.0, Pose::planar(-0.6, -0.6, 0.0)).unwrap(),
    ];
    let env = Environment::new(Dim::Two, vec![arena], posts).unwrap();
    let robot = Robot::multi_body(Ellipsoid::planar(1.0, 0.1, Pose::identity()).unwrap(), &[]).unwrap();
    let (a, b) = (planar(0.0), planar(90.0));
    let at = |s: &Shape| Configuration {
        shape: s.clone(),
        translation: Vec3::zeros(),
    };
    let free = |c: &Configuration| !collision_check(&place_robot(&robot, c), &env.obstacles, &env.arenas, 1000);
    assert!(free(&at(&a)) && free(&at(&b)));
    assert!(!free(&at(&planar(45.0))));
    let bridge = BridgeSlice::build(&robot, (0, &a), (1, &b), &env.obstacles, &env.arenas, default_n_point(FRAC_PI_2), 100).unwrap();
    assert!(!bridge.is_transition_valid(&Vec3::zeros(), &Vec3::zeros()));
}

// Every part, at orientations 10x finer than those used to build the TFE,
// stays inside its TFE (support-function dominance).
#[test]
fn tfe_contains_parts_at_finer_steps() {
    let sc = scene("cluttered-3d.toml");
    let a = Shape::rigid(UnitQuaternion::identity());
    let b = Shape::rigid(axis_angle(&Vec3::new(0.3, -1.0, 0.6).normalize(), 0.7));
    let n = default_n_point(rotation_distance(Dim::Three, &a.base_rotation, &b.base_rotation));
    let bridge = BridgeSlice::build(&sc.robot, (0, &a), (1, &b), &sc.env.obstacles, &sc.env.arenas, n, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dirs: Vec<Vec3> = (0..1000)
        .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize())
        .collect();
    for s in interpolate_shapes(&a, &b, 10 * n) {
        for p in sc.robot.forward_kinematics(&s).unwrap() {
            let part = p.ellipsoid.with_center(Vec3::zeros());
            let t = &bridge.tfes[p.index];
            for u in &dirs {
                assert!(part.support(u) <= t.support(u) + 1e-9);
            }
        }
    }
}

fn pairwise(scene: &Scene, a: Shape, b: Shape, counts: [usize; 2], levels: u8) {
    let grid = SweepGrid::for_arenas(scene.env.dim, &scene.env.arenas, counts).unwrap();
    let (sa, sb) = (slice(scene, &grid, 0, a, levels), slice(scene, &grid, 1, b, levels));
    let n = default_n_point(shape_distance(scene.env.dim, &sa.shape, &sb.shape));
    let lambda = scene.env.characteristic_radius();
    let bridge = connect_adjacent_slice(&sa, &sb, &scene.robot, &scene.env.obstacles, &scene.env.arenas, Some(n), 100, lambda).unwrap();
    let ablated = ablated_connect(&sa, &sb, &scene.robot, &scene.env, n);
    assert!(!bridge.is_empty());
    assert!(bridge.len() <= ablated.len());
    let accepted: HashSet<(usize, usize)> = ablated.iter().map(|e| (e.from, e.to)).collect();
    for e in &bridge {
        assert!(accepted.contains(&(e.from, e.to)), "bridge edge {e:?} not accepted by direct checks");
        let path = [
            Configuration {
                shape: sa.shape.clone(),
                translation: sa.vertices[e.from].position,
            },
            Configuration {
                shape: sb.shape.clone(),
                translation: sb.vertices[e.to].position,
            },
        ];
        assert!(validate_path(&path, &scene.robot, &scene.env, 100).is_valid(), "edge {e:?} collides");
    }
}

#[test]
fn cluttered_2d_bridge_edges_are_safe_and_a_subset() {
    let sc = scene("cluttered-2d.toml");
    pairwise(&sc, planar(0.0), planar(15.0), [1, 24], 0);
    pairwise(&sc, planar(-165.0), planar(180.0), [1, 24], 0);
}

#[test]
fn articulated_bridge_edges_are_safe_and_a_subset() {
    let sc = scene("snake-2d.toml");
    let a = Shape::rigid(planar_rotation(0.2)).with_joints(vec![0.0, 0.3]);
    let b = Shape::rigid(planar_rotation(0.4)).with_joints(vec![0.3, 0.0]);
    pairwise(&sc, a, b, [1, 20], 0);
}

#[test]
fn cluttered_3d_bridge_edges_are_safe_and_a_subset() {
    let sc = scene("cluttered-3d.toml");
    let group = icosahedral_group();
    let shapes: Vec<Shape> = group.iter().map(|q| Shape::rigid(*q)).collect();
    let j = nearest_slice(Dim::Three, 0, &shapes).unwrap();
    pairwise(&sc, shapes[0].clone(), shapes[j].clone(), [8, 6], 0);
}

// Random transitions in the cluttered scene: acceptance implies the dense
// oracle finds no collision. Rejections are allowed.
#[test]
fn random_transitions_have_no_false_positives() {
    let sc = scene("cluttered-2d.toml");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut accepted = 0;
    let mut pairs = 0;
    while pairs < 100 {
        let th = rng.random_range(-PI..PI);
        let (a, b) = (Shape::rigid(planar_rotation(th)), Shape::rigid(planar_rotation(th + rng.random_range(-0.4..0.4))));
        let n = default_n_point(shape_distance(Dim::Two, &a, &b));
        let bridge = BridgeSlice::build(&sc.robot, (0, &a), (1, &b), &sc.env.obstacles, &sc.env.arenas, n, 100).unwrap();
        let t1 = Vec3::new(rng.random_range(-7.0..7.0), rng.random_range(-4.0..4.0), 0.0);
        let t2 = t1 + Vec3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), 0.0);
        pairs += 1;
        if bridge.is_transition_valid(&t1, &t2) {
            accepted += 1;
            let path = [
                Configuration {
                    shape: a.clone(),
                    translation: t1,
                },
                Configuration {
                    shape: b.clone(),
                    translation: t2,
                },
            ];
            assert!(validate_path(&path, &sc.robot, &sc.env, 100).is_valid(), "false positive {t1:?} -> {t2:?}");
        }
    }
    assert!(accepted > 10, "only {accepted} transitions accepted");
}

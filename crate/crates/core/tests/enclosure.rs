use approx::assert_relative_eq;
use hrm_core::enclosure::*;
use hrm_core::geom::*;
use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};

fn directions(dim: Dim, n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                if dim == Dim::Three { rng.random_range(-1.0..1.0) } else { 0.0 },
            );
            let l = v.norm();
            if l > 1e-3 && l <= 1.0 {
                break v / l;
            }
        })
        .collect()
}

fn dominates(outer: &Ellipsoid, inner: &Ellipsoid, dirs: &[Vec3], slack: f64) -> bool {
    dirs.iter().all(|u| outer.support(u) >= inner.support(u) - slack)
}

#[test]
fn mvee_recovers_ellipsoid_from_surface_samples() {
    let s = Superquadric::spatial([2.0, 1.0, 0.5], [1.0, 1.0], Pose::identity()).unwrap();
    let pts: Vec<Vec3> = s.surface_points(200).into_iter().map(|p| p.point).collect();
    let e = mvee(Dim::Three, &pts).unwrap();
    let mut axes = e.axes().to_vec();
    axes.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for (got, want) in axes.iter().zip([2.0, 1.0, 0.5]) {
        assert!((got - want).abs() / want < 0.02, "{axes:?}");
    }
}

#[test]
fn mvee_of_triangle_matches_steiner_ellipse() {
    // The minimum-area ellipse through a triangle's vertices is its Steiner
    // circumellipse, with area 4 pi / (3 sqrt 3) times the triangle area.
    let pts = [Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
    let e = mvee(Dim::Two, &pts).unwrap();
    for p in &pts {
        assert!(e.implicit(p) <= 1.0 + 1e-6);
    }
    let steiner = 4.0 * PI / (3.0 * 3f64.sqrt()) * 0.5;
    assert!(e.volume() <= 1.01 * steiner, "{} vs {steiner}", e.volume());
    assert!(e.volume() >= steiner * (1.0 - 1e-9));
}

#[test]
fn mvce_crossed_ellipses_beats_enclosing_family() {
    let a = planar_ellipse(2.0, 1.0, 0.0, Vec3::zeros()).unwrap();
    let b = planar_ellipse(1.0, 2.0, 0.0, Vec3::zeros()).unwrap();
    let m = mvce(&a, &b).unwrap();
    let dirs = directions(Dim::Two, 1000, 1);
    assert!(dominates(&m, &a, &dirs, 1e-9) && dominates(&m, &b, &dirs, 1e-9));
    // Any concentric ellipse in a sampled family that encloses both is no
    // smaller.
    for i in 1..40 {
        for j in 1..40 {
            for k in 0..12 {
                let cand = planar_ellipse(
                    1.5 + i as f64 * 0.05,
                    1.5 + j as f64 * 0.05,
                    k as f64 * PI / 12.0,
                    Vec3::zeros(),
                )
                .unwrap();
                if dominates(&cand, &a, &dirs, 0.0) && dominates(&cand, &b, &dirs, 0.0) {
                    assert!(cand.volume() >= m.volume() - 1e-9);
                }
            }
        }
    }
}

#[test]
fn tfe_contains_part_at_finer_steps() {
    let part = Ellipsoid::spatial(2.0, 1.0, 1.0, Pose::identity()).unwrap();
    let ri = UnitQuaternion::identity();
    let rj = axis_angle(&Vec3::z(), FRAC_PI_2);
    let t = compute_tfe(&[part], &ri, &rj, 10).unwrap();
    let dirs = directions(Dim::Three, 1000, 2);
    for r in rotation_interpolate(&ri, &rj, 10).iter().chain(&rotation_interpolate(&ri, &rj, 100)) {
        let placed = part.with_pose(Pose::from_rotation(*r));
        assert!(dominates(&t[0], &placed, &dirs, 1e-9));
    }
}

#[test]
fn tfe_grows_with_more_orientations() {
    let part = planar_ellipse(2.0, 0.5, 0.0, Vec3::zeros()).unwrap();
    let rots: Vec<_> = (0..12).map(|k| planar_rotation(k as f64 * 0.1)).collect();
    let mut prev = 0.0;
    for k in 1..=rots.len() {
        let v = tfe(&part, &rots[..k]).unwrap().volume();
        assert!(v >= prev - 1e-12);
        prev = v;
    }
}

#[test]
fn tfe_shrinks_to_part_as_gap_closes() {
    let part = Ellipsoid::spatial(2.0, 1.0, 0.5, Pose::identity()).unwrap();
    let ri = UnitQuaternion::identity();
    let mut prev = f64::INFINITY;
    for angle in [1.0, 0.5, 0.25, 0.1, 0.01, 0.0] {
        let rj = axis_angle(&Vector3::new(1.0, 2.0, 0.5), angle);
        let v = compute_tfe(&[part], &ri, &rj, 8).unwrap()[0].volume();
        assert!(v <= prev + 1e-9);
        prev = v;
    }
    assert_relative_eq!(prev, part.volume(), max_relative = 1e-9);
}

#[test]
fn fit_unit_sphere() {
    let s = Superquadric::spatial([1.0; 3], [1.0, 1.0], Pose::identity()).unwrap();
    let pts: Vec<Vec3> = s.surface_points(300).into_iter().map(|p| p.point).collect();
    let fit = fit_superquadric(&pts).unwrap();
    for &a in fit.body.axes() {
        assert!((a - 1.0).abs() < 0.02, "{:?}", fit.body);
    }
    for &e in fit.body.exponents() {
        assert!((e - 1.0).abs() < 0.1, "{:?}", fit.body);
    }
}

/// Rejection-sampling area of a posed superellipse.
fn monte_carlo_area(s: &Superquadric, n: usize, seed: u64) -> f64 {
    let r = s.bounding_radius();
    let c = s.center();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..n)
        .filter(|_| {
            let p = c + Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), 0.0);
            s.implicit_world(&p) <= 1.0
        })
        .count();
    4.0 * r * r * hits as f64 / n as f64
}

#[test]
fn fit_rotated_superellipse() {
    let truth =
        Superquadric::planar(2.0, 1.0, 0.5, Pose::planar(0.3, -0.2, 30f64.to_radians())).unwrap();
    let pts: Vec<Vec3> = truth
        .surface_points(200)
        .into_iter()
        .map(|p| truth.pose.transform_point(&p.point))
        .collect();
    let fit = fit_superellipse(&pts).unwrap();
    let k = kappa_volume(monte_carlo_area(&fit.body, 400_000, 4), monte_carlo_area(&truth, 400_000, 5));
    assert!(k < 0.05, "kappa {k}, {:?}", fit.body);
}

#[test]
fn fit_superquadric_with_middle_length_z_axis() {
    let pose = Pose::new(UnitQuaternion::from_euler_angles(0.4, -0.3, 1.0), Vec3::new(0.5, -1.0, 2.0));
    let truth = Superquadric::spatial([0.8, 2.0, 1.3], [0.3, 1.2], pose).unwrap();
    let pts: Vec<Vec3> = truth
        .surface_points(400)
        .into_iter()
        .map(|p| truth.pose.transform_point(&p.point))
        .collect();
    let fit = fit_superquadric(&pts).unwrap();
    assert!(fit.residual < 0.05, "{:?}", fit.body);
    assert!(kappa_volume(fit.body.volume(), truth.volume()) < 0.05, "{:?}", fit.body);
}

#[test]
fn fit_objective_never_increases() {
    let truth = Superquadric::spatial(
        [1.5, 0.8, 1.2],
        [0.6, 1.4],
        Pose::new(axis_angle(&Vector3::new(1.0, 1.0, 1.0), 0.5), Vec3::new(0.5, 0.0, -1.0)),
    )
    .unwrap();
    let pts: Vec<Vec3> = truth
        .surface_points(200)
        .into_iter()
        .map(|p| truth.pose.transform_point(&p.point))
        .collect();
    let fit = fit_superquadric(&pts).unwrap();
    assert!(fit.objective_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(fit.residual >= 0.0);
}

#[test]
fn fit_initializer_encloses_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pts: Vec<Vec3> = (0..40)
        .map(|_| Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5)))
        .collect();
    let init = mvee(Dim::Three, &pts).unwrap();
    assert!(pts.iter().all(|p| init.implicit(p) <= 1.0 + 1e-6));
}

#[test]
fn fit_needs_enough_points() {
    let pts = vec![Vec3::zeros(); 5];
    assert!(fit_superellipse(&pts).is_err());
}

fn random_ellipsoid(dim: Dim, rng: &mut ChaCha8Rng) -> Ellipsoid {
    let axes = Vec3::new(rng.random_range(0.2..3.0), rng.random_range(0.2..3.0), rng.random_range(0.2..3.0));
    let rot = match dim {
        Dim::Two => planar_rotation(rng.random_range(-PI..PI)),
        Dim::Three => UnitQuaternion::from_scaled_axis(Vector3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        )),
    };
    Ellipsoid::new(dim, axes, Pose::from_rotation(rot)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mvce_contains_both_and_is_idempotent(seed in 0u64..10_000, three in any::<bool>()) {
        let dim = if three { Dim::Three } else { Dim::Two };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_ellipsoid(dim, &mut rng);
        let b = random_ellipsoid(dim, &mut rng);
        let m = mvce(&a, &b).unwrap();
        let dirs = directions(dim, 1000, seed);
        prop_assert!(dominates(&m, &a, &dirs, 1e-9));
        prop_assert!(dominates(&m, &b, &dirs, 1e-9));
        let again = mvce(&m, &a).unwrap();
        prop_assert!((again.shape_matrix() - m.shape_matrix()).amax() < 1e-9);
    }

    #[test]
    fn mvee_contains_inputs(seed in 0u64..10_000, n in 4usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec3> = (0..n)
            .map(|_| Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0)))
            .collect();
        let e = mvee(Dim::Three, &pts).unwrap();
        for p in &pts {
            prop_assert!(e.implicit(p) <= 1.0 + 1e-6);
        }
    }
}
